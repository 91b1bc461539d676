use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{collect_demonstration, place_camera, CameraParams, DemoSeeds, Demonstration, SimError};
use crate::dataset::{self, channel_range, demo_dir_name, scene_file_name, Manifest, ManifestEntry};
use crate::planner::{plan_scan_path, sample_target_region, PlannerParams};
use crate::rng::{derive_seed, stream_rng, uniform};
use crate::scene::{generate_scene, SceneParams, SurfaceScene};

const STREAM_SCENES: u64 = 0x5CE7E;
const STREAM_DEMOS: u64 = 0xDE70;

/// Gaussian target-region sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionParams {
    pub n_points: usize,
    /// Range of the two principal standard deviations (cm).
    pub sigma_range: [f64; 2],
    /// Region means are drawn uniformly from this centred fraction of the scene.
    pub mean_extent: f64,
}

impl Default for RegionParams {
    fn default() -> Self {
        Self {
            n_points: 32,
            sigma_range: [0.55, 1.2],
            mean_extent: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub n_scenes: usize,
    pub regions_per_scene: usize,
    pub scene: SceneParams,
    pub region: RegionParams,
    pub planner: PlannerParams,
    pub camera: CameraParams,
    pub frame_stride: usize,
    /// Demonstrations with fewer frames are redrawn with a new region.
    pub min_frames: usize,
    /// Region redraws allowed per demonstration.
    pub max_region_draws: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_scenes: 5,
            regions_per_scene: 10,
            scene: SceneParams::default(),
            region: RegionParams::default(),
            planner: PlannerParams::default(),
            camera: CameraParams::default(),
            frame_stride: 2,
            min_frames: 8,
            max_region_draws: 10,
        }
    }
}

impl GenConfig {
    pub fn n_demos(&self) -> usize {
        self.n_scenes * self.regions_per_scene
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadParams(m.into()));
        if self.n_scenes == 0 || self.regions_per_scene == 0 {
            return bad("need at least one scene and one region per scene");
        }
        if self.frame_stride == 0 || self.max_region_draws == 0 {
            return bad("frame stride and region draws must be at least 1");
        }
        let [s0, s1] = self.region.sigma_range;
        if !(0.0 < s0 && s0 <= s1) {
            return bad("sigma range must be positive and ordered");
        }
        if !(0.0..=1.0).contains(&self.region.mean_extent) {
            return bad("mean extent must lie in [0, 1]");
        }
        self.camera.validate()
    }
}

pub fn scene_seed(master: u64, scene: usize) -> u64 {
    derive_seed(derive_seed(master, STREAM_SCENES), scene as u64)
}

pub fn demo_seed(master: u64, demo: usize) -> u64 {
    derive_seed(derive_seed(master, STREAM_DEMOS), demo as u64)
}

pub fn generate_scenes(config: &GenConfig) -> Result<Vec<SurfaceScene>, SimError> {
    config.validate()?;
    (0..config.n_scenes)
        .map(|i| Ok(generate_scene(i as u32, scene_seed(config.seed, i), &config.scene)?))
        .collect()
}

/// Demonstration `index`, on scene `index / regions_per_scene`.
///
/// Each draw samples a region mean and covariance, the hull, the path and the
/// camera from seeds derived from the demo seed and the draw number. Draws
/// whose camera cannot be placed or that yield fewer than `min_frames`
/// frames are discarded.
pub fn generate_demo(config: &GenConfig, scenes: &[SurfaceScene], index: usize) -> Result<Demonstration, SimError> {
    let scene = &scenes[index / config.regions_per_scene];
    let seed = demo_seed(config.seed, index);
    let b = scene.bounds;
    let (cx, cy) = (0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max));
    let (hx, hy) = (0.5 * config.region.mean_extent * b.width(), 0.5 * config.region.mean_extent * b.height());

    for draw in 0..config.max_region_draws as u64 {
        let mut rng = stream_rng(derive_seed(seed, 3 * draw));
        let mean = [uniform(&mut rng, cx - hx, cx + hx), uniform(&mut rng, cy - hy, cy + hy)];
        let [s0, s1] = config.region.sigma_range;
        let (sa, sb) = (uniform(&mut rng, s0, s1), uniform(&mut rng, s0, s1));
        let (sin, cos) = uniform(&mut rng, 0.0, std::f64::consts::PI).sin_cos();
        let off = (sa * sa - sb * sb) * cos * sin;
        let cov = [
            [sa * sa * cos * cos + sb * sb * sin * sin, off],
            [off, sa * sa * sin * sin + sb * sb * cos * cos],
        ];
        let region_seed = derive_seed(seed, 3 * draw + 1);
        let camera_seed = derive_seed(seed, 3 * draw + 2);

        let region = sample_target_region(region_seed, &b, mean, cov, config.region.n_points)?;
        let path = plan_scan_path(scene, &region, &config.planner)?;
        let camera = match place_camera(&region, scene, &config.camera, camera_seed) {
            Ok(c) => c,
            Err(SimError::CameraPlacementFailed { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut demo = match collect_demonstration(scene, &region, &camera, &path, config.frame_stride) {
            Ok(d) => d,
            Err(SimError::PathTooShort { .. }) => continue,
            Err(e) => return Err(e),
        };
        if demo.len() < config.min_frames {
            continue;
        }
        demo.meta.id = index;
        demo.meta.seeds = DemoSeeds {
            demo: seed,
            scene: scene.seed,
            region: region_seed,
            camera: camera_seed,
        };
        return Ok(demo);
    }
    Err(SimError::DrawsExhausted {
        draws: config.max_region_draws,
    })
}

/// Generate scenes and all demonstrations into `out`, in parallel on the
/// current rayon pool, and write the manifest. Output bytes do not depend on
/// the number of threads.
pub fn generate_dataset(config: &GenConfig, out: &Path) -> Result<Manifest, SimError> {
    let scenes = generate_scenes(config)?;
    let mut scene_files = Vec::with_capacity(scenes.len());
    for s in &scenes {
        let name = scene_file_name(s.id);
        dataset::save_scene(&out.join(&name), s)?;
        scene_files.push(name);
    }

    let results: Vec<(ManifestEntry, [f32; 5], [f32; 5])> = (0..config.n_demos())
        .into_par_iter()
        .map(|index| {
            let wrap = |e: SimError| SimError::Demo {
                index,
                source: Box::new(e),
            };
            let demo = generate_demo(config, &scenes, index).map_err(wrap)?;
            let dir = demo_dir_name(index);
            dataset::save_demo(&out.join(&dir), &demo).map_err(|e| wrap(e.into()))?;
            let (lo, hi) = channel_range(&demo);
            log::debug!("demo {index}: {} frames, {:.2} cm", demo.len(), demo.meta.path_length);
            let m = demo.meta;
            let entry = ManifestEntry {
                id: index,
                dir,
                scene_id: m.scene_id,
                seeds: m.seeds,
                n_frames: m.n_frames,
                path_length: m.path_length,
                area: m.area,
            };
            Ok((entry, lo, hi))
        })
        .collect::<Result<_, SimError>>()?;

    let mut channel_min = [f32::INFINITY; 5];
    let mut channel_max = [f32::NEG_INFINITY; 5];
    for (_, lo, hi) in &results {
        for c in 0..5 {
            channel_min[c] = channel_min[c].min(lo[c]);
            channel_max[c] = channel_max[c].max(hi[c]);
        }
    }
    let manifest = Manifest {
        seed: config.seed,
        config: config.clone(),
        scenes: scene_files,
        demos: results.into_iter().map(|r| r.0).collect(),
        channel_min,
        channel_max,
    };
    dataset::save_manifest(out, &manifest)?;
    Ok(manifest)
}
