//! On-disk layout of a dataset directory:
//!
//! ```text
//! manifest.json
//! scenes/scene_000.json
//! demo_0000/meta.json
//! demo_0000/frames.bin   "SCN1", u32 count, u32 W, u32 H, then per frame
//!                        rgb f32[H·W·3], depth f32[H·W], mask u8[H·W]
//! demo_0000/poses.bin    "PSE1", u32 count, then per pose f64[7]
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::geometry::Pose;
use crate::scene::SurfaceScene;
use crate::simulator::{DemoMeta, DemoSeeds, Demonstration, GenConfig, ObservationFrame, RgbdImage};

pub const FRAMES_MAGIC: &[u8; 4] = b"SCN1";
pub const POSES_MAGIC: &[u8; 4] = b"PSE1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const META_FILE: &str = "meta.json";
pub const FRAMES_FILE: &str = "frames.bin";
pub const POSES_FILE: &str = "poses.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Directory relative to the dataset root.
    pub dir: String,
    pub scene_id: u32,
    pub seeds: DemoSeeds,
    pub n_frames: usize,
    pub path_length: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: GenConfig,
    pub scenes: Vec<String>,
    pub demos: Vec<ManifestEntry>,
    /// Per-channel minimum over all frames: R, G, B, depth, mask.
    pub channel_min: [f32; 5],
    pub channel_max: [f32; 5],
}

pub fn demo_dir_name(index: usize) -> String {
    format!("demo_{index:04}")
}

pub fn scene_file_name(id: u32) -> String {
    format!("scenes/scene_{id:03}.json")
}

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DatasetError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| DatasetError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Bounds-checked little-endian reader over a whole file.
struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(DatasetError::Truncated {
                path: self.path.to_path_buf(),
                expected: self.pos.saturating_add(n),
                actual: self.bytes.len(),
            });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<(), DatasetError> {
        let found = self.take(4)?;
        if found != expected {
            return Err(DatasetError::CorruptMagic {
                path: self.path.to_path_buf(),
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<usize, DatasetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DatasetError> {
        let raw = self.take(n.checked_mul(4).unwrap_or(usize::MAX))?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DatasetError> {
        let raw = self.take(n.checked_mul(8).unwrap_or(usize::MAX))?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> Result<(), DatasetError> {
        if self.pos != self.bytes.len() {
            return Err(DatasetError::Invalid(format!(
                "{}: {} trailing bytes",
                self.path.display(),
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<(), DatasetError> {
    let v = u32::try_from(v).map_err(|_| DatasetError::Invalid(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_frames(images: &[&RgbdImage]) -> Result<Vec<u8>, DatasetError> {
    let (w, h) = images.first().map_or((0, 0), |f| (f.width, f.height));
    let per_frame = w * h * (3 * 4 + 4 + 1);
    let mut buf = Vec::with_capacity(16 + images.len() * per_frame);
    buf.extend_from_slice(FRAMES_MAGIC);
    put_u32(&mut buf, images.len())?;
    put_u32(&mut buf, w)?;
    put_u32(&mut buf, h)?;
    for img in images {
        if img.width != w || img.height != h {
            return Err(DatasetError::Invalid("frames differ in size".into()));
        }
        for v in img.rgb.iter().chain(&img.depth) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&img.mask);
    }
    Ok(buf)
}

pub fn decode_frames(path: &Path, bytes: &[u8]) -> Result<Vec<RgbdImage>, DatasetError> {
    let mut r = Reader { path, bytes, pos: 0 };
    r.magic(FRAMES_MAGIC)?;
    let count = r.u32()?;
    let (w, h) = (r.u32()?, r.u32()?);
    let n = w * h;
    let mut out = Vec::with_capacity(count.min(bytes.len() / (n * 17).max(1) + 1));
    for _ in 0..count {
        let rgb = r.f32s(3 * n)?;
        let depth = r.f32s(n)?;
        let mask = r.take(n)?.to_vec();
        out.push(RgbdImage {
            width: w,
            height: h,
            rgb,
            depth,
            mask,
        });
    }
    r.finish()?;
    Ok(out)
}

pub fn encode_poses(poses: &[Pose]) -> Result<Vec<u8>, DatasetError> {
    let mut buf = Vec::with_capacity(8 + 56 * poses.len());
    buf.extend_from_slice(POSES_MAGIC);
    put_u32(&mut buf, poses.len())?;
    for p in poses {
        for v in p.to_array() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_poses(path: &Path, bytes: &[u8]) -> Result<Vec<Pose>, DatasetError> {
    let mut r = Reader { path, bytes, pos: 0 };
    r.magic(POSES_MAGIC)?;
    let count = r.u32()?;
    let mut out = Vec::with_capacity(count.min(bytes.len() / 56 + 1));
    for _ in 0..count {
        let a = r.f64s(7)?;
        out.push(Pose::from_array(a.try_into().unwrap()));
    }
    r.finish()?;
    Ok(out)
}

/// Write `meta.json`, `frames.bin` and `poses.bin` into `dir`.
pub fn save_demo(dir: &Path, demo: &Demonstration) -> Result<(), DatasetError> {
    if demo.frames.len() != demo.poses_cam.len() {
        return Err(DatasetError::Invalid("frames and poses differ in length".into()));
    }
    write_json(&dir.join(META_FILE), &demo.meta)?;
    let images: Vec<&RgbdImage> = demo.frames.iter().map(|f| &f.image).collect();
    write_file(&dir.join(FRAMES_FILE), &encode_frames(&images)?)?;
    write_file(&dir.join(POSES_FILE), &encode_poses(&demo.poses_cam)?)
}

pub fn load_meta(dir: &Path) -> Result<DemoMeta, DatasetError> {
    read_json(&dir.join(META_FILE))
}

pub fn load_poses(dir: &Path) -> Result<Vec<Pose>, DatasetError> {
    let path = dir.join(POSES_FILE);
    decode_poses(&path, &read_file(&path)?)
}

pub fn load_demo(dir: &Path) -> Result<Demonstration, DatasetError> {
    let meta = load_meta(dir)?;
    let frames_path = dir.join(FRAMES_FILE);
    let images = decode_frames(&frames_path, &read_file(&frames_path)?)?;
    let poses = load_poses(dir)?;
    if images.len() != poses.len() || images.len() != meta.n_frames {
        return Err(DatasetError::Invalid(format!(
            "{}: {} frames, {} poses, meta says {}",
            dir.display(),
            images.len(),
            poses.len(),
            meta.n_frames
        )));
    }
    let frames = images
        .into_iter()
        .zip(&poses)
        .map(|(image, p)| ObservationFrame { image, ee_pose_cam: *p })
        .collect();
    Ok(Demonstration {
        meta,
        frames,
        poses_cam: poses,
    })
}

pub fn save_scene(path: &Path, scene: &SurfaceScene) -> Result<(), DatasetError> {
    write_json(path, scene)
}

pub fn load_scene(path: &Path) -> Result<SurfaceScene, DatasetError> {
    read_json(path)
}

pub fn save_manifest(root: &Path, manifest: &Manifest) -> Result<(), DatasetError> {
    write_json(&root.join(MANIFEST_FILE), manifest)
}

pub fn load_manifest(root: &Path) -> Result<Manifest, DatasetError> {
    read_json(&root.join(MANIFEST_FILE))
}

impl Manifest {
    pub fn demo_path(&self, root: &Path, index: usize) -> PathBuf {
        root.join(&self.demos[index].dir)
    }
}

/// Per-channel `(min, max)` over all frames of a demonstration.
pub fn channel_range(demo: &Demonstration) -> ([f32; 5], [f32; 5]) {
    let mut lo = [f32::INFINITY; 5];
    let mut hi = [f32::NEG_INFINITY; 5];
    for f in &demo.frames {
        let img = &f.image;
        for (k, px) in img.rgb.chunks_exact(3).enumerate() {
            let vals = [px[0], px[1], px[2], img.depth[k], img.mask[k] as f32];
            for c in 0..5 {
                lo[c] = lo[c].min(vals[c]);
                hi[c] = hi[c].max(vals[c]);
            }
        }
    }
    (lo, hi)
}
