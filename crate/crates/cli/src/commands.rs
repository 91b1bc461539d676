use std::path::{Path, PathBuf};

use scanlab_core::dataset::{
    dataset_stats, demo_dir_name, load_demo, load_manifest, save_scene, scene_file_name, split_dataset, Manifest,
    SplitSpec, MANIFEST_FILE,
};
use scanlab_core::policy::{gradcheck as run_gradcheck, load_policy, save_policy, Policy, PolicyConfig};
use scanlab_core::simulator::{generate_dataset, generate_scenes};
use scanlab_core::training::{
    evaluate, load_samples, render_path_ppm, save_curves, train as run_train, visualize_predictions,
    write_ppm, zero_action_baseline,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const STATS_FILE: &str = "stats.json";
pub const SPLIT_FILE: &str = "split.json";
pub const POLICY_FILE: &str = "policy.bin";
pub const CURVES_FILE: &str = "curves.csv";
pub const REPORT_FILE: &str = "report.json";
pub const BASELINE_FILE: &str = "baseline.json";
const IMAGE_SIZE: usize = 256;
/// Gradient checks run on this image size whatever the configured one.
const GRADCHECK_IMAGE: usize = 16;
const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(format!("{what} not found at {}", path.display())))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::stage)?;
    text.push('\n');
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::stage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::stage(format!("{}: {e}", path.display())))
}

fn read_manifest(out: &Path) -> Result<Manifest, CliError> {
    require(&out.join(MANIFEST_FILE), "dataset manifest (run gen-demos)")?;
    load_manifest(out).map_err(CliError::stage)
}

fn read_split(out: &Path) -> Result<SplitSpec, CliError> {
    let path = out.join(SPLIT_FILE);
    require(&path, "split (run split)")?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::stage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::stage(format!("{}: {e}", path.display())))
}

fn read_policy(out: &Path) -> Result<Policy, CliError> {
    let path = out.join(POLICY_FILE);
    require(&path, "trained policy (run train)")?;
    load_policy(&path).map_err(CliError::stage)
}

fn check_image_size(manifest: &Manifest, policy: &PolicyConfig) -> Result<(), CliError> {
    let cam = &manifest.config.camera;
    if cam.width != policy.image_size || cam.height != policy.image_size {
        return Err(CliError::config(format!(
            "policy image size {} does not match the dataset's {}x{} frames",
            policy.image_size, cam.width, cam.height
        )));
    }
    Ok(())
}

pub fn gen_scenes(cfg: &RunConfig) -> Result<(), CliError> {
    let scenes = generate_scenes(&cfg.gen).map_err(CliError::stage)?;
    for s in &scenes {
        save_scene(&cfg.out.join(scene_file_name(s.id)), s).map_err(CliError::stage)?;
    }
    println!("wrote {} scenes to {}", scenes.len(), cfg.out.join("scenes").display());
    Ok(())
}

pub fn gen_demos(cfg: &RunConfig) -> Result<(), CliError> {
    let m = generate_dataset(&cfg.gen, &cfg.out).map_err(CliError::stage)?;
    println!("wrote {} demonstrations on {} scenes to {}", m.demos.len(), m.scenes.len(), cfg.out.display());
    Ok(())
}

pub fn stats(cfg: &RunConfig) -> Result<(), CliError> {
    let m = read_manifest(&cfg.out)?;
    let s = dataset_stats(&m).map_err(CliError::stage)?;
    write_json(&cfg.out.join(STATS_FILE), &s)?;
    print!("{s}");
    Ok(())
}

pub fn split(cfg: &RunConfig) -> Result<(), CliError> {
    let m = read_manifest(&cfg.out)?;
    let [a, b, c] = cfg.split;
    let s = split_dataset(m.demos.len(), (a, b, c), cfg.split_seed()).map_err(CliError::stage)?;
    write_json(&cfg.out.join(SPLIT_FILE), &s)?;
    println!("split {a}/{b}/{c} of {} demonstrations", m.demos.len());
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let m = read_manifest(&cfg.out)?;
    let s = read_split(&cfg.out)?;
    check_image_size(&m, &cfg.policy)?;
    let n = cfg.train.horizon;
    let tr = load_samples(&cfg.out, &m, &s.train, &cfg.policy, n).map_err(CliError::stage)?;
    let va = load_samples(&cfg.out, &m, &s.val, &cfg.policy, n).map_err(CliError::stage)?;
    log::info!("{} training and {} validation samples", tr.len(), va.len());
    let outcome = run_train(&tr, &va, &cfg.policy, &cfg.train).map_err(CliError::stage)?;
    save_policy(&cfg.out.join(POLICY_FILE), &outcome.policy).map_err(CliError::stage)?;
    save_curves(&cfg.out.join(CURVES_FILE), &outcome.curves).map_err(CliError::stage)?;
    let best = &outcome.curves[outcome.best_epoch - 1];
    println!(
        "trained {} epochs; best epoch {} (train {:.5}, val {:.5})",
        outcome.curves.len(),
        outcome.best_epoch,
        best.train_loss,
        best.val_loss
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let m = read_manifest(&cfg.out)?;
    let s = read_split(&cfg.out)?;
    let policy = read_policy(&cfg.out)?;
    check_image_size(&m, policy.config())?;
    let samples =
        load_samples(&cfg.out, &m, &s.eval, policy.config(), cfg.train.horizon).map_err(CliError::stage)?;
    let report = evaluate(&policy, &samples).map_err(CliError::stage)?;
    let baseline = zero_action_baseline(&samples).map_err(CliError::stage)?;
    write_json(&cfg.out.join(REPORT_FILE), &report)?;
    write_json(&cfg.out.join(BASELINE_FILE), &baseline)?;
    println!("{}", serde_json::to_string(&report).map_err(CliError::stage)?);
    Ok(())
}

fn demo_dir(out: &Path, m: &Manifest, index: usize) -> Result<PathBuf, CliError> {
    if index >= m.demos.len() {
        return Err(CliError::config(format!("demo {index} outside the {} demonstrations", m.demos.len())));
    }
    Ok(m.demo_path(out, index))
}

pub fn viz(cfg: &RunConfig, demo: Option<usize>) -> Result<(), CliError> {
    let m = read_manifest(&cfg.out)?;
    let policy = read_policy(&cfg.out)?;
    let indices = match demo {
        Some(i) => vec![i],
        None => read_split(&cfg.out)?.eval,
    };
    for i in indices {
        let d = load_demo(&demo_dir(&cfg.out, &m, i)?).map_err(CliError::stage)?;
        let img = visualize_predictions(&policy, &d, cfg.train.horizon, IMAGE_SIZE).map_err(CliError::stage)?;
        let path = cfg.out.join("viz").join(format!("{}.ppm", demo_dir_name(i)));
        std::fs::create_dir_all(cfg.out.join("viz")).map_err(CliError::stage)?;
        write_ppm(&path, &img).map_err(CliError::stage)?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn render(cfg: &RunConfig, demo: usize) -> Result<(), CliError> {
    let m = read_manifest(&cfg.out)?;
    let d = load_demo(&demo_dir(&cfg.out, &m, demo)?).map_err(CliError::stage)?;
    std::fs::create_dir_all(cfg.out.join("render")).map_err(CliError::stage)?;
    let path = cfg.out.join("render").join(format!("path_{demo:04}.ppm"));
    write_ppm(&path, &render_path_ppm(&d, IMAGE_SIZE)).map_err(CliError::stage)?;
    println!("{}", path.display());
    Ok(())
}

pub fn gradcheck(cfg: &RunConfig, samples: usize) -> Result<(), CliError> {
    let config = PolicyConfig {
        image_size: GRADCHECK_IMAGE,
        ..cfg.policy.clone()
    };
    let r = run_gradcheck(&config, samples, 2, cfg.policy.seed).map_err(CliError::stage)?;
    println!(
        "max relative error {:.3e} over {} parameters (worst {})",
        r.max_rel_error, r.n_checked, r.worst_param
    );
    if r.max_rel_error > GRADCHECK_TOLERANCE {
        return Err(CliError::stage(format!(
            "gradient check failed: {:.3e} > {GRADCHECK_TOLERANCE:e}",
            r.max_rel_error
        )));
    }
    Ok(())
}
