use std::collections::BTreeMap;
use std::path::Path;

use scanlab_core::dataset::{compute_action_targets, load_demo, load_manifest, split_dataset, DEFAULT_HORIZON};
use scanlab_core::policy::{load_policy, save_policy, PolicyConfig};
use scanlab_core::simulator::{generate_dataset, generate_demo, generate_scenes, CameraParams, GenConfig};
use scanlab_core::training::{evaluate, load_samples, train, zero_action_baseline, TrainConfig};

fn small() -> GenConfig {
    GenConfig {
        seed: 21,
        n_scenes: 2,
        regions_per_scene: 2,
        camera: CameraParams {
            width: 16,
            height: 16,
            ..CameraParams::default()
        },
        ..GenConfig::default()
    }
}

fn tiny_policy() -> PolicyConfig {
    PolicyConfig {
        image_size: 16,
        vision_channels: vec![4, 8],
        pose_hidden: vec![16],
        feature_dim: 16,
        decoder_channels: 8,
        decoder_blocks: 1,
        ..PolicyConfig::default()
    }
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn dataset_bytes_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = small();
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    pool(1).install(|| generate_dataset(&c, a.path())).unwrap();
    pool(3).install(|| generate_dataset(&c, b.path())).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), 1 + 2 + 4 * 3);
    assert_eq!(ta, tb);
}

#[test]
fn saved_demos_reload_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let c = small();
    let m = generate_dataset(&c, dir.path()).unwrap();
    assert_eq!(load_manifest(dir.path()).unwrap(), m);
    let scenes = generate_scenes(&c).unwrap();
    for i in 0..m.demos.len() {
        let fresh = generate_demo(&c, &scenes, i).unwrap();
        let loaded = load_demo(&m.demo_path(dir.path(), i)).unwrap();
        assert_eq!(loaded, fresh);
        assert_eq!(m.demos[i].n_frames, fresh.len());
    }
}

#[test]
fn train_save_load_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&small(), dir.path()).unwrap();
    let s = split_dataset(m.demos.len(), (2, 1, 1), 5).unwrap();
    let pc = tiny_policy();
    let n = DEFAULT_HORIZON;
    let tr = load_samples(dir.path(), &m, &s.train, &pc, n).unwrap();
    let expected: usize = s.train.iter().map(|&i| m.demos[i].n_frames - n).sum();
    assert_eq!(tr.len(), expected);
    let va = load_samples(dir.path(), &m, &s.val, &pc, n).unwrap();
    let ev = load_samples(dir.path(), &m, &s.eval, &pc, n).unwrap();

    let tc = TrainConfig {
        epochs: 3,
        lr: 0.01,
        ..TrainConfig::default()
    };
    let out = train(&tr, &va, &pc, &tc).unwrap();
    assert_eq!(out.curves.len(), 3);
    let path = dir.path().join("policy.bin");
    save_policy(&path, &out.policy).unwrap();
    let back = load_policy(&path).unwrap();
    assert_eq!(back, out.policy);
    let report = evaluate(&back, &ev).unwrap();
    assert_eq!(report, evaluate(&out.policy, &ev).unwrap());
    assert_eq!(report.n, ev.len());

    // Pooled metrics do not depend on the order of the eval demos.
    let mut rev = ev.clone();
    rev.sort_by_key(|s| (std::cmp::Reverse(s.demo), s.t));
    let r2 = evaluate(&back, &rev).unwrap();
    for (a, b) in [(report.dist_mean, r2.dist_mean), (report.rmse_x, r2.rmse_x), (report.angle_mean_deg, r2.angle_mean_deg)] {
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    // The zero-action baseline's distance error is the mean target length.
    let base = zero_action_baseline(&ev).unwrap();
    let demo = load_demo(&m.demo_path(dir.path(), s.eval[0])).unwrap();
    let targets = compute_action_targets(&demo.poses_cam, n).unwrap();
    let mean_len: f64 = targets
        .iter()
        .map(|(_, a)| a.dpos.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum::<f64>()
        / targets.len() as f64;
    assert!((base.dist_mean - mean_len).abs() < 1e-12);
}
