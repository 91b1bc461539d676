//! Dataset persistence, N-step action targets, splits and corpus statistics.

mod actions;
mod io;
mod split;
mod stats;

use std::path::PathBuf;

pub use actions::{align_hemisphere, compute_action_targets, ActionTarget, DEFAULT_HORIZON};
pub use io::{
    channel_range, decode_frames, decode_poses, demo_dir_name, encode_frames, encode_poses, load_demo,
    load_manifest, load_meta, load_poses, load_scene, save_demo, save_manifest, save_scene, scene_file_name,
    Manifest, ManifestEntry, FRAMES_FILE, MANIFEST_FILE, META_FILE, POSES_FILE,
};
pub use split::{split_dataset, SplitSpec};
pub use stats::{dataset_stats, percentile, percentiles, CorpusStats, Percentiles};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: bad magic, expected {expected:?}, found {found:?}", path.display())]
    CorruptMagic {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: truncated, needed {expected} bytes, file has {actual}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("demonstration of {len} frames is too short for horizon {n}")]
    TooShort { len: usize, n: usize },
    #[error("action horizon must be at least 2, got {0}")]
    BadN(usize),
    #[error("split requests {requested} demonstrations, only {available} available")]
    InsufficientDemos { requested: usize, available: usize },
    #[error("no demonstrations")]
    Empty,
}
