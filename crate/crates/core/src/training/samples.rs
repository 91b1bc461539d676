use std::path::Path;

use rayon::prelude::*;

use super::TrainError;
use crate::dataset::{compute_action_targets, load_demo, ActionTarget, Manifest};
use crate::geometry::Pose;
use crate::policy::{Observation, PolicyConfig};
use crate::simulator::Demonstration;

/// One supervised pair, tagged with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub demo: usize,
    pub t: usize,
    pub pose: Pose,
    pub obs: Observation,
    pub target: ActionTarget,
}

/// Every `(t, t + N)` pair of each demonstration, in demo then time order.
pub fn build_samples(demos: &[&Demonstration], config: &PolicyConfig, n: usize) -> Result<Vec<Sample>, TrainError> {
    let mut out = Vec::new();
    for demo in demos {
        for (t, target) in compute_action_targets(&demo.poses_cam, n)? {
            let pose = demo.poses_cam[t];
            out.push(Sample {
                demo: demo.meta.id,
                t,
                pose,
                obs: Observation::from_frame(&demo.frames[t].image, &pose, config)?,
                target,
            });
        }
    }
    Ok(out)
}

/// Load the listed demonstrations from a dataset directory and build their
/// samples.
pub fn load_samples(
    root: &Path,
    manifest: &Manifest,
    indices: &[usize],
    config: &PolicyConfig,
    n: usize,
) -> Result<Vec<Sample>, TrainError> {
    let per_demo: Vec<Vec<Sample>> = indices
        .par_iter()
        .map(|&i| {
            if i >= manifest.demos.len() {
                return Err(TrainError::BadConfig(format!("demo index {i} outside the dataset")));
            }
            let demo = load_demo(&manifest.demo_path(root, i))?;
            build_samples(&[&demo], config, n)
        })
        .collect::<Result<_, _>>()?;
    Ok(per_demo.into_iter().flatten().collect())
}
