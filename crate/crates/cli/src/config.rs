use std::path::{Path, PathBuf};

use scanlab_core::policy::PolicyConfig;
use scanlab_core::simulator::GenConfig;
use scanlab_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SPLIT: [usize; 3] = [24, 8, 18];

/// Everything a pipeline run needs. Scene parameters live in `gen.scene`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. When set it replaces every stage seed.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub split: [usize; 3],
    pub gen: GenConfig,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: PathBuf::from("scanlab_out"),
            split: DEFAULT_SPLIT,
            gen: GenConfig::default(),
            policy: PolicyConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scenes: Option<usize>,
    pub demos: Option<usize>,
    pub split: Option<[usize; 3]>,
    pub epochs: Option<usize>,
    pub width_mult: Option<usize>,
}

impl RunConfig {
    /// `.toml` files are read as TOML, everything else as JSON.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::missing(format!("config {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let parsed = if is_toml {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(s) = o.scenes {
            self.gen.n_scenes = s;
        }
        if let Some(d) = o.demos {
            self.gen.regions_per_scene = d;
        }
        if let Some(s) = o.split {
            self.split = s;
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        if let Some(w) = o.width_mult {
            self.policy.width_mult = w;
        }
        if let Some(seed) = self.seed {
            self.gen.seed = seed;
            self.policy.seed = seed;
            self.train.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.gen.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.policy.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::config(e.to_string()))?;
        if self.split[0] == 0 {
            return Err(CliError::config("split needs at least one training demonstration"));
        }
        if self.policy.image_size != self.gen.camera.width || self.gen.camera.width != self.gen.camera.height {
            return Err(CliError::config(format!(
                "policy.image_size {} does not match the {}x{} camera",
                self.policy.image_size, self.gen.camera.width, self.gen.camera.height
            )));
        }
        Ok(())
    }

    /// Seed used for the train/val/eval shuffle.
    pub fn split_seed(&self) -> u64 {
        self.gen.seed
    }
}

pub fn parse_split(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated counts, got {s:?}"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("bad count {p:?}"))?;
    }
    Ok(out)
}
