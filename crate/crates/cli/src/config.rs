//! Run configuration file.

use std::path::{Path, PathBuf};

use cipherfit::emulator::{Context, OpWeights};
use cipherfit::training::TrainConfig;
use cipherfit::{Error, Result};
use serde::{Deserialize, Serialize};

/// Emulator geometry and cost weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    /// Total slots; optional, must equal `s0·s1` when given.
    pub slots: Option<usize>,
    pub s0: usize,
    pub s1: usize,
    pub max_level: u32,
    pub auto_bootstrap: bool,
    pub weights: OpWeights,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            slots: None,
            s0: 64,
            s1: 64,
            max_level: Context::DEFAULT_MAX_LEVEL,
            auto_bootstrap: true,
            weights: OpWeights::default(),
        }
    }
}

impl ContextConfig {
    pub fn build(&self) -> Result<Context> {
        let ctx = Context::new(self.s0, self.s1, self.max_level)?.with_weights(self.weights);
        match self.slots {
            Some(s) if s != ctx.slots => Err(Error::InvalidContext(format!(
                "slots {s} != s0·s1 = {}",
                ctx.slots
            ))),
            _ => Ok(ctx),
        }
    }
}

/// Everything `train` needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train: PathBuf,
    pub val: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    pub num_classes: usize,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.train, &mut cfg.val, &mut cfg.output_dir]
            .into_iter()
            .chain(cfg.test.as_mut())
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Checks the layout limits: a batch fits one block row and the
    /// classes fit one block column.
    pub fn validate(&self) -> Result<Context> {
        let ctx = self.context.build()?;
        let batch = self.training.batch_size.max(1).next_power_of_two();
        if batch > ctx.s0 {
            return Err(Error::Shape(format!(
                "batch size {} pads to {batch} rows, more than s0 = {}",
                self.training.batch_size, ctx.s0
            )));
        }
        if self.num_classes < 2 || self.num_classes > ctx.s1 {
            return Err(Error::Shape(format!(
                "num_classes must be in 2..={}, got {}",
                ctx.s1, self.num_classes
            )));
        }
        self.training.softmax.validate()?;
        Ok(ctx)
    }
}
