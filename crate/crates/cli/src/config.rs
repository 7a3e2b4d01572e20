//! Run configuration: flat `key = value` files plus command-line overrides.
//!
//! Model keys are those of [`sinet_core::config::CONFIG_KEYS`]. Run keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `seed` | 0 | shuffling seed for training |
//! | `threads` | unset | worker threads (else `SINET_THREADS`, else all cores) |
//! | `format` | markdown | table printed to stdout: json, csv or markdown |
//! | `input_size` | 352 | square inference resolution, a multiple of 32 |
//! | `skip_missing` | false | skip masks without predictions during eval |
//! | `weights_dtype` | f64 | f32 or f64 weight files |
//! | `toy.images` | 32 | synthetic image count |
//! | `toy.size` | 64 | synthetic image side, a multiple of 32 |
//! | `toy.contrast` | 0.18 | object colour offset |
//! | `toy.noise` | 0.06 | per-pixel noise amplitude |
//! | `toy.seed` | 7 | synthetic data seed |
//! | `train.steps` | 300 | optimizer steps |
//! | `train.batch_size` | 8 | images per step |
//! | `train.learning_rate` | 1e-4 | Adam step size |
//! | `train.decay_every` | 50 | epochs between rate drops |
//! | `train.decay_factor` | 10 | rate divisor at each drop |

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sinet_core::backbone::INPUT_MULTIPLE;
use sinet_core::config::CONFIG_KEYS;
use sinet_core::synthetic::BlobConfig;
use sinet_core::weights::Dtype;
use sinet_core::{SinetConfig, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(CliError::Config(format!("unknown format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Markdown => "markdown",
        })
    }
}

pub const RUN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "format",
    "input_size",
    "skip_missing",
    "weights_dtype",
    "toy.images",
    "toy.size",
    "toy.contrast",
    "toy.noise",
    "toy.seed",
    "train.steps",
    "train.batch_size",
    "train.learning_rate",
    "train.decay_every",
    "train.decay_factor",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: SinetConfig,
    pub toy: BlobConfig,
    pub train: TrainConfig,
    pub steps: usize,
    pub input_size: usize,
    pub threads: Option<usize>,
    pub format: Format,
    pub skip_missing: bool,
    pub dtype: Dtype,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: SinetConfig::default(),
            toy: BlobConfig::default(),
            train: TrainConfig {
                batch_size: 8,
                ..TrainConfig::default()
            },
            steps: 300,
            input_size: 352,
            threads: None,
            format: Format::Markdown,
            skip_missing: false,
            dtype: Dtype::F64,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if CONFIG_KEYS.contains(&key) {
            return self.model.set(key, value).map_err(|e| CliError::Config(e.to_string()));
        }
        match key {
            "seed" => self.train.seed = parse(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            "format" => self.format = value.parse()?,
            "input_size" => self.input_size = parse(key, value)?,
            "skip_missing" => self.skip_missing = parse(key, value)?,
            "weights_dtype" => {
                self.dtype = match value.trim() {
                    "f32" => Dtype::F32,
                    "f64" => Dtype::F64,
                    other => return Err(CliError::Config(format!("weights_dtype must be f32 or f64, got {other:?}"))),
                }
            }
            "toy.images" => self.toy.count = parse(key, value)?,
            "toy.size" => self.toy.size = parse(key, value)?,
            "toy.contrast" => self.toy.contrast = parse(key, value)?,
            "toy.noise" => self.toy.noise = parse(key, value)?,
            "toy.seed" => self.toy.seed = parse(key, value)?,
            "train.steps" => self.steps = parse(key, value)?,
            "train.batch_size" => self.train.batch_size = parse(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, value)?,
            "train.decay_every" => self.train.decay_every = parse(key, value)?,
            "train.decay_factor" => self.train.decay_factor = parse(key, value)?,
            other => return Err(CliError::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// `KEY=VALUE` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {pair:?} is not KEY=VALUE")))?;
        self.set(k, v)
    }

    /// Training settings with the step budget applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.steps.max(1),
            max_steps: Some(self.steps),
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.train_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.steps == 0 {
            return bad("train.steps must be positive".into());
        }
        for (key, size) in [("input_size", self.input_size), ("toy.size", self.toy.size)] {
            if size == 0 || size % INPUT_MULTIPLE != 0 {
                return bad(format!("{key} must be a positive multiple of {INPUT_MULTIPLE}, got {size}"));
            }
        }
        if self.toy.count == 0 {
            return bad("toy.images must be positive".into());
        }
        if !(self.toy.contrast.is_finite() && self.toy.noise.is_finite() && self.toy.noise >= 0.0) {
            return bad("toy.contrast and toy.noise must be finite, noise >= 0".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    /// Every key with its current value, model keys first.
    pub fn to_kv_string(&self) -> String {
        let dtype = match self.dtype {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        };
        let mut out = self.model.to_kv_string();
        let run = [
            ("seed", self.train.seed.to_string()),
            ("threads", self.threads.map(|t| t.to_string()).unwrap_or_default()),
            ("format", self.format.to_string()),
            ("input_size", self.input_size.to_string()),
            ("skip_missing", self.skip_missing.to_string()),
            ("weights_dtype", dtype.to_string()),
            ("toy.images", self.toy.count.to_string()),
            ("toy.size", self.toy.size.to_string()),
            ("toy.contrast", self.toy.contrast.to_string()),
            ("toy.noise", self.toy.noise.to_string()),
            ("toy.seed", self.toy.seed.to_string()),
            ("train.steps", self.steps.to_string()),
            ("train.batch_size", self.train.batch_size.to_string()),
            ("train.learning_rate", self.train.learning_rate.to_string()),
            ("train.decay_every", self.train.decay_every.to_string()),
            ("train.decay_factor", self.train.decay_factor.to_string()),
        ];
        for (k, v) in run {
            if k == "threads" && v.is_empty() {
                continue;
            }
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}
