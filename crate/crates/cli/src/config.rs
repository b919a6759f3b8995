use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unravel_core::io::{config_hash, read_model_file, sha256_hex};
use unravel_core::{Error, Method, Model, Result, State};

/// Run parameters that may come from a `--config` JSON file. Flags given on
/// the command line take precedence over the file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    pub method: Option<Method>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub trajectories: Option<u64>,
    pub seed: Option<u64>,
    pub checkpoints: Option<Vec<f64>>,
    pub stride: Option<usize>,
    pub basis: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// `self` with unset fields taken from `file`.
    pub fn over(self, file: RunConfig) -> Self {
        Self {
            model: self.model.or(file.model),
            method: self.method.or(file.method),
            dt: self.dt.or(file.dt),
            horizon: self.horizon.or(file.horizon),
            trajectories: self.trajectories.or(file.trajectories),
            seed: self.seed.or(file.seed),
            checkpoints: self.checkpoints.or(file.checkpoints),
            stride: self.stride.or(file.stride),
            basis: self.basis.or(file.basis),
            out_dir: self.out_dir.or(file.out_dir),
        }
    }

    pub fn resolve(self, default_out: &Path) -> Result<Resolved> {
        let model_path = self
            .model
            .ok_or_else(|| Error::InvalidArgument("no model file given (--model)".into()))?;
        let bytes = fs::read(&model_path)?;
        let file = read_model_file(&model_path)?;
        let model = file.to_model()?;
        let psi0 = match (self.basis, file.initial_state()?) {
            (Some(k), _) if k < model.dim => State::basis(model.dim, k),
            (Some(k), _) => {
                return Err(Error::InvalidArgument(format!("basis index {k} out of range for dim {}", model.dim)))
            }
            (None, Some(psi)) => psi,
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "model file has no initial_state; pass --basis".into(),
                ))
            }
        };
        let horizon = self.horizon.unwrap_or(1.0);
        let dt = self.dt.unwrap_or(1e-2);
        let trajectories = self.trajectories.unwrap_or(1000);
        if !(dt > 0.0) || !(horizon > 0.0) {
            return Err(Error::InvalidArgument("dt and horizon must be positive".into()));
        }
        if trajectories == 0 {
            return Err(Error::InvalidArgument("need at least one trajectory".into()));
        }
        let checkpoints = self.checkpoints.unwrap_or_else(|| vec![horizon]);
        if let Some(t) = checkpoints.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
            return Err(Error::InvalidArgument(format!("checkpoint {t} outside [0, {horizon}]")));
        }
        Ok(Resolved {
            model,
            psi0,
            model_sha256: sha256_hex(&bytes),
            method: self.method.unwrap_or(Method::Exact),
            dt,
            horizon,
            trajectories,
            seed: self.seed.unwrap_or(0),
            checkpoints,
            stride: self.stride.unwrap_or(1).max(1),
            out_dir: self.out_dir.unwrap_or_else(|| default_out.to_path_buf()),
        })
    }
}

pub struct Resolved {
    pub model: Model,
    pub psi0: State,
    pub model_sha256: String,
    pub method: Method,
    pub dt: f64,
    pub horizon: f64,
    pub trajectories: u64,
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    pub stride: usize,
    pub out_dir: PathBuf,
}

/// Everything that determines the output bytes. Worker count and output
/// directory are deliberately absent.
#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    model_sha256: &'a str,
    initial_state: Vec<[f64; 2]>,
    method: Method,
    dt: f64,
    horizon: f64,
    trajectories: u64,
    seed: u64,
    checkpoints: &'a [f64],
    stride: usize,
    extra: serde_json::Value,
}

impl Resolved {
    pub fn hash(&self, command: &str, extra: serde_json::Value) -> Result<String> {
        config_hash(&Hashed {
            command,
            model_sha256: &self.model_sha256,
            initial_state: self.psi0.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
            method: self.method,
            dt: self.dt,
            horizon: self.horizon,
            trajectories: self.trajectories,
            seed: self.seed,
            checkpoints: &self.checkpoints,
            stride: self.stride,
            extra,
        })
    }
}
