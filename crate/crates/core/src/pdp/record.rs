use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::poisson::{PoissonPath, RateModel};
use crate::scalar::{Real, C};

use super::propagate::FinePath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mcwf,
    Exact,
    Linear,
    /// Normalized evolution driven by a prescribed path.
    Replay,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Mcwf => "mcwf",
            Method::Exact => "exact",
            Method::Linear => "linear",
            Method::Replay => "replay",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcwf" => Ok(Method::Mcwf),
            "exact" => Ok(Method::Exact),
            "linear" => Ok(Method::Linear),
            "replay" => Ok(Method::Replay),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpEvent<T> {
    pub time: T,
    pub channel: usize,
    pub label: String,
    /// Norm of the jump image of the pre-jump state as stored
    /// (`‖M_αΨ‖` for normalized samplers).
    pub pre_norm: T,
    pub pre_state: Vec<C<T>>,
    pub post_state: Vec<C<T>>,
    pub post_hash: String,
}

impl<T: Real> JumpEvent<T> {
    pub(crate) fn new(time: T, channel: usize, label: &str, pre_norm: T, pre_state: Vec<C<T>>, post_state: Vec<C<T>>) -> Self {
        let post_hash = state_hash(&post_state);
        Self {
            time,
            channel,
            label: label.to_owned(),
            pre_norm,
            pre_state,
            post_state,
            post_hash,
        }
    }
}

/// SHA-256 of the amplitudes as little-endian `f64` pairs, hex encoded.
pub fn state_hash<T: Real>(amps: &[C<T>]) -> String {
    let mut h = Sha256::new();
    for z in amps {
        h.update(z.re.as_f64().to_le_bytes());
        h.update(z.im.as_f64().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    /// Largest total jump probability of one step (MCWF).
    pub max_dp: f64,
    /// Steps whose jump probability exceeded the warning level.
    pub dp_warnings: usize,
    /// Largest `|‖ψ‖ − 1|` removed by renormalization after a step.
    pub max_renormalization: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub method: Method,
    pub seed: u64,
    pub trajectory: u64,
    pub grid: TimeGrid,
    pub labels: Vec<String>,
    /// Grid times actually reached; shorter than the grid when the run
    /// stopped early.
    pub times: Vec<T>,
    pub states: Vec<Vec<C<T>>>,
    /// Stored states have unit norm (false only for the linear equation).
    pub normalized: bool,
    pub jumps: Vec<JumpEvent<T>>,
    /// Time the simulation stopped; the horizon unless a jump budget ran out.
    pub end_time: T,
    pub fine: Option<FinePath<T>>,
    pub diagnostics: Diagnostics,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn channels(&self) -> usize {
        self.labels.len()
    }

    pub fn state_at(&self, t: f64) -> Result<&[C<T>]> {
        let k = self.grid.require_index(t, "trajectory")?;
        self.states
            .get(k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("trajectory stopped before t = {t}")))
    }

    pub fn first_jump(&self) -> Option<&JumpEvent<T>> {
        self.jumps.first()
    }

    /// Jump times as a path on `(0, horizon]`.
    pub fn path(&self) -> Result<PoissonPath<T>> {
        let mut jumps = vec![Vec::new(); self.channels()];
        for e in &self.jumps {
            jumps[e.channel].push(e.time);
        }
        let model = match self.method {
            Method::Linear => RateModel::UnitRate,
            _ => RateModel::StateDependent,
        };
        PoissonPath::new(self.grid.time_as(self.grid.steps), jumps, model)
    }

    pub fn norms(&self) -> Vec<T> {
        self.states.iter().map(|s| crate::linalg::norm(s)).collect()
    }
}
