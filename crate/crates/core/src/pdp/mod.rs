//! Piecewise-deterministic state-vector samplers.
//!
//! Normalized samplers (`mcwf`, `exact`, `replay`) run in the `M_α = L_α + I`
//! frame: raw models are shifted with `f_α = 1` first, models stored as
//! `shifted_M` are used as they are. The linear equation runs in the raw
//! frame under unit-rate Poisson paths.

mod exact;
mod linear;
mod mcwf;
mod norm;
mod propagate;
mod rates;
mod record;

pub use exact::{run_exact, simulate_exact, ExactOptions};
pub use linear::{replay_normalized, run_linear, simulate_linear, simulate_linear_on_path, LinearFrame, LinearOptions};
pub use mcwf::{run_mcwf, simulate_mcwf, McwfOptions};
pub use norm::{inverse_norm_from_rates, norm_process, norm_sqr_from_rates};
pub use propagate::{drift_step, FinePath, Propagator, StateSegment};
pub use rates::{apply_jump, girsanov_rates, jump_rates, GirsanovRates};
pub use record::{state_hash, Diagnostics, JumpEvent, Method, TrajectoryRecord};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::ModelSpec;
use crate::scalar::{Real, C};
use crate::state::StateVector;

/// Operators of the normalized sampler frame, prepared once per model.
#[derive(Clone, Debug)]
pub struct Frame<T> {
    pub(crate) dim: usize,
    pub(crate) ops: Vec<CMatrix<T>>,
    diag_ops: Vec<Option<Vec<C<T>>>>,
    pub(crate) labels: Vec<String>,
    pub(crate) prop: Propagator<T>,
}

impl<T: Real> Frame<T> {
    pub fn normalized(m: &ModelSpec<T>) -> Result<Self> {
        m.ensure_valid()?;
        let f = m.to_shifted()?;
        let ops: Vec<CMatrix<T>> = f.ops().cloned().collect();
        Ok(Self {
            dim: m.dim,
            diag_ops: ops.iter().map(diagonal_of).collect(),
            ops,
            labels: f.labels().into_iter().map(str::to_owned).collect(),
            prop: Propagator::effective(&f),
        })
    }

    pub(crate) fn apply_op(&self, channel: usize, psi: &[C<T>]) -> Vec<C<T>> {
        match &self.diag_ops[channel] {
            Some(d) => d.iter().zip(psi).map(|(&a, &b)| a * b).collect(),
            None => self.ops[channel].mul_vec(psi),
        }
    }

    pub fn rates(&self, psi: &[C<T>]) -> Vec<T> {
        (0..self.ops.len()).map(|a| linalg::norm_sqr(&self.apply_op(a, psi))).collect()
    }
}

fn diagonal_of<T: Real>(m: &CMatrix<T>) -> Option<Vec<C<T>>> {
    m.is_diagonal().then(|| (0..m.dim()).map(|i| m[(i, i)]).collect())
}

pub(crate) fn initial_amplitudes<T: Real>(dim: usize, psi0: &StateVector<T>) -> Result<Vec<C<T>>> {
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: psi0.dim(),
            context: "initial state",
        });
    }
    Ok(psi0.amplitudes().to_vec())
}

pub(crate) fn normalize_in_place<T: Real>(v: &mut [C<T>]) -> Result<T> {
    if !linalg::vec_is_finite(v) {
        return Err(Error::NonFinite("trajectory state"));
    }
    let n = linalg::norm(v);
    if !(n > T::zero()) {
        return Err(Error::InvalidState("trajectory state collapsed to zero".into()));
    }
    linalg::scale_vec(v, n.recip());
    Ok(n)
}

pub(crate) fn normalized_copy<T: Real>(v: &[C<T>]) -> Result<Vec<C<T>>> {
    let mut out = v.to_vec();
    normalize_in_place(&mut out)?;
    Ok(out)
}
