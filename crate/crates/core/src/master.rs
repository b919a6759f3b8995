//! Deterministic reference integration of the GKSL master equation.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::CMatrix;
use crate::model::{Lindbladian, ModelSpec};
use crate::scalar::Real;
use crate::state::DensityMatrix;

#[derive(Clone, Copy, Debug)]
pub struct MasterOptions {
    /// Abort when the trace drift of a single step exceeds this.
    pub abort_threshold: f64,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            abort_threshold: 1e-6,
        }
    }
}

/// Magnitudes removed by re-Hermitizing and renormalizing after one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepCorrection {
    pub hermiticity: f64,
    pub trace: f64,
}

#[derive(Clone, Debug)]
pub struct MasterTrajectory<T> {
    pub grid: TimeGrid,
    pub times: Vec<T>,
    pub states: Vec<DensityMatrix<T>>,
    /// `corrections[k]` belongs to the step that produced `states[k + 1]`.
    pub corrections: Vec<StepCorrection>,
}

impl<T: Real> MasterTrajectory<T> {
    pub fn state_at(&self, t: f64) -> Result<&DensityMatrix<T>> {
        let k = self.grid.require_index(t, "master")?;
        Ok(&self.states[k])
    }

    pub fn max_trace_correction(&self) -> f64 {
        self.corrections.iter().fold(0.0, |m, c| m.max(c.trace))
    }
}

pub fn integrate_master<T: Real>(
    m: &ModelSpec<T>,
    rho0: &DensityMatrix<T>,
    t_final: f64,
    dt: f64,
) -> Result<MasterTrajectory<T>> {
    integrate_master_with(m, rho0, t_final, dt, &MasterOptions::default())
}

/// Classical RK4 with fixed step on `dρ/dt = 𝓛[ρ]`.
pub fn integrate_master_with<T: Real>(
    m: &ModelSpec<T>,
    rho0: &DensityMatrix<T>,
    t_final: f64,
    dt: f64,
    opts: &MasterOptions,
) -> Result<MasterTrajectory<T>> {
    m.ensure_valid()?;
    if rho0.dim() != m.dim {
        return Err(Error::DimensionMismatch {
            expected: m.dim,
            found: rho0.dim(),
            context: "initial density matrix",
        });
    }
    let grid = TimeGrid::new(t_final, dt)?;
    let gen = Lindbladian::new(m);
    let mut states = Vec::with_capacity(grid.len());
    let mut corrections = Vec::with_capacity(grid.steps);
    states.push(rho0.clone());
    let mut rho = rho0.matrix().clone();
    for k in 0..grid.steps {
        let h = T::of(grid.time(k + 1) - grid.time(k));
        let next = rk4_step(&gen, &rho, h);
        if !next.is_finite() {
            return Err(Error::NonFinite("master equation step (dt too large?)"));
        }
        let herm = next.hermitian_part();
        let hermiticity = (&next - &herm).max_abs().as_f64();
        let tr = herm.trace().re;
        let trace = (tr - T::one()).abs().as_f64();
        if trace > opts.abort_threshold {
            return Err(Error::StepTooLarge {
                time: grid.time(k + 1),
                drift: trace,
                threshold: opts.abort_threshold,
            });
        }
        // trace is conserved exactly by RK4, so an unstable step shows up as
        // entries a density matrix cannot have
        let blowup = (herm.max_abs().as_f64() - 1.0).max(0.0);
        if blowup > opts.abort_threshold {
            return Err(Error::StepTooLarge {
                time: grid.time(k + 1),
                drift: blowup,
                threshold: opts.abort_threshold,
            });
        }
        rho = herm.scale_real(tr.recip());
        corrections.push(StepCorrection { hermiticity, trace });
        states.push(DensityMatrix::from_unchecked(rho.clone()));
    }
    Ok(MasterTrajectory {
        times: grid.times(),
        grid,
        states,
        corrections,
    })
}

fn rk4_step<T: Real>(gen: &Lindbladian<T>, rho: &CMatrix<T>, h: T) -> CMatrix<T> {
    let half = Complex::new(h * T::of(0.5), T::zero());
    let full = Complex::new(h, T::zero());
    let k1 = gen.apply(rho);
    let mut tmp = rho.clone();
    tmp.axpy(half, &k1);
    let k2 = gen.apply(&tmp);
    let mut tmp = rho.clone();
    tmp.axpy(half, &k2);
    let k3 = gen.apply(&tmp);
    let mut tmp = rho.clone();
    tmp.axpy(full, &k3);
    let k4 = gen.apply(&tmp);
    let sixth = Complex::new(h / T::of(6.0), T::zero());
    let mut out = rho.clone();
    out.axpy(sixth, &k1);
    out.axpy(sixth + sixth, &k2);
    out.axpy(sixth + sixth, &k3);
    out.axpy(sixth, &k4);
    out
}

/// `½ Σ |λ_i(a − b)|`
pub fn trace_distance<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    trace_distance_matrices(a.matrix(), b.matrix())
}

/// Trace distance between arbitrary Hermitian matrices, e.g. Monte Carlo
/// ensemble means that are not exactly normalized.
pub fn trace_distance_matrices<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
            context: "trace distance operands",
        });
    }
    let diff = a - b;
    let sum: T = diff.hermitian_eigenvalues().into_iter().map(|l| l.abs()).sum();
    Ok(sum * T::of(0.5))
}
