//! Trajectory ensembles and their comparison with the master equation.
//!
//! Trajectory `i` always draws from substream `(seed, i)`, and per-trajectory
//! results are folded strictly in index order, so every ensemble statistic is
//! bitwise independent of the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::CMatrix;
use crate::master::{trace_distance_matrices, MasterTrajectory};
use crate::model::ModelSpec;
use crate::pdp::{
    run_exact, run_linear, run_mcwf, ExactOptions, Frame, LinearFrame, LinearOptions, McwfOptions, Method, TrajectoryRecord,
};
use crate::scalar::{Real, C};
use crate::state::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub method: Method,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub stop_after_jumps: Option<usize>,
}

/// A model prepared for repeated sampling with one configuration.
pub struct Simulator<T> {
    cfg: SimConfig,
    kind: Prepared<T>,
}

enum Prepared<T> {
    Normalized(Frame<T>),
    Linear(LinearFrame<T>),
}

impl<T: Real> Simulator<T> {
    pub fn new(m: &ModelSpec<T>, cfg: &SimConfig) -> Result<Self> {
        let kind = match cfg.method {
            Method::Exact | Method::Mcwf => Prepared::Normalized(Frame::normalized(m)?),
            Method::Linear => Prepared::Linear(LinearFrame::new(m)?),
            Method::Replay => return Err(Error::InvalidArgument("replay needs a prescribed path".into())),
        };
        Ok(Self { cfg: *cfg, kind })
    }

    /// Trajectory on substream `(seed, trajectory)`.
    pub fn run(&self, psi0: &StateVector<T>, trajectory: u64) -> Result<TrajectoryRecord<T>> {
        let c = &self.cfg;
        match (&self.kind, c.method) {
            (Prepared::Normalized(f), Method::Exact) => run_exact(
                f,
                psi0,
                c.horizon,
                &ExactOptions {
                    dt: c.dt,
                    stop_after_jumps: c.stop_after_jumps,
                    ..Default::default()
                },
                c.seed,
                trajectory,
            ),
            (Prepared::Normalized(f), _) => run_mcwf(
                f,
                psi0,
                c.horizon,
                &McwfOptions {
                    dt: c.dt,
                    stop_after_jumps: c.stop_after_jumps,
                    ..Default::default()
                },
                c.seed,
                trajectory,
            ),
            (Prepared::Linear(f), _) => run_linear(
                f,
                psi0,
                c.horizon,
                &LinearOptions {
                    dt: c.dt,
                    record_fine: false,
                },
                c.seed,
                trajectory,
            )
            .map(|(r, _)| r),
        }
    }
}

/// One trajectory of the configured method on substream `(seed, trajectory)`.
pub fn simulate<T: Real>(m: &ModelSpec<T>, psi0: &StateVector<T>, cfg: &SimConfig, trajectory: u64) -> Result<TrajectoryRecord<T>> {
    Simulator::new(m, cfg)?.run(psi0, trajectory)
}

/// `f(0), …, f(n−1)` evaluated on `workers` threads (0 = all cores), in
/// index order. The first error by index wins.
pub fn map_indexed<R: Send>(n: u64, workers: usize, f: impl Fn(u64) -> Result<R> + Sync) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

/// Ensemble mean of `|ψ⟩⟨ψ|` at checkpoints, with per-entry variances.
#[derive(Clone, Debug)]
pub struct DensityEnsemble<T> {
    pub checkpoints: Vec<f64>,
    pub trajectories: u64,
    pub mean: Vec<CMatrix<T>>,
    /// Sample variance of the real and imaginary part of every entry.
    pub var_re: Vec<Vec<f64>>,
    pub var_im: Vec<Vec<f64>>,
}

impl<T: Real> DensityEnsemble<T> {
    /// Standard error of the trace distance between the ensemble mean and
    /// its expectation, bounded through the Frobenius norm:
    /// `½ √d · √(Σ_ij (var re + var im) / N)`.
    pub fn trace_distance_stderr(&self, k: usize) -> f64 {
        let d = self.mean[k].dim() as f64;
        let total: f64 = self.var_re[k].iter().zip(&self.var_im[k]).map(|(a, b)| a + b).sum();
        0.5 * d.sqrt() * (total / self.trajectories as f64).sqrt()
    }
}

/// Runs `n` trajectories and accumulates `|ψ_t⟩⟨ψ_t|` at `checkpoints`.
/// Linear-method states are used unnormalized.
pub fn density_ensemble<T: Real>(
    m: &ModelSpec<T>,
    psi0: &StateVector<T>,
    cfg: &SimConfig,
    n: u64,
    workers: usize,
    checkpoints: &[f64],
) -> Result<DensityEnsemble<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one trajectory".into()));
    }
    let grid = TimeGrid::new(cfg.horizon, cfg.dt)?;
    let idx: Vec<usize> = checkpoints
        .iter()
        .map(|&t| grid.require_index(t, "simulation"))
        .collect::<Result<_>>()?;
    let sim = Simulator::new(m, cfg)?;
    let per_traj = map_indexed(n, workers, |i| {
        let rec = sim.run(psi0, i)?;
        idx.iter()
            .map(|&k| {
                rec.states
                    .get(k)
                    .map(|s| CMatrix::outer(s, s))
                    .ok_or_else(|| Error::InvalidArgument("trajectory stopped before a checkpoint".into()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(accumulate(checkpoints, &per_traj))
}

fn accumulate<T: Real>(checkpoints: &[f64], per_traj: &[Vec<CMatrix<T>>]) -> DensityEnsemble<T> {
    let n = per_traj.len();
    let d = per_traj[0][0].dim();
    let mut mean = Vec::new();
    let mut var_re = Vec::new();
    let mut var_im = Vec::new();
    let nf = n as f64;
    for k in 0..checkpoints.len() {
        let mut sum = vec![(0.0f64, 0.0f64); d * d];
        for traj in per_traj {
            for (acc, z) in sum.iter_mut().zip(traj[k].as_slice()) {
                acc.0 += z.re.as_f64();
                acc.1 += z.im.as_f64();
            }
        }
        let mu: Vec<(f64, f64)> = sum.iter().map(|a| (a.0 / nf, a.1 / nf)).collect();
        let mut sq = vec![(0.0f64, 0.0f64); d * d];
        for traj in per_traj {
            for ((acc, z), m) in sq.iter_mut().zip(traj[k].as_slice()).zip(&mu) {
                acc.0 += (z.re.as_f64() - m.0).powi(2);
                acc.1 += (z.im.as_f64() - m.1).powi(2);
            }
        }
        let denom = if n > 1 { nf - 1.0 } else { f64::INFINITY };
        mean.push(CMatrix::from_fn(d, |i, j| {
            let a = mu[i * d + j];
            C::new(T::of(a.0), T::of(a.1))
        }));
        var_re.push(sq.iter().map(|a| a.0 / denom).collect());
        var_im.push(sq.iter().map(|a| a.1 / denom).collect());
    }
    DensityEnsemble {
        checkpoints: checkpoints.to_vec(),
        trajectories: n as u64,
        mean,
        var_re,
        var_im,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub time: f64,
    pub distance: f64,
    pub stderr: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub trajectories: u64,
    pub gate_sigmas: f64,
    pub integrator_tol: f64,
    pub rows: Vec<CompareRow>,
    pub pass: bool,
}

impl std::fmt::Display for CompareReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>10} {:>12} {:>12} {:>12}  result", "t", "distance", "stderr", "threshold")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>10.4} {:>12.3e} {:>12.3e} {:>12.3e}  {}",
                r.time,
                r.distance,
                r.stderr,
                r.threshold,
                if r.pass { "pass" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

pub const GATE_SIGMAS: f64 = 4.0;
pub const INTEGRATOR_TOL: f64 = 1e-6;

/// Trace distance between ensemble means and the master solution, gated at
/// `4 · stderr + integrator tolerance`.
pub fn compare<T: Real>(master: &MasterTrajectory<T>, ens: &DensityEnsemble<T>) -> Result<CompareReport> {
    let rows = ens
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let rho = master.state_at(t)?;
            let distance = trace_distance_matrices(&ens.mean[k], rho.matrix())?.as_f64();
            let stderr = ens.trace_distance_stderr(k);
            let threshold = GATE_SIGMAS * stderr + INTEGRATOR_TOL;
            Ok(CompareRow {
                time: t,
                distance,
                stderr,
                threshold,
                pass: distance <= threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareReport {
        trajectories: ens.trajectories,
        gate_sigmas: GATE_SIGMAS,
        integrator_tol: INTEGRATOR_TOL,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::integrate_master;
    use crate::model::Convention;
    use crate::models;
    use crate::state::DensityMatrix;

    fn cfg(method: Method) -> SimConfig {
        SimConfig {
            method,
            horizon: 1.0,
            dt: 1e-2,
            seed: 21,
            stop_after_jumps: None,
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let m = models::driven_damped::<f64>(1.0, 1.0, 0.2);
        let psi = StateVector::basis(2, 1);
        let a = density_ensemble(&m, &psi, &cfg(Method::Exact), 64, 1, &[0.5, 1.0]).unwrap();
        let b = density_ensemble(&m, &psi, &cfg(Method::Exact), 64, 4, &[0.5, 1.0]).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.var_re, b.var_re);
    }

    #[test]
    fn deterministic_model_compares_at_zero_distance() {
        let m = ModelSpec::new(models::sigma_x::<f64>(), vec![], Convention::RawL);
        let psi = StateVector::basis(2, 0);
        let c = cfg(Method::Exact);
        let ens = density_ensemble(&m, &psi, &c, 3, 0, &[0.5, 1.0]).unwrap();
        let master = integrate_master(&m, &DensityMatrix::pure(&psi), 1.0, 1e-2).unwrap();
        let rep = compare(&master, &ens).unwrap();
        assert!(rep.pass);
        assert!(rep.rows.iter().all(|r| r.distance < 1e-8 && r.stderr < 1e-12), "{rep}");
    }

    #[test]
    fn wrong_model_fails_gate() {
        let m = models::amplitude_damping::<f64>(1.0);
        let other = models::amplitude_damping::<f64>(3.0);
        let psi = StateVector::basis(2, 1);
        let ens = density_ensemble(&m, &psi, &cfg(Method::Exact), 2000, 0, &[0.5, 1.0]).unwrap();
        let master = integrate_master(&other, &DensityMatrix::pure(&psi), 1.0, 1e-2).unwrap();
        assert!(!compare(&master, &ens).unwrap().pass);
    }

    #[test]
    fn misaligned_checkpoint_is_rejected() {
        let m = models::amplitude_damping::<f64>(1.0);
        let err = density_ensemble(&m, &StateVector::basis(2, 1), &cfg(Method::Exact), 2, 1, &[0.505]).unwrap_err();
        assert!(matches!(err, Error::GridMismatch { .. }));
    }
}
