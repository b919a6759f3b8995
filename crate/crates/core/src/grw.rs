//! Spontaneous localization on a 1D lattice with discretized Gaussian jump
//! operators
//!
//! ```text
//! L_α = (a/π)^{1/4} exp(−(a/2)(q̂ − x_α)²) √δ_k
//! ```
//!
//! with `k` centres `x_α` evenly spaced over the box and a diagonal position
//! operator `q̂` on `d` cell-centred sites. The jumps are used directly as
//! `M_α` (no `+I` shift), at overall rate `λ`.

use serde::Serialize;

use crate::ensemble::{map_indexed, SimConfig, Simulator};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{Convention, ModelSpec};
use crate::pdp::Method;
use crate::scalar::{Real, C};
use crate::state::StateVector;
use crate::stats::{chi_square, ChiSquare};

#[derive(Clone, Debug)]
pub struct GrwFamily<T> {
    pub sites: Vec<f64>,
    pub centers: Vec<f64>,
    pub a: f64,
    pub delta: f64,
    pub rate: f64,
    pub ops: Vec<CMatrix<T>>,
    /// `‖Σ_α L_α² − I‖` (operator norm).
    pub defect: f64,
}

fn cell_centres(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|j| lo + (j as f64 + 0.5) * h).collect()
}

fn check_box(d: usize, bounds: (f64, f64), k: usize, a: f64) -> Result<()> {
    let (lo, hi) = bounds;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("degenerate box [{lo}, {hi}]")));
    }
    if d < 1 || k < 2 {
        return Err(Error::InvalidArgument("need d ≥ 1 sites and k ≥ 2 centres".into()));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("width a must be positive, got {a}")));
    }
    Ok(())
}

/// Diagonal of `Σ_α L_α²` at every site.
fn completeness_diag(sites: &[f64], centers: &[f64], a: f64, delta: f64) -> Vec<f64> {
    let norm = (a / std::f64::consts::PI).sqrt() * delta;
    sites
        .iter()
        .map(|&q| centers.iter().map(|&x| norm * (-a * (q - x).powi(2)).exp()).sum())
        .collect()
}

fn defect_of(diag: &[f64]) -> f64 {
    diag.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()))
}

/// Completeness defect without building the operators.
pub fn completeness_defect(d: usize, bounds: (f64, f64), k: usize, a: f64) -> Result<f64> {
    check_box(d, bounds, k, a)?;
    let delta = (bounds.1 - bounds.0) / k as f64;
    Ok(defect_of(&completeness_diag(
        &cell_centres(bounds.0, bounds.1, d),
        &cell_centres(bounds.0, bounds.1, k),
        a,
        delta,
    )))
}

pub fn build_grw_family<T: Real>(d: usize, bounds: (f64, f64), k: usize, a: f64) -> Result<GrwFamily<T>> {
    check_box(d, bounds, k, a)?;
    let sites = cell_centres(bounds.0, bounds.1, d);
    let centers = cell_centres(bounds.0, bounds.1, k);
    let delta = (bounds.1 - bounds.0) / k as f64;
    let amp = (a / std::f64::consts::PI).powf(0.25) * delta.sqrt();
    let ops = centers
        .iter()
        .map(|&x| {
            let diag: Vec<T> = sites.iter().map(|&q| T::of(amp * (-0.5 * a * (q - x).powi(2)).exp())).collect();
            CMatrix::from_real_diag(&diag)
        })
        .collect();
    let defect = defect_of(&completeness_diag(&sites, &centers, a, delta));
    Ok(GrwFamily {
        sites,
        centers,
        a,
        delta,
        rate: 1.0,
        ops,
        defect,
    })
}

/// Width `a` minimizing the completeness defect: log-spaced scan followed by
/// golden-section refinement. Returns `(a, defect)`.
pub fn tune_width(d: usize, bounds: (f64, f64), k: usize) -> Result<(f64, f64)> {
    let delta = (bounds.1 - bounds.0) / k as f64;
    let f = |ln_a: f64| completeness_defect(d, bounds, k, ln_a.exp());
    // a·δ² from 1e-3 to 1e3 covers kernels from far wider than the box to
    // far narrower than one cell
    let (lo, hi) = ((1e-3 / (delta * delta)).ln(), (1e3 / (delta * delta)).ln());
    let n = 400;
    let mut best = (lo, f(lo)?);
    for i in 1..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(x)?;
        if v < best.1 {
            best = (x, v);
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if f(c)? < f(e)? {
            b = e;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x)?;
    Ok(if v <= best.1 { (x.exp(), v) } else { (best.0.exp(), best.1) })
}

/// Nearest-neighbour hopping `−J Σ (|j⟩⟨j+1| + |j+1⟩⟨j|)` with hard walls.
pub fn hopping_hamiltonian<T: Real>(d: usize, j: f64) -> CMatrix<T> {
    CMatrix::from_fn(d, |r, c| {
        if r.abs_diff(c) == 1 {
            C::new(T::of(-j), T::zero())
        } else {
            C::new(T::zero(), T::zero())
        }
    })
}

/// Real Gaussian wavepacket `∝ exp(−(q − x₀)²/(4σ²))` on the sites.
pub fn gaussian_packet<T: Real>(sites: &[f64], center: f64, sigma: f64) -> Result<StateVector<T>> {
    StateVector::normalize(
        sites
            .iter()
            .map(|&q| C::new(T::of((-(q - center).powi(2) / (4.0 * sigma * sigma)).exp()), T::zero()))
            .collect(),
    )
}

impl<T: Real> GrwFamily<T> {
    /// Localization model with jump operators `√λ L_α`, stored as `M_α`.
    pub fn model(&self, hamiltonian: CMatrix<T>) -> ModelSpec<T> {
        let s = T::of(self.rate.sqrt());
        ModelSpec::new(
            hamiltonian,
            self.ops
                .iter()
                .enumerate()
                .map(|(k, op)| (format!("x{k}"), op.scale_real(s)))
                .collect(),
            Convention::ShiftedM,
        )
    }

    /// Probability that the first jump (before `horizon`) lands on each
    /// centre, for `H = 0`. Between jumps the state evolves as
    /// `exp(−½ G t) Ψ₀` with diagonal `G = λ Σ L_α²`, so site `j` contributes
    /// `L_α,jj² |Ψ₀,j|² (1 − e^{−G_jj T}) / G_jj`. For `G = I` this is the
    /// Born density `‖L_αΨ₀‖²`, a Gaussian smoothing of `|Ψ₀|²`.
    pub fn first_jump_distribution(&self, psi0: &StateVector<T>, horizon: f64) -> Vec<f64> {
        let lam = self.rate;
        let w: Vec<f64> = psi0.amplitudes().iter().map(|z| z.norm_sqr().as_f64()).collect();
        let g: Vec<f64> = (0..self.sites.len())
            .map(|j| lam * self.ops.iter().map(|op| op[(j, j)].re.as_f64().powi(2)).sum::<f64>())
            .collect();
        self.ops
            .iter()
            .map(|op| {
                (0..self.sites.len())
                    .map(|j| {
                        let l2 = lam * op[(j, j)].re.as_f64().powi(2);
                        let frac = if g[j] > 0.0 { (1.0 - (-g[j] * horizon).exp()) / g[j] } else { horizon };
                        l2 * w[j] * frac
                    })
                    .sum()
            })
            .collect()
    }
}

fn position_moments<T: Real>(sites: &[f64], psi: &[C<T>]) -> (f64, f64) {
    let w: Vec<f64> = psi.iter().map(|z| z.norm_sqr().as_f64()).collect();
    let total: f64 = w.iter().sum();
    let mean = sites.iter().zip(&w).map(|(x, p)| x * p).sum::<f64>() / total;
    let var = sites.iter().zip(&w).map(|(x, p)| (x - mean).powi(2) * p).sum::<f64>() / total;
    (mean, var)
}

#[derive(Clone, Debug, Serialize)]
pub struct GrwTrajectory {
    pub jumped: bool,
    pub channel: Option<usize>,
    pub time: Option<f64>,
    pub mean_before: f64,
    pub var_before: f64,
    pub mean_after: f64,
    pub var_after: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrwReport {
    pub sites: usize,
    pub centers: usize,
    pub a: f64,
    pub defect: f64,
    pub trajectories: u64,
    pub jumped: u64,
    /// Fraction of jumped trajectories whose position variance shrank.
    pub variance_reduced_fraction: f64,
    pub mean_var_before: f64,
    pub mean_var_after: f64,
    pub histogram: Vec<u64>,
    pub expected: Vec<f64>,
    /// Present when `H = 0`, where the expected histogram is exact.
    pub chi_square: Option<ChiSquare>,
    pub per_trajectory: Vec<GrwTrajectory>,
}

#[derive(Clone, Copy, Debug)]
pub struct GrwRun {
    pub horizon: f64,
    pub dt: f64,
    pub trajectories: u64,
    pub seed: u64,
    pub workers: usize,
}

/// Runs the localization dynamics up to the first jump of every trajectory
/// and summarizes localization and the jump-location histogram.
pub fn grw_localization_experiment<T: Real>(
    family: &GrwFamily<T>,
    hamiltonian: CMatrix<T>,
    psi0: &StateVector<T>,
    run: &GrwRun,
) -> Result<GrwReport> {
    let free = hamiltonian.max_abs() == T::zero();
    let model = family.model(hamiltonian);
    let cfg = SimConfig {
        method: Method::Exact,
        horizon: run.horizon,
        dt: run.dt,
        seed: run.seed,
        stop_after_jumps: Some(1),
    };
    let sites = &family.sites;
    let sim = Simulator::new(&model, &cfg)?;
    let per: Vec<GrwTrajectory> = map_indexed(run.trajectories, run.workers, |i| {
        let rec = sim.run(psi0, i)?;
        Ok(match rec.first_jump() {
            Some(e) => {
                let (mb, vb) = position_moments(sites, &e.pre_state);
                let (ma, va) = position_moments(sites, &e.post_state);
                GrwTrajectory {
                    jumped: true,
                    channel: Some(e.channel),
                    time: Some(e.time.as_f64()),
                    mean_before: mb,
                    var_before: vb,
                    mean_after: ma,
                    var_after: va,
                }
            }
            None => {
                let (m, v) = position_moments(sites, rec.states.last().expect("initial state"));
                GrwTrajectory {
                    jumped: false,
                    channel: None,
                    time: None,
                    mean_before: m,
                    var_before: v,
                    mean_after: m,
                    var_after: v,
                }
            }
        })
    })?;
    let jumped: Vec<&GrwTrajectory> = per.iter().filter(|t| t.jumped).collect();
    let nj = jumped.len().max(1) as f64;
    let mut histogram = vec![0u64; family.ops.len()];
    for t in &jumped {
        histogram[t.channel.expect("jumped")] += 1;
    }
    let expected = family.first_jump_distribution(psi0, run.horizon);
    let chi = if free && !jumped.is_empty() {
        Some(chi_square(&histogram, &expected)?)
    } else {
        None
    };
    Ok(GrwReport {
        sites: sites.len(),
        centers: family.centers.len(),
        a: family.a,
        defect: family.defect,
        trajectories: run.trajectories,
        jumped: jumped.len() as u64,
        variance_reduced_fraction: jumped.iter().filter(|t| t.var_after < t.var_before).count() as f64 / nj,
        mean_var_before: jumped.iter().map(|t| t.var_before).sum::<f64>() / nj,
        mean_var_after: jumped.iter().map(|t| t.var_after).sum::<f64>() / nj,
        histogram,
        expected,
        chi_square: chi,
        per_trajectory: per,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: (f64, f64) = (-32.0, 32.0);

    #[test]
    fn operators_are_hermitian_positive_and_bounded() {
        let f = build_grw_family::<f64>(16, BOX, 8, 0.05).unwrap();
        let bound = (0.05f64 / std::f64::consts::PI).powf(0.25) * f.delta.sqrt();
        for op in &f.ops {
            assert_eq!(op.hermiticity_defect(), 0.0);
            let ev = op.hermitian_eigenvalues();
            assert!(ev.iter().all(|&e| e >= 0.0 && e <= bound + 1e-15));
        }
    }

    #[test]
    fn completeness_is_a_near_contraction() {
        let f = build_grw_family::<f64>(32, BOX, 32, 0.3).unwrap();
        let mut sum = CMatrix::zeros(32);
        for op in &f.ops {
            sum = &sum + &op.matmul(op);
        }
        let ev = sum.hermitian_eigenvalues();
        assert!(ev.iter().all(|&e| e >= 0.0 && e <= 1.0 + f.defect + 1e-12));
    }

    #[test]
    fn interior_defect_decreases_under_refinement() {
        // edge sites miss half the kernel whatever k is, so look at sites
        // more than 8σ from the walls
        let a: f64 = 0.2;
        let sites = cell_centres(BOX.0, BOX.1, 64);
        let margin = 8.0 / (2.0 * a).sqrt();
        let interior: Vec<f64> = sites.into_iter().filter(|q| (q - BOX.0).min(BOX.1 - q) > margin).collect();
        let defects: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&k| {
                let delta = (BOX.1 - BOX.0) / k as f64;
                defect_of(&completeness_diag(&interior, &cell_centres(BOX.0, BOX.1, k), a, delta))
            })
            .collect();
        assert!(defects.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{defects:?}");
        assert!(defects[1] < defects[0] && defects[3] < 1e-12, "{defects:?}");
    }

    #[test]
    fn tuning_beats_a_scan_grid() {
        let (a, best) = tune_width(64, BOX, 64).unwrap();
        for trial in [0.1, 0.3, 1.0, 3.0] {
            assert!(best <= completeness_defect(64, BOX, 64, trial).unwrap() + 1e-12);
        }
        assert!((completeness_defect(64, BOX, 64, a).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn narrow_kernel_approaches_site_projectors() {
        let f = build_grw_family::<f64>(8, (0.0, 8.0), 8, 200.0).unwrap();
        let scale = (200.0f64 / std::f64::consts::PI).powf(0.25);
        for (k, op) in f.ops.iter().enumerate() {
            assert!((op[(k, k)].re - scale).abs() < 1e-12);
            let off: f64 = (0..8).filter(|&j| j != k).map(|j| op[(j, j)].re).sum();
            assert!(off < 1e-40);
        }
    }

    #[test]
    fn single_site_state_jumps_there() {
        let f = build_grw_family::<f64>(8, (0.0, 8.0), 8, 200.0).unwrap();
        let psi = StateVector::basis(8, 3);
        let run = GrwRun {
            horizon: 30.0,
            dt: 0.05,
            trajectories: 200,
            seed: 1,
            workers: 0,
        };
        let rep = grw_localization_experiment(&f, CMatrix::zeros(8), &psi, &run).unwrap();
        assert_eq!(rep.histogram[3], rep.jumped);
    }
}
