//! Expected values along trajectories and their ensemble statistics.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::ModelSpec;
use crate::pdp::TrajectoryRecord;
use crate::scalar::{Real, C};
use crate::stats::mean_stderr;

/// Imaginary parts of Hermitian expectations above this are reported.
pub const REALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub label: String,
    pub times: Vec<f64>,
    /// `values[i][k]`: trajectory `i` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl ObservableSeries {
    pub fn from_values(label: &str, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.iter().any(|v| v.len() != times.len()) {
            return Err(Error::InvalidArgument("every trajectory needs one value per time".into()));
        }
        let (mean, stderr) = (0..times.len())
            .map(|k| mean_stderr(&values.iter().map(|v| v[k]).collect::<Vec<_>>()))
            .unzip();
        Ok(Self {
            label: label.to_owned(),
            times,
            values,
            mean,
            stderr,
        })
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= crate::grid::GRID_MATCH_TOL * t.abs().max(1.0))
            .ok_or(Error::GridMismatch { time: t, grid: "observable series" })
    }
}

fn check_hermitian<T: Real>(o: &CMatrix<T>) -> Result<()> {
    let defect = o.hermiticity_defect().as_f64();
    if defect > 1e-12 * (1.0 + o.max_abs().as_f64()) {
        return Err(Error::InvalidArgument(format!("observable is not Hermitian (defect {defect:e})")));
    }
    Ok(())
}

/// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩`, which must be real for Hermitian `O`.
pub fn expectation<T: Real>(o: &CMatrix<T>, psi: &[C<T>]) -> Result<f64> {
    let v = o.quadratic_form(psi) / Complex::new(linalg::norm_sqr(psi), T::zero());
    if v.im.abs().as_f64() > REALITY_TOL * (1.0 + v.re.abs().as_f64()) {
        return Err(Error::InvalidState(format!("expectation has imaginary part {}", v.im)));
    }
    Ok(v.re.as_f64())
}

/// `⟨O⟩` along every record on their common grid.
pub fn observable_series<T: Real>(records: &[TrajectoryRecord<T>], o: &CMatrix<T>, label: &str) -> Result<ObservableSeries> {
    check_hermitian(o)?;
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
    let times: Vec<f64> = first.times.iter().map(|t| t.as_f64()).collect();
    let values = records
        .iter()
        .map(|r| {
            if r.grid != first.grid || r.states.len() != times.len() {
                return Err(Error::GridMismatch {
                    time: r.end_time.as_f64(),
                    grid: "ensemble records",
                });
            }
            r.states.iter().map(|s| expectation(o, s)).collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ObservableSeries::from_values(label, times, values)
}

/// Largest deviation between the recorded jump increments of `⟨O⟩` and
/// `⟨M_αOM_α⟩/‖M_αΨ‖² − ⟨O⟩` at the pre-jump state.
pub fn jump_increment_defect<T: Real>(m: &ModelSpec<T>, rec: &TrajectoryRecord<T>, o: &CMatrix<T>) -> Result<f64> {
    check_hermitian(o)?;
    let frame = m.to_shifted()?;
    let ops: Vec<&CMatrix<T>> = frame.ops().collect();
    let mut worst = 0.0f64;
    for e in &rec.jumps {
        let op = ops[e.channel];
        let recorded = expectation(o, &e.post_state)? - expectation(o, &e.pre_state)?;
        let mpsi = op.mul_vec(&e.pre_state);
        let sandwich = o.quadratic_form(&mpsi).re / linalg::norm_sqr(&mpsi);
        let predicted = sandwich.as_f64() - expectation(o, &e.pre_state)?;
        worst = worst.max((recorded - predicted).abs());
    }
    Ok(worst)
}

/// Largest deviation between central differences of `⟨O⟩` on jump-free grid
/// intervals and `⟨i[H′,O]⟩ − ½⟨{G, O}⟩ + ⟨G⟩⟨O⟩` with `G = Σ M†M`.
/// The deviation is `O(dt²)`.
pub fn drift_defect<T: Real>(m: &ModelSpec<T>, rec: &TrajectoryRecord<T>, o: &CMatrix<T>) -> Result<f64> {
    check_hermitian(o)?;
    let frame = m.to_shifted()?;
    let g = frame.sum_adjoint_products();
    let i = Complex::new(T::zero(), T::one());
    let comm = frame.hamiltonian.commutator(o).scale(i);
    let anti = &g.matmul(o) + &o.matmul(&g);
    let jump_times: Vec<f64> = rec.jumps.iter().map(|e| e.time.as_f64()).collect();
    let times: Vec<f64> = rec.times.iter().map(|t| t.as_f64()).collect();
    let mut worst = 0.0f64;
    for k in 1..times.len().saturating_sub(1) {
        let (a, b) = (times[k - 1], times[k + 1]);
        if jump_times.iter().any(|&t| t > a && t <= b) {
            continue;
        }
        let fd = (expectation(o, &rec.states[k + 1])? - expectation(o, &rec.states[k - 1])?) / (b - a);
        let psi = &rec.states[k];
        let rhs = expectation(&comm, psi)? - 0.5 * expectation(&anti, psi)? + expectation(&g, psi)? * expectation(o, psi)?;
        worst = worst.max((fd - rhs).abs());
    }
    Ok(worst)
}

/// `⟨H⟩_t = ∫₀ᵗ e^{s−t} ⟨H′⟩_s ds + ⟨H⟩₀ e^{−t}` by the trapezoid rule on
/// the sample times of `h_prime`.
pub fn energy_memory_curve(h_prime: &[f64], h0: f64, times: &[f64]) -> Result<Vec<f64>> {
    if h_prime.len() != times.len() || times.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: h_prime.len(),
            context: "energy memory samples",
        });
    }
    // accumulate ∫ e^{s − t_k} g(s) ds, rescaling by e^{−Δt} each step
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(h0 * (-times[0]).exp());
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let decay = (-dt).exp();
        acc = acc * decay + 0.5 * dt * (h_prime[k - 1] * decay + h_prime[k]);
        out.push(acc + h0 * (-times[k]).exp());
    }
    Ok(out)
}

/// `Σ_α M_α H M_α†` as the operator whose expectation drives the energy
/// memory relation.
pub fn sandwiched<T: Real>(m: &ModelSpec<T>, h: &CMatrix<T>) -> Result<CMatrix<T>> {
    let frame = m.to_shifted()?;
    let mut acc = CMatrix::zeros(m.dim);
    for op in frame.ops() {
        acc = &acc + &op.adjoint().matmul(h).matmul(op);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::pdp::{simulate_exact, ExactOptions};
    use crate::state::StateVector;
    use rand::SeedableRng;

    #[test]
    fn identity_observable_is_constant() {
        let m = models::driven_damped::<f64>(1.0, 1.0, 0.0);
        let recs: Vec<_> = (0..4)
            .map(|i| simulate_exact(&m, &StateVector::basis(2, 1), 1.0, &ExactOptions::default(), 1, i).unwrap())
            .collect();
        let s = observable_series(&recs, &CMatrix::identity(2), "I").unwrap();
        assert!(s.mean.iter().all(|v| (v - 1.0).abs() < 1e-12));
        for r in &recs {
            assert!(jump_increment_defect(&m, r, &CMatrix::identity(2)).unwrap() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_hermitian_observable() {
        let m = models::amplitude_damping::<f64>(1.0);
        let r = simulate_exact(&m, &StateVector::basis(2, 1), 1.0, &ExactOptions::default(), 1, 0).unwrap();
        assert!(observable_series(&[r], &models::sigma_minus(), "s").is_err());
    }

    #[test]
    fn jump_increments_on_random_three_level_model() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let m = models::random_model::<f64, _>(&mut rng, 3, 2, 1.0, 1.0);
        let o = models::random_hermitian::<f64, _>(&mut rng, 3, 1.0);
        let psi = models::random_state(&mut rng, 3);
        let r = simulate_exact(&m, &psi, 3.0, &ExactOptions::default(), 2, 0).unwrap();
        assert!(!r.jumps.is_empty());
        assert!(jump_increment_defect(&m, &r, &o).unwrap() < 1e-12);
    }

    #[test]
    fn drift_matches_between_jumps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let m = models::random_model::<f64, _>(&mut rng, 3, 1, 1.0, 0.4);
        let o = models::random_hermitian::<f64, _>(&mut rng, 3, 1.0);
        let psi = models::random_state(&mut rng, 3);
        let opts = |dt| ExactOptions { dt, ..Default::default() };
        let d1 = drift_defect(&m, &simulate_exact(&m, &psi, 1.0, &opts(1e-2), 3, 0).unwrap(), &o).unwrap();
        let d2 = drift_defect(&m, &simulate_exact(&m, &psi, 1.0, &opts(5e-3), 3, 0).unwrap(), &o).unwrap();
        assert!(d1 < 1e-2 && d2 < d1 / 3.0, "{d1} {d2}");
    }

    #[test]
    fn energy_memory_limits() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let flat = energy_memory_curve(&vec![0.7; times.len()], 0.7, &times).unwrap();
        assert!(flat.iter().all(|v| (v - 0.7).abs() < 1e-5));
        let decay = energy_memory_curve(&vec![0.0; times.len()], 1.3, &times).unwrap();
        for (v, t) in decay.iter().zip(&times) {
            assert!((v - 1.3 * (-t).exp()).abs() < 1e-15);
        }
    }
}
