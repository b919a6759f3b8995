//! Pathwise norm processes built from recorded fine paths.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::ModelSpec;
use crate::poisson::{doleans_exp_multi_at, Integrand, PoissonPath, SampledProcess};
use crate::scalar::{Real, C};

use super::rates::r_value;
use super::record::TrajectoryRecord;
use super::propagate::FinePath;

fn fine_of<T: Real>(rec: &TrajectoryRecord<T>) -> Result<&FinePath<T>> {
    rec.fine
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trajectory was recorded without its fine path".into()))
}

fn check_channels<T: Real>(m: &ModelSpec<T>, path: &PoissonPath<T>) -> Result<()> {
    if path.channels() != m.channels() {
        return Err(Error::DimensionMismatch {
            expected: m.channels(),
            found: path.channels(),
            context: "path channels",
        });
    }
    Ok(())
}

fn real<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// `φ_t = exp(−½ Σ ∫(‖M_αΨ_s‖ − 1)² ds) · ℰ(Σ ∫(‖M_αΨ_s‖ − 1) dÑ_α)` at the
/// record's grid times, from a normalized record with a fine path.
pub fn norm_process<T: Real>(m: &ModelSpec<T>, rec: &TrajectoryRecord<T>, path: &PoissonPath<T>) -> Result<Vec<T>> {
    check_channels(m, path)?;
    if !rec.normalized {
        return Err(Error::InvalidArgument("norm process needs a normalized trajectory".into()));
    }
    let fine = fine_of(rec)?;
    let ms: Vec<CMatrix<T>> = m.to_shifted()?.ops().cloned().collect();
    let f: Vec<SampledProcess<T>> = ms
        .iter()
        .map(|op| fine.integrand(|psi| real(linalg::norm(&op.mul_vec(psi)) - T::one())))
        .collect::<Result<_>>()?;
    let sq: Vec<SampledProcess<T>> = f.iter().map(|p| p.map(|v| v * v)).collect();
    let refs: Vec<&dyn Integrand<T>> = f.iter().map(|p| p as &dyn Integrand<T>).collect();
    let e = doleans_exp_multi_at(&refs, path, &rec.times)?;
    let phi: Vec<T> = rec
        .times
        .iter()
        .zip(e)
        .map(|(&t, e)| {
            let drift: T = sq.iter().map(|p| p.integral_to(t).re).sum();
            (T::of(-0.5) * drift).exp() * e.re
        })
        .collect();
    if let Some(bad) = phi.iter().find(|p| !(**p > T::zero())) {
        return Err(Error::InvalidState(format!("norm process not positive: {bad}")));
    }
    Ok(phi)
}

fn rate_integrands<T: Real>(m: &ModelSpec<T>, rec: &TrajectoryRecord<T>) -> Result<Vec<SampledProcess<T>>> {
    let fine = fine_of(rec)?;
    m.lindblad_ops()
        .iter()
        .map(|l| fine.integrand(|psi| real(r_value(l, psi, linalg::norm_sqr(psi)))))
        .collect()
}

/// `ℰ(Σ ∫ R_α dÑ_α)` at the record's grid times, with `R_α` evaluated on
/// the recorded (possibly unnormalized) states.
pub fn norm_sqr_from_rates<T: Real>(m: &ModelSpec<T>, rec: &TrajectoryRecord<T>, path: &PoissonPath<T>) -> Result<Vec<T>> {
    check_channels(m, path)?;
    let r = rate_integrands(m, rec)?;
    let refs: Vec<&dyn Integrand<T>> = r.iter().map(|p| p as &dyn Integrand<T>).collect();
    Ok(doleans_exp_multi_at(&refs, path, &rec.times)?.into_iter().map(|z| z.re).collect())
}

/// `Φ_t = exp(Σ ∫ [½(R_α − 2) + c_α] ds) · ℰ(Σ ∫ (c_α − 1) dÑ_α)` with
/// `c_α = 1/√(1 + R_α)`, at the record's grid times.
pub fn inverse_norm_from_rates<T: Real>(
    m: &ModelSpec<T>,
    rec: &TrajectoryRecord<T>,
    path: &PoissonPath<T>,
) -> Result<Vec<C<T>>> {
    check_channels(m, path)?;
    let r = rate_integrands(m, rec)?;
    let c_minus_one: Vec<SampledProcess<T>> = r
        .iter()
        .map(|p| p.map(|v| real((T::one() + v.re).sqrt().recip() - T::one())))
        .collect();
    let drift: Vec<SampledProcess<T>> = r
        .iter()
        .map(|p| p.map(|v| real(T::of(0.5) * (v.re - T::of(2.0)) + (T::one() + v.re).sqrt().recip())))
        .collect();
    let refs: Vec<&dyn Integrand<T>> = c_minus_one.iter().map(|p| p as &dyn Integrand<T>).collect();
    let e = doleans_exp_multi_at(&refs, path, &rec.times)?;
    Ok(rec
        .times
        .iter()
        .zip(e)
        .map(|(&t, e)| {
            let d: C<T> = drift.iter().map(|p| p.integral_to(t)).sum();
            d.exp() * e
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::pdp::{replay_normalized, simulate_linear, LinearOptions};
    use crate::state::StateVector;
    use rand::SeedableRng;

    fn fine_opts() -> LinearOptions {
        LinearOptions {
            dt: 1e-3,
            record_fine: true,
        }
    }

    #[test]
    fn unit_jump_norm_gives_unit_norm_process() {
        // M = I: ‖MΨ‖ = 1 for every state
        let m = models::constant_rate::<f64>(2, 1.0);
        let psi = StateVector::normalize(vec![Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)]).unwrap();
        let (_, path) = simulate_linear(&m, &psi, 2.0, &fine_opts(), 1, 0).unwrap();
        let rep = replay_normalized(&m, &psi, &path, &fine_opts()).unwrap();
        for p in norm_process(&m, &rep, &path).unwrap() {
            assert!((p - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rates_closed_forms_track_linear_norm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for i in 0..5 {
            let m = models::random_model::<f64, _>(&mut rng, 2, 2, 1.0, 0.6);
            let psi = models::random_state::<f64, _>(&mut rng, 2);
            let (lin, path) = simulate_linear(&m, &psi, 2.0, &fine_opts(), 9, i).unwrap();
            let closed = norm_sqr_from_rates(&m, &lin, &path).unwrap();
            let phi_inv = inverse_norm_from_rates(&m, &lin, &path).unwrap();
            let rep = replay_normalized(&m, &psi, &path, &fine_opts()).unwrap();
            let phi = norm_process(&m, &rep, &path).unwrap();
            for (k, s) in lin.states.iter().enumerate() {
                let n2 = linalg::norm_sqr(s);
                assert!((closed[k] / n2 - 1.0).abs() < 1e-8, "{} {}", closed[k], n2);
                assert!((phi_inv[k].norm_sqr() * n2 - 1.0).abs() < 1e-8);
                assert!((phi[k] * phi[k] / n2 - 1.0).abs() < 1e-6);
            }
        }
    }
}
