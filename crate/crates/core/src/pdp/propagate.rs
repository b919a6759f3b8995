use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::ModelSpec;
use crate::poisson::{QuadSegment, SampledProcess};
use crate::scalar::{Real, C};
use crate::state::StateVector;

/// Fixed linear vector field `dψ/dt = K ψ`.
#[derive(Clone, Debug)]
pub struct Propagator<T> {
    k: CMatrix<T>,
    /// Diagonal of `K` when every off-diagonal entry is exactly zero.
    diag: Option<Vec<C<T>>>,
}

impl<T: Real> Propagator<T> {
    pub fn new(k: CMatrix<T>) -> Self {
        let diag = k.is_diagonal().then(|| (0..k.dim()).map(|i| k[(i, i)]).collect());
        Self { k, diag }
    }

    /// `K = −iH − ½ Σ A†A` over the stored operators.
    pub fn effective(m: &ModelSpec<T>) -> Self {
        let mut k = m.hamiltonian.scale(Complex::new(T::zero(), -T::one()));
        k.axpy(Complex::new(T::of(-0.5), T::zero()), &m.sum_adjoint_products());
        Self::new(k)
    }

    /// Raw-frame drift of the linear equation driven by `dÑ = dN − dt`:
    /// `K = −iH − ½ Σ L†L − Σ L`.
    pub fn linear(m_raw: &ModelSpec<T>) -> Self {
        let mut k = Self::effective(m_raw).k;
        for op in m_raw.ops() {
            k.axpy(-C::<T>::new(T::one(), T::zero()), op);
        }
        Self::new(k)
    }

    pub fn generator(&self) -> &CMatrix<T> {
        &self.k
    }

    pub fn apply(&self, psi: &[C<T>]) -> Vec<C<T>> {
        match &self.diag {
            Some(d) => d.iter().zip(psi).map(|(&a, &b)| a * b).collect(),
            None => self.k.mul_vec(psi),
        }
    }

    pub fn rk4(&self, psi: &[C<T>], h: T) -> Vec<C<T>> {
        let half = h * T::of(0.5);
        let k1 = self.apply(psi);
        let k2 = self.apply(&offset(psi, half, &k1));
        let k3 = self.apply(&offset(psi, half, &k2));
        let k4 = self.apply(&offset(psi, h, &k3));
        let w = h / T::of(6.0);
        psi.iter()
            .enumerate()
            .map(|(i, &p)| p + (k1[i] + (k2[i] + k3[i]) * T::of(2.0) + k4[i]) * w)
            .collect()
    }

    /// Two RK4 steps of `h/2`: the states at the midpoint and the end.
    pub fn half_steps(&self, psi: &[C<T>], h: T) -> (Vec<C<T>>, Vec<C<T>>) {
        let mid = self.rk4(psi, h * T::of(0.5));
        let end = self.rk4(&mid, h * T::of(0.5));
        (mid, end)
    }
}

fn offset<T: Real>(psi: &[C<T>], h: T, k: &[C<T>]) -> Vec<C<T>> {
    psi.iter().zip(k).map(|(&p, &d)| p + d * h).collect()
}

/// One explicit step of the normalized drift
/// `−(iH′ + ½ Σ (M†M − ‖MΨ‖²)) Ψ`, then exact renormalization.
///
/// Returns the new state and the size of the renormalization, `|‖·‖ − 1|`
/// before rescaling, which is `O(dt²)`.
pub fn drift_step<T: Real>(m: &ModelSpec<T>, psi: &StateVector<T>, dt: T) -> Result<(StateVector<T>, T)> {
    let frame = m.to_shifted()?;
    if psi.dim() != frame.dim {
        return Err(Error::DimensionMismatch {
            expected: frame.dim,
            found: psi.dim(),
            context: "state for drift step",
        });
    }
    let amps = psi.amplitudes();
    let kpsi = Propagator::effective(&frame).apply(amps);
    let total: T = frame.ops().map(|op| linalg::norm_sqr(&op.mul_vec(amps))).sum();
    let shift = total * T::of(0.5) * dt;
    let next: Vec<C<T>> = amps
        .iter()
        .zip(&kpsi)
        .map(|(&p, &k)| p + k * dt + p * shift)
        .collect();
    if !linalg::vec_is_finite(&next) {
        return Err(Error::NonFinite("drift step"));
    }
    let correction = (linalg::norm(&next) - T::one()).abs();
    Ok((StateVector::normalize(next)?, correction))
}

/// Start, midpoint and end states of one propagation piece `(t0, t1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSegment<T> {
    pub t0: T,
    pub t1: T,
    pub states: [Vec<C<T>>; 3],
}

/// Densely sampled trajectory between jumps; the last state of the segment
/// ending at a jump time is the pre-jump state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FinePath<T> {
    pub segments: Vec<StateSegment<T>>,
}

impl<T: Real> FinePath<T> {
    pub(crate) fn push(&mut self, t0: T, t1: T, states: [Vec<C<T>>; 3]) {
        if t1 > t0 {
            self.segments.push(StateSegment { t0, t1, states });
        }
    }

    /// The process `s ↦ f(ψ_s)` with quadratic interpolation on each segment.
    pub fn integrand(&self, f: impl Fn(&[C<T>]) -> C<T>) -> Result<SampledProcess<T>> {
        SampledProcess::new(
            self.segments
                .iter()
                .map(|s| QuadSegment {
                    t0: s.t0,
                    t1: s.t1,
                    samples: [f(&s.states[0]), f(&s.states[1]), f(&s.states[2])],
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::scalar::cplx;
    use rand::SeedableRng;

    #[test]
    fn diagonal_shortcut_matches_dense_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let k = CMatrix::from_fn(4, |i, j| if i == j { cplx(-0.3 * i as f64, 0.7 - i as f64) } else { cplx(0.0, 0.0) });
        let p = Propagator::new(k.clone());
        let psi = models::random_state::<f64, _>(&mut rng, 4);
        assert!(linalg::max_abs_diff(&p.apply(psi.amplitudes()), &k.mul_vec(psi.amplitudes())) < 1e-15);
    }

    #[test]
    fn rk4_matches_exact_decay() {
        let p = Propagator::new(CMatrix::from_real_diag(&[-1.0f64, -3.0]));
        let mut psi = vec![cplx(1.0, 0.0), cplx(1.0, 0.0)];
        for _ in 0..100 {
            psi = p.rk4(&psi, 0.01);
        }
        assert!((psi[0].re - (-1.0f64).exp()).abs() < 1e-10);
        assert!((psi[1].re - (-3.0f64).exp()).abs() < 2e-9); // n·(hλ)⁵/120·e^{−λT} ≈ 1e-9
    }

    #[test]
    fn complete_family_drift_is_unitary() {
        // Σ M†M = I: the drift reduces to −iH′Ψ and the norm moves only at O(dt²)
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let h = models::random_hermitian::<f64, _>(&mut rng, 3, 1.0);
        let m = models::measurement(h.clone(), models::basis_projectors(3));
        let psi = models::random_state::<f64, _>(&mut rng, 3);
        let dt = 1e-3;
        let (next, corr) = drift_step(&m, &psi, dt).unwrap();
        assert!(corr < 10.0 * dt * dt);
        let schr: Vec<_> = psi
            .amplitudes()
            .iter()
            .zip(h.mul_vec(psi.amplitudes()))
            .map(|(&p, hp)| p - cplx::<f64>(0.0, dt) * hp)
            .collect();
        let schr = StateVector::normalize(schr).unwrap();
        assert!(linalg::max_abs_diff(next.amplitudes(), schr.amplitudes()) < 1e-14);
    }

    #[test]
    fn projector_range_is_fixed_point() {
        let m = models::measurement(CMatrix::zeros(2), vec![CMatrix::unit(2, 0, 0)]);
        let psi = StateVector::<f64>::basis(2, 0);
        let (next, corr) = drift_step(&m, &psi, 0.1).unwrap();
        assert_eq!(next, psi);
        assert_eq!(corr, 0.0);
    }

    #[test]
    fn drift_step_agrees_with_renormalized_rk4() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let m = models::random_model::<f64, _>(&mut rng, 2, 2, 1.0, 0.5);
            let psi = models::random_state::<f64, _>(&mut rng, 2);
            let p = Propagator::effective(&m.to_shifted().unwrap());
            let err = |dt: f64| {
                let (a, _) = drift_step(&m, &psi, dt).unwrap();
                let b = StateVector::normalize(p.rk4(psi.amplitudes(), dt)).unwrap();
                linalg::max_abs_diff(a.amplitudes(), b.amplitudes())
            };
            let (e1, e2) = (err(1e-2), err(5e-3));
            assert!(e1 < 1e-2 && e1 / e2 > 3.0, "{e1} {e2}");
        }
    }
}
