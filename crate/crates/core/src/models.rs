//! Ready-made models used by the examples, the CLI and the test suites.
//!
//! Two-level systems use index 0 for the ground state `|g⟩` and index 1 for
//! the excited state `|e⟩`, so `σ⁻ = |g⟩⟨e|` is the matrix unit `(0, 1)`.

use num_traits::Zero;
use rand::Rng;

use crate::linalg::CMatrix;
use crate::model::{Convention, ModelSpec};
use crate::scalar::{Real, C};

pub fn sigma_minus<T: Real>() -> CMatrix<T> {
    CMatrix::unit(2, 0, 1)
}

pub fn sigma_x<T: Real>() -> CMatrix<T> {
    &CMatrix::unit(2, 0, 1) + &CMatrix::unit(2, 1, 0)
}

/// `σ_z = |e⟩⟨e| − |g⟩⟨g|`
pub fn sigma_z<T: Real>() -> CMatrix<T> {
    CMatrix::from_real_diag(&[-T::one(), T::one()])
}

/// `H = 0`, `L = √γ σ⁻`.
pub fn amplitude_damping<T: Real>(gamma: f64) -> ModelSpec<T> {
    ModelSpec::new(
        CMatrix::zeros(2),
        vec![("decay".into(), sigma_minus().scale_real(T::of(gamma.sqrt())))],
        Convention::RawL,
    )
}

/// Resonantly driven, detuned, damped qubit:
/// `H = (Δ/2) σ_z + (Ω/2) σ_x`, `L = √γ σ⁻`.
pub fn driven_damped<T: Real>(rabi: f64, gamma: f64, detuning: f64) -> ModelSpec<T> {
    let mut h = sigma_z::<T>().scale_real(T::of(detuning / 2.0));
    h = &h + &sigma_x::<T>().scale_real(T::of(rabi / 2.0));
    ModelSpec::new(
        h,
        vec![("decay".into(), sigma_minus().scale_real(T::of(gamma.sqrt())))],
        Convention::RawL,
    )
}

/// `|k⟩⟨k|` for every basis state.
pub fn basis_projectors<T: Real>(dim: usize) -> Vec<CMatrix<T>> {
    (0..dim).map(|k| CMatrix::unit(dim, k, k)).collect()
}

/// Measurement model whose jump operators are used directly as `M_α`
/// (no `+I` shift), e.g. a complete family of orthogonal projectors.
pub fn measurement<T: Real>(hamiltonian: CMatrix<T>, ops: Vec<CMatrix<T>>) -> ModelSpec<T> {
    let jump_ops = ops
        .into_iter()
        .enumerate()
        .map(|(k, op)| (format!("P{k}"), op))
        .collect();
    ModelSpec::new(hamiltonian, jump_ops, Convention::ShiftedM)
}

/// Single channel with `M = √r · I`: every state jumps at rate `r`.
pub fn constant_rate<T: Real>(dim: usize, rate: f64) -> ModelSpec<T> {
    ModelSpec::new(
        CMatrix::zeros(dim),
        vec![("clock".into(), CMatrix::identity(dim).scale_real(T::of(rate.sqrt())))],
        Convention::ShiftedM,
    )
}

/// Random Hermitian matrix with entries of magnitude up to `scale`.
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMatrix<T> {
    let a = random_matrix(rng, dim, scale);
    a.hermitian_part()
}

pub fn random_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMatrix<T> {
    CMatrix::from_fn(dim, |_, _| {
        C::new(
            T::of(scale * rng.gen_range(-1.0..1.0)),
            T::of(scale * rng.gen_range(-1.0..1.0)),
        )
    })
}

/// Random raw-frame model with `channels` jump operators.
pub fn random_model<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    channels: usize,
    h_scale: f64,
    l_scale: f64,
) -> ModelSpec<T> {
    let h = random_hermitian(rng, dim, h_scale);
    let ops = (0..channels)
        .map(|k| (format!("L{k}"), random_matrix(rng, dim, l_scale)))
        .collect();
    ModelSpec::new(h, ops, Convention::RawL)
}

pub fn random_state<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> crate::state::StateVector<T> {
    loop {
        let amps: Vec<C<T>> = (0..dim)
            .map(|_| C::new(T::of(rng.gen_range(-1.0..1.0)), T::of(rng.gen_range(-1.0..1.0))))
            .collect();
        if amps.iter().any(|z| !z.is_zero()) {
            return crate::state::StateVector::normalize(amps).expect("non-zero");
        }
    }
}
