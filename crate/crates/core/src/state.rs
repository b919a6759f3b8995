//! Pure and mixed quantum states.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{Real, C};

/// Norm tolerance for a vector flagged as normalized.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    amps: Vec<C<T>>,
    normalized: bool,
}

impl<T: Real> StateVector<T> {
    /// Rescale `amps` to unit norm.
    pub fn normalize(mut amps: Vec<C<T>>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        if !linalg::vec_is_finite(&amps) {
            return Err(Error::NonFinite("state vector"));
        }
        let n = linalg::norm(&amps);
        if n == T::zero() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        linalg::scale_vec(&mut amps, n.recip());
        Ok(Self {
            amps,
            normalized: true,
        })
    }

    /// Wrap amplitudes that must already have unit norm.
    pub fn normalized(amps: Vec<C<T>>) -> Result<Self> {
        let n = linalg::norm(&amps);
        if !linalg::vec_is_finite(&amps) {
            return Err(Error::NonFinite("state vector"));
        }
        if (n - T::one()).abs() > T::tol(NORM_TOL) {
            return Err(Error::InvalidState(format!("norm {n} differs from 1")));
        }
        Ok(Self {
            amps,
            normalized: true,
        })
    }

    pub fn unnormalized(amps: Vec<C<T>>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        if !linalg::vec_is_finite(&amps) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self {
            amps,
            normalized: false,
        })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut amps = vec![C::zero(); dim];
        amps[k] = C::one();
        Self {
            amps,
            normalized: true,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C<T>> {
        self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> T {
        linalg::norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> T {
        linalg::norm(&self.amps)
    }

    /// `⟨ψ|O|ψ⟩` (not divided by the norm).
    pub fn expectation(&self, op: &CMatrix<T>) -> C<T> {
        op.quadratic_form(&self.amps)
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(&self) -> CMatrix<T> {
        CMatrix::outer(&self.amps, &self.amps)
    }
}

/// Tolerances used when a matrix is admitted as a density matrix.
#[derive(Clone, Copy, Debug)]
pub struct DensityTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for DensityTolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-12,
            trace: 1e-10,
            min_eigenvalue: -1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    m: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        Self::with_tolerances(m, &DensityTolerances::default())
    }

    pub fn with_tolerances(m: CMatrix<T>, tol: &DensityTolerances) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("density matrix"));
        }
        let herm = m.hermiticity_defect();
        if herm > T::tol(tol.hermiticity) {
            return Err(Error::InvalidState(format!("hermiticity defect {herm}")));
        }
        let tr = m.trace();
        if (tr.re - T::one()).abs() > T::tol(tol.trace) || tr.im.abs() > T::tol(tol.trace) {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = m.hermitian_eigenvalues()[0];
        if min < -T::tol(-tol.min_eigenvalue) {
            return Err(Error::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(Self { m })
    }

    pub(crate) fn from_unchecked(m: CMatrix<T>) -> Self {
        Self { m }
    }

    pub fn pure(psi: &StateVector<T>) -> Self {
        let mut m = psi.projector();
        let n = psi.norm_sqr();
        m = m.scale_real(n.recip());
        Self { m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim).scale_real(T::of(dim as f64).recip()),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.m
    }

    pub fn min_eigenvalue(&self) -> T {
        self.m.hermitian_eigenvalues()[0]
    }

    /// `tr(ρ O)`
    pub fn expectation(&self, op: &CMatrix<T>) -> C<T> {
        self.m.matmul(op).trace()
    }
}
