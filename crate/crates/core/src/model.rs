//! Open-system models: a Hamiltonian plus an ordered family of jump operators.

use std::collections::HashSet;
use std::fmt;

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{Real, C};
use crate::state::DensityMatrix;

/// How the stored jump operators relate to the Lindblad operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// Operators are the Lindblad operators `L_α` of the generator.
    #[serde(rename = "raw_L")]
    RawL,
    /// Operators are `M_α = L_α + I` with the matching Hamiltonian `H′`.
    /// Normalized samplers use them directly as jump operators.
    #[serde(rename = "shifted_M")]
    ShiftedM,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::RawL => "raw_L",
            Convention::ShiftedM => "shifted_M",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpOperator<T> {
    pub label: String,
    pub op: CMatrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec<T> {
    pub dim: usize,
    pub hamiltonian: CMatrix<T>,
    pub jump_ops: Vec<JumpOperator<T>>,
    pub convention: Convention,
}

#[derive(Clone, Copy, Debug)]
pub struct ValidationOptions {
    pub hermiticity_tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            hermiticity_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub hermiticity_defect: f64,
    pub hermiticity_tol: f64,
    pub dimension_mismatches: Vec<String>,
    pub duplicate_labels: Vec<String>,
    pub non_finite: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model validation: {}", if self.ok { "ok" } else { "FAILED" })?;
        let herm_ok = self.hermiticity_defect <= self.hermiticity_tol;
        writeln!(
            f,
            "  hamiltonian hermiticity defect: {:.3e} (tolerance {:.1e}) {}",
            self.hermiticity_defect,
            self.hermiticity_tol,
            if herm_ok { "ok" } else { "FAIL" }
        )?;
        for m in &self.dimension_mismatches {
            writeln!(f, "  dimension mismatch: {m}")?;
        }
        for l in &self.duplicate_labels {
            writeln!(f, "  duplicate jump label: {l}")?;
        }
        for n in &self.non_finite {
            writeln!(f, "  non-finite entries: {n}")?;
        }
        Ok(())
    }
}

pub fn validate_model<T: Real>(m: &ModelSpec<T>) -> ValidationReport {
    validate_model_with(m, &ValidationOptions::default())
}

pub fn validate_model_with<T: Real>(m: &ModelSpec<T>, opts: &ValidationOptions) -> ValidationReport {
    let mut dimension_mismatches = Vec::new();
    let mut non_finite = Vec::new();
    if m.dim == 0 {
        dimension_mismatches.push("dim must be positive".to_string());
    }
    if m.hamiltonian.dim() != m.dim {
        dimension_mismatches.push(format!(
            "hamiltonian is {0}×{0}, model dim is {1}",
            m.hamiltonian.dim(),
            m.dim
        ));
    }
    if !m.hamiltonian.is_finite() {
        non_finite.push("hamiltonian".to_string());
    }
    let mut seen = HashSet::new();
    let mut duplicate_labels = Vec::new();
    for j in &m.jump_ops {
        if j.op.dim() != m.dim {
            dimension_mismatches.push(format!(
                "jump operator '{}' is {1}×{1}, model dim is {2}",
                j.label,
                j.op.dim(),
                m.dim
            ));
        }
        if !j.op.is_finite() {
            non_finite.push(format!("jump operator '{}'", j.label));
        }
        if !seen.insert(j.label.as_str()) && !duplicate_labels.contains(&j.label) {
            duplicate_labels.push(j.label.clone());
        }
    }
    let hermiticity_defect = m.hamiltonian.hermiticity_defect().as_f64();
    let tol = T::tol(opts.hermiticity_tol).as_f64();
    let ok = hermiticity_defect <= tol
        && dimension_mismatches.is_empty()
        && duplicate_labels.is_empty()
        && non_finite.is_empty();
    ValidationReport {
        ok,
        hermiticity_defect,
        hermiticity_tol: tol,
        dimension_mismatches,
        duplicate_labels,
        non_finite,
    }
}

impl<T: Real> ModelSpec<T> {
    pub fn new(
        hamiltonian: CMatrix<T>,
        jump_ops: Vec<(String, CMatrix<T>)>,
        convention: Convention,
    ) -> Self {
        Self {
            dim: hamiltonian.dim(),
            hamiltonian,
            jump_ops: jump_ops
                .into_iter()
                .map(|(label, op)| JumpOperator { label, op })
                .collect(),
            convention,
        }
    }

    /// Construct and reject anything that does not validate.
    pub fn checked(
        hamiltonian: CMatrix<T>,
        jump_ops: Vec<(String, CMatrix<T>)>,
        convention: Convention,
    ) -> Result<Self> {
        let m = Self::new(hamiltonian, jump_ops, convention);
        m.ensure_valid()?;
        Ok(m)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_model(self);
        if report.ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(report.to_string()))
        }
    }

    pub fn channels(&self) -> usize {
        self.jump_ops.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.jump_ops.iter().map(|j| j.label.as_str()).collect()
    }

    pub fn ops(&self) -> impl Iterator<Item = &CMatrix<T>> {
        self.jump_ops.iter().map(|j| &j.op)
    }

    /// Lindblad operators `L_α`, undoing the `+I` shift when stored as `M_α`.
    pub fn lindblad_ops(&self) -> Vec<CMatrix<T>> {
        let id = CMatrix::identity(self.dim);
        self.ops()
            .map(|op| match self.convention {
                Convention::RawL => op.clone(),
                Convention::ShiftedM => op - &id,
            })
            .collect()
    }

    /// `Σ_α A_α† A_α` over the stored operators.
    pub fn sum_adjoint_products(&self) -> CMatrix<T> {
        let mut acc = CMatrix::zeros(self.dim);
        for op in self.ops() {
            acc = &acc + &op.adjoint().matmul(op);
        }
        acc
    }

    /// Same model in the `M_α = L_α + I` frame.
    pub fn to_shifted(&self) -> Result<Self> {
        match self.convention {
            Convention::ShiftedM => Ok(self.clone()),
            Convention::RawL => {
                let mut s = shift_model(self, &vec![C::one(); self.channels()])?;
                s.convention = Convention::ShiftedM;
                Ok(s)
            }
        }
    }

    /// Same model in the raw `L_α` frame.
    pub fn to_raw(&self) -> Result<Self> {
        match self.convention {
            Convention::RawL => Ok(self.clone()),
            Convention::ShiftedM => {
                let mut s = shift_model(self, &vec![-C::<T>::one(); self.channels()])?;
                s.convention = Convention::RawL;
                Ok(s)
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ModelSpec<U> {
        ModelSpec {
            dim: self.dim,
            hamiltonian: self.hamiltonian.cast(),
            jump_ops: self
                .jump_ops
                .iter()
                .map(|j| JumpOperator {
                    label: j.label.clone(),
                    op: j.op.cast(),
                })
                .collect(),
            convention: self.convention,
        }
    }
}

/// Precomputed GKSL generator `ρ ↦ Gρ + ρG† + Σ A ρ A†` with
/// `G = −iH − ½ Σ A†A`, where `A` ranges over the stored operators.
///
/// The generator is invariant under the `+f·I` gauge shift, so the stored
/// operators may be in either convention as long as `H` matches them.
#[derive(Clone, Debug)]
pub struct Lindbladian<T> {
    g: CMatrix<T>,
    g_adj: CMatrix<T>,
    ops: Vec<(CMatrix<T>, CMatrix<T>)>,
}

impl<T: Real> Lindbladian<T> {
    pub fn new(m: &ModelSpec<T>) -> Self {
        let minus_i = C::new(T::zero(), -T::one());
        let mut g = m.hamiltonian.scale(minus_i);
        g.axpy(C::new(T::of(-0.5), T::zero()), &m.sum_adjoint_products());
        Self {
            g_adj: g.adjoint(),
            g,
            ops: m.ops().map(|a| (a.clone(), a.adjoint())).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn apply(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let mut out = &self.g.matmul(rho) + &rho.matmul(&self.g_adj);
        for (a, a_adj) in &self.ops {
            out = &out + &a.matmul(rho).matmul(a_adj);
        }
        out
    }
}

pub fn lindbladian_apply<T: Real>(m: &ModelSpec<T>, rho: &DensityMatrix<T>) -> Result<CMatrix<T>> {
    if rho.dim() != m.dim {
        return Err(Error::DimensionMismatch {
            expected: m.dim,
            found: rho.dim(),
            context: "density matrix",
        });
    }
    Ok(Lindbladian::new(m).apply(rho.matrix()))
}

/// Gauge shift `L_α → L_α + f_α I`, `H → H + (1/2i) Σ_α (f_α* L_α − f_α L_α†)`.
///
/// The generator is unchanged. The convention tag is carried over; use
/// [`ModelSpec::to_shifted`] for the canonical `f_α = 1` frame change.
pub fn shift_model<T: Real>(m: &ModelSpec<T>, constants: &[C<T>]) -> Result<ModelSpec<T>> {
    if constants.len() != m.channels() {
        return Err(Error::DimensionMismatch {
            expected: m.channels(),
            found: constants.len(),
            context: "shift constants (one per channel)",
        });
    }
    let id = CMatrix::identity(m.dim);
    // 1/(2i) = −i/2
    let coeff = C::new(T::zero(), T::of(-0.5));
    let mut h = m.hamiltonian.clone();
    let mut jump_ops = Vec::with_capacity(m.channels());
    for (j, &f) in m.jump_ops.iter().zip(constants) {
        let mut term = j.op.scale(f.conj());
        term.axpy(-f, &j.op.adjoint());
        h.axpy(coeff, &term);
        let mut op = j.op.clone();
        op.axpy(f, &id);
        jump_ops.push(JumpOperator {
            label: j.label.clone(),
            op,
        });
    }
    // Rounding leaves an antihermitian residue of order ε·‖L‖; remove it so
    // the shifted model validates at the same tolerance as the input.
    Ok(ModelSpec {
        dim: m.dim,
        hamiltonian: h.hermitian_part(),
        jump_ops,
        convention: m.convention,
    })
}
