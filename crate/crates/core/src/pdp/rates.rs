use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::ModelSpec;
use crate::scalar::{Real, C};
use crate::state::StateVector;

/// Per-channel measure-change coefficients at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct GirsanovRates<T> {
    /// `R_α = ⟨ψ|L_α + L_α† + L_α†L_α|ψ⟩ / ⟨ψ|ψ⟩`
    pub r: Vec<T>,
    /// `S_α = R_α / (1 + R_α)`; `−∞` when `R_α = −1`.
    pub s: Vec<T>,
    /// `c_α = 1 / √(1 + R_α)`; `+∞` when `R_α = −1`.
    pub c: Vec<T>,
}

/// Rates of `m` at `psi`, with `L_α` the Lindblad operators of `m` whatever
/// its storage convention.
pub fn girsanov_rates<T: Real>(m: &ModelSpec<T>, psi: &StateVector<T>) -> Result<GirsanovRates<T>> {
    if psi.dim() != m.dim {
        return Err(Error::DimensionMismatch {
            expected: m.dim,
            found: psi.dim(),
            context: "state for rate evaluation",
        });
    }
    let ls = m.lindblad_ops();
    rates_from_ops(&ls, psi.amplitudes())
}

pub(crate) fn rates_from_ops<T: Real>(ls: &[CMatrix<T>], psi: &[C<T>]) -> Result<GirsanovRates<T>> {
    let n2 = linalg::norm_sqr(psi);
    if !(n2 > T::zero()) {
        return Err(Error::InvalidState("rates of the zero vector".into()));
    }
    let r: Vec<T> = ls.iter().map(|l| r_value(l, psi, n2)).collect();
    let s = r
        .iter()
        .map(|&r| if r > -T::one() { r / (T::one() + r) } else { T::neg_infinity() })
        .collect();
    let c = r
        .iter()
        .map(|&r| if r > -T::one() { (T::one() + r).sqrt().recip() } else { T::infinity() })
        .collect();
    Ok(GirsanovRates { r, s, c })
}

/// `(2 Re⟨ψ|Lψ⟩ + ‖Lψ‖²) / ‖ψ‖²`, clamped at the exact lower bound −1.
pub(crate) fn r_value<T: Real>(l: &CMatrix<T>, psi: &[C<T>], n2: T) -> T {
    let lpsi = l.mul_vec(psi);
    let r = (T::of(2.0) * linalg::inner(psi, &lpsi).re + linalg::norm_sqr(&lpsi)) / n2;
    r.max(-T::one())
}

/// Rates below this are treated as exactly zero when choosing a channel.
pub(crate) fn negligible<T: Real>() -> T {
    T::epsilon() * T::epsilon()
}

/// Born-rule rates `‖M_α Ψ‖²` in the frame the normalized samplers use.
pub fn jump_rates<T: Real>(m: &ModelSpec<T>, psi: &StateVector<T>) -> Result<Vec<T>> {
    let frame = m.to_shifted()?;
    check_dim(&frame, psi)?;
    Ok(frame.ops().map(|op| linalg::norm_sqr(&op.mul_vec(psi.amplitudes()))).collect())
}

/// `M_α Ψ / ‖M_α Ψ‖` in the sampler frame.
pub fn apply_jump<T: Real>(m: &ModelSpec<T>, psi: &StateVector<T>, channel: usize) -> Result<StateVector<T>> {
    let frame = m.to_shifted()?;
    check_dim(&frame, psi)?;
    let op = frame
        .jump_ops
        .get(channel)
        .ok_or_else(|| Error::InvalidArgument(format!("no channel {channel}")))?;
    let (post, _) = jump_image(&op.op, psi.amplitudes(), channel)?;
    StateVector::normalize(post)
}

pub(crate) fn jump_image<T: Real>(op: &CMatrix<T>, psi: &[C<T>], channel: usize) -> Result<(Vec<C<T>>, T)> {
    let mut img = op.mul_vec(psi);
    let n2 = linalg::norm_sqr(&img);
    if !(n2 > negligible::<T>() * linalg::norm_sqr(psi)) {
        return Err(Error::ForbiddenJump { channel });
    }
    let n = n2.sqrt();
    linalg::scale_vec(&mut img, n.recip());
    Ok((img, n))
}

/// First channel whose cumulative rate exceeds `u · total`; zero-rate
/// channels are never returned.
pub(crate) fn select_channel<T: Real>(rates: &[T], u: f64) -> Option<usize> {
    let eps = negligible::<T>();
    let total: T = rates.iter().filter(|&&r| r > eps).copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let target = T::of(u) * total;
    let mut acc = T::zero();
    let mut last = None;
    for (k, &r) in rates.iter().enumerate() {
        if r <= eps {
            continue;
        }
        acc += r;
        last = Some(k);
        if target < acc {
            return Some(k);
        }
    }
    last
}

fn check_dim<T: Real>(m: &ModelSpec<T>, psi: &StateVector<T>) -> Result<()> {
    if psi.dim() != m.dim {
        return Err(Error::DimensionMismatch {
            expected: m.dim,
            found: psi.dim(),
            context: "state",
        });
    }
    Ok(())
}
