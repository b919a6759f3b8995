//! Pathwise Poisson calculus: sampled jump paths, first-order compensated
//! integrals and Doléans-Dade exponentials.
//!
//! Everything is evaluated in closed form on a realized path. For an
//! integrand `f` and compensated process `Ñ = N − t`,
//!
//! ```text
//! ∫₀ᵗ f dÑ = Σ_{τ ≤ t} f(τ⁻) − ∫₀ᵗ f ds
//! ℰ(∫ f dÑ)_t = exp(−∫₀ᵗ f ds) · Π_{τ ≤ t} (1 + f(τ⁻))
//! ```
//!
//! Integrands are predictable: a jump at `τ` uses the value `f(τ⁻)` of the
//! interval that ends at `τ`.

use num_complex::Complex;
use num_traits::{One, Zero};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamId;
use crate::scalar::{Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateModel {
    /// Unit-rate reference measure: independent rate-1 processes.
    #[serde(rename = "unit_rate")]
    UnitRate,
    /// Jump times produced by a state-dependent sampler.
    #[serde(rename = "state_dependent")]
    StateDependent,
}

/// Realized jump times of every channel on `(0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonPath<T> {
    horizon: T,
    jumps: Vec<Vec<T>>,
    rate_model: RateModel,
}

impl<T: Real> PoissonPath<T> {
    pub fn new(horizon: T, jumps: Vec<Vec<T>>, rate_model: RateModel) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("path horizon must be positive, got {horizon}")));
        }
        for (ch, times) in jumps.iter().enumerate() {
            let mut prev = T::zero();
            for &t in times {
                if !(t > prev) || t > horizon {
                    return Err(Error::InvalidArgument(format!(
                        "channel {ch}: jump time {t} breaks 0 < t₁ < t₂ < … ≤ {horizon}"
                    )));
                }
                prev = t;
            }
        }
        Ok(Self {
            horizon,
            jumps,
            rate_model,
        })
    }

    pub fn empty(channels: usize, horizon: T) -> Result<Self> {
        Self::new(horizon, vec![Vec::new(); channels], RateModel::UnitRate)
    }

    pub fn channels(&self) -> usize {
        self.jumps.len()
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn rate_model(&self) -> RateModel {
        self.rate_model
    }

    pub fn jumps(&self, channel: usize) -> &[T] {
        &self.jumps[channel]
    }

    pub fn all_jumps(&self) -> &[Vec<T>] {
        &self.jumps
    }

    /// `N_α(t)`: number of jumps at times `≤ t`.
    pub fn count(&self, channel: usize, t: T) -> usize {
        self.jumps[channel].partition_point(|&s| s <= t)
    }

    /// `Ñ_α(t) = N_α(t) − t`
    pub fn compensated(&self, channel: usize, t: T) -> T {
        T::of(self.count(channel, t) as f64) - t
    }

    pub fn total_jumps(&self) -> usize {
        self.jumps.iter().map(Vec::len).sum()
    }

    /// All jumps as `(time, channel)`, ordered by time then channel.
    pub fn events(&self) -> Vec<(T, usize)> {
        let mut ev: Vec<(T, usize)> = self
            .jumps
            .iter()
            .enumerate()
            .flat_map(|(ch, ts)| ts.iter().map(move |&t| (t, ch)))
            .collect();
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        ev
    }

    fn check(&self, channel: usize, t: T) -> Result<()> {
        if channel >= self.channels() {
            return Err(Error::InvalidArgument(format!(
                "channel {channel} out of range ({} channels)",
                self.channels()
            )));
        }
        if t < T::zero() || t > self.horizon * (T::one() + T::epsilon() * T::of(16.0)) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Independent unit-rate Poisson paths, one substream per channel.
pub fn sample_unit_poisson<T: Real>(
    channels: usize,
    horizon: f64,
    master_seed: u64,
    trajectory: u64,
) -> Result<PoissonPath<T>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let jumps = (0..channels)
        .map(|ch| {
            let mut rng = StreamId::new(master_seed, trajectory, ch as u64).rng();
            let mut t = 0.0f64;
            let mut times = Vec::new();
            loop {
                let gap: f64 = Exp1.sample(&mut rng);
                t += gap;
                if t > horizon {
                    break;
                }
                let tt = T::of(t);
                if times.last().map_or(tt > T::zero(), |&p| tt > p) {
                    times.push(tt);
                }
            }
            times
        })
        .collect();
    PoissonPath::new(T::of(horizon), jumps, RateModel::UnitRate)
}

/// A predictable integrand that can be integrated against `ds` exactly.
pub trait Integrand<T: Real> {
    /// `∫₀ᵗ f ds`
    fn integral_to(&self, t: T) -> C<T>;
    /// `f(t⁻)`, the value a jump at `t` sees.
    fn left_limit(&self, t: T) -> C<T>;
}

/// Piecewise-constant process: `values[i]` holds on `(knots[i], knots[i+1]]`,
/// the last value on `(knots[n−1], ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepProcess<T> {
    knots: Vec<T>,
    values: Vec<C<T>>,
    cumulative: Vec<C<T>>,
}

impl<T: Real> StepProcess<T> {
    pub fn new(knots: Vec<T>, values: Vec<C<T>>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::InvalidArgument(
                "step process needs one value per knot and at least one knot".into(),
            ));
        }
        if knots[0] != T::zero() {
            return Err(Error::InvalidArgument("first knot must be 0".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument("knots must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("step process values"));
        }
        let mut cumulative = Vec::with_capacity(knots.len());
        let mut acc = C::<T>::zero();
        cumulative.push(acc);
        for i in 1..knots.len() {
            acc += values[i - 1] * (knots[i] - knots[i - 1]);
            cumulative.push(acc);
        }
        Ok(Self {
            knots,
            values,
            cumulative,
        })
    }

    pub fn constant(c: C<T>) -> Self {
        Self::new(vec![T::zero()], vec![c]).expect("valid constant")
    }

    pub fn real_constant(x: T) -> Self {
        Self::constant(Complex::new(x, T::zero()))
    }

    pub fn from_real(knots: Vec<T>, values: Vec<T>) -> Result<Self> {
        Self::new(knots, values.into_iter().map(|v| Complex::new(v, T::zero())).collect())
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    fn segment(&self, t: T) -> usize {
        self.knots.partition_point(|&k| k < t).saturating_sub(1)
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        Self::new(self.knots.clone(), self.values.iter().map(|&v| f(v)).collect())
            .expect("mapping preserves the knot structure")
    }

    /// Pointwise combination on the union of both knot sets.
    pub fn combine(&self, other: &Self, f: impl Fn(C<T>, C<T>) -> C<T>) -> Self {
        let mut knots: Vec<T> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let values = knots
            .iter()
            .map(|&k| {
                // value on (k, next]: probe just to the right of k
                let a = self.values[self.knots.partition_point(|&x| x <= k) - 1];
                let b = other.values[other.knots.partition_point(|&x| x <= k) - 1];
                f(a, b)
            })
            .collect();
        Self::new(knots, values).expect("union of valid knot sets")
    }
}

impl<T: Real> Integrand<T> for StepProcess<T> {
    fn integral_to(&self, t: T) -> C<T> {
        let i = self.segment(t);
        self.cumulative[i] + self.values[i] * (t - self.knots[i])
    }

    fn left_limit(&self, t: T) -> C<T> {
        self.values[self.segment(t)]
    }
}

/// One piece of a [`SampledProcess`]: samples at the start, midpoint and end
/// of `(t0, t1]`, interpolated by the quadratic through them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadSegment<T> {
    pub t0: T,
    pub t1: T,
    pub samples: [C<T>; 3],
}

/// Continuous-between-jumps integrand sampled along an integrated trajectory.
///
/// The `ds` integral is exact for the piecewise-quadratic interpolant
/// (Simpson's rule on whole segments); segments break at every jump so the
/// left limit at a jump is the last sample before it.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledProcess<T> {
    segments: Vec<QuadSegment<T>>,
    cumulative: Vec<C<T>>,
}

impl<T: Real> SampledProcess<T> {
    pub fn new(segments: Vec<QuadSegment<T>>) -> Result<Self> {
        let mut prev = T::zero();
        let mut acc = C::<T>::zero();
        let mut cumulative = Vec::with_capacity(segments.len() + 1);
        cumulative.push(acc);
        for s in &segments {
            if s.t0 != prev || !(s.t1 > s.t0) {
                return Err(Error::InvalidArgument(format!(
                    "sampled segments must tile [0, T] without gaps (segment at {})",
                    s.t0
                )));
            }
            if s.samples.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite("sampled integrand"));
            }
            acc += partial_integral(s, s.t1);
            cumulative.push(acc);
            prev = s.t1;
        }
        Ok(Self {
            segments,
            cumulative,
        })
    }

    pub fn segments(&self) -> &[QuadSegment<T>] {
        &self.segments
    }

    pub fn end(&self) -> T {
        self.segments.last().map_or(T::zero(), |s| s.t1)
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| QuadSegment {
                t0: s.t0,
                t1: s.t1,
                samples: s.samples.map(&f),
            })
            .collect();
        Self::new(segments).expect("mapping preserves the segment structure")
    }

    fn segment(&self, t: T) -> Option<usize> {
        if self.segments.is_empty() {
            return None;
        }
        let i = self.segments.partition_point(|s| s.t1 < t);
        Some(i.min(self.segments.len() - 1))
    }
}

fn partial_integral<T: Real>(s: &QuadSegment<T>, t: T) -> C<T> {
    let h = s.t1 - s.t0;
    let u = (t - s.t0) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let two_thirds = T::of(2.0 / 3.0);
    let w0 = two_thirds * u3 - T::of(1.5) * u2 + u;
    let wm = -T::of(4.0 / 3.0) * u3 + T::of(2.0) * u2;
    let w1 = two_thirds * u3 - T::of(0.5) * u2;
    (s.samples[0] * w0 + s.samples[1] * wm + s.samples[2] * w1) * h
}

fn interpolate<T: Real>(s: &QuadSegment<T>, t: T) -> C<T> {
    let u = (t - s.t0) / (s.t1 - s.t0);
    let l0 = T::of(2.0) * u * u - T::of(3.0) * u + T::one();
    let lm = T::of(4.0) * u * (T::one() - u);
    let l1 = T::of(2.0) * u * u - u;
    s.samples[0] * l0 + s.samples[1] * lm + s.samples[2] * l1
}

impl<T: Real> Integrand<T> for SampledProcess<T> {
    /// Beyond the last segment the final sample is held constant.
    fn integral_to(&self, t: T) -> C<T> {
        let Some(i) = self.segment(t) else {
            return C::<T>::zero();
        };
        let s = &self.segments[i];
        if t >= s.t1 {
            return self.cumulative[i + 1] + s.samples[2] * (t - s.t1);
        }
        self.cumulative[i] + partial_integral(s, t.max(s.t0))
    }

    fn left_limit(&self, t: T) -> C<T> {
        let Some(i) = self.segment(t) else {
            return C::<T>::zero();
        };
        let s = &self.segments[i];
        if t >= s.t1 {
            s.samples[2]
        } else {
            interpolate(s, t)
        }
    }
}

/// `∫₀ᵗ f dÑ_α`
pub fn integrate_compensated<T: Real, I: Integrand<T> + ?Sized>(
    f: &I,
    path: &PoissonPath<T>,
    channel: usize,
    t: T,
) -> Result<C<T>> {
    path.check(channel, t)?;
    let n = path.count(channel, t);
    let jumps: C<T> = path.jumps(channel)[..n].iter().map(|&s| f.left_limit(s)).sum();
    Ok(jumps - f.integral_to(t))
}

/// `ℰ(∫ f dÑ_α)_t`
pub fn doleans_exp<T: Real, I: Integrand<T> + ?Sized>(
    f: &I,
    path: &PoissonPath<T>,
    channel: usize,
    t: T,
) -> Result<C<T>> {
    path.check(channel, t)?;
    let n = path.count(channel, t);
    let prod = path.jumps(channel)[..n]
        .iter()
        .fold(C::<T>::one(), |acc: C<T>, &s| acc * (C::<T>::one() + f.left_limit(s)));
    Ok((-f.integral_to(t)).exp() * prod)
}

/// `ℰ(Σ_α ∫ f_α dÑ_α)` evaluated at every time in `times`.
///
/// Channels never jump simultaneously on a sampled path, so the exponential
/// of the sum factorizes into one closed form per channel.
pub fn doleans_exp_multi_at<T: Real>(
    fs: &[&dyn Integrand<T>],
    path: &PoissonPath<T>,
    times: &[T],
) -> Result<Vec<C<T>>> {
    if fs.len() != path.channels() {
        return Err(Error::DimensionMismatch {
            expected: path.channels(),
            found: fs.len(),
            context: "one integrand per channel",
        });
    }
    // prefix[α][k] = Π_{j<k} (1 + f_α(τ_j⁻))
    let prefix: Vec<Vec<C<T>>> = fs
        .iter()
        .enumerate()
        .map(|(ch, f)| {
            let mut acc = C::<T>::one();
            let mut out = Vec::with_capacity(path.jumps(ch).len() + 1);
            out.push(acc);
            for &s in path.jumps(ch) {
                acc *= C::<T>::one() + f.left_limit(s);
                out.push(acc);
            }
            out
        })
        .collect();
    times
        .iter()
        .map(|&t| {
            if t < T::zero() || t > path.horizon() * (T::one() + T::epsilon() * T::of(16.0)) {
                return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", path.horizon())));
            }
            let mut drift = C::<T>::zero();
            let mut prod = C::<T>::one();
            for (ch, f) in fs.iter().enumerate() {
                drift += f.integral_to(t);
                prod *= prefix[ch][path.count(ch, t)];
            }
            Ok((-drift).exp() * prod)
        })
        .collect()
}

/// `ℰ(∫f dÑ)·ℰ(∫g dÑ)` through the product rule
/// `exp(∫ f g ds) · ℰ(∫ (f + g + f g) dÑ)`.
pub fn doleans_product<T: Real>(
    f: &StepProcess<T>,
    g: &StepProcess<T>,
    path: &PoissonPath<T>,
    channel: usize,
    t: T,
) -> Result<C<T>> {
    let fg = f.combine(g, |a, b| a * b);
    let sum = f.combine(g, |a, b| a + b + a * b);
    Ok(fg.integral_to(t).exp() * doleans_exp(&sum, path, channel, t)?)
}

/// `ℰ(∫f dÑ)⁻¹ = exp(∫ f²/(1+f) ds) · ℰ(∫ −f/(1+f) dÑ)`.
///
/// Every jump up to `t` must see a real `1 + f(τ⁻) > 0`.
pub fn doleans_inverse<T: Real>(
    f: &StepProcess<T>,
    path: &PoissonPath<T>,
    channel: usize,
    t: T,
) -> Result<C<T>> {
    path.check(channel, t)?;
    let n = path.count(channel, t);
    for &s in &path.jumps(channel)[..n] {
        let z = C::<T>::one() + f.left_limit(s);
        let real_tol = T::epsilon() * T::of(64.0) * z.norm();
        if !(z.re > T::zero()) || z.im.abs() > real_tol {
            return Err(Error::InadmissibleIntegrand {
                time: s.as_f64(),
                value: z.re.as_f64(),
            });
        }
    }
    // only the part of f up to t matters, later pieces may sit at −1
    let keep = f.knots.partition_point(|&k| k < t).max(1);
    let knots = f.knots[..keep].to_vec();
    let vals = &f.values[..keep];
    let drift = StepProcess::new(knots.clone(), vals.iter().map(|&v| v * v / (C::<T>::one() + v)).collect())?;
    let inv = StepProcess::new(knots, vals.iter().map(|&v| -v / (C::<T>::one() + v)).collect())?;
    Ok(drift.integral_to(t).exp() * doleans_exp(&inv, path, channel, t)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_jump_path() -> PoissonPath<f64> {
        PoissonPath::new(1.0, vec![vec![0.3, 0.9]], RateModel::UnitRate).unwrap()
    }

    fn c(x: f64) -> C<f64> {
        Complex::new(x, 0.0)
    }

    #[test]
    fn path_invariants_are_enforced() {
        assert!(PoissonPath::new(1.0, vec![vec![0.5, 0.5]], RateModel::UnitRate).is_err());
        assert!(PoissonPath::new(1.0, vec![vec![0.0]], RateModel::UnitRate).is_err());
        assert!(PoissonPath::new(1.0, vec![vec![1.5]], RateModel::UnitRate).is_err());
        assert!(PoissonPath::new(1.0, vec![vec![1.0]], RateModel::UnitRate).is_ok());
    }

    #[test]
    fn counting() {
        let p = two_jump_path();
        assert_eq!(p.count(0, 0.3), 1);
        assert_eq!(p.count(0, 0.29), 0);
        assert!((p.compensated(0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_integral_examples() {
        let p = two_jump_path();
        let one = StepProcess::real_constant(1.0);
        assert!((integrate_compensated(&one, &p, 0, 1.0).unwrap() - c(1.0)).norm() < 1e-15);
        let zero = StepProcess::real_constant(0.0);
        assert_eq!(integrate_compensated(&zero, &p, 0, 1.0).unwrap(), c(0.0));
        let k = Complex::new(0.7, -0.2);
        let kc = StepProcess::constant(k);
        let direct = k * p.compensated(0, 0.95);
        assert!((integrate_compensated(&kc, &p, 0, 0.95).unwrap() - direct).norm() < 1e-15);
    }

    #[test]
    fn doleans_examples() {
        let p = two_jump_path();
        let one = StepProcess::real_constant(1.0);
        let e = doleans_exp(&one, &p, 0, 1.0).unwrap();
        assert!((e.re - 4.0 * (-1.0f64).exp()).abs() < 1e-14);
        assert!((e.re - 1.47152).abs() < 1e-5);
        let zero = StepProcess::real_constant(0.0);
        assert_eq!(doleans_exp(&zero, &p, 0, 1.0).unwrap(), c(1.0));
        // no jumps before 0.25
        let cst = StepProcess::real_constant(0.8);
        let e = doleans_exp(&cst, &p, 0, 0.25).unwrap();
        assert!((e.re - (-0.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn product_examples() {
        let p = two_jump_path();
        let one = StepProcess::real_constant(1.0);
        let zero = StepProcess::real_constant(0.0);
        let f = StepProcess::from_real(vec![0.0, 0.5], vec![0.4, -0.3]).unwrap();
        let lhs = doleans_product(&f, &zero, &p, 0, 1.0).unwrap();
        assert!((lhs - doleans_exp(&f, &p, 0, 1.0).unwrap()).norm() < 1e-15);
        let sq = doleans_product(&one, &one, &p, 0, 1.0).unwrap();
        assert!((sq.re - 16.0 * (-2.0f64).exp()).abs() < 1e-13);
        assert!((sq.re - 2.1654).abs() < 1e-4);
    }

    #[test]
    fn inverse_examples() {
        let p = two_jump_path();
        let zero = StepProcess::real_constant(0.0);
        assert_eq!(doleans_inverse(&zero, &p, 0, 1.0).unwrap(), c(1.0));
        let one = StepProcess::real_constant(1.0);
        let inv = doleans_inverse(&one, &p, 0, 1.0).unwrap();
        assert!((inv.re - std::f64::consts::E / 4.0).abs() < 1e-14);
        let e = doleans_exp(&one, &p, 0, 1.0).unwrap();
        assert!(((inv * e).re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_rejects_annihilating_jump() {
        let p = two_jump_path();
        let f = StepProcess::from_real(vec![0.0, 0.5], vec![0.2, -1.0]).unwrap();
        assert!(doleans_inverse(&f, &p, 0, 0.5).is_ok());
        assert!(matches!(
            doleans_inverse(&f, &p, 0, 1.0),
            Err(Error::InadmissibleIntegrand { .. })
        ));
    }

    #[test]
    fn step_process_uses_left_limits() {
        let f = StepProcess::from_real(vec![0.0, 0.3], vec![2.0, 5.0]).unwrap();
        assert_eq!(f.left_limit(0.3), c(2.0));
        assert_eq!(f.left_limit(0.31), c(5.0));
        assert!((f.integral_to(0.5) - c(0.6 + 1.0)).norm() < 1e-15);
    }

    #[test]
    fn sampled_process_is_exact_for_quadratics() {
        // f(s) = 1 + s − 2s² on two segments [0, 0.4], (0.4, 1]
        let f = |s: f64| c(1.0 + s - 2.0 * s * s);
        let seg = |a: f64, b: f64| QuadSegment {
            t0: a,
            t1: b,
            samples: [f(a), f(0.5 * (a + b)), f(b)],
        };
        let sp = SampledProcess::new(vec![seg(0.0, 0.4), seg(0.4, 1.0)]).unwrap();
        let exact = |t: f64| t + t * t / 2.0 - 2.0 * t * t * t / 3.0;
        for t in [0.1, 0.4, 0.7, 1.0] {
            assert!((sp.integral_to(t).re - exact(t)).abs() < 1e-14);
            assert!((sp.left_limit(t) - f(t)).norm() < 1e-14);
        }
        assert!(SampledProcess::new(vec![seg(0.1, 0.4)]).is_err());
    }

    #[test]
    fn unit_poisson_is_reproducible() {
        let a: PoissonPath<f64> = sample_unit_poisson(3, 5.0, 11, 2).unwrap();
        let b: PoissonPath<f64> = sample_unit_poisson(3, 5.0, 11, 2).unwrap();
        assert_eq!(a, b);
        let c: PoissonPath<f64> = sample_unit_poisson(3, 5.0, 11, 3).unwrap();
        assert_ne!(a, c);
    }
}
