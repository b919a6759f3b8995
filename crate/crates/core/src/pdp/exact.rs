use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::model::ModelSpec;
use crate::rng::StreamId;
use crate::scalar::{Real, C};
use crate::state::StateVector;

use super::propagate::FinePath;
use super::rates::{jump_image, select_channel};
use super::record::{Diagnostics, JumpEvent, Method, TrajectoryRecord};
use super::{initial_amplitudes, normalize_in_place, normalized_copy, Frame};

#[derive(Clone, Copy, Debug)]
pub struct ExactOptions {
    /// Integrator step between jumps; jump times are resolved inside steps.
    pub dt: f64,
    /// Jump-time tolerance relative to the horizon.
    pub time_tol: f64,
    pub stop_after_jumps: Option<usize>,
    pub record_fine: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            time_tol: 1e-9,
            stop_after_jumps: None,
            record_fine: false,
        }
    }
}

/// Waiting-time sampler: the unnormalized effective evolution gives the
/// survival probability `‖ψ⁰(t)‖²`; a jump happens when it falls below a
/// uniform threshold, and the channel is drawn with weights `‖M_αΨ(τ⁻)‖²`.
pub fn simulate_exact<T: Real>(
    m: &ModelSpec<T>,
    psi0: &StateVector<T>,
    horizon: f64,
    opts: &ExactOptions,
    seed: u64,
    trajectory: u64,
) -> Result<TrajectoryRecord<T>> {
    run_exact(&Frame::normalized(m)?, psi0, horizon, opts, seed, trajectory)
}

/// [`simulate_exact`] on a prepared frame.
pub fn run_exact<T: Real>(
    frame: &Frame<T>,
    psi0: &StateVector<T>,
    horizon: f64,
    opts: &ExactOptions,
    seed: u64,
    trajectory: u64,
) -> Result<TrajectoryRecord<T>> {
    let grid = TimeGrid::new(horizon, opts.dt)?;
    let mut rng = StreamId::control(seed, trajectory).rng();
    // 1 − U lies in (0, 1], so the threshold is finite
    let draw_threshold = |rng: &mut rand_chacha::ChaCha20Rng| (1.0 - rng.gen::<f64>()).ln();

    let mut psi = initial_amplitudes(frame.dim, psi0)?;
    normalize_in_place(&mut psi)?;
    let tol = opts.time_tol * horizon.max(f64::MIN_POSITIVE);
    let mut fine = opts.record_fine.then(FinePath::default);
    let mut times = vec![T::zero()];
    let mut states = vec![psi.clone()];
    let mut jumps = Vec::new();
    let mut diag = Diagnostics::default();
    let mut log_survival = 0.0f64;
    let mut threshold = draw_threshold(&mut rng);
    let mut end_time = grid.time(grid.steps);

    'steps: for k in 0..grid.steps {
        let t_end = grid.time(k + 1);
        let mut t = grid.time(k);
        while t_end > t {
            let h = T::of(t_end - t);
            let (mid, end) = frame.prop.half_steps(&psi, h);
            let ln_end = ln_norm_sqr(&end)?;
            if log_survival + ln_end > threshold {
                if let Some(f) = fine.as_mut() {
                    f.push(T::of(t), T::of(t_end), [psi.clone(), normalized_copy(&mid)?, normalized_copy(&end)?]);
                }
                psi = end;
                let n = normalize_in_place(&mut psi)?;
                diag.max_renormalization = diag.max_renormalization.max((n - T::one()).abs().as_f64());
                log_survival += ln_end;
                break;
            }

            // survival crosses the threshold inside (t, t_end]
            let excess = |tau: f64| -> Result<f64> {
                let (_, e) = frame.prop.half_steps(&psi, T::of(tau - t));
                Ok(log_survival + ln_norm_sqr(&e)? - threshold)
            };
            let tau = bracket_root(excess, t, t_end, log_survival - threshold, log_survival + ln_end - threshold, tol)?;
            let (mid, end) = frame.prop.half_steps(&psi, T::of(tau - t));
            let pre = normalized_copy(&end)?;
            if let Some(f) = fine.as_mut() {
                f.push(T::of(t), T::of(tau), [psi.clone(), normalized_copy(&mid)?, pre.clone()]);
            }
            let rates = frame.rates(&pre);
            let channel = select_channel(&rates, rng.gen::<f64>()).ok_or(Error::Bisection(tau))?;
            let (post, norm) = jump_image(&frame.ops[channel], &pre, channel)?;
            jumps.push(JumpEvent::new(T::of(tau), channel, &frame.labels[channel], norm, pre, post.clone()));
            psi = post;
            log_survival = 0.0;
            threshold = draw_threshold(&mut rng);
            t = tau;
            if opts.stop_after_jumps.is_some_and(|n| jumps.len() >= n) {
                end_time = tau;
                diag.steps = k + 1;
                break 'steps;
            }
        }
        times.push(T::of(t_end));
        states.push(psi.clone());
        diag.steps = k + 1;
    }

    Ok(TrajectoryRecord {
        method: Method::Exact,
        seed,
        trajectory,
        grid,
        labels: frame.labels.clone(),
        times,
        states,
        normalized: true,
        jumps,
        end_time: T::of(end_time),
        fine,
        diagnostics: diag,
    })
}

/// Smallest-bracket root of a decreasing `f` with `f(lo) > 0 ≥ f(hi)`, by
/// Illinois-weighted regula falsi with a bisection fallback. Returns the
/// right end of a bracket of width ≤ `tol`, where `f ≤ 0`.
fn bracket_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= tol {
            return Ok(hi);
        }
        let mut x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        // keep probes strictly inside so the bracket always shrinks
        let guard = 0.25 * tol;
        if !(x > lo + guard && x < hi - guard) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::Bisection(hi))
}

fn ln_norm_sqr<T: Real>(v: &[C<T>]) -> Result<f64> {
    if !linalg::vec_is_finite(v) {
        return Err(Error::NonFinite("effective evolution"));
    }
    Ok(linalg::norm_sqr(v).as_f64().ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn bracket_root_returns_right_end_within_tolerance() {
        for (root, curv) in [(0.3, 0.0), (0.999, 5.0), (1e-6, 40.0)] {
            let f = |x: f64| Ok((root - x) * (1.0 + curv * x * x));
            let mut calls = 0;
            let tau = bracket_root(
                |x| {
                    calls += 1;
                    f(x)
                },
                0.0,
                1.0,
                f(0.0).unwrap(),
                f(1.0).unwrap(),
                1e-9,
            )
            .unwrap();
            assert!(tau >= root && tau - root <= 1e-9, "{root}: {tau}");
            assert!(calls < 60, "{calls}");
        }
    }

    #[test]
    fn no_jump_ops_is_schrodinger() {
        let m = crate::model::ModelSpec::new(models::sigma_x::<f64>(), vec![], crate::model::Convention::RawL);
        let rec = simulate_exact(&m, &StateVector::basis(2, 0), 1.0, &ExactOptions::default(), 1, 0).unwrap();
        assert!(rec.jumps.is_empty());
        // e^{−iσx t}|0⟩ = cos t |0⟩ − i sin t |1⟩
        let s = rec.state_at(1.0).unwrap();
        assert!((s[0].re - 1f64.cos()).abs() < 1e-9);
        assert!((s[1].im + 1f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn reproducible_per_trajectory() {
        let m = models::driven_damped::<f64>(1.0, 1.0, 0.0);
        let psi = StateVector::basis(2, 1);
        let o = ExactOptions::default();
        let a = simulate_exact(&m, &psi, 2.0, &o, 5, 3).unwrap();
        let b = simulate_exact(&m, &psi, 2.0, &o, 5, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_exact(&m, &psi, 2.0, &o, 5, 4).unwrap();
        let times = |r: &TrajectoryRecord<f64>| r.jumps.iter().map(|e| e.time).collect::<Vec<_>>();
        assert_ne!(times(&a), times(&c));
    }

    #[test]
    fn stored_states_are_normalized_and_jumps_inside_horizon() {
        let m = models::driven_damped::<f64>(2.0, 1.5, 0.3);
        let rec = simulate_exact(&m, &StateVector::basis(2, 1), 3.0, &ExactOptions::default(), 2, 0).unwrap();
        assert!(!rec.jumps.is_empty());
        for s in &rec.states {
            assert!((linalg::norm(s) - 1.0).abs() < 1e-9);
        }
        for e in &rec.jumps {
            assert!(e.time > 0.0 && e.time <= 3.0);
            assert!((linalg::norm(&e.post_state) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stop_after_first_jump() {
        let m = models::constant_rate::<f64>(2, 3.0);
        let o = ExactOptions {
            stop_after_jumps: Some(1),
            ..Default::default()
        };
        let rec = simulate_exact(&m, &StateVector::basis(2, 0), 50.0, &o, 1, 1).unwrap();
        assert_eq!(rec.jumps.len(), 1);
        assert_eq!(rec.end_time, rec.jumps[0].time);
        assert!(*rec.times.last().unwrap() <= rec.end_time);
        assert_eq!(rec.states.len(), rec.times.len());
    }

    #[test]
    fn constant_rate_waiting_time_mean() {
        let m = models::constant_rate::<f64>(1, 2.0);
        let o = ExactOptions {
            stop_after_jumps: Some(1),
            ..Default::default()
        };
        let n = 2000;
        let mean: f64 = (0..n)
            .map(|i| {
                simulate_exact(&m, &StateVector::basis(1, 0), 40.0, &o, 8, i)
                    .unwrap()
                    .jumps[0]
                    .time
            })
            .sum::<f64>()
            / n as f64;
        // Exp(2): mean 0.5, sd 0.5
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "{mean}");
    }
}
