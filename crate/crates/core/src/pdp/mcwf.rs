use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::model::ModelSpec;
use crate::rng::StreamId;
use crate::scalar::{Real, C};
use crate::state::StateVector;

use super::rates::select_channel;
use super::record::{Diagnostics, JumpEvent, Method, TrajectoryRecord};
use super::{initial_amplitudes, normalize_in_place, Frame};

#[derive(Clone, Copy, Debug)]
pub struct McwfOptions {
    pub dt: f64,
    pub warn_dp: f64,
    pub abort_dp: f64,
    pub stop_after_jumps: Option<usize>,
}

impl Default for McwfOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            warn_dp: 0.1,
            abort_dp: 0.5,
            stop_after_jumps: None,
        }
    }
}

/// Fixed-step Monte Carlo wave function loop.
///
/// Each step: `δp_α = dt ⟨Ψ|M_α†M_α|Ψ⟩`, `δp = Σ δp_α`; draw `ε`. If
/// `ε > δp` the state is the first-order propagation `(1 + K dt)Ψ`
/// divided by `√(1 − δp)`; otherwise a channel is chosen with `ε′` and the
/// state becomes `M_αΨ / √(δp_α/dt)`. Jumps are stamped at the step end.
///
/// The printed rescaling leaves an `O(dt²)` norm error; the state is then
/// renormalized exactly and the correction kept in the diagnostics.
pub fn simulate_mcwf<T: Real>(
    m: &ModelSpec<T>,
    psi0: &StateVector<T>,
    horizon: f64,
    opts: &McwfOptions,
    seed: u64,
    trajectory: u64,
) -> Result<TrajectoryRecord<T>> {
    run_mcwf(&Frame::normalized(m)?, psi0, horizon, opts, seed, trajectory)
}

/// [`simulate_mcwf`] on a prepared frame.
pub fn run_mcwf<T: Real>(
    frame: &Frame<T>,
    psi0: &StateVector<T>,
    horizon: f64,
    opts: &McwfOptions,
    seed: u64,
    trajectory: u64,
) -> Result<TrajectoryRecord<T>> {
    let grid = TimeGrid::new(horizon, opts.dt)?;
    let mut rng = StreamId::control(seed, trajectory).rng();
    let mut psi = initial_amplitudes(frame.dim, psi0)?;
    normalize_in_place(&mut psi)?;

    let mut times = vec![T::zero()];
    let mut states = vec![psi.clone()];
    let mut jumps = Vec::new();
    let mut diag = Diagnostics::default();
    let mut end_time = grid.time(grid.steps);

    for k in 0..grid.steps {
        let t_next = grid.time(k + 1);
        let h = t_next - grid.time(k);
        let rates = frame.rates(&psi);
        let dps: Vec<f64> = rates.iter().map(|r| h * r.as_f64()).collect();
        let dp: f64 = dps.iter().sum();
        diag.max_dp = diag.max_dp.max(dp);
        if dp > opts.abort_dp {
            return Err(Error::JumpProbabilityTooLarge {
                time: grid.time(k),
                dp,
                limit: opts.abort_dp,
            });
        }
        if dp > opts.warn_dp {
            diag.dp_warnings += 1;
        }
        let eps: f64 = rng.gen();
        if eps > dp {
            let kpsi = frame.prop.apply(&psi);
            let scale = T::of((1.0 - dp).sqrt().recip());
            let mut next: Vec<C<T>> = psi
                .iter()
                .zip(&kpsi)
                .map(|(&p, &d)| (p + d * T::of(h)) * scale)
                .collect();
            let n = normalize_in_place(&mut next)?;
            diag.max_renormalization = diag.max_renormalization.max((n - T::one()).abs().as_f64());
            psi = next;
        } else {
            let channel = select_channel(&rates, rng.gen::<f64>()).ok_or(Error::ForbiddenJump { channel: 0 })?;
            let pre = psi.clone();
            let mut post = frame.apply_op(channel, &pre);
            linalg::scale_vec(&mut post, T::of((dps[channel] / h).sqrt().recip()));
            let n = normalize_in_place(&mut post)?;
            diag.max_renormalization = diag.max_renormalization.max((n - T::one()).abs().as_f64());
            let pre_norm = rates[channel].sqrt();
            jumps.push(JumpEvent::new(T::of(t_next), channel, &frame.labels[channel], pre_norm, pre, post.clone()));
            psi = post;
        }
        times.push(T::of(t_next));
        states.push(psi.clone());
        diag.steps = k + 1;
        if opts.stop_after_jumps.is_some_and(|n| jumps.len() >= n) {
            end_time = t_next;
            break;
        }
    }

    Ok(TrajectoryRecord {
        method: Method::Mcwf,
        seed,
        trajectory,
        grid,
        labels: frame.labels.clone(),
        times,
        states,
        normalized: true,
        jumps,
        end_time: T::of(end_time),
        fine: None,
        diagnostics: diag,
    })
}
