use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{self, CMatrix};
use crate::model::ModelSpec;
use crate::poisson::{sample_unit_poisson, PoissonPath};
use crate::scalar::{Real, C};
use crate::state::StateVector;

use super::propagate::{FinePath, Propagator};
use super::record::{Diagnostics, JumpEvent, Method, TrajectoryRecord};
use super::{initial_amplitudes, normalize_in_place, normalized_copy, Frame};

#[derive(Clone, Copy, Debug)]
pub struct LinearOptions {
    pub dt: f64,
    pub record_fine: bool,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            record_fine: false,
        }
    }
}

/// Raw-frame operators of the linear equation, prepared once per model.
#[derive(Clone, Debug)]
pub struct LinearFrame<T> {
    dim: usize,
    prop: Propagator<T>,
    jump_ops: Vec<CMatrix<T>>,
    labels: Vec<String>,
}

impl<T: Real> LinearFrame<T> {
    /// Models stored as `shifted_M` are moved to the raw frame first.
    pub fn new(m: &ModelSpec<T>) -> Result<Self> {
        m.ensure_valid()?;
        let raw = m.to_raw()?;
        let id = CMatrix::identity(raw.dim);
        Ok(Self {
            dim: raw.dim,
            prop: Propagator::linear(&raw),
            jump_ops: raw.ops().map(|l| l + &id).collect(),
            labels: raw.labels().into_iter().map(str::to_owned).collect(),
        })
    }

    pub fn channels(&self) -> usize {
        self.jump_ops.len()
    }
}

/// Linear equation `dψ = (Σ L_α dÑ_α − (iH + ½ Σ L_α†L_α) dt) ψ` on freshly
/// sampled unit-rate paths. Returns the unnormalized record and the path.
pub fn simulate_linear<T: Real>(
    m: &ModelSpec<T>,
    psi0: &StateVector<T>,
    horizon: f64,
    opts: &LinearOptions,
    seed: u64,
    trajectory: u64,
) -> Result<(TrajectoryRecord<T>, PoissonPath<T>)> {
    run_linear(&LinearFrame::new(m)?, psi0, horizon, opts, seed, trajectory)
}

/// [`simulate_linear`] on a prepared frame.
pub fn run_linear<T: Real>(
    frame: &LinearFrame<T>,
    psi0: &StateVector<T>,
    horizon: f64,
    opts: &LinearOptions,
    seed: u64,
    trajectory: u64,
) -> Result<(TrajectoryRecord<T>, PoissonPath<T>)> {
    let path = sample_unit_poisson(frame.channels(), horizon, seed, trajectory)?;
    let psi = initial_amplitudes(frame.dim, psi0)?;
    let mut rec = drive(&frame.prop, &frame.jump_ops, &frame.labels, psi, &path, opts, Method::Linear)?;
    rec.seed = seed;
    rec.trajectory = trajectory;
    Ok((rec, path))
}

/// Linear equation on a given path. Jumps multiply by `I + L_α` exactly;
/// between jumps the drift `−(iH + ½ Σ L†L + Σ L)` is integrated by RK4.
pub fn simulate_linear_on_path<T: Real>(
    m: &ModelSpec<T>,
    psi0: &StateVector<T>,
    path: &PoissonPath<T>,
    opts: &LinearOptions,
) -> Result<TrajectoryRecord<T>> {
    let f = LinearFrame::new(m)?;
    let psi = initial_amplitudes(f.dim, psi0)?;
    drive(&f.prop, &f.jump_ops, &f.labels, psi, path, opts, Method::Linear)
}

/// Normalized evolution in the `M_α` frame with jumps forced at the times
/// and channels of `path`.
pub fn replay_normalized<T: Real>(
    m: &ModelSpec<T>,
    psi0: &StateVector<T>,
    path: &PoissonPath<T>,
    opts: &LinearOptions,
) -> Result<TrajectoryRecord<T>> {
    let frame = Frame::normalized(m)?;
    let mut psi = initial_amplitudes(frame.dim, psi0)?;
    normalize_in_place(&mut psi)?;
    drive(&frame.prop, &frame.ops, &frame.labels, psi, path, opts, Method::Replay)
}

fn drive<T: Real>(
    prop: &Propagator<T>,
    jump_ops: &[CMatrix<T>],
    labels: &[String],
    mut psi: Vec<C<T>>,
    path: &PoissonPath<T>,
    opts: &LinearOptions,
    method: Method,
) -> Result<TrajectoryRecord<T>> {
    if path.channels() != jump_ops.len() {
        return Err(Error::DimensionMismatch {
            expected: jump_ops.len(),
            found: path.channels(),
            context: "path channels",
        });
    }
    let normalize = method != Method::Linear;
    let horizon = path.horizon().as_f64();
    let grid = TimeGrid::new(horizon, opts.dt)?;
    let events = path.events();
    let mut next_event = 0;
    let mut fine = opts.record_fine.then(FinePath::default);
    let mut times = vec![T::zero()];
    let mut states = vec![psi.clone()];
    let mut jumps = Vec::new();
    let mut diag = Diagnostics::default();

    let advance = |psi: &mut Vec<C<T>>, t0: f64, t1: f64, fine: &mut Option<FinePath<T>>, diag: &mut Diagnostics| -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        let (mid, mut end) = prop.half_steps(psi, T::of(t1 - t0));
        if !linalg::vec_is_finite(&end) {
            return Err(Error::NonFinite("trajectory drift"));
        }
        if normalize {
            let n = normalize_in_place(&mut end)?;
            diag.max_renormalization = diag.max_renormalization.max((n - T::one()).abs().as_f64());
        }
        if let Some(f) = fine.as_mut() {
            let mid = if normalize { normalized_copy(&mid)? } else { mid };
            f.push(T::of(t0), T::of(t1), [psi.clone(), mid, end.clone()]);
        }
        *psi = end;
        Ok(())
    };

    for k in 0..grid.steps {
        let t_end = grid.time(k + 1);
        let mut t = grid.time(k);
        while next_event < events.len() && events[next_event].0.as_f64() <= t_end {
            let (tau, channel) = events[next_event];
            next_event += 1;
            advance(&mut psi, t, tau.as_f64(), &mut fine, &mut diag)?;
            t = t.max(tau.as_f64());
            let pre = psi.clone();
            let mut post = jump_ops[channel].mul_vec(&pre);
            let pre_norm = linalg::norm(&post);
            if normalize {
                if !(pre_norm > T::zero()) {
                    return Err(Error::ForbiddenJump { channel });
                }
                linalg::scale_vec(&mut post, pre_norm.recip());
            }
            if !linalg::vec_is_finite(&post) {
                return Err(Error::NonFinite("jump image"));
            }
            jumps.push(JumpEvent::new(tau, channel, &labels[channel], pre_norm, pre, post.clone()));
            psi = post;
        }
        advance(&mut psi, t, t_end, &mut fine, &mut diag)?;
        times.push(T::of(t_end));
        states.push(psi.clone());
        diag.steps = k + 1;
    }

    Ok(TrajectoryRecord {
        method,
        seed: 0,
        trajectory: 0,
        grid,
        labels: labels.to_vec(),
        times,
        states,
        normalized: normalize,
        jumps,
        end_time: T::of(horizon),
        fine,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Convention;
    use crate::models;
    use crate::poisson::RateModel;
    use rand::SeedableRng;

    #[test]
    fn zero_jump_ops_is_unitary() {
        let m = ModelSpec::new(
            models::sigma_x::<f64>(),
            vec![("z".into(), CMatrix::zeros(2))],
            Convention::RawL,
        );
        let (rec, path) = simulate_linear(&m, &StateVector::basis(2, 0), 2.0, &LinearOptions::default(), 3, 0).unwrap();
        assert_eq!(rec.jumps.len(), path.total_jumps());
        for (t, s) in rec.times.iter().zip(&rec.states) {
            assert!((linalg::norm(s) - 1.0).abs() < 1e-10);
            assert!((s[0].re - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn jump_factor_is_identity_plus_l() {
        let m = models::amplitude_damping::<f64>(1.0);
        let path = PoissonPath::new(1.0, vec![vec![0.5]], RateModel::UnitRate).unwrap();
        let rec = simulate_linear_on_path(&m, &StateVector::basis(2, 1), &path, &LinearOptions::default()).unwrap();
        let e = &rec.jumps[0];
        // the excited amplitude only feels −½L†L
        assert!((e.pre_state[1].re - (-0.25f64).exp()).abs() < 1e-9);
        assert!((e.post_state[0] - (e.pre_state[0] + e.pre_state[1])).norm() < 1e-15);
        assert_eq!(e.post_state[1], e.pre_state[1]);
    }

    #[test]
    fn normalized_replay_matches_normalized_linear_path() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for i in 0..10 {
            let m = models::random_model::<f64, _>(&mut rng, 3, 2, 1.0, 0.7);
            let psi = models::random_state::<f64, _>(&mut rng, 3);
            let o = LinearOptions { dt: 1e-3, record_fine: false };
            let (lin, path) = simulate_linear(&m, &psi, 2.0, &o, 17, i).unwrap();
            let rep = replay_normalized(&m, &psi, &path, &o).unwrap();
            for (a, b) in lin.states.iter().zip(&rep.states) {
                let a = normalized_copy(a).unwrap();
                assert!(linalg::max_abs_diff(&a, b) < 1e-6);
            }
        }
    }
}
