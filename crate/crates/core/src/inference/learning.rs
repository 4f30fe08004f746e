//! Dirichlet learning by accumulating co-occurrence counts.

use super::state::BeliefState;
use crate::belief::DirichletCounts;
use crate::error::{Error, Result};
use crate::model::JointAction;

/// `a[obs, s] += eta * q(s)` for every joint state `s`.
pub fn update_a(a: &mut DirichletCounts, obs: usize, posterior: &BeliefState, eta: f64) -> Result<()> {
    let levels = a.shape().outcomes;
    if obs >= levels {
        return Err(Error::InvalidObservation { obs, levels });
    }
    let q = posterior.joint();
    if q.len() != a.shape().n_conditions() {
        return Err(Error::shape(a.shape().n_conditions(), q.len()));
    }
    for (s, qs) in q.iter().enumerate() {
        a.slice_mut(s)[obs] += eta * qs;
    }
    Ok(())
}

/// `b_f[next, prev, u_f] += eta * q_t(next) * q_{t-1}(prev)` per factor.
/// Only the taken action's slices change.
pub fn update_b(
    b: &mut [DirichletCounts; 2],
    action: JointAction,
    current: &BeliefState,
    previous: &BeliefState,
    eta: f64,
) -> Result<()> {
    let now = current.marginals();
    let before = previous.marginals();
    let actions = [action.intensity, action.orientation];
    for f in 0..2 {
        let n = b[f].shape().outcomes;
        let n_actions = b[f].shape().conditions[1];
        if now[f].len() != n || before[f].len() != n {
            return Err(Error::shape(n, now[f].len()));
        }
        if actions[f] >= n_actions {
            return Err(Error::InvalidInput(format!(
                "action {} out of range for factor {f}",
                actions[f]
            )));
        }
        for (prev, qp) in before[f].iter().enumerate() {
            let slice = b[f].slice_mut(prev * n_actions + actions[f]);
            for (next, qn) in now[f].iter().enumerate() {
                slice[next] += eta * qn * qp;
            }
        }
    }
    Ok(())
}
