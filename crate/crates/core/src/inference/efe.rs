//! Expected free energy of a one-step predicted belief.
//!
//! `G = risk + ambiguity - novelty_a - novelty_b`, where risk is the KL
//! divergence of predicted outcomes from the preferred outcome
//! distribution, ambiguity is the expected entropy of the likelihood, and the
//! novelty terms are the usual approximate Dirichlet information gains
//! `1/2 * sum q(o) q(s) (1/a[o,s] - 1/sum_o a[., s])` (and the analogue over
//! `(next, prev)` pairs for a transition).

use serde::{Deserialize, Serialize};

use super::state::{BeliefState, TransitionMatrices};
use crate::belief::{entropy, safe_ln, softmax_raw, DirichletCounts};
use crate::error::{Error, Result};
use crate::model::JointAction;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EfeTerms {
    pub risk: f64,
    pub ambiguity: f64,
    pub novelty_a: f64,
    pub novelty_b: f64,
}

impl EfeTerms {
    pub fn total(&self) -> f64 {
        self.risk + self.ambiguity - self.novelty_a - self.novelty_b
    }

    pub fn novelty(&self) -> f64 {
        self.novelty_a + self.novelty_b
    }
}

/// Log of the preferred outcome distribution, `ln softmax(c)`.
pub fn log_preferences(c: &[f64]) -> Vec<f64> {
    softmax_raw(c, 1.0).into_iter().map(safe_ln).collect()
}

/// Risk, ambiguity and (optionally) likelihood novelty of a predicted belief.
/// `novelty_b` is left at zero; see [`transition_novelty`].
pub fn expected_free_energy(
    predicted: &BeliefState,
    a: &DirichletCounts,
    c: &[f64],
    include_novelty: bool,
) -> Result<EfeTerms> {
    let n_obs = a.shape().outcomes;
    let q = predicted.joint();
    if a.shape().n_conditions() != q.len() {
        return Err(Error::shape(q.len(), a.shape().n_conditions()));
    }
    if c.len() != n_obs {
        return Err(Error::shape(n_obs, c.len()));
    }
    let lik = a.expectation();
    let log_c = log_preferences(c);
    let mut qo = vec![0.0; n_obs];
    let mut ambiguity = 0.0;
    for (s, qs) in q.iter().enumerate() {
        let slice = lik.slice(s);
        for (o, p) in slice.iter().enumerate() {
            qo[o] += qs * p;
        }
        ambiguity += qs * entropy(slice);
    }
    let risk = risk(&qo, &log_c);
    let novelty_a = if include_novelty {
        let mut total = 0.0;
        for (s, qs) in q.iter().enumerate() {
            let counts = a.slice(s);
            let sum: f64 = counts.iter().sum();
            for (o, n) in counts.iter().enumerate() {
                total += qo[o] * qs * (1.0 / n - 1.0 / sum);
            }
        }
        0.5 * total
    } else {
        0.0
    };
    Ok(EfeTerms {
        risk,
        ambiguity,
        novelty_a,
        novelty_b: 0.0,
    })
}

/// Information gain about the transition parameters of the taken action,
/// summed over factors, for a step from `prior`.
pub fn transition_novelty(prior: &BeliefState, action: JointAction, b: &[DirichletCounts; 2]) -> f64 {
    let marginals = prior.marginals();
    let actions = [action.intensity, action.orientation];
    (0..2)
        .map(|f| {
            let w = TransitionWeights::new(&b[f]);
            let t = TransitionMatrices::from_counts(&b[f]);
            w.novelty(&t, &marginals[f], actions[f])
        })
        .sum()
}

pub(crate) fn risk(qo: &[f64], log_c: &[f64]) -> f64 {
    qo.iter()
        .zip(log_c)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, lc)| q * (q.ln() - lc))
        .sum()
}

/// `1/b[next, prev, u] - 1/sum_next b[., prev, u]`, laid out `[u][prev][next]`.
#[derive(Debug, Clone)]
pub(crate) struct TransitionWeights {
    n: usize,
    data: Vec<f64>,
}

impl TransitionWeights {
    pub fn new(b: &DirichletCounts) -> Self {
        let n = b.shape().outcomes;
        let n_actions = b.shape().conditions[1];
        let mut data = vec![0.0; n_actions * n * n];
        for prev in 0..n {
            for u in 0..n_actions {
                let counts = b.slice(prev * n_actions + u);
                let inv_sum = 1.0 / counts.iter().sum::<f64>();
                let base = (u * n + prev) * n;
                for (k, c) in counts.iter().enumerate() {
                    data[base + k] = 1.0 / c - inv_sum;
                }
            }
        }
        Self { n, data }
    }

    /// `1/2 * sum_{next, prev} q'(next) q(prev) w[u][prev][next]` where
    /// `q' = B_u q`.
    pub fn novelty(&self, trans: &TransitionMatrices, marginal: &[f64], action: usize) -> f64 {
        let n = self.n;
        let mut next = vec![0.0; n];
        for (prev, qp) in marginal.iter().enumerate() {
            for (k, t) in trans.row(action, prev).iter().enumerate() {
                next[k] += qp * t;
            }
        }
        let mut total = 0.0;
        for (prev, qp) in marginal.iter().enumerate() {
            if *qp == 0.0 {
                continue;
            }
            let base = (action * n + prev) * n;
            let w = &self.data[base..base + n];
            total += qp * next.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
        }
        0.5 * total
    }
}
