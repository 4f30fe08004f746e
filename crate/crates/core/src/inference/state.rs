//! Exact state inference over the joint (intensity x orientation) space.

use serde::{Deserialize, Serialize};

use crate::belief::{Categorical, ConditionalTensor, DirichletCounts, ExpectedLogRule};
use crate::error::{Error, Result};
use crate::model::JointAction;

const MARGINAL_TOL: f64 = 1e-9;

/// Beliefs over the two state factors, stored as the joint distribution
/// (intensity-major). Marginals are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    dims: [usize; 2],
    joint: Vec<f64>,
}

impl BeliefState {
    pub fn from_joint(dims: [usize; 2], joint: Vec<f64>) -> Result<Self> {
        if joint.len() != dims[0] * dims[1] {
            return Err(Error::shape(dims[0] * dims[1], joint.len()));
        }
        Categorical::new(joint.clone())?;
        Ok(Self { dims, joint })
    }

    /// Independent factors.
    pub fn from_marginals(intensity: &Categorical, orientation: &Categorical) -> Self {
        let mut joint = Vec::with_capacity(intensity.len() * orientation.len());
        for pi in intensity.probs() {
            for pa in orientation.probs() {
                joint.push(pi * pa);
            }
        }
        Self {
            dims: [intensity.len(), orientation.len()],
            joint,
        }
    }

    pub(crate) fn from_joint_unchecked(dims: [usize; 2], joint: Vec<f64>) -> Self {
        Self { dims, joint }
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn marginal(&self, factor: usize) -> Vec<f64> {
        let [ni, na] = self.dims;
        match factor {
            0 => (0..ni)
                .map(|i| self.joint[i * na..(i + 1) * na].iter().sum())
                .collect(),
            _ => (0..na)
                .map(|a| (0..ni).map(|i| self.joint[i * na + a]).sum())
                .collect(),
        }
    }

    pub fn marginals(&self) -> [Vec<f64>; 2] {
        [self.marginal(0), self.marginal(1)]
    }

    /// Checks that the stored joint is a distribution and its marginals are
    /// consistent with `expected`, when given.
    pub fn check(&self, expected: Option<&[Vec<f64>; 2]>) -> Result<()> {
        Categorical::new(self.joint.clone())?;
        if let Some(exp) = expected {
            for f in 0..2 {
                let m = self.marginal(f);
                for (x, y) in m.iter().zip(&exp[f]) {
                    if (x - y).abs() > MARGINAL_TOL {
                        return Err(Error::InvalidInput(format!(
                            "marginal {f} mismatch: {m:?} vs {:?}",
                            exp[f]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bayes rule with per-state likelihood weights. Returns the posterior and
/// `-ln` of the total unnormalized mass.
pub(crate) fn posterior_from_weights(prior: &BeliefState, weights: &[f64]) -> Result<(BeliefState, f64)> {
    let unnorm: Vec<f64> = prior
        .joint
        .iter()
        .zip(weights)
        .map(|(p, w)| p * w)
        .collect();
    let evidence: f64 = unnorm.iter().sum();
    if !(evidence > 0.0) {
        return Err(Error::DegenerateDistribution(
            "observation has zero probability under the prior".into(),
        ));
    }
    let joint = unnorm.into_iter().map(|x| x / evidence).collect();
    Ok((BeliefState::from_joint_unchecked(prior.dims, joint), -evidence.ln()))
}

/// Exact posterior after observing `obs` through the Dirichlet likelihood
/// `a` (`exp E[ln a]` per state). Without an observation the prior is
/// returned with zero free energy.
pub fn infer_states(
    prior: &BeliefState,
    obs: Option<usize>,
    a: &DirichletCounts,
    rule: ExpectedLogRule,
) -> Result<(BeliefState, f64)> {
    let Some(obs) = obs else {
        return Ok((prior.clone(), 0.0));
    };
    let levels = a.shape().outcomes;
    if obs >= levels {
        return Err(Error::InvalidObservation { obs, levels });
    }
    if a.shape().n_conditions() != prior.joint.len() {
        return Err(Error::shape(prior.joint.len(), a.shape().n_conditions()));
    }
    let elog = a.expected_log_with(rule);
    let weights: Vec<f64> = (0..prior.joint.len())
        .map(|s| elog[s * levels + obs].exp())
        .collect();
    posterior_from_weights(prior, &weights)
}

/// Exact posterior under an explicit likelihood table
/// `[outcome x intensity x orientation]`.
pub fn infer_with_likelihood(
    prior: &BeliefState,
    obs: Option<usize>,
    likelihood: &ConditionalTensor,
) -> Result<(BeliefState, f64)> {
    let Some(obs) = obs else {
        return Ok((prior.clone(), 0.0));
    };
    let levels = likelihood.shape().outcomes;
    if obs >= levels {
        return Err(Error::InvalidObservation { obs, levels });
    }
    if likelihood.shape().n_conditions() != prior.joint.len() {
        return Err(Error::shape(prior.joint.len(), likelihood.shape().n_conditions()));
    }
    let weights: Vec<f64> = (0..prior.joint.len())
        .map(|s| likelihood.slice(s)[obs])
        .collect();
    posterior_from_weights(prior, &weights)
}

/// Dense expected transition matrices, `[action][prev][next]` per factor.
#[derive(Debug, Clone)]
pub(crate) struct TransitionMatrices {
    pub n_levels: usize,
    pub data: Vec<f64>,
}

impl TransitionMatrices {
    pub fn from_counts(b: &DirichletCounts) -> Self {
        let n = b.shape().outcomes;
        let n_actions = b.shape().conditions[1];
        let e = b.expectation();
        let mut data = vec![0.0; n_actions * n * n];
        for prev in 0..n {
            for u in 0..n_actions {
                let slice = e.slice(prev * n_actions + u);
                let base = (u * n + prev) * n;
                data[base..base + n].copy_from_slice(slice);
            }
        }
        Self {
            n_levels: n,
            data,
        }
    }

    #[inline]
    pub fn row(&self, action: usize, prev: usize) -> &[f64] {
        let n = self.n_levels;
        let base = (action * n + prev) * n;
        &self.data[base..base + n]
    }
}

/// Pushes the intensity factor of a joint belief through `trans` for one
/// action.
pub(crate) fn push_intensity(joint: &[f64], na: usize, trans: &TransitionMatrices, action: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let ni = trans.n_levels;
    for i in 0..ni {
        let row = trans.row(action, i);
        let src = &joint[i * na..(i + 1) * na];
        for (i2, t) in row.iter().enumerate() {
            if *t == 0.0 {
                continue;
            }
            let dst = &mut out[i2 * na..(i2 + 1) * na];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
}

/// Pushes the orientation factor of a joint belief through `trans`.
pub(crate) fn push_orientation(joint: &[f64], ni: usize, trans: &TransitionMatrices, action: usize, out: &mut [f64]) {
    let na = trans.n_levels;
    out.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..ni {
        let src = &joint[i * na..(i + 1) * na];
        let dst = &mut out[i * na..(i + 1) * na];
        for (a, s) in src.iter().enumerate() {
            if *s == 0.0 {
                continue;
            }
            for (d, t) in dst.iter_mut().zip(trans.row(action, a)) {
                *d += s * t;
            }
        }
    }
}

/// Propagates a belief one step through the expected transitions of `b`
/// under `action`.
pub fn predict_states(belief: &BeliefState, action: JointAction, b: &[DirichletCounts; 2]) -> Result<BeliefState> {
    let [ni, na] = belief.dims;
    for (f, n) in [ni, na].iter().enumerate() {
        let shape = b[f].shape();
        if shape.outcomes != *n || shape.conditions.first() != Some(n) {
            return Err(Error::shape(format!("[{n} x {n} x k]"), shape));
        }
    }
    let actions = [action.intensity, action.orientation];
    for f in 0..2 {
        if actions[f] >= b[f].shape().conditions[1] {
            return Err(Error::InvalidInput(format!(
                "action {} out of range for factor {f}",
                actions[f]
            )));
        }
    }
    let ti = TransitionMatrices::from_counts(&b[0]);
    let ta = TransitionMatrices::from_counts(&b[1]);
    let mut tmp = vec![0.0; ni * na];
    let mut out = vec![0.0; ni * na];
    push_intensity(&belief.joint, na, &ti, action.intensity, &mut tmp);
    push_orientation(&tmp, ni, &ta, action.orientation, &mut out);
    Ok(BeliefState::from_joint_unchecked(belief.dims, out))
}
