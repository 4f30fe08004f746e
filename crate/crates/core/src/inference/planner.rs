//! Recursive tree search over joint actions.
//!
//! The value of a joint action at belief `q` is its one-step expected free
//! energy plus, for every predicted observation with probability at least
//! the pruning threshold, that probability times the expected value of the
//! next step under the action distribution the agent would use there
//! (`softmax(-gamma * G')`). Parameters are held fixed inside the tree.

use super::efe::{log_preferences, risk, EfeTerms, TransitionWeights};
use super::state::{push_intensity, push_orientation, BeliefState, TransitionMatrices};
use crate::belief::{entropy, softmax_raw, Categorical, DirichletCounts};
use crate::error::{Error, Result};

/// Planning settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSettings {
    pub horizon: usize,
    pub gamma: f64,
    pub prune_threshold: f64,
    pub novelty_a: bool,
    pub novelty_b: bool,
}

/// Everything the tree search needs, precomputed from the current
/// parameters.
#[derive(Debug, Clone)]
pub struct PlanningContext {
    dims: [usize; 2],
    n_obs: usize,
    n_actions: [usize; 2],
    /// `[state][obs]`.
    lik: Vec<f64>,
    /// `1/a - 1/sum(a)`, `[state][obs]`; empty when novelty is off.
    novelty_a: Vec<f64>,
    log_c: Vec<f64>,
    trans: [TransitionMatrices; 2],
    novelty_b: Option<[TransitionWeights; 2]>,
    log_habits: Option<Vec<f64>>,
    /// Per-state features `[lik(o).., novelty_a weights(o).., ambiguity]`
    /// pulled back through each orientation action:
    /// `[ua][(i, a)][feature] = sum_a' B_a[a' | a, ua] * F[(i, a')][feature]`.
    pulled: Vec<f64>,
    /// Feature count rounded up to a multiple of four; the tail is zero.
    stride: usize,
    width: usize,
    settings: PlanSettings,
}

/// Output of [`PlanningContext::plan`].
#[derive(Debug, Clone)]
pub struct Plan {
    /// Distribution over joint actions, intensity-major.
    pub distribution: Categorical,
    /// Accumulated expected free energy per joint action.
    pub g_total: Vec<f64>,
    /// One-step terms per joint action.
    pub step_terms: Vec<EfeTerms>,
}

impl PlanningContext {
    pub fn new(
        a: &DirichletCounts,
        b: &[DirichletCounts; 2],
        c: &[f64],
        habits: Option<&Categorical>,
        settings: PlanSettings,
    ) -> Result<Self> {
        let dims = [b[0].shape().outcomes, b[1].shape().outcomes];
        let n_states = dims[0] * dims[1];
        let n_obs = a.shape().outcomes;
        if a.shape().n_conditions() != n_states {
            return Err(Error::shape(n_states, a.shape().n_conditions()));
        }
        if c.len() != n_obs {
            return Err(Error::shape(n_obs, c.len()));
        }
        if settings.horizon == 0 {
            return Err(Error::InvalidInput("planning horizon must be >= 1".into()));
        }
        let n_actions = [b[0].shape().conditions[1], b[1].shape().conditions[1]];
        if let Some(h) = habits {
            if h.len() != n_actions[0] * n_actions[1] {
                return Err(Error::shape(n_actions[0] * n_actions[1], h.len()));
            }
        }
        let expected = a.expectation();
        let mut lik = Vec::with_capacity(n_states * n_obs);
        let mut ambiguity = Vec::with_capacity(n_states);
        let mut novelty_a = Vec::new();
        for s in 0..n_states {
            let slice = expected.slice(s);
            lik.extend_from_slice(slice);
            ambiguity.push(entropy(slice));
            if settings.novelty_a {
                let counts = a.slice(s);
                let inv_sum = 1.0 / counts.iter().sum::<f64>();
                novelty_a.extend(counts.iter().map(|n| 1.0 / n - inv_sum));
            }
        }
        let trans = [
            TransitionMatrices::from_counts(&b[0]),
            TransitionMatrices::from_counts(&b[1]),
        ];
        let with_novelty = !novelty_a.is_empty();
        let width = if with_novelty { 2 * n_obs + 1 } else { n_obs + 1 };
        let stride = width.div_ceil(4) * 4;
        let feature = |s: usize, k: usize| -> f64 {
            if k < n_obs {
                lik[s * n_obs + k]
            } else if k + 1 == width {
                ambiguity[s]
            } else if k < width {
                novelty_a[s * n_obs + k - n_obs]
            } else {
                0.0
            }
        };
        let [ni, na] = dims;
        let mut pulled = vec![0.0; n_actions[1] * n_states * stride];
        for ua in 0..n_actions[1] {
            for i in 0..ni {
                for a in 0..na {
                    let base = ((ua * ni + i) * na + a) * stride;
                    for (a2, t) in trans[1].row(ua, a).iter().enumerate() {
                        if *t == 0.0 {
                            continue;
                        }
                        let s2 = i * na + a2;
                        for k in 0..stride {
                            pulled[base + k] += t * feature(s2, k);
                        }
                    }
                }
            }
        }
        Ok(Self {
            dims,
            n_obs,
            n_actions,
            lik,
            novelty_a,
            log_c: log_preferences(c),
            trans,
            novelty_b: settings
                .novelty_b
                .then(|| [TransitionWeights::new(&b[0]), TransitionWeights::new(&b[1])]),
            log_habits: habits.map(|h| h.probs().iter().map(|p| crate::belief::safe_ln(*p)).collect()),
            pulled,
            stride,
            width,
            settings,
        })
    }

    pub fn n_joint_actions(&self) -> usize {
        self.n_actions[0] * self.n_actions[1]
    }

    pub fn settings(&self) -> &PlanSettings {
        &self.settings
    }

    /// Action distribution at `belief`.
    pub fn plan(&self, belief: &BeliefState) -> Result<Plan> {
        if belief.dims() != self.dims {
            return Err(Error::shape(format!("{:?}", self.dims), format!("{:?}", belief.dims())));
        }
        let mut step_terms = Vec::with_capacity(self.n_joint_actions());
        let g_total = self.evaluate(belief.joint(), self.settings.horizon, Some(&mut step_terms));
        let neg_g: Vec<f64> = g_total.iter().map(|g| -g).collect();
        let probs = match &self.log_habits {
            None => softmax_raw(&neg_g, self.settings.gamma),
            Some(log_e) => {
                let logits: Vec<f64> = neg_g
                    .iter()
                    .zip(log_e)
                    .map(|(g, e)| self.settings.gamma * g + e)
                    .collect();
                softmax_raw(&logits, 1.0)
            }
        };
        Ok(Plan {
            distribution: Categorical::new(probs)?,
            g_total,
            step_terms,
        })
    }

    /// Per-factor transition novelty for every action of each factor.
    fn transition_bonus(&self, q: &[f64]) -> [Vec<f64>; 2] {
        let Some(weights) = &self.novelty_b else {
            return [vec![0.0; self.n_actions[0]], vec![0.0; self.n_actions[1]]];
        };
        let belief = BeliefState::from_joint_unchecked(self.dims, q.to_vec());
        let marginals = belief.marginals();
        [0, 1].map(|f| {
            (0..self.n_actions[f])
                .map(|u| weights[f].novelty(&self.trans[f], &marginals[f], u))
                .collect()
        })
    }

    fn evaluate(&self, q: &[f64], depth: usize, mut terms_out: Option<&mut Vec<EfeTerms>>) -> Vec<f64> {
        let [ni, na] = self.dims;
        let n_states = ni * na;
        let n_obs = self.n_obs;
        let bonus = self.transition_bonus(q);
        let mut g = Vec::with_capacity(self.n_joint_actions());
        let mut after_intensity = vec![0.0; n_states];
        let mut predicted = vec![0.0; n_states];
        let stride = self.stride;
        let with_novelty = !self.novelty_a.is_empty();
        let mut acc = vec![0.0; stride];
        let mut posterior = vec![0.0; n_states];
        for ui in 0..self.n_actions[0] {
            push_intensity(q, na, &self.trans[0], ui, &mut after_intensity);
            for ua in 0..self.n_actions[1] {
                let block = &self.pulled[ua * n_states * stride..(ua + 1) * n_states * stride];
                accumulate(&after_intensity, block, &mut acc);
                let qo = &acc[..n_obs];
                let ambiguity = acc[self.width - 1];
                let novelty_a = if with_novelty {
                    0.5 * qo.iter().zip(&acc[n_obs..2 * n_obs]).map(|(x, y)| x * y).sum::<f64>()
                } else {
                    0.0
                };
                let terms = EfeTerms {
                    risk: risk(qo, &self.log_c),
                    ambiguity,
                    novelty_a,
                    novelty_b: bonus[0][ui] + bonus[1][ua],
                };
                let mut value = terms.total();
                if let Some(out) = terms_out.as_deref_mut() {
                    out.push(terms);
                }

                if depth > 1 {
                    push_orientation(&after_intensity, ni, &self.trans[1], ua, &mut predicted);
                    for o in 0..n_obs {
                        let po = qo[o];
                        if po < self.settings.prune_threshold || po <= 0.0 {
                            continue;
                        }
                        for (s, post) in posterior.iter_mut().enumerate() {
                            *post = predicted[s] * self.lik[s * n_obs + o] / po;
                        }
                        let next = self.evaluate(&posterior, depth - 1, None);
                        value += po * expected_under_softmin(&next, self.settings.gamma);
                    }
                }
                g.push(value);
            }
        }
        g
    }
}

/// `acc = sum_s x[s] * block[s, ..]` with `block` row-major of row length
/// `acc.len()`.
fn accumulate(x: &[f64], block: &[f64], acc: &mut [f64]) {
    match acc.len() {
        4 => accumulate_fixed::<4>(x, block, acc),
        8 => accumulate_fixed::<8>(x, block, acc),
        12 => accumulate_fixed::<12>(x, block, acc),
        16 => accumulate_fixed::<16>(x, block, acc),
        w => {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for (xi, row) in x.iter().zip(block.chunks_exact(w)) {
                for (d, f) in acc.iter_mut().zip(row) {
                    *d += xi * f;
                }
            }
        }
    }
}

fn accumulate_fixed<const W: usize>(x: &[f64], block: &[f64], acc: &mut [f64]) {
    let mut sum = [0.0; W];
    for (xi, row) in x.iter().zip(block.chunks_exact(W)) {
        let row: &[f64; W] = row.try_into().expect("row has W entries");
        for k in 0..W {
            sum[k] += xi * row[k];
        }
    }
    acc.copy_from_slice(&sum);
}

/// `sum_u softmax(-gamma * G)_u * G_u`.
pub(crate) fn expected_under_softmin(g: &[f64], gamma: f64) -> f64 {
    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
    softmax_raw(&neg, gamma)
        .iter()
        .zip(g)
        .map(|(p, x)| p * x)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::TableShape;
    use crate::inference::efe::{expected_free_energy, transition_novelty};
    use crate::inference::state::predict_states;
    use crate::model::JointAction;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256StarStar;

    fn settings(horizon: usize) -> PlanSettings {
        PlanSettings {
            horizon,
            gamma: 4.0,
            prune_threshold: 1.0 / 16.0,
            novelty_a: true,
            novelty_b: true,
        }
    }

    fn random_counts(rng: &mut impl Rng, shape: TableShape) -> DirichletCounts {
        let counts = (0..shape.len()).map(|_| rng.random::<f64>() * 5.0 + 0.3).collect();
        DirichletCounts::new(shape, counts).unwrap()
    }

    #[test]
    fn step_terms_agree_with_standalone_efe() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(21);
        let a = random_counts(&mut rng, TableShape::new(5, &[4, 5]));
        let b = [
            random_counts(&mut rng, TableShape::new(4, &[4, 12])),
            random_counts(&mut rng, TableShape::new(5, &[5, 12])),
        ];
        let c = vec![-4.0, -3.0, -2.0, -1.0, 0.0];
        let ctx = PlanningContext::new(&a, &b, &c, None, settings(1)).unwrap();
        let raw: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let belief = BeliefState::from_joint([4, 5], crate::belief::normalize(&raw).unwrap().into_vec()).unwrap();
        let plan = ctx.plan(&belief).unwrap();
        for k in [0usize, 13, 77, 143] {
            let action = JointAction::new(k / 12, k % 12);
            let pred = predict_states(&belief, action, &b).unwrap();
            let mut t = expected_free_energy(&pred, &a, &c, true).unwrap();
            t.novelty_b = transition_novelty(&belief, action, &b);
            assert_abs_diff_eq!(plan.step_terms[k].total(), t.total(), epsilon = 1e-12);
            assert_abs_diff_eq!(plan.g_total[k], t.total(), epsilon = 1e-12);
        }
    }

    #[test]
    fn depth_one_is_exact_softmax() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(22);
        let a = random_counts(&mut rng, TableShape::new(5, &[4, 5]));
        let b = [
            random_counts(&mut rng, TableShape::new(4, &[4, 12])),
            random_counts(&mut rng, TableShape::new(5, &[5, 12])),
        ];
        let ctx = PlanningContext::new(&a, &b, &[0.0, 0.0, 0.0, 0.0, 1.0], None, settings(1)).unwrap();
        let belief = BeliefState::from_joint([4, 5], vec![0.05; 20]).unwrap();
        let plan = ctx.plan(&belief).unwrap();
        let neg: Vec<f64> = plan.step_terms.iter().map(|t| -t.total()).collect();
        let expected = crate::belief::softmax(&neg, 4.0).unwrap();
        assert_eq!(plan.distribution.probs(), expected.probs());
    }

    #[test]
    fn identical_actions_give_uniform_plan() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(23);
        let a = random_counts(&mut rng, TableShape::new(5, &[4, 5]));
        let same = |n: usize, rng: &mut Xoshiro256StarStar| {
            let col: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() + 0.5).collect();
            let mut counts = Vec::new();
            for prev in 0..n {
                for _u in 0..12 {
                    counts.extend_from_slice(&col[prev * n..(prev + 1) * n]);
                }
            }
            DirichletCounts::new(TableShape::new(n, &[n, 12]), counts).unwrap()
        };
        let b = [same(4, &mut rng), same(5, &mut rng)];
        let ctx = PlanningContext::new(&a, &b, &[-2.0, -1.0, 0.0, 1.0, 2.0], None, settings(2)).unwrap();
        let plan = ctx.plan(&BeliefState::from_joint([4, 5], vec![0.05; 20]).unwrap()).unwrap();
        for p in plan.distribution.probs() {
            assert_abs_diff_eq!(*p, 1.0 / 144.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_shift_leaves_distribution_unchanged() {
        let g: Vec<f64> = (0..144).map(|k| (k as f64 * 0.37).sin()).collect();
        let shifted: Vec<f64> = g.iter().map(|x| x + 123.456).collect();
        let p = softmax_raw(&g.iter().map(|x| -x).collect::<Vec<_>>(), 16.0);
        let q = softmax_raw(&shifted.iter().map(|x| -x).collect::<Vec<_>>(), 16.0);
        for (x, y) in p.iter().zip(&q) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn habits_bias_the_distribution() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(24);
        let a = random_counts(&mut rng, TableShape::new(5, &[4, 5]));
        let b = [
            random_counts(&mut rng, TableShape::new(4, &[4, 12])),
            random_counts(&mut rng, TableShape::new(5, &[5, 12])),
        ];
        let c = [0.0; 5];
        let mut e = vec![1e-3; 144];
        e[5] = 1.0;
        let e = crate::belief::normalize(&e).unwrap();
        let belief = BeliefState::from_joint([4, 5], vec![0.05; 20]).unwrap();
        let plain = PlanningContext::new(&a, &b, &c, None, settings(1)).unwrap().plan(&belief).unwrap();
        let biased = PlanningContext::new(&a, &b, &c, Some(&e), settings(1)).unwrap().plan(&belief).unwrap();
        assert!(biased.distribution.probs()[5] > plain.distribution.probs()[5]);
    }

    #[test]
    fn epistemic_drive_prefers_least_counted_action() {
        // one intensity level, two orientation levels, two actions per factor
        // both orientation actions have identical proportions, action 1 has
        // ten times less mass
        let a = DirichletCounts::new(TableShape::new(2, &[1, 2]), vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        let bi = DirichletCounts::new(TableShape::new(1, &[1, 1]), vec![1.0]).unwrap();
        let bo = DirichletCounts::new(
            TableShape::new(2, &[2, 2]),
            vec![
                6.0, 4.0, // prev 0, u 0
                0.6, 0.4, // prev 0, u 1
                4.0, 6.0, // prev 1, u 0
                0.4, 0.6, // prev 1, u 1
            ],
        )
        .unwrap();
        let ctx = PlanningContext::new(&a, &[bi, bo], &[0.0, 0.0], None, settings(1)).unwrap();
        let plan = ctx
            .plan(&BeliefState::from_joint([1, 2], vec![0.5, 0.5]).unwrap())
            .unwrap();
        let p = plan.distribution.probs();
        assert!(p[1] > p[0], "{p:?}");
    }
}
