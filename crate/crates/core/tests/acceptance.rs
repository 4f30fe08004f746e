//! Acceptance criteria P1 to P9.
//!
//! Runs as a plain binary (no libtest harness) so that one PASS / FAIL line
//! per criterion is always printed. Exits non-zero if any criterion fails.
//!
//! Positional arguments select criteria by name prefix, e.g.
//! `cargo test --test acceptance -- P5 P9`.
//!
//! `NFLOOP_ACCEPT_FULL=1` additionally runs the one-hundred-trial experiment
//! at planning horizon 2 and reports it without gating.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nfloop::belief::{digamma, normalize, DirichletCounts, ExpectedLogRule, TableShape};
use nfloop::env::{emit, step_process, Phase, TrueState};
use nfloop::harness::{run_experiment, run_grid, BatchOutcome, ExperimentConfig, RunRecord};
use nfloop::inference::{
    expected_free_energy, infer_states, infer_with_likelihood, predict_states, select_action, transition_novelty,
    Agent, BeliefState, PlanSettings, PlanningContext,
};
use nfloop::model::{AgentConfig, AgentModel, Factor, JointAction, ProcessConfig, ProcessModel};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
    normalize(&raw).unwrap().into_vec()
}

/// Bayes' rule by enumeration: returns (posterior, -ln evidence).
fn brute_posterior(prior: &[f64], weights: &[f64]) -> (Vec<f64>, f64) {
    let joint: Vec<f64> = prior.iter().zip(weights).map(|(p, w)| p * w).collect();
    let evidence: f64 = joint.iter().sum();
    (joint.iter().map(|x| x / evidence).collect(), -evidence.ln())
}

fn p1_inference_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let dims = [4, 5];
    let mut worst_post = 0.0f64;
    let mut worst_vfe = 0.0f64;
    for k in 0..1000 {
        let prior = BeliefState::from_joint(dims, random_simplex(&mut r, 20)).unwrap();
        let obs = r.random_range(0..5);
        let (weights, (post, vfe)) = if k % 2 == 0 {
            let mut lik = Vec::with_capacity(100);
            for _ in 0..20 {
                lik.extend(random_simplex(&mut r, 5));
            }
            let tensor = nfloop::belief::ConditionalTensor::new(TableShape::new(5, &[4, 5]), lik.clone()).unwrap();
            let w: Vec<f64> = (0..20).map(|s| lik[s * 5 + obs]).collect();
            (w, infer_with_likelihood(&prior, Some(obs), &tensor).unwrap())
        } else {
            let counts: Vec<f64> = (0..100).map(|_| r.random::<f64>() * 20.0 + 0.05).collect();
            let a = DirichletCounts::new(TableShape::new(5, &[4, 5]), counts.clone()).unwrap();
            let w: Vec<f64> = (0..20)
                .map(|s| {
                    let col = &counts[s * 5..(s + 1) * 5];
                    (digamma(col[obs]) - digamma(col.iter().sum())).exp()
                })
                .collect();
            (w, infer_states(&prior, Some(obs), &a, ExpectedLogRule::Digamma).unwrap())
        };
        let (expected, expected_vfe) = brute_posterior(prior.joint(), &weights);
        for (x, y) in post.joint().iter().zip(&expected) {
            worst_post = worst_post.max((x - y).abs());
        }
        worst_vfe = worst_vfe.max((vfe - expected_vfe).abs());
    }
    let elapsed = start.elapsed();
    ensure!(worst_post <= 1e-10, "posterior max-abs error {worst_post:e}");
    ensure!(worst_vfe <= 1e-9, "vfe max-abs error {worst_vfe:e}");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "1000 instances, posterior err {worst_post:.1e}, vfe err {worst_vfe:.1e}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn p2_stochasticity() -> Outcome {
    let mut checked = 0usize;
    let mut checked_interior = 0usize;
    let mut worst = 0.0f64;
    let mut configs = Vec::new();
    for sigma in [0.5, 1.0, 1.5] {
        configs.push(ProcessConfig {
            sigma_proc: sigma,
            ..ProcessConfig::default()
        });
    }
    for cfg in configs {
        let process = ProcessModel::standard(cfg).unwrap();
        for t in [&process.asi, &process.lerd, &process.transitions[0], &process.transitions[1]] {
            worst = worst.max(t.max_slice_error());
            checked += t.shape().n_conditions();
        }
        let neutral: Vec<usize> = (0..process.actions.per_factor())
            .filter(|u| *u != process.actions.up() && *u != process.actions.down())
            .collect();
        ensure!(neutral.len() == 10, "expected 10 neutral actions, found {}", neutral.len());
        for f in Factor::ALL {
            let n = process.space.n_levels(f);
            for u in 0..process.actions.per_factor() {
                for prev in 0..n {
                    let row = process.transition_slice(f, prev, u);
                    for (next, p) in row.iter().enumerate() {
                        if next.abs_diff(prev) > 1 {
                            ensure!(*p == 0.0, "{f:?} u={u} {prev}->{next} has mass {p}");
                        }
                    }
                }
            }
            for prev in 0..n {
                let first = process.transition_slice(f, prev, neutral[0]);
                for &u in &neutral[1..] {
                    let other = process.transition_slice(f, prev, u);
                    ensure!(
                        first.iter().zip(other).all(|(x, y)| x.to_bits() == y.to_bits()),
                        "{f:?} neutral slice {u} differs at prev {prev}"
                    );
                }
            }
            // interior invariability: the probability of each shift is the
            // same at every interior level; for neutral actions the shift is
            // measured toward the resting level
            let rest = process.space.rest(f) as i64;
            for u in 0..process.actions.per_factor() {
                let is_neutral = neutral.contains(&u);
                for delta in [-1i64, 0, 1] {
                    let mut reference: Option<f64> = None;
                    for prev in 1..n as i64 - 1 {
                        let dir = if is_neutral { (rest - prev).signum() } else { 1 };
                        if dir == 0 {
                            continue;
                        }
                        let next = prev + dir * delta;
                        let p = process.transition_slice(f, prev as usize, u)[next as usize];
                        match reference {
                            None => reference = Some(p),
                            Some(r0) => ensure!(
                                r0.to_bits() == p.to_bits(),
                                "{f:?} u={u} shift {delta} differs at interior level {prev}"
                            ),
                        }
                        checked_interior += 1;
                    }
                }
            }
        }
        for b_pre in [(0.0, 0.0), (0.1, 0.0), (1.0, 1.0), (2.0, 0.5)] {
            let mut agent_cfg = AgentConfig::default();
            agent_cfg.prior.b_pre_intensity = b_pre.0;
            agent_cfg.prior.b_pre_orientation = b_pre.1;
            let model = AgentModel::build(&process, &agent_cfg).unwrap();
            let tensors = [model.a.expectation(), model.b[0].expectation(), model.b[1].expectation()];
            for t in &tensors {
                worst = worst.max(t.max_slice_error());
                checked += t.shape().n_conditions();
            }
        }
    }
    ensure!(worst <= 1e-9, "slice sum error {worst:e}");
    Ok(format!(
        "{checked} slices, max sum error {worst:.1e}; {checked_interior} interior shifts invariant"
    ))
}

fn p3_count_conservation() -> Outcome {
    let process = ProcessModel::standard(ProcessConfig::default()).unwrap();
    let cfg = AgentConfig {
        horizon: 1,
        ..AgentConfig::default()
    };
    let mut agent = Agent::new(AgentModel::build(&process, &cfg).unwrap());
    let mut r = rng(303);
    let mut state = process.initial;
    let mut steps = 0;
    for _trial in 0..3 {
        agent.begin_phase();
        for _ in 0..40 {
            let plan = agent.plan().unwrap();
            let action = select_action(&plan.distribution, process.actions.per_factor(), &mut r);
            state = step_process(state, action, &process, &mut r);
            let out = emit(state, &process, Phase::MotorImagery, &mut r);
            let a_before = agent.model().a.total();
            let b_before = agent.model().b.clone();
            agent.observe(action, out.feedback).unwrap();
            let a_gain = agent.model().a.total() - a_before;
            ensure!((a_gain - 1.0).abs() <= 1e-12, "a grew by {a_gain}");
            for f in Factor::ALL {
                let fi = f.index();
                let n = process.space.n_levels(f);
                let n_u = process.actions.per_factor();
                let after = &agent.model().b[fi];
                let mut gain = 0.0;
                for prev in 0..n {
                    for u in 0..n_u {
                        let cond = prev * n_u + u;
                        let old = b_before[fi].slice(cond);
                        let new = after.slice(cond);
                        if u == action.get(f) {
                            gain += new.iter().sum::<f64>() - old.iter().sum::<f64>();
                        } else {
                            ensure!(
                                old.iter().zip(new).all(|(x, y)| x.to_bits() == y.to_bits()),
                                "{f:?} untaken action {u} changed"
                            );
                        }
                    }
                }
                ensure!((gain - 1.0).abs() <= 1e-12, "{f:?} b grew by {gain}");
            }
            steps += 1;
        }
    }
    Ok(format!("{steps} MI steps, a and b each gain exactly 1"))
}

fn p4_decay() -> Outcome {
    let process = ProcessModel::standard(ProcessConfig::default()).unwrap();
    let neutral = process.actions.rest_action();
    let action = JointAction::new(neutral, neutral);
    let high = process.space.n_intensity() - 1;
    let rest = (process.space.rest(Factor::Intensity), process.space.rest(Factor::Orientation));
    let start = TrueState::new(high, 0);
    let steps = 100;
    // exact distribution of the product chain
    let mut dist = [vec![0.0; 4], vec![0.0; 5]];
    dist[0][start.intensity] = 1.0;
    dist[1][start.orientation] = 1.0;
    for _ in 0..steps {
        for f in Factor::ALL {
            let fi = f.index();
            let mut next = vec![0.0; dist[fi].len()];
            for (prev, p) in dist[fi].iter().enumerate() {
                for (k, t) in process.transition_slice(f, prev, neutral).iter().enumerate() {
                    next[k] += p * t;
                }
            }
            dist[fi] = next;
        }
    }
    let analytic = dist[0][rest.0] * dist[1][rest.1];
    let n = 10_000;
    let mut r = rng(404);
    let mut hits = 0;
    for _ in 0..n {
        let mut s = start;
        for _ in 0..steps {
            s = step_process(s, action, &process, &mut r);
        }
        hits += usize::from((s.intensity, s.orientation) == rest);
    }
    let mc = hits as f64 / n as f64;
    let sd = (analytic * (1.0 - analytic) / n as f64).sqrt().max(1.0 / n as f64);
    ensure!(mc >= 0.99, "Monte-Carlo resting mass {mc}");
    ensure!((mc - analytic).abs() <= 5.0 * sd, "Monte-Carlo {mc} vs analytic {analytic} (sd {sd:e})");
    Ok(format!("resting mass {mc:.4} (analytic {analytic:.6}) after {steps} steps"))
}

/// Unpruned expected free energy of every first action, by direct recursion
/// over public single-step primitives.
fn tree_oracle(
    belief: &BeliefState,
    a: &DirichletCounts,
    b: &[DirichletCounts; 2],
    c: &[f64],
    gamma: f64,
    depth: usize,
) -> Vec<f64> {
    let n_u = [b[0].shape().conditions[1], b[1].shape().conditions[1]];
    let lik = a.expectation();
    let n_obs = a.shape().outcomes;
    let mut out = Vec::new();
    for ui in 0..n_u[0] {
        for ua in 0..n_u[1] {
            let action = JointAction::new(ui, ua);
            let pred = predict_states(belief, action, b).unwrap();
            let mut terms = expected_free_energy(&pred, a, c, true).unwrap();
            terms.novelty_b = transition_novelty(belief, action, b);
            let mut g = terms.total();
            if depth > 1 {
                for o in 0..n_obs {
                    let weights: Vec<f64> = (0..pred.joint().len()).map(|s| lik.slice(s)[o]).collect();
                    let qo: f64 = pred.joint().iter().zip(&weights).map(|(p, w)| p * w).sum();
                    let post: Vec<f64> = pred.joint().iter().zip(&weights).map(|(p, w)| p * w / qo).collect();
                    let post = BeliefState::from_joint(belief.dims(), post).unwrap();
                    let next = tree_oracle(&post, a, b, c, gamma, depth - 1);
                    let m = next.iter().map(|x| -gamma * x).fold(f64::NEG_INFINITY, f64::max);
                    let w: Vec<f64> = next.iter().map(|x| (-gamma * x - m).exp()).collect();
                    let z: f64 = w.iter().sum();
                    g += qo * next.iter().zip(&w).map(|(x, wi)| x * wi / z).sum::<f64>();
                }
            }
            out.push(g);
        }
    }
    out
}

fn p5_planner_oracle() -> Outcome {
    let mut r = rng(505);
    let mut worst = 0.0f64;
    let cases = 20;
    for _ in 0..cases {
        // two observations with likelihoods in [0.25, 0.75]: no branch falls
        // below the pruning threshold
        let mut counts = Vec::new();
        for _ in 0..4 {
            let p = 0.25 + 0.5 * r.random::<f64>();
            let total = 2.0 + 10.0 * r.random::<f64>();
            counts.extend([p * total, (1.0 - p) * total]);
        }
        let a = DirichletCounts::new(TableShape::new(2, &[2, 2]), counts).unwrap();
        let b = [0, 1].map(|_| {
            let c: Vec<f64> = (0..2 * 2 * 3).map(|_| 0.2 + 3.0 * r.random::<f64>()).collect();
            DirichletCounts::new(TableShape::new(2, &[2, 3]), c).unwrap()
        });
        let c = vec![-r.random::<f64>() * 3.0, 0.0];
        let gamma = 1.0 + 8.0 * r.random::<f64>();
        let belief = BeliefState::from_joint([2, 2], random_simplex(&mut r, 4)).unwrap();
        let settings = |horizon| PlanSettings {
            horizon,
            gamma,
            prune_threshold: 1.0 / 16.0,
            novelty_a: true,
            novelty_b: true,
        };
        let ctx = PlanningContext::new(&a, &b, &c, None, settings(2)).unwrap();
        let plan = ctx.plan(&belief).unwrap();
        let oracle = tree_oracle(&belief, &a, &b, &c, gamma, 2);
        for (x, y) in plan.g_total.iter().zip(&oracle) {
            worst = worst.max((x - y).abs());
        }
        let ctx1 = PlanningContext::new(&a, &b, &c, None, settings(1)).unwrap();
        let plan1 = ctx1.plan(&belief).unwrap();
        let neg: Vec<f64> = plan1.g_total.iter().map(|g| -g).collect();
        let expected = nfloop::belief::softmax(&neg, gamma).unwrap();
        ensure!(plan1.distribution.probs() == expected.probs(), "H=1 plan differs from softmax(-gamma G)");
    }
    ensure!(worst <= 1e-9, "H=2 max-abs error {worst:e}");
    Ok(format!("{cases} miniature models, H=2 err {worst:.1e}, H=1 exact"))
}

fn orientation_tail(rec: &RunRecord, k: usize) -> f64 {
    rec.tail_mean(k, |t| t.mean_orientation_idx)
}

fn timed_experiment(cfg: &ExperimentConfig) -> (BatchOutcome, Duration) {
    let start = Instant::now();
    let out = run_experiment(cfg, None).unwrap();
    (out, start.elapsed())
}

fn p6_familiar() -> Outcome {
    let cfg = ExperimentConfig::familiar();
    let (out, elapsed) = timed_experiment(&cfg);
    ensure!(out.failures.is_empty(), "{} runs failed", out.failures.len());
    ensure!(out.records.len() == 10, "{} runs", out.records.len());
    ensure!(out.records.iter().all(|r| r.trials.len() == 10), "trial count");
    let lateralized = out.records.iter().filter(|r| orientation_tail(r, 3) >= 2.5).count();
    let first_i: f64 = out.records.iter().map(|r| r.trials[0].mean_intensity_idx).sum::<f64>() / 10.0;
    let last_i: f64 = out.records.iter().map(|r| r.tail_mean(3, |t| t.mean_intensity_idx)).sum::<f64>() / 10.0;
    ensure!(lateralized >= 8, "{lateralized}/10 agents lateralized");
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "{lateralized}/10 agents with last-3 orientation >= 2.5; intensity {first_i:.2} (trial 1) -> {last_i:.2} (last 3); {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn naive_summary(out: &BatchOutcome) -> (f64, usize) {
    let mut diff = 0.0;
    let mut improved = 0;
    for r in &out.records {
        let first = r.head_mean(10, |t| t.mean_orientation_idx);
        let last = orientation_tail(r, 10);
        diff += last - first;
        improved += usize::from(last > first);
    }
    (diff / out.records.len() as f64, improved)
}

fn p7_naive(horizon: usize, budget: Duration) -> Outcome {
    let mut cfg = ExperimentConfig::naive();
    cfg.agent.horizon = horizon;
    let (out, elapsed) = timed_experiment(&cfg);
    ensure!(out.failures.is_empty(), "{} runs failed", out.failures.len());
    ensure!(out.records.len() == 10 && out.records.iter().all(|r| r.trials.len() == 100), "run shape");
    let (gain, improved) = naive_summary(&out);
    let detail = format!(
        "H={horizon}: orientation gain {gain:.2}, {improved}/10 improved, {:.1} s",
        elapsed.as_secs_f64()
    );
    ensure!(gain >= 0.5, "{detail}");
    ensure!(improved >= 7, "{detail}");
    ensure!(elapsed < budget, "{detail}");
    Ok(detail)
}

fn p8_grid() -> Outcome {
    let cfg = ExperimentConfig::grid_reduced();
    let start = Instant::now();
    let g = run_grid(&cfg, None).unwrap();
    let elapsed = start.elapsed();
    ensure!(g.failed_runs() == 0, "{} runs failed", g.failed_runs());
    ensure!(g.completed.iter().flatten().all(|&n| n == 10), "incomplete cells");
    ensure!(g.before.len() == 5 && g.after.iter().all(|r| r.len() == 5), "matrix shape");
    let (row, col) = (4, 0);
    ensure!(g.intensity_axis[row] == 2.0 && g.orientation_axis[col] == 0.0, "corner axes");
    let (before, after) = (g.before[row][col], g.after[row][col]);
    ensure!(after > before, "corner after {after:.3} <= before {before:.3}");
    ensure!(elapsed < Duration::from_secs(1800), "took {elapsed:?}");
    Ok(format!(
        "25 cells complete; corner (2, 0) {before:.3} -> {after:.3}; {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_nfloop"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

fn p9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("small.toml");
    std::fs::write(
        &cfg_path,
        "[agent]\nhorizon = 1\n[protocol]\nn_trials = 4\n[experiment]\nname = \"det\"\nn_agents = 3\nwindow = 2\n\
         [experiment.grid.intensity]\nmin = 0.0\nmax = 2.0\nsteps = 3\n\
         [experiment.grid.orientation]\nmin = 0.0\nmax = 2.0\nsteps = 2\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = cfg_path.to_str().unwrap();
    let out = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    cli(&["simulate", "--config", cfg, "--seed", "7", "--out", &s(&out("sim1"))])?;
    cli(&["simulate", "--config", cfg, "--seed", "7", "--out", &s(&out("sim2"))])?;
    let a = read(&out("sim1").join("trials.csv"));
    ensure!(!a.is_empty(), "simulate wrote no trials.csv");
    ensure!(a == read(&out("sim2").join("trials.csv")), "simulate reruns differ");
    cli(&["grid", "--config", cfg, "--seed", "7", "--jobs", "1", "--out", &s(&out("g1"))])?;
    cli(&["grid", "--config", cfg, "--seed", "7", "--jobs", "8", "--out", &s(&out("g8"))])?;
    for f in ["trials.csv", "grid_before.csv", "grid_after.csv"] {
        let x = read(&out("g1").join(f));
        ensure!(!x.is_empty(), "grid wrote no {f}");
        ensure!(x == read(&out("g8").join(f)), "{f} differs between --jobs 1 and --jobs 8");
    }
    Ok("simulate reruns and grid --jobs 1 / --jobs 8 byte-identical".into())
}

fn main() {
    let full = std::env::var("NFLOOP_ACCEPT_FULL").is_ok_and(|v| v == "1");
    let mut criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("P1 inference oracle", Box::new(p1_inference_oracle)),
        ("P2 stochasticity", Box::new(p2_stochasticity)),
        ("P3 count conservation", Box::new(p3_count_conservation)),
        ("P4 decay fixed point", Box::new(p4_decay)),
        ("P5 planner oracle", Box::new(p5_planner_oracle)),
        ("P6 familiar agents", Box::new(p6_familiar)),
        ("P7 naive agents (H=1)", Box::new(|| p7_naive(1, Duration::from_secs(300)))),
        ("P8 prior grid 5x5", Box::new(p8_grid)),
        ("P9 determinism", Box::new(p9_determinism)),
    ];
    if full {
        criteria.push(("P7 naive agents (H=2)", Box::new(|| p7_naive(2, Duration::from_secs(1800)))));
    }
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() {
        criteria.retain(|(name, _)| filters.iter().any(|f| name.starts_with(f.as_str())));
    }
    let mut failed = 0;
    for (name, check) in &criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if !full && filters.is_empty() {
        println!("SKIP P7 naive agents (H=2): set NFLOOP_ACCEPT_FULL=1 to run");
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
