use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use nfloop::harness::export::{self, Mode, Summary};
use nfloop::harness::{run_experiment, run_grid, ExperimentConfig};

/// Active Inference agents learning a motor-imagery neurofeedback task.
#[derive(Debug, Parser)]
#[command(name = "nfloop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run `n_agents` independent agents with the configured priors.
    Simulate(RunArgs),
    /// Sweep the transition-prior grid and write before/after matrices.
    Grid(RunArgs),
    /// Re-run the config echoed in a summary and compare outputs.
    Replay {
        #[arg(long)]
        summary: PathBuf,
        /// Directory for the re-run outputs (default: a sibling `replay` dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML or JSON config file, or the name of a preset
    /// (familiar, naive, grid, grid5).
    #[arg(long)]
    config: String,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `experiment.output_dir`, then `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every available core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write the per-step trace.
    #[arg(long)]
    steps: bool,
}

fn load_config(arg: &str) -> anyhow::Result<ExperimentConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(ExperimentConfig::load(path)?);
    }
    match ExperimentConfig::preset(arg) {
        Some(cfg) => Ok(cfg),
        None => bail!("no config file or preset named {arg:?}"),
    }
}

fn effective_config(args: &RunArgs) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.experiment.master_seed = seed;
    }
    if let Some(jobs) = args.jobs {
        cfg.experiment.jobs = jobs;
    }
    cfg.experiment.steps |= args.steps;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.experiment.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.experiment.name));
    cfg.experiment.output_dir = Some(out.clone());
    cfg.validate()?;
    Ok((cfg, out))
}

/// Runs a batch, writes its outputs and returns the summary.
fn execute(mode: Mode, cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Summary> {
    let start = Instant::now();
    let (batch, grid) = match mode {
        Mode::Simulate => (run_experiment(cfg, None)?, None),
        Mode::Grid => {
            let mut g = run_grid(cfg, None)?;
            let batch = std::mem::take(&mut g.batch);
            (batch, Some(g))
        }
    };
    let summary = export::summarize(mode, cfg, &batch, grid.as_ref(), start.elapsed().as_secs_f64())?;
    let written = export::write_outputs(out, &summary, &batch, grid.as_ref())?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    let a = &summary.aggregates;
    eprintln!(
        "{} runs ({} failed) in {:.1} s; performance first {} trials {:.4}, last {} trials {:.4}; {} runs improved",
        a.runs,
        summary.failed,
        summary.wall_time_s,
        cfg.experiment.window,
        a.performance_before,
        cfg.experiment.window,
        a.performance_after,
        a.improved_runs
    );
    Ok(summary)
}

fn replay(summary_path: &Path, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let original = export::read_summary(summary_path)?;
    let src_dir = summary_path.parent().unwrap_or(Path::new("."));
    let out = out.unwrap_or_else(|| src_dir.join("replay"));
    let mut cfg = original.config.clone();
    cfg.experiment.output_dir = Some(out.clone());
    execute(original.mode, &cfg, &out)?;
    let mut files = vec![export::TRIALS_FILE];
    if original.mode == Mode::Grid {
        files.extend([export::GRID_BEFORE_FILE, export::GRID_AFTER_FILE]);
    }
    if cfg.experiment.steps {
        files.push(export::STEPS_FILE);
    }
    let mut identical = true;
    for name in files {
        let a = std::fs::read(src_dir.join(name)).with_context(|| format!("reading original {name}"))?;
        let b = std::fs::read(out.join(name)).with_context(|| format!("reading replayed {name}"))?;
        if a == b {
            println!("{name}: identical");
        } else {
            identical = false;
            let line = a
                .split(|&c| c == b'\n')
                .zip(b.split(|&c| c == b'\n'))
                .position(|(x, y)| x != y)
                .map_or_else(|| "length".to_string(), |k| format!("line {}", k + 1));
            println!("{name}: differs ({line})");
        }
    }
    Ok(identical)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => effective_config(&args)
            .and_then(|(cfg, out)| execute(Mode::Simulate, &cfg, &out))
            .map(|s| s.failed == 0),
        Command::Grid(args) => effective_config(&args)
            .and_then(|(cfg, out)| execute(Mode::Grid, &cfg, &out))
            .map(|s| s.failed == 0),
        Command::Replay { summary, out } => replay(&summary, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
