//! `qlsim`: learn, sweep, fit and verify Deutsch-Jozsa candidates from the shell.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qlsim_core::experiment::{fit_scaling_points, ScalingPoint};
use qlsim_core::{
    build_training_set, enumerate_balanced, gaussian_fit, learn, learning_probability,
    mean_best_fitness_curve, run_ensemble, verify_learned, CrossoverRate, DEConfig, TrainingPolicy,
};

use report::{
    read_json, write_json, EnsembleDoc, FitDoc, HoldoutEcho, LearnDoc, ParamsFile, RunSummary,
    TrainingEcho, VerifyDoc,
};

#[derive(Parser)]
#[command(
    name = "qlsim",
    version,
    about = "Learn oracle algorithms by differential evolution"
)]
struct Cli {
    /// Worker threads for trials and population evaluation.
    #[arg(long, global = true, env = "QLSIM_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizer once and write the learning run as JSON.
    Learn(LearnArgs),
    /// Run seeded ensembles for a range of qubit counts.
    Sweep(SweepArgs),
    /// Fit r_c = A sqrt(D) + B over the ensembles written by `sweep`.
    FitScaling(FitArgs),
    /// Re-score a learned pair on held-out balanced functions.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct OptimizerArgs {
    /// Population size.
    #[arg(long, default_value_t = 10)]
    npop: usize,
    /// Differential weight W.
    #[arg(long, default_value_t = 0.8)]
    weight: f64,
    /// Fixed crossover rate C_r. Without it, C_r = min(1, m / len) with m
    /// from `--crossover-per-vector`.
    #[arg(long, conflicts_with = "crossover_per_vector")]
    crossover: Option<f64>,
    /// Expected number of mutant components per trial vector.
    #[arg(long)]
    crossover_per_vector: Option<f64>,
    /// Halting fitness.
    #[arg(long, default_value_t = 0.99)]
    halt: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 3)]
    stages_max: usize,
    /// Iterations without improvement before another stage is added.
    #[arg(long, default_value_t = 5_000)]
    stagnation_window: usize,
    /// Estimate probabilities from this many shots per function.
    #[arg(long)]
    shots: Option<u64>,
    /// Training policy: `full` or `sample:<m>`. Defaults to full for n <= 3.
    #[arg(long, value_parser = parse_policy)]
    policy: Option<TrainingPolicy>,
}

impl OptimizerArgs {
    fn config(&self, seed: u64) -> DEConfig {
        let crossover_rate = match (self.crossover, self.crossover_per_vector) {
            (Some(cr), _) => CrossoverRate::Fixed(cr),
            (None, Some(m)) => CrossoverRate::PerVector(m),
            (None, None) => CrossoverRate::default(),
        };
        DEConfig {
            n_pop: self.npop,
            weight: self.weight,
            crossover_rate,
            halt_fitness: self.halt,
            max_iterations: self.max_iter,
            stagnation_window: self.stagnation_window,
            max_stages: self.stages_max,
            shots: self.shots,
            seed,
            ..DEConfig::default()
        }
    }

    fn policy_for(&self, n: usize) -> TrainingPolicy {
        self.policy
            .unwrap_or_else(|| TrainingPolicy::default_for(n))
    }
}

fn parse_policy(s: &str) -> Result<TrainingPolicy, String> {
    match s.split_once(':') {
        None if s == "full" => Ok(TrainingPolicy::Full),
        Some(("sample", m)) => m
            .parse()
            .map(TrainingPolicy::Sample)
            .map_err(|e| format!("bad sample size {m:?}: {e}")),
        _ => Err(format!("expected `full` or `sample:<m>`, got {s:?}")),
    }
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for sampling training functions; defaults to `--seed`.
    #[arg(long)]
    train_seed: Option<u64>,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 3)]
    n_max: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Seed for sampling training functions; defaults to `--base-seed`.
    #[arg(long)]
    train_seed: Option<u64>,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// A `learn` output, a bare learning run, or a candidate pair in JSON.
    #[arg(long)]
    params: PathBuf,
    /// Expected qubit count; checked against the file.
    #[arg(long)]
    n: Option<usize>,
    /// Seed of the sampled training set whose holdout is used (n >= 4).
    #[arg(long)]
    holdout_seed: Option<u64>,
    /// Stage count; defaults to the stages the run used.
    #[arg(long)]
    stages: Option<usize>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let jobs = match cli.jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(j) => j,
        None => thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    };
    match cli.command {
        Command::Learn(args) => cmd_learn(args, jobs),
        Command::Sweep(args) => cmd_sweep(args, jobs),
        Command::FitScaling(args) => cmd_fit(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn cmd_learn(args: LearnArgs, jobs: usize) -> Result<()> {
    let mut cfg = args.opt.config(args.seed);
    cfg.parallel = jobs > 1;
    let train_seed = args.train_seed.unwrap_or(args.seed);
    let training = build_training_set(args.n, args.opt.policy_for(args.n), train_seed)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let run = pool.install(|| learn(&cfg, &training))?;
    eprintln!(
        "n={} completed={} iterations={} fitness={:.6}",
        run.n,
        run.completed,
        run.trace.len() - 1,
        run.final_fitness
    );
    let doc = LearnDoc::new(TrainingEcho::of(&training), run);
    write_json(&args.out, &doc)
}

fn cmd_sweep(args: SweepArgs, jobs: usize) -> Result<()> {
    if args.n_min == 0 || args.n_min > args.n_max {
        bail!(
            "need 1 <= n-min <= n-max, got {}..={}",
            args.n_min,
            args.n_max
        );
    }
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let cfg = args.opt.config(args.base_seed);
    let train_seed = args.train_seed.unwrap_or(args.base_seed);
    let mut points = Vec::new();

    for n in args.n_min..=args.n_max {
        let training = build_training_set(n, args.opt.policy_for(n), train_seed)?;
        let ensemble = run_ensemble(&cfg, &training, args.trials, args.base_seed, jobs)?;
        let fit = gaussian_fit(&ensemble).ok();
        eprintln!(
            "n={n} completed {}/{} r_c={}",
            ensemble.completion_iterations().len(),
            ensemble.trial_count,
            fit.map_or("n/a".to_string(), |f| format!("{:.1}", f.r_c)),
        );
        if let Some(f) = fit {
            points.push(ScalingPoint::new(n, f.r_c, f.delta_r));
        }

        report::write_series(
            &args.out_dir.join(format!("n{n}_trace.csv")),
            ["iteration", "mean_best_fitness"],
            &mean_best_fitness_curve(&ensemble)?,
        )?;
        report::write_series(
            &args.out_dir.join(format!("n{n}_cdf.csv")),
            ["iteration", "learning_probability"],
            &learning_probability(&ensemble),
        )?;
        let doc = EnsembleDoc {
            spec_version: qlsim_core::FORMAT_VERSION.into(),
            n,
            config: ensemble.config.clone(),
            training: TrainingEcho::of(&training),
            base_seed: ensemble.base_seed,
            trial_count: ensemble.trial_count,
            completion_fraction: ensemble.completion_fraction(),
            gaussian_fit: fit,
            runs: ensemble.runs.iter().map(RunSummary::of).collect(),
        };
        write_json(&args.out_dir.join(format!("ensemble_n{n}.json")), &doc)?;
    }

    report::write_scaling_csv(&args.out_dir.join("scaling.csv"), &points)
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let mut sources = Vec::new();
    for entry in
        fs::read_dir(&args.in_dir).with_context(|| format!("reading {}", args.in_dir.display()))?
    {
        let path = entry?.path();
        let is_ensemble = path
            .file_name()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.starts_with("ensemble_n") && s.ends_with(".json"));
        if is_ensemble {
            sources.push(path);
        }
    }
    sources.sort();

    let mut points = Vec::new();
    let mut inputs = Vec::new();
    for path in &sources {
        let doc: EnsembleDoc = read_json(path)?;
        match doc.gaussian_fit {
            Some(g) => points.push(ScalingPoint::new(doc.n, g.r_c, g.delta_r)),
            None => eprintln!("skipping n={}: fewer than two completed trials", doc.n),
        }
        inputs.push(file_name(path));
    }
    let fit = fit_scaling_points(points).context("fitting r_c against sqrt(D)")?;
    eprintln!(
        "A={:.3} B={:.3} R^2={:.4} (reference A={}, B={})",
        fit.slope, fit.intercept, fit.r_squared, fit.reference_slope, fit.reference_intercept
    );
    let doc = FitDoc {
        spec_version: qlsim_core::FORMAT_VERSION.into(),
        inputs,
        fit,
    };
    write_json(&args.out, &doc)
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let params = ParamsFile::load(&args.params)?;
    let pair = params.pair();
    let n = pair.qubits();
    if let Some(expected) = args.n {
        if expected != n {
            bail!(
                "--n {expected} does not match the {n}-qubit pair in {}",
                args.params.display()
            );
        }
    }
    let stages = args.stages.unwrap_or_else(|| params.stages_used());

    let (holdout, echo) = if n <= 3 {
        let all = enumerate_balanced(n)?;
        let echo = HoldoutEcho {
            policy: "all_balanced".into(),
            seed: None,
            count: all.len(),
        };
        (all, echo)
    } else {
        let seed = match args.holdout_seed.or(params.training_seed()) {
            Some(s) => s,
            None => bail!(
                "--holdout-seed is required for n >= 4 when the params file has no training seed"
            ),
        };
        let sampled = build_training_set(
            n,
            TrainingPolicy::Sample(qlsim_core::oracle::DEFAULT_SAMPLE),
            seed,
        )?;
        let holdout = sampled.holdout().to_vec();
        let echo = HoldoutEcho {
            policy: "sample_holdout".into(),
            seed: Some(seed),
            count: holdout.len(),
        };
        (holdout, echo)
    };

    let report = verify_learned(pair, &holdout, stages)?;
    let doc = VerifyDoc {
        spec_version: qlsim_core::FORMAT_VERSION.into(),
        n,
        params: file_name(&args.params),
        stages,
        holdout: echo,
        report,
    };
    match &args.out {
        Some(path) => write_json(path, &doc),
        None => {
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(())
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}
