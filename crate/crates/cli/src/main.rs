use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortlist_core::algorithm::{effective_k, seeded_inputs, AlgoConfig, Mode};
use shortlist_core::baselines::{
    branch_and_bound_opt, check_submodular, exhaustive_opt, offline_greedy, CHECK_LIMIT, DEFAULT_EXHAUSTIVE_LIMIT,
};
use shortlist_core::harness::{
    compare_modes, generate_instance, run_sweep, write_report, ConstraintKind, GenParams, InstanceFile,
    InstanceSource, ObjectiveKind, SweepConfig,
};
use shortlist_core::secretary::capture_experiment;
use shortlist_core::submodular::SubmodularFn;

/// Simulator for online submodular maximization with shortlists.
///
/// The worker thread count follows RAYON_NUM_THREADS.
#[derive(Parser)]
#[command(name = "shortlist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file.
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run seeded trials of the shortlist algorithm.
    Run(RunArgs),
    /// Check that full mode and another mode agree on the same seeds.
    Compare {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        algo: AlgoArgs,
        /// Mode compared against full mode.
        #[arg(long, default_value = "streaming")]
        against: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact optimum of an instance.
    Opt {
        instance: PathBuf,
        /// Largest ground set solved by plain enumeration.
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
        limit: usize,
        /// Use branch and bound when the instance exceeds the limit.
        #[arg(long)]
        exact: bool,
    },
    /// Offline greedy value of an instance.
    Greedy { instance: PathBuf },
    /// Exhaustively check monotonicity and submodularity on the first items.
    CheckFn {
        instance: PathBuf,
        #[arg(long, default_value_t = CHECK_LIMIT)]
        n: usize,
    },
    /// Classic secretary with a shortlist: capture rate over random orders.
    SecretaryMax {
        /// Whitespace- or comma-separated values; random distinct values if omitted.
        #[arg(long)]
        values: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 5000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, default_value = "coverage")]
    objective: ObjectiveKind,
    #[arg(long, default_value = "uniform")]
    constraint: ConstraintKind,
    #[arg(long, default_value_t = 60)]
    n: usize,
    /// Rank used by the generator.
    #[arg(long = "gen-k", default_value_t = 4)]
    gen_k: usize,
    #[arg(long)]
    universe: Option<usize>,
    #[arg(long)]
    clients: Option<usize>,
}

impl GenArgs {
    fn params(&self) -> GenParams {
        GenParams {
            universe: self.universe,
            clients: self.clients,
            ..GenParams::new(self.objective, self.constraint, self.n, self.gen_k)
        }
    }
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Instance file; without it a fresh instance is generated per seed.
    instance: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
}

impl SourceArgs {
    fn source(&self) -> Result<InstanceSource> {
        Ok(match &self.instance {
            Some(path) => InstanceSource::Fixed(Box::new(load(path)?)),
            None => InstanceSource::Generated(self.gen.params()),
        })
    }
}

#[derive(Args, Clone)]
struct AlgoArgs {
    #[arg(long, default_value = "full")]
    mode: Mode,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    alpha: usize,
    #[arg(long, default_value_t = 1)]
    beta: usize,
    /// Override the rank used to size the window plan.
    #[arg(long)]
    k: Option<usize>,
    /// Fail streaming runs whose buffer exceeds this many items.
    #[arg(long)]
    buffer_budget: Option<usize>,
}

impl AlgoArgs {
    fn config(&self) -> AlgoConfig {
        AlgoConfig {
            epsilon: self.epsilon,
            alpha: self.alpha,
            beta: self.beta,
            mode: self.mode,
            k: self.k,
            buffer_budget: self.buffer_budget,
            trace: false,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    algo: AlgoArgs,
    /// First seed; trial t uses seed + t.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Report path: .csv for CSV, anything else for JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the first seed's arrival order and window plan as JSON.
    #[arg(long)]
    dump_plan: Option<PathBuf>,
    /// Largest ground set solved exactly by enumeration.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
    opt_limit: usize,
    /// Compute the optimum by branch and bound above the enumeration limit.
    #[arg(long)]
    exact_opt: bool,
    /// Record wall-clock time per trial.
    #[arg(long)]
    timing: bool,
}

fn load(path: &Path) -> Result<InstanceFile> {
    InstanceFile::load(path).with_context(|| format!("reading instance {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let source = args.source.source()?;
    let mut config = SweepConfig::new(source, args.algo.config(), args.trials, args.seed);
    config.opt_limit = args.opt_limit;
    config.exact_opt = args.exact_opt;
    config.timing = args.timing;
    if let Some(path) = &args.dump_plan {
        let inst = config.source.instance_for(args.seed)?;
        let (order, plan) = seeded_inputs(inst.n(), effective_k(&inst.constraint, &config.algo), &config.algo, args.seed)?;
        let dump = serde_json::json!({ "seed": args.seed, "order": order, "plan": plan });
        fs::write(path, serde_json::to_string_pretty(&dump)? + "\n")?;
    }
    let report = run_sweep(&config)?;
    if let Some(path) = &args.out {
        write_report(&report, path)?;
    }
    let s = &report.summary;
    println!(
        "trials={} mode={} mean_ratio={:.4} sd={:.4} ci=[{:.4}, {:.4}] reference={:.4} mean_vs_greedy={:.4} cap_violations={}",
        s.count,
        config.algo.mode,
        s.mean,
        s.sd,
        s.ci_low,
        s.ci_high,
        s.reference,
        report.summary_vs_greedy.mean,
        report.cap_violations
    );
    Ok(if report.cap_violations > 0 {
        eprintln!("shortlist cap exceeded in {} trial(s)", report.cap_violations);
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad value {t:?}")))
        .collect()
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Gen { gen, seed, out } => {
            let inst = generate_instance(&gen.params(), &mut ChaCha8Rng::seed_from_u64(seed))?;
            inst.save(&out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => run(args),
        Command::Compare {
            source,
            algo,
            against,
            seed,
            trials,
            out,
        } => {
            let config = algo.config();
            let source = source.source()?;
            let mut divergences = 0;
            let mut seeds = Vec::new();
            for s in seed..seed + trials {
                let inst = source.instance_for(s)?;
                let report = compare_modes(&inst, &config, against, [s])?;
                divergences += report.divergences.len();
                for d in &report.divergences {
                    eprintln!("seed {}: {}", d.seed, d.what);
                }
                seeds.extend(report.seeds);
            }
            let summary = serde_json::json!({ "against": against, "divergences": divergences, "seeds": seeds });
            match out {
                Some(path) => fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?,
                None => print_json(&summary)?,
            }
            println!("compared {trials} seed(s) against {against}: {divergences} divergence(s)");
            Ok(if divergences == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Opt { instance, limit, exact } => {
            let inst = load(&instance)?;
            let result = match exhaustive_opt(&inst.objective, &inst.constraint, limit) {
                Ok(r) => r,
                Err(_) if exact => branch_and_bound_opt(&inst.objective, &inst.constraint),
                Err(e) => bail!("{e} (or pass --exact)"),
            };
            print_json(&result)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Greedy { instance } => {
            let inst = load(&instance)?;
            print_json(&offline_greedy(&inst.objective, &inst.constraint))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckFn { instance, n } => {
            let inst = load(&instance)?;
            let report = check_submodular(&inst.objective, n.min(inst.objective.ground_size()))?;
            print_json(&report)?;
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::SecretaryMax {
            values,
            n,
            delta,
            trials,
            seed,
        } => {
            let values = match values {
                Some(path) => read_values(&path)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..n).map(|i| i as f64 + rng.gen::<f64>() * 0.5).collect()
                }
            };
            print_json(&capture_experiment(&values, delta, trials, seed)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
