use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use cellfree::clustering::Algorithm;
use cellfree::harness::output::emit_results;
use cellfree::harness::validation::{validate_instance, InstanceValidation};
use cellfree::harness::{presets, run_experiment, ExperimentReport};
use cellfree::{Error, ExperimentConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Cell-free massive MIMO downlink simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results.csv, cdf.csv and results.json.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `num_drops`.
    #[arg(long)]
    drops: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClusteringChoice {
    Power,
    Fixed,
    Lsf,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment (the config must not contain a sweep).
    Run(Common),
    /// Run every point of the config's sweep grid.
    Sweep(Common),
    /// Compare the closed form against the Monte Carlo oracle on random instances.
    Validate {
        /// Instances per (size, pilot count) combination.
        #[arg(long, default_value_t = 10)]
        instances: u64,
        /// Oracle draws per instance.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// First instance seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional directory for validation.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate CDF of the three transmission modes under legacy clustering.
    Fig1(Common),
    /// Total rate against the legacy cluster size.
    Fig2(Common),
    /// Multi-CPU clustering studies over the number of APs.
    #[command(name = "fig3-6")]
    Fig3To6 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        algorithm: ClusteringChoice,
    },
}

fn load_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    if let Some(drops) = common.drops {
        config.num_drops = drops;
    }
    config.validate()?;
    Ok(config)
}

fn jobs(common: &Common) -> usize {
    common.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn print_summary(report: &ExperimentReport) {
    println!("{:<60} {:>6} {:>10} {:>22}", "point", "drops", "mean", "95% CI");
    for p in &report.points {
        let label = if p.sweep_point.is_empty() {
            "-".to_string()
        } else {
            p.sweep_point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
        };
        let s = &p.summary;
        println!("{label:<60} {:>6} {:>10.4} [{:>9.4}, {:>9.4}]", s.count, s.mean, s.mean_ci95[0], s.mean_ci95[1]);
    }
}

fn execute(config: &ExperimentConfig, jobs: usize, out: &Path) -> anyhow::Result<()> {
    let report = run_experiment(config, jobs)?;
    let files = emit_results(&report, out)?;
    print_summary(&report);
    println!("wrote {}, {}, {}", files.results_csv.display(), files.cdf_csv.display(), files.json.display());
    Ok(())
}

fn validate(instances: u64, samples: usize, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let mut results: Vec<InstanceValidation> = Vec::new();
    for (m, k, n, q) in [(8, 3, 2, 2), (12, 4, 2, 4)] {
        for tau_p in [2, k] {
            for s in seed..seed + instances {
                let v = validate_instance(m, k, n, q, tau_p, s, samples)?;
                println!(
                    "(M,K,N,Q)=({m},{k},{n},{q}) tau_p={tau_p} seed={s}: {} terms, max rel. error {:.4} {}",
                    v.rows.len(),
                    v.max_relative_error(),
                    if v.passed() { "ok" } else { "MISMATCH" }
                );
                for row in v.rows.iter().filter(|r| !r.pass) {
                    println!(
                        "    {}: closed form {:.6e}, oracle {:.6e} ± {:.2e}",
                        row.term, row.closed_form, row.oracle, row.std_error
                    );
                }
                results.push(v);
            }
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("validation.json");
        std::fs::write(&path, serde_json::to_string_pretty(&results)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = results.iter().filter(|v| !v.passed()).count();
    println!("{} of {} instances within tolerance", results.len() - failed, results.len());
    if failed > 0 {
        bail!("{failed} instances outside tolerance");
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = load_config(&common)?;
            if config.sweep.is_some() {
                return Err(Error::Config("`run` takes a config without `sweep`; use `sweep`".into()).into());
            }
            execute(&config, jobs(&common), &common.out)
        }
        Command::Sweep(common) => {
            let config = load_config(&common)?;
            if config.sweep.is_none() {
                return Err(Error::Config("`sweep` needs a config with a `sweep` grid".into()).into());
            }
            execute(&config, jobs(&common), &common.out)
        }
        Command::Validate { instances, samples, seed, out } => validate(instances, samples, seed, out.as_deref()),
        Command::Fig1(common) => execute(&presets::fig1(load_config(&common)?), jobs(&common), &common.out),
        Command::Fig2(common) => execute(&presets::fig2(load_config(&common)?), jobs(&common), &common.out),
        Command::Fig3To6 { common, algorithm } => {
            let base = load_config(&common)?;
            let algorithms: &[(Algorithm, &str)] = match algorithm {
                ClusteringChoice::Power => &[(Algorithm::PowerFraction, "power")],
                ClusteringChoice::Fixed => &[(Algorithm::FixedAps, "fixed")],
                ClusteringChoice::Lsf => &[(Algorithm::LsfThreshold, "lsf")],
                ClusteringChoice::All => {
                    &[(Algorithm::PowerFraction, "power"), (Algorithm::FixedAps, "fixed"), (Algorithm::LsfThreshold, "lsf")]
                }
            };
            for &(alg, name) in algorithms {
                println!("== {name}");
                let out = if algorithms.len() > 1 { common.out.join(name) } else { common.out.clone() };
                execute(&presets::fig3_6(base.clone(), alg)?, jobs(&common), &out)?;
            }
            Ok(())
        }
    }
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_config))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}
