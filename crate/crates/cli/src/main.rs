use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chemotaxis::experiments::{
    check_command, pullback, run_command, run_sweep, ExperimentError, SweepSpec,
};
use chemotaxis::model::{HypothesisChoice, RunConfig};
use chemotaxis::oracle::{default_golden_path, read_goldens, regenerate_goldens, run_oracle_suite};

#[derive(Parser)]
#[command(name = "chemotaxis", version, about = "Chemotaxis simulator with logistic and nonlocal sources")]
struct Cli {
    /// Directory for artifacts (overrides the sweep spec's output_dir).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed for random initial data, replacing the seeds in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one config and write snapshots, record and summary.
    Run { config: PathBuf },
    /// Run a cartesian parameter sweep and write the phase table.
    Sweep {
        spec: PathBuf,
        /// Worker count, overriding the spec.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Approximate the entire solution by runs started at t = -n.
    Pullback {
        config: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        depths: Vec<f64>,
    },
    /// Evaluate a standing hypothesis; exits 1 when it fails.
    Check {
        config: PathBuf,
        #[arg(long, value_enum)]
        hypothesis: Option<Hypothesis>,
    },
    /// Run the reference-solution suite against the golden file.
    Oracle {
        #[arg(long)]
        regenerate: bool,
        #[arg(long)]
        goldens: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Hypothesis {
    H1,
    H2,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, ExperimentError> {
    let mut config = RunConfig::load(path)?;
    if let Some(s) = seed {
        config.initial.reseed(s);
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<i32, ExperimentError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cli.output_dir.unwrap_or_else(|| PathBuf::from("run_out"));
            let out = run_command(&cfg, Some(&dir))?;
            print!("{}", out.summary);
            println!("artifacts: {}", dir.display());
            Ok(0)
        }
        Command::Sweep { spec, parallelism } => {
            let mut s = SweepSpec::load(&spec)?;
            s.seed = cli.seed;
            if let Some(p) = parallelism {
                s.parallelism = p;
            }
            if let Some(d) = cli.output_dir {
                s.output_dir = d;
            }
            let result = run_sweep(&s)?;
            result.write(&s.output_dir)?;
            println!("{} runs written to {}", result.rows.len(), s.output_dir.display());
            match result.uniform_eta {
                Some(eta) => println!("uniform eta over persistent runs: {eta:e}"),
                None => println!("no persistent runs"),
            }
            Ok(0)
        }
        Command::Pullback { config, depths } => {
            let cfg = load_config(&config, cli.seed)?;
            let r = pullback(&cfg, &depths)?;
            for (n, gap) in r.depths.iter().skip(1).zip(&r.cauchy_gaps) {
                println!("depth {n}: cauchy gap {gap:e}");
            }
            println!("eta_entire: {:e}", r.eta_entire);
            println!("converged: {}", r.converged());
            if let Some(dir) = cli.output_dir {
                std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::Io(e.to_string()))?;
                let json = serde_json::to_string_pretty(&r).expect("pullback result serializes");
                std::fs::write(dir.join("pullback.json"), json)
                    .map_err(|e| ExperimentError::Io(e.to_string()))?;
            }
            Ok(0)
        }
        Command::Check { config, hypothesis } => {
            let cfg = load_config(&config, cli.seed)?;
            let which = hypothesis.map(|h| match h {
                Hypothesis::H1 => HypothesisChoice::H1,
                Hypothesis::H2 => HypothesisChoice::H2,
            });
            let out = check_command(&cfg, which)?;
            println!("{}", out.to_json());
            Ok(if out.report.satisfied { 0 } else { 1 })
        }
        Command::Oracle { regenerate, goldens } => {
            let path = goldens.unwrap_or_else(|| default_golden_path().to_path_buf());
            let report = if regenerate {
                let r = regenerate_goldens(&path)?;
                for d in &r.diffs {
                    println!("golden changed: {d}");
                }
                if r.diffs.is_empty() {
                    println!("goldens unchanged");
                }
                r
            } else {
                let goldens = read_goldens(&path)?;
                run_oracle_suite(Some(&goldens))?
            };
            for c in &report.cases {
                let o = &c.outcome;
                let status = if c.passed() { "PASS" } else { "FAIL" };
                print!("{status} {}: {} = {:e} (tolerance {:e})", o.name, o.quantity, o.value, o.tolerance);
                match &c.golden_failure {
                    Some(why) => println!(" golden: {why}"),
                    None => println!(),
                }
            }
            Ok(if report.all_passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
