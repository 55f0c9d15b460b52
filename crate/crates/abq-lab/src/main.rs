//! Command-line front end: exact-solution curves, learning runs, sweeps, and
//! the sampling-versus-analytic oracle suite.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use abq_lab::envs::{baird, random_mdp, two_state, MdpTask, RandomMdpSpec};
use abq_lab::harness::{
    bias_study, oracle, run_experiment, solve_curve, write_bias_csv, write_solve_csv,
    write_summary_csv, AgentKind, ExperimentConfig,
};
use abq_lab::mdp::LoadedModel;

#[derive(Parser)]
#[command(
    name = "abq-lab",
    about = "Off-policy policy-evaluation workbench: ABQ(ζ) and relatives, \
             exact MSPBE solvers, seeded experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact asymptotic-solution curves; with --instances, the multi-MDP
    /// bias study over seeded random instances.
    Solve {
        /// two_state | baird | random_mdp | a path to a model JSON file
        #[arg(long, default_value = "two_state")]
        task: String,
        /// Solution family: abq | abtrace | treebackup | gq (constant λ)
        #[arg(long, default_value = "abq")]
        scheme: String,
        /// Comma-separated ζ/λ grid
        #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        grid: String,
        /// Run the bias study over this many random-MDP instances
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout summary is always printed)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One learning configuration with full per-step series emission.
    Run {
        /// JSON or TOML config path
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed base
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A full sweep (ζ/λ × α × β × runs) with summary CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verification suite: forward/backward equivalence, expected-update,
    /// gradient finite differences. Nonzero exit on any failure.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad grid value {s:?}"))
        })
        .collect()
}

fn parse_agent(text: &str) -> Result<AgentKind> {
    Ok(match text {
        "abq" => AgentKind::Abq,
        "abtrace" => AgentKind::Abtrace,
        "gq" | "constant" => AgentKind::Gq,
        "treebackup" => AgentKind::Treebackup,
        other => bail!("unknown scheme {other:?} (expected abq|abtrace|gq|constant|treebackup)"),
    })
}

fn load_task(name: &str, seed: u64) -> Result<MdpTask> {
    Ok(match name {
        "two_state" => two_state(),
        "baird" => baird(),
        "random_mdp" => {
            random_mdp(&RandomMdpSpec {
                seed,
                ..RandomMdpSpec::default()
            })
            .0
        }
        path => {
            let model = LoadedModel::from_path(std::path::Path::new(path))
                .with_context(|| format!("loading model file {path:?}"))?;
            MdpTask {
                mdp: model.mdp,
                target: model.target,
                behavior: model.behavior,
                features: model.features,
                initial_weights: None,
            }
        }
    })
}

fn solve_command(
    task: &str,
    scheme: &str,
    grid: &str,
    instances: Option<usize>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let grid = parse_grid(grid)?;
    if let Some(n) = instances {
        if task != "random_mdp" {
            bail!("--instances runs the bias study and needs --task random_mdp");
        }
        let spec = RandomMdpSpec {
            seed,
            ..RandomMdpSpec::default()
        };
        let study = bias_study(&spec, n, &grid, Default::default())?;
        println!(
            "bias study: {}/{} instances monotone nonincreasing ({} flagged non-invertible)",
            study.monotone_count, study.valid_instances, study.flagged.len()
        );
        println!(
            "median NMSE at grid ends: {} -> {}",
            study.median_first, study.median_last
        );
        if let Some(path) = out {
            write_bias_csv(&path, &study)?;
            println!("wrote {}", path.display());
        }
        return Ok(());
    }

    let agent = parse_agent(scheme)?;
    let task = load_task(task, seed)?;
    let rows = solve_curve(&task, agent, &grid)?;
    println!("scheme,zeta_or_lambda,nmse,mspbe_at_winf,cond_a");
    for row in &rows {
        println!(
            "{},{},{},{},{}",
            row.scheme, row.zeta_or_lambda, row.nmse, row.mspbe_at_winf, row.cond_a
        );
    }
    if let Some(path) = out {
        write_solve_csv(&path, &rows)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn experiment_command(
    config: &std::path::Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    force_series: bool,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(config)
        .with_context(|| format!("loading config {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.out = Some(out);
    }
    if force_series {
        cfg.record_series = true;
    }
    let outcome = run_experiment(&cfg)?;
    print!("{}", write_summary_csv(&outcome));
    if let Some(dir) = &cfg.out {
        println!("wrote {}", dir.join("summary.csv").display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            task,
            scheme,
            grid,
            instances,
            seed,
            out,
        } => solve_command(task, scheme, grid, *instances, *seed, out.clone()),
        Command::Run { config, seed, out } => {
            experiment_command(config, *seed, out.clone(), true)
        }
        Command::Experiment { config, seed, out } => {
            experiment_command(config, *seed, out.clone(), false)
        }
        Command::Oracle { seed } => match oracle::oracle_suite(*seed) {
            Ok(checks) => {
                let mut all_passed = true;
                for check in &checks {
                    let status = if check.passed { "PASS" } else { "FAIL" };
                    println!("[{status}] {}: {}", check.name, check.details);
                    all_passed &= check.passed;
                }
                if all_passed {
                    Ok(())
                } else {
                    return ExitCode::from(1);
                }
            }
            Err(e) => Err(e.into()),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
