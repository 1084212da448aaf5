use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tbrw_cli::config::{ConfigError, ExperimentConfig, ExperimentKind, Overrides, PRESETS};
use tbrw_cli::{run_experiment, sweep, SweepParam, EXIT_CONFIG, EXIT_PASS, EXIT_TOLERANCE};

#[derive(Parser)]
#[command(name = "tbrw", version, about = "Tree builder random walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset, used when no config is given.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Common),
    /// Run an experiment at every value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// gamma, delta, seed or mode.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Check the exact reference computations.
    OracleCheck(Common),
    /// Evaluate recurrence and transience conditions of a law.
    Conditions(Common),
    /// Print a preset config.
    Preset { name: String },
    /// List the presets.
    List,
}

fn resolve(common: &Common, forced: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match (&common.config, &common.experiment) {
        (Some(path), name) => {
            let cfg = ExperimentConfig::load(path)?;
            if let Some(name) = name {
                let preset = ExperimentConfig::preset(name)?;
                if preset.experiment != cfg.experiment {
                    return Err(ConfigError::Invalid(format!(
                        "--experiment {name} does not match config experiment {}",
                        cfg.experiment
                    )));
                }
            }
            cfg
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => match forced {
            Some(kind) => ExperimentConfig::preset(kind.name())?,
            None => return Err(ConfigError::Invalid("give --config or --experiment".into())),
        },
    };
    if let Some(kind) = forced {
        if cfg.experiment != kind {
            return Err(ConfigError::Invalid(format!("expected a {kind} config, got {}", cfg.experiment)));
        }
    }
    cfg.apply(&Overrides {
        seed: common.seed,
        replicas: common.replicas,
        out: common.out.clone(),
    });
    Ok(cfg)
}

fn init_pool() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("TBRW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Invalid(format!("TBRW_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}

fn print_summary(summary: &tbrw_cli::summary::Summary) {
    for c in &summary.checks {
        let status = match (c.pass, c.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        println!(
            "{status} {}: {} {} {}",
            c.name,
            c.value,
            serde_json::to_value(c.relation).unwrap().as_str().unwrap(),
            c.threshold
        );
    }
    for f in &summary.failures {
        println!("FAIL {f}");
    }
    println!("{}: {}", summary.experiment, if summary.pass { "pass" } else { "fail" });
}

fn run_one(common: &Common, forced: Option<ExperimentKind>) -> Result<i32, ConfigError> {
    let cfg = resolve(common, forced)?;
    let outcome = run_experiment(&cfg)?;
    if let Some(dir) = &cfg.out {
        outcome
            .write(dir)
            .map_err(|e| ConfigError::Invalid(format!("cannot write {}: {e}", dir.display())))?;
    }
    print_summary(&outcome.summary);
    Ok(outcome.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32, ConfigError> {
    match cli.command {
        Command::List => {
            for p in PRESETS {
                println!("{p}");
            }
            Ok(EXIT_PASS)
        }
        Command::Preset { name } => {
            println!("{}", ExperimentConfig::preset(&name)?.to_json());
            Ok(EXIT_PASS)
        }
        Command::Run(common) => {
            init_pool()?;
            run_one(&common, None)
        }
        Command::OracleCheck(common) => {
            init_pool()?;
            run_one(&common, Some(ExperimentKind::OracleCheck))
        }
        Command::Conditions(common) => {
            init_pool()?;
            run_one(&common, Some(ExperimentKind::Conditions))
        }
        Command::Sweep { common, param, values } => {
            init_pool()?;
            let cfg = resolve(&common, None)?;
            let param: SweepParam = param.parse()?;
            let result = sweep(&cfg, param, &values);
            if let Some(dir) = &cfg.out {
                result
                    .write(dir)
                    .map_err(|e| ConfigError::Invalid(format!("cannot write {}: {e}", dir.display())))?;
            }
            print!("{}", result.table());
            Ok(if result.any_config_error() {
                EXIT_CONFIG
            } else if result.pass() {
                EXIT_PASS
            } else {
                EXIT_TOLERANCE
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    };
    debug_assert!([EXIT_PASS, EXIT_TOLERANCE, EXIT_CONFIG].contains(&code));
    ExitCode::from(code as u8)
}
