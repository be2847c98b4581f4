use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qutaylor::config::RunConfig;
use qutaylor::pipeline::{run_pipeline, run_robustness, Stage};
use qutaylor::ErrorClass;

/// Quantile-preference Taylor rules from raw macroeconomic series.
#[derive(Debug, Parser)]
#[command(name = "qutaylor", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Configuration file (key = value lines).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides output_dir from the configuration.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the raw series and build the quarterly panel.
    Prepare(Common),
    /// Fit the law of motion and the scale model; write the shock sample.
    Estimate(Common),
    /// Evaluate the rule at the representative quantile indices.
    Rule(Common),
    /// Recover the implied quantile index for every quarter.
    ImpliedTau(Common),
    /// Compare the closed-form rule with the dynamic-programming oracle.
    ValidateDp(Common),
    /// Run the lambda and post-1979Q4 presets.
    Robustness(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, stage) = match &cli.command {
        Command::Prepare(c) => (c, Some(Stage::Prepare)),
        Command::Estimate(c) => (c, Some(Stage::Estimate)),
        Command::Rule(c) => (c, Some(Stage::Rule)),
        Command::ImpliedTau(c) => (c, Some(Stage::ImpliedTau)),
        Command::ValidateDp(c) => (c, Some(Stage::ValidateDp)),
        Command::Robustness(c) => (c, None),
    };
    let mut cfg = match RunConfig::load(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            // An unreadable configuration file is a configuration problem.
            return ExitCode::from(ErrorClass::Config.exit_code() as u8);
        }
    };
    if let Some(dir) = &common.output {
        cfg.output_dir = dir.clone();
    }
    let outcome = match stage {
        Some(stage) => run_pipeline(&cfg, stage).map(|res| {
            println!("wrote {} files to {}", res.manifest.files.len(), cfg.output_dir.display());
            println!("reproducibility hash {}", res.manifest.reproducibility_hash);
            if let Some(s) = res.implied.as_ref().and_then(|s| s.median_tau()) {
                println!("median implied tau {s}");
            }
            if let Some(r) = &res.dp {
                println!("oracle max deviation {} ({} grid steps)", r.max_abs, r.max_steps);
            }
        }),
        None => run_robustness(&cfg).map(|summaries| {
            for s in summaries {
                let tau = s.median_tau.map_or("NA".to_string(), |t| t.to_string());
                println!("{}: median implied tau {tau}, inflation response {}", s.name, s.inflation_response);
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.source.class().exit_code() as u8)
        }
    }
}
