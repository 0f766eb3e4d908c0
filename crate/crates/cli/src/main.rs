use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use normkit_cli::config::parse_config;
use normkit_cli::runner::{self, RunError, SweepAxis};
use normkit_core::norm::PresetKind;
use normkit_core::train::Split;

#[derive(Parser)]
#[command(
    name = "normkit",
    version,
    about = "Parameterized normalization experiments: runs, sweeps, curves, gradient checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config; writes metrics.csv,
    /// summary.json, and curves.svg into the configured output directory.
    Run {
        config: PathBuf,
    },
    /// Run one child experiment per value of sigma or lambda_l1 and combine
    /// the results into sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Render curves.svg from an existing metrics.csv.
    Render {
        metrics: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify that closed-form, tape, and finite-difference gradients agree
    /// for every preset.
    Gradcheck {
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Sigma,
    #[value(name = "lambda_l1", alias = "lambda")]
    LambdaL1,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    #[value(name = "BN")]
    Bn,
    #[value(name = "LN")]
    Ln,
    #[value(name = "DN")]
    Dn,
    #[value(name = "DN-no-center")]
    DnNoCenter,
    #[value(name = "identity-like")]
    IdentityLike,
}

impl From<PresetArg> for PresetKind {
    fn from(arg: PresetArg) -> Self {
        match arg {
            PresetArg::Bn => PresetKind::BatchNorm,
            PresetArg::Ln => PresetKind::LayerNorm,
            PresetArg::Dn => PresetKind::DivisiveNorm,
            PresetArg::DnNoCenter => PresetKind::DivisiveNoCenter,
            PresetArg::IdentityLike => PresetKind::IdentityLike,
        }
    }
}

fn load_config(path: &PathBuf) -> Result<normkit_cli::config::ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {path:?}: {e}")))?;
    parse_config(&text)
}

fn execute(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let out = runner::run(&cfg, None)?;
            println!("run complete (seed {})", out.seed_used);
            for split in [Split::Train, Split::EvalTrain, Split::EvalValid] {
                if let Some(r) = out.final_record(split) {
                    println!(
                        "  {}: loss {:.6} accuracy {:.4} mean|v| {:.6}",
                        split.name(),
                        r.loss,
                        r.accuracy,
                        r.mean_abs_v
                    );
                }
            }
            println!("  wrote {}", out.metrics_path().display());
            println!("  wrote {}", out.summary_path().display());
            println!("  wrote {}", out.curves_path().display());
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
        } => {
            let cfg = load_config(&config)?;
            let axis = match axis {
                AxisArg::Sigma => SweepAxis::Sigma,
                AxisArg::LambdaL1 => SweepAxis::LambdaL1,
            };
            let out = runner::sweep(&cfg, axis, &values)?;
            for row in &out.rows {
                match &row.outcome {
                    Ok(run) => println!(
                        "  {}={} ok -> {}",
                        axis.name(),
                        row.value,
                        run.out_dir.display()
                    ),
                    Err(e) => println!("  {}={} failed: {e}", axis.name(), row.value),
                }
            }
            println!("  wrote {}", out.csv_path.display());
            Ok(())
        }
        Command::Render { metrics, out } => {
            let target = runner::render(&metrics, out.as_deref())?;
            println!("wrote {}", target.display());
            Ok(())
        }
        Command::Gradcheck { preset } => {
            let lines = runner::gradcheck(preset.map(PresetKind::from))?;
            let mut all_pass = true;
            for line in &lines {
                println!("{line}");
                all_pass &= line.pass();
            }
            if all_pass {
                println!("gradcheck: all {} combinations PASS", lines.len());
                Ok(())
            } else {
                Err(RunError::Numeric("gradient routes disagree".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("normkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
