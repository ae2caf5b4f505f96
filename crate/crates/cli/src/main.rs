use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ocad::commands::{cmd_eval, cmd_report, cmd_synth, cmd_train};
use ocad::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "ocad", version, about = "One-class anomaly detection of Parkinsonian fixation slices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// `key = value` config file; defaults apply to keys it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set model.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and its manifest.
    Synth(Common),
    /// Train one model per fold.
    Train(Common),
    /// Score validation folds and write metrics, ROC and score tables.
    Eval(Common),
    /// Write reconstructions, difference spectra and boxplot tables.
    Report(Common),
    /// Print the effective configuration.
    Config(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let log = |line: &str| eprintln!("{line}");
    match cli.command {
        Command::Synth(c) => {
            let cfg = RunConfig::load(c.config.as_deref(), &c.overrides)?;
            let s = cmd_synth(&cfg)?;
            let subjects: Vec<String> = s.subjects.iter().map(|(l, n)| format!("{n} {l}")).collect();
            println!("wrote {} images from {} subjects to {}", s.rows, subjects.join(" + "), s.manifest.display());
        }
        Command::Train(c) => {
            let cfg = RunConfig::load(c.config.as_deref(), &c.overrides)?;
            for p in cmd_train(&cfg, log)? {
                println!("{}", p.display());
            }
        }
        Command::Eval(c) => {
            let cfg = RunConfig::load(c.config.as_deref(), &c.overrides)?;
            let r = cmd_eval(&cfg, log)?;
            println!(
                "{}: mean AUC {:.4} ± {:.4}, precision {:.3}, recall {:.3}, F1 {:.3}",
                r.model, r.mean_auc, r.std_auc, r.mean_precision, r.mean_recall, r.mean_f1
            );
            for (name, a) in &r.anova {
                println!("  anova {name}: F {:.3}, p {:.3e}", a.f, a.p);
            }
        }
        Command::Report(c) => {
            let cfg = RunConfig::load(c.config.as_deref(), &c.overrides)?;
            let r = cmd_report(&cfg)?;
            println!("wrote {} images and {}", r.images.len(), r.boxplot.display());
        }
        Command::Config(c) => {
            print!("{}", RunConfig::load(c.config.as_deref(), &c.overrides)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
