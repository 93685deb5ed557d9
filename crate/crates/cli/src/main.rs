use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use patchcast::experiment::{cmd_ablate, cmd_bench, cmd_gradcheck, cmd_sweep, cmd_train, Command, ExperimentConfig};
use patchcast::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Train once and report test metrics.
    Train,
    /// Run every horizon and average them.
    Bench,
    /// One run per value of a hyperparameter axis.
    Sweep,
    /// Component ablation grid.
    Ablate,
    /// Finite-difference check of the full network.
    Gradcheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Train => Command::Train,
            Cmd::Bench => Command::Bench,
            Cmd::Sweep => Command::Sweep,
            Cmd::Ablate => Command::Ablate,
            Cmd::Gradcheck => Command::Gradcheck,
        }
    }
}

/// PatchMLP forecasting experiments.
///
/// Any config key can be overridden after the command as `--key value`
/// or `--key=value`; flags win over the config file.
#[derive(Debug, Parser)]
#[command(name = "patchcast", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

fn overrides(args: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            bail!("unexpected argument '{arg}' (overrides look like --key value)");
        };
        match flag.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().with_context(|| format!("--{flag} needs a value"))?;
                out.push((flag.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn build_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::for_command(cli.command.into());
    if let Some(path) = &cli.config {
        config.apply_file(path)?;
    }
    for (k, v) in overrides(&cli.overrides)? {
        config.set(&k, &v)?;
    }
    Ok(config)
}

fn run(cli: &Cli, config: &ExperimentConfig) -> patchcast::Result<bool> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let ok = match cli.command {
        Cmd::Train => cmd_train(config, &mut out).map(|_| true)?,
        Cmd::Bench => cmd_bench(config, &mut out).map(|_| true)?,
        Cmd::Sweep => cmd_sweep(config, &mut out).map(|_| true)?,
        Cmd::Ablate => cmd_ablate(config, &mut out).map(|_| true)?,
        Cmd::Gradcheck => cmd_gradcheck(config, &mut out)?.passed,
    };
    out.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
