mod config;
mod run;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use osc_core::Error;
use serde_json::json;

use config::{Command, Settings};

/// Numerical experiments on oscillatory integral operators with phase
/// `x^m t^k + y^n t^l`.
#[derive(Debug, Parser)]
#[command(name = "osclab", version)]
struct Cli {
    /// Experiment to run; may also come from the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML config, or a JSON report whose `config` field is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    match err {
        e if e.is_validation() => EXIT_VALIDATION,
        Error::Pole(_) | Error::Resolution(_) => EXIT_VALIDATION,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_FAILURE,
        _ => EXIT_NUMERICAL,
    }
}

fn kind(code: u8) -> &'static str {
    match code {
        EXIT_VALIDATION => "validation",
        EXIT_NUMERICAL => "numerical",
        _ => "io",
    }
}

fn write_report(out: &Path, report: &serde_json::Value) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(out.join("report.json"), text).context("writing report.json")?;
    Ok(())
}

fn fail(out: &Path, command: Option<Command>, config: &Settings, code: u8, message: String) -> ExitCode {
    eprintln!("error: {message}");
    let report = json!({
        "command": command.map(|c| c.as_str()),
        "status": "error",
        "config": config,
        "error": { "kind": kind(code), "message": message },
    });
    if let Err(e) = write_report(out, &report) {
        eprintln!("error: could not write report: {e:#}");
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut settings = Settings::default();
    let mut cmdline = cli.settings.clone();
    cmdline.command = cli.command;

    if let Some(path) = &cli.config {
        match Settings::load(path) {
            Ok(file) => settings = file,
            Err(e) => {
                let out = cmdline.out.clone().unwrap_or_else(|| PathBuf::from("out"));
                return fail(&out, cmdline.command, &cmdline, EXIT_VALIDATION, format!("{e:#}"));
            }
        }
    }
    settings.overlay(&cmdline);
    let out = settings.out.clone().unwrap_or_else(|| PathBuf::from("out"));

    let resolved = match settings.resolve() {
        Ok(r) => r,
        Err(e) => return fail(&out, settings.command, &settings, EXIT_VALIDATION, format!("{e:#}")),
    };

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(resolved.jobs()).build() {
        Ok(p) => p,
        Err(e) => return fail(&out, Some(resolved.command), &resolved.settings, EXIT_FAILURE, e.to_string()),
    };
    let artifacts = match pool.install(|| run::execute(&resolved)) {
        Ok(a) => a,
        Err(e) => {
            let code = exit_code(&e);
            return fail(&out, Some(resolved.command), &resolved.settings, code, e.to_string());
        }
    };

    let report = json!({
        "command": resolved.command.as_str(),
        "status": "ok",
        "config": resolved.settings,
        "result": artifacts.result,
    });
    let written = (|| -> anyhow::Result<()> {
        write_report(&out, &report)?;
        std::fs::write(out.join("results.csv"), &artifacts.csv).context("writing results.csv")?;
        if let Some(plot) = &artifacts.plot {
            std::fs::write(out.join("plot.svg"), plot.render()).context("writing plot.svg")?;
        }
        Ok(())
    })();
    match written {
        Ok(()) => {
            println!("{} finished; results in {}", resolved.command.as_str(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
