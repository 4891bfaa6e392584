//! `rgscale`: configuration-driven front end for the block-spin analyses.

mod config;
mod output;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{Format, RunConfig};
use output::Sink;
use run::RunError;

#[derive(Parser)]
#[command(name = "rgscale", version, about = "Block-spin scaling analyses of synthetic correlation hierarchies")]
struct Cli {
    /// Worker threads for the parallel R loop. Results do not depend on it.
    #[arg(long, global = true, env = "RGSCALE_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between moment and cumulant hierarchies.
    Truncate(RunArgs),
    /// Scaled truncated correlation series over an R grid.
    ScaleRun(RunArgs),
    /// Critical exponent estimation.
    FitExponent(RunArgs),
    /// Fixed-point classification from channel exponents.
    Classify(RunArgs),
    /// Commutator decay, KMS checks, constancy.
    Quantum(RunArgs),
    /// Critical slowing-down experiment.
    Slowdown(RunArgs),
    /// Long-format CSV and SVG chart from series CSV files.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set analysis.l=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Series CSV files; one line per file.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Column for the horizontal axis (default: first).
    #[arg(long)]
    x: Option<String>,
    /// Column for the vertical axis (default: second).
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    log_x: bool,
    #[arg(long)]
    log_y: bool,
    #[arg(long)]
    title: Option<String>,
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("rgscale: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn load_config(args: &RunArgs, expected: &str) -> Result<(RunConfig, Value), RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Validation(format!("cannot read {}: {e}", args.config.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| RunError::Validation(format!("{}: not valid JSON: {e}", args.config.display())))?;
    config::apply_overrides(&mut doc, &args.set).map_err(RunError::Validation)?;
    if let Some(out) = &args.out {
        config::apply_overrides(&mut doc, &[format!("output.directory={}", json!(out.display().to_string()))])
            .map_err(RunError::Validation)?;
    }
    // from_str rather than from_value: integer map keys arrive as strings
    let cfg: RunConfig = serde_json::from_str(&doc.to_string())
        .map_err(|e| RunError::Validation(format!("invalid configuration: {e}")))?;
    if cfg.analysis.name() != expected {
        return Err(RunError::Validation(format!(
            "configuration describes a {} analysis, not {expected}",
            cfg.analysis.name()
        )));
    }
    // echo with defaults filled in; the output directory does not affect results
    let mut echo = serde_json::to_value(&cfg).expect("config serializes");
    if let Some(out) = echo.get_mut("output").and_then(Value::as_object_mut) {
        out.remove("directory");
    }
    Ok((cfg, echo))
}

fn run_analysis(args: &RunArgs, name: &str, workers: Option<usize>) -> Result<Option<String>, RunError> {
    let (cfg, echo) = load_config(args, name)?;
    let mut sink = Sink::new(
        &cfg.output.directory,
        cfg.output.formats.contains(&Format::Csv),
        cfg.output.formats.contains(&Format::Json),
    )?;
    let outcome = match workers {
        Some(0) => return Err(RunError::Validation("--workers must be >= 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| RunError::Validation(format!("thread pool: {e}")))?
            .install(|| run::execute(&cfg, &mut sink))?,
        None => run::execute(&cfg, &mut sink)?,
    };
    let mut outputs = sink.written.clone();
    outputs.push("manifest.json".into());
    let manifest = json!({
        "tool": "rgscale",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config": echo,
        "seeds": outcome.seeds,
        "outputs": outputs,
        "status": if outcome.flagged.is_some() { "flagged" } else { "ok" },
    });
    sink.always_json("manifest.json", &manifest)?;
    Ok(outcome.flagged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, name) = match &cli.command {
        Command::Plot(p) => {
            let opts = plot::PlotOptions {
                x_column: p.x.clone(),
                y_column: p.y.clone(),
                log_x: p.log_x,
                log_y: p.log_y,
                title: p.title.clone(),
            };
            return match plot::emit_plot_data(&p.inputs, &p.out, &opts) {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => fail(&RunError::Validation(e)),
            };
        }
        Command::Truncate(a) => (a, "truncate"),
        Command::ScaleRun(a) => (a, "scale-run"),
        Command::FitExponent(a) => (a, "fit-exponent"),
        Command::Classify(a) => (a, "classify"),
        Command::Quantum(a) => (a, "quantum"),
        Command::Slowdown(a) => (a, "slowdown"),
    };
    match run_analysis(args, name, cli.workers) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(msg)) => fail(&RunError::Numerical(msg)),
        Err(e) => fail(&e),
    }
}
