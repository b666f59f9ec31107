use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use execflow_cli::plot::parse_assignment;
use execflow_cli::{emit_plot_file, CliError, Layout, PlotSpec};

/// Extracts columns from an execflow output table for plotting.
#[derive(Debug, Parser)]
#[command(name = "execflow-plot", version)]
struct Args {
    /// Output table of `execflow` (plain or gzip).
    #[arg(short, long)]
    input: PathBuf,
    /// Destination; `-` for stdout.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Comma-separated column names; all columns when omitted.
    #[arg(short, long, value_delimiter = ',')]
    columns: Vec<String>,
    /// COLUMN=VALUE added after scaling, e.g. I.Gamma0=694.
    #[arg(long, value_parser = parse_assignment)]
    shift: Vec<(String, f64)>,
    /// COLUMN=VALUE multiplier.
    #[arg(long, value_parser = parse_assignment)]
    scale: Vec<(String, f64)>,
    /// `table` or `pairs` (abscissa repeated before every series).
    #[arg(long, default_value = "table")]
    layout: Layout,
}

fn run() -> Result<u64, CliError> {
    let args = Args::try_parse().map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    let mut spec = PlotSpec { columns: args.columns, layout: args.layout, ..Default::default() };
    for (name, v) in &args.scale {
        spec = spec.scale(name, *v);
    }
    for (name, v) in &args.shift {
        spec = spec.shift(name, *v);
    }
    emit_plot_file(&args.input, &args.output, &spec)
}

fn main() -> ExitCode {
    match run() {
        Ok(_) => ExitCode::SUCCESS,
        Err(CliError::Help(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("execflow-plot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
