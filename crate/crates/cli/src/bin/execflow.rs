use std::process::ExitCode;

use execflow_cli::{parse_config, run_stream, CliError};

fn main() -> ExitCode {
    let result = parse_config(std::env::args_os()).and_then(|cfg| run_stream(&cfg));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(CliError::Help(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("execflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
