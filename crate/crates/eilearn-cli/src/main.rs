use std::process::ExitCode;

use clap::Parser;
use eilearn_cli::{execute, expand_argfiles, Cli};

fn main() -> ExitCode {
    let raw = std::env::args().collect::<Vec<_>>();
    let args = match expand_argfiles(raw) {
        Ok(args) => args,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(2);
        }
    };
    // Parse errors (and --help/--version) exit here with clap's codes:
    // 2 for usage errors, 0 for help.
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => err.exit(),
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
