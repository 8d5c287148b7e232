use std::process::ExitCode;

use clap::Parser;
use wbary_cli::{exit_code, run, status_tag, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not failures
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error ({}): {e}", status_tag(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
