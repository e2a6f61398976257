use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use tdcfdr_cli::{run, Cli};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(&cli, &argv, &mut out) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let _ = out.flush();
    ExitCode::from(code)
}
