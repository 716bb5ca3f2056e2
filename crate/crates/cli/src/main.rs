use std::process::ExitCode;

use walkrange_cli::{commands, parse_args, ParseOutcome};

fn main() -> ExitCode {
    let config = match parse_args(std::env::args_os()) {
        ParseOutcome::Config(c) => c,
        ParseOutcome::Clap(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
        ParseOutcome::Usage(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let stdout = std::io::stdout();
    match commands::execute(&config, &mut stdout.lock()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
