mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match run::execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = run::classify(&e);
            eprintln!("error: {category}: {}", run::one_line(&e));
            ExitCode::from(code)
        }
    }
}
