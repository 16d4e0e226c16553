use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use nitool::args::Cli;
use nitool::commands::run;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.exit as u8)
        }
        Err(e) => {
            eprintln!("nitool: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
