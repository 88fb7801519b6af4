use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use judgemark_cli::commands::{self, Console};
use judgemark_cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    let mut console = Console { out: &mut out, err: &mut err };
    let result = match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a, &mut console),
        Command::Score(a) => commands::cmd_score(a, &mut console),
        Command::Outliers(a) => commands::cmd_outliers(a, &mut console),
        Command::Simulate(a) => commands::cmd_simulate(a, &mut console),
        Command::Compare(a) => commands::cmd_compare(a, &mut console),
        Command::Synth(a) => commands::cmd_synth(a, &mut console),
        Command::Report(a) => commands::cmd_report(a, &mut console),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
