//! Checks a dataset directory and lists every violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rackbot::dataset::validate::validate_dataset;

#[derive(Parser)]
#[command(about = "Validate a rope-pushing dataset")]
struct Cli {
    dir: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = validate_dataset(&cli.dir);
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for v in &report.violations {
            println!("{v}");
        }
        println!(
            "{} episodes, {} frames, {} pushes, {} violations",
            report.episodes,
            report.frames,
            report.pushes,
            report.violations.len()
        );
    }
    if report.is_valid() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
