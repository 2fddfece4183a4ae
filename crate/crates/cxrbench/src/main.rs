use clap::Parser;

use cxrbench::cli::{error_summary_json, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}", error_summary_json(&err));
        std::process::exit(err.exit_code());
    }
}
