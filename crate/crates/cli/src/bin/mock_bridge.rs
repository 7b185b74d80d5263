//! Serves a scripted oracle over stdin/stdout using the bridge wire
//! protocol, so the pipeline can run end to end without models.

use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use defaug::oracle::protocol::serve_lines;
use defaug::oracle::ScriptedOracle;

#[derive(Parser)]
#[command(name = "defaug-mock-bridge", version)]
struct Args {
    /// JSON script describing fills, labels, tokenization and tags.
    #[arg(long)]
    script: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let oracle = match ScriptedOracle::from_json_file(&args.script) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match serve_lines(&oracle, BufReader::new(io::stdin().lock()), io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
