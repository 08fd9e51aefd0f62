use std::process::ExitCode;

use cgexplain_cli::args::Cli;
use cgexplain_cli::UsageError;
use clap::Parser;

fn main() -> ExitCode {
    // clap exits with status 2 on malformed flags
    let cli = Cli::parse();
    match cgexplain_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = if e.downcast_ref::<UsageError>().is_some() {
                ("usage", 2)
            } else {
                ("runtime", 1)
            };
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            let report = serde_json::json!({
                "error": { "kind": kind, "message": e.to_string(), "causes": causes }
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
