use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use recipe_forge::oracle::run_all;

use super::config_json;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::pipeline::write_text;

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn oracle_check(args: OracleArgs) -> Result<serde_json::Value, CliError> {
    if args.count == 0 {
        return Err(CliError::usage("--count must be positive"));
    }
    let checks = run_all(args.count, args.seed);
    for c in &checks {
        eprintln!(
            "{} {}: max error {:.3e} ({})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.max_error,
            c.detail
        );
    }
    let summary = serde_json::json!({ "checks": checks });
    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&summary).expect("report serializes");
        text.push('\n');
        write_text(out, &text)?;
        let mut manifest = RunManifest::new("oracle-check", config_json(&args));
        manifest.seed("seed", args.seed);
        manifest.output(out)?;
        manifest.write_beside(out)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::numerical(format!("oracle checks failed: {}", failed.join(", "))));
    }
    Ok(summary)
}
