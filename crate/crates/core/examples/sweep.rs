//! Runs a sweep from a TOML configuration and writes result.csv and
//! result.json.
//!
//! ```text
//! cargo run --release --example sweep -- [config.toml] [output_dir]
//! ```
//!
//! The default configuration is `examples/configs/sweep.toml`.

use std::path::PathBuf;

use crowdpoison::experiment::{emit_report, run_experiment, ExperimentConfig, ReportFormat};

fn main() -> crowdpoison::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/sweep.toml"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("crowdpoison-sweep"));

    let cfg = ExperimentConfig::from_path(&config)?;
    let result = run_experiment(&cfg)?;
    for path in emit_report(&result, &out, &[ReportFormat::Csv, ReportFormat::Json])? {
        println!("wrote {}", path.display());
    }
    println!("{:>8} {:>10} {:>8} {:>12} {:>12}", "alpha", "knowledge", "trials", "mean", "std");
    for p in &result.aggregated {
        println!(
            "{:>8.2} {:>10.2} {:>8} {:>12.4} {:>12.4}",
            p.attack_fraction, p.knowledge_fraction, p.trials, p.mean_error, p.std_error
        );
    }
    if !result.failures.is_empty() {
        eprintln!("{} trials failed", result.failures.len());
    }
    Ok(())
}
