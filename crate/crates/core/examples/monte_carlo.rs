//! A small Monte Carlo experiment through the library harness: results table,
//! CSV, config file and SVG plots written to a directory.
//!
//! Usage: `cargo run --release --example monte_carlo [OUT_DIR]`

use std::path::PathBuf;

use ris_joint::harness::{aggregate, run_trials, write_outputs, ExperimentConfig, Method};
use ris_joint::scene::SceneConfig;

fn main() -> ris_joint::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/monte_carlo"));
    let mut cfg = ExperimentConfig::with_scene("monte_carlo", SceneConfig::new(16, 6, 8, 60, 8, 0.3));
    cfg.snr_grid_db = vec![0.0, 10.0, 20.0, 30.0];
    cfg.trials = 10;
    cfg.output_path = out.clone();

    let records = run_trials(&cfg)?;
    let table = aggregate(&cfg, &records);
    write_outputs(&cfg, &table, &records, &out)?;

    for method in Method::ALL {
        for row in table.series(method) {
            let show = |v: Option<f64>| v.map(|d| format!("{d:7.2}")).unwrap_or_else(|| "      -".into());
            println!(
                "{:<9} {:>4} dB  Hr {}  Hs {}  X {}  failures {}",
                method.as_str(),
                row.snr_db,
                show(row.nmse_hr_db),
                show(row.nmse_hs_db),
                show(row.nmse_x_db),
                row.failures
            );
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}
