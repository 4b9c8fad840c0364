//! Runs a short parameter sweep over the number of BS antennas and draws one
//! summary plot with a curve per value.
//!
//! Usage: `cargo run --release --example sweep_plots [OUT_DIR]`

use std::path::PathBuf;

use ris_joint::harness::{plot_sweep, run_experiment, ExperimentConfig, Method, Metric};
use ris_joint::scene::SceneConfig;

fn main() -> ris_joint::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/sweep"));
    std::fs::create_dir_all(&out)?;
    let mut tables = Vec::new();
    for m in [2, 4, 6] {
        let name = format!("m{m}");
        let mut cfg = ExperimentConfig::with_scene(&name, SceneConfig::new(12, m, 8, 50, 8, 0.2));
        cfg.snr_grid_db = vec![0.0, 10.0, 20.0];
        cfg.trials = 5;
        cfg.methods = vec![Method::Proposed];
        let table = run_experiment(&cfg)?;
        tables.push((name, table));
    }
    let path = out.join("sweep_x.svg");
    plot_sweep(&tables, Method::Proposed, Metric::X, "M sweep", &path)?;
    for (name, t) in &tables {
        let xs: Vec<String> = t.series(Method::Proposed).iter().map(|r| format!("{:.2}", r.nmse_x_db.unwrap_or(f64::NAN))).collect();
        println!("{name}: NMSE X [dB] = {}", xs.join(", "));
    }
    println!("wrote {}", path.display());
    Ok(())
}
