use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ris_joint::harness::{
    aggregate, check_abort, parse_config, plot_sweep, preset, run_trials, write_outputs, ExperimentConfig, Method,
    Metric, ResultTable, PRESETS,
};
use ris_joint::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_ABORT: u8 = 2;

#[derive(Parser)]
#[command(name = "ris-joint", about = "Monte Carlo NMSE experiments for joint RIS channel estimation and signal recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a preset.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
    /// Print the program version.
    Version,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (`ris-joint-config v1` format).
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `ris-joint presets`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Sweeping presets write one subdirectory per value.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated subset of proposed, lskrf, genie_ls.
    #[arg(long, value_name = "LIST")]
    methods: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "COUNT")]
    workers: Option<usize>,
    /// Also write per_trial.csv.
    #[arg(long)]
    per_trial: bool,
    /// Fill the wall_time column (makes results.csv run-dependent).
    #[arg(long)]
    timing: bool,
}

struct Plan {
    /// Where sweep summaries go; `None` for single experiments.
    sweep_dir: Option<(String, PathBuf)>,
    configs: Vec<ExperimentConfig>,
}

fn plan(args: &RunArgs) -> Result<Plan, Error> {
    let (base_name, mut configs) = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            (None, vec![parse_config(&text)?])
        }
        (None, Some(name)) => (Some(name.clone()), preset(name)?),
        (None, None) => return Err(Error::Config("pass --config PATH or --preset NAME".into())),
    };
    let methods = args.methods.as_deref().map(Method::parse_list).transpose()?;
    let sweep = configs.len() > 1;
    for cfg in configs.iter_mut() {
        if let Some(t) = args.trials {
            cfg.trials = t;
        }
        if let Some(s) = args.seed {
            cfg.master_seed = s;
        }
        if let Some(w) = args.workers {
            cfg.workers = w;
        }
        if let Some(m) = &methods {
            cfg.methods = m.clone();
        }
        cfg.per_trial |= args.per_trial;
        cfg.record_timing |= args.timing;
        if let Some(out) = &args.out {
            cfg.output_path = if sweep { out.join(&cfg.name) } else { out.clone() };
        }
        cfg.validate()?;
    }
    let sweep_dir = match (sweep, base_name) {
        (true, Some(name)) => {
            let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&name));
            Some((name, dir))
        }
        _ => None,
    };
    Ok(Plan { sweep_dir, configs })
}

fn print_table(table: &ResultTable) {
    let f = |v: Option<f64>| v.map(|x| format!("{x:9.2}")).unwrap_or_else(|| format!("{:>9}", "-"));
    println!(
        "  {:<9} {:>7} {:>9} {:>9} {:>9} {:>6} {:>8}",
        "method", "snr_db", "hr_db", "hs_db", "x_db", "used", "failures"
    );
    for r in &table.rows {
        println!(
            "  {:<9} {:>7} {} {} {} {:>6} {:>8}",
            r.method.as_str(),
            ris_joint::harness::format_real(r.snr_db),
            f(r.nmse_hr_db),
            f(r.nmse_hs_db),
            f(r.nmse_x_db),
            r.trials_used,
            r.failures
        );
    }
}

fn run(args: RunArgs) -> ExitCode {
    let plan = match plan(&args) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut finished: Vec<(String, ResultTable)> = Vec::new();
    for cfg in &plan.configs {
        let start = Instant::now();
        eprintln!(
            "running {} ({} trials x {} SNR points x {} methods)",
            cfg.name,
            cfg.trials,
            cfg.snr_grid_db.len(),
            cfg.methods.len()
        );
        let records = match run_trials(cfg) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        };
        let table = aggregate(cfg, &records);
        if let Err(e) = write_outputs(cfg, &table, &records, &cfg.output_path) {
            eprintln!("error: writing {}: {e}", cfg.output_path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
        println!("{} -> {} ({:.1} s)", cfg.name, cfg.output_path.display(), start.elapsed().as_secs_f64());
        print_table(&table);
        if let Err(e) = check_abort(cfg, &table) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ABORT);
        }
        finished.push((cfg.name.clone(), table));
    }
    if let Some((name, dir)) = &plan.sweep_dir {
        for method in &plan.configs[0].methods {
            for metric in Metric::ALL {
                let path = dir.join(format!("summary_{}_{}.svg", method.as_str(), metric.file_stem()));
                if let Err(e) = plot_sweep(&finished, *method, metric, name, &path) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
        Command::Presets => {
            for (name, summary) in PRESETS {
                println!("{name:<6} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("ris-joint {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}
