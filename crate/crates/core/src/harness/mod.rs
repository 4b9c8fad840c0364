//! Seeded Monte Carlo experiments: configuration, presets, the trial runner,
//! result tables and their CSV/SVG renderings.

mod config;
mod plot;
mod presets;
mod results;
mod runner;

use std::path::PathBuf;

pub use config::{parse_config, write_config, CONFIG_HEADER};
pub use plot::{plot_metric, plot_sweep, write_plots, Metric};
pub use presets::{preset, preset_names, PRESETS};
pub use results::{
    format_real, parse_real, write_per_trial_csv, ResultRow, ResultTable, PER_TRIAL_HEADER, RESULT_HEADER,
};
pub use runner::{
    aggregate, check_abort, run_experiment, run_trials, stream_id, write_outputs, Purpose, TrialOutcome, TrialRecord,
};

use crate::ambiguity::AlignmentMode;
use crate::bigamp::BigAmpOptions;
use crate::parafac::AlsOptions;
use crate::scene::SceneConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// ALS channel estimation followed by BiG-AMP.
    Proposed,
    /// LSKRF channel estimation followed by BiG-AMP.
    Lskrf,
    /// LS signal recovery with the true channels.
    GenieLs,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::Lskrf, Method::GenieLs];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Lskrf => "lskrf",
            Method::GenieLs => "genie_ls",
        }
    }

    /// Parses a comma-separated list, rejecting duplicates and empty lists.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if out.contains(&m) {
                return Err(Error::Config(format!("method '{part}' listed twice")));
            }
            out.push(m);
        }
        if out.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        Ok(out)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "lskrf" => Ok(Method::Lskrf),
            "genie_ls" => Ok(Method::GenieLs),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected proposed, lskrf or genie_ls)"
            ))),
        }
    }
}

/// How the ALS starting point is chosen in an experiment. Random starts are
/// drawn from a per-(trial, SNR) stream so runs stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlsInit {
    Eigen,
    Random,
}

impl AlsInit {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlsInit::Eigen => "eigen",
            AlsInit::Random => "random",
        }
    }
}

impl std::str::FromStr for AlsInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigen" => Ok(AlsInit::Eigen),
            "random" => Ok(AlsInit::Random),
            other => Err(Error::Config(format!("unknown ALS init '{other}' (expected eigen or random)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Label used for output file names and plot titles.
    pub name: String,
    /// `scene.snr_db` is ignored; the grid below is swept instead.
    pub scene: SceneConfig,
    /// SNR points in dB; `f64::INFINITY` means noiseless.
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// `init_mode` is overridden per trial according to `als_init`.
    pub als_opts: AlsOptions,
    pub als_init: AlsInit,
    pub bigamp_opts: BigAmpOptions,
    pub alignment_mode: AlignmentMode,
    pub master_seed: u64,
    pub output_path: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub per_trial: bool,
    /// Fill the `wall_time` column. Off by default because timings make the
    /// results file differ from run to run.
    pub record_timing: bool,
}

/// Upper bound on SNR grid points, set by the RNG stream layout.
pub const MAX_SNR_POINTS: usize = 256;

impl ExperimentConfig {
    /// Defaults shared by every preset; `scene` must be supplied.
    pub fn with_scene(name: &str, scene: SceneConfig) -> Self {
        Self {
            name: name.to_string(),
            scene,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trials: 500,
            methods: Method::ALL.to_vec(),
            als_opts: AlsOptions::default(),
            als_init: AlsInit::Random,
            bigamp_opts: BigAmpOptions {
                damping: 0.8,
                ..BigAmpOptions::default()
            },
            alignment_mode: AlignmentMode::DiagonalLs,
            master_seed: 1,
            output_path: PathBuf::from("out").join(name),
            workers: 0,
            per_trial: false,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.name.is_empty() || self.name.contains(|c: char| c.is_whitespace() || c == '/' || c == '\\') {
            return Err(Error::Config(format!(
                "name '{}' must be nonempty without whitespace or path separators",
                self.name
            )));
        }
        self.scene.validate().map_err(cfg_err)?;
        if self.scene.pilot_len == 0 {
            return Err(Error::Config("pilot_len must be >= 1 to resolve the bilinear scale".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("snr_grid_db must not be empty".into()));
        }
        if self.snr_grid_db.len() > MAX_SNR_POINTS {
            return Err(Error::Config(format!(
                "at most {MAX_SNR_POINTS} SNR points are supported"
            )));
        }
        if let Some(bad) = self.snr_grid_db.iter().find(|v| v.is_nan() || **v == f64::NEG_INFINITY) {
            return Err(Error::Config(format!("invalid SNR value {bad}")));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if self.alignment_mode == AlignmentMode::PilotLs {
            return Err(Error::Config(
                "alignment_mode applies to the channel stage: use diagonal_ls or first_row_normalization".into(),
            ));
        }
        self.als_opts.validate().map_err(cfg_err)?;
        self.bigamp_opts.validate().map_err(cfg_err)?;
        Ok(())
    }
}
