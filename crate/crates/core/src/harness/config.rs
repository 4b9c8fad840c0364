//! Flat `key = value` experiment files.
//!
//! The first non-blank, non-comment line must be [`CONFIG_HEADER`]. Lines
//! starting with `#` are comments. Every key may appear at most once and
//! unknown keys are rejected. Keys that are omitted take the value from
//! [`ExperimentConfig::with_scene`], except the scene dimensions `k m n t p`
//! and `beta`, which are required.
//!
//! ```text
//! ris-joint-config v1
//! name = fig3
//! k = 32
//! m = 12
//! n = 16
//! t = 100
//! p = 16
//! beta = 0.2
//! snr_grid_db = 0, 10, 20, inf
//! methods = proposed, genie_ls
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use super::{AlsInit, ExperimentConfig, Method};
use crate::ambiguity::AlignmentMode;
use crate::parafac::LsSolver;
use crate::harness::results::{format_real, parse_real};
use crate::scene::SceneConfig;
use crate::{Error, Result};

pub const CONFIG_HEADER: &str = "ris-joint-config v1";

const KEYS: &[&str] = &[
    "name",
    "k",
    "m",
    "n",
    "t",
    "p",
    "beta",
    "pilot_len",
    "sigma_x2",
    "sigma_h2",
    "snr_grid_db",
    "trials",
    "methods",
    "als_epsilon",
    "als_i_max",
    "als_init",
    "als_solver",
    "bigamp_i_max",
    "bigamp_epsilon",
    "bigamp_damping",
    "bigamp_noise_var",
    "alignment_mode",
    "master_seed",
    "output_path",
    "workers",
    "per_trial",
    "record_timing",
];

const REQUIRED: &[&str] = &["k", "m", "n", "t", "p", "beta"];

fn err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn take<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((line, raw)) => parse(&raw)
                .map(Some)
                .map_err(|e| err(line, format!("{key}: {e}"))),
        }
    }
}

fn usize_val(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got '{s}'"))
}

fn u64_val(s: &str) -> std::result::Result<u64, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got '{s}'"))
}

fn real_val(s: &str) -> std::result::Result<f64, String> {
    parse_real(s).ok_or_else(|| format!("expected a number, got '{s}'"))
}

fn bool_val(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn grid_val(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|v| real_val(v.trim())).collect()
}

/// Parses an experiment file. All failures are [`Error::Config`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        Some((_, h)) if h == CONFIG_HEADER => {}
        Some((i, h)) => {
            return Err(err(i, format!("expected header '{CONFIG_HEADER}', found '{h}'")));
        }
        None => return Err(Error::Config("empty config file".into())),
    }

    let mut map = BTreeMap::new();
    for (i, line) in lines {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(i, format!("expected 'key = value', found '{line}'")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(i, format!("unknown key '{key}'")));
        }
        if map.insert(key.to_string(), (i, value.trim().to_string())).is_some() {
            return Err(err(i, format!("duplicate key '{key}'")));
        }
    }
    for key in REQUIRED {
        if !map.contains_key(*key) {
            return Err(Error::Config(format!("missing required key '{key}'")));
        }
    }

    let mut e = Entries(map);
    let dim = |e: &mut Entries, key: &str| -> Result<usize> { Ok(e.take(key, usize_val)?.expect("required")) };
    let k = dim(&mut e, "k")?;
    let m = dim(&mut e, "m")?;
    let n = dim(&mut e, "n")?;
    let t = dim(&mut e, "t")?;
    let p = dim(&mut e, "p")?;
    let beta = e.take("beta", real_val)?.expect("required");

    let name = e.take("name", |s| Ok(s.to_string()))?.unwrap_or_else(|| "experiment".into());
    let mut cfg = ExperimentConfig::with_scene(&name, SceneConfig::new(k, m, n, t, p, beta));
    if let Some(v) = e.take("pilot_len", usize_val)? {
        cfg.scene.pilot_len = v;
    }
    if let Some(v) = e.take("sigma_x2", real_val)? {
        cfg.scene.sigma_x2 = v;
    }
    if let Some(v) = e.take("sigma_h2", real_val)? {
        cfg.scene.sigma_h2 = v;
    }
    if let Some(v) = e.take("snr_grid_db", grid_val)? {
        cfg.snr_grid_db = v;
    }
    if let Some(v) = e.take("trials", usize_val)? {
        cfg.trials = v;
    }
    if let Some(v) = e.take("methods", |s| Method::parse_list(s).map_err(|e| e.to_string()))? {
        cfg.methods = v;
    }
    if let Some(v) = e.take("als_epsilon", real_val)? {
        cfg.als_opts.epsilon = v;
    }
    if let Some(v) = e.take("als_i_max", usize_val)? {
        cfg.als_opts.i_max = v;
    }
    if let Some(v) = e.take("als_init", |s| s.parse::<AlsInit>().map_err(|e| e.to_string()))? {
        cfg.als_init = v;
    }
    if let Some(v) = e.take("als_solver", |s| s.parse::<LsSolver>().map_err(|e| e.to_string()))? {
        cfg.als_opts.solver = v;
    }
    if let Some(v) = e.take("bigamp_i_max", usize_val)? {
        cfg.bigamp_opts.i_max = v;
    }
    if let Some(v) = e.take("bigamp_epsilon", real_val)? {
        cfg.bigamp_opts.epsilon = v;
    }
    if let Some(v) = e.take("bigamp_damping", real_val)? {
        cfg.bigamp_opts.damping = v;
    }
    if let Some(v) = e.take("bigamp_noise_var", real_val)? {
        cfg.bigamp_opts.assumed_noise_var = v;
    }
    if let Some(v) = e.take("alignment_mode", |s| s.parse::<AlignmentMode>().map_err(|e| e.to_string()))? {
        cfg.alignment_mode = v;
    }
    if let Some(v) = e.take("master_seed", u64_val)? {
        cfg.master_seed = v;
    }
    if let Some(v) = e.take("output_path", |s| Ok(PathBuf::from(s)))? {
        cfg.output_path = v;
    }
    if let Some(v) = e.take("workers", usize_val)? {
        cfg.workers = v;
    }
    if let Some(v) = e.take("per_trial", bool_val)? {
        cfg.per_trial = v;
    }
    if let Some(v) = e.take("record_timing", bool_val)? {
        cfg.record_timing = v;
    }
    debug_assert!(e.0.is_empty(), "every known key is consumed");

    cfg.validate()?;
    Ok(cfg)
}

/// Renders a config so that [`parse_config`] returns an equal value.
pub fn write_config(cfg: &ExperimentConfig) -> String {
    let s = &cfg.scene;
    let grid: Vec<String> = cfg.snr_grid_db.iter().map(|v| format_real(*v)).collect();
    let methods: Vec<&str> = cfg.methods.iter().map(|m| m.as_str()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "{CONFIG_HEADER}");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("name", cfg.name.clone());
    kv("k", s.k.to_string());
    kv("m", s.m.to_string());
    kv("n", s.n.to_string());
    kv("t", s.t.to_string());
    kv("p", s.p.to_string());
    kv("beta", format_real(s.beta));
    kv("pilot_len", s.pilot_len.to_string());
    kv("sigma_x2", format_real(s.sigma_x2));
    kv("sigma_h2", format_real(s.sigma_h2));
    kv("snr_grid_db", grid.join(", "));
    kv("trials", cfg.trials.to_string());
    kv("methods", methods.join(", "));
    kv("als_epsilon", format_real(cfg.als_opts.epsilon));
    kv("als_i_max", cfg.als_opts.i_max.to_string());
    kv("als_init", cfg.als_init.as_str().to_string());
    kv("als_solver", cfg.als_opts.solver.as_str().to_string());
    kv("bigamp_i_max", cfg.bigamp_opts.i_max.to_string());
    kv("bigamp_epsilon", format_real(cfg.bigamp_opts.epsilon));
    kv("bigamp_damping", format_real(cfg.bigamp_opts.damping));
    kv("bigamp_noise_var", format_real(cfg.bigamp_opts.assumed_noise_var));
    kv("alignment_mode", cfg.alignment_mode.as_str().to_string());
    kv("master_seed", cfg.master_seed.to_string());
    kv("output_path", cfg.output_path.display().to_string());
    kv("workers", cfg.workers.to_string());
    kv("per_trial", cfg.per_trial.to_string());
    kv("record_timing", cfg.record_timing.to_string());
    out
}
