//! Per-trial pipelines, parallel fan-out and aggregation.
//!
//! A trial draws one channel pair and one transmit frame, then for every SNR
//! point draws fresh noise and runs each configured method on the same
//! received tensor. Randomness comes only from [`RngStream`]s whose ids are
//! fixed by `(trial, purpose, snr index)`, and trials are reduced in index
//! order, so results do not depend on the number of workers.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::{plot, AlsInit, ExperimentConfig, Method, ResultRow, ResultTable};
use crate::ambiguity::{align_bilinear, align_parafac, first_row_normalized, nmse, to_db, AlignmentMode, DEFAULT_DB_FLOOR};
use crate::baselines::{genie_ls_recover, lskrf_from_views};
use crate::bigamp::{bigamp_run, PriorDescriptor, StopReason};
use crate::linalg::{CMatrix, RngStream};
use crate::parafac::{als_estimate, unfold, AlsOptions, InitMode, UnfoldedViews};
use crate::scene::{gen_channels, gen_signal, synthesize_received, ChannelPair, PhaseSchedule, SignalFrame};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Channels = 0,
    Signal = 1,
    Noise = 2,
    AlsInit = 3,
    BigAmpInit = 4,
}

/// Stream id layout: trial in the high bits, then purpose, then SNR index.
pub fn stream_id(trial: usize, purpose: Purpose, snr_index: usize) -> u64 {
    ((trial as u64) << 16) | ((purpose as u64) << 8) | (snr_index as u64 & 0xff)
}

/// Metrics and diagnostics of one method on one (trial, SNR) instance.
/// NMSE values are linear.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialOutcome {
    pub nmse_hr: Option<f64>,
    pub nmse_hs: Option<f64>,
    pub nmse_x: Option<f64>,
    pub als_iters: Option<usize>,
    pub bigamp_iters: Option<usize>,
    /// Set on errors and on divergent BiG-AMP runs (whose best iterate still
    /// provides metrics).
    pub failed: bool,
    pub bigamp_stop: Option<String>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl TrialOutcome {
    fn from_error(e: Error) -> Self {
        TrialOutcome {
            failed: true,
            error: Some(e.to_string()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub snr_index: usize,
    pub snr_db: f64,
    pub method: Method,
    pub outcome: TrialOutcome,
}

/// Ground truth shared by all SNR points and methods of one trial.
struct Truth {
    ch: ChannelPair,
    sig: SignalFrame,
    ps: PhaseSchedule,
    hr_ref: CMatrix,
    hs_ref: CMatrix,
}

fn make_truth(cfg: &ExperimentConfig, trial: usize) -> Result<Truth> {
    let seed = cfg.master_seed;
    let ch = gen_channels(&cfg.scene, &mut RngStream::new(seed, stream_id(trial, Purpose::Channels, 0)))?;
    let sig = gen_signal(&cfg.scene, &mut RngStream::new(seed, stream_id(trial, Purpose::Signal, 0)))?;
    let ps = PhaseSchedule::for_scene(cfg.scene.p, cfg.scene.n)?;
    let (hr_ref, hs_ref) = match cfg.alignment_mode {
        AlignmentMode::FirstRowNormalization => {
            let (hr_n, _, f) = first_row_normalized(&ch.hr, &ch.equivalent(&sig.x))?;
            let hs_n = CMatrix::from_fn(ch.hs.nrows(), ch.hs.ncols(), |r, c| ch.hs[(r, c)] / f[r]);
            (hr_n, hs_n)
        }
        _ => (ch.hr.clone(), ch.hs.clone()),
    };
    Ok(Truth { ch, sig, ps, hr_ref, hs_ref })
}

fn als_options(cfg: &ExperimentConfig, trial: usize, s: usize) -> AlsOptions {
    let init_mode = match cfg.als_init {
        AlsInit::Eigen => InitMode::Eigen,
        AlsInit::Random => InitMode::Random {
            seed: cfg.master_seed,
            stream: stream_id(trial, Purpose::AlsInit, s),
        },
    };
    AlsOptions { init_mode, ..cfg.als_opts }
}

/// Second stage shared by the proposed method and LSKRF: align the channel
/// estimates, factor the aligned `He` with BiG-AMP, fix the bilinear scale on
/// the pilots and score everything.
fn bigamp_stage(
    cfg: &ExperimentConfig,
    truth: &Truth,
    hr_hat: &CMatrix,
    he_hat: &CMatrix,
    rng: &mut RngStream,
    out: &mut TrialOutcome,
) -> Result<()> {
    let (hr_al, he_al, _) = align_parafac(hr_hat, he_hat, &truth.hr_ref, cfg.alignment_mode)?;
    out.nmse_hr = Some(nmse(&hr_al, &truth.hr_ref)?);

    let sc = &cfg.scene;
    let prior_x = PriorDescriptor::bernoulli_gaussian(sc.beta, sc.sigma_x2)
        .with_support(truth.sig.support.clone())
        .with_pinned_columns(&truth.sig.x, &truth.sig.pilot_cols);
    let prior_h = PriorDescriptor::gaussian(sc.sigma_h2);
    let res = bigamp_run(&he_al, &prior_x, &prior_h, &cfg.bigamp_opts, rng)?;
    out.bigamp_iters = Some(res.diagnostics.iterations);
    out.bigamp_stop = Some(
        match res.diagnostics.stop_reason {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::Diverged => "diverged",
        }
        .to_string(),
    );
    out.failed |= res.diagnostics.diverged();

    let (hs_al, x_al, _) = align_bilinear(&res.hs_hat, &res.x_hat, &truth.sig.pilot_cols, &truth.sig.pilot_block())?;
    out.nmse_hs = Some(nmse(&hs_al, &truth.hs_ref)?);
    out.nmse_x = Some(nmse(&x_al, &truth.sig.x)?);
    Ok(())
}

fn run_method(
    cfg: &ExperimentConfig,
    truth: &Truth,
    views: &UnfoldedViews,
    method: Method,
    trial: usize,
    s: usize,
) -> TrialOutcome {
    let start = Instant::now();
    let mut out = TrialOutcome::default();
    let mut bigamp_rng = RngStream::new(cfg.master_seed, stream_id(trial, Purpose::BigAmpInit, s));
    let result: Result<()> = (|| match method {
        Method::Proposed => {
            let als = als_estimate(views, &truth.ps, &als_options(cfg, trial, s))?;
            out.als_iters = Some(als.iterations);
            bigamp_stage(cfg, truth, &als.hr_hat, &als.he_hat, &mut bigamp_rng, &mut out)
        }
        Method::Lskrf => {
            let est = lskrf_from_views(views, &truth.ps)?;
            let (hr, he) = (est.hr_hat.expect("LSKRF returns Hr"), est.he_hat.expect("LSKRF returns He"));
            bigamp_stage(cfg, truth, &hr, &he, &mut bigamp_rng, &mut out)
        }
        Method::GenieLs => {
            let est = genie_ls_recover(&views.y2, &truth.ch.hr, &truth.ch.hs, &truth.ps)?;
            out.nmse_x = Some(nmse(&est.x_hat.expect("genie LS returns X"), &truth.sig.x)?);
            Ok(())
        }
    })();
    if let Err(e) = result {
        // Partial metrics from a failed pipeline would bias the averages.
        out = TrialOutcome {
            als_iters: out.als_iters,
            bigamp_iters: out.bigamp_iters,
            ..TrialOutcome::from_error(e)
        };
    }
    out.seconds = start.elapsed().as_secs_f64();
    out
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Vec<TrialRecord> {
    let mut records = Vec::with_capacity(cfg.snr_grid_db.len() * cfg.methods.len());
    let truth = make_truth(cfg, trial);
    for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let views = truth.as_ref().map_err(|e| Error::Contract(e.to_string())).and_then(|t| {
            let mut rng = RngStream::new(cfg.master_seed, stream_id(trial, Purpose::Noise, s));
            synthesize_received(&t.ch, &t.sig, &t.ps, snr, &mut rng).map(|y| unfold(&y))
        });
        for &method in &cfg.methods {
            let outcome = match (&truth, &views) {
                (Ok(t), Ok(v)) => run_method(cfg, t, v, method, trial, s),
                (Err(e), _) => TrialOutcome::from_error(Error::Contract(format!("scene generation: {e}"))),
                (_, Err(e)) => TrialOutcome::from_error(Error::Contract(format!("synthesis: {e}"))),
            };
            records.push(TrialRecord {
                trial,
                snr_index: s,
                snr_db: snr,
                method,
                outcome,
            });
        }
    }
    records
}

/// Runs every trial and returns the records ordered by (trial, SNR, method).
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let per_trial: Vec<Vec<TrialRecord>> =
        pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect());
    Ok(per_trial.into_iter().flatten().collect())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Averages linear NMSE over the trials of each (method, SNR) cell in trial
/// order and converts to dB.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> ResultTable {
    let mut rows = Vec::with_capacity(cfg.methods.len() * cfg.snr_grid_db.len());
    for &method in &cfg.methods {
        for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
            let cell: Vec<&TrialOutcome> = records
                .iter()
                .filter(|r| r.method == method && r.snr_index == s)
                .map(|r| &r.outcome)
                .collect();
            let db = |f: fn(&TrialOutcome) -> Option<f64>| {
                mean(cell.iter().filter_map(|o| f(o))).map(|v| to_db(v, DEFAULT_DB_FLOOR))
            };
            rows.push(ResultRow {
                method,
                snr_db: snr,
                nmse_hr_db: db(|o| o.nmse_hr),
                nmse_hs_db: db(|o| o.nmse_hs),
                nmse_x_db: db(|o| o.nmse_x),
                mean_als_iters: mean(cell.iter().filter_map(|o| o.als_iters.map(|v| v as f64))),
                mean_bigamp_iters: mean(cell.iter().filter_map(|o| o.bigamp_iters.map(|v| v as f64))),
                trials_used: cell.iter().filter(|o| o.nmse_x.is_some()).count(),
                failures: cell.iter().filter(|o| o.failed).count(),
                wall_time: cfg.record_timing.then(|| cell.iter().map(|o| o.seconds).sum()),
            });
        }
    }
    ResultTable { rows }
}

/// [`Error::Abort`] if more than half the trials failed at any grid point.
pub fn check_abort(cfg: &ExperimentConfig, table: &ResultTable) -> Result<()> {
    for r in &table.rows {
        if 2 * r.failures > cfg.trials {
            return Err(Error::Abort(format!(
                "{} of {} trials failed for method {} at SNR {} dB",
                r.failures, cfg.trials, r.method, r.snr_db
            )));
        }
    }
    Ok(())
}

/// Runs, aggregates and applies the abort rule. Writes nothing.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let records = run_trials(cfg)?;
    let table = aggregate(cfg, &records);
    check_abort(cfg, &table)?;
    Ok(table)
}

/// Writes `results.csv`, the metric plots, the effective `config.txt` and,
/// when enabled, `per_trial.csv` into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, table: &ResultTable, records: &[TrialRecord], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    table.write_csv(&dir.join("results.csv"))?;
    std::fs::write(dir.join("config.txt"), super::write_config(cfg))?;
    plot::write_plots(table, &cfg.name, dir)?;
    if cfg.per_trial {
        super::write_per_trial_csv(records, &dir.join("per_trial.csv"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneConfig;

    fn small(trials: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::with_scene("small", SceneConfig::new(6, 2, 4, 12, 4, 0.3));
        cfg.trials = trials;
        cfg.snr_grid_db = vec![5.0, 25.0, f64::INFINITY];
        cfg
    }

    #[test]
    fn stream_ids_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for trial in 0..20 {
            for p in [Purpose::Channels, Purpose::Signal, Purpose::Noise, Purpose::AlsInit, Purpose::BigAmpInit] {
                for s in 0..10 {
                    assert!(seen.insert(stream_id(trial, p, s)));
                }
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = small(6);
        a.workers = 1;
        let mut b = a.clone();
        b.workers = 3;
        let (ta, tb) = (run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
        assert_eq!(ta.to_csv_string().unwrap(), tb.to_csv_string().unwrap());
    }

    #[test]
    fn table_shape_and_noiseless_genie() {
        let cfg = small(3);
        let table = run_experiment(&cfg).unwrap();
        assert_eq!(table.rows.len(), 9);
        let g = table.row(Method::GenieLs, f64::INFINITY).unwrap();
        assert_eq!(g.nmse_x_db, Some(DEFAULT_DB_FLOOR));
        assert_eq!((g.nmse_hr_db, g.nmse_hs_db, g.mean_als_iters), (None, None, None));
        let p = table.row(Method::Proposed, 25.0).unwrap();
        assert!(p.nmse_hr_db.is_some() && p.mean_als_iters.is_some() && p.mean_bigamp_iters.is_some());
        assert!(table.rows.iter().all(|r| r.wall_time.is_none()));
    }

    #[test]
    fn aggregation_of_identical_values_is_exact() {
        let cfg = {
            let mut c = small(4);
            c.snr_grid_db = vec![10.0];
            c.methods = vec![Method::GenieLs];
            c
        };
        let v = 0.012345;
        let records: Vec<TrialRecord> = (0..4)
            .map(|t| TrialRecord {
                trial: t,
                snr_index: 0,
                snr_db: 10.0,
                method: Method::GenieLs,
                outcome: TrialOutcome { nmse_x: Some(v), ..Default::default() },
            })
            .collect();
        let table = aggregate(&cfg, &records);
        assert_eq!(table.rows[0].nmse_x_db, Some(to_db(v, DEFAULT_DB_FLOOR)));
        assert_eq!(table.rows[0].trials_used, 4);
    }

    #[test]
    fn abort_when_most_trials_fail() {
        let mut cfg = small(4);
        cfg.snr_grid_db = vec![10.0];
        cfg.methods = vec![Method::Proposed];
        let mk = |failed: bool| TrialOutcome { failed, nmse_x: Some(0.1), ..Default::default() };
        let records: Vec<TrialRecord> = (0..4)
            .map(|t| TrialRecord { trial: t, snr_index: 0, snr_db: 10.0, method: Method::Proposed, outcome: mk(t < 2) })
            .collect();
        assert!(check_abort(&cfg, &aggregate(&cfg, &records)).is_ok());
        let records: Vec<TrialRecord> = (0..4)
            .map(|t| TrialRecord { trial: t, snr_index: 0, snr_db: 10.0, method: Method::Proposed, outcome: mk(t < 3) })
            .collect();
        assert!(matches!(check_abort(&cfg, &aggregate(&cfg, &records)), Err(Error::Abort(_))));
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(2);
        cfg.per_trial = true;
        let records = run_trials(&cfg).unwrap();
        let table = aggregate(&cfg, &records);
        write_outputs(&cfg, &table, &records, dir.path()).unwrap();
        for f in ["results.csv", "config.txt", "per_trial.csv", "nmse_x.svg", "nmse_hr.svg", "nmse_hs.svg"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let back = ResultTable::read_csv(&dir.path().join("results.csv")).unwrap();
        assert_eq!(back, table);
        let per = std::fs::read_to_string(dir.path().join("per_trial.csv")).unwrap();
        assert_eq!(per.lines().count(), 1 + 2 * 3 * 3);
        assert_eq!(super::super::parse_config(&std::fs::read_to_string(dir.path().join("config.txt")).unwrap()).unwrap(), cfg);
    }
}
