//! Built-in experiment definitions.
//!
//! Every preset uses ALS with `epsilon = 1e-5` and `i_max = 15`, 500 trials
//! and an SNR grid of 0 to 30 dB in 5 dB steps. Sweeping presets expand into
//! one configuration per swept value, named `<preset>_<param><value>`.

use super::ExperimentConfig;
use crate::scene::SceneConfig;
use crate::{Error, Result};

/// `(name, summary)` for each preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig3", "NMSE vs SNR, K=32 N=16 M=12 T=100 P=16 beta=0.2, all methods"),
    ("fig4", "channel NMSE vs SNR at N=20 (P=16 < N), ALS against LSKRF"),
    ("fig5", "NMSE vs SNR for M in {4, 8, 12, 16}, K=16 N=32 T=100 P=16 beta=0.2"),
    ("fig6", "NMSE vs SNR for beta in {0.1, 0.2, 0.3, 0.5}, K=20 N=32 M=16 T=100 P=16"),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Configurations making up preset `name`.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    let cfgs = match name {
        "fig3" => vec![ExperimentConfig::with_scene("fig3", SceneConfig::new(32, 12, 16, 100, 16, 0.2))],
        "fig4" => vec![ExperimentConfig::with_scene("fig4", SceneConfig::new(32, 12, 20, 100, 16, 0.2))],
        "fig5" => [4usize, 8, 12, 16]
            .iter()
            .map(|&m| {
                ExperimentConfig::with_scene(&format!("fig5_m{m}"), SceneConfig::new(16, m, 32, 100, 16, 0.2))
            })
            .collect(),
        "fig6" => [0.1, 0.2, 0.3, 0.5]
            .iter()
            .map(|&b| {
                ExperimentConfig::with_scene(&format!("fig6_beta{b}"), SceneConfig::new(20, 16, 32, 100, 16, b))
            })
            .collect(),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (available: {})",
                preset_names().join(", ")
            )))
        }
    };
    Ok(cfgs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig3_matches_caption() {
        let c = &preset("fig3").unwrap()[0];
        let s = &c.scene;
        assert_eq!((s.k, s.n, s.m, s.t, s.p, s.beta), (32, 16, 12, 100, 16, 0.2));
        assert_eq!(c.als_opts.epsilon, 1e-5);
        assert_eq!(c.als_opts.i_max, 15);
        assert_eq!(c.trials, 500);
        assert_eq!(c.snr_grid_db, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
    }

    #[test]
    fn sweeps_expand() {
        let f5 = preset("fig5").unwrap();
        assert_eq!(f5.iter().map(|c| c.scene.m).collect::<Vec<_>>(), vec![4, 8, 12, 16]);
        assert!(f5.iter().all(|c| (c.scene.k, c.scene.n, c.scene.t, c.scene.p) == (16, 32, 100, 16)));
        let f6 = preset("fig6").unwrap();
        assert_eq!(f6.iter().map(|c| c.scene.beta).collect::<Vec<_>>(), vec![0.1, 0.2, 0.3, 0.5]);
        assert!(f6.iter().all(|c| (c.scene.k, c.scene.n, c.scene.m) == (20, 32, 16)));
        assert_eq!(f6[3].name, "fig6_beta0.5");
    }

    #[test]
    fn every_preset_validates() {
        for name in preset_names() {
            for c in preset(name).unwrap() {
                c.validate().unwrap();
            }
        }
        assert!(matches!(preset("fig9"), Err(Error::Config(_))));
    }
}
