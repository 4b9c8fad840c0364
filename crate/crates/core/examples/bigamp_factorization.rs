//! Factors a noisy equivalent channel He = Hs X with BiG-AMP, using a
//! Bernoulli-Gaussian prior with known support and pinned pilot columns for
//! X and a Gaussian prior for Hs.

use ris_joint::ambiguity::{align_bilinear, nmse_db};
use ris_joint::bigamp::{bigamp_run, BigAmpOptions, PriorDescriptor};
use ris_joint::linalg::{sample_complex_gaussian, RngStream};
use ris_joint::scene::{gen_channels, gen_signal, SceneConfig};

fn main() -> ris_joint::Result<()> {
    let cfg = SceneConfig::new(32, 12, 16, 100, 16, 0.2);
    let ch = gen_channels(&cfg, &mut RngStream::new(5, 0))?;
    let sig = gen_signal(&cfg, &mut RngStream::new(5, 1))?;
    let he = ch.equivalent(&sig.x);

    let prior_x = PriorDescriptor::bernoulli_gaussian(cfg.beta, cfg.sigma_x2)
        .with_support(sig.support.clone())
        .with_pinned_columns(&sig.x, &sig.pilot_cols);
    let prior_h = PriorDescriptor::gaussian(cfg.sigma_h2);
    let opts = BigAmpOptions { damping: 0.8, ..BigAmpOptions::default() };

    for noise_db in [-60.0, -30.0, -10.0] {
        let var = 10f64.powf(noise_db / 10.0);
        let noise = sample_complex_gaussian(he.nrows(), he.ncols(), var, &mut RngStream::new(5, 2))?;
        let he_obs = &he + noise;
        let out = bigamp_run(&he_obs, &prior_x, &prior_h, &opts, &mut RngStream::new(5, 4))?;
        let (hs, x, rep) = align_bilinear(&out.hs_hat, &out.x_hat, &sig.pilot_cols, &sig.pilot_block())?;
        println!(
            "noise {noise_db:>5} dB: {:?} after {} iterations, scale {:.4}, NMSE Hs {:.2} dB, X {:.2} dB",
            out.diagnostics.stop_reason,
            out.diagnostics.iterations,
            rep.scale_factors[0],
            nmse_db(&hs, &ch.hs)?,
            nmse_db(&x, &sig.x)?
        );
    }
    Ok(())
}
