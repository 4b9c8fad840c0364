//! The full two-stage receiver on one scene, step by step: ALS on the tensor,
//! ambiguity removal, BiG-AMP on the estimated He, pilot alignment.

use ris_joint::ambiguity::{align_bilinear, align_parafac, nmse_db, AlignmentMode};
use ris_joint::bigamp::{bigamp_run, BigAmpOptions, PriorDescriptor};
use ris_joint::linalg::RngStream;
use ris_joint::parafac::{als_estimate, unfold, AlsOptions, InitMode};
use ris_joint::scene::{gen_channels, gen_signal, synthesize_received, PhaseSchedule, SceneConfig};

fn main() -> ris_joint::Result<()> {
    let snr_db: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20.0);
    let cfg = SceneConfig::new(32, 12, 16, 100, 16, 0.2);
    let ch = gen_channels(&cfg, &mut RngStream::new(21, 0))?;
    let sig = gen_signal(&cfg, &mut RngStream::new(21, 1))?;
    let ps = PhaseSchedule::for_scene(cfg.p, cfg.n)?;
    let rx = synthesize_received(&ch, &sig, &ps, snr_db, &mut RngStream::new(21, 2))?;
    let views = unfold(&rx);

    let als_opts = AlsOptions { init_mode: InitMode::Random { seed: 21, stream: 3 }, ..AlsOptions::default() };
    let als = als_estimate(&views, &ps, &als_opts)?;
    let (hr, he, _) = align_parafac(&als.hr_hat, &als.he_hat, &ch.hr, AlignmentMode::DiagonalLs)?;
    println!("SNR {snr_db} dB");
    println!("stage 1: ALS {} iterations, NMSE Hr {:.2} dB", als.iterations, nmse_db(&hr, &ch.hr)?);

    let prior_x = PriorDescriptor::bernoulli_gaussian(cfg.beta, cfg.sigma_x2)
        .with_support(sig.support.clone())
        .with_pinned_columns(&sig.x, &sig.pilot_cols);
    let prior_h = PriorDescriptor::gaussian(cfg.sigma_h2);
    let opts = BigAmpOptions { damping: 0.8, ..BigAmpOptions::default() };
    let out = bigamp_run(&he, &prior_x, &prior_h, &opts, &mut RngStream::new(21, 4))?;
    let (hs, x, _) = align_bilinear(&out.hs_hat, &out.x_hat, &sig.pilot_cols, &sig.pilot_block())?;
    println!(
        "stage 2: BiG-AMP {:?} after {} iterations, NMSE Hs {:.2} dB, X {:.2} dB",
        out.diagnostics.stop_reason,
        out.diagnostics.iterations,
        nmse_db(&hs, &ch.hs)?,
        nmse_db(&x, &sig.x)?
    );
    Ok(())
}
