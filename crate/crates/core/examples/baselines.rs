//! Compares ALS with the closed-form LSKRF estimate on the same tensor, and
//! shows the genie LS recovery of X that knows both channels.

use ris_joint::ambiguity::{align_parafac, nmse_db, AlignmentMode};
use ris_joint::baselines::{genie_ls_recover, lskrf_from_views};
use ris_joint::linalg::RngStream;
use ris_joint::parafac::{als_estimate, unfold, AlsOptions, InitMode};
use ris_joint::scene::{gen_channels, gen_signal, synthesize_received, PhaseSchedule, SceneConfig};

fn main() -> ris_joint::Result<()> {
    for (label, n) in [("P = N", 16), ("P < N", 20)] {
        let cfg = SceneConfig::new(32, 12, n, 100, 16, 0.2);
        let ch = gen_channels(&cfg, &mut RngStream::new(9, 0))?;
        let sig = gen_signal(&cfg, &mut RngStream::new(9, 1))?;
        let ps = PhaseSchedule::for_scene(cfg.p, cfg.n)?;
        println!("{label} (N = {n}, P = {})", cfg.p);
        for snr in [10.0, 30.0] {
            let views = unfold(&synthesize_received(&ch, &sig, &ps, snr, &mut RngStream::new(9, 2))?);
            let als_opts = AlsOptions { init_mode: InitMode::Random { seed: 9, stream: 3 }, ..AlsOptions::default() };
            let als = als_estimate(&views, &ps, &als_opts)?;
            let (als_hr, _, _) = align_parafac(&als.hr_hat, &als.he_hat, &ch.hr, AlignmentMode::DiagonalLs)?;
            let lskrf = match lskrf_from_views(&views, &ps) {
                Ok(est) => {
                    let (hr, he) = (est.hr_hat.unwrap(), est.he_hat.unwrap());
                    let (hr, _, _) = align_parafac(&hr, &he, &ch.hr, AlignmentMode::DiagonalLs)?;
                    format!("{:.2} dB", nmse_db(&hr, &ch.hr)?)
                }
                Err(e) => format!("unavailable ({e})"),
            };
            let genie = genie_ls_recover(&views.y2, &ch.hr, &ch.hs, &ps)?;
            println!(
                "  SNR {snr:>4} dB: NMSE Hr ALS {:.2} dB, LSKRF {lskrf}; genie LS NMSE X {:.2} dB",
                nmse_db(&als_hr, &ch.hr)?,
                nmse_db(genie.x_hat.as_ref().unwrap(), &sig.x)?
            );
        }
    }
    Ok(())
}
