//! Draws one scene (channels, sparse frame with pilots, noisy tensor) and
//! reports its realized statistics.

use ris_joint::linalg::RngStream;
use ris_joint::scene::{
    gen_channels, gen_signal, mean_power, noiseless_tensor, realized_snr_db, synthesize_received, PhaseSchedule,
    SceneConfig,
};

fn main() -> ris_joint::Result<()> {
    let cfg = SceneConfig::new(32, 12, 16, 100, 16, 0.2);
    let ch = gen_channels(&cfg, &mut RngStream::new(1, 0))?;
    let sig = gen_signal(&cfg, &mut RngStream::new(1, 1))?;
    let ps = PhaseSchedule::for_scene(cfg.p, cfg.n)?;

    println!("Hs {:?} power {:.3}", ch.hs.shape(), mean_power(&ch.hs));
    println!("Hr {:?} power {:.3}", ch.hr.shape(), mean_power(&ch.hr));
    println!(
        "X {:?}: {} pilot columns, data density {:.3} (beta = {})",
        sig.x.shape(),
        sig.pilot_cols.len(),
        sig.data_density(),
        cfg.beta
    );

    let clean = noiseless_tensor(&ch.hr, &ch.equivalent(&sig.x), &ps)?;
    for snr in [0.0, 10.0, 20.0, 30.0] {
        let rx = synthesize_received(&ch, &sig, &ps, snr, &mut RngStream::new(1, 2))?;
        println!(
            "target {snr:>4} dB: noise var {:.3e}, realized {:.2} dB",
            rx.noise_var,
            realized_snr_db(&clean, &rx.y)
        );
    }
    Ok(())
}
