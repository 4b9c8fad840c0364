//! Shows the scaling ambiguities of both stages and how they are removed:
//! per-column least squares or first-row normalization for (Hr, He), and the
//! pilot block for (Hs, X).

use ris_joint::ambiguity::{align_bilinear, align_parafac, apply_diagonal, first_row_normalized, nmse_db, AlignmentMode};
use ris_joint::linalg::{C64, RngStream};
use ris_joint::scene::{gen_channels, gen_signal, SceneConfig};

fn main() -> ris_joint::Result<()> {
    let cfg = SceneConfig::new(8, 4, 6, 20, 6, 0.3);
    let ch = gen_channels(&cfg, &mut RngStream::new(11, 0))?;
    let sig = gen_signal(&cfg, &mut RngStream::new(11, 1))?;
    let he = ch.equivalent(&sig.x);

    let lambda: Vec<C64> = (0..cfg.n).map(|i| C64::from_polar(0.5 + i as f64, 0.7 * i as f64)).collect();
    let (hr_s, he_s) = apply_diagonal(&ch.hr, &he, &lambda);
    println!("scaled factors: NMSE Hr {:.2} dB", nmse_db(&hr_s, &ch.hr)?);
    println!("product unchanged: {:.2e}", (&hr_s * &he_s - &ch.hr * &he).norm());

    let (hr_a, he_a, rep) = align_parafac(&hr_s, &he_s, &ch.hr, AlignmentMode::DiagonalLs)?;
    println!(
        "diagonal_ls: NMSE Hr {:.2} dB, He {:.2} dB, residual {:.2e}",
        nmse_db(&hr_a, &ch.hr)?,
        nmse_db(&he_a, &he)?,
        rep.residual
    );

    let (hr_ref, he_ref, _) = first_row_normalized(&ch.hr, &he)?;
    let (hr_f, he_f, _) = align_parafac(&hr_s, &he_s, &hr_ref, AlignmentMode::FirstRowNormalization)?;
    println!(
        "first_row_normalization: NMSE Hr {:.2} dB, He {:.2} dB against normalized references",
        nmse_db(&hr_f, &hr_ref)?,
        nmse_db(&he_f, &he_ref)?
    );

    let c = C64::from_polar(2.5, -1.1);
    let (hs_a, x_a, rep) = align_bilinear(&(&ch.hs * c), &(&sig.x / c), &sig.pilot_cols, &sig.pilot_block())?;
    println!(
        "bilinear: recovered scale {:.4} (applied {:.4}), NMSE Hs {:.2} dB, X {:.2} dB",
        rep.scale_factors[0],
        c,
        nmse_db(&hs_a, &ch.hs)?,
        nmse_db(&x_a, &sig.x)?
    );
    Ok(())
}
