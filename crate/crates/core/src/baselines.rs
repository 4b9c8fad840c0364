//! Reference estimators the proposed pipeline is compared against.
//!
//! [`lskrf_estimate`] factors the Khatri-Rao product recovered from the
//! mode-3 unfolding column by column. [`genie_ls_recover`] solves for `X`
//! with the true channels in hand and so lower-bounds what any receiver that
//! ignores the signal prior can do.

use crate::linalg::{
    khatri_rao, leading_singular_triplet, numerical_rank, pseudo_inverse_ranked, default_pinv_tol, CMatrix, C64,
};
use crate::parafac::UnfoldedViews;
use crate::scene::PhaseSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    Lskrf,
    GenieLs,
}

impl BaselineMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineMethod::Lskrf => "lskrf",
            BaselineMethod::GenieLs => "genie_ls",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    pub hr_hat: Option<CMatrix>,
    pub he_hat: Option<CMatrix>,
    pub x_hat: Option<CMatrix>,
    /// Numerical rank of the matrix inverted by the LS step.
    pub ls_rank: usize,
    /// Leading singular value of each reshaped column (LSKRF only). The ratio
    /// to the second one is not tracked; a noiseless column is exactly rank 1.
    pub column_sigmas: Vec<f64>,
}

/// LSKRF estimate of `(Hr, He)` from the mode-3 unfolding `Y3` ((K·T)×P).
///
/// `B = Y3 (Φ^T)^†` estimates `Hr ⊙ He^T`. Column `n` of `B`, read as a K×T
/// matrix in row-major (k, t) order, equals `Hr[:, n] He[n, :]` up to noise, so
/// its leading singular pair yields both factors with `√σ` given to each.
pub fn lskrf_estimate(y3: &CMatrix, k: usize, t: usize, phi: &PhaseSchedule) -> Result<BaselineResult> {
    let (p, n) = (phi.p(), phi.n());
    if y3.shape() != (k * t, p) {
        return Err(Error::Dimension(format!(
            "Y3 is {:?}, expected {:?}",
            y3.shape(),
            (k * t, p)
        )));
    }
    let phi_t = phi.phi.transpose();
    let (phi_t_pinv, rank) = pseudo_inverse_ranked(&phi_t, default_pinv_tol(p, n))?;
    if rank < p.min(n) {
        return Err(Error::Infeasible(format!(
            "phase schedule has rank {rank} < min(P, N) = {}",
            p.min(n)
        )));
    }
    let b = y3 * phi_t_pinv;

    let mut hr = CMatrix::zeros(k, n);
    let mut he = CMatrix::zeros(n, t);
    let mut sigmas = Vec::with_capacity(n);
    for col in 0..n {
        let block = CMatrix::from_fn(k, t, |ki, ti| b[(ki * t + ti, col)]);
        let (u, sigma, v) = leading_singular_triplet(&block)?;
        let root = sigma.sqrt();
        for ki in 0..k {
            hr[(ki, col)] = u[ki] * root;
        }
        for ti in 0..t {
            he[(col, ti)] = v[ti].conj() * root;
        }
        sigmas.push(sigma);
    }

    Ok(BaselineResult {
        method: BaselineMethod::Lskrf,
        hr_hat: Some(hr),
        he_hat: Some(he),
        x_hat: None,
        ls_rank: rank,
        column_sigmas: sigmas,
    })
}

/// LSKRF applied directly to unfolded views.
pub fn lskrf_from_views(views: &UnfoldedViews, phi: &PhaseSchedule) -> Result<BaselineResult> {
    let (k, t, _) = views.dims();
    lskrf_estimate(&views.y3, k, t, phi)
}

/// `X = ((Φ ⊙ Hr) Hs)^† Y2` with the true channels.
pub fn genie_ls_recover(y2: &CMatrix, hr: &CMatrix, hs: &CMatrix, phi: &PhaseSchedule) -> Result<BaselineResult> {
    if hr.ncols() != phi.n() || hs.nrows() != phi.n() {
        return Err(Error::Dimension(format!(
            "Hr is {:?}, Hs is {:?}, schedule has N={}",
            hr.shape(),
            hs.shape(),
            phi.n()
        )));
    }
    if y2.nrows() != phi.p() * hr.nrows() {
        return Err(Error::Dimension(format!(
            "Y2 has {} rows, expected P·K = {}",
            y2.nrows(),
            phi.p() * hr.nrows()
        )));
    }
    let g = khatri_rao(&phi.phi, hr)? * hs;
    let m = g.ncols();
    let rank = numerical_rank(&g)?;
    if rank < m {
        return Err(Error::Singular(format!(
            "(Φ ⊙ Hr) Hs has rank {rank} < M = {m}"
        )));
    }
    let (g_pinv, _) = pseudo_inverse_ranked(&g, default_pinv_tol(g.nrows(), g.ncols()))?;
    let x = g_pinv * y2;
    if x.iter().any(|z: &C64| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("genie LS produced non-finite values".into()));
    }
    Ok(BaselineResult {
        method: BaselineMethod::GenieLs,
        hr_hat: None,
        he_hat: None,
        x_hat: Some(x),
        ls_rank: rank,
        column_sigmas: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::{align_parafac, nmse, AlignmentMode};
    use crate::linalg::{max_abs_diff, sample_complex_gaussian, RngStream};
    use crate::parafac::unfold;
    use crate::scene::{gen_channels, gen_signal, synthesize_received, SceneConfig};

    fn noiseless(cfg: &SceneConfig, seed: u64) -> (crate::scene::ChannelPair, crate::scene::SignalFrame, PhaseSchedule, UnfoldedViews) {
        let ch = gen_channels(cfg, &mut RngStream::new(seed, 0)).unwrap();
        let sig = gen_signal(cfg, &mut RngStream::new(seed, 1)).unwrap();
        let ps = PhaseSchedule::for_scene(cfg.p, cfg.n).unwrap();
        let y = synthesize_received(&ch, &sig, &ps, f64::INFINITY, &mut RngStream::new(seed, 2)).unwrap();
        (ch, sig, ps, unfold(&y))
    }

    #[test]
    fn lskrf_is_exact_without_noise() {
        let cfg = SceneConfig::new(6, 3, 5, 9, 7, 0.5);
        for seed in 0..5 {
            let (ch, sig, ps, v) = noiseless(&cfg, seed);
            let res = lskrf_from_views(&v, &ps).unwrap();
            let (hr, he, _) = align_parafac(
                res.hr_hat.as_ref().unwrap(),
                res.he_hat.as_ref().unwrap(),
                &ch.hr,
                AlignmentMode::DiagonalLs,
            )
            .unwrap();
            assert!(nmse(&hr, &ch.hr).unwrap() <= 1e-10);
            let e = nmse(&he, &ch.equivalent(&sig.x)).unwrap();
            assert!(e <= 1e-10, "seed {seed}: {e} sigmas {:?}", res.column_sigmas);
        }
    }

    #[test]
    fn lskrf_single_column_is_one_svd() {
        let mut rng = RngStream::new(3, 0);
        let hr = sample_complex_gaussian(4, 1, 1.0, &mut rng).unwrap();
        let he = sample_complex_gaussian(1, 6, 1.0, &mut rng).unwrap();
        let ps = PhaseSchedule::dft(3, 1).unwrap();
        let y3 = crate::parafac::model_y3(&hr, &he, &ps).unwrap();
        let res = lskrf_estimate(&y3, 4, 6, &ps).unwrap();
        let rebuilt = res.hr_hat.unwrap() * res.he_hat.unwrap();
        assert!(max_abs_diff(&rebuilt, &(&hr * &he)) <= 1e-12);
    }

    #[test]
    fn lskrf_rejects_rank_deficient_schedule() {
        let ps = PhaseSchedule { phi: CMatrix::from_element(4, 3, C64::new(1.0, 0.0)) };
        let y3 = CMatrix::zeros(2 * 2, 4);
        assert!(matches!(lskrf_estimate(&y3, 2, 2, &ps), Err(Error::Infeasible(_))));
    }

    #[test]
    fn genie_is_exact_and_linear() {
        let cfg = SceneConfig::new(5, 3, 4, 10, 4, 0.4);
        let (ch, sig, ps, v) = noiseless(&cfg, 7);
        let res = genie_ls_recover(&v.y2, &ch.hr, &ch.hs, &ps).unwrap();
        assert!(max_abs_diff(res.x_hat.as_ref().unwrap(), &sig.x) <= 1e-10);

        let mut rng = RngStream::new(8, 0);
        let a = sample_complex_gaussian(v.y2.nrows(), v.y2.ncols(), 1.0, &mut rng).unwrap();
        let b = sample_complex_gaussian(v.y2.nrows(), v.y2.ncols(), 1.0, &mut rng).unwrap();
        let c = C64::new(0.3, -1.2);
        let xa = genie_ls_recover(&a, &ch.hr, &ch.hs, &ps).unwrap().x_hat.unwrap();
        let xb = genie_ls_recover(&b, &ch.hr, &ch.hs, &ps).unwrap().x_hat.unwrap();
        let xab = genie_ls_recover(&(&a + &b * c), &ch.hr, &ch.hs, &ps).unwrap().x_hat.unwrap();
        assert!(max_abs_diff(&xab, &(xa + xb * c)) <= 1e-12);
    }

    #[test]
    fn genie_zero_signal_is_zero() {
        let cfg = SceneConfig::new(5, 3, 4, 10, 4, 0.4);
        let (ch, _, ps, v) = noiseless(&cfg, 9);
        let zero = CMatrix::zeros(v.y2.nrows(), v.y2.ncols());
        let x = genie_ls_recover(&zero, &ch.hr, &ch.hs, &ps).unwrap().x_hat.unwrap();
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn genie_rejects_rank_deficient_channel() {
        let cfg = SceneConfig::new(5, 3, 4, 10, 4, 0.4);
        let (ch, _, ps, v) = noiseless(&cfg, 9);
        let mut hs = ch.hs.clone();
        let first = hs.column(0).into_owned();
        hs.set_column(1, &first);
        assert!(matches!(genie_ls_recover(&v.y2, &ch.hr, &hs, &ps), Err(Error::Singular(_))));
    }
}
