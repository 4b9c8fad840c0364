//! Bilinear generalized AMP for `He ≈ Hs · X` with entrywise priors on both
//! factors.
//!
//! Index conventions (N×M channel, M×T signal, N×T observation):
//!
//! * plug-in mean/variance `p̄`, `ν̄p`, `νp` sum over the shared index `m`;
//! * the `r`-messages for `x[m, t]` sum over `n`;
//! * the `q`-messages for `h[n, m]` sum over `t`.
//!
//! Each iteration costs a handful of N×M×T products.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{frob2, CMatrix, RMatrix, RngStream, C64};

/// Lower bound applied to every variance the engine carries.
pub const VARIANCE_FLOOR: f64 = 1e-14;

/// Posterior mean/variance of `x ~ CN(0, sigma2)` observed as `q = x + CN(0, nu_q)`.
pub fn gaussian_denoise(q_hat: C64, nu_q: f64, sigma2: f64) -> (C64, f64) {
    if sigma2 <= 0.0 {
        return (C64::new(0.0, 0.0), 0.0);
    }
    let g = sigma2 / (sigma2 + nu_q);
    (q_hat * g, g * nu_q)
}

/// Posterior mean/variance under the Bernoulli-Gaussian prior
/// `(1-β)·δ(x) + β·CN(0, sigma2)` with a CN(r_hat; x, nu_r) likelihood.
pub fn bg_denoise(r_hat: C64, nu_r: f64, beta: f64, sigma2: f64) -> (C64, f64) {
    if beta <= 0.0 || sigma2 <= 0.0 {
        return (C64::new(0.0, 0.0), 0.0);
    }
    let (m, v) = gaussian_denoise(r_hat, nu_r, sigma2);
    if beta >= 1.0 {
        return (m, v);
    }
    let r2 = r_hat.norm_sqr();
    // ln(g1 / g0) with g1 = CN(r; 0, σ²+ν), g0 = CN(r; 0, ν).
    let llr = (nu_r / (sigma2 + nu_r)).ln() + r2 / nu_r - r2 / (sigma2 + nu_r);
    let log_odds = llr + (beta / (1.0 - beta)).ln();
    let pi = if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    };
    let mean = m * pi;
    let var = pi * (v + m.norm_sqr()) - mean.norm_sqr();
    (mean, var.max(0.0))
}

/// Posterior of `z` given the plug-in prior CN(p_hat, nu_p) and an
/// observation `he_obs = z + CN(0, nu_w)`.
pub fn posterior_z(p_hat: C64, nu_p: f64, he_obs: C64, nu_w: f64) -> (C64, f64) {
    if nu_w == f64::INFINITY {
        return (p_hat, nu_p);
    }
    let den = nu_p + nu_w;
    if den <= 0.0 {
        return (he_obs, 0.0);
    }
    ((he_obs * nu_p + p_hat * nu_w) / den, nu_p * nu_w / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    Gaussian,
    BernoulliGaussian { beta: f64 },
    /// Every entry is known; `pinned` must cover the whole matrix.
    Pinned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinnedEntries {
    pub values: CMatrix,
    pub mask: DMatrix<bool>,
}

/// Entrywise prior for one factor. Pinned entries win over everything else;
/// with a support mask, masked-out entries are point masses at zero and
/// masked-in entries are CN(0, variance).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDescriptor {
    pub kind: PriorKind,
    pub variance: f64,
    pub support_mask: Option<DMatrix<bool>>,
    pub pinned: Option<PinnedEntries>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EntryPrior {
    Pinned(C64),
    Zero,
    Gaussian(f64),
    BernoulliGaussian(f64, f64),
}

impl PriorDescriptor {
    pub fn gaussian(variance: f64) -> Self {
        Self {
            kind: PriorKind::Gaussian,
            variance,
            support_mask: None,
            pinned: None,
        }
    }

    pub fn bernoulli_gaussian(beta: f64, variance: f64) -> Self {
        Self {
            kind: PriorKind::BernoulliGaussian { beta },
            variance,
            support_mask: None,
            pinned: None,
        }
    }

    /// Every entry fixed to `values`.
    pub fn pinned(values: CMatrix) -> Self {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self {
            kind: PriorKind::Pinned,
            variance: 0.0,
            support_mask: None,
            pinned: Some(PinnedEntries { values, mask }),
        }
    }

    pub fn with_support(mut self, mask: DMatrix<bool>) -> Self {
        self.support_mask = Some(mask);
        self
    }

    pub fn with_pinned(mut self, values: CMatrix, mask: DMatrix<bool>) -> Self {
        self.pinned = Some(PinnedEntries { values, mask });
        self
    }

    /// Pins whole columns of `values`.
    pub fn with_pinned_columns(self, values: &CMatrix, cols: &[usize]) -> Self {
        let mut mask = DMatrix::from_element(values.nrows(), values.ncols(), false);
        for &c in cols {
            mask.column_mut(c).fill(true);
        }
        self.with_pinned(values.clone(), mask)
    }

    fn validate(&self, shape: (usize, usize), what: &str) -> Result<()> {
        if !self.variance.is_finite() || self.variance < 0.0 {
            return Err(Error::InvalidValue(format!(
                "{what} prior variance must be finite and >= 0"
            )));
        }
        if let PriorKind::BernoulliGaussian { beta } = self.kind {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::InvalidValue(format!("{what} prior beta {beta} outside [0, 1]")));
            }
        }
        if let Some(mask) = &self.support_mask {
            if mask.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{what} support mask is {:?}, expected {shape:?}",
                    mask.shape()
                )));
            }
        }
        match &self.pinned {
            Some(p) => {
                if p.values.shape() != shape || p.mask.shape() != shape {
                    return Err(Error::Dimension(format!(
                        "{what} pinned entries are {:?}/{:?}, expected {shape:?}",
                        p.values.shape(),
                        p.mask.shape()
                    )));
                }
                if self.kind == PriorKind::Pinned && !p.mask.iter().all(|&b| b) {
                    return Err(Error::InvalidValue(format!(
                        "{what} prior is fully pinned but the mask has gaps"
                    )));
                }
            }
            None if self.kind == PriorKind::Pinned => {
                return Err(Error::InvalidValue(format!("{what} pinned prior without values")));
            }
            None => {}
        }
        Ok(())
    }

    fn entry(&self, i: usize, j: usize) -> EntryPrior {
        if let Some(p) = &self.pinned {
            if p.mask[(i, j)] {
                return EntryPrior::Pinned(p.values[(i, j)]);
            }
        }
        if let Some(mask) = &self.support_mask {
            return if mask[(i, j)] {
                EntryPrior::Gaussian(self.variance)
            } else {
                EntryPrior::Zero
            };
        }
        match self.kind {
            PriorKind::Gaussian | PriorKind::Pinned => EntryPrior::Gaussian(self.variance),
            PriorKind::BernoulliGaussian { beta } => EntryPrior::BernoulliGaussian(beta, self.variance),
        }
    }

    fn resolve(&self, rows: usize, cols: usize) -> Vec<EntryPrior> {
        // column-major, matching nalgebra storage
        let mut out = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                out.push(self.entry(i, j));
            }
        }
        out
    }
}

/// One `r`/`q` message followed by the entry's denoiser. `precision` is the
/// inverse message variance; zero precision returns the prior moments.
fn input_update(prior: EntryPrior, current: C64, precision: f64, corr: f64, back: C64) -> (C64, f64) {
    if precision <= 0.0 || !precision.is_finite() {
        return match prior {
            EntryPrior::Pinned(v) => (v, VARIANCE_FLOOR),
            EntryPrior::Zero => (C64::new(0.0, 0.0), VARIANCE_FLOOR),
            EntryPrior::Gaussian(s2) => (C64::new(0.0, 0.0), s2),
            EntryPrior::BernoulliGaussian(b, s2) => (C64::new(0.0, 0.0), b * s2),
        };
    }
    let nu = (1.0 / precision).max(VARIANCE_FLOOR);
    let obs = current * (1.0 - nu * corr) + back * nu;
    denoise_entry(prior, obs, nu)
}

fn denoise_entry(prior: EntryPrior, obs: C64, nu: f64) -> (C64, f64) {
    match prior {
        EntryPrior::Pinned(v) => (v, VARIANCE_FLOOR),
        EntryPrior::Zero => (C64::new(0.0, 0.0), VARIANCE_FLOOR),
        EntryPrior::Gaussian(s2) => gaussian_denoise(obs, nu, s2),
        EntryPrior::BernoulliGaussian(b, s2) => bg_denoise(obs, nu, b, s2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigAmpOptions {
    pub i_max: usize,
    /// Stop once `Σ|p̄(i) - p̄(i-1)|² <= epsilon · Σ|p̄(i)|²`.
    pub epsilon: f64,
    /// Weight of the new value in `new·d + old·(1-d)`; 1 disables damping.
    pub damping: f64,
    /// Variance of the assumed observation noise on `He`.
    pub assumed_noise_var: f64,
}

impl Default for BigAmpOptions {
    fn default() -> Self {
        Self {
            i_max: 500,
            epsilon: 1e-13,
            damping: 1.0,
            assumed_noise_var: 1e-12,
        }
    }
}

impl BigAmpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.i_max == 0 {
            return Err(Error::InvalidValue("BiG-AMP i_max must be >= 1".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidValue("BiG-AMP epsilon must be > 0".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidValue(format!(
                "damping {} outside (0, 1]",
                self.damping
            )));
        }
        if self.assumed_noise_var.is_nan() || self.assumed_noise_var < 0.0 {
            return Err(Error::InvalidValue("assumed noise variance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Messages carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct BigAmpState {
    pub x_hat: CMatrix,
    pub nu_x: RMatrix,
    pub h_hat: CMatrix,
    pub nu_h: RMatrix,
    pub s_hat: CMatrix,
    pub p_bar: CMatrix,
    pub nu_p_bar: RMatrix,
    pub nu_p: RMatrix,
}

impl BigAmpState {
    /// State at a known factorization with all variances at the floor.
    pub fn at_point(h: CMatrix, x: CMatrix) -> Self {
        let (n, m) = h.shape();
        let t = x.ncols();
        Self {
            nu_x: RMatrix::from_element(m, t, VARIANCE_FLOOR),
            nu_h: RMatrix::from_element(n, m, VARIANCE_FLOOR),
            s_hat: CMatrix::zeros(n, t),
            p_bar: &h * &x,
            nu_p_bar: RMatrix::from_element(n, t, VARIANCE_FLOOR),
            nu_p: RMatrix::from_element(n, t, VARIANCE_FLOOR),
            x_hat: x,
            h_hat: h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct BigAmpDiagnostics {
    pub iterations: usize,
    /// `‖He - Hs_hat·X_hat‖_F` after each iteration.
    pub residual_history: Vec<f64>,
    pub stop_reason: StopReason,
    /// Iteration whose estimates are returned.
    pub returned_iteration: usize,
}

impl BigAmpDiagnostics {
    pub fn diverged(&self) -> bool {
        self.stop_reason == StopReason::Diverged
    }
}

#[derive(Debug, Clone)]
pub struct BigAmpOutput {
    /// N×M.
    pub hs_hat: CMatrix,
    /// M×T.
    pub x_hat: CMatrix,
    pub state: BigAmpState,
    pub diagnostics: BigAmpDiagnostics,
}

/// Factors `he_hat` (N×T) into `Hs` (N×M) and `X` (M×T). The number of
/// signal rows `M` is taken from `prior_x`'s masks when present, otherwise
/// from `prior_h`'s; one of the two must carry a mask or pinned values, or
/// use [`bigamp_run_dims`].
pub fn bigamp_run(
    he_hat: &CMatrix,
    prior_x: &PriorDescriptor,
    prior_h: &PriorDescriptor,
    opts: &BigAmpOptions,
    rng: &mut RngStream,
) -> Result<BigAmpOutput> {
    let m = infer_rank(prior_x, prior_h).ok_or_else(|| {
        Error::Dimension("cannot infer M: neither prior carries a mask or pinned values".into())
    })?;
    bigamp_run_dims(he_hat, m, prior_x, prior_h, opts, rng)
}

fn infer_rank(prior_x: &PriorDescriptor, prior_h: &PriorDescriptor) -> Option<usize> {
    prior_x
        .support_mask
        .as_ref()
        .map(|s| s.nrows())
        .or_else(|| prior_x.pinned.as_ref().map(|p| p.values.nrows()))
        .or_else(|| prior_h.support_mask.as_ref().map(|s| s.ncols()))
        .or_else(|| prior_h.pinned.as_ref().map(|p| p.values.ncols()))
}

/// [`bigamp_run`] with an explicit inner dimension `m`.
pub fn bigamp_run_dims(
    he_hat: &CMatrix,
    m: usize,
    prior_x: &PriorDescriptor,
    prior_h: &PriorDescriptor,
    opts: &BigAmpOptions,
    rng: &mut RngStream,
) -> Result<BigAmpOutput> {
    let (n, t) = he_hat.shape();
    prior_x.validate((m, t), "X")?;
    prior_h.validate((n, m), "Hs")?;
    let px = prior_x.resolve(m, t);
    let ph = prior_h.resolve(n, m);

    let mut x_hat = CMatrix::zeros(m, t);
    let mut nu_x = RMatrix::zeros(m, t);
    for (i, pr) in px.iter().enumerate() {
        let (v, nu) = match *pr {
            EntryPrior::Pinned(v) => (v, VARIANCE_FLOOR),
            EntryPrior::Zero => (C64::new(0.0, 0.0), VARIANCE_FLOOR),
            EntryPrior::Gaussian(s2) => (C64::new(0.0, 0.0), s2),
            EntryPrior::BernoulliGaussian(b, s2) => (C64::new(0.0, 0.0), b * s2),
        };
        x_hat[i] = v;
        nu_x[i] = nu.max(VARIANCE_FLOOR);
    }
    let mut h_hat = CMatrix::zeros(n, m);
    let mut nu_h = RMatrix::zeros(n, m);
    // Draw in row-major order so the stream usage does not depend on storage.
    for r in 0..n {
        for c in 0..m {
            let idx = r + c * n;
            let (v, nu) = match ph[idx] {
                EntryPrior::Pinned(v) => (v, VARIANCE_FLOOR),
                EntryPrior::Zero => (C64::new(0.0, 0.0), VARIANCE_FLOOR),
                EntryPrior::Gaussian(s2) => (rng.complex_normal(s2), s2),
                EntryPrior::BernoulliGaussian(b, s2) => (rng.complex_normal(s2), b * s2),
            };
            h_hat[idx] = v;
            nu_h[idx] = nu.max(VARIANCE_FLOOR);
        }
    }
    let state = BigAmpState {
        x_hat,
        nu_x,
        h_hat,
        nu_h,
        s_hat: CMatrix::zeros(n, t),
        p_bar: CMatrix::zeros(n, t),
        nu_p_bar: RMatrix::zeros(n, t),
        nu_p: RMatrix::zeros(n, t),
    };
    run_iterations(he_hat, &px, &ph, opts, state, true)
}

/// Continues from an explicit state. `s_hat` and the previous `p̄` are taken
/// from it, so a state built by [`BigAmpState::at_point`] is a fixed point
/// for noiseless data.
pub fn bigamp_run_from(
    he_hat: &CMatrix,
    prior_x: &PriorDescriptor,
    prior_h: &PriorDescriptor,
    opts: &BigAmpOptions,
    state: BigAmpState,
) -> Result<BigAmpOutput> {
    let (n, t) = he_hat.shape();
    let m = state.x_hat.nrows();
    if state.h_hat.shape() != (n, m) || state.x_hat.ncols() != t || state.s_hat.shape() != (n, t) {
        return Err(Error::Dimension("state does not match He_hat".into()));
    }
    prior_x.validate((m, t), "X")?;
    prior_h.validate((n, m), "Hs")?;
    let px = prior_x.resolve(m, t);
    let ph = prior_h.resolve(n, m);
    run_iterations(he_hat, &px, &ph, opts, state, false)
}

fn abs2(a: &CMatrix) -> RMatrix {
    a.map(|z| z.norm_sqr())
}

fn floored(a: RMatrix) -> RMatrix {
    a.map(|v| if v.is_nan() { v } else { v.max(VARIANCE_FLOOR) })
}

fn blend_c(new: CMatrix, old: &CMatrix, d: f64) -> CMatrix {
    if d >= 1.0 {
        new
    } else {
        new * C64::new(d, 0.0) + old * C64::new(1.0 - d, 0.0)
    }
}

fn blend_r(new: RMatrix, old: &RMatrix, d: f64) -> RMatrix {
    if d >= 1.0 {
        new
    } else {
        new * d + old * (1.0 - d)
    }
}

fn all_finite_c(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Consecutive iterations the residual must stay above 10× its running
/// minimum before the run is declared divergent. Early transients of
/// several orders of magnitude that later settle are common from a random
/// `Hs` start, so a single excursion is not treated as divergence.
pub const DIVERGENCE_PATIENCE: usize = 30;

/// Growth over the running minimum that ends the run immediately.
pub const RUNAWAY_FACTOR: f64 = 1e8;

fn run_iterations(
    he: &CMatrix,
    px: &[EntryPrior],
    ph: &[EntryPrior],
    opts: &BigAmpOptions,
    mut st: BigAmpState,
    fresh: bool,
) -> Result<BigAmpOutput> {
    opts.validate()?;
    if !all_finite_c(he) {
        return Err(Error::Numerical("He_hat contains NaN or Inf".into()));
    }
    let d = opts.damping;
    let nu_w = opts.assumed_noise_var;
    let he_energy = frob2(he);

    let mut residual_history = Vec::with_capacity(opts.i_max);
    let mut best: Option<(f64, usize, CMatrix, CMatrix)> = None;
    let mut stop_reason = StopReason::MaxIterations;
    let mut have_prev = !fresh;
    let mut iterations = 0;
    let mut above = 0usize;

    for i in 1..=opts.i_max {
        iterations = i;
        let h_abs2 = abs2(&st.h_hat);
        let x_abs2 = abs2(&st.x_hat);

        // plug-in estimate of He and its variances
        let nu_p_bar_new = &h_abs2 * &st.nu_x + &st.nu_h * &x_abs2;
        let p_bar_new = &st.h_hat * &st.x_hat;
        let p_bar_prev = st.p_bar.clone();
        let (p_bar, nu_p_bar) = if have_prev {
            (
                blend_c(p_bar_new, &st.p_bar, d),
                blend_r(nu_p_bar_new, &st.nu_p_bar, d),
            )
        } else {
            (p_bar_new, nu_p_bar_new)
        };
        let nu_p = floored(&nu_p_bar + &st.nu_h * &st.nu_x);
        let nu_p_bar = floored(nu_p_bar);

        // Onsager-corrected mean, output posterior, scaled residual
        let mut s_new = CMatrix::zeros(he.nrows(), he.ncols());
        let mut nu_s = RMatrix::zeros(he.nrows(), he.ncols());
        for idx in 0..he.len() {
            let p_hat = p_bar[idx] - st.s_hat[idx] * nu_p_bar[idx];
            let (z_hat, nu_z) = posterior_z(p_hat, nu_p[idx], he[idx], nu_w);
            nu_s[idx] = ((1.0 - nu_z / nu_p[idx]) / nu_p[idx]).max(0.0);
            s_new[idx] = (z_hat - p_hat) / nu_p[idx];
        }
        let s_hat = if have_prev {
            blend_c(s_new, &st.s_hat, d)
        } else {
            s_new
        };

        // input messages for X (sum over n) and Hs (sum over t), in precision
        // form so that an uninformative message falls back to the prior
        let prec_r = h_abs2.transpose() * &nu_s;
        let corr_x = st.nu_h.transpose() * &nu_s;
        let back_x = st.h_hat.adjoint() * &s_hat;
        let prec_q = &nu_s * x_abs2.transpose();
        let corr_h = &nu_s * st.nu_x.transpose();
        let back_h = &s_hat * st.x_hat.adjoint();

        let mut x_new = CMatrix::zeros(st.x_hat.nrows(), st.x_hat.ncols());
        let mut nu_x_new = RMatrix::zeros(st.x_hat.nrows(), st.x_hat.ncols());
        for idx in 0..x_new.len() {
            let (mean, var) =
                input_update(px[idx], st.x_hat[idx], prec_r[idx], corr_x[idx], back_x[idx]);
            x_new[idx] = mean;
            nu_x_new[idx] = var;
        }
        let mut h_new = CMatrix::zeros(st.h_hat.nrows(), st.h_hat.ncols());
        let mut nu_h_new = RMatrix::zeros(st.h_hat.nrows(), st.h_hat.ncols());
        for idx in 0..h_new.len() {
            let (mean, var) =
                input_update(ph[idx], st.h_hat[idx], prec_q[idx], corr_h[idx], back_h[idx]);
            h_new[idx] = mean;
            nu_h_new[idx] = var;
        }
        let mut x_hat = blend_c(x_new, &st.x_hat, d);
        let mut h_hat = blend_c(h_new, &st.h_hat, d);
        // pinned entries are restored exactly after damping
        for (idx, pr) in px.iter().enumerate() {
            if let EntryPrior::Pinned(v) = pr {
                x_hat[idx] = *v;
            }
        }
        for (idx, pr) in ph.iter().enumerate() {
            if let EntryPrior::Pinned(v) = pr {
                h_hat[idx] = *v;
            }
        }

        st = BigAmpState {
            x_hat,
            nu_x: floored(nu_x_new),
            h_hat,
            nu_h: floored(nu_h_new),
            s_hat,
            p_bar,
            nu_p_bar,
            nu_p,
        };

        let resid = if all_finite_c(&st.x_hat) && all_finite_c(&st.h_hat) {
            frob2(&(he - &st.h_hat * &st.x_hat)).sqrt()
        } else {
            f64::INFINITY
        };
        let finite = resid.is_finite();
        residual_history.push(resid);
        if finite && best.as_ref().is_none_or(|b| resid < b.0) {
            best = Some((resid, i, st.h_hat.clone(), st.x_hat.clone()));
        }

        let min_resid = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if resid > 10.0 * min_resid && resid * resid > 1e-16 * he_energy {
            above += 1;
        } else {
            above = 0;
        }
        if !finite || above >= DIVERGENCE_PATIENCE || resid > RUNAWAY_FACTOR * min_resid {
            stop_reason = StopReason::Diverged;
            break;
        }

        if have_prev {
            let change = frob2(&(&st.p_bar - &p_bar_prev));
            if change <= opts.epsilon * frob2(&st.p_bar) {
                stop_reason = StopReason::Converged;
                break;
            }
        }
        have_prev = true;
    }

    let (hs_hat, x_hat, returned_iteration) = match stop_reason {
        StopReason::Diverged => match &best {
            Some((_, it, h, x)) => (h.clone(), x.clone(), *it),
            None => {
                return Err(Error::Numerical(
                    "BiG-AMP diverged before producing a finite iterate".into(),
                ))
            }
        },
        _ => (st.h_hat.clone(), st.x_hat.clone(), iterations),
    };

    Ok(BigAmpOutput {
        hs_hat,
        x_hat,
        state: st,
        diagnostics: BigAmpDiagnostics {
            iterations,
            residual_history,
            stop_reason,
            returned_iteration,
        },
    })
}
