//! Mode-n unfoldings of the received tensor and the alternating least squares
//! estimator of `Hr` and the equivalent channel `He = Hs·X`.
//!
//! With noiseless data the unfoldings factor as
//!
//! * `Y1[t·P + p, k] = ((He^T ⊙ Φ) · Hr^T)[t·P + p, k]`, a (T·P)×K matrix
//! * `Y2[p·K + k, t] = ((Φ ⊙ Hr) · He)[p·K + k, t]`, a (P·K)×T matrix
//! * `Y3[k·T + t, p] = ((Hr ⊙ He^T) · Φ^T)[k·T + t, p]`, a (K·T)×P matrix
//!
//! where `⊙` is the Khatri-Rao product. Both ALS half-steps are least
//! squares problems `(A ⊙ B) Z = Y`. The default [`LsSolver::Pinv`] applies
//! the SVD pseudoinverse of the tall Khatri-Rao matrix, costing
//! `O(T·P·N² + P·K·N²)` per iteration and tolerating rank deficiency.
//! [`LsSolver::Gram`] instead inverts the N×N Gram `(A^H A) ∘ (B^H B)`, which
//! costs `O(N³)` plus `O(N²·(T + P + K))` but squares the condition number.

use crate::error::{Error, Result};
use crate::linalg::{
    adjoint_mul, default_pinv_tol, dominant_eigvecs, frob2, hermitian_pinv_ranked, khatri_rao, khatri_rao_gram, matmul, pseudo_inverse_ranked,
    sample_complex_gaussian, CMatrix, ComplexTensor3, RngStream,
};
use crate::scene::{PhaseSchedule, ReceivedTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedViews {
    pub y1: CMatrix,
    pub y2: CMatrix,
    pub y3: CMatrix,
    dims: (usize, usize, usize),
}

impl UnfoldedViews {
    /// `(K, T, P)` of the source tensor.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Rebuilds the tensor from the mode-2 view.
    pub fn refold(&self) -> ComplexTensor3 {
        let (k, t, p) = self.dims;
        let mut out = ComplexTensor3::zeros(k, t, p);
        for pi in 0..p {
            for ti in 0..t {
                for ki in 0..k {
                    out.set(ki, ti, pi, self.y2[(pi * k + ki, ti)]);
                }
            }
        }
        out
    }
}

pub fn unfold_tensor(y: &ComplexTensor3) -> UnfoldedViews {
    let (k, t, p) = y.dims();
    let mut y1 = CMatrix::zeros(t * p, k);
    let mut y2 = CMatrix::zeros(p * k, t);
    let mut y3 = CMatrix::zeros(k * t, p);
    for pi in 0..p {
        for ti in 0..t {
            for ki in 0..k {
                let v = y.get(ki, ti, pi);
                y1[(ti * p + pi, ki)] = v;
                y2[(pi * k + ki, ti)] = v;
                y3[(ki * t + ti, pi)] = v;
            }
        }
    }
    UnfoldedViews {
        y1,
        y2,
        y3,
        dims: (k, t, p),
    }
}

pub fn unfold(y: &ReceivedTensor) -> UnfoldedViews {
    unfold_tensor(&y.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Dominant eigenpairs of `Y2^H Y2`: `He0 = diag(sqrt(λ)) · V^H`.
    Eigen,
    /// iid CN(0, 1) entries drawn from the given stream.
    Random { seed: u64, stream: u64 },
}

/// How each ALS least squares half-step is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsSolver {
    /// SVD pseudoinverse of the Khatri-Rao matrix.
    Pinv,
    /// Normal equations through the Hadamard-structured Gram matrix.
    Gram,
}

impl LsSolver {
    pub fn as_str(&self) -> &'static str {
        match self {
            LsSolver::Pinv => "pinv",
            LsSolver::Gram => "gram",
        }
    }
}

impl std::str::FromStr for LsSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinv" => Ok(LsSolver::Pinv),
            "gram" => Ok(LsSolver::Gram),
            other => Err(Error::InvalidValue(format!("unknown LS solver '{other}' (expected pinv or gram)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    /// Threshold on `‖Hr(i) - Hr(i-1)‖² / ‖Hr(i)‖²`.
    pub epsilon: f64,
    pub i_max: usize,
    pub init_mode: InitMode,
    pub solver: LsSolver,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            i_max: 15,
            init_mode: InitMode::Eigen,
            solver: LsSolver::Pinv,
        }
    }
}

impl AlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidValue(format!(
                "ALS epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.i_max == 0 {
            return Err(Error::InvalidValue("ALS i_max must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AlsResult {
    /// K×N.
    pub hr_hat: CMatrix,
    /// N×T.
    pub he_hat: CMatrix,
    pub iterations: usize,
    pub final_delta: f64,
    pub converged: bool,
    /// `‖Y2 - (Φ ⊙ Hr) He‖_F` after each iteration.
    pub residual_history: Vec<f64>,
    /// Rank-deficiency notices from the LS solves.
    pub warnings: Vec<String>,
}

/// Initial `He` (N×T) from the `n` dominant eigenpairs of `Y2^H Y2`.
pub fn als_init(y2: &CMatrix, n: usize) -> Result<CMatrix> {
    let t = y2.ncols();
    if n > t {
        return Err(Error::Dimension(format!(
            "cannot take {n} eigenvectors of a {t}x{t} Gram matrix"
        )));
    }
    let gram = y2.adjoint() * y2;
    let eig = dominant_eigvecs(&gram, n)?;
    let mut he0 = eig.vectors.adjoint();
    for (r, &lam) in eig.values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        he0.row_mut(r).scale_mut(s);
    }
    Ok(he0)
}

fn check_views(views: &UnfoldedViews, phi: &PhaseSchedule) -> Result<(usize, usize, usize, usize)> {
    let (k, t, p) = views.dims;
    if phi.p() != p {
        return Err(Error::Dimension(format!(
            "tensor has P={p} but the phase schedule has {} rows",
            phi.p()
        )));
    }
    let n = phi.n();
    if t * p < n || p * k < n {
        return Err(Error::Dimension(format!(
            "LS subproblems underdetermined: T·P={}, P·K={}, N={n}",
            t * p,
            p * k
        )));
    }
    Ok((k, t, p, n))
}

pub fn als_estimate(views: &UnfoldedViews, phi: &PhaseSchedule, opts: &AlsOptions) -> Result<AlsResult> {
    opts.validate()?;
    let (_, t, _, n) = check_views(views, phi)?;
    let he0 = match opts.init_mode {
        InitMode::Eigen => als_init(&views.y2, n)?,
        InitMode::Random { seed, stream } => {
            sample_complex_gaussian(n, t, 1.0, &mut RngStream::new(seed, stream))?
        }
    };
    als_estimate_from(views, phi, he0, opts)
}

/// ALS starting from a caller-supplied `He(0)`.
pub fn als_estimate_from(
    views: &UnfoldedViews,
    phi: &PhaseSchedule,
    he0: CMatrix,
    opts: &AlsOptions,
) -> Result<AlsResult> {
    opts.validate()?;
    let (k, t, _, n) = check_views(views, phi)?;
    if he0.shape() != (n, t) {
        return Err(Error::Dimension(format!(
            "He(0) is {:?}, expected {:?}",
            he0.shape(),
            (n, t)
        )));
    }

    let mut he = he0;
    let mut hr_prev: Option<CMatrix> = None;
    let mut hr = CMatrix::zeros(k, n);
    let mut residual_history = Vec::with_capacity(opts.i_max);
    let mut warnings = Vec::new();
    let mut final_delta = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for i in 1..=opts.i_max {
        iterations = i;

        // Hr^T = (He^T ⊙ Φ)^† Y1
        let (hr_t, rank1) = ls_solve(&he.transpose(), &phi.phi, &views.y1, opts.solver)?;
        if rank1 < n {
            warnings.push(format!("iteration {i}: He^T ⊙ Φ has rank {rank1} < {n}"));
        }
        hr = hr_t.transpose();

        // He = (Φ ⊙ Hr)^† Y2
        let (he_new, rank2) = ls_solve(&phi.phi, &hr, &views.y2, opts.solver)?;
        if rank2 < n {
            warnings.push(format!("iteration {i}: Φ ⊙ Hr has rank {rank2} < {n}"));
        }
        he = he_new;
        let a2 = khatri_rao(&phi.phi, &hr)?;

        residual_history.push(frob2(&(&views.y2 - matmul(&a2, &he)?)).sqrt());

        final_delta = match &hr_prev {
            None => f64::INFINITY,
            Some(prev) => relative_change(&hr, prev),
        };
        if final_delta <= opts.epsilon {
            converged = true;
            break;
        }
        hr_prev = Some(hr.clone());
    }

    if hr.iter().chain(he.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("ALS produced non-finite estimates".into()));
    }

    Ok(AlsResult {
        hr_hat: hr,
        he_hat: he,
        iterations,
        final_delta,
        converged,
        residual_history,
        warnings,
    })
}

/// Least squares solution of `(a ⊙ b) z = y` and the numerical rank used.
fn ls_solve(a: &CMatrix, b: &CMatrix, y: &CMatrix, solver: LsSolver) -> Result<(CMatrix, usize)> {
    let kr = khatri_rao(a, b)?;
    match solver {
        LsSolver::Pinv => {
            let (p, rank) = pseudo_inverse_ranked(&kr, default_pinv_tol(kr.nrows(), kr.ncols()))?;
            Ok((matmul(&p, y)?, rank))
        }
        LsSolver::Gram => {
            // Eigenvalues of the Gram are squared singular values, so the
            // cutoff N·eps on them drops directions below about sqrt(N·eps)
            // of the largest singular value.
            let n = kr.ncols();
            let (g_pinv, rank) = hermitian_pinv_ranked(&khatri_rao_gram(a, b)?, default_pinv_tol(n, n))?;
            Ok((matmul(&g_pinv, &adjoint_mul(&kr, y)?)?, rank))
        }
    }
}

fn relative_change(cur: &CMatrix, prev: &CMatrix) -> f64 {
    let num = frob2(&(cur - prev));
    let den = frob2(cur);
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Noiseless mode-1 model `(He^T ⊙ Φ) · Hr^T`.
pub fn model_y1(hr: &CMatrix, he: &CMatrix, phi: &PhaseSchedule) -> Result<CMatrix> {
    Ok(khatri_rao(&he.transpose(), &phi.phi)? * hr.transpose())
}

/// Noiseless mode-2 model `(Φ ⊙ Hr) · He`.
pub fn model_y2(hr: &CMatrix, he: &CMatrix, phi: &PhaseSchedule) -> Result<CMatrix> {
    Ok(khatri_rao(&phi.phi, hr)? * he)
}

/// Noiseless mode-3 model `(Hr ⊙ He^T) · Φ^T`.
pub fn model_y3(hr: &CMatrix, he: &CMatrix, phi: &PhaseSchedule) -> Result<CMatrix> {
    Ok(khatri_rao(hr, &he.transpose())? * phi.phi.transpose())
}
