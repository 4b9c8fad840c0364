//! Dense complex matrix and order-3 tensor substrate.
//!
//! Matrices are `nalgebra::DMatrix<C64>`; everything here is a pure function
//! of its inputs except [`RngStream`], which owns a ChaCha8 generator keyed by
//! `(master_seed, stream_id)`.

use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;


/// K×T×P block of complex samples.
///
/// Storage order is k fastest, then t, then p; the same order is used when a
/// tensor is serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    dim_k: usize,
    dim_t: usize,
    dim_p: usize,
    data: Vec<C64>,
}

impl ComplexTensor3 {
    pub fn zeros(dim_k: usize, dim_t: usize, dim_p: usize) -> Self {
        Self {
            dim_k,
            dim_t,
            dim_p,
            data: vec![C64::new(0.0, 0.0); dim_k * dim_t * dim_p],
        }
    }

    pub fn from_vec(dim_k: usize, dim_t: usize, dim_p: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim_k * dim_t * dim_p {
            return Err(Error::Dimension(format!(
                "tensor {dim_k}x{dim_t}x{dim_p} needs {} entries, got {}",
                dim_k * dim_t * dim_p,
                data.len()
            )));
        }
        Ok(Self {
            dim_k,
            dim_t,
            dim_p,
            data,
        })
    }

    /// Stacks `P` slices of shape K×T along the third mode.
    pub fn from_slices(slices: &[CMatrix]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::Dimension("no slices given".into()));
        };
        let (k, t) = first.shape();
        let mut out = Self::zeros(k, t, slices.len());
        for (p, s) in slices.iter().enumerate() {
            if s.shape() != (k, t) {
                return Err(Error::Dimension(format!(
                    "slice {p} is {:?}, expected {:?}",
                    s.shape(),
                    (k, t)
                )));
            }
            for ti in 0..t {
                for ki in 0..k {
                    out.set(ki, ti, p, s[(ki, ti)]);
                }
            }
        }
        Ok(out)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dim_k, self.dim_t, self.dim_p)
    }

    #[inline]
    fn offset(&self, k: usize, t: usize, p: usize) -> usize {
        k + self.dim_k * (t + self.dim_t * p)
    }

    #[inline]
    pub fn get(&self, k: usize, t: usize, p: usize) -> C64 {
        self.data[self.offset(k, t, p)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, t: usize, p: usize, v: C64) {
        let i = self.offset(k, t, p);
        self.data[i] = v;
    }

    /// Frontal slice `Y[:, :, p]` as a K×T matrix.
    pub fn slice_p(&self, p: usize) -> CMatrix {
        CMatrix::from_fn(self.dim_k, self.dim_t, |k, t| self.get(k, t, p))
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Seeded random stream. Same `(master_seed, stream_id)` gives the same draws;
/// distinct stream ids select disjoint ChaCha8 streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// One circularly symmetric CN(0, variance) sample.
    pub fn complex_normal(&mut self, variance: f64) -> C64 {
        let s = (variance / 2.0).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        C64::new(s * re, s * im)
    }
}

/// Column-wise Kronecker product. Row `i*J + j` of the result holds
/// `a[(i, n)] * b[(j, n)]`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "khatri_rao: column counts differ ({} vs {})",
            a.ncols(),
            b.ncols()
        )));
    }
    let (i_rows, j_rows) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(i_rows * j_rows, a.ncols());
    for n in 0..a.ncols() {
        for i in 0..i_rows {
            let ain = a[(i, n)];
            for j in 0..j_rows {
                out[(i * j_rows + j, n)] = ain * b[(j, n)];
            }
        }
    }
    Ok(out)
}

/// Default relative cutoff: `max(rows, cols) * f64::EPSILON`.
pub fn default_pinv_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

fn check_finite(a: &CMatrix, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what}: input contains NaN or Inf")))
    }
}

/// `a = u · diag(s) · v^H` with `s` in descending order.
struct ThinSvd {
    u: CMatrix,
    s: Vec<f64>,
    v: CMatrix,
}

fn to_faer(a: &CMatrix) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn thin_svd(a: &CMatrix, what: &str) -> Result<ThinSvd> {
    check_finite(a, what)?;
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("{what}: SVD failed on a {}x{} matrix: {e:?}", a.nrows(), a.ncols())))?;
    let (u, sd, v) = (svd.U(), svd.S(), svd.V());
    let r = sd.dim();
    Ok(ThinSvd {
        u: CMatrix::from_fn(a.nrows(), r, |i, j| u[(i, j)]),
        s: (0..r).map(|i| sd[i].re).collect(),
        v: CMatrix::from_fn(a.ncols(), r, |i, j| v[(i, j)]),
    })
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    check_finite(a, "singular_values")?;
    let s = to_faer(a)
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular_values: SVD failed: {e:?}")))?;
    let mut s: Vec<f64> = s.into_iter().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Number of singular values above `max(rows, cols) * eps * sigma_max`.
pub fn numerical_rank(a: &CMatrix) -> Result<usize> {
    let s = singular_values(a)?;
    let Some(&smax) = s.first() else {
        return Ok(0);
    };
    let cut = default_pinv_tol(a.nrows(), a.ncols()) * smax;
    Ok(s.iter().filter(|&&v| v > cut && v > 0.0).count())
}

/// Moore-Penrose pseudoinverse together with the numerical rank that was kept.
pub fn pseudo_inverse_ranked(a: &CMatrix, tol: f64) -> Result<(CMatrix, usize)> {
    if a.is_empty() {
        return Err(Error::Dimension("pseudo_inverse of an empty matrix".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidValue(format!("pinv tolerance {tol} must be >= 0")));
    }
    let svd = thin_svd(a, "pseudo_inverse")?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let cut = tol * smax;
    // V_r · diag(1/s) · U_r^H over the kept directions.
    let kept: Vec<usize> = (0..svd.s.len()).filter(|&r| svd.s[r] > cut && svd.s[r] > 0.0).collect();
    let w = Mat::from_fn(a.ncols(), kept.len(), |i, c| svd.v[(i, kept[c])] * (1.0 / svd.s[kept[c]]));
    let u = Mat::from_fn(a.nrows(), kept.len(), |i, c| svd.u[(i, kept[c])]);
    Ok((from_faer((w * u.adjoint()).as_ref()), kept.len()))
}

pub fn pseudo_inverse(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    pseudo_inverse_ranked(a, tol).map(|(m, _)| m)
}

/// Pseudoinverse with the default cutoff from [`default_pinv_tol`].
pub fn pinv(a: &CMatrix) -> Result<CMatrix> {
    pseudo_inverse(a, default_pinv_tol(a.nrows(), a.ncols()))
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn check_inner(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a.1 != b.0 {
        return Err(Error::Dimension(format!("{what}: cannot multiply {a:?} by {b:?}")));
    }
    Ok(())
}

/// `a · b` using faer's blocked kernels (sequential).
pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_inner(a.shape(), b.shape(), "matmul")?;
    Ok(from_faer((to_faer(a) * to_faer(b)).as_ref()))
}

/// `a^H · b` without materializing the adjoint.
pub fn adjoint_mul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_inner((a.ncols(), a.nrows()), b.shape(), "adjoint_mul")?;
    Ok(from_faer((to_faer(a).adjoint() * to_faer(b)).as_ref()))
}

/// `(a ⊙ b)^H (a ⊙ b)` without forming the Khatri-Rao product: the Hadamard
/// product of the two small Gram matrices.
pub fn khatri_rao_gram(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "Khatri-Rao Gram needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(adjoint_mul(a, a)?.component_mul(&adjoint_mul(b, b)?))
}

/// Pseudoinverse of a Hermitian PSD matrix from its eigendecomposition,
/// keeping eigenvalues above `tol * lambda_max`, plus the kept rank.
pub fn hermitian_pinv_ranked(g: &CMatrix, tol: f64) -> Result<(CMatrix, usize)> {
    if !g.is_square() || g.is_empty() {
        return Err(Error::Dimension(format!("Hermitian pseudoinverse of a {:?} matrix", g.shape())));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidValue(format!("pinv tolerance {tol} must be >= 0")));
    }
    check_finite(g, "hermitian_pinv")?;
    let n = g.nrows();
    let herm = (g + g.adjoint()).scale(0.5);
    let eig = to_faer(&herm)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    let (vals, vecs) = (eig.S(), eig.U());
    let lmax = (0..n).fold(0.0f64, |m, i| m.max(vals[i].re));
    let cut = tol * lmax;
    let kept: Vec<usize> = (0..n).filter(|&j| vals[j].re > cut && vals[j].re > 0.0).collect();
    let rank = kept.len();
    // V_r · diag(1/λ) · V_r^H over the kept eigenpairs.
    let v = Mat::from_fn(n, rank, |i, c| vecs[(i, kept[c])]);
    let w = Mat::from_fn(n, rank, |i, c| vecs[(i, kept[c])] * (1.0 / vals[kept[c]].re));
    let out = from_faer((w * v.adjoint()).as_ref());
    Ok((out, rank))
}

/// Leading singular triplet `(u, sigma, v)` with `a ≈ sigma * u * v^H`.
/// The phase of `u` is fixed so its largest-magnitude entry is real
/// nonnegative; `v` absorbs the compensating phase.
pub fn leading_singular_triplet(a: &CMatrix) -> Result<(Vec<C64>, f64, Vec<C64>)> {
    if a.is_empty() {
        return Err(Error::Dimension("leading singular pair of empty matrix".into()));
    }
    let svd = thin_svd(a, "leading_singular_triplet")?;
    let sigma = svd.s[0];
    let mut u: Vec<C64> = svd.u.column(0).iter().copied().collect();
    let mut v: Vec<C64> = svd.v.column(0).iter().copied().collect();
    let phase = canonical_phase(&u);
    for z in u.iter_mut() {
        *z *= phase;
    }
    for z in v.iter_mut() {
        *z *= phase;
    }
    Ok((u, sigma, v))
}

/// Unit-modulus factor that rotates the largest-magnitude entry (first one on
/// ties) onto the nonnegative real axis.
fn canonical_phase(v: &[C64]) -> C64 {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            idx = i;
        }
    }
    if best <= 0.0 {
        return C64::new(1.0, 0.0);
    }
    v[idx].conj() / best
}

/// Eigenpairs of a Hermitian matrix in descending eigenvalue order.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// One unit-norm eigenvector per column.
    pub vectors: CMatrix,
}

pub fn hermitian_deviation(g: &CMatrix) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..g.nrows() {
        for j in i..g.ncols() {
            dev = dev.max((g[(i, j)] - g[(j, i)].conj()).norm());
        }
    }
    dev
}

/// The `n` dominant eigenpairs of a Hermitian PSD matrix.
///
/// Output is deterministic: each eigenvector's largest-magnitude entry is real
/// nonnegative, and eigenvalues that coincide to within `1e-12` relative are
/// ordered by lexicographically descending entry magnitudes of their vectors.
pub fn dominant_eigvecs(g: &CMatrix, n: usize) -> Result<Eigenpairs> {
    if !g.is_square() {
        return Err(Error::Dimension(format!(
            "dominant_eigvecs needs a square matrix, got {:?}",
            g.shape()
        )));
    }
    let t = g.nrows();
    if n > t {
        return Err(Error::Dimension(format!(
            "requested {n} eigenvectors of a {t}x{t} matrix"
        )));
    }
    check_finite(g, "dominant_eigvecs")?;
    let scale = g.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let dev = hermitian_deviation(g);
    if dev > 1e-10 * scale {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian (max |G - G^H| = {dev:e})"
        )));
    }
    if n == 0 {
        return Ok(Eigenpairs {
            values: Vec::new(),
            vectors: CMatrix::zeros(t, 0),
        });
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let herm = (g + g.adjoint()).scale(0.5);
    let eig = to_faer(&herm)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    let (vals, vecs) = (eig.S(), eig.U());

    let mut pairs: Vec<(f64, Vec<C64>)> = (0..t)
        .map(|j| {
            let mut v: Vec<C64> = (0..t).map(|i| vecs[(i, j)]).collect();
            let ph = canonical_phase(&v);
            for z in v.iter_mut() {
                *z *= ph;
            }
            (vals[j].re, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let lam_scale = pairs.iter().fold(1.0f64, |m, p| m.max(p.0.abs()));
    let tie = 1e-12 * lam_scale;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[start].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lex_magnitude_desc(&a.1, &b.1));
        }
        start = end;
    }

    let values = pairs.iter().take(n).map(|p| p.0).collect();
    let vectors = CMatrix::from_fn(t, n, |r, c| pairs[c].1[r]);
    Ok(Eigenpairs { values, vectors })
}

fn lex_magnitude_desc(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let (mx, my) = (x.norm(), y.norm());
        if (mx - my).abs() > 1e-12 {
            return my.total_cmp(&mx);
        }
    }
    std::cmp::Ordering::Equal
}

/// Column-orthonormal DFT phase matrix: entry `(p, n)` is
/// `exp(-j 2π p n / P) / sqrt(P)` (zero-based indices).
pub fn dft_phase_matrix(p: usize, n: usize) -> Result<CMatrix> {
    if p < n {
        return Err(Error::Infeasible(format!(
            "a {p}x{n} DFT phase matrix cannot have orthonormal columns (P < N)"
        )));
    }
    if p == 0 {
        return Err(Error::Dimension("P must be positive".into()));
    }
    let scale = 1.0 / (p as f64).sqrt();
    Ok(CMatrix::from_fn(p, n, |r, c| {
        let ang = -2.0 * std::f64::consts::PI * ((r * c) % p) as f64 / p as f64;
        C64::from_polar(scale, ang)
    }))
}

/// Matrix of iid CN(0, variance) entries, filled row by row.
pub fn sample_complex_gaussian(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut RngStream,
) -> Result<CMatrix> {
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::InvalidValue(format!(
            "variance must be finite and >= 0, got {variance}"
        )));
    }
    let mut out = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            out[(r, c)] = rng.complex_normal(variance);
        }
    }
    Ok(out)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn frob2(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
