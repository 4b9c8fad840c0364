//! Scaling/phase ambiguity removal for both estimation stages, and NMSE.

use crate::error::{Error, Result};
use crate::linalg::{frob2, CMatrix, C64};

/// Floor used when an NMSE of zero has to be shown in dB.
pub const DEFAULT_DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentMode {
    /// Per-column least-squares complex scale against a reference `Hr`.
    DiagonalLs,
    /// Divide every column of `Hr` by its first entry.
    FirstRowNormalization,
    /// Single complex scale fitted on the known pilot block of `X`.
    PilotLs,
}

impl AlignmentMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlignmentMode::DiagonalLs => "diagonal_ls",
            AlignmentMode::FirstRowNormalization => "first_row_normalization",
            AlignmentMode::PilotLs => "pilot_ls",
        }
    }
}

impl std::str::FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal_ls" => Ok(AlignmentMode::DiagonalLs),
            "first_row_normalization" => Ok(AlignmentMode::FirstRowNormalization),
            "pilot_ls" => Ok(AlignmentMode::PilotLs),
            other => Err(Error::InvalidValue(format!("unknown alignment mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub mode: AlignmentMode,
    /// Factors applied to the first factor (columns of `Hr`, or `X`).
    pub scale_factors: Vec<C64>,
    /// `‖reference - aligned‖_F`, or 0 when there is no reference.
    pub residual: f64,
    /// Columns that could not be aligned (zero column or zero anchor entry);
    /// they are passed through unscaled.
    pub failed_columns: Vec<usize>,
}

/// Resolves the diagonal ambiguity `Hr·Λ, Λ⁻¹·He` of the PARAFAC stage.
///
/// `DiagonalLs` fits `λ_n = argmin ‖Hr_ref[:, n] - λ Hr_hat[:, n]‖²` per column.
/// `FirstRowNormalization` ignores the reference and makes the first row of
/// `Hr` all ones; compare against [`first_row_normalized`] references.
pub fn align_parafac(
    hr_hat: &CMatrix,
    he_hat: &CMatrix,
    hr_ref: &CMatrix,
    mode: AlignmentMode,
) -> Result<(CMatrix, CMatrix, AlignmentReport)> {
    let n = hr_hat.ncols();
    if he_hat.nrows() != n || hr_ref.ncols() != n {
        return Err(Error::Dimension(format!(
            "Hr_hat has {n} columns, He_hat {} rows, Hr_ref {} columns",
            he_hat.nrows(),
            hr_ref.ncols()
        )));
    }
    let mut scales = Vec::with_capacity(n);
    let mut failed = Vec::new();
    for c in 0..n {
        let col = hr_hat.column(c);
        let lam = match mode {
            AlignmentMode::DiagonalLs => {
                if hr_ref.nrows() != hr_hat.nrows() {
                    return Err(Error::Dimension("Hr_hat and Hr_ref row counts differ".into()));
                }
                let den: f64 = col.iter().map(|z| z.norm_sqr()).sum();
                let num: C64 = col
                    .iter()
                    .zip(hr_ref.column(c).iter())
                    .map(|(h, r)| h.conj() * r)
                    .sum();
                (den > 0.0).then(|| num / den)
            }
            AlignmentMode::FirstRowNormalization => {
                let a = if col.is_empty() { C64::default() } else { col[0] };
                (a.norm() > 0.0).then(|| a.inv())
            }
            AlignmentMode::PilotLs => {
                return Err(Error::InvalidValue(
                    "pilot_ls applies to the bilinear stage; use align_bilinear".into(),
                ))
            }
        };
        match lam {
            Some(l) if l.norm() > 0.0 && l.re.is_finite() && l.im.is_finite() => scales.push(l),
            _ => {
                failed.push(c);
                scales.push(C64::new(1.0, 0.0));
            }
        }
    }
    let (hr_al, he_al) = apply_diagonal(hr_hat, he_hat, &scales);
    let residual = match mode {
        AlignmentMode::DiagonalLs => frob2(&(hr_ref - &hr_al)).sqrt(),
        _ => 0.0,
    };
    Ok((
        hr_al,
        he_al,
        AlignmentReport {
            mode,
            scale_factors: scales,
            residual,
            failed_columns: failed,
        },
    ))
}

/// `(Hr·diag(λ), diag(λ)⁻¹·He)`.
pub fn apply_diagonal(hr: &CMatrix, he: &CMatrix, scales: &[C64]) -> (CMatrix, CMatrix) {
    let mut hr_al = hr.clone();
    let mut he_al = he.clone();
    for (c, &l) in scales.iter().enumerate() {
        for z in hr_al.column_mut(c).iter_mut() {
            *z *= l;
        }
        let inv = l.inv();
        for z in he_al.row_mut(c).iter_mut() {
            *z *= inv;
        }
    }
    (hr_al, he_al)
}

/// Reference pair in the first-row-normalized convention: `Hr` columns
/// divided by their first entry and `He` rows multiplied by it. Also returns
/// the per-column factors so `Hs` can be rescaled the same way as `He`.
pub fn first_row_normalized(hr: &CMatrix, he: &CMatrix) -> Result<(CMatrix, CMatrix, Vec<C64>)> {
    let (a, b, rep) = align_parafac(hr, he, hr, AlignmentMode::FirstRowNormalization)?;
    if !rep.failed_columns.is_empty() {
        return Err(Error::Alignment(format!(
            "reference columns {:?} have a zero first entry",
            rep.failed_columns
        )));
    }
    Ok((a, b, rep.scale_factors))
}

/// Removes the scalar ambiguity `(Hs·c, X/c)` of the bilinear stage with the
/// pilot block: `c = argmin ‖X_hat[:, pilots]·c - pilot_values‖²`.
pub fn align_bilinear(
    hs_hat: &CMatrix,
    x_hat: &CMatrix,
    pilot_cols: &[usize],
    pilot_values: &CMatrix,
) -> Result<(CMatrix, CMatrix, AlignmentReport)> {
    if pilot_cols.is_empty() {
        return Err(Error::Alignment("no pilot columns".into()));
    }
    if pilot_values.shape() != (x_hat.nrows(), pilot_cols.len()) {
        return Err(Error::Dimension(format!(
            "pilot values are {:?}, expected {:?}",
            pilot_values.shape(),
            (x_hat.nrows(), pilot_cols.len())
        )));
    }
    if hs_hat.ncols() != x_hat.nrows() {
        return Err(Error::Dimension("Hs_hat columns must match X_hat rows".into()));
    }
    if let Some(&bad) = pilot_cols.iter().find(|&&c| c >= x_hat.ncols()) {
        return Err(Error::Index(format!("pilot column {bad} outside X_hat")));
    }
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for (j, &c) in pilot_cols.iter().enumerate() {
        for m in 0..x_hat.nrows() {
            let e = x_hat[(m, c)];
            num += e.conj() * pilot_values[(m, j)];
            den += e.norm_sqr();
        }
    }
    if frob2(pilot_values) == 0.0 || den == 0.0 {
        return Err(Error::Alignment("degenerate pilot block".into()));
    }
    let c = num / den;
    if c.norm() == 0.0 || !c.re.is_finite() || !c.im.is_finite() {
        return Err(Error::Alignment("pilot fit produced a zero scale".into()));
    }
    let x_al = x_hat.map(|z| z * c);
    let inv = c.inv();
    let hs_al = hs_hat.map(|z| z * inv);
    let mut resid = 0.0;
    for (j, &col) in pilot_cols.iter().enumerate() {
        for m in 0..x_al.nrows() {
            resid += (x_al[(m, col)] - pilot_values[(m, j)]).norm_sqr();
        }
    }
    Ok((
        hs_al,
        x_al,
        AlignmentReport {
            mode: AlignmentMode::PilotLs,
            scale_factors: vec![c],
            residual: resid.sqrt(),
            failed_columns: Vec::new(),
        },
    ))
}

/// `‖reference - estimate‖²_F / ‖reference‖²_F`.
pub fn nmse(est: &CMatrix, reference: &CMatrix) -> Result<f64> {
    if est.shape() != reference.shape() {
        return Err(Error::Dimension(format!(
            "estimate {:?} vs reference {:?}",
            est.shape(),
            reference.shape()
        )));
    }
    let den = frob2(reference);
    if den == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok(frob2(&(reference - est)) / den)
}

/// `10·log10(value)`, clamped below at `floor_db` (so 0 maps to the floor).
pub fn to_db(value: f64, floor_db: f64) -> f64 {
    if value <= 0.0 {
        return floor_db;
    }
    (10.0 * value.log10()).max(floor_db)
}

pub fn nmse_db(est: &CMatrix, reference: &CMatrix) -> Result<f64> {
    nmse(est, reference).map(|v| to_db(v, DEFAULT_DB_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, sample_complex_gaussian, RngStream};

    fn pair(seed: u64) -> (CMatrix, CMatrix) {
        let mut rng = RngStream::new(seed, 0);
        (
            sample_complex_gaussian(5, 3, 1.0, &mut rng).unwrap(),
            sample_complex_gaussian(3, 7, 1.0, &mut rng).unwrap(),
        )
    }

    #[test]
    fn removes_planted_diagonal() {
        let (hr, he) = pair(1);
        let lam = [C64::new(0.3, -2.0), C64::new(-1.5, 0.2), C64::from_polar(4.0, 1.0)];
        let (hr_hat, he_hat) = apply_diagonal(&hr, &he, &lam);
        let (a, b, rep) = align_parafac(&hr_hat, &he_hat, &hr, AlignmentMode::DiagonalLs).unwrap();
        assert!(max_abs_diff(&a, &hr) <= 1e-12);
        assert!(max_abs_diff(&b, &he) <= 1e-12);
        assert!(rep.residual <= 1e-12);
        assert!(rep.failed_columns.is_empty());
    }

    #[test]
    fn identity_alignment() {
        let (hr, he) = pair(2);
        let (a, b, rep) = align_parafac(&hr, &he, &hr, AlignmentMode::DiagonalLs).unwrap();
        assert!(max_abs_diff(&a, &hr) <= 1e-15);
        assert!(max_abs_diff(&b, &he) <= 1e-15);
        assert!(rep.residual <= 1e-14);
        assert!(rep.scale_factors.iter().all(|l| (l - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn zero_column_is_reported() {
        let (mut hr, he) = pair(3);
        let reference = hr.clone();
        hr.column_mut(1).fill(C64::new(0.0, 0.0));
        let (_, _, rep) = align_parafac(&hr, &he, &reference, AlignmentMode::DiagonalLs).unwrap();
        assert_eq!(rep.failed_columns, vec![1]);
    }

    #[test]
    fn first_row_mode_matches_normalized_reference() {
        let (hr, he) = pair(4);
        let lam = [C64::new(2.0, 1.0), C64::new(0.1, 0.0), C64::new(-1.0, -1.0)];
        let (hr_hat, he_hat) = apply_diagonal(&hr, &he, &lam);
        let (a, b, _) =
            align_parafac(&hr_hat, &he_hat, &hr, AlignmentMode::FirstRowNormalization).unwrap();
        let (ra, rb, _) = first_row_normalized(&hr, &he).unwrap();
        assert!(max_abs_diff(&a, &ra) <= 1e-12);
        assert!(max_abs_diff(&b, &rb) <= 1e-12);
        assert!(a.row(0).iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn idempotent() {
        let (hr, he) = pair(5);
        let (hr_hat, he_hat) = apply_diagonal(&hr, &he, &[C64::new(1.0, 3.0); 3]);
        let noisy = hr_hat.map(|z| z * C64::new(1.0, 0.0)) + CMatrix::from_element(5, 3, C64::new(0.01, 0.0));
        let (a1, b1, _) = align_parafac(&noisy, &he_hat, &hr, AlignmentMode::DiagonalLs).unwrap();
        let (a2, b2, _) = align_parafac(&a1, &b1, &hr, AlignmentMode::DiagonalLs).unwrap();
        assert!(max_abs_diff(&a1, &a2) <= 1e-12);
        assert!(max_abs_diff(&b1, &b2) <= 1e-12);
    }

    #[test]
    fn diagonal_ls_beats_grid() {
        let (hr, he) = pair(6);
        let mut rng = RngStream::new(6, 1);
        let noisy = &hr + sample_complex_gaussian(5, 3, 0.2, &mut rng).unwrap();
        let (a, _, rep) = align_parafac(&noisy, &he, &hr, AlignmentMode::DiagonalLs).unwrap();
        for c in 0..3 {
            let best = (hr.column(c) - a.column(c)).norm_squared();
            for re in -20..=20 {
                for im in -20..=20 {
                    let l = C64::new(re as f64 * 0.1, im as f64 * 0.1);
                    let r = (hr.column(c) - noisy.column(c) * l).norm_squared();
                    assert!(best <= r + 1e-12);
                }
            }
        }
        assert!(rep.residual > 0.0);
    }

    #[test]
    fn bilinear_planted_scalar() {
        let mut rng = RngStream::new(7, 0);
        let hs = sample_complex_gaussian(6, 3, 1.0, &mut rng).unwrap();
        let x = sample_complex_gaussian(3, 9, 1.0, &mut rng).unwrap();
        let pilots = vec![0, 1, 2];
        let pv = x.columns(0, 3).into_owned();
        for c0 in [C64::new(2.0, -0.5), C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)] {
            let x_hat = x.map(|z| z / c0);
            let hs_hat = hs.map(|z| z * c0);
            let (hs_a, x_a, rep) = align_bilinear(&hs_hat, &x_hat, &pilots, &pv).unwrap();
            assert!(max_abs_diff(&x_a, &x) <= 1e-12);
            assert!(max_abs_diff(&hs_a, &hs) <= 1e-12);
            assert!((rep.scale_factors[0] - c0).norm() <= 1e-12);
        }
    }

    #[test]
    fn bilinear_degenerate() {
        let x = CMatrix::zeros(2, 4);
        let hs = CMatrix::zeros(3, 2);
        assert!(align_bilinear(&hs, &x, &[], &CMatrix::zeros(2, 0)).is_err());
        let pv = CMatrix::from_element(2, 1, C64::new(1.0, 0.0));
        assert!(matches!(
            align_bilinear(&hs, &x, &[0], &pv),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn nmse_cases() {
        let (hr, _) = pair(8);
        assert_eq!(nmse(&hr, &hr).unwrap(), 0.0);
        assert_eq!(nmse_db(&hr, &hr).unwrap(), DEFAULT_DB_FLOOR);
        assert!((nmse(&CMatrix::zeros(5, 3), &hr).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&hr.scale(2.0), &hr).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse_db(&CMatrix::zeros(5, 3), &hr).unwrap().abs() < 1e-12);
        assert!(matches!(
            nmse(&hr, &CMatrix::zeros(5, 3)),
            Err(Error::UndefinedMetric)
        ));
        assert!(nmse(&hr, &CMatrix::zeros(3, 5)).is_err());
    }
}
