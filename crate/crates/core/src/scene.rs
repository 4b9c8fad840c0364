//! Ground-truth synthesis: channels, sparse transmit frames with a pilot
//! block, RIS phase schedules and the received tensor
//! `Y_p = Hr · diag(Φ[p, :]) · Hs · X + W_p`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    dft_phase_matrix, frob2, numerical_rank, sample_complex_gaussian, CMatrix, ComplexTensor3,
    RngStream, C64,
};

/// Regeneration attempts before a rank-deficient sparse frame is accepted.
const MAX_SUPPORT_REDRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Users.
    pub k: usize,
    /// BS antennas.
    pub m: usize,
    /// RIS elements.
    pub n: usize,
    /// Time slots.
    pub t: usize,
    /// RIS phase configurations.
    pub p: usize,
    /// Fraction of nonzero entries outside the pilot block.
    pub beta: f64,
    pub pilot_len: usize,
    pub snr_db: f64,
    pub sigma_x2: f64,
    pub sigma_h2: f64,
}

impl SceneConfig {
    /// A scene with unit signal/channel variance, `pilot_len = m` and 20 dB SNR.
    pub fn new(k: usize, m: usize, n: usize, t: usize, p: usize, beta: f64) -> Self {
        Self {
            k,
            m,
            n,
            t,
            p,
            beta,
            pilot_len: m,
            snr_db: 20.0,
            sigma_x2: 1.0,
            sigma_h2: 1.0,
        }
    }

    /// `P < N` is accepted: the phase schedule then falls back to a partial
    /// DFT (see [`PhaseSchedule::for_scene`]).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidValue(msg));
        if self.k == 0 || self.m == 0 || self.n == 0 || self.t == 0 || self.p == 0 {
            return bad(format!(
                "all dimensions must be positive (K={}, M={}, N={}, T={}, P={})",
                self.k, self.m, self.n, self.t, self.p
            ));
        }
        if self.t < self.m {
            return bad(format!("need T >= M (T={}, M={})", self.t, self.m));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if self.pilot_len > self.t {
            return bad(format!(
                "pilot_len {} exceeds T {}",
                self.pilot_len, self.t
            ));
        }
        if !(self.sigma_x2 >= 0.0 && self.sigma_x2.is_finite()) {
            return bad(format!("sigma_x2 must be >= 0, got {}", self.sigma_x2));
        }
        if !(self.sigma_h2 >= 0.0 && self.sigma_h2.is_finite()) {
            return bad(format!("sigma_h2 must be >= 0, got {}", self.sigma_h2));
        }
        if self.snr_db.is_nan() {
            return bad("snr_db is NaN".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    /// RIS ← BS, N×M.
    pub hs: CMatrix,
    /// users ← RIS, K×N.
    pub hr: CMatrix,
}

impl ChannelPair {
    /// Equivalent channel `Hs · X` (N×T).
    pub fn equivalent(&self, x: &CMatrix) -> CMatrix {
        &self.hs * x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalFrame {
    /// M×T transmit block.
    pub x: CMatrix,
    /// True where an entry may be nonzero (pilot entries included).
    pub support: DMatrix<bool>,
    /// Indices of the leading pilot columns.
    pub pilot_cols: Vec<usize>,
}

impl SignalFrame {
    /// Pilot columns of `x` as an M×T_p matrix.
    pub fn pilot_block(&self) -> CMatrix {
        CMatrix::from_fn(self.x.nrows(), self.pilot_cols.len(), |m, j| {
            self.x[(m, self.pilot_cols[j])]
        })
    }

    /// Fraction of true support entries among the non-pilot columns.
    pub fn data_density(&self) -> f64 {
        let cols: Vec<usize> = (0..self.x.ncols())
            .filter(|c| !self.pilot_cols.contains(c))
            .collect();
        if cols.is_empty() {
            return 0.0;
        }
        let on = cols
            .iter()
            .map(|&c| (0..self.x.nrows()).filter(|&m| self.support[(m, c)]).count())
            .sum::<usize>();
        on as f64 / (cols.len() * self.x.nrows()) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    /// P×N phase matrix; row p configures the RIS for block p.
    pub phi: CMatrix,
}

impl PhaseSchedule {
    /// Column-orthonormal DFT schedule; requires `P >= N`.
    pub fn dft(p: usize, n: usize) -> Result<Self> {
        Ok(Self {
            phi: dft_phase_matrix(p, n)?,
        })
    }

    /// DFT schedule when `P >= N`; otherwise the first `P` rows of the
    /// N-point DFT scaled by `1/sqrt(P)`, which keeps unit-modulus entries and
    /// distinct columns but cannot be column-orthonormal.
    pub fn for_scene(p: usize, n: usize) -> Result<Self> {
        if p >= n {
            return Self::dft(p, n);
        }
        if p == 0 {
            return Err(Error::Dimension("P must be positive".into()));
        }
        let scale = 1.0 / (p as f64).sqrt();
        let phi = CMatrix::from_fn(p, n, |r, c| {
            let ang = -2.0 * std::f64::consts::PI * ((r * c) % n) as f64 / n as f64;
            C64::from_polar(scale, ang)
        });
        Ok(Self { phi })
    }

    pub fn p(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n(&self) -> usize {
        self.phi.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedTensor {
    /// K×T×P observations.
    pub y: ComplexTensor3,
    /// Per-entry noise variance that was added.
    pub noise_var: f64,
}

pub fn gen_channels(cfg: &SceneConfig, rng: &mut RngStream) -> Result<ChannelPair> {
    cfg.validate()?;
    let hs = sample_complex_gaussian(cfg.n, cfg.m, cfg.sigma_h2, rng)?;
    let hr = sample_complex_gaussian(cfg.k, cfg.n, cfg.sigma_h2, rng)?;
    Ok(ChannelPair { hs, hr })
}

/// Known pilot entry `(m, t)`: unit modulus, `exp(-j 2π m t / max(M, T_p))`.
/// With `T_p = M` the block is `sqrt(M)` times the unitary M-point DFT.
pub fn pilot_value(m: usize, t: usize, m_total: usize, pilot_len: usize) -> C64 {
    let period = m_total.max(pilot_len).max(1);
    let ang = -2.0 * std::f64::consts::PI * ((m * t) % period) as f64 / period as f64;
    C64::from_polar(1.0, ang)
}

/// Sparse transmit frame: `pilot_len` known dense columns, then
/// Bernoulli(β) times CN(0, σx²) entries. The support is redrawn while the frame is
/// rank deficient and a full-rank draw is possible.
pub fn gen_signal(cfg: &SceneConfig, rng: &mut RngStream) -> Result<SignalFrame> {
    cfg.validate()?;
    let (m, t) = (cfg.m, cfg.t);
    let pilot_cols: Vec<usize> = (0..cfg.pilot_len).collect();
    let full_rank = m.min(t);
    let mut attempt = 0;
    loop {
        let mut x = CMatrix::zeros(m, t);
        let mut support = DMatrix::from_element(m, t, false);
        for &c in &pilot_cols {
            for r in 0..m {
                x[(r, c)] = pilot_value(r, c, m, cfg.pilot_len);
                support[(r, c)] = true;
            }
        }
        for c in cfg.pilot_len..t {
            for r in 0..m {
                if rng.bernoulli(cfg.beta) {
                    support[(r, c)] = true;
                    x[(r, c)] = rng.complex_normal(cfg.sigma_x2);
                }
            }
        }
        let frame = SignalFrame {
            x,
            support,
            pilot_cols: pilot_cols.clone(),
        };
        attempt += 1;
        let guard_applies = cfg.beta > 0.0 && cfg.sigma_x2 > 0.0 && cfg.pilot_len < m;
        if !guard_applies || attempt >= MAX_SUPPORT_REDRAWS {
            return Ok(frame);
        }
        if numerical_rank(&frame.x)? == full_rank {
            return Ok(frame);
        }
    }
}

/// Noiseless tensor `Z_p = Hr · diag(Φ[p, :]) · He` for a given equivalent
/// channel `He` (N×T).
pub fn noiseless_tensor(hr: &CMatrix, he: &CMatrix, ps: &PhaseSchedule) -> Result<ComplexTensor3> {
    let (k, n) = hr.shape();
    if he.nrows() != n || ps.n() != n {
        return Err(Error::Dimension(format!(
            "Hr is {k}x{n}, He is {:?}, Phi is {:?}",
            he.shape(),
            ps.phi.shape()
        )));
    }
    let slices: Vec<CMatrix> = (0..ps.p())
        .map(|p| {
            let mut hr_d = hr.clone();
            for c in 0..n {
                let ph = ps.phi[(p, c)];
                for r in 0..k {
                    hr_d[(r, c)] *= ph;
                }
            }
            hr_d * he
        })
        .collect();
    if slices.is_empty() {
        return Err(Error::Dimension("phase schedule has no rows".into()));
    }
    ComplexTensor3::from_slices(&slices)
}

/// Per-entry noise variance that puts the realized signal power at `snr_db`
/// above it. `+inf` dB means no noise. A zero-power signal is referenced to
/// unit power, matching the unit-variance noise normalization.
pub fn noise_variance_for(signal_power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let reference = if signal_power > 0.0 { signal_power } else { 1.0 };
    reference / 10f64.powf(snr_db / 10.0)
}

pub fn synthesize_received(
    ch: &ChannelPair,
    sig: &SignalFrame,
    ps: &PhaseSchedule,
    snr_db: f64,
    rng: &mut RngStream,
) -> Result<ReceivedTensor> {
    if ch.hs.ncols() != sig.x.nrows() {
        return Err(Error::Dimension(format!(
            "Hs is {:?} but X is {:?}",
            ch.hs.shape(),
            sig.x.shape()
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidValue("snr_db is NaN".into()));
    }
    let he = ch.equivalent(&sig.x);
    let z = noiseless_tensor(&ch.hr, &he, ps)?;
    let power = z.norm_squared() / z.len() as f64;
    let noise_var = noise_variance_for(power, snr_db);
    let (k, t, p) = z.dims();
    let mut y = z;
    if noise_var > 0.0 {
        for pi in 0..p {
            for ti in 0..t {
                for ki in 0..k {
                    let v = y.get(ki, ti, pi) + rng.complex_normal(noise_var);
                    y.set(ki, ti, pi, v);
                }
            }
        }
    }
    Ok(ReceivedTensor { y, noise_var })
}

/// `Σ_n Hr[k,n] · He[n,t] · Φ[p,n]` by direct summation.
pub fn noiseless_entry(
    ch: &ChannelPair,
    he: &CMatrix,
    ps: &PhaseSchedule,
    k: usize,
    t: usize,
    p: usize,
) -> Result<C64> {
    let n = ch.hr.ncols();
    if he.nrows() != n || ps.n() != n {
        return Err(Error::Dimension("Hr, He and Phi disagree on N".into()));
    }
    if k >= ch.hr.nrows() || t >= he.ncols() || p >= ps.p() {
        return Err(Error::Index(format!(
            "(k, t, p) = ({k}, {t}, {p}) outside {}x{}x{}",
            ch.hr.nrows(),
            he.ncols(),
            ps.p()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        acc += ch.hr[(k, i)] * he[(i, t)] * ps.phi[(p, i)];
    }
    Ok(acc)
}

/// Realized SNR in dB of a noisy tensor against its noiseless version.
pub fn realized_snr_db(noiseless: &ComplexTensor3, noisy: &ComplexTensor3) -> f64 {
    let noise: f64 = noiseless
        .as_slice()
        .iter()
        .zip(noisy.as_slice())
        .map(|(a, b)| (b - a).norm_sqr())
        .sum();
    10.0 * (noiseless.norm_squared() / noise).log10()
}

/// Mean squared entry magnitude.
pub fn mean_power(a: &CMatrix) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        frob2(a) / a.len() as f64
    }
}
