//! Seeded MU-MIMO channel generation: i.i.d. Rayleigh draws, transmit-side
//! exponential correlation via the Kronecker model, and estimation-error
//! perturbation.
//!
//! All randomness flows through [`RngStream`], a counter-based substream
//! derived from `(master_seed, stream_index)`. Distinct stream indices are
//! statistically independent and a draw depends only on its own stream, so
//! parallel trials reproduce serial results exactly.

use crate::matkit::ComplexMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    /// Geometry violates the square-channel assumption or has empty users.
    InvalidGeometry(String),
    /// Correlation coefficient outside `[0, 1)`.
    InvalidCorrelation(f64),
    /// The correlation matrix failed the positive-definiteness check.
    NotPositiveDefinite,
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::InvalidGeometry(msg) => write!(f, "invalid geometry: {msg}"),
            ChannelError::InvalidCorrelation(r) => {
                write!(f, "correlation coefficient {r} outside [0, 1)")
            }
            ChannelError::NotPositiveDefinite => {
                write!(f, "correlation matrix is not positive definite")
            }
        }
    }
}

impl std::error::Error for ChannelError {}

/// Antenna layout of the downlink: `num_tx` transmit antennas serving users
/// with `users[k]` receive antennas each. The combined channel is square, so
/// the user antenna counts must sum to `num_tx`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemGeometry {
    num_tx: usize,
    users: Vec<usize>,
}

impl SystemGeometry {
    pub fn new(num_tx: usize, users: Vec<usize>) -> Result<Self, ChannelError> {
        if users.is_empty() {
            return Err(ChannelError::InvalidGeometry("no users".into()));
        }
        if users.contains(&0) {
            return Err(ChannelError::InvalidGeometry(
                "every user needs at least one antenna".into(),
            ));
        }
        let total: usize = users.iter().sum();
        if total != num_tx {
            return Err(ChannelError::InvalidGeometry(format!(
                "receive antennas ({total}) must equal transmit antennas ({num_tx})"
            )));
        }
        Ok(Self { num_tx, users })
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    /// Per-user receive antenna counts.
    pub fn users(&self) -> &[usize] {
        &self.users
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Total streams S (= total receive antennas = num_tx).
    pub fn num_streams(&self) -> usize {
        self.num_tx
    }

    pub fn max_user_antennas(&self) -> usize {
        *self.users.iter().max().expect("nonempty")
    }

    /// Starting stream index of each user's antenna block.
    pub fn user_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.users.len());
        let mut acc = 0;
        for &n in &self.users {
            offsets.push(acc);
            acc += n;
        }
        offsets
    }
}

/// One draw of the combined S x S channel.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub geometry: SystemGeometry,
    /// Stream index the draw came from.
    pub seed_tag: u64,
}

/// Counter-based RNG substream: `(master_seed, stream_index)` fully
/// determines every draw.
pub struct RngStream {
    rng: ChaCha12Rng,
    stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self { rng, stream_index }
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Standard normal real sample.
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Circularly-symmetric complex Gaussian with per-entry variance
    /// `variance` (each real part carries half).
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let scale = (variance / 2.0).sqrt();
        Complex64::new(
            scale * self.standard_normal(),
            scale * self.standard_normal(),
        )
    }

    pub fn random_u64(&mut self) -> u64 {
        self.rng.random()
    }
}

/// Draws an i.i.d. Rayleigh channel: entries CN(0, 1).
pub fn draw_rayleigh(geometry: &SystemGeometry, stream: &mut RngStream) -> ChannelRealization {
    let s = geometry.num_streams();
    let mut h = ComplexMatrix::zeros(s, s);
    for r in 0..s {
        for c in 0..s {
            h.set(r, c, stream.complex_gaussian(1.0));
        }
    }
    ChannelRealization {
        h,
        geometry: geometry.clone(),
        seed_tag: stream.stream_index(),
    }
}

/// Exponential transmit correlation matrix: entries `r^(j-i)` for `i <= j`,
/// Hermitian extension below the diagonal. Real `r` makes it symmetric.
pub fn tx_correlation_matrix(n: usize, r: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = r.powi((j as i32 - i as i32).abs());
        }
    }
    m
}

/// Hermitian positive-semidefinite square root of the exponential correlation
/// matrix, computed by eigendecomposition (cyclic Jacobi).
pub fn correlation_sqrt(n: usize, r: f64) -> Result<ComplexMatrix, ChannelError> {
    if !(0.0..1.0).contains(&r) {
        return Err(ChannelError::InvalidCorrelation(r));
    }
    let m = tx_correlation_matrix(n, r);
    let (eigvals, eigvecs) = jacobi_eigh(&m, n);
    let max_ev = eigvals.iter().cloned().fold(0.0f64, f64::max);
    let mut sqrt_vals = Vec::with_capacity(n);
    for &ev in &eigvals {
        if ev < -1e-10 * max_ev.max(1.0) {
            return Err(ChannelError::NotPositiveDefinite);
        }
        sqrt_vals.push(ev.max(0.0).sqrt());
    }
    // V diag(sqrt) V^T
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (k, &sv) in sqrt_vals.iter().enumerate() {
                acc += eigvecs[i * n + k] * sv * eigvecs[j * n + k];
            }
            out.set(i, j, Complex64::new(acc, 0.0));
        }
    }
    Ok(out)
}

/// Applies transmit-side correlation: returns `H * R_t^(1/2)`.
pub fn apply_tx_correlation(
    ch: &ChannelRealization,
    r: f64,
) -> Result<ChannelRealization, ChannelError> {
    if r == 0.0 {
        return Ok(ch.clone());
    }
    let root = correlation_sqrt(ch.h.cols(), r)?;
    let h = ch.h.mul(&root).expect("dims agree");
    Ok(ChannelRealization {
        h,
        geometry: ch.geometry.clone(),
        seed_tag: ch.seed_tag,
    })
}

/// Adds an i.i.d. CN(0, sigma_e_sq) estimation error to the channel. The
/// perturbed matrix is what the transmitter uses to build filters; the true
/// channel is what the simulator applies to the signal.
pub fn perturb_csi(
    ch: &ChannelRealization,
    sigma_e_sq: f64,
    stream: &mut RngStream,
) -> ChannelRealization {
    if sigma_e_sq == 0.0 {
        return ch.clone();
    }
    let mut h = ch.h.clone();
    for r in 0..h.rows() {
        for c in 0..h.cols() {
            let e = stream.complex_gaussian(sigma_e_sq);
            h.set(r, c, h.get(r, c) + e);
        }
    }
    ChannelRealization {
        h,
        geometry: ch.geometry.clone(),
        seed_tag: ch.seed_tag,
    }
}

// Cyclic Jacobi eigendecomposition of a real symmetric matrix, row-major.
// Returns (eigenvalues, eigenvectors as columns). Sizes here are tiny
// (antenna counts), so convergence is quick.
fn jacobi_eigh(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigvals = (0..n).map(|i| m[i * n + i]).collect();
    (eigvals, v)
}
