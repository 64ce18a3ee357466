//! Filter computation and the end-to-end encode/receive paths for ZF and
//! MMSE Tomlinson-Harashima precoding, centralized and decentralized, their
//! multi-branch variants with minimum-error branch selection, and linear
//! ZF/MMSE channel-inversion baselines.
//!
//! Both THP families come out of one LQ factorization. For ZF it is the
//! factorization of the (row-permuted) channel itself; for MMSE it is the
//! factorization of the extended matrix `[H, sigma_n I]`, which yields the
//! MMSE filters without a single explicit matrix inversion:
//!
//! * feedforward `F = Q^H`, applied at the transmitter; the effective
//!   transmit filter is its first `N_t` rows (`Q1^H` in the extended case),
//! * scaling `G = diag(l_ii)^-1`, at the receivers (decentralized) or the
//!   transmitter (centralized),
//! * feedback `B = G L` (decentralized) or `L G` (centralized), unit diagonal
//!   lower triangular either way.
//!
//! The centralized structure scales the transmit signal by `1/beta` to meet
//! the power constraint and undoes it at the receivers.

use crate::matkit::{self, ComplexMatrix, LqFactors, MatError, Permutation};
use crate::modem::{modulo, Constellation, SIGMA_S_SQ};
use crate::patterns::TransmitPattern;
use num_complex::Complex64;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThpStructure {
    /// Scaling matrix split across the user receivers.
    Decentralized,
    /// Scaling matrix applied at the transmitter, with 1/beta normalization.
    Centralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecodingMode {
    Zf,
    Mmse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrecoderError {
    Mat(MatError),
    /// Every branch of a multi-branch selection was rank deficient.
    AllBranchesRankDeficient,
}

impl fmt::Display for PrecoderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecoderError::Mat(e) => write!(f, "{e}"),
            PrecoderError::AllBranchesRankDeficient => {
                write!(f, "all branches rank deficient")
            }
        }
    }
}

impl std::error::Error for PrecoderError {}

impl From<MatError> for PrecoderError {
    fn from(e: MatError) -> Self {
        PrecoderError::Mat(e)
    }
}

/// THP filters for one branch.
#[derive(Debug, Clone)]
pub struct PrecoderFilters {
    /// Feedback filter: unit-diagonal lower triangular, S x S.
    pub b: ComplexMatrix,
    /// Feedforward filter as applied at the transmitter (N_t x S):
    /// `Q^H` for ZF, `A Q^H = Q1^H` for MMSE.
    pub f_effective: ComplexMatrix,
    /// Diagonal of the scaling filter G: `1 / l_ii`, real positive.
    pub g_diag: Vec<f64>,
    /// Centralized power normalization known at filter-build time. ZF uses
    /// the closed form `sqrt(sum 1/l_ii^2)`; MMSE normalization is per-frame
    /// (see [`EncodedFrame::beta`]) and stores 1 here. Decentralized: 1.
    pub beta: f64,
    /// Diagonal of L (or extended L), real positive.
    pub l_diag: Vec<f64>,
    /// Branch this filter set was computed for.
    pub branch: TransmitPattern,
    pub structure: ThpStructure,
    pub mode: PrecodingMode,
    /// Noise variance the filters were designed for (0 for ZF).
    pub sigma_n_sq: f64,
}

/// Output of the successive-cancellation encoder for one channel use.
#[derive(Debug, Clone)]
pub struct EncodedFrame {
    /// Post-feedback symbols (modulo applied), stream order.
    pub x: Vec<Complex64>,
    /// Transmit vector (after feedforward and any 1/beta scaling).
    pub tx: Vec<Complex64>,
    /// Empirical per-entry variance of v = B x = s + d.
    pub v_variance: f64,
    /// Normalization actually applied to this frame (1 for decentralized;
    /// the receiver undoes it). For centralized MMSE this is the per-frame
    /// power normalization, so `beta^2 sigma_n^2 sigma_s^2` is the
    /// effective-signal variance entering the covariance and sum-rate
    /// formulas.
    pub beta: f64,
}

/// MESC branch metric: `sum_i 1 / l_ii^2`. Smaller is better.
pub fn mesc_score(l_diag: &[f64]) -> f64 {
    l_diag.iter().map(|&l| 1.0 / (l * l)).sum()
}

fn identity_pattern(size: usize) -> TransmitPattern {
    TransmitPattern {
        perm: Permutation::identity(size),
        user_state: 1,
        stream_states: Vec::new(),
        branch_index: 1,
    }
}

fn filters_from_factors(
    factors: LqFactors,
    f_effective: ComplexMatrix,
    structure: ThpStructure,
    mode: PrecodingMode,
    sigma_n_sq: f64,
    branch: TransmitPattern,
) -> PrecoderFilters {
    let s = factors.diag.len();
    let g_diag: Vec<f64> = factors.diag.iter().map(|&l| 1.0 / l).collect();
    let mut b = ComplexMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..=i {
            let scale = match structure {
                // G L scales rows, L G scales columns; both leave b_ii = 1.
                ThpStructure::Decentralized => g_diag[i],
                ThpStructure::Centralized => g_diag[j],
            };
            b.set(i, j, factors.l.get(i, j) * scale);
        }
        b.set(i, i, Complex64::new(1.0, 0.0));
    }
    let beta = match (structure, mode) {
        (ThpStructure::Centralized, PrecodingMode::Zf) => mesc_score(&factors.diag).sqrt(),
        _ => 1.0,
    };
    PrecoderFilters {
        b,
        f_effective,
        g_diag,
        beta,
        l_diag: factors.diag,
        branch,
        structure,
        mode,
        sigma_n_sq,
    }
}

/// ZF-THP filters from the LQ factorization of the (already row-permuted)
/// square channel.
pub fn zf_filters(
    h_ordered: &ComplexMatrix,
    structure: ThpStructure,
) -> Result<PrecoderFilters, PrecoderError> {
    zf_filters_for_branch(h_ordered, structure, identity_pattern(h_ordered.rows()))
}

fn zf_filters_for_branch(
    h_ordered: &ComplexMatrix,
    structure: ThpStructure,
    branch: TransmitPattern,
) -> Result<PrecoderFilters, PrecoderError> {
    let factors = matkit::lq(h_ordered)?;
    let f_effective = factors.q.hermitian();
    Ok(filters_from_factors(
        factors,
        f_effective,
        structure,
        PrecodingMode::Zf,
        0.0,
        branch,
    ))
}

/// MMSE-THP filters from the LQ factorization of the extended channel
/// `[H, sigma_n I]`. Never rank deficient for `sigma_n_sq > 0`.
pub fn mmse_filters(
    h_ordered: &ComplexMatrix,
    sigma_n_sq: f64,
    structure: ThpStructure,
) -> Result<PrecoderFilters, PrecoderError> {
    mmse_filters_for_branch(
        h_ordered,
        sigma_n_sq,
        structure,
        identity_pattern(h_ordered.rows()),
    )
}

fn mmse_filters_for_branch(
    h_ordered: &ComplexMatrix,
    sigma_n_sq: f64,
    structure: ThpStructure,
    branch: TransmitPattern,
) -> Result<PrecoderFilters, PrecoderError> {
    let s = h_ordered.rows();
    let sigma_n = sigma_n_sq.sqrt();
    let mut scaled_id = ComplexMatrix::zeros(s, s);
    for i in 0..s {
        scaled_id.set(i, i, Complex64::new(sigma_n, 0.0));
    }
    let extended = h_ordered.hstack(&scaled_id)?;
    let factors = matkit::lq(&extended)?;
    // Effective transmit filter A Q^H = Q1^H (first N_t columns of Q,
    // conjugate transposed).
    let f_effective = factors.q.col_slice(0, s).hermitian();
    Ok(filters_from_factors(
        factors,
        f_effective,
        structure,
        PrecodingMode::Mmse,
        sigma_n_sq,
        branch,
    ))
}

/// Partition of the extended-factorization Q into `(Q1, Q2)`; exposed for
/// the identity checks `H = L Q1` and `L^-1 = Q2 / sigma_n`.
pub fn extended_q_parts(h_ordered: &ComplexMatrix, sigma_n_sq: f64) -> Result<(ComplexMatrix, ComplexMatrix), PrecoderError> {
    let s = h_ordered.rows();
    let sigma_n = sigma_n_sq.sqrt();
    let mut scaled_id = ComplexMatrix::zeros(s, s);
    for i in 0..s {
        scaled_id.set(i, i, Complex64::new(sigma_n, 0.0));
    }
    let extended = h_ordered.hstack(&scaled_id)?;
    let factors = matkit::lq(&extended)?;
    Ok((factors.q.col_slice(0, s), factors.q.col_slice(s, 2 * s)))
}

/// Successive cancellation with element-wise modulo reduction.
///
/// `s` must already be in the branch's permuted stream order. The transmit
/// vector is `F_eff x` (decentralized) or `F_eff G x / beta` (centralized);
/// the centralized MMSE beta is computed per frame from the empirical
/// variance of `v = B x`.
pub fn encode(s: &[Complex64], filters: &PrecoderFilters, c: &Constellation) -> EncodedFrame {
    let n = s.len();
    debug_assert_eq!(n, filters.b.rows());
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = s[i];
        let brow = filters.b.row(i);
        for (j, xj) in x[..i].iter().enumerate() {
            acc -= brow[j] * xj;
        }
        x[i] = modulo(acc, c.tau);
    }
    let v = filters.b.mul_vec(&x).expect("dims agree");
    let v_variance = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;

    match filters.structure {
        ThpStructure::Decentralized => {
            let tx = filters.f_effective.mul_vec(&x).expect("dims agree");
            EncodedFrame {
                x,
                tx,
                v_variance,
                beta: 1.0,
            }
        }
        ThpStructure::Centralized => {
            let pre: Vec<Complex64> = x
                .iter()
                .zip(filters.g_diag.iter())
                .map(|(xi, &g)| xi * g)
                .collect();
            let mut tx = filters.f_effective.mul_vec(&pre).expect("dims agree");
            let beta = match filters.mode {
                PrecodingMode::Zf => filters.beta,
                // Per-frame power normalization ||F G x|| / ||s||. Through
                // the extended-matrix relations this is the variance of the
                // projected effective signal over sigma_n^2 sigma_s^2; it
                // keeps the frame at nominal transmit energy and decays to
                // the ZF normalization as the noise vanishes.
                PrecodingMode::Mmse => {
                    let energy: f64 = tx.iter().map(|z| z.norm_sqr()).sum();
                    (energy / (n as f64 * SIGMA_S_SQ)).sqrt()
                }
            };
            if beta == 0.0 {
                for t in tx.iter_mut() {
                    *t = Complex64::new(0.0, 0.0);
                }
            } else {
                for t in tx.iter_mut() {
                    *t /= beta;
                }
            }
            EncodedFrame {
                x,
                tx,
                v_variance,
                beta,
            }
        }
    }
}

/// Receive path for one branch: `r = G (H tx + n)` for decentralized,
/// `r = beta (H tx + n)` for centralized. `true_h_ordered` is the actual
/// channel with the branch's row permutation applied; the filters may come
/// from estimated CSI.
pub fn receive(
    frame: &EncodedFrame,
    true_h_ordered: &ComplexMatrix,
    noise: &[Complex64],
    filters: &PrecoderFilters,
) -> Vec<Complex64> {
    let mut y = true_h_ordered.mul_vec(&frame.tx).expect("dims agree");
    for (yi, ni) in y.iter_mut().zip(noise.iter()) {
        *yi += ni;
    }
    match filters.structure {
        ThpStructure::Decentralized => y
            .iter()
            .zip(filters.g_diag.iter())
            .map(|(yi, &g)| yi * g)
            .collect(),
        ThpStructure::Centralized => y.iter().map(|yi| yi * frame.beta).collect(),
    }
}

/// Evaluates every branch on its permuted channel and returns the filters of
/// the branch minimizing the MESC score, along with its index into
/// `patterns`. Ties break toward the lowest branch index; rank-deficient
/// branches are skipped (only possible for ZF).
pub fn mb_select(
    h: &ComplexMatrix,
    patterns: &[TransmitPattern],
    mode: PrecodingMode,
    structure: ThpStructure,
    sigma_n_sq: f64,
) -> Result<(PrecoderFilters, usize), PrecoderError> {
    let mut best: Option<(PrecoderFilters, usize, f64)> = None;
    for (idx, pattern) in patterns.iter().enumerate() {
        let hp = matkit::permute_rows(h, &pattern.perm)?;
        let filters = match mode {
            PrecodingMode::Zf => zf_filters_for_branch(&hp, structure, pattern.clone()),
            PrecodingMode::Mmse => {
                mmse_filters_for_branch(&hp, sigma_n_sq, structure, pattern.clone())
            }
        };
        let filters = match filters {
            Ok(f) => f,
            Err(PrecoderError::Mat(MatError::RankDeficient { .. })) => continue,
            Err(e) => return Err(e),
        };
        let score = mesc_score(&filters.l_diag);
        if best.as_ref().is_none_or(|(_, _, s)| score < *s) {
            best = Some((filters, idx, score));
        }
    }
    match best {
        Some((filters, idx, _)) => Ok((filters, idx)),
        None => Err(PrecoderError::AllBranchesRankDeficient),
    }
}

/// Linear channel-inversion precoder.
#[derive(Debug, Clone)]
pub struct LinearPrecoder {
    /// Precoding matrix P: `H^-1` for ZF, `A ext(H)^H (ext(H) ext(H)^H)^-1`
    /// for MMSE, both computed through the LQ factorization.
    pub p: ComplexMatrix,
    pub mode: PrecodingMode,
}

/// Builds the linear ZF/MMSE precoding matrix for a square channel.
pub fn linear_precode(
    h: &ComplexMatrix,
    mode: PrecodingMode,
    sigma_n_sq: f64,
) -> Result<LinearPrecoder, PrecoderError> {
    let s = h.rows();
    let p = match mode {
        PrecodingMode::Zf => {
            // P = H^H (H H^H)^-1 = Q^H L^-1 for square full-rank H.
            let factors = matkit::lq(h)?;
            let qh = factors.q.hermitian();
            let mut linv = ComplexMatrix::zeros(s, s);
            for col in 0..s {
                let mut e = vec![Complex64::new(0.0, 0.0); s];
                e[col] = Complex64::new(1.0, 0.0);
                let x = matkit::solve_lower(&factors.l, &e)?;
                for (row, v) in x.into_iter().enumerate() {
                    linv.set(row, col, v);
                }
            }
            qh.mul(&linv)?
        }
        PrecodingMode::Mmse => {
            // P = A ext^H (ext ext^H)^-1 = Q1^H L^-1 via the extended LQ.
            let sigma_n = sigma_n_sq.sqrt();
            let mut scaled_id = ComplexMatrix::zeros(s, s);
            for i in 0..s {
                scaled_id.set(i, i, Complex64::new(sigma_n, 0.0));
            }
            let extended = h.hstack(&scaled_id)?;
            let factors = matkit::lq(&extended)?;
            let q1h = factors.q.col_slice(0, s).hermitian();
            let mut linv = ComplexMatrix::zeros(s, s);
            for col in 0..s {
                let mut e = vec![Complex64::new(0.0, 0.0); s];
                e[col] = Complex64::new(1.0, 0.0);
                let x = matkit::solve_lower(&factors.l, &e)?;
                for (row, v) in x.into_iter().enumerate() {
                    linv.set(row, col, v);
                }
            }
            q1h.mul(&linv)?
        }
    };
    Ok(LinearPrecoder { p, mode })
}

/// Linear transmit: `tx = P s / beta_lin` with the per-frame normalization
/// `beta_lin = ||P s|| / sqrt(S sigma_s^2)` keeping the transmit power at
/// the nominal frame energy.
pub fn linear_encode(s: &[Complex64], precoder: &LinearPrecoder) -> (Vec<Complex64>, f64) {
    let ps = precoder.p.mul_vec(s).expect("dims agree");
    let energy: f64 = ps.iter().map(|z| z.norm_sqr()).sum();
    let beta = (energy / (s.len() as f64 * SIGMA_S_SQ)).sqrt();
    if beta == 0.0 {
        return (vec![Complex64::new(0.0, 0.0); s.len()], 0.0);
    }
    (ps.iter().map(|z| z / beta).collect(), beta)
}

/// Linear receive: scales `H tx + n` back by `beta_lin`.
pub fn linear_receive(
    tx: &[Complex64],
    true_h: &ComplexMatrix,
    noise: &[Complex64],
    beta_lin: f64,
) -> Vec<Complex64> {
    let mut y = true_h.mul_vec(tx).expect("dims agree");
    for (yi, ni) in y.iter_mut().zip(noise.iter()) {
        *yi += ni;
    }
    y.iter().map(|yi| yi * beta_lin).collect()
}
