//! Multi-branch Tomlinson-Harashima precoding for multiuser MIMO downlinks.
//!
//! The crate implements both THP structures (centralized and decentralized
//! scaling) in ZF and MMSE flavors, the multi-branch transmit-pattern search
//! with minimum-error branch selection that makes symbol ordering practical
//! when users are physically distributed, and a seeded link-level Monte-Carlo
//! simulator that measures BER, sum rate, and error covariance over Rayleigh,
//! correlated, and imperfect-CSI channels.
//!
//! Modules:
//!
//! * [`matkit`] — dense complex matrices, Householder LQ (plain, row-pivoted,
//!   extended), permutations.
//! * [`channel`] — seeded Rayleigh draws, exponential transmit correlation,
//!   CSI error perturbation.
//! * [`modem`] — Gray-mapped QPSK/16-QAM, lattice modulo, slicer.
//! * [`patterns`] — transmit-pattern (branch) construction.
//! * [`precoder`] — THP filter computation, encode/receive, branch selection,
//!   linear ZF/MMSE baselines.
//! * [`metrics`] — analytic covariance, sum rates, FLOP counters.
//! * [`simkit`] — experiment configs, the Monte-Carlo engine, CSV output.

pub mod channel;
pub mod matkit;
pub mod metrics;
pub mod modem;
pub mod patterns;
pub mod precoder;
pub mod simkit;
