//! Monte-Carlo experiment engine.
//!
//! Each trial is one packet: a fresh channel draw, filter selection, and
//! `packet_len` symbol vectors pushed through the true channel with AWGN.
//! Every random quantity comes from a counter-based substream keyed by
//! `(master_seed, trial, purpose)`, and per-trial results are reduced in
//! trial order, so a sweep is byte-reproducible for any worker count.

use crate::channel::{
    apply_tx_correlation, draw_rayleigh, perturb_csi, ChannelError, RngStream, SystemGeometry,
};
use crate::matkit::{permute_rows, ComplexMatrix, MatError};
use crate::metrics::{error_covariance, sum_rate, ThpScheme};
use crate::modem::{modulate, modulo_vec, slice_symbols, Constellation, SIGMA_S_SQ};
use crate::patterns::{build_patterns, TransmitPattern};
use crate::precoder::{
    encode, linear_encode, linear_precode, linear_receive, mb_select, receive, EncodedFrame,
    PrecoderError, PrecoderFilters,
};
use crate::simkit::config::{ExperimentConfig, Metric};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt;
use std::io::Write;
use std::path::Path;

// Substream purposes; trial t owns streams t*4 .. t*4+3.
const STREAM_CHANNEL: u64 = 0;
const STREAM_CSI: u64 = 1;
const STREAM_BITS: u64 = 2;
const STREAM_NOISE: u64 = 3;

const MAX_REDRAWS: u32 = 64;

#[derive(Debug)]
pub enum SimError {
    Config(String),
    Channel(ChannelError),
    Precoder(PrecoderError),
    /// A trial kept drawing rank-deficient channels.
    ChannelDegenerate { trial: u64 },
    Unsupported(String),
    Io(std::io::Error),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(msg) => write!(f, "config: {msg}"),
            SimError::Channel(e) => write!(f, "channel: {e}"),
            SimError::Precoder(e) => write!(f, "precoder: {e}"),
            SimError::ChannelDegenerate { trial } => {
                write!(f, "trial {trial}: channel redraw limit reached")
            }
            SimError::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            SimError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<ChannelError> for SimError {
    fn from(e: ChannelError) -> Self {
        SimError::Channel(e)
    }
}

impl From<PrecoderError> for SimError {
    fn from(e: PrecoderError) -> Self {
        SimError::Precoder(e)
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e)
    }
}

/// One measured CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub precoder: String,
    pub structure: String,
    pub mode: String,
    pub branches: usize,
    pub modulation: String,
    pub ebno_db: f64,
    pub trials: u64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_sum_rate: f64,
    pub mean_selected_branch: f64,
    pub corr_r: f64,
    pub csi_err_var: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "precoder,structure,mode,branches,modulation,ebno_db,trials,\
bits_sent,bit_errors,ber,mean_sum_rate,mean_selected_branch,corr_r,csi_err_var,seed";

/// Scientific notation with 10 significant digits; byte-deterministic.
pub fn fmt_sig10(v: f64) -> String {
    format!("{v:.9e}")
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.precoder,
            self.structure,
            self.mode,
            self.branches,
            self.modulation,
            fmt_sig10(self.ebno_db),
            self.trials,
            self.bits_sent,
            self.bit_errors,
            fmt_sig10(self.ber),
            fmt_sig10(self.mean_sum_rate),
            fmt_sig10(self.mean_selected_branch),
            fmt_sig10(self.corr_r),
            fmt_sig10(self.csi_err_var),
            self.seed
        )
    }
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(csv_string(rows).as_bytes())
}

/// Sweep output plus bookkeeping that has no CSV column.
#[derive(Debug)]
pub struct RunReport {
    pub rows: Vec<ResultRow>,
    /// Rank-deficient channel draws that were redrawn (expected ~0).
    pub redraw_count: u64,
}

/// Noise variance from the Eb/N0 definition
/// `Eb/N0 = N_r E_s / (N_t N sigma_n^2)` with `E_s = 1`.
pub fn noise_variance(ebno_db: f64, geometry: &SystemGeometry, bits_per_symbol: usize) -> f64 {
    let n_r: usize = geometry.users().iter().sum();
    let n_t = geometry.num_tx();
    n_r as f64 / (n_t as f64 * bits_per_symbol as f64 * 10f64.powf(ebno_db / 10.0))
}

// Pulls data bits from a substream, one u64 word at a time.
struct BitSource {
    stream: RngStream,
    word: u64,
    avail: u32,
}

impl BitSource {
    fn new(stream: RngStream) -> Self {
        Self {
            stream,
            word: 0,
            avail: 0,
        }
    }

    fn next_bit(&mut self) -> bool {
        if self.avail == 0 {
            self.word = self.stream.random_u64();
            self.avail = 64;
        }
        let bit = self.word & 1 == 1;
        self.word >>= 1;
        self.avail -= 1;
        bit
    }

    fn fill(&mut self, bits: &mut [bool]) {
        for b in bits.iter_mut() {
            *b = self.next_bit();
        }
    }
}

struct TrialOutcome {
    bit_errors: u64,
    bits_sent: u64,
    sum_rate: f64,
    selected_branch: usize, // 1-based
    redraws: u32,
}

enum TrialFilters {
    Thp(Box<PrecoderFilters>, usize),
    Linear(crate::precoder::LinearPrecoder),
}

// Draws the true and transmitter-side channels and builds filters, redrawing
// on rank-deficient channels. Returns (true H, filters, redraws).
fn setup_trial(
    config: &ExperimentConfig,
    patterns: &[TransmitPattern],
    sigma_n_sq: f64,
    trial: u64,
) -> Result<(ComplexMatrix, TrialFilters, u32), SimError> {
    let mut channel_stream = RngStream::new(config.master_seed, trial * 4 + STREAM_CHANNEL);
    let mut csi_stream = RngStream::new(config.master_seed, trial * 4 + STREAM_CSI);
    let mut redraws = 0u32;
    loop {
        let drawn = if config.identity_channel {
            crate::channel::ChannelRealization {
                h: ComplexMatrix::identity(config.geometry.num_streams()),
                geometry: config.geometry.clone(),
                seed_tag: trial,
            }
        } else {
            draw_rayleigh(&config.geometry, &mut channel_stream)
        };
        let true_ch = if config.correlation_r > 0.0 {
            apply_tx_correlation(&drawn, config.correlation_r)?
        } else {
            drawn
        };
        let tx_side = if config.csi_error_var > 0.0 {
            perturb_csi(&true_ch, config.csi_error_var, &mut csi_stream)
        } else {
            true_ch.clone()
        };

        let filters = if config.precoder.is_linear() {
            linear_precode(&tx_side.h, config.precoder.mode(), sigma_n_sq).map(TrialFilters::Linear)
        } else {
            mb_select(
                &tx_side.h,
                patterns,
                config.precoder.mode(),
                config.precoder.structure().expect("thp precoder"),
                sigma_n_sq,
            )
            .map(|(f, idx)| TrialFilters::Thp(Box::new(f), idx))
        };
        match filters {
            Ok(f) => return Ok((true_ch.h, f, redraws)),
            Err(PrecoderError::Mat(MatError::RankDeficient { .. }))
            | Err(PrecoderError::AllBranchesRankDeficient) => {
                redraws += 1;
                if redraws > MAX_REDRAWS || config.identity_channel {
                    return Err(SimError::ChannelDegenerate { trial });
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
}

// One packet. `count_errors = false` skips propagation and slicing (the
// sum-rate sweep only needs the selected branch and its empirical sigma_v^2).
fn run_trial(
    config: &ExperimentConfig,
    patterns: &[TransmitPattern],
    constellation: &Constellation,
    sigma_n_sq: f64,
    trial: u64,
    count_errors: bool,
) -> Result<TrialOutcome, SimError> {
    let s = config.geometry.num_streams();
    let n_bits = constellation.bits_per_symbol;
    let (true_h, filters, redraws) = setup_trial(config, patterns, sigma_n_sq, trial)?;

    let mut bits = BitSource::new(RngStream::new(
        config.master_seed,
        trial * 4 + STREAM_BITS,
    ));
    let mut noise_stream = RngStream::new(config.master_seed, trial * 4 + STREAM_NOISE);
    let noise_var = if config.noiseless { 0.0 } else { sigma_n_sq };

    let mut frame_bits = vec![false; s * n_bits];
    let mut noise = vec![Complex64::new(0.0, 0.0); s];
    let mut bit_errors = 0u64;
    let mut bits_sent = 0u64;
    let mut sigma_v_acc = 0.0f64;

    match &filters {
        TrialFilters::Thp(f, selected) => {
            let perm = &f.branch.perm;
            let true_h_ordered = permute_rows(&true_h, perm).expect("square");
            for _ in 0..config.packet_len {
                bits.fill(&mut frame_bits);
                let symbols = modulate(&frame_bits, constellation).expect("sized");
                let s_perm = perm.apply(&symbols);
                let frame: EncodedFrame = encode(&s_perm, f, constellation);
                // Effective-signal variance feeding the centralized MMSE
                // covariance/rate formulas: beta^2 sigma_n^2 sigma_s^2.
                sigma_v_acc += frame.beta * frame.beta * sigma_n_sq * SIGMA_S_SQ;
                if count_errors {
                    for n in noise.iter_mut() {
                        *n = if noise_var > 0.0 {
                            noise_stream.complex_gaussian(noise_var)
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                    }
                    let r = receive(&frame, &true_h_ordered, &noise, f);
                    let r_natural = perm.apply_transpose(&r);
                    let (_, rx_bits) =
                        slice_symbols(&modulo_vec(&r_natural, constellation.tau), constellation);
                    bit_errors += frame_bits
                        .iter()
                        .zip(rx_bits.iter())
                        .filter(|(a, b)| a != b)
                        .count() as u64;
                    bits_sent += frame_bits.len() as u64;
                }
            }
            let sigma_v_sq = sigma_v_acc / config.packet_len as f64;
            let scheme = config
                .precoder
                .thp_scheme()
                .expect("thp precoder has scheme");
            let rate = sum_rate(scheme, &f.l_diag, SIGMA_S_SQ, sigma_n_sq, sigma_v_sq);
            Ok(TrialOutcome {
                bit_errors,
                bits_sent,
                sum_rate: rate,
                selected_branch: *selected + 1,
                redraws,
            })
        }
        TrialFilters::Linear(lin) => {
            for _ in 0..config.packet_len {
                bits.fill(&mut frame_bits);
                let symbols = modulate(&frame_bits, constellation).expect("sized");
                let (tx, beta) = linear_encode(&symbols, lin);
                if count_errors {
                    for n in noise.iter_mut() {
                        *n = if noise_var > 0.0 {
                            noise_stream.complex_gaussian(noise_var)
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                    }
                    let r = linear_receive(&tx, &true_h, &noise, beta);
                    let (_, rx_bits) = slice_symbols(&r, constellation);
                    bit_errors += frame_bits
                        .iter()
                        .zip(rx_bits.iter())
                        .filter(|(a, b)| a != b)
                        .count() as u64;
                    bits_sent += frame_bits.len() as u64;
                }
            }
            Ok(TrialOutcome {
                bit_errors,
                bits_sent,
                sum_rate: 0.0,
                selected_branch: 1,
                redraws,
            })
        }
    }
}

fn effective_patterns(config: &ExperimentConfig) -> Vec<TransmitPattern> {
    if config.precoder.is_linear() {
        Vec::new()
    } else if config.precoder.is_multi_branch() {
        build_patterns(&config.geometry, config.branches)
    } else {
        build_patterns(&config.geometry, 1)
    }
}

fn run_in_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

fn sweep(config: &ExperimentConfig, count_errors: bool) -> Result<RunReport, SimError> {
    config
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let patterns = effective_patterns(config);
    let constellation = config.modulation.constellation();
    let branches = patterns.len().max(1);
    let mut rows = Vec::with_capacity(config.ebno_db.len());
    let mut redraw_count = 0u64;

    for &ebno in &config.ebno_db {
        let sigma_n_sq = noise_variance(ebno, &config.geometry, constellation.bits_per_symbol);
        let outcomes: Result<Vec<TrialOutcome>, SimError> = run_in_pool(config.workers, || {
            (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    run_trial(
                        config,
                        &patterns,
                        &constellation,
                        sigma_n_sq,
                        trial,
                        count_errors,
                    )
                })
                .collect()
        });
        let outcomes = outcomes?;

        // Sequential reduction in trial order keeps float sums deterministic.
        let mut bit_errors = 0u64;
        let mut bits_sent = 0u64;
        let mut rate_acc = 0.0f64;
        let mut branch_acc = 0.0f64;
        for o in &outcomes {
            bit_errors += o.bit_errors;
            bits_sent += o.bits_sent;
            rate_acc += o.sum_rate;
            branch_acc += o.selected_branch as f64;
            redraw_count += u64::from(o.redraws);
        }
        let ber = if bits_sent > 0 {
            bit_errors as f64 / bits_sent as f64
        } else {
            0.0
        };
        rows.push(ResultRow {
            precoder: config.precoder.name().to_string(),
            structure: config.precoder.structure_name().to_string(),
            mode: config.precoder.mode_name().to_string(),
            branches,
            modulation: config.modulation.name().to_string(),
            ebno_db: ebno,
            trials: config.trials,
            bits_sent,
            bit_errors,
            ber,
            mean_sum_rate: rate_acc / config.trials as f64,
            mean_selected_branch: branch_acc / config.trials as f64,
            corr_r: config.correlation_r,
            csi_err_var: config.csi_error_var,
            seed: config.master_seed,
        });
    }
    Ok(RunReport { rows, redraw_count })
}

/// BER sweep: one [`ResultRow`] per Eb/N0 point.
pub fn run_ber(config: &ExperimentConfig) -> Result<RunReport, SimError> {
    sweep(config, true)
}

/// Sum-rate sweep over the same trial pipeline, without propagation. THP
/// precoders only; the per-layer rate formulas do not apply to the linear
/// baselines.
pub fn run_sumrate(config: &ExperimentConfig) -> Result<RunReport, SimError> {
    if config.precoder.is_linear() {
        return Err(SimError::Unsupported(
            "sum-rate analysis requires a THP precoder".into(),
        ));
    }
    sweep(config, false)
}

/// Per-layer comparison of empirical error variance against the analytic
/// covariance for one Eb/N0 point.
#[derive(Debug, Clone)]
pub struct CovarianceCheck {
    pub ebno_db: f64,
    pub sigma_n_sq: f64,
    pub scheme: ThpScheme,
    pub empirical: Vec<f64>,
    pub analytic: Vec<f64>,
    pub max_rel_dev: f64,
    pub samples: u64,
}

/// Noise-only validation harness: fixes the trial-0 channel and filters,
/// pushes `trials` pure-noise frames through the receive path, and compares
/// the per-layer error variance with the analytic covariance diagonal.
///
/// The centralized MMSE scheme is the one case whose per-frame normalization
/// degenerates at zero data, so its beta is frozen from a data-frame
/// calibration pass first; the comparison then checks the noise propagation
/// at that operating point.
pub fn run_covariance_check(config: &ExperimentConfig) -> Result<Vec<CovarianceCheck>, SimError> {
    config
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let scheme = config.precoder.thp_scheme().ok_or_else(|| {
        SimError::Unsupported("covariance check requires a THP precoder".into())
    })?;
    let patterns = effective_patterns(config);
    let constellation = config.modulation.constellation();
    let s = config.geometry.num_streams();
    let mut out = Vec::with_capacity(config.ebno_db.len());

    for &ebno in &config.ebno_db {
        let sigma_n_sq = noise_variance(ebno, &config.geometry, constellation.bits_per_symbol);
        let (true_h, filters, _) = setup_trial(config, &patterns, sigma_n_sq, 0)?;
        let filters = match filters {
            TrialFilters::Thp(f, _) => *f,
            TrialFilters::Linear(_) => unreachable!("thp_scheme checked above"),
        };
        let true_h_ordered = permute_rows(&true_h, &filters.branch.perm).expect("square");

        // Frozen beta and analytic sigma_v^2 for the centralized MMSE case:
        // its per-frame normalization degenerates on zero data, so calibrate
        // it from data frames first.
        let (frame_beta, sigma_v_sq) = if scheme == ThpScheme::MmseCthp {
            let calib_frames = 2000.min(config.trials as usize).max(100);
            let mut bits = BitSource::new(RngStream::new(
                config.master_seed,
                STREAM_BITS, // trial 0
            ));
            let mut frame_bits = vec![false; s * constellation.bits_per_symbol];
            let mut beta_sq_acc = 0.0;
            for _ in 0..calib_frames {
                bits.fill(&mut frame_bits);
                let symbols = modulate(&frame_bits, &constellation).expect("sized");
                let s_perm = filters.branch.perm.apply(&symbols);
                let beta = encode(&s_perm, &filters, &constellation).beta;
                beta_sq_acc += beta * beta;
            }
            let beta_sq = beta_sq_acc / calib_frames as f64;
            (beta_sq.sqrt(), beta_sq * sigma_n_sq * SIGMA_S_SQ)
        } else {
            (filters.beta, 0.0)
        };

        let analytic =
            error_covariance(scheme, &filters.l_diag, sigma_n_sq, SIGMA_S_SQ, sigma_v_sq);
        let zero_frame = EncodedFrame {
            x: vec![Complex64::new(0.0, 0.0); s],
            tx: vec![Complex64::new(0.0, 0.0); s],
            v_variance: 0.0,
            beta: frame_beta,
        };

        let mut noise_stream = RngStream::new(config.master_seed, STREAM_NOISE);
        let mut acc = vec![0.0f64; s];
        let mut noise = vec![Complex64::new(0.0, 0.0); s];
        for _ in 0..config.trials {
            for n in noise.iter_mut() {
                *n = noise_stream.complex_gaussian(sigma_n_sq);
            }
            let r = receive(&zero_frame, &true_h_ordered, &noise, &filters);
            for (a, ri) in acc.iter_mut().zip(r.iter()) {
                *a += ri.norm_sqr();
            }
        }
        let empirical: Vec<f64> = acc.iter().map(|a| a / config.trials as f64).collect();
        let max_rel_dev = empirical
            .iter()
            .zip(analytic.diag.iter())
            .map(|(e, a)| (e - a).abs() / a)
            .fold(0.0f64, f64::max);
        out.push(CovarianceCheck {
            ebno_db: ebno,
            sigma_n_sq,
            scheme,
            empirical,
            analytic: analytic.diag,
            max_rel_dev,
            samples: config.trials,
        });
    }
    Ok(out)
}

/// Dispatches on the configured metric; covariance reports are rendered as
/// text since they have no CSV row shape.
pub fn run_metric(config: &ExperimentConfig) -> Result<RunReport, SimError> {
    match config.metric {
        Metric::Ber => run_ber(config),
        Metric::SumRate => run_sumrate(config),
        Metric::Covariance => Err(SimError::Unsupported(
            "covariance produces a text report; call run_covariance_check".into(),
        )),
    }
}

/// Convenience used by tests and the FFI layer: run and render CSV bytes.
pub fn run_to_csv(config: &ExperimentConfig) -> Result<String, SimError> {
    let report = run_metric(config)?;
    Ok(csv_string(&report.rows))
}

pub fn covariance_report_text(checks: &[CovarianceCheck]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "# scheme {} ebno_db {} sigma_n_sq {} samples {}\n",
            c.scheme.name(),
            fmt_sig10(c.ebno_db),
            fmt_sig10(c.sigma_n_sq),
            c.samples
        ));
        out.push_str("layer,empirical,analytic,rel_dev\n");
        for (i, (e, a)) in c.empirical.iter().zip(c.analytic.iter()).enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i,
                fmt_sig10(*e),
                fmt_sig10(*a),
                fmt_sig10((e - a).abs() / a)
            ));
        }
        out.push_str(&format!("max_rel_dev,{}\n", fmt_sig10(c.max_rel_dev)));
    }
    out
}
