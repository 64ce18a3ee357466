//! Analytic performance quantities: per-layer error covariance, achievable
//! sum rates, branch-selection sanity checks, and closed-form FLOP counts
//! for the implemented and reference precoding algorithms.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThpScheme {
    ZfDthp,
    ZfCthp,
    MmseDthp,
    MmseCthp,
}

impl ThpScheme {
    pub fn name(&self) -> &'static str {
        match self {
            ThpScheme::ZfDthp => "zf-dthp",
            ThpScheme::ZfCthp => "zf-cthp",
            ThpScheme::MmseDthp => "mmse-dthp",
            ThpScheme::MmseCthp => "mmse-cthp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    UnsupportedAlgorithm(String),
    InvalidParameter(String),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::UnsupportedAlgorithm(name) => {
                write!(f, "unsupported algorithm: {name}")
            }
            MetricsError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl std::error::Error for MetricsError {}

/// Per-layer error covariance diagonal for one scheme.
#[derive(Debug, Clone)]
pub struct CovarianceReport {
    pub diag: Vec<f64>,
    pub trace: f64,
    pub scheme: ThpScheme,
}

/// Analytic error covariance of the effective transmit signal.
///
/// Decentralized schemes have per-layer entries `sigma_n^2 / l_ii^2`; the
/// centralized schemes are flat across layers: `sigma_n^2 sum_j 1/l_jj^2`
/// for ZF and `sigma_v^2 / sigma_s^2` for MMSE.
pub fn error_covariance(
    scheme: ThpScheme,
    l_diag: &[f64],
    sigma_n_sq: f64,
    sigma_s_sq: f64,
    sigma_v_sq: f64,
) -> CovarianceReport {
    let s = l_diag.len();
    let diag: Vec<f64> = match scheme {
        ThpScheme::ZfDthp | ThpScheme::MmseDthp => l_diag
            .iter()
            .map(|&l| sigma_n_sq / (l * l))
            .collect(),
        ThpScheme::ZfCthp => {
            let total: f64 = l_diag.iter().map(|&l| 1.0 / (l * l)).sum();
            vec![sigma_n_sq * total; s]
        }
        ThpScheme::MmseCthp => vec![sigma_v_sq / sigma_s_sq; s],
    };
    let trace = diag.iter().sum();
    CovarianceReport {
        diag,
        trace,
        scheme,
    }
}

/// Per-layer covariance ratio between the centralized and decentralized ZF
/// structures, computed analytically from `l_diag`. Always >= 1.
pub fn zf_covariance_ratio(l_diag: &[f64]) -> Vec<f64> {
    let total: f64 = l_diag.iter().map(|&l| 1.0 / (l * l)).sum();
    l_diag
        .iter()
        .map(|&li| 1.0 + li * li * (total - 1.0 / (li * li)))
        .collect()
}

/// Achievable sum rate in bits per channel use.
///
/// Decentralized schemes sum per-layer rates `log2(1 + sigma_s^2 l_ii^2 /
/// sigma_n^2)`; centralized ZF spreads one SNR across all layers, and
/// centralized MMSE uses the empirical variance of the effective transmit
/// signal: `S log2(1 + sigma_s^4 / sigma_v^2)`. `sigma_v_sq` is only read
/// for the centralized MMSE scheme.
pub fn sum_rate(
    scheme: ThpScheme,
    l_diag: &[f64],
    sigma_s_sq: f64,
    sigma_n_sq: f64,
    sigma_v_sq: f64,
) -> f64 {
    let s = l_diag.len() as f64;
    match scheme {
        ThpScheme::ZfDthp | ThpScheme::MmseDthp => l_diag
            .iter()
            .map(|&l| (1.0 + sigma_s_sq * l * l / sigma_n_sq).log2())
            .sum(),
        ThpScheme::ZfCthp => {
            let total: f64 = l_diag.iter().map(|&l| 1.0 / (l * l)).sum();
            s * (1.0 + sigma_s_sq / (sigma_n_sq * total)).log2()
        }
        ThpScheme::MmseCthp => {
            s * (1.0 + sigma_s_sq * sigma_s_sq / sigma_v_sq).log2()
        }
    }
}

/// Branch-selection sanity check: the selected branch must carry the
/// minimum score and never exceed the identity branch (index 0).
pub fn selection_bound_holds(branch_scores: &[f64], selected: usize) -> bool {
    if selected >= branch_scores.len() || branch_scores.is_empty() {
        return false;
    }
    let min = branch_scores.iter().cloned().fold(f64::INFINITY, f64::min);
    branch_scores[selected] <= branch_scores[0] && branch_scores[selected] == min
}

/// Algorithms with closed-form FLOP counts. Rows marked analytic-only have
/// no corresponding precoder in this crate; their formulas are still
/// evaluated for comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlopAlgorithm {
    /// Linear zero-forcing inversion.
    Zf,
    /// Linear MMSE inversion.
    Mmse,
    /// Block diagonalization (analytic-only).
    Bd,
    /// Regularized block diagonalization (analytic-only).
    Rbd,
    ZfThp,
    /// MMSE-THP via repeated matrix inversions (analytic-only).
    MmseThpInversion,
    /// MMSE-THP via the extended-matrix LQ factorization.
    MmseThp,
    MbZfThp,
    MbMmseThp,
    /// Vector perturbation via sphere encoding (analytic-only).
    Vp,
}

impl FlopAlgorithm {
    pub const ALL: [FlopAlgorithm; 10] = [
        FlopAlgorithm::Zf,
        FlopAlgorithm::Mmse,
        FlopAlgorithm::Bd,
        FlopAlgorithm::Rbd,
        FlopAlgorithm::ZfThp,
        FlopAlgorithm::MmseThpInversion,
        FlopAlgorithm::MmseThp,
        FlopAlgorithm::MbZfThp,
        FlopAlgorithm::MbMmseThp,
        FlopAlgorithm::Vp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FlopAlgorithm::Zf => "zf",
            FlopAlgorithm::Mmse => "mmse",
            FlopAlgorithm::Bd => "bd",
            FlopAlgorithm::Rbd => "rbd",
            FlopAlgorithm::ZfThp => "zf-thp",
            FlopAlgorithm::MmseThpInversion => "mmse-thp-inversion",
            FlopAlgorithm::MmseThp => "mmse-thp",
            FlopAlgorithm::MbZfThp => "mb-zf-thp",
            FlopAlgorithm::MbMmseThp => "mb-mmse-thp",
            FlopAlgorithm::Vp => "vp",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, MetricsError> {
        Self::ALL
            .iter()
            .find(|a| a.name() == name)
            .copied()
            .ok_or_else(|| MetricsError::UnsupportedAlgorithm(name.to_string()))
    }

    /// True when no precoder implementation backs the formula.
    pub fn analytic_only(&self) -> bool {
        matches!(
            self,
            FlopAlgorithm::Bd
                | FlopAlgorithm::Rbd
                | FlopAlgorithm::MmseThpInversion
                | FlopAlgorithm::Vp
        )
    }
}

/// Parameters feeding the FLOP formulas. `n` is the (square) system
/// dimension; the per-user antenna count enters the BD/RBD rows, the branch
/// count the MB rows, and the constellation size / sphere radius the VP row.
#[derive(Debug, Clone, Copy)]
pub struct FlopParams {
    pub n: u64,
    pub num_users: u64,
    pub antennas_per_user: u64,
    pub branches: u64,
    pub constellation_size: u64,
    pub sphere_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopReport {
    pub algorithm: FlopAlgorithm,
    pub flops: u64,
}

// Rounds a/b to the nearest integer. The rational coefficients here all have
// denominator 3, so exact halves cannot occur; values exact when 3 | a.
fn nearest_div(a: u128, b: u128) -> u128 {
    (2 * a + b) / (2 * b)
}

/// Evaluates the closed-form FLOP count for one algorithm. Rational
/// coefficients (the 40/3-style terms) are carried exactly and rounded once
/// at the end, so counts are exact whenever the formula is integral.
pub fn flops(algorithm: FlopAlgorithm, params: &FlopParams) -> Result<FlopReport, MetricsError> {
    let n = params.n as u128;
    if n == 0 {
        return Err(MetricsError::InvalidParameter("n must be positive".into()));
    }
    let count: u128 = match algorithm {
        FlopAlgorithm::Zf => 16 * n * n * n + 3 * n * n - 2 * n,
        FlopAlgorithm::Mmse => 16 * n * n * n + 3 * n * n,
        FlopAlgorithm::Bd | FlopAlgorithm::Rbd => {
            let k = params.num_users as u128;
            let nk = params.antennas_per_user as u128;
            if nk > n {
                return Err(MetricsError::InvalidParameter(
                    "antennas_per_user exceeds n".into(),
                ));
            }
            let nbar = n - nk;
            let common = 72 * nk * nk * nk + 72 * nk * nk * n + 32 * nk * n * n
                + 32 * n * nbar * nbar
                + 64 * nbar * nbar * nbar
                - 2 * nk * nk;
            let per_user = if algorithm == FlopAlgorithm::Bd {
                common
            } else {
                common + 8 * n * n * n + 18 * n + nbar
            };
            k * per_user
        }
        FlopAlgorithm::ZfThp => nearest_div(40 * n * n * n, 3) + 10 * n * n + 22 * n,
        FlopAlgorithm::MmseThpInversion => 24 * n * n * n * n + 48 * n * n * n + n * n,
        FlopAlgorithm::MmseThp => nearest_div(64 * n * n * n, 3) + 10 * n * n + 22 * n,
        FlopAlgorithm::MbZfThp => {
            let lb = params.branches as u128;
            nearest_div(lb * 40 * n * n * n, 3) + lb * (10 * n * n + 22 * n)
        }
        FlopAlgorithm::MbMmseThp => {
            let lb = params.branches as u128;
            nearest_div(lb * 64 * n * n * n, 3) + lb * (10 * n * n + 22 * n)
        }
        FlopAlgorithm::Vp => {
            let m = params.constellation_size as f64;
            let d = params.sphere_radius;
            if d.is_nan() || d <= 0.0 {
                return Err(MetricsError::InvalidParameter(
                    "sphere radius must be positive".into(),
                ));
            }
            let mut sum = 0.0f64;
            for k in 1..=params.n {
                let kf = k as f64;
                // ln(M k pi^(k/2) d^k / Gamma(k/2 + 1))
                let ln_term = m.ln()
                    + kf.ln()
                    + 0.5 * kf * std::f64::consts::PI.ln()
                    + kf * d.ln()
                    - ln_gamma_half(k + 2);
                sum += ln_term.exp();
            }
            let total = 8.0 * sum + 16.0 * (params.n * params.n) as f64 - 2.0 * params.n as f64
                + 4.0;
            if total >= u128::MAX as f64 {
                u128::MAX
            } else {
                total.round() as u128
            }
        }
    };
    Ok(FlopReport {
        algorithm,
        flops: count.min(u64::MAX as u128) as u64,
    })
}

// ln Gamma(two_x / 2) for positive half-integer arguments, by recurrence from
// Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
fn ln_gamma_half(two_x: u64) -> f64 {
    let mut acc;
    let mut cur; // current two_x
    if two_x.is_multiple_of(2) {
        acc = 0.0; // ln Gamma(1)
        cur = 2;
    } else {
        acc = 0.5 * std::f64::consts::PI.ln(); // ln Gamma(1/2)
        cur = 1;
    }
    while cur < two_x {
        acc += (cur as f64 / 2.0).ln(); // Gamma(x+1) = x Gamma(x)
        cur += 2;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_case() -> FlopParams {
        FlopParams {
            n: 6,
            num_users: 3,
            antennas_per_user: 2,
            branches: 2,
            constellation_size: 16,
            sphere_radius: 2.0,
        }
    }

    #[test]
    fn flop_reference_values() {
        let p = params_case();
        let expect = [
            (FlopAlgorithm::Zf, 3552),
            (FlopAlgorithm::Mmse, 3564),
            (FlopAlgorithm::Bd, 35304),
            (FlopAlgorithm::Rbd, 40824),
            (FlopAlgorithm::ZfThp, 3372),
            (FlopAlgorithm::MmseThpInversion, 41508),
            (FlopAlgorithm::MmseThp, 5100),
            (FlopAlgorithm::MbZfThp, 6744),
            (FlopAlgorithm::MbMmseThp, 10200),
        ];
        for (alg, want) in expect {
            let got = flops(alg, &p).unwrap().flops;
            assert_eq!(got, want, "{}", alg.name());
        }
    }

    #[test]
    fn flop_rational_rounding() {
        // n = 5 is not divisible by 3: 40 * 125 / 3 = 1666.67 -> 1667.
        let p = FlopParams { n: 5, ..params_case() };
        let got = flops(FlopAlgorithm::ZfThp, &p).unwrap().flops;
        assert_eq!(got, 1667 + 10 * 25 + 22 * 5);
    }

    #[test]
    fn vp_formula_finite_and_positive() {
        let p = params_case();
        let got = flops(FlopAlgorithm::Vp, &p).unwrap().flops;
        assert!(got > 16 * 36 - 12 + 4);
        // Hand evaluation of the k = 1 term: 8 * M * 1 * pi^(1/2) / Gamma(3/2) * d
        // = 8 * 16 * sqrt(pi) / (sqrt(pi)/2) * 2 = 8 * 16 * 2 * 2 = 512.
        let p1 = FlopParams { n: 1, ..params_case() };
        let got1 = flops(FlopAlgorithm::Vp, &p1).unwrap().flops;
        assert_eq!(got1, 512 + 16 - 2 + 4);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in FlopAlgorithm::ALL {
            assert_eq!(FlopAlgorithm::from_name(alg.name()).unwrap(), alg);
        }
        assert!(matches!(
            FlopAlgorithm::from_name("sphere-oracle"),
            Err(MetricsError::UnsupportedAlgorithm(_))
        ));
    }

    #[test]
    fn covariance_known_values() {
        let r = error_covariance(ThpScheme::ZfDthp, &[1.0, 1.0, 1.0], 0.1, 1.0, 0.0);
        assert!(r.diag.iter().all(|&d| (d - 0.1).abs() < 1e-15));
        assert!((r.trace - 0.3).abs() < 1e-15);

        let r = error_covariance(ThpScheme::ZfCthp, &[1.0, 2.0], 1.0, 1.0, 0.0);
        assert!((r.diag[0] - 1.25).abs() < 1e-15);
        assert!((r.diag[1] - 1.25).abs() < 1e-15);

        let r = error_covariance(ThpScheme::MmseCthp, &[1.0, 1.0], 0.5, 1.0, 0.2);
        assert!(r.diag.iter().all(|&d| (d - 0.2).abs() < 1e-15));
    }

    #[test]
    fn covariance_ratio_identity() {
        // Ratio between the two ZF structures, rebuilt from the two reports.
        let l = [0.7, 1.3, 2.2];
        let d = error_covariance(ThpScheme::ZfDthp, &l, 0.3, 1.0, 0.0);
        let c = error_covariance(ThpScheme::ZfCthp, &l, 0.3, 1.0, 0.0);
        let ratio = zf_covariance_ratio(&l);
        for ((cd, dd), r) in c.diag.iter().zip(d.diag.iter()).zip(ratio.iter()) {
            let direct = cd / dd;
            assert!((direct - r).abs() < 1e-12);
            assert!(*r >= 1.0);
        }
    }

    #[test]
    fn sum_rate_known_values() {
        let r = sum_rate(ThpScheme::ZfDthp, &[1.0, 1.0], 1.0, 1.0, 0.0);
        assert!((r - 2.0).abs() < 1e-12);

        let r = sum_rate(ThpScheme::ZfCthp, &[1.0, 1.0], 1.0, 1.0, 0.0);
        assert!((r - 2.0 * 1.5f64.log2()).abs() < 1e-12);
        assert!((r - 1.169925001).abs() < 1e-8);

        // Rates grow monotonically as noise vanishes.
        let mut last = 0.0;
        for k in 1..8 {
            let sigma = 10f64.powi(-k);
            let r = sum_rate(ThpScheme::MmseDthp, &[0.9, 1.4], 1.0, sigma, 0.0);
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn selection_bound_cases() {
        assert!(selection_bound_holds(&[2.0, 1.5], 1));
        assert!(selection_bound_holds(&[2.0, 2.0], 0)); // equality case
        assert!(!selection_bound_holds(&[2.0, 1.5], 0)); // selected not the min
        assert!(!selection_bound_holds(&[1.0], 3)); // out of range
    }
}
