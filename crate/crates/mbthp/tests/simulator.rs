//! Cross-module simulator checks: the AWGN closed-form oracle, multi-branch
//! dominance, the MESC/sigma_v alignment measurement, and seed determinism.

use mbthp::channel::{draw_rayleigh, RngStream, SystemGeometry};
use mbthp::matkit::permute_rows;
use mbthp::modem::{modulate, Constellation, SIGMA_S_SQ};
use mbthp::patterns::build_patterns;
use mbthp::precoder::{encode, mb_select, mmse_filters, PrecodingMode, ThpStructure};
use mbthp::simkit::{
    noise_variance, run_ber, run_to_csv, ExperimentConfig, Modulation, PrecoderSpec,
};

// Complementary error function (Abramowitz-Stegun 7.1.26), accurate to
// ~1.5e-7 absolute: an implementation-independent oracle for AWGN BER.
fn erfc(x: f64) -> f64 {
    let sign_negative = x < 0.0;
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-x * x).exp();
    if sign_negative {
        1.0 + erf
    } else {
        1.0 - erf
    }
}

fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / 2.0_f64.sqrt())
}

#[test]
fn awgn_qpsk_oracle_on_identity_channel() {
    // Identity channel + linear ZF is plain QPSK over AWGN: BER = Q(sqrt(2 Eb/N0)).
    for ebno_db in [4.0, 10.0] {
        let trials = 63; // 63 * 100 * 8 * 2 = 100 800 bits
        let cfg = ExperimentConfig {
            geometry: SystemGeometry::new(8, vec![2, 2, 2, 2]).unwrap(),
            precoder: PrecoderSpec::LinearZf,
            modulation: Modulation::Qpsk,
            identity_channel: true,
            ebno_db: vec![ebno_db],
            trials,
            packet_len: 100,
            master_seed: 99,
            ..ExperimentConfig::default()
        };
        let rows = run_ber(&cfg).unwrap().rows;
        let row = &rows[0];
        assert!(row.bits_sent >= 100_000);
        let gamma_b = 10f64.powf(ebno_db / 10.0);
        let expect = q_function((2.0 * gamma_b).sqrt());
        let sigma3 = 3.0 * (expect * (1.0 - expect) / row.bits_sent as f64).sqrt();
        assert!(
            (row.ber - expect).abs() <= sigma3,
            "{ebno_db} dB: measured {:.4e}, analytic {expect:.4e} +- {sigma3:.2e}",
            row.ber
        );
    }
}

#[test]
fn multibranch_never_worse_within_noise() {
    // ber(MB, L_B >= 2) <= ber(L_B = 1) + 3 sigma at every point.
    let sweep = vec![4.0, 8.0, 12.0];
    let run = |precoder: PrecoderSpec, branches: usize| {
        let cfg = ExperimentConfig {
            precoder,
            branches,
            modulation: Modulation::Qam16,
            ebno_db: sweep.clone(),
            trials: 20_000,
            packet_len: 100,
            master_seed: 5150,
            ..ExperimentConfig::default()
        };
        run_ber(&cfg).unwrap().rows
    };
    for (base, mb) in [
        (PrecoderSpec::MmseCthp, PrecoderSpec::MbMmseCthp),
        (PrecoderSpec::MmseDthp, PrecoderSpec::MbMmseDthp),
    ] {
        let base_rows = run(base, 1);
        for branches in [2usize, 4] {
            let mb_rows = run(mb, branches);
            for (b, m) in base_rows.iter().zip(mb_rows.iter()) {
                let sigma3 =
                    3.0 * (b.ber.max(1e-9) * (1.0 - b.ber) / b.bits_sent as f64).sqrt();
                assert!(
                    m.ber <= b.ber + sigma3,
                    "{} L_B={} at {} dB: {:.3e} > {:.3e} + {:.1e}",
                    mb.name(),
                    branches,
                    b.ebno_db,
                    m.ber,
                    b.ber,
                    sigma3
                );
            }
        }
    }
}

// The branch selector minimizes the MESC score while the centralized MMSE
// rate argument runs through sigma_v^2; the two are distinct criteria. This
// measures how often they align and checks the rate inequality on aligned
// draws (the inequality is only guaranteed when selection reduced sigma_v^2).
#[test]
fn mesc_sigma_v_alignment_measured() {
    let geom = SystemGeometry::new(8, vec![2, 2, 2, 2]).unwrap();
    let patterns = build_patterns(&geom, 8);
    let constellation = Constellation::qam16();
    let sigma_n_sq = noise_variance(10.0, &geom, 4);
    let frames_per_branch = 24;
    let draws = 400u64;
    let mut aligned = 0u64;
    let mut violations = 0u64;

    for trial in 0..draws {
        let h = draw_rayleigh(&geom, &mut RngStream::new(8787, trial)).h;
        let (_, selected) = mb_select(
            &h,
            &patterns,
            PrecodingMode::Mmse,
            ThpStructure::Centralized,
            sigma_n_sq,
        )
        .unwrap();

        // Empirical sigma_v^2 (= beta^2 sigma_n^2 sigma_s^2) per branch.
        let mut bits_stream = RngStream::new(8788, trial);
        let branch_sigma_v = |branch_idx: usize, bits_stream: &mut RngStream| -> f64 {
            let hp = permute_rows(&h, &patterns[branch_idx].perm).unwrap();
            let f = mmse_filters(&hp, sigma_n_sq, ThpStructure::Centralized).unwrap();
            let mut acc = 0.0;
            for _ in 0..frames_per_branch {
                let bits: Vec<bool> = (0..8 * constellation.bits_per_symbol)
                    .map(|_| bits_stream.random_u64() & 1 == 1)
                    .collect();
                let symbols = modulate(&bits, &constellation).unwrap();
                let s_perm = patterns[branch_idx].perm.apply(&symbols);
                let frame = encode(&s_perm, &f, &constellation);
                acc += frame.beta * frame.beta * sigma_n_sq * SIGMA_S_SQ;
            }
            acc / frames_per_branch as f64
        };
        let sv_selected = branch_sigma_v(selected, &mut bits_stream);
        let sv_identity = branch_sigma_v(0, &mut bits_stream);

        if sv_identity >= sv_selected {
            aligned += 1;
            // Rate formula is monotone decreasing in sigma_v^2, so the
            // selected branch cannot lose to the identity branch here.
            let rate = |sv: f64| 8.0 * (1.0 + SIGMA_S_SQ * SIGMA_S_SQ / sv).log2();
            assert!(rate(sv_selected) >= rate(sv_identity) - 1e-12);
        } else {
            violations += 1;
        }
    }
    let violation_rate = violations as f64 / draws as f64;
    println!(
        "MESC/sigma_v alignment: {aligned}/{draws} aligned, violation rate {:.1}%",
        100.0 * violation_rate
    );
    // The two criteria mostly agree; a minority of draws may disagree.
    assert!(violation_rate < 0.5, "selector anti-aligned with sigma_v");
}

#[test]
fn identical_config_reproduces_bytes() {
    let cfg = ExperimentConfig {
        geometry: SystemGeometry::new(4, vec![2, 2]).unwrap(),
        precoder: PrecoderSpec::MbZfDthp,
        branches: 4,
        ebno_db: vec![0.0, 6.0],
        trials: 300,
        packet_len: 20,
        master_seed: 31,
        ..ExperimentConfig::default()
    };
    let a = run_to_csv(&cfg).unwrap();
    let b = run_to_csv(&cfg).unwrap();
    assert_eq!(a, b);
    // A different seed must change the measurement.
    let c = run_to_csv(&ExperimentConfig {
        master_seed: 32,
        ..cfg
    })
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn redraw_counter_stays_zero_on_gaussian_draws() {
    let cfg = ExperimentConfig {
        geometry: SystemGeometry::new(4, vec![2, 2]).unwrap(),
        precoder: PrecoderSpec::ZfDthp,
        ebno_db: vec![10.0],
        trials: 2_000,
        packet_len: 5,
        master_seed: 77,
        ..ExperimentConfig::default()
    };
    let report = run_ber(&cfg).unwrap();
    assert_eq!(report.redraw_count, 0);
}
