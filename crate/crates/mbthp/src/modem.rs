//! Gray-mapped QPSK/16-QAM symbol mapping, the lattice modulo operator, and
//! the constellation slicer.
//!
//! Bit labeling is fixed so bit-level tests are deterministic: the in-phase
//! level comes from the most significant half of the label, the quadrature
//! level from the least significant half. Per axis, descending amplitude
//! levels carry the Gray sequence 0, 1, 3, 2 (so the all-zero label maps to
//! the most positive point and neighboring levels differ in exactly one bit).

use num_complex::Complex64;
use std::fmt;

/// Per-entry symbol variance; both constellations are unit energy.
pub const SIGMA_S_SQ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationKind {
    Qpsk,
    Qam16,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModemError {
    /// Bit count is not a multiple of bits-per-symbol.
    LengthMismatch { len: usize, bits_per_symbol: usize },
}

impl fmt::Display for ModemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModemError::LengthMismatch {
                len,
                bits_per_symbol,
            } => write!(
                f,
                "bit count {len} is not a multiple of {bits_per_symbol}"
            ),
        }
    }
}

impl std::error::Error for ModemError {}

/// A unit-energy Gray-labeled constellation together with its modulo period.
///
/// `points[label]` is the symbol carrying the bit pattern `label` read
/// MSB-first. All points lie strictly inside the fundamental modulo region
/// `(-tau/2, tau/2]` per axis.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub kind: ConstellationKind,
    pub points: Vec<Complex64>,
    pub bits_per_symbol: usize,
    pub tau: f64,
}

// Gray label -> amplitude level index, descending. Label 0b00 is the most
// positive level; adjacent levels differ in one bit (0,1,3,2 walk).
const QAM16_AXIS_LEVELS: [f64; 4] = [3.0, 1.0, -3.0, -1.0]; // indexed by 2-bit label

impl Constellation {
    pub fn new(kind: ConstellationKind) -> Self {
        match kind {
            ConstellationKind::Qpsk => Self::qpsk(),
            ConstellationKind::Qam16 => Self::qam16(),
        }
    }

    /// QPSK, points (+-1 +-j)/sqrt(2), tau = 2*sqrt(2).
    pub fn qpsk() -> Self {
        let a = 1.0 / 2.0_f64.sqrt();
        let axis = |bit: usize| if bit == 0 { a } else { -a };
        let points = (0..4)
            .map(|label| Complex64::new(axis((label >> 1) & 1), axis(label & 1)))
            .collect();
        Self {
            kind: ConstellationKind::Qpsk,
            points,
            bits_per_symbol: 2,
            tau: 2.0 * 2.0_f64.sqrt(),
        }
    }

    /// Rectangular 16-QAM with levels {+-1, +-3}/sqrt(10), tau = 8/sqrt(10).
    pub fn qam16() -> Self {
        let scale = 1.0 / 10.0_f64.sqrt();
        let points = (0..16)
            .map(|label: usize| {
                let i_level = QAM16_AXIS_LEVELS[(label >> 2) & 0b11] * scale;
                let q_level = QAM16_AXIS_LEVELS[label & 0b11] * scale;
                Complex64::new(i_level, q_level)
            })
            .collect();
        Self {
            kind: ConstellationKind::Qam16,
            points,
            bits_per_symbol: 4,
            tau: 8.0 / 10.0_f64.sqrt(),
        }
    }

    pub fn modulation_order(&self) -> usize {
        self.points.len()
    }

    /// Minimum distance between distinct points.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }
}

/// Maps bits (MSB-first per symbol) onto constellation symbols.
pub fn modulate(bits: &[bool], c: &Constellation) -> Result<Vec<Complex64>, ModemError> {
    let n = c.bits_per_symbol;
    if !bits.len().is_multiple_of(n) {
        return Err(ModemError::LengthMismatch {
            len: bits.len(),
            bits_per_symbol: n,
        });
    }
    Ok(bits
        .chunks(n)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            c.points[label]
        })
        .collect())
}

/// Element-wise lattice modulo: wraps each axis into `(-tau/2, tau/2]`.
///
/// Equivalent to subtracting `floor(z/tau + 1/2) * tau` per axis except on
/// the measure-zero boundary, where the half-open side is chosen so that the
/// upper edge `+tau/2` is a fixed point.
pub fn modulo(x: Complex64, tau: f64) -> Complex64 {
    let wrap = |v: f64| v - (v / tau - 0.5).ceil() * tau;
    Complex64::new(wrap(x.re), wrap(x.im))
}

/// Applies [`modulo`] to every entry.
pub fn modulo_vec(xs: &[Complex64], tau: f64) -> Vec<Complex64> {
    xs.iter().map(|&x| modulo(x, tau)).collect()
}

/// Nearest-point slicer with inverse Gray demapping.
///
/// Each received value maps to the nearest constellation point in Euclidean
/// distance; exact ties break toward the lowest label index. The caller is
/// expected to apply [`modulo`] first when slicing THP outputs.
pub fn slice_symbols(r: &[Complex64], c: &Constellation) -> (Vec<Complex64>, Vec<bool>) {
    let mut symbols = Vec::with_capacity(r.len());
    let mut bits = Vec::with_capacity(r.len() * c.bits_per_symbol);
    for &z in r {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (label, p) in c.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        symbols.push(c.points[best]);
        for k in (0..c.bits_per_symbol).rev() {
            bits.push((best >> k) & 1 == 1);
        }
    }
    (symbols, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn qpsk_gray_map_and_energy() {
        let c = Constellation::qpsk();
        let s = modulate(&[false, false], &c).unwrap();
        assert!(close(s[0], Complex64::new(1.0, 1.0) / 2.0_f64.sqrt()));
        let mean_energy: f64 =
            c.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / c.points.len() as f64;
        assert!((mean_energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qam16_all_labels_distinct_unit_energy() {
        let c = Constellation::qam16();
        assert_eq!(c.points.len(), 16);
        for (i, a) in c.points.iter().enumerate() {
            for b in &c.points[i + 1..] {
                assert!((a - b).norm() > 1e-9);
            }
        }
        let mean_energy: f64 = c.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean_energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_inside_fundamental_region() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            for p in &c.points {
                assert!(p.re.abs() < c.tau / 2.0 && p.im.abs() < c.tau / 2.0);
            }
        }
    }

    // Gray property: points adjacent along one axis differ in exactly one bit.
    #[test]
    fn gray_adjacency_per_axis() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            let step = c.min_distance();
            for (la, a) in c.points.iter().enumerate() {
                for (lb, b) in c.points.iter().enumerate() {
                    let axis_neighbor = ((a.re - b.re).abs() < 1e-12
                        && ((a.im - b.im).abs() - step).abs() < 1e-9)
                        || ((a.im - b.im).abs() < 1e-12
                            && ((a.re - b.re).abs() - step).abs() < 1e-9);
                    if axis_neighbor {
                        assert_eq!(
                            (la ^ lb).count_ones(),
                            1,
                            "labels {la:04b} and {lb:04b} are neighbors"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn modulate_demodulate_roundtrip() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            let n = c.bits_per_symbol;
            let m = c.modulation_order();
            let bits: Vec<bool> = (0..m)
                .flat_map(|label| (0..n).rev().map(move |k| (label >> k) & 1 == 1))
                .collect();
            let symbols = modulate(&bits, &c).unwrap();
            let (sliced, out_bits) = slice_symbols(&symbols, &c);
            assert_eq!(out_bits, bits);
            assert_eq!(sliced, symbols);
        }
    }

    #[test]
    fn modulate_rejects_ragged_input() {
        let c = Constellation::qam16();
        assert!(matches!(
            modulate(&[true, false, true], &c),
            Err(ModemError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn modulo_known_values() {
        let tau = 2.0 * 2.0_f64.sqrt();
        assert!(close(modulo(Complex64::new(0.0, 0.0), tau), Complex64::new(0.0, 0.0)));
        // 3/sqrt(2) wraps down by one period to -1/sqrt(2).
        let x = Complex64::new(3.0 / 2.0_f64.sqrt(), 0.0);
        assert!(close(
            modulo(x, tau),
            Complex64::new(-1.0 / 2.0_f64.sqrt(), 0.0)
        ));
        // Anything already inside (-tau/2, tau/2] is untouched, boundary included.
        let y = Complex64::new(tau / 2.0, -tau / 4.0);
        assert!(close(modulo(y, tau), y));
    }

    #[test]
    fn slicer_tie_breaks_to_lowest_label() {
        let c = Constellation::qpsk();
        // Equidistant from all four points.
        let (symbols, bits) = slice_symbols(&[Complex64::new(0.0, 0.0)], &c);
        assert!(close(symbols[0], c.points[0]));
        assert_eq!(&bits, &[false, false]);
    }

    #[test]
    fn slicer_tolerates_small_noise() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            let eps = 0.4 * c.min_distance();
            for (label, p) in c.points.iter().enumerate() {
                let (s, _) = slice_symbols(&[p + Complex64::new(eps / 2.0, -eps / 2.0)], &c);
                assert!(close(s[0], c.points[label]));
            }
        }
    }

    proptest! {
        #[test]
        fn modulo_is_idempotent(re in -50.0f64..50.0, im in -50.0f64..50.0) {
            let tau = 2.0 * 2.0_f64.sqrt();
            let x = Complex64::new(re, im);
            let once = modulo(x, tau);
            let twice = modulo(once, tau);
            prop_assert!((once - twice).norm() < 1e-12);
            prop_assert!(once.re > -tau / 2.0 - 1e-12 && once.re <= tau / 2.0 + 1e-12);
            prop_assert!(once.im > -tau / 2.0 - 1e-12 && once.im <= tau / 2.0 + 1e-12);
        }

        #[test]
        fn modulo_is_lattice_congruence(re in -2.0f64..2.0, im in -2.0f64..2.0, k in -6i32..6, m in -6i32..6) {
            let tau = 8.0 / 10.0_f64.sqrt();
            let x = Complex64::new(re, im);
            let shifted = x + Complex64::new(k as f64 * tau, m as f64 * tau);
            prop_assert!((modulo(x, tau) - modulo(shifted, tau)).norm() < 1e-10);
        }

        // Eq-style round trip: a constellation point offset by a lattice
        // perturbation is recovered by modulo + slice.
        #[test]
        fn slice_recovers_lattice_offset_point(label in 0usize..16, k in -4i32..4, m in -4i32..4) {
            let c = Constellation::qam16();
            let s = c.points[label];
            let v = s + Complex64::new(k as f64 * c.tau, m as f64 * c.tau);
            let (sliced, _) = slice_symbols(&[modulo(v, c.tau)], &c);
            prop_assert!((sliced[0] - s).norm() < 1e-9);
        }
    }
}
