//! Dense complex matrices and the LQ factorizations every precoder is built on.
//!
//! Matrices are stored row-major as `Vec<Complex64>` with no external linear
//! algebra dependencies. The LQ factorization uses Householder reflections
//! applied to the conjugate transpose, post-scaled so that the diagonal of `L`
//! is real and strictly positive. That phase convention makes the scaling
//! filter `G` real and keeps factorizations (and therefore tests) fully
//! deterministic.

use num_complex::Complex64;
use std::fmt;

/// Relative pivot threshold below which a factorization input is treated as
/// rank deficient. Gaussian channel draws are almost surely full rank; this
/// only guards pathological inputs.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Errors from matrix construction and factorization.
#[derive(Debug, Clone, PartialEq)]
pub enum MatError {
    /// Operand shapes are incompatible with the requested operation.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A matrix entry was NaN or infinite on construction.
    NonFinite,
    /// A pivot magnitude fell below `RANK_TOLERANCE * ||input||_F`.
    RankDeficient { pivot: f64, threshold: f64 },
    /// An index vector is not a bijection on 0..len.
    InvalidPermutation,
}

impl fmt::Display for MatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatError::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            MatError::NonFinite => write!(f, "matrix entries must be finite"),
            MatError::RankDeficient { pivot, threshold } => write!(
                f,
                "rank deficient: pivot {pivot:.3e} below threshold {threshold:.3e}"
            ),
            MatError::InvalidPermutation => write!(f, "index vector is not a permutation"),
        }
    }
}

impl std::error::Error for MatError {}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Build a matrix from row-major data. Rejects length mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, MatError> {
        if data.len() != rows * cols {
            return Err(MatError::DimensionMismatch {
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(MatError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Diagonal matrix from real values.
    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(d, 0.0));
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, MatError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatError::DimensionMismatch {
                expected: (r, c),
                got: (r, 0),
            });
        }
        Self::new(r, c, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Result<Self, MatError> {
        if self.cols != rhs.rows {
            return Err(MatError::DimensionMismatch {
                expected: (self.cols, rhs.cols),
                got: (rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lrow = self.row(i);
            for (k, &lik) in lrow.iter().enumerate() {
                if lik.re == 0.0 && lik.im == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &r) in orow.iter_mut().zip(rrow.iter()) {
                    *o += lik * r;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, MatError> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        self.mul_vec_into(v, &mut out)?;
        Ok(out)
    }

    /// Matrix-vector product into a caller-owned buffer (hot path).
    pub fn mul_vec_into(&self, v: &[Complex64], out: &mut [Complex64]) -> Result<(), MatError> {
        if v.len() != self.cols || out.len() != self.rows {
            return Err(MatError::DimensionMismatch {
                expected: (self.rows, self.cols),
                got: (out.len(), v.len()),
            });
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&m, &x) in self.row(i).iter().zip(v.iter()) {
                acc += m * x;
            }
            *o = acc;
        }
        Ok(())
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, MatError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(MatError::DimensionMismatch {
                expected: (self.rows, self.cols),
                got: (rhs.rows, rhs.cols),
            });
        }
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Horizontal concatenation `[self, rhs]`.
    pub fn hstack(&self, rhs: &Self) -> Result<Self, MatError> {
        if self.rows != rhs.rows {
            return Err(MatError::DimensionMismatch {
                expected: (self.rows, rhs.cols),
                got: (rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.rows, self.cols + rhs.cols);
        for r in 0..self.rows {
            out.data[r * out.cols..r * out.cols + self.cols].copy_from_slice(self.row(r));
            out.data[r * out.cols + self.cols..(r + 1) * out.cols].copy_from_slice(rhs.row(r));
        }
        Ok(out)
    }

    /// Columns `lo..hi` as a new matrix.
    pub fn col_slice(&self, lo: usize, hi: usize) -> Self {
        let mut out = Self::zeros(self.rows, hi - lo);
        for r in 0..self.rows {
            out.data[r * out.cols..(r + 1) * out.cols].copy_from_slice(&self.row(r)[lo..hi]);
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||self - I||_F`, for orthonormality checks.
    pub fn frob_dist_from_identity(&self) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let mut d = self.get(r, c);
                if r == c {
                    d -= Complex64::new(1.0, 0.0);
                }
                acc += d.norm_sqr();
            }
        }
        acc.sqrt()
    }
}

/// Row permutation stored as an index vector: row `i` of the permuted matrix
/// is row `order[i]` of the original. Dense matrix form is only materialized
/// for test assertions via [`Permutation::to_matrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, MatError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(MatError::InvalidPermutation);
            }
            seen[i] = true;
        }
        Ok(Self { order })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    /// Exchange permutation (ones on the reverse diagonal).
    pub fn exchange(n: usize) -> Self {
        Self {
            order: (0..n).rev().collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &o)| i == o)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.order.len()];
        for (i, &o) in self.order.iter().enumerate() {
            inv[o] = i;
        }
        Self { order: inv }
    }

    /// `out[i] = v[order[i]]`.
    pub fn apply<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.order.iter().map(|&o| v[o]).collect()
    }

    /// Applies the transpose (= inverse) of the permutation matrix:
    /// `out[order[i]] = v[i]`.
    pub fn apply_transpose<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); v.len()];
        for (i, &o) in self.order.iter().enumerate() {
            out[o] = v[i];
        }
        out
    }

    /// Dense permutation matrix (tests and diagnostics only).
    pub fn to_matrix(&self) -> ComplexMatrix {
        let n = self.order.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, &o) in self.order.iter().enumerate() {
            m.set(i, o, Complex64::new(1.0, 0.0));
        }
        m
    }
}

/// LQ factors with the positive real diagonal convention.
#[derive(Debug, Clone)]
pub struct LqFactors {
    /// Lower triangular `m x m`; entries above the diagonal are exactly zero.
    pub l: ComplexMatrix,
    /// `m x n` with orthonormal rows.
    pub q: ComplexMatrix,
    /// Diagonal of `L`: real, strictly positive.
    pub diag: Vec<f64>,
}

// Householder reflector for a column vector: returns v and beta = 2/||v||^2
// so that (I - beta v v^H) x = -phase(x0) ||x|| e1.
struct Reflector {
    v: Vec<Complex64>,
    beta: f64,
}

fn make_reflector(mut v: Vec<Complex64>, norm: f64) -> Reflector {
    let x0 = v[0];
    let phase = if x0.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        x0 / x0.norm()
    };
    v[0] += phase * norm;
    let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let beta = if vnorm_sq == 0.0 { 0.0 } else { 2.0 / vnorm_sq };
    Reflector { v, beta }
}

// Applies (I - beta v v^H) to rows lo.. of column j of a.
fn apply_reflector_col(a: &mut ComplexMatrix, refl: &Reflector, lo: usize, j: usize) {
    let mut w = Complex64::new(0.0, 0.0);
    for (i, vi) in refl.v.iter().enumerate() {
        w += vi.conj() * a.get(lo + i, j);
    }
    w *= refl.beta;
    for (i, vi) in refl.v.iter().enumerate() {
        let cur = a.get(lo + i, j);
        a.set(lo + i, j, cur - w * vi);
    }
}

#[allow(clippy::needless_range_loop)]
fn lq_inner(
    input: &ComplexMatrix,
    pivot: bool,
) -> Result<(Vec<usize>, LqFactors), MatError> {
    let m = input.rows();
    let n = input.cols();
    if m > n {
        return Err(MatError::DimensionMismatch {
            expected: (m, m),
            got: (m, n),
        });
    }
    let threshold = RANK_TOLERANCE * input.frob_norm();

    // Householder QR of B = input^H (n x m); then input = R^H Q~^H.
    let mut b = input.hermitian();
    let mut order: Vec<usize> = (0..m).collect();
    let mut reflectors: Vec<Reflector> = Vec::with_capacity(m);

    for k in 0..m {
        if pivot {
            // Greedy column pivot: largest trailing norm next. This yields
            // non-increasing |l_ii|. Ties resolve to the lowest index.
            let mut best = k;
            let mut best_norm = 0.0;
            for j in k..m {
                let nrm: f64 = (k..n).map(|r| b.get(r, j).norm_sqr()).sum();
                if nrm > best_norm {
                    best_norm = nrm;
                    best = j;
                }
            }
            if best != k {
                for r in 0..n {
                    let t = b.get(r, k);
                    b.set(r, k, b.get(r, best));
                    b.set(r, best, t);
                }
                order.swap(k, best);
            }
        }

        let col: Vec<Complex64> = (k..n).map(|r| b.get(r, k)).collect();
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= threshold {
            return Err(MatError::RankDeficient {
                pivot: norm,
                threshold,
            });
        }
        let refl = make_reflector(col, norm);
        for j in k..m {
            apply_reflector_col(&mut b, &refl, k, j);
        }
        reflectors.push(refl);
    }

    // Accumulate Q~ (n x m) by applying the reflectors in reverse to [I_m; 0].
    let mut qt = ComplexMatrix::zeros(n, m);
    for i in 0..m {
        qt.set(i, i, Complex64::new(1.0, 0.0));
    }
    for k in (0..m).rev() {
        for j in 0..m {
            apply_reflector_col(&mut qt, &reflectors[k], k, j);
        }
    }

    // input (rows permuted) = R^H Q~^H. Scale by the unit phases of diag(R)
    // so diag(L) ends up real positive: L = R^H D, Q = D^H Q~^H.
    let mut phases = Vec::with_capacity(m);
    let mut diag = Vec::with_capacity(m);
    for i in 0..m {
        let r_ii = b.get(i, i);
        let mag = r_ii.norm();
        phases.push(r_ii / mag);
        diag.push(mag);
    }
    let mut l = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            if i == j {
                l.set(i, i, Complex64::new(diag[i], 0.0));
            } else {
                l.set(i, j, b.get(j, i).conj() * phases[j]);
            }
        }
    }
    let mut q = ComplexMatrix::zeros(m, n);
    for i in 0..m {
        let scale = phases[i].conj();
        for j in 0..n {
            q.set(i, j, scale * qt.get(j, i).conj());
        }
    }

    Ok((order, LqFactors { l, q, diag }))
}

/// LQ factorization `input = L * Q` for `rows <= cols`, with `L` lower
/// triangular (real positive diagonal) and `Q` having orthonormal rows.
pub fn lq(input: &ComplexMatrix) -> Result<LqFactors, MatError> {
    lq_inner(input, false).map(|(_, f)| f)
}

/// Row-pivoted LQ of a square matrix: `P * input = L * Q` with the diagonal
/// magnitudes of `L` in non-increasing order.
pub fn lq_pivoted(input: &ComplexMatrix) -> Result<(Permutation, LqFactors), MatError> {
    if input.rows() != input.cols() {
        return Err(MatError::DimensionMismatch {
            expected: (input.rows(), input.rows()),
            got: (input.rows(), input.cols()),
        });
    }
    let (order, factors) = lq_inner(input, true)?;
    Ok((Permutation::new(order)?, factors))
}

/// Applies a row permutation: row `i` of the output is row `p.order[i]` of
/// the input. Realizes `T * m` without materializing the permutation matrix.
pub fn permute_rows(m: &ComplexMatrix, p: &Permutation) -> Result<ComplexMatrix, MatError> {
    if p.len() != m.rows() {
        return Err(MatError::DimensionMismatch {
            expected: (m.rows(), m.cols()),
            got: (p.len(), m.cols()),
        });
    }
    let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
    for (i, &src) in p.order().iter().enumerate() {
        out.data[i * m.cols()..(i + 1) * m.cols()].copy_from_slice(m.row(src));
    }
    Ok(out)
}

/// Kronecker product.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ia in 0..a.rows() {
        for ja in 0..a.cols() {
            let aij = a.get(ia, ja);
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for ib in 0..b.rows() {
                for jb in 0..b.cols() {
                    out.set(ia * b.rows() + ib, ja * b.cols() + jb, aij * b.get(ib, jb));
                }
            }
        }
    }
    out
}

/// Forward substitution: solves `L x = v` for lower triangular `L`.
#[allow(clippy::needless_range_loop)]
pub fn solve_lower(l: &ComplexMatrix, v: &[Complex64]) -> Result<Vec<Complex64>, MatError> {
    let n = l.rows();
    if l.cols() != n || v.len() != n {
        return Err(MatError::DimensionMismatch {
            expected: (n, n),
            got: (l.rows(), v.len()),
        });
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = v[i];
        for j in 0..i {
            acc -= l.get(i, j) * x[j];
        }
        x[i] = acc / l.get(i, i);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        // Small deterministic LCG; good enough for factorization tests.
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let data = (0..rows * cols).map(|_| c(next(), next())).collect();
        ComplexMatrix::new(rows, cols, data).unwrap()
    }

    fn assert_reconstructs(input: &ComplexMatrix, f: &LqFactors, tol: f64) {
        let rebuilt = f.l.mul(&f.q).unwrap();
        let err = input.sub(&rebuilt).unwrap().frob_norm();
        assert!(
            err <= tol * input.frob_norm().max(1.0),
            "reconstruction error {err:.3e}"
        );
        let gram = f.q.mul(&f.q.hermitian()).unwrap();
        let ortho = gram.frob_dist_from_identity();
        assert!(ortho <= tol, "orthonormality error {ortho:.3e}");
    }

    #[test]
    fn new_rejects_bad_length_and_nonfinite() {
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![c(1.0, 0.0); 3]),
            Err(MatError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]),
            Err(MatError::NonFinite)
        ));
    }

    #[test]
    fn lq_identity_is_identity() {
        let i3 = ComplexMatrix::identity(3);
        let f = lq(&i3).unwrap();
        assert!(f.l.sub(&i3).unwrap().frob_norm() < 1e-14);
        assert!(f.q.sub(&i3).unwrap().frob_norm() < 1e-14);
        assert_eq!(f.diag, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn lq_positive_diagonal_forces_q_identity_for_diagonal_input() {
        let h = ComplexMatrix::from_real_diag(&[2.0, 3.0]);
        let f = lq(&h).unwrap();
        assert!(f.l.sub(&h).unwrap().frob_norm() < 1e-14);
        assert!(f.q.frob_dist_from_identity() < 1e-14);
        assert!((f.diag[0] - 2.0).abs() < 1e-14);
        assert!((f.diag[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn lq_random_reconstruction() {
        for seed in 0..20 {
            let h = random_matrix(4, 4, seed);
            let f = lq(&h).unwrap();
            assert_reconstructs(&h, &f, 1e-10);
            // L is exactly lower triangular with real positive diagonal.
            for i in 0..4 {
                for j in (i + 1)..4 {
                    assert_eq!(f.l.get(i, j), c(0.0, 0.0));
                }
                assert!(f.l.get(i, i).im == 0.0 && f.l.get(i, i).re > 0.0);
            }
        }
    }

    #[test]
    fn lq_wide_input() {
        let h = random_matrix(3, 7, 99);
        let f = lq(&h).unwrap();
        assert_reconstructs(&h, &f, 1e-10);
    }

    #[test]
    fn lq_rejects_tall_input() {
        let h = random_matrix(4, 2, 5);
        assert!(matches!(lq(&h), Err(MatError::DimensionMismatch { .. })));
    }

    #[test]
    fn lq_rank_deficient_detected() {
        // Row 2 = 2 * row 1.
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 1.0), c(0.5, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 2.0), c(1.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(lq(&h), Err(MatError::RankDeficient { .. })));
    }

    #[test]
    fn lq_pivoted_reorders_decreasing() {
        let h = ComplexMatrix::from_real_diag(&[1.0, 5.0]);
        let (p, f) = lq_pivoted(&h).unwrap();
        assert_eq!(p.order(), &[1, 0]);
        assert!((f.diag[0] - 5.0).abs() < 1e-14);
        assert!((f.diag[1] - 1.0).abs() < 1e-14);

        let i3 = ComplexMatrix::identity(3);
        let (p, f) = lq_pivoted(&i3).unwrap();
        assert!(p.is_identity());
        assert!(f.l.sub(&i3).unwrap().frob_norm() < 1e-14);
    }

    #[test]
    fn lq_pivoted_random_property() {
        for seed in 100..130 {
            let h = random_matrix(3, 3, seed);
            let (p, f) = lq_pivoted(&h).unwrap();
            let ph = permute_rows(&h, &p).unwrap();
            assert_reconstructs(&ph, &f, 1e-10);
            for w in f.diag.windows(2) {
                assert!(w[0] >= w[1] - 1e-12, "diag not sorted: {:?}", f.diag);
            }
        }
    }

    #[test]
    fn permute_rows_basics() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(3.0, 0.0), c(4.0, 0.0)],
        ])
        .unwrap();
        let id = Permutation::identity(2);
        assert_eq!(permute_rows(&m, &id).unwrap(), m);

        let rev = Permutation::exchange(2);
        let r = permute_rows(&m, &rev).unwrap();
        assert_eq!(r.get(0, 0), c(3.0, 0.0));
        assert_eq!(r.get(1, 1), c(2.0, 0.0));

        // p then p^-1 restores the input.
        let back = permute_rows(&r, &rev.inverse()).unwrap();
        assert_eq!(back, m);

        let p3 = Permutation::identity(3);
        assert!(matches!(
            permute_rows(&m, &p3),
            Err(MatError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        let k = kron(&i2, &i2);
        assert!(k.sub(&ComplexMatrix::identity(4)).unwrap().frob_norm() < 1e-15);

        let pi2 = Permutation::exchange(2).to_matrix();
        let k = kron(&pi2, &i2);
        // Block anti-diagonal with I2 blocks.
        for i in 0..2 {
            assert_eq!(k.get(i, 2 + i), c(1.0, 0.0));
            assert_eq!(k.get(2 + i, i), c(1.0, 0.0));
        }

        // Exchange (x) exchange on 2x2 blocks reverses all four streams.
        let k = kron(&pi2, &pi2);
        let expect = Permutation::exchange(4).to_matrix();
        assert!(k.sub(&expect).unwrap().frob_norm() < 1e-15);
    }

    #[test]
    fn solve_lower_matches_direct_multiply() {
        for seed in 0..10 {
            let mut l = random_matrix(5, 5, 1000 + seed);
            for i in 0..5 {
                for j in (i + 1)..5 {
                    l.set(i, j, c(0.0, 0.0));
                }
                l.set(i, i, l.get(i, i) + c(3.0, 0.0)); // keep well conditioned
            }
            let v: Vec<Complex64> = (0..5).map(|i| c(i as f64 + 0.5, -(i as f64))).collect();
            let x = solve_lower(&l, &v).unwrap();
            let lv = l.mul_vec(&x).unwrap();
            let err: f64 = lv
                .iter()
                .zip(v.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-10 * vn);
        }
    }

    #[test]
    fn permutation_rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3]).is_err());
    }

    proptest! {
        #[test]
        fn lq_reconstructs_over_random_sizes(seed in 0u64..300, m in 2usize..8, extra in 0usize..5) {
            let h = random_matrix(m, m + extra, seed);
            let f = lq(&h).unwrap();
            let rebuilt = f.l.mul(&f.q).unwrap();
            let err = h.sub(&rebuilt).unwrap().frob_norm();
            prop_assert!(err <= 1e-10 * h.frob_norm());
            prop_assert!(f.q.mul(&f.q.hermitian()).unwrap().frob_dist_from_identity() <= 1e-10);
            prop_assert!(f.diag.iter().all(|&d| d > 0.0));
        }

        #[test]
        fn kron_of_permutations_is_permutation(n1 in 1usize..5, n2 in 1usize..5, s1 in 0u64..50, s2 in 0u64..50) {
            // Fisher-Yates from a cheap LCG.
            let shuffled = |n: usize, seed: u64| {
                let mut v: Vec<usize> = (0..n).collect();
                let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
                for i in (1..n).rev() {
                    state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
                    let j = (state >> 33) as usize % (i + 1);
                    v.swap(i, j);
                }
                v
            };
            let p1 = Permutation::new(shuffled(n1, s1)).unwrap();
            let p2 = Permutation::new(shuffled(n2, s2)).unwrap();
            let k = kron(&p1.to_matrix(), &p2.to_matrix());
            for i in 0..k.rows() {
                let row_ones = (0..k.cols()).filter(|&j| (k.get(i, j) - Complex64::new(1.0, 0.0)).norm() < 1e-15).count();
                let row_zeros = (0..k.cols()).filter(|&j| k.get(i, j).norm() < 1e-15).count();
                prop_assert_eq!(row_ones, 1);
                prop_assert_eq!(row_zeros, k.cols() - 1);
            }
            for j in 0..k.cols() {
                let col_ones = (0..k.rows()).filter(|&i| (k.get(i, j) - Complex64::new(1.0, 0.0)).norm() < 1e-15).count();
                prop_assert_eq!(col_ones, 1);
            }
        }
    }
}
