//! Dense complex matrices and the handful of decompositions the rest of the
//! crate needs: products, adjoints, trace-norm unitarity deviation,
//! Haar-random unitaries, and the polar (closest-unitary) factor.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero by
/// [`polar_unitary`].
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// A finite, non-empty dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    /// Wraps an nalgebra matrix, rejecting empty shapes and non-finite entries.
    pub fn from_dmatrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let z = m[(r, c)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_dmatrix(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
    }

    /// Builds a matrix from separate real and imaginary row arrays.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        if re.len() != im.len() || re.iter().zip(im).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::DimensionMismatch(
                "real and imaginary parts differ in shape".into(),
            ));
        }
        let rows: Vec<Vec<Complex64>> = re
            .iter()
            .zip(im)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| Complex64::new(x, y))
                    .collect()
            })
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let im: Vec<Vec<f64>> = rows.iter().map(|r| vec![0.0; r.len()]).collect();
        Self::from_parts(rows, &im)
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity of size zero");
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        Self::from_dmatrix(DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                diag[r]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// `diag(e^{i phase_0}, e^{i phase_1}, ...)`
    pub fn phase_diagonal(phases: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect();
        Self::from_diagonal(&d)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn real_part(&self) -> Vec<Vec<f64>> {
        self.map_rows(|z| z.re)
    }

    pub fn imag_part(&self) -> Vec<Vec<f64>> {
        self.map_rows(|z| z.im)
    }

    pub fn moduli(&self) -> Vec<Vec<f64>> {
        self.map_rows(|z| z.norm())
    }

    /// Element phases in `[0, 2π)`.
    pub fn phases(&self) -> Vec<Vec<f64>> {
        self.map_rows(|z| wrap_phase(z.arg()))
    }

    fn map_rows(&self, f: impl Fn(Complex64) -> f64) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|r| (0..self.cols()).map(|c| f(self.get(r, c))).collect())
            .collect()
    }

    /// Copies the `rows × cols` block whose top-left corner is `(row, col)`.
    pub fn block(&self, row: usize, col: usize, rows: usize, cols: usize) -> Result<Self> {
        if row + rows > self.rows() || col + cols > self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "block {rows}x{cols} at ({row}, {col}) exceeds {}x{}",
                self.rows(),
                self.cols()
            )));
        }
        Self::from_dmatrix(self.0.view((row, col), (rows, cols)).into_owned())
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.0.clone().singular_values().iter().copied().collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows(), self.cols()),
            (other.rows(), other.cols()),
            "shape mismatch"
        );
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for r in 0..self.rows() {
            write!(f, "  ")?;
            for c in 0..self.cols() {
                let z = self.get(r, c);
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows(), self.cols()), (rhs.rows(), rhs.cols()));
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows(), self.cols()), (rhs.rows(), rhs.cols()));
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Maps an angle onto `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = phase.rem_euclid(tau);
    // rem_euclid can round up to exactly tau for tiny negative inputs
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Maps an angle onto `(-π, π]`.
pub fn wrap_signed(phase: f64) -> f64 {
    let w = wrap_phase(phase);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

pub fn multiply(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(ComplexMatrix(&a.0 * &b.0))
}

pub fn conjugate_transpose(a: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.adjoint())
}

/// Trace norm of `a·a† − I`. Zero exactly when `a` is unitary.
pub fn deviation_from_unitarity(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "unitarity deviation needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let gram = &a.0 * a.0.adjoint();
    let diff = gram - DMatrix::<Complex64>::identity(a.rows(), a.cols());
    Ok(diff.singular_values().iter().sum())
}

/// Samples an `n × n` unitary from the Haar measure.
///
/// A matrix of i.i.d. standard complex Gaussians is QR-factored and each
/// column of `Q` is multiplied by the phase of the matching diagonal entry of
/// `R`. Without that correction the result is biased by the QR sign
/// convention.
pub fn haar_random_unitary(n: usize, seed: u64) -> Result<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_unitary_with(n, &mut rng)
}

pub fn haar_random_unitary_with<R: rand::Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "Haar unitary dimension must be at least 1".into(),
        ));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let gaussian = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * scale, im * scale)
    });
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..n {
        let d = r[(c, c)];
        let norm = d.norm();
        let phase = if norm > 0.0 {
            d / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..n {
            q[(row, c)] *= phase;
        }
    }
    ComplexMatrix::from_dmatrix(q)
}

/// Closest unitary to `v` in Frobenius norm, `(v v†)^{-1/2} v`, with the
/// default rank tolerance.
pub fn polar_unitary(v: &ComplexMatrix) -> Result<ComplexMatrix> {
    polar_unitary_with_tolerance(v, DEFAULT_RANK_TOLERANCE)
}

/// Computes the polar factor through the SVD `v = W Σ Z†`, returning `W Z†`.
/// Fails when the smallest singular value is below `tolerance` times the
/// largest.
pub fn polar_unitary_with_tolerance(v: &ComplexMatrix, tolerance: f64) -> Result<ComplexMatrix> {
    if !v.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "polar decomposition needs a square matrix, got {}x{}",
            v.rows(),
            v.cols()
        )));
    }
    let svd = v.0.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    let threshold = tolerance * largest;
    if !(smallest > threshold) {
        return Err(Error::RankDeficient {
            value: smallest,
            tolerance: threshold,
        });
    }
    let (Some(w), Some(z_adj)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateFit(
            "SVD did not return singular vectors".into(),
        ));
    };
    ComplexMatrix::from_dmatrix(w * z_adj)
}

/// Probability that photons entering inputs `i` and `j` leave one in output
/// `k` and one in `l` (both in `k` when `k == l`).
///
/// Evaluated by pushing the input Fock state through the creation-operator
/// map `a†_m → Σ_k M_mk b†_k` one photon at a time and reading off the
/// normalized amplitude of the target occupation. Kept independent of the
/// closed-form coincidence expressions so it can check them.
pub fn two_photon_fock_oracle(
    m: &ComplexMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(
            "Fock oracle needs a square matrix".into(),
        ));
    }
    let n = m.rows();
    for index in [i, j, k, l] {
        if index >= n {
            return Err(Error::ModeOutOfRange { index, modes: n });
        }
    }

    // Normalize the input state a†_i a†_j |0>.
    let mut input: FockState = BTreeMap::new();
    input.insert(vec![0u8; n], Complex64::new(1.0, 0.0));
    let input = create(&create(&input, i, n), j, n);
    let input_norm = input.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();

    let mut output: FockState = BTreeMap::new();
    output.insert(vec![0u8; n], Complex64::new(1.0 / input_norm, 0.0));
    for &mode in &[i, j] {
        let mut next: FockState = BTreeMap::new();
        for out in 0..n {
            let coeff = m.get(mode, out);
            for (occ, amp) in create(&output, out, n) {
                *next.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += coeff * amp;
            }
        }
        output = next;
    }

    let mut target = vec![0u8; n];
    target[k] += 1;
    target[l] += 1;
    Ok(output.get(&target).map_or(0.0, |a| a.norm_sqr()))
}

type FockState = BTreeMap<Vec<u8>, Complex64>;

/// Applies a bosonic creation operator on `mode` to every term of `state`.
fn create(state: &FockState, mode: usize, n: usize) -> FockState {
    let mut out = BTreeMap::new();
    for (occ, amp) in state {
        debug_assert_eq!(occ.len(), n);
        let mut raised = occ.clone();
        let factor = ((occ[mode] as f64) + 1.0).sqrt();
        raised[mode] += 1;
        *out.entry(raised).or_insert(Complex64::new(0.0, 0.0)) += amp * factor;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn splitter() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[
            vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        ])
        .unwrap()
    }

    fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_dmatrix(DMatrix::from_fn(n, n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
        .unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            ComplexMatrix::from_rows(&[vec![c(f64::NAN, 0.0)]]),
            Err(Error::NonFinite { row: 0, col: 0 })
        ));
        assert!(matches!(
            ComplexMatrix::from_rows(&[]),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn multiply_identity_and_diagonal() {
        let a = random_matrix(2, 1);
        let prod = multiply(&ComplexMatrix::identity(2), &a).unwrap();
        assert!(prod.max_abs_diff(&a) == 0.0);

        let d1 = ComplexMatrix::from_real_diagonal(&[2.0, 3.0]).unwrap();
        let d2 = ComplexMatrix::from_real_diagonal(&[5.0, 7.0]).unwrap();
        let expected = ComplexMatrix::from_real_diagonal(&[10.0, 21.0]).unwrap();
        assert_eq!(multiply(&d1, &d2).unwrap(), expected);
    }

    #[test]
    fn multiply_dimension_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(multiply(&a, &a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn adjoint_examples() {
        let sym = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 5.0]]).unwrap();
        assert_eq!(conjugate_transpose(&sym), sym);
        let i = ComplexMatrix::from_rows(&[vec![c(0.0, 1.0)]]).unwrap();
        assert_eq!(conjugate_transpose(&i).get(0, 0), c(0.0, -1.0));
        let a = random_matrix(4, 9);
        assert_eq!(conjugate_transpose(&conjugate_transpose(&a)), a);
        let at = conjugate_transpose(&a);
        assert_eq!(at.get(1, 3), a.get(3, 1).conj());
    }

    #[test]
    fn deviation_examples() {
        let u = haar_random_unitary(5, 3).unwrap();
        assert!(deviation_from_unitarity(&u).unwrap() <= 1e-12);
        assert!(
            (deviation_from_unitarity(&ComplexMatrix::zeros(4, 4)).unwrap() - 4.0).abs() < 1e-12
        );
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!((deviation_from_unitarity(&half).unwrap() - 1.5).abs() < 1e-12);
        assert!(deviation_from_unitarity(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn haar_examples() {
        let u1 = haar_random_unitary(1, 77).unwrap();
        assert!((u1.get(0, 0).norm() - 1.0).abs() < 1e-14);
        for n in 1..8 {
            let u = haar_random_unitary(n, n as u64).unwrap();
            assert!(deviation_from_unitarity(&u).unwrap() <= 1e-10);
        }
        assert_eq!(
            haar_random_unitary(6, 42).unwrap(),
            haar_random_unitary(6, 42).unwrap()
        );
        assert!(haar_random_unitary(0, 1).is_err());
    }

    #[test]
    fn haar_marginal_mean() {
        // |U_00|^2 is uniform on [0,1] for n = 2: mean 1/2, std 1/sqrt(12).
        let samples = 1000;
        let values: Vec<f64> = (0..samples)
            .map(|s| {
                haar_random_unitary(2, 10_000 + s)
                    .unwrap()
                    .get(0, 0)
                    .norm_sqr()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / samples as f64;
        let stderr = (1.0 / 12.0f64).sqrt() / (samples as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * stderr, "mean {mean}");
    }

    #[test]
    fn haar_phases_are_not_qr_biased() {
        // Without the phase fix the diagonal of R is real positive and the
        // first column of Q inherits a deterministic phase structure. With it,
        // arg(U_00) is uniform, so its circular mean is near zero.
        let samples = 2000;
        let sum: Complex64 = (0..samples)
            .map(|s| {
                let z = haar_random_unitary(3, 50_000 + s).unwrap().get(0, 0);
                z / z.norm()
            })
            .sum();
        let resultant = sum.norm() / samples as f64;
        assert!(
            resultant < 4.0 / (samples as f64).sqrt(),
            "resultant {resultant}"
        );
    }

    #[test]
    fn polar_examples() {
        let u = haar_random_unitary(4, 5).unwrap();
        assert!(polar_unitary(&u).unwrap().max_abs_diff(&u) < 1e-12);

        let half = ComplexMatrix::identity(3).scale_real(0.5);
        assert!(
            polar_unitary(&half)
                .unwrap()
                .max_abs_diff(&ComplexMatrix::identity(3))
                < 1e-12
        );
    }

    #[test]
    fn polar_recovers_unitary_factor() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 5);
            let w = haar_random_unitary(n, 100 + seed).unwrap();
            // H = G G† + I is Hermitian positive definite.
            let g = random_matrix(n, 200 + seed);
            let h = &multiply(&g, &conjugate_transpose(&g)).unwrap() + &ComplexMatrix::identity(n);
            let v = multiply(&h, &w).unwrap();
            let u = polar_unitary(&v).unwrap();
            assert!(u.max_abs_diff(&w) < 1e-10, "seed {seed}");
            assert!(deviation_from_unitarity(&u).unwrap() < 1e-12);
        }
    }

    #[test]
    fn polar_matches_inverse_square_root_route() {
        // Independent route: (V V†)^{-1/2} V via a Hermitian eigendecomposition.
        for seed in 0..10 {
            let v = random_matrix(5, 300 + seed);
            let gram = v.as_dmatrix() * v.as_dmatrix().adjoint();
            let eig = gram.symmetric_eigen();
            let inv_sqrt = DMatrix::from_diagonal(
                &eig.eigenvalues.map(|x| Complex64::new(1.0 / x.sqrt(), 0.0)),
            );
            let root = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
            let expected = ComplexMatrix::from_dmatrix(root * v.as_dmatrix()).unwrap();
            assert!(polar_unitary(&v).unwrap().max_abs_diff(&expected) < 1e-10);
        }
    }

    #[test]
    fn polar_rank_deficient() {
        let singular = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match polar_unitary(&singular) {
            Err(Error::RankDeficient { value, .. }) => assert!(value < 1e-10),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn fock_oracle_examples() {
        assert!(two_photon_fock_oracle(&splitter(), 0, 1, 0, 1).unwrap() < 1e-15);
        let id = ComplexMatrix::identity(2);
        assert!((two_photon_fock_oracle(&id, 0, 1, 0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(two_photon_fock_oracle(&id, 0, 1, 0, 0).unwrap(), 0.0);
        // Bunching on a balanced splitter: half the pairs leave together in each port.
        assert!((two_photon_fock_oracle(&splitter(), 0, 1, 0, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            two_photon_fock_oracle(&id, 0, 2, 0, 1),
            Err(Error::ModeOutOfRange { index: 2, modes: 2 })
        ));
    }

    #[test]
    fn fock_oracle_conserves_probability_for_unitaries() {
        let u = haar_random_unitary(4, 8).unwrap();
        for (i, j) in [(0, 1), (2, 2), (1, 3)] {
            let mut total = 0.0;
            for k in 0..4 {
                for l in k..4 {
                    total += two_photon_fock_oracle(&u, i, j, k, l).unwrap();
                }
            }
            assert!((total - 1.0).abs() < 1e-12, "({i},{j}) total {total}");
        }
    }

    #[test]
    fn wrap_conventions() {
        assert_eq!(wrap_phase(std::f64::consts::TAU), 0.0);
        assert_eq!(wrap_phase(-1e-300), 0.0);
        assert!(
            (wrap_phase(-std::f64::consts::FRAC_PI_2) - 1.5 * std::f64::consts::PI).abs() < 1e-15
        );
        assert!(
            (wrap_signed(1.5 * std::f64::consts::PI) + std::f64::consts::FRAC_PI_2).abs() < 1e-15
        );
    }
}
