//! The transfer-matrix model of a passive linear-optical network.
//!
//! Row index is the input mode, column index the output mode, so an input
//! creation operator maps as `a†_j = Σ_k M_jk b†_k` and a coherent input
//! `α` leaves as `β_k = Σ_j M_jk α_j`. Modes are 0-based in code.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

/// Slack on element moduli above 1.
pub const MODULUS_SLACK: f64 = 1e-9;
/// Slack on singular values above 1 (no amplification).
pub const SINGULAR_VALUE_SLACK: f64 = 1e-6;
/// Reference couplings below this fraction of the largest modulus cannot fix the gauge.
pub const GAUGE_ZERO_THRESHOLD: f64 = 1e-6;
/// Distinguishable coincidence probability below which visibility is undefined.
pub const VISIBILITY_C_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    m: ComplexMatrix,
}

impl TransferMatrix {
    /// Accepts a physical network matrix: square, every modulus at most
    /// `1 + 1e-9` and every singular value at most `1 + 1e-6`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let net = Self::estimated(m)?;
        net.check_physical()?;
        Ok(net)
    }

    /// Accepts any finite square matrix. Reconstructions from noisy data land
    /// here since they can exceed the passivity bounds by the noise level.
    pub fn estimated(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "transfer matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(Self { m })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: ComplexMatrix::identity(n),
        }
    }

    /// Verifies the passivity bounds.
    pub fn check_physical(&self) -> Result<()> {
        for (j, row) in self.m.moduli().iter().enumerate() {
            for (k, &r) in row.iter().enumerate() {
                if r > 1.0 + MODULUS_SLACK {
                    return Err(Error::Nonphysical(format!("|M[{j}][{k}]| = {r} exceeds 1")));
                }
            }
        }
        let largest = self.m.singular_values().into_iter().fold(0.0, f64::max);
        if largest > 1.0 + SINGULAR_VALUE_SLACK {
            return Err(Error::Nonphysical(format!(
                "singular value {largest} exceeds 1 (amplifying network)"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn element(&self, input: usize, output: usize) -> Complex64 {
        self.m.get(input, output)
    }

    pub fn moduli(&self) -> Vec<Vec<f64>> {
        self.m.moduli()
    }

    pub fn phases(&self) -> Vec<Vec<f64>> {
        self.m.phases()
    }

    fn check_mode(&self, index: usize) -> Result<()> {
        if index >= self.n() {
            Err(Error::ModeOutOfRange {
                index,
                modes: self.n(),
            })
        } else {
            Ok(())
        }
    }

    fn check_modes(&self, modes: [usize; 4]) -> Result<()> {
        modes.into_iter().try_for_each(|m| self.check_mode(m))
    }

    /// Returns `D(μ)·M·D(ν)`, a physically equivalent network.
    pub fn gauge_transformed(&self, mu: &[f64], nu: &[f64]) -> Result<Self> {
        if mu.len() != self.n() || nu.len() != self.n() {
            return Err(Error::DimensionMismatch("gauge phase vector length".into()));
        }
        let left = ComplexMatrix::phase_diagonal(mu)?;
        let right = ComplexMatrix::phase_diagonal(nu)?;
        let m = linalg::multiply(&linalg::multiply(&left, &self.m)?, &right)?;
        Ok(Self { m })
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for TransferMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        square_matrix::serialize(&self.m, serializer)
    }
}

impl<'de> Deserialize<'de> for TransferMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let m = square_matrix::deserialize(deserializer)?;
        TransferMatrix::estimated(m).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing a square matrix as `{ "n", "re", "im" }`.
pub mod square_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(
        m: &ComplexMatrix,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            n: m.rows(),
            re: m.real_part(),
            im: m.imag_part(),
        }
        .serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<ComplexMatrix, D::Error> {
        use serde::de::Error as _;
        let json = MatrixJson::deserialize(deserializer)?;
        if json.re.len() != json.n || json.re.iter().any(|r| r.len() != json.n) {
            return Err(D::Error::custom(format!(
                "matrix \"re\" is not {n}x{n}",
                n = json.n
            )));
        }
        ComplexMatrix::from_parts(&json.re, &json.im).map_err(D::Error::custom)
    }
}

/// Coherent amplitudes `α_j`, with `|α_j|²` the intensity in mode `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentInput {
    pub amplitudes: Vec<Complex64>,
}

impl CoherentInput {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes
            .iter()
            .any(|a| !(a.re.is_finite() && a.im.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "non-finite coherent amplitude".into(),
            ));
        }
        Ok(Self { amplitudes })
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn total_intensity(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Output coherent amplitudes `β_k = Σ_j M_jk α_j`.
pub fn propagate_coherent(net: &TransferMatrix, input: &CoherentInput) -> Result<CoherentInput> {
    let n = net.n();
    if input.amplitudes.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "coherent input has {} modes, network has {n}",
            input.amplitudes.len()
        )));
    }
    let out = (0..n)
        .map(|k| {
            input
                .amplitudes
                .iter()
                .enumerate()
                .map(|(j, &alpha)| net.element(j, k) * alpha)
                .sum()
        })
        .collect();
    Ok(CoherentInput { amplitudes: out })
}

/// Result of [`canonical_gauge`]: `M = D(μ)·canonical·D(ν)`.
#[derive(Clone, Debug)]
pub struct GaugeDecomposition {
    pub canonical: TransferMatrix,
    /// Input-side phases; `mu[0]` is fixed to 0.
    pub mu: Vec<f64>,
    /// Output-side phases.
    pub nu: Vec<f64>,
}

/// Strips the `2N − 1` unobservable diagonal phases so that the first row
/// and first column become real and nonnegative.
pub fn canonical_gauge(net: &TransferMatrix) -> Result<GaugeDecomposition> {
    let n = net.n();
    let moduli = net.moduli();
    let largest = moduli.iter().flatten().copied().fold(0.0, f64::max);
    let threshold = GAUGE_ZERO_THRESHOLD * largest;
    let reference = (0..n).map(|k| (0, k)).chain((1..n).map(|j| (j, 0)));
    for (row, col) in reference {
        let modulus = moduli[row][col];
        if !(modulus >= threshold) || modulus == 0.0 {
            return Err(Error::DegenerateReference { row, col, modulus });
        }
    }

    let nu: Vec<f64> = (0..n).map(|k| net.element(0, k).arg()).collect();
    let mu: Vec<f64> = (0..n)
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                linalg::wrap_signed(net.element(j, 0).arg() - nu[0])
            }
        })
        .collect();

    let rows: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    if j == 0 || k == 0 {
                        Complex64::new(moduli[j][k], 0.0)
                    } else {
                        net.element(j, k) * Complex64::from_polar(1.0, -(mu[j] + nu[k]))
                    }
                })
                .collect()
        })
        .collect();
    Ok(GaugeDecomposition {
        canonical: TransferMatrix::estimated(ComplexMatrix::from_rows(&rows)?)?,
        mu,
        nu,
    })
}

/// Probability of one photon in each of outputs `k` and `l` for
/// indistinguishable photons entering `i` and `j`:
/// `|M_ik M_jl + M_il M_jk|² / ((1 + δ_ij)(1 + δ_kl))`.
///
/// The `1/(1 + δ_kl)` factor gives the probability of both photons in `k`
/// when `k == l`.
pub fn coincidence_indistinguishable(
    net: &TransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    net.check_modes([i, j, k, l])?;
    let amp = net.element(i, k) * net.element(j, l) + net.element(i, l) * net.element(j, k);
    Ok(amp.norm_sqr() / (bunching_factor(i, j) * bunching_factor(k, l)))
}

/// Same event for fully distinguishable photons:
/// `(|M_ik M_jl|² + |M_il M_jk|²) / (1 + δ_kl)`.
pub fn coincidence_distinguishable(
    net: &TransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    net.check_modes([i, j, k, l])?;
    let direct = (net.element(i, k) * net.element(j, l)).norm_sqr();
    let exchanged = (net.element(i, l) * net.element(j, k)).norm_sqr();
    Ok((direct + exchanged) / bunching_factor(k, l))
}

fn bunching_factor(a: usize, b: usize) -> f64 {
    if a == b {
        2.0
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonObservables {
    pub q: f64,
    pub c: f64,
    /// `(c − q) / c`, or `None` when `c` is below [`VISIBILITY_C_THRESHOLD`].
    pub visibility: Option<f64>,
}

pub fn visibility(
    net: &TransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<TwoPhotonObservables> {
    let q = coincidence_indistinguishable(net, i, j, k, l)?;
    let c = coincidence_distinguishable(net, i, j, k, l)?;
    let visibility = (c > VISIBILITY_C_THRESHOLD).then(|| (c - q) / c);
    Ok(TwoPhotonObservables { q, c, visibility })
}

/// Coincidence probability at partial temporal overlap `γ`, modeled as the
/// mixture `γ·Q + (1 − γ)·C`.
pub fn hom_dip(
    net: &TransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    overlap: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!(
            "overlap {overlap} outside [0, 1]"
        )));
    }
    let q = coincidence_indistinguishable(net, i, j, k, l)?;
    let c = coincidence_distinguishable(net, i, j, k, l)?;
    Ok(overlap * q + (1.0 - overlap) * c)
}

/// Unordered output pairs `(k, l)` with `k < l`.
pub fn output_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|k| ((k + 1)..n).map(move |l| (k, l)))
        .collect()
}
