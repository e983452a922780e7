//! Embedding a lossy `N × N` network into a `2N × 2N` matrix with virtual
//! loss modes.
//!
//! Each input `j` is preceded by a virtual beam splitter of transmissivity
//! `η_j` that routes the lost amplitude into an extra mode. With
//! `η = diag(η_j)`, `η̃ = diag(√(1 − η_j²))` and the inferred lossless core
//! `B = η⁻¹·M`,
//!
//! ```text
//! V = [ η B   −η̃ ]
//!     [ η̃ B    η ]
//! ```
//!
//! `V` is exactly unitary when the loss is path independent (`B` unitary).
//! Otherwise its distance from unitarity measures the path-dependent part,
//! and its polar factor is the closest unitary description.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::SingleInputRecord;
use crate::linalg::{self, deviation_from_unitarity, ComplexMatrix};
use crate::network::{square_matrix, TransferMatrix};

/// `η_j` above 1 by up to this much is clamped; beyond it is an error.
pub const ETA_CLAMP_TOLERANCE: f64 = 1e-3;
/// Transmissivities at or below this cannot be inverted to recover `B`.
pub const ETA_ZERO_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossEmbedding {
    pub eta: Vec<f64>,
    #[serde(with = "square_matrix")]
    pub b_matrix: ComplexMatrix,
    #[serde(with = "square_matrix")]
    pub v_matrix: ComplexMatrix,
    #[serde(default, with = "optional_square_matrix")]
    pub u_matrix: Option<ComplexMatrix>,
    /// Trace norm of `M M† − I`.
    pub unitarity_deviation_m: f64,
    /// Trace norm of `V V† − I`.
    pub unitarity_deviation_v: f64,
    /// `|V V† − I|` elementwise.
    pub gram_deviation: Vec<Vec<f64>>,
}

mod optional_square_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "square_matrix")] ComplexMatrix);

    pub fn serialize<S: Serializer>(
        m: &Option<ComplexMatrix>,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        m.clone().map(Wrapped).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Option<ComplexMatrix>, D::Error> {
        Ok(Option::<Wrapped>::deserialize(deserializer)?.map(|w| w.0))
    }
}

/// `η_j = √(Σ_k I_k / I)` for each input, one record per input mode.
pub fn estimate_eta(records: &[SingleInputRecord], dark: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut sorted: Vec<&SingleInputRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.input_mode);
    if sorted.iter().enumerate().any(|(j, r)| r.input_mode != j) {
        return Err(Error::InvalidParameter(
            "need exactly one single-input record per input mode".into(),
        ));
    }
    sorted
        .iter()
        .map(|rec| {
            if !(rec.intensity > 0.0) {
                return Err(Error::InvalidParameter(
                    "probe intensity must be > 0".into(),
                ));
            }
            if let Some(d) = dark {
                if d.len() != rec.outputs.len() {
                    return Err(Error::DimensionMismatch("dark level count".into()));
                }
            }
            let total: f64 = rec
                .outputs
                .iter()
                .enumerate()
                .map(|(k, &x)| x - dark.map_or(0.0, |d| d[k]))
                .sum();
            let eta = (total.max(0.0) / rec.intensity).sqrt();
            if eta > 1.0 + ETA_CLAMP_TOLERANCE {
                return Err(Error::Nonphysical(format!(
                    "input {}: transmissivity {eta} exceeds 1 (amplification or miscalibration)",
                    rec.input_mode
                )));
            }
            if eta > 1.0 {
                log::warn!(
                    "input {}: clamping transmissivity {eta} to 1",
                    rec.input_mode
                );
                return Ok(1.0);
            }
            Ok(eta)
        })
        .collect()
}

/// Builds `B` and `V` from a measured matrix and its transmissivities.
pub fn embed(m: &TransferMatrix, eta: &[f64]) -> Result<LossEmbedding> {
    let n = m.n();
    if eta.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} transmissivities for a {n}-mode network",
            eta.len()
        )));
    }
    if let Some((j, &e)) = eta
        .iter()
        .enumerate()
        .find(|(_, &e)| !(e > ETA_ZERO_TOLERANCE && e <= 1.0))
    {
        return Err(Error::InvalidParameter(format!(
            "transmissivity of input {j} is {e}; need 0 < η ≤ 1 to recover the lossless core"
        )));
    }

    let inv_eta: Vec<f64> = eta.iter().map(|e| 1.0 / e).collect();
    let b = linalg::multiply(&ComplexMatrix::from_real_diagonal(&inv_eta)?, m.matrix())?;
    let leak: Vec<f64> = eta.iter().map(|e| (1.0 - e * e).max(0.0).sqrt()).collect();

    let eta_b = linalg::multiply(&ComplexMatrix::from_real_diagonal(eta)?, &b)?;
    let leak_b = linalg::multiply(&ComplexMatrix::from_real_diagonal(&leak)?, &b)?;
    let v = ComplexMatrix::from_dmatrix(nalgebra::DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        use num_complex::Complex64;
        let zero = Complex64::new(0.0, 0.0);
        match (r < n, c < n) {
            (true, true) => eta_b.get(r, c),
            (true, false) => {
                if r == c - n {
                    Complex64::new(-leak[r], 0.0)
                } else {
                    zero
                }
            }
            (false, true) => leak_b.get(r - n, c),
            (false, false) => {
                if r == c {
                    Complex64::new(eta[r - n], 0.0)
                } else {
                    zero
                }
            }
        }
    }))?;

    let gram = linalg::multiply(&v, &linalg::conjugate_transpose(&v))?;
    let gram_deviation = (&gram - &ComplexMatrix::identity(2 * n)).moduli();

    Ok(LossEmbedding {
        eta: eta.to_vec(),
        b_matrix: b,
        unitarity_deviation_m: deviation_from_unitarity(m.matrix())?,
        unitarity_deviation_v: deviation_from_unitarity(&v)?,
        v_matrix: v,
        u_matrix: None,
        gram_deviation,
    })
}

/// Polar factor of `V`, stored in the embedding and returned.
pub fn closest_unitary(embedding: &mut LossEmbedding) -> Result<&ComplexMatrix> {
    let u = linalg::polar_unitary(&embedding.v_matrix)?;
    Ok(embedding.u_matrix.insert(u))
}

impl LossEmbedding {
    pub fn modes(&self) -> usize {
        self.eta.len()
    }

    /// Top-left `N × N` block of `U`, the unitary-corrected estimate of the
    /// measured network.
    pub fn corrected_network(&self) -> Result<TransferMatrix> {
        let u = self
            .u_matrix
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("closest unitary not computed yet".into()))?;
        TransferMatrix::estimated(u.block(0, 0, self.modes(), self.modes())?)
    }

    /// Largest off-diagonal `|(V V†)_ab|`.
    pub fn max_off_diagonal_gram(&self) -> f64 {
        self.gram_deviation
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .filter(move |(c, _)| *c != r)
                    .map(|(_, &x)| x)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|(V V†)_aa − 1|`.
    pub fn max_diagonal_gram_error(&self) -> f64 {
        self.gram_deviation
            .iter()
            .enumerate()
            .map(|(r, row)| row[r])
            .fold(0.0, f64::max)
    }
}
