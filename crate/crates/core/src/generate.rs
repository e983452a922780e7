//! Seeded ground-truth networks for simulations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_random_unitary_with, multiply, ComplexMatrix};
use crate::network::TransferMatrix;

/// Range of the random transmissivities used by the lossy modes.
pub const RANDOM_ETA_RANGE: (f64, f64) = (0.5, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossMode {
    Lossless,
    /// Every input attenuated by the same `eta`.
    Uniform {
        eta: f64,
    },
    /// `diag(η)·U` with random `η_j`.
    PerInput,
    /// `U₁·diag(d)·U₂` with random interior attenuations `d`.
    PathDependent,
    /// `diag(η)·U₁·diag(d)·U₂`: per-input loss plus a path-dependent part.
    Mixed,
}

#[derive(Clone, Debug)]
pub struct GeneratedNetwork {
    pub network: TransferMatrix,
    /// Input transmissivities when the loss is path independent.
    pub eta: Option<Vec<f64>>,
}

pub fn generate_network(n: usize, mode: LossMode, seed: u64) -> Result<GeneratedNetwork> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "networks need at least 2 modes, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unitary = haar_random_unitary_with(n, &mut rng)?;
    let random_eta = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| rng.random_range(RANDOM_ETA_RANGE.0..RANDOM_ETA_RANGE.1))
            .collect()
    };
    let (m, eta) = match mode {
        LossMode::Lossless => (unitary, Some(vec![1.0; n])),
        LossMode::Uniform { eta } => {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "uniform transmissivity must lie in (0, 1], got {eta}"
                )));
            }
            (unitary.scale_real(eta), Some(vec![eta; n]))
        }
        LossMode::PerInput => {
            let eta = random_eta(&mut rng);
            let m = multiply(&ComplexMatrix::from_real_diagonal(&eta)?, &unitary)?;
            (m, Some(eta))
        }
        LossMode::PathDependent => {
            let inner = random_eta(&mut rng);
            let second = haar_random_unitary_with(n, &mut rng)?;
            let m = multiply(
                &multiply(&unitary, &ComplexMatrix::from_real_diagonal(&inner)?)?,
                &second,
            )?;
            (m, None)
        }
        LossMode::Mixed => {
            let eta = random_eta(&mut rng);
            let inner = random_eta(&mut rng);
            let second = haar_random_unitary_with(n, &mut rng)?;
            let m = multiply(
                &multiply(
                    &multiply(&ComplexMatrix::from_real_diagonal(&eta)?, &unitary)?,
                    &ComplexMatrix::from_real_diagonal(&inner)?,
                )?,
                &second,
            )?;
            (m, None)
        }
    };
    Ok(GeneratedNetwork {
        network: TransferMatrix::new(m)?,
        eta,
    })
}
