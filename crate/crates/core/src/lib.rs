//! Characterization of passive linear-optical networks.
//!
//! The crate models an `N`-mode network as a complex transfer matrix,
//! simulates the laser-and-photodiode measurement that determines it from
//! `2N − 1` configurations, reconstructs the matrix from the recorded
//! intensities and fringes, predicts two-photon interference from it, and
//! embeds lossy reconstructions into a larger unitary.

pub mod characterize;
pub mod embedding;
pub mod error;
pub mod fit;
pub mod generate;
pub mod lab;
pub mod linalg;
pub mod network;

pub use characterize::{characterize, characterize_batch, CharacterizationResult};
pub use embedding::{closest_unitary, embed, estimate_eta, LossEmbedding};
pub use error::{Error, ErrorKind, Result};
pub use fit::{fit_sinusoid, SinusoidFit};
pub use generate::{generate_network, LossMode};
pub use lab::{execute_plan, FringeTrace, MeasurementRecord, NoiseModel, SweepConfig};
pub use linalg::ComplexMatrix;
pub use network::{TransferMatrix, TwoPhotonObservables};
