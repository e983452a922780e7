//! Linear least-squares fit of `a + b·cos(φ + c)` to a fringe.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::wrap_phase;

/// Fits whose amplitude is below this multiple of the rms residual are flagged.
pub const LOW_AMPLITUDE_RATIO: f64 = 5.0;
/// Absolute floor for the low-amplitude flag, relative to the largest reading.
const AMPLITUDE_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub mean: f64,
    pub amplitude: f64,
    /// `c` in `[0, 2π)`; reported as 0 when `low_amplitude` is set.
    pub phase: f64,
    pub rms_residual: f64,
    pub mean_sigma: f64,
    pub amplitude_sigma: f64,
    pub phase_sigma: f64,
    /// Covariance of the linear coefficients `(a, p, q)` of `a + p cos φ + q sin φ`.
    pub covariance: [[f64; 3]; 3],
    pub low_amplitude: bool,
}

impl SinusoidFit {
    pub fn evaluate(&self, phi: f64) -> f64 {
        self.mean + self.amplitude * (phi + self.phase).cos()
    }

    /// Stage phase at which the fitted fringe peaks, in `[0, 2π)`.
    pub fn peak_phase(&self) -> f64 {
        wrap_phase(-self.phase)
    }
}

pub fn fit_sinusoid(phi: &[f64], y: &[f64]) -> Result<SinusoidFit> {
    if phi.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} phases but {} readings",
            phi.len(),
            y.len()
        )));
    }
    let samples = phi.len();
    if samples < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 samples, got {samples}"
        )));
    }

    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (&p, &v) in phi.iter().zip(y) {
        let row = Vector3::new(1.0, p.cos(), p.sin());
        normal += row * row.transpose();
        rhs += row * v;
    }

    let eig = normal.symmetric_eigen();
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    if !(smallest > 1e-10 * largest) {
        return Err(Error::DegenerateFit(
            "phase samples do not resolve a sinusoid (all at nearly the same phase)".into(),
        ));
    }
    let inverse = normal
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFit("singular normal matrix".into()))?;
    let coeffs = inverse * rhs;
    let (a, p, q) = (coeffs[0], coeffs[1], coeffs[2]);

    let rss: f64 = phi
        .iter()
        .zip(y)
        .map(|(&x, &v)| {
            let r = v - (a + p * x.cos() + q * x.sin());
            r * r
        })
        .sum();
    let rms_residual = (rss / samples as f64).sqrt();
    let dof = samples.saturating_sub(3).max(1) as f64;
    let cov = inverse * (rss / dof);

    let amplitude = p.hypot(q);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let low_amplitude =
        amplitude <= LOW_AMPLITUDE_RATIO * rms_residual || amplitude <= AMPLITUDE_FLOOR * scale;

    let (phase, phase_sigma, amplitude_sigma) = if amplitude > 0.0 {
        // b = hypot(p, q), c = atan2(-q, p); linearize both around the fit.
        let b2 = amplitude * amplitude;
        let grad_c = [q / b2, -p / b2];
        let grad_b = [p / amplitude, q / amplitude];
        let quad = |g: [f64; 2]| {
            g[0] * g[0] * cov[(1, 1)] + g[1] * g[1] * cov[(2, 2)] + 2.0 * g[0] * g[1] * cov[(1, 2)]
        };
        (
            wrap_phase((-q).atan2(p)),
            quad(grad_c).max(0.0).sqrt(),
            quad(grad_b).max(0.0).sqrt(),
        )
    } else {
        (0.0, f64::INFINITY, cov[(1, 1)].max(0.0).sqrt())
    };

    let mut covariance = [[0.0; 3]; 3];
    for (r, row) in covariance.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cov[(r, c)];
        }
    }

    Ok(SinusoidFit {
        mean: a,
        amplitude,
        phase: if low_amplitude { 0.0 } else { phase },
        rms_residual,
        mean_sigma: cov[(0, 0)].max(0.0).sqrt(),
        amplitude_sigma,
        phase_sigma,
        covariance,
        low_amplitude,
    })
}
