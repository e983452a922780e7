//! Reconstruction of the transfer matrix from a measurement record.
//!
//! Moduli come from the single-input records, `r_jk = √(I_k / I)`. Phases
//! come from the dual-input fringes: every channel of the sweep pairing
//! inputs 0 and `j` is fitted with `a + b·cos(φ + c)`, the reference channel
//! 0 fixes the stage zero, and `θ_jk = (c_k − c_0) mod 2π`. This equals
//! `2π − φ_peak` with `φ_peak` the calibrated phase of channel `k`'s maximum.
//! The result is in the gauge where row 0 and column 0 are real.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_sinusoid, SinusoidFit};
use crate::lab::{FringeTrace, MeasurementRecord, SingleInputRecord};
use crate::linalg::{wrap_phase, wrap_signed, ComplexMatrix};
use crate::network::TransferMatrix;

/// Negative dark-subtracted readings down to `-NEGATIVE_READING_TOLERANCE·I`
/// are clamped to zero; anything lower is rejected.
pub const NEGATIVE_READING_TOLERANCE: f64 = 1e-3;

/// Phase uncertainty reported for indeterminate elements.
pub const INDETERMINATE_PHASE_SIGMA: f64 = PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    /// `θ_jk` in `[0, 2π)`; 0 when indeterminate.
    pub value: f64,
    pub sigma: f64,
    pub indeterminate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub input_mode: usize,
    /// Fitted phase of the reference channel, i.e. the stage offset `φ₀`.
    /// `None` when no channel of the trace shows a fringe.
    pub reference_phase: Option<f64>,
    pub fits: Vec<SinusoidFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationResult {
    #[serde(flatten)]
    pub matrix: TransferMatrix,
    pub modulus_sigma: Vec<Vec<f64>>,
    pub phase_sigma: Vec<Vec<f64>>,
    pub indeterminate: Vec<Vec<bool>>,
    /// Number of records combined; error bars are standard errors of the
    /// mean when this exceeds one.
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub traces: Vec<TraceDiagnostics>,
}

fn one() -> usize {
    1
}

/// `r_k = √(I_k / I)` after subtracting per-detector dark levels.
pub fn moduli_from_record(rec: &SingleInputRecord, dark: Option<&[f64]>) -> Result<Vec<f64>> {
    if !(rec.intensity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "probe intensity must be > 0, got {}",
            rec.intensity
        )));
    }
    if let Some(d) = dark {
        if d.len() != rec.outputs.len() {
            return Err(Error::DimensionMismatch("dark level count".into()));
        }
    }
    rec.outputs
        .iter()
        .enumerate()
        .map(|(k, &reading)| {
            let signal = reading - dark.map_or(0.0, |d| d[k]);
            if signal < 0.0 {
                if signal < -NEGATIVE_READING_TOLERANCE * rec.intensity {
                    return Err(Error::Nonphysical(format!(
                        "input {} output {k}: dark-subtracted reading {signal} is negative",
                        rec.input_mode
                    )));
                }
                log::warn!(
                    "input {} output {k}: clamping reading {signal} to 0",
                    rec.input_mode
                );
                return Ok(0.0);
            }
            Ok((signal / rec.intensity).sqrt())
        })
        .collect()
}

/// Fits every channel of a trace.
pub fn fit_trace(trace: &FringeTrace) -> Result<Vec<SinusoidFit>> {
    trace.validate()?;
    trace
        .channels
        .par_iter()
        .map(|ch| fit_sinusoid(&trace.phi, ch))
        .collect()
}

/// Stage offset `φ₀`: the fitted phase of reference channel 0, whose
/// maximum marks zero relative phase between the two inputs.
pub fn calibrate_phase_reference(trace: &FringeTrace, fits: &[SinusoidFit]) -> Result<f64> {
    let reference = fits
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no channel fits".into()))?;
    if reference.low_amplitude {
        return Err(Error::FlatReference {
            input_mode: trace.input_mode,
            amplitude: reference.amplitude,
        });
    }
    Ok(reference.phase)
}

/// `θ = 2π − φ_peak`, wrapped onto `[0, 2π)`.
pub fn phase_from_peak(peak: f64) -> f64 {
    wrap_phase(TAU - peak)
}

/// Channel phases relative to the reference channel. Channel 0 is 0 by
/// construction; low-amplitude channels are flagged indeterminate.
pub fn phases_from_trace(trace: &FringeTrace, reference_phase: f64) -> Result<Vec<PhaseEstimate>> {
    let fits = fit_trace(trace)?;
    Ok(phases_from_fits(&fits, reference_phase))
}

fn phases_from_fits(fits: &[SinusoidFit], reference_phase: f64) -> Vec<PhaseEstimate> {
    let reference_sigma = fits.first().map_or(0.0, |f| f.phase_sigma);
    fits.iter()
        .enumerate()
        .map(|(k, fit)| {
            if k == 0 {
                PhaseEstimate {
                    value: 0.0,
                    sigma: 0.0,
                    indeterminate: false,
                }
            } else if fit.low_amplitude {
                indeterminate()
            } else {
                PhaseEstimate {
                    value: wrap_phase(fit.phase - reference_phase),
                    sigma: fit.phase_sigma.hypot(reference_sigma),
                    indeterminate: false,
                }
            }
        })
        .collect()
}

fn indeterminate() -> PhaseEstimate {
    PhaseEstimate {
        value: 0.0,
        sigma: INDETERMINATE_PHASE_SIGMA,
        indeterminate: true,
    }
}

/// Reconstructs the canonical-gauge matrix from a full record.
///
/// Modulus error bars assume the record's multiplicative noise level,
/// `σ_r = r·σ_I / 2`; phase error bars come from the fit covariances.
pub fn characterize(record: &MeasurementRecord) -> Result<CharacterizationResult> {
    record.validate()?;
    let n = record.modes;
    let dark = record.dark_levels.as_deref();

    let moduli = record
        .singles
        .iter()
        .enumerate()
        .map(|(index, rec)| moduli_from_record(rec, dark).map_err(|e| e.in_configuration(index)))
        .collect::<Result<Vec<_>>>()?;

    let traces = record
        .traces
        .par_iter()
        .enumerate()
        .map(|(offset, trace)| analyse_trace(trace).map_err(|e| e.in_configuration(n + offset)))
        .collect::<Result<Vec<_>>>()?;

    let mut phases = vec![vec![(0.0, 0.0, false); n]; n];
    for (diag, estimates) in &traces {
        for (k, est) in estimates.iter().enumerate() {
            phases[diag.input_mode][k] = (est.value, est.sigma, est.indeterminate);
        }
    }

    let sigma_rel = record.noise.intensity_sigma;
    let rows: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| Complex64::from_polar(moduli[j][k], phases[j][k].0))
                .collect()
        })
        .collect();
    let matrix = TransferMatrix::estimated(ComplexMatrix::from_rows(&rows)?)?;

    Ok(CharacterizationResult {
        matrix,
        modulus_sigma: moduli
            .iter()
            .map(|row| row.iter().map(|r| 0.5 * r * sigma_rel).collect())
            .collect(),
        phase_sigma: phases
            .iter()
            .map(|row| row.iter().map(|p| p.1).collect())
            .collect(),
        indeterminate: phases
            .iter()
            .map(|row| row.iter().map(|p| p.2).collect())
            .collect(),
        runs: 1,
        traces: traces.into_iter().map(|(diag, _)| diag).collect(),
    })
}

fn analyse_trace(trace: &FringeTrace) -> Result<(TraceDiagnostics, Vec<PhaseEstimate>)> {
    let fits = fit_trace(trace)?;
    let (reference_phase, estimates) = if fits.iter().all(|f| f.low_amplitude) {
        // Nothing interferes in this sweep, so there is nothing to calibrate
        // against either; every phase in the row is unobservable.
        let mut est = vec![indeterminate(); fits.len()];
        est[0] = PhaseEstimate {
            value: 0.0,
            sigma: 0.0,
            indeterminate: false,
        };
        (None, est)
    } else {
        let phi0 = calibrate_phase_reference(trace, &fits)?;
        (Some(phi0), phases_from_fits(&fits, phi0))
    };
    Ok((
        TraceDiagnostics {
            input_mode: trace.input_mode,
            reference_phase,
            fits,
        },
        estimates,
    ))
}

/// Combines repeated characterizations of the same device.
///
/// Moduli are averaged; phases are averaged on the circle. Error bars are
/// standard errors of the mean across runs. Elements indeterminate in any
/// run stay indeterminate.
pub fn characterize_batch(records: &[MeasurementRecord]) -> Result<CharacterizationResult> {
    let results = records
        .par_iter()
        .map(characterize)
        .collect::<Result<Vec<_>>>()?;
    combine_runs(&results)
}

pub fn combine_runs(results: &[CharacterizationResult]) -> Result<CharacterizationResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidParameter("no characterization runs to combine".into()))?;
    let n = first.matrix.n();
    if results.iter().any(|r| r.matrix.n() != n) {
        return Err(Error::DimensionMismatch(
            "runs disagree on mode count".into(),
        ));
    }
    let runs = results.len();
    let count = runs as f64;
    let sem = |values: &[f64], mean: f64| {
        if runs < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        }
    };

    let mut rows = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut modulus_sigma = vec![vec![0.0; n]; n];
    let mut phase_sigma = vec![vec![0.0; n]; n];
    let mut indeterminate = vec![vec![false; n]; n];
    for j in 0..n {
        for k in 0..n {
            let moduli: Vec<f64> = results
                .iter()
                .map(|r| r.matrix.element(j, k).norm())
                .collect();
            let modulus = moduli.iter().sum::<f64>() / count;
            modulus_sigma[j][k] = sem(&moduli, modulus);

            let flagged = results.iter().any(|r| r.indeterminate[j][k]);
            indeterminate[j][k] = flagged;
            let phase = if j == 0 || k == 0 {
                0.0
            } else if flagged {
                phase_sigma[j][k] = INDETERMINATE_PHASE_SIGMA;
                0.0
            } else {
                // Unwrap around the circular mean, then average the offsets.
                let resultant: Complex64 = results
                    .iter()
                    .map(|r| Complex64::from_polar(1.0, r.matrix.element(j, k).arg()))
                    .sum();
                let centre = resultant.arg();
                let offsets: Vec<f64> = results
                    .iter()
                    .map(|r| wrap_signed(r.matrix.element(j, k).arg() - centre))
                    .collect();
                let mean_offset = offsets.iter().sum::<f64>() / count;
                phase_sigma[j][k] = sem(&offsets, mean_offset);
                wrap_phase(centre + mean_offset)
            };
            rows[j][k] = Complex64::from_polar(modulus, phase);
        }
    }

    Ok(CharacterizationResult {
        matrix: TransferMatrix::estimated(ComplexMatrix::from_rows(&rows)?)?,
        modulus_sigma,
        phase_sigma,
        indeterminate,
        runs,
        traces: first.traces.clone(),
    })
}

/// Writes fitted-fringe plot data for one trace as `channel,phi,measured,fitted`
/// with 1-based channel numbers.
pub fn write_fit_csv<W: Write>(trace: &FringeTrace, fits: &[SinusoidFit], writer: W) -> Result<()> {
    if fits.len() != trace.modes() {
        return Err(Error::DimensionMismatch(
            "one fit per channel required".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["channel", "phi", "measured", "fitted"])?;
    for (k, (channel, fit)) in trace.channels.iter().zip(fits).enumerate() {
        for (&phi, &measured) in trace.phi.iter().zip(channel) {
            w.write_record(&[
                (k + 1).to_string(),
                phi.to_string(),
                measured.to_string(),
                fit.evaluate(phi).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
