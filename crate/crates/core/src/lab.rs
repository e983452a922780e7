//! A virtual bench for the characterization protocol: a laser split into a
//! dual-mode probe with a swept relative phase, photodiodes on every output,
//! and a configurable noise model.
//!
//! Mode 0 is the reference input. A plan for `N` modes has `N` single-input
//! configurations followed by `N − 1` phase sweeps pairing mode 0 with mode
//! `j = 1..N`.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::TransferMatrix;

pub const MIN_SWEEP_SAMPLES: usize = 64;
pub const DEFAULT_SWEEP_SAMPLES: usize = 512;
pub const DEFAULT_SWEEP_PERIODS: f64 = 2.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Relative standard deviation of multiplicative Gaussian intensity noise.
    #[serde(default)]
    pub intensity_sigma: f64,
    /// Standard deviation of additive per-sample phase noise, radians.
    #[serde(default)]
    pub phase_jitter_sigma: f64,
    /// Per-detector gain. Empty means unit gain everywhere.
    #[serde(default)]
    pub gain: Vec<f64>,
    /// Per-detector dark level. Empty means zero everywhere.
    #[serde(default)]
    pub offset: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            intensity_sigma: 0.0,
            phase_jitter_sigma: 0.0,
            gain: Vec::new(),
            offset: Vec::new(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.intensity_sigma >= 0.0 && self.intensity_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "intensity_sigma must be a finite value >= 0, got {}",
                self.intensity_sigma
            )));
        }
        if !(self.phase_jitter_sigma >= 0.0 && self.phase_jitter_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "phase_jitter_sigma must be a finite value >= 0, got {}",
                self.phase_jitter_sigma
            )));
        }
        for (name, values) in [("gain", &self.gain), ("offset", &self.offset)] {
            if !values.is_empty() && values.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} entries for {n} detectors",
                    values.len()
                )));
            }
        }
        if self.gain.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidParameter("detector gains must be > 0".into()));
        }
        if self.offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter(
                "detector offsets must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn gain(&self, detector: usize) -> f64 {
        self.gain.get(detector).copied().unwrap_or(1.0)
    }

    pub fn offset(&self, detector: usize) -> f64 {
        self.offset.get(detector).copied().unwrap_or(0.0)
    }

    /// Detector reading for an ideal intensity.
    fn read<R: Rng + ?Sized>(&self, detector: usize, ideal: f64, rng: &mut R) -> f64 {
        let noise = if self.intensity_sigma > 0.0 {
            let n = Normal::new(0.0, self.intensity_sigma).expect("validated sigma");
            n.sample(rng)
        } else {
            0.0
        };
        self.gain(detector) * ideal * (1.0 + noise) + self.offset(detector)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleInputRecord {
    pub input_mode: usize,
    /// Probe intensity `I`.
    pub intensity: f64,
    /// Reading of each output detector.
    pub outputs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub samples: usize,
    /// Swept range in units of 2π.
    pub periods: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SWEEP_SAMPLES,
            periods: DEFAULT_SWEEP_PERIODS,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SWEEP_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "sweep needs at least {MIN_SWEEP_SAMPLES} samples, got {}",
                self.samples
            )));
        }
        if !(self.periods >= 1.0) || !self.periods.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sweep must cover at least one full period, got {}",
                self.periods
            )));
        }
        Ok(())
    }

    /// Stage phase settings, evenly spaced from 0 to `periods·2π` inclusive.
    pub fn phases(&self) -> Vec<f64> {
        let span = self.periods * TAU;
        let last = (self.samples - 1) as f64;
        (0..self.samples).map(|s| span * s as f64 / last).collect()
    }
}

/// One dual-input sweep: reference mode 0 and mode `input_mode`, each arm
/// at intensity `intensity`, relative phase `phi` as set by the stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeTrace {
    pub input_mode: usize,
    pub intensity: f64,
    pub phi: Vec<f64>,
    /// `channels[k][s]`: reading of output `k` at sample `s`.
    pub channels: Vec<Vec<f64>>,
}

impl FringeTrace {
    pub fn new(
        input_mode: usize,
        intensity: f64,
        phi: Vec<f64>,
        channels: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let trace = Self {
            input_mode,
            intensity,
            phi,
            channels,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_mode == 0 {
            return Err(Error::InvalidParameter(
                "a phase sweep cannot pair the reference mode with itself".into(),
            ));
        }
        if !(self.intensity > 0.0) {
            return Err(Error::InvalidParameter(
                "probe intensity must be > 0".into(),
            ));
        }
        if self.phi.len() < MIN_SWEEP_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "trace has {} samples, need at least {MIN_SWEEP_SAMPLES}",
                self.phi.len()
            )));
        }
        if self.phi.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "trace phases must be strictly increasing".into(),
            ));
        }
        let span = self.phi[self.phi.len() - 1] - self.phi[0];
        if span < TAU * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "trace spans {span} rad, need at least 2π"
            )));
        }
        if self.channels.is_empty() || self.channels.iter().any(|c| c.len() != self.phi.len()) {
            return Err(Error::DimensionMismatch(
                "every channel needs one reading per phase sample".into(),
            ));
        }
        if self.channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite trace reading".into()));
        }
        Ok(())
    }

    pub fn modes(&self) -> usize {
        self.channels.len()
    }

    /// Writes `phi,ch1,...,chN`, one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["phi".to_string()];
        header.extend((1..=self.modes()).map(|k| format!("ch{k}")));
        w.write_record(&header)?;
        for (s, phi) in self.phi.iter().enumerate() {
            let mut row = vec![phi.to_string()];
            row.extend(self.channels.iter().map(|c| c[s].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the CSV layout produced by [`FringeTrace::write_csv`]; this is
    /// also the ingestion format for recorded oscilloscope data.
    pub fn read_csv<R: Read>(reader: R, input_mode: usize, intensity: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.get(0).map(str::trim) != Some("phi") {
            return Err(Error::InvalidParameter(
                "trace CSV must start with a `phi` column".into(),
            ));
        }
        for (idx, h) in headers.iter().enumerate().skip(1) {
            if h.trim() != format!("ch{idx}") {
                return Err(Error::InvalidParameter(format!(
                    "trace CSV column {} is `{h}`, expected `ch{idx}`",
                    idx + 1
                )));
            }
        }
        let modes = headers.len() - 1;
        let mut phi = Vec::new();
        let mut channels = vec![Vec::new(); modes];
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let parse = |field: Option<&str>| -> Result<f64> {
                field
                    .and_then(|f| f.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "unparsable value on CSV line {}",
                            line + 2
                        ))
                    })
            };
            phi.push(parse(record.get(0))?);
            for (k, ch) in channels.iter_mut().enumerate() {
                ch.push(parse(record.get(k + 1))?);
            }
        }
        Self::new(input_mode, intensity, phi, channels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "mode", rename_all = "snake_case")]
pub enum Configuration {
    SingleInput(usize),
    PhaseSweep(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub modes: usize,
    pub configurations: Vec<Configuration>,
}

impl MeasurementPlan {
    /// Single inputs `0..n` followed by sweeps `1..n`: `2n − 1` entries.
    pub fn new(modes: usize) -> Result<Self> {
        if modes < 2 {
            return Err(Error::InvalidParameter(format!(
                "a plan needs at least 2 modes, got {modes}"
            )));
        }
        let configurations = (0..modes)
            .map(Configuration::SingleInput)
            .chain((1..modes).map(Configuration::PhaseSweep))
            .collect();
        Ok(Self {
            modes,
            configurations,
        })
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub modes: usize,
    pub intensity: f64,
    pub sweep: SweepConfig,
    pub noise: NoiseModel,
    pub singles: Vec<SingleInputRecord>,
    pub traces: Vec<FringeTrace>,
    /// Detector readings with every input dark, when recorded.
    #[serde(default)]
    pub dark_levels: Option<Vec<f64>>,
}

impl MeasurementRecord {
    pub fn plan(&self) -> Result<MeasurementPlan> {
        MeasurementPlan::new(self.modes)
    }

    pub fn configuration_count(&self) -> usize {
        self.singles.len() + self.traces.len()
    }

    /// Checks the layout: `N` single-input records for modes `0..N` then
    /// `N − 1` sweeps for modes `1..N`, every reading sized `N`.
    pub fn validate(&self) -> Result<()> {
        let n = self.modes;
        let plan = self.plan()?;
        if self.configuration_count() != plan.len() {
            return Err(Error::InvalidParameter(format!(
                "record has {} configurations, a {n}-mode plan has {}",
                self.configuration_count(),
                plan.len()
            )));
        }
        if self.singles.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} single-input records, found {}",
                self.singles.len()
            )));
        }
        for (index, rec) in self.singles.iter().enumerate() {
            if rec.input_mode != index || rec.outputs.len() != n || !(rec.intensity > 0.0) {
                return Err(
                    Error::InvalidParameter("malformed single-input record".into())
                        .in_configuration(index),
                );
            }
        }
        for (offset, trace) in self.traces.iter().enumerate() {
            let index = n + offset;
            if trace.input_mode != offset + 1 {
                return Err(Error::InvalidParameter(format!(
                    "sweep pairs mode {}, expected {}",
                    trace.input_mode,
                    offset + 1
                ))
                .in_configuration(index));
            }
            if trace.modes() != n {
                return Err(Error::DimensionMismatch(format!(
                    "trace has {} channels for {n} modes",
                    trace.modes()
                ))
                .in_configuration(index));
            }
            trace.validate().map_err(|e| e.in_configuration(index))?;
        }
        if let Some(dark) = &self.dark_levels {
            if dark.len() != n {
                return Err(Error::DimensionMismatch("dark level count".into()));
            }
        }
        Ok(())
    }
}

fn check_input(
    net: &TransferMatrix,
    mode: usize,
    intensity: f64,
    noise: &NoiseModel,
) -> Result<()> {
    if mode >= net.n() {
        return Err(Error::ModeOutOfRange {
            index: mode,
            modes: net.n(),
        });
    }
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "probe intensity must be > 0, got {intensity}"
        )));
    }
    noise.validate(net.n())
}

/// Probes input `mode` alone at intensity `I`; the ideal reading of output
/// `k` is `I·|M_jk|²`. Randomness comes from `noise.seed`.
pub fn run_single_input(
    net: &TransferMatrix,
    mode: usize,
    intensity: f64,
    noise: &NoiseModel,
) -> Result<SingleInputRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    run_single_input_with(net, mode, intensity, noise, &mut rng)
}

fn run_single_input_with<R: Rng + ?Sized>(
    net: &TransferMatrix,
    mode: usize,
    intensity: f64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<SingleInputRecord> {
    check_input(net, mode, intensity, noise)?;
    let outputs = (0..net.n())
        .map(|k| noise.read(k, intensity * net.element(mode, k).norm_sqr(), rng))
        .collect();
    Ok(SingleInputRecord {
        input_mode: mode,
        intensity,
        outputs,
    })
}

/// Sweeps the relative phase between reference mode 0 and mode `mode`.
///
/// The stage zero is unknown: a global offset `φ₀` is drawn uniformly from
/// `[0, 2π)` per trace and is not recorded, so the true relative phase at
/// sample `s` is `φ_s + φ₀` plus jitter.
pub fn run_phase_sweep(
    net: &TransferMatrix,
    mode: usize,
    intensity: f64,
    sweep: &SweepConfig,
    noise: &NoiseModel,
) -> Result<FringeTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    run_phase_sweep_with(net, mode, intensity, sweep, noise, None, &mut rng)
}

/// [`run_phase_sweep`] with a caller-chosen stage offset `φ₀`.
pub fn run_phase_sweep_with_offset(
    net: &TransferMatrix,
    mode: usize,
    intensity: f64,
    sweep: &SweepConfig,
    noise: &NoiseModel,
    phase_offset: f64,
) -> Result<FringeTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    run_phase_sweep_with(
        net,
        mode,
        intensity,
        sweep,
        noise,
        Some(phase_offset),
        &mut rng,
    )
}

fn run_phase_sweep_with<R: Rng + ?Sized>(
    net: &TransferMatrix,
    mode: usize,
    intensity: f64,
    sweep: &SweepConfig,
    noise: &NoiseModel,
    phase_offset: Option<f64>,
    rng: &mut R,
) -> Result<FringeTrace> {
    if mode == 0 {
        return Err(Error::InvalidParameter(
            "a phase sweep cannot pair the reference mode with itself".into(),
        ));
    }
    check_input(net, mode, intensity, noise)?;
    sweep.validate()?;

    let offset = phase_offset.unwrap_or_else(|| rng.random_range(0.0..TAU));
    let jitter = (noise.phase_jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.phase_jitter_sigma).expect("validated sigma"));
    let phi = sweep.phases();
    let n = net.n();
    let mut channels = vec![Vec::with_capacity(phi.len()); n];
    for &stage in &phi {
        let actual = stage + offset + jitter.map_or(0.0, |d| d.sample(rng));
        let arm = Complex64::from_polar(1.0, actual);
        for (k, channel) in channels.iter_mut().enumerate() {
            let field = net.element(0, k) + net.element(mode, k) * arm;
            channel.push(noise.read(k, intensity * field.norm_sqr(), rng));
        }
    }
    Ok(FringeTrace {
        input_mode: mode,
        intensity,
        phi,
        channels,
    })
}

/// Mixes a record seed with a configuration index into an independent stream seed.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the full `2N − 1` configuration plan plus a dark reading.
///
/// Configurations execute in parallel; each draws from its own stream seeded
/// by `(noise.seed, configuration index)`, so the record does not depend on
/// scheduling.
pub fn execute_plan(
    net: &TransferMatrix,
    intensity: f64,
    sweep: &SweepConfig,
    noise: &NoiseModel,
) -> Result<MeasurementRecord> {
    let plan = MeasurementPlan::new(net.n())?;
    noise.validate(net.n())?;
    sweep.validate()?;

    enum Outcome {
        Single(SingleInputRecord),
        Sweep(FringeTrace),
    }

    let outcomes = plan
        .configurations
        .par_iter()
        .enumerate()
        .map(|(index, config)| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(noise.seed, index as u64));
            let outcome = match *config {
                Configuration::SingleInput(mode) => {
                    run_single_input_with(net, mode, intensity, noise, &mut rng)
                        .map(Outcome::Single)
                }
                Configuration::PhaseSweep(mode) => {
                    run_phase_sweep_with(net, mode, intensity, sweep, noise, None, &mut rng)
                        .map(Outcome::Sweep)
                }
            };
            outcome.map_err(|e| e.in_configuration(index))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut singles = Vec::with_capacity(net.n());
    let mut traces = Vec::with_capacity(net.n() - 1);
    for outcome in outcomes {
        match outcome {
            Outcome::Single(rec) => singles.push(rec),
            Outcome::Sweep(trace) => traces.push(trace),
        }
    }

    let mut dark_rng = ChaCha8Rng::seed_from_u64(sub_seed(noise.seed, plan.len() as u64));
    let dark_levels = (0..net.n())
        .map(|k| noise.read(k, 0.0, &mut dark_rng))
        .collect();

    Ok(MeasurementRecord {
        modes: net.n(),
        intensity,
        sweep: *sweep,
        noise: noise.clone(),
        singles,
        traces,
        dark_levels: Some(dark_levels),
    })
}
