use std::fs;
use std::path::{Path, PathBuf};

use netchar_core::characterize::{fit_trace, write_fit_csv};
use netchar_core::linalg::deviation_from_unitarity;
use netchar_core::network::{output_pairs, visibility};
use netchar_core::{
    characterize_batch, closest_unitary, embed as embed_matrix, estimate_eta, execute_plan,
    generate_network, CharacterizationResult, FringeTrace, LossMode, MeasurementRecord, NoiseModel,
    SweepConfig, TransferMatrix,
};
use serde::Serialize;

use crate::output::{
    exit, manifest_path_for, read_json, write_atomic, write_json, CliError, CliResult,
    NoiseParameters, RunManifest,
};
use crate::{CharacterizeArgs, EmbedArgs, GenerateArgs, LossArg, SimulateArgs, VerifyArgs};

#[derive(Serialize)]
struct NetworkFile<'a> {
    #[serde(flatten)]
    network: &'a TransferMatrix,
    loss: LossMode,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<&'a [f64]>,
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    CliError::from(netchar_core::Error::from(err)).context(path.display())
}

pub fn generate(args: &GenerateArgs) -> CliResult<i32> {
    let mode = match args.loss {
        LossArg::Lossless => LossMode::Lossless,
        LossArg::Uniform => LossMode::Uniform { eta: args.eta },
        LossArg::PerInput => LossMode::PerInput,
        LossArg::PathDependent => LossMode::PathDependent,
        LossArg::Mixed => LossMode::Mixed,
    };
    let generated = generate_network(args.n, mode, args.seed)?;
    write_json(
        &args.out,
        &NetworkFile {
            network: &generated.network,
            loss: mode,
            seed: args.seed,
            eta: generated.eta.as_deref(),
        },
    )?;
    let mut manifest = RunManifest::new("generate");
    manifest.outputs.push(args.out.clone());
    manifest.seed = Some(args.seed);
    write_json(&manifest_path_for(&args.out), &manifest)?;
    println!(
        "{}: {} modes, deviation from unitarity {:.3e}",
        args.out.display(),
        args.n,
        deviation_from_unitarity(generated.network.matrix())?
    );
    Ok(exit::SUCCESS)
}

fn write_record(dir: &Path, record: &MeasurementRecord) -> CliResult<Vec<PathBuf>> {
    let record_path = dir.join("record.json");
    write_json(&record_path, record)?;
    let mut written = vec![record_path];
    for trace in &record.traces {
        let path = dir
            .join("traces")
            .join(format!("trace_input_{}.csv", trace.input_mode + 1));
        write_atomic(&path, |w| trace.write_csv(w).map_err(CliError::from))?;
        written.push(path);
    }
    Ok(written)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<i32> {
    if args.repeat == 0 {
        return Err(CliError::validation("--repeat must be at least 1"));
    }
    let network: TransferMatrix = read_json(&args.network)?;
    network.check_physical()?;
    let sweep = SweepConfig {
        samples: args.samples,
        periods: args.sweep_periods,
    };
    let noise = NoiseModel {
        intensity_sigma: args.noise_intensity,
        phase_jitter_sigma: args.noise_phase,
        ..NoiseModel::noiseless()
    };

    let mut manifest = RunManifest::new("simulate");
    manifest.inputs.push(args.network.clone());
    manifest.seed = Some(args.seed);
    manifest.noise = Some(NoiseParameters::from(&noise));
    manifest.sweep = Some(sweep);

    for run in 0..args.repeat {
        let seed = args.seed.wrapping_add(run as u64);
        let record = execute_plan(
            &network,
            args.intensity,
            &sweep,
            &noise.clone().with_seed(seed),
        )?;
        let dir = if args.repeat == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("run_{:03}", run + 1))
        };
        let written = write_record(&dir, &record)?;
        println!(
            "{}: {} configurations, seed {seed}",
            written[0].display(),
            record.configuration_count()
        );
        manifest.outputs.extend(written);
    }
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(exit::SUCCESS)
}

fn parse_trace_override(arg: &str) -> CliResult<(usize, PathBuf)> {
    let (mode, path) = arg
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("--trace expects J=PATH, got {arg:?}")))?;
    let mode: usize = mode
        .trim()
        .parse()
        .map_err(|_| CliError::validation(format!("--trace mode {mode:?} is not a number")))?;
    if mode < 2 {
        return Err(CliError::validation(format!(
            "--trace mode must be 2 or more (mode 1 is the reference), got {mode}"
        )));
    }
    Ok((mode - 1, PathBuf::from(path)))
}

fn apply_trace_override(record: &mut MeasurementRecord, mode: usize, path: &Path) -> CliResult<()> {
    let slot = record
        .traces
        .iter_mut()
        .find(|t| t.input_mode == mode)
        .ok_or_else(|| {
            CliError::validation(format!("record has no sweep for input {}", mode + 1))
        })?;
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let trace = FringeTrace::read_csv(file, mode, slot.intensity)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    if trace.modes() != record.modes {
        return Err(CliError::validation(format!(
            "{}: {} channels, record has {} modes",
            path.display(),
            trace.modes(),
            record.modes
        )));
    }
    *slot = trace;
    Ok(())
}

fn print_sigma_report(result: &CharacterizationResult) {
    println!(
        "{:>3} {:>3} {:>10} {:>10} {:>9} {:>9}",
        "in", "out", "|M|", "sigma", "arg", "sigma"
    );
    let n = result.matrix.n();
    for j in 0..n {
        for k in 0..n {
            let m = result.matrix.element(j, k);
            let phase = if result.indeterminate[j][k] {
                format!("{:>9}", "n/a")
            } else {
                format!("{:>9.4}", netchar_core::linalg::wrap_phase(m.arg()))
            };
            println!(
                "{:>3} {:>3} {:>10.6} {:>10.2e} {phase} {:>9.2e}",
                j + 1,
                k + 1,
                m.norm(),
                result.modulus_sigma[j][k],
                result.phase_sigma[j][k]
            );
        }
    }
}

pub fn characterize(args: &CharacterizeArgs) -> CliResult<i32> {
    let mut records = Vec::with_capacity(args.records.len());
    for path in &args.records {
        let record: MeasurementRecord = read_json(path)?;
        record
            .validate()
            .map_err(|e| CliError::from(e).context(path.display()))?;
        records.push(record);
    }
    if !args.traces.is_empty() {
        if records.len() != 1 {
            return Err(CliError::validation(
                "--trace can only be used with a single record",
            ));
        }
        for arg in &args.traces {
            let (mode, path) = parse_trace_override(arg)?;
            apply_trace_override(&mut records[0], mode, &path)?;
        }
    }

    let result = characterize_batch(&records)?;
    write_json(&args.out, &result)?;

    let mut manifest = RunManifest::new("characterize");
    manifest.inputs.extend(args.records.iter().cloned());
    manifest.outputs.push(args.out.clone());
    manifest.seed = Some(records[0].noise.seed);
    manifest.noise = Some(NoiseParameters::from(&records[0].noise));
    manifest.sweep = Some(records[0].sweep);

    if let Some(dir) = &args.plot_dir {
        for trace in &records[0].traces {
            let fits = fit_trace(trace)?;
            let path = dir.join(format!("fit_input_{}.csv", trace.input_mode + 1));
            write_atomic(&path, |w| {
                write_fit_csv(trace, &fits, w).map_err(CliError::from)
            })?;
            manifest.outputs.push(path);
        }
    }
    write_json(&manifest_path_for(&args.out), &manifest)?;

    println!(
        "{}: {} modes from {} run(s)",
        args.out.display(),
        result.matrix.n(),
        result.runs
    );
    print_sigma_report(&result);
    Ok(exit::SUCCESS)
}

fn parse_pair(arg: &str, n: usize) -> CliResult<(usize, usize)> {
    let bad = || {
        CliError::validation(format!(
            "--pairs expects distinct I,J in 1..={n}, got {arg:?}"
        ))
    };
    let (i, j) = arg.split_once(',').ok_or_else(bad)?;
    let i: usize = i.trim().parse().map_err(|_| bad())?;
    let j: usize = j.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 || i > n || j > n || i == j {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

struct VerifyRow {
    inputs: (usize, usize),
    outputs: (usize, usize),
    a: Option<f64>,
    b: Option<f64>,
}

impl VerifyRow {
    fn delta(&self) -> Option<f64> {
        Some((self.a? - self.b?).abs())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

pub fn verify(args: &VerifyArgs) -> CliResult<i32> {
    let a: TransferMatrix = read_json(&args.a)?;
    let b: TransferMatrix = read_json(&args.b)?;
    let n = a.n();
    if b.n() != n {
        return Err(CliError::validation(format!(
            "{} has {n} modes, {} has {}",
            args.a.display(),
            args.b.display(),
            b.n()
        )));
    }
    let pairs = if args.pairs.is_empty() {
        let defaults: Vec<(usize, usize)> = [(0, 2), (0, 5)]
            .into_iter()
            .filter(|&(_, j)| j < n)
            .collect();
        if defaults.is_empty() {
            vec![(0, 1)]
        } else {
            defaults
        }
    } else {
        args.pairs
            .iter()
            .map(|p| parse_pair(p, n))
            .collect::<CliResult<Vec<_>>>()?
    };

    let mut rows = Vec::new();
    for &(i, j) in &pairs {
        for (k, l) in output_pairs(n) {
            rows.push(VerifyRow {
                inputs: (i, j),
                outputs: (k, l),
                a: visibility(&a, i, j, k, l)?.visibility,
                b: visibility(&b, i, j, k, l)?.visibility,
            });
        }
    }

    println!(
        "{:>7} {:>7} {:>10} {:>10} {:>10}",
        "inputs", "outputs", "V(A)", "V(B)", "|dV|"
    );
    for r in &rows {
        println!(
            "{:>7} {:>7} {:>10} {:>10} {:>10}",
            format!("{},{}", r.inputs.0 + 1, r.inputs.1 + 1),
            format!("{},{}", r.outputs.0 + 1, r.outputs.1 + 1),
            fmt_opt(r.a),
            fmt_opt(r.b),
            r.delta()
                .map_or_else(|| "n/a".to_string(), |d| format!("{d:.3e}"))
        );
    }
    let max_delta = rows.iter().filter_map(VerifyRow::delta).fold(0.0, f64::max);
    println!("max |dV| = {max_delta:.3e} over {} pairs", rows.len());

    if let Some(path) = &args.out {
        write_atomic(path, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record([
                "input_i",
                "input_j",
                "output_k",
                "output_l",
                "visibility_a",
                "visibility_b",
                "abs_delta",
            ])
            .map_err(|e| csv_error(path, e))?;
            for r in &rows {
                let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
                wtr.write_record([
                    (r.inputs.0 + 1).to_string(),
                    (r.inputs.1 + 1).to_string(),
                    (r.outputs.0 + 1).to_string(),
                    (r.outputs.1 + 1).to_string(),
                    opt(r.a),
                    opt(r.b),
                    opt(r.delta()),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
            wtr.flush().map_err(|e| CliError::io(path, e))
        })?;
        let mut manifest = RunManifest::new("verify");
        manifest.inputs = vec![args.a.clone(), args.b.clone()];
        manifest.outputs.push(path.clone());
        write_json(&manifest_path_for(path), &manifest)?;
    }

    match args.tolerance {
        Some(tol) if !(max_delta <= tol) => {
            eprintln!("netchar: max |dV| {max_delta:.3e} exceeds tolerance {tol:.3e}");
            Ok(exit::TOLERANCE_EXCEEDED)
        }
        _ => Ok(exit::SUCCESS),
    }
}

pub fn embed(args: &EmbedArgs) -> CliResult<i32> {
    let m: TransferMatrix = read_json(&args.matrix)?;
    let record: MeasurementRecord = read_json(&args.record)?;
    record
        .validate()
        .map_err(|e| CliError::from(e).context(args.record.display()))?;
    if record.modes != m.n() {
        return Err(CliError::validation(format!(
            "matrix has {} modes, record has {}",
            m.n(),
            record.modes
        )));
    }
    let eta = estimate_eta(&record.singles, record.dark_levels.as_deref())?;
    let mut embedding = embed_matrix(&m, &eta)?;
    let dev_u = deviation_from_unitarity(closest_unitary(&mut embedding)?)?;
    write_json(&args.out, &embedding)?;

    let mut manifest = RunManifest::new("embed");
    manifest.inputs = vec![args.matrix.clone(), args.record.clone()];
    manifest.outputs.push(args.out.clone());
    manifest.seed = Some(record.noise.seed);
    manifest.noise = Some(NoiseParameters::from(&record.noise));
    manifest.sweep = Some(record.sweep);

    if let Some(path) = &args.report {
        write_atomic(path, |w| {
            for row in &embedding.gram_deviation {
                let line: Vec<String> = row.iter().map(|x| format!("{x:.6e}")).collect();
                writeln!(w, "{}", line.join(",")).map_err(|e| CliError::io(path, e))?;
            }
            Ok(())
        })?;
        manifest.outputs.push(path.clone());
    }
    write_json(&manifest_path_for(&args.out), &manifest)?;

    let eta_text: Vec<String> = eta.iter().map(|e| format!("{e:.6}")).collect();
    println!("eta = [{}]", eta_text.join(", "));
    println!("trace-norm deviation from unitarity:");
    println!("  M  {:.3e}", embedding.unitarity_deviation_m);
    println!("  V  {:.3e}", embedding.unitarity_deviation_v);
    println!("  U  {dev_u:.3e}");
    println!(
        "max off-diagonal |V V† - I| = {:.3e}",
        embedding.max_off_diagonal_gram()
    );
    Ok(exit::SUCCESS)
}
