use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use emscat::effective::{effective_generator, evolve_segments, GroundDensity, Integrator, Segment};
use emscat::linalg::{min_eigenvalue, trace};
use emscat::oracle::single_excitation::single_excitation_scattering;
use emscat::scattering::{power_defect, scattering_operator, Detector, Drive, InputField, PreparedSystem};
use emscat::{Error as CoreError, ExecutionMode, GreenMediumSpec};

use crate::config::{ground_density, IntegratorChoice, RunConfig, SchemaError, SpectrumConfig, Task};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration ({} issue(s))", .0.len())]
    Config(Vec<SchemaError>),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Internal(String),
}

impl RunError {
    /// 1 for problems the user can fix in the input, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Core(CoreError::NotPositiveSemidefinite { .. }) => 2,
            RunError::Core(_) => 1,
            RunError::Io { .. } | RunError::Internal(_) => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            RunError::Config(_) => "config",
            RunError::Core(_) => "core",
            RunError::Io { .. } => "io",
            RunError::Internal(_) => "internal",
        };
        let issues = match self {
            RunError::Config(v) => v.clone(),
            _ => Vec::new(),
        };
        json!({ "error": kind, "message": self.to_string(), "issues": issues })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `Some(1)` runs sequentially.
    pub threads: Option<usize>,
    /// Overrides `output.directory`.
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub metadata: PathBuf,
}

/// Hash of the canonical (compact) JSON form of the configuration.
pub fn config_digest(config: &RunConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let issues = crate::config::validate(config);
    if !issues.is_empty() {
        return Err(RunError::Config(issues));
    }
    let dir = opts
        .output_dir
        .clone()
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let stem = format!("{}_{}", config.output.prefix, config.task.name());
    let summary = RunSummary { csv: dir.join(format!("{stem}.csv")), metadata: dir.join(format!("{stem}.json")) };
    let mode = if opts.threads == Some(1) { ExecutionMode::Sequential } else { ExecutionMode::Parallel };

    let body = || -> Result<(Vec<u8>, serde_json::Value), RunError> {
        match config.task {
            Task::Spectrum => spectrum(config, mode),
            Task::Evolve => evolve(config),
            Task::MintGolden => mint_golden(config, mode),
        }
    };
    let (csv, meta) = match opts.threads {
        Some(n) if n > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunError::Internal(e.to_string()))?
            .install(body)?,
        _ => body()?,
    };

    let mut meta = meta;
    meta["version"] = json!(env!("CARGO_PKG_VERSION"));
    meta["task"] = json!(config.task.name());
    meta["spec_sha256"] = json!(config_digest(config));
    meta["conventions"] = json!({
        "hbar": 1,
        "rates_and_energies": "Gamma0",
        "time": "1/Gamma0",
        "positions": "wavelengths at the carrier",
        "field_amplitudes": "sqrt(Gamma0)",
        "omega": "drive detuning from the carrier",
    });
    fs::write(&summary.csv, csv).map_err(io_err(&summary.csv))?;
    let text = serde_json::to_string_pretty(&meta).map_err(|e| RunError::Internal(e.to_string()))? + "\n";
    fs::write(&summary.metadata, text).map_err(io_err(&summary.metadata))?;
    info!("wrote {} and {}", summary.csv.display(), summary.metadata.display());
    Ok(summary)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, RunError> {
    w.into_inner().map_err(|e| RunError::Internal(e.to_string()))
}

fn csv_err(e: csv::Error) -> RunError {
    RunError::Internal(e.to_string())
}

fn component_names(d: &Detector) -> Vec<String> {
    match d {
        Detector::Channel { label } => vec![label.clone()],
        Detector::Position { name, .. } => ["x", "y", "z"].iter().map(|a| format!("{name}.{a}")).collect(),
    }
}

/// Power balance is only checked when every medium member is a waveguide,
/// the drive is guided and every guided channel is detected.
fn checks_unitarity(config: &RunConfig, s: &SpectrumConfig) -> bool {
    let members = config.system.medium.members();
    if !matches!(s.drive, Drive::Channels { .. }) {
        return false;
    }
    members.iter().all(|m| match m {
        GreenMediumSpec::Waveguide1d { right, left, .. } => [right, left]
            .iter()
            .all(|ch| s.detectors.iter().any(|d| matches!(d, Detector::Channel { label } if label == *ch))),
        GreenMediumSpec::Composite { .. } => true,
        _ => false,
    })
}

#[derive(Serialize)]
struct SingularPoint {
    omega_gamma0: f64,
    reason: String,
}

fn spectrum(config: &RunConfig, mode: ExecutionMode) -> Result<(Vec<u8>, serde_json::Value), RunError> {
    let s = config.spectrum.as_ref().expect("validated");
    let system = PreparedSystem::new(&config.system)?;
    let ng = system.basis.n_ground();
    let rho = ground_density(s.ground_density.as_ref(), ng);
    let omegas = s.grid.values();
    let check_power = checks_unitarity(config, s);

    let points = mode.map(&omegas, |&omega| {
        let field = InputField { omega, drive: s.drive.clone() };
        let coh = system.coherence(&field)?;
        let ops = s
            .detectors
            .iter()
            .map(|d| scattering_operator(&system.spec, &system.basis, &field, &coh, d))
            .collect::<emscat::Result<Vec<_>>>()?;
        Ok::<_, CoreError>((coh.weak_drive_ratio, ops))
    });

    let mut w = csv_writer();
    w.write_record(["omega", "detector", "g", "g_prime", "re", "im", "abs2"]).map_err(csv_err)?;
    let mut singular = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut max_defect: f64 = 0.0;
    let nan = fmt(f64::NAN);
    for (&omega, point) in omegas.iter().zip(points) {
        let om = fmt(omega);
        match point {
            Ok((ratio, ops)) => {
                max_ratio = max_ratio.max(ratio);
                if check_power {
                    max_defect = max_defect.max(power_defect(&ops, &s.drive));
                }
                for op in &ops {
                    let names = component_names(&op.detector);
                    let weighted = op.expectation(&rho);
                    for (p, m) in op.components.iter().enumerate() {
                        for g in 0..ng {
                            for gp in 0..ng {
                                let z = m[(g, gp)];
                                let (gs, gps) = (g.to_string(), gp.to_string());
                                let rec = [&om, &names[p], &gs, &gps, &fmt(z.re), &fmt(z.im), &fmt(z.norm_sqr())];
                                w.write_record(rec).map_err(csv_err)?;
                            }
                        }
                        if ng > 1 {
                            let z: C64 = weighted[p];
                            let rec = [&om, &names[p], "total", "total", &fmt(z.re), &fmt(z.im), &fmt(z.norm_sqr())];
                            w.write_record(rec).map_err(csv_err)?;
                        }
                    }
                }
            }
            Err(CoreError::SingularAtFrequency { omega, condition }) => {
                warn!("singular at omega = {omega} (condition {condition:e})");
                singular.push(SingularPoint { omega_gamma0: omega, reason: format!("condition {condition:e}") });
                for d in &s.detectors {
                    for name in component_names(d) {
                        for g in 0..ng {
                            for gp in 0..ng {
                                let (gs, gps) = (g.to_string(), gp.to_string());
                                w.write_record([&om, &name, &gs, &gps, &nan, &nan, &nan]).map_err(csv_err)?;
                            }
                        }
                        if ng > 1 {
                            w.write_record([&om, &name, "total", "total", &nan, &nan, &nan]).map_err(csv_err)?;
                        }
                    }
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    if max_ratio > config.tolerances.weak_drive_ratio {
        warn!("weak-drive ratio reaches {max_ratio:.3e}; results assume the weak-field limit");
    }
    if check_power && max_defect > config.tolerances.unitarity {
        warn!("power balance defect {max_defect:.3e} exceeds tolerance");
    }
    let labels: Vec<String> = (0..ng).map(|g| system.basis.ground_label(&system.spec, g)).collect();
    let meta = json!({
        "grid": s.grid,
        "ground_states": labels,
        "singular_points": singular,
        "max_power_defect": if check_power { json!(max_defect) } else { serde_json::Value::Null },
        "max_weak_drive_ratio": max_ratio,
        "weak_drive_limit_exceeded": max_ratio > config.tolerances.weak_drive_ratio,
    });
    Ok((finish(w)?, meta))
}

fn evolve(config: &RunConfig) -> Result<(Vec<u8>, serde_json::Value), RunError> {
    let e = config.evolve.as_ref().expect("validated");
    let system = PreparedSystem::new(&config.system)?;
    let ng = system.basis.n_ground();
    let rho0 = GroundDensity::new(ground_density(e.initial_density.as_ref(), ng), 0.0)?;
    let segments = e
        .segments
        .iter()
        .map(|seg| {
            let field = InputField { omega: seg.omega_gamma0, drive: seg.drive.clone() };
            Ok(Segment { duration: seg.duration_inv_gamma0, generator: effective_generator(&system, &field)? })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    let integrator = match e.integrator {
        IntegratorChoice::Rk4 => Integrator::Rk4,
        IntegratorChoice::Exact => Integrator::Exact,
    };
    let traj = evolve_segments(&rho0, &segments, e.dt_inv_gamma0, integrator)?;

    let mut w = csv_writer();
    let mut header = vec!["t".to_string()];
    for i in 0..ng {
        for j in 0..ng {
            header.push(format!("rho_{i}_{j}_re"));
            header.push(format!("rho_{i}_{j}_im"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    let mut worst_trace: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        let mut rec = vec![fmt(*t)];
        for i in 0..ng {
            for j in 0..ng {
                rec.push(fmt(rho[(i, j)].re));
                rec.push(fmt(rho[(i, j)].im));
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
        worst_trace = worst_trace.max((trace(rho) - 1.0).norm());
        worst_eig = worst_eig.min(min_eigenvalue(rho));
    }
    let labels: Vec<String> = (0..ng).map(|g| system.basis.ground_label(&system.spec, g)).collect();
    let meta = json!({
        "ground_states": labels,
        "steps": traj.times.len() - 1,
        "dt_inv_gamma0": e.dt_inv_gamma0,
        "integrator": e.integrator,
        "max_trace_error": worst_trace,
        "min_eigenvalue": worst_eig,
    });
    Ok((finish(w)?, meta))
}

fn mint_golden(config: &RunConfig, mode: ExecutionMode) -> Result<(Vec<u8>, serde_json::Value), RunError> {
    let s = config.spectrum.as_ref().expect("validated");
    let omegas = s.grid.values();
    let results = mode.map(&omegas, |&omega| single_excitation_scattering(&config.system, omega, 0));
    let mut w = csv_writer();
    w.write_record(["omega", "g", "r_re", "r_im", "t_re", "t_im"]).map_err(csv_err)?;
    let mut rows = Vec::new();
    for (&omega, res) in omegas.iter().zip(results) {
        let res = res?;
        for (g, (r, t)) in res.r.iter().zip(&res.t).enumerate() {
            let rec = [fmt(omega), g.to_string(), fmt(r.re), fmt(r.im), fmt(t.re), fmt(t.im)];
            w.write_record(&rec).map_err(csv_err)?;
            rows.push(json!({ "omega_gamma0": omega, "g": g, "r": [r.re, r.im], "t": [t.re, t.im] }));
        }
    }
    let meta = json!({
        "grid": s.grid,
        "initial_ground_state": 0,
        "method": "single-excitation real-space solution",
        "amplitudes": rows,
    });
    Ok((finish(w)?, meta))
}

/// Write the JSON error report used by the binary.
pub fn report_error(err: &RunError, mut out: impl Write) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&err.to_json()).unwrap_or_default());
}
