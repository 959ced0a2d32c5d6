//! JSON run configuration. Every physical quantity carries its unit in the
//! field name: rates and energies in `gamma0`, times in `inv_gamma0`,
//! positions in `wavelengths`, field amplitudes in `sqrt_gamma0`. Complex
//! numbers are written as `[re, im]`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use emscat::effective::GroundDensity;
use emscat::linalg::CMat;
use emscat::model::{build_manifolds, SystemSpec};
use emscat::scattering::{Detector, Drive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[default]
    Spectrum,
    Evolve,
    MintGolden,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Evolve => "evolve",
            Task::MintGolden => "mint-golden",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start_gamma0: f64,
    pub stop_gamma0: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_gamma0];
        }
        let step = (self.stop_gamma0 - self.start_gamma0) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start_gamma0 + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub grid: Grid,
    pub drive: Drive,
    pub detectors: Vec<Detector>,
    /// Ground-manifold density used to weight the output; defaults to the
    /// first collective ground state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_density: Option<Vec<Vec<C64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorChoice {
    #[default]
    Rk4,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSegment {
    pub duration_inv_gamma0: f64,
    pub omega_gamma0: f64,
    pub drive: Drive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub segments: Vec<DriveSegment>,
    pub dt_inv_gamma0: f64,
    #[serde(default)]
    pub integrator: IntegratorChoice,
    /// Initial ground density; defaults to the first collective ground state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_density: Option<Vec<Vec<C64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_prefix() -> String {
    "emscat".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, prefix: default_prefix() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Warn when the drive leaves the weak-field regime.
    #[serde(default = "default_weak_drive")]
    pub weak_drive_ratio: f64,
    /// Power-balance defect tolerated on lossless waveguide sweeps.
    #[serde(default = "default_unitarity")]
    pub unitarity: f64,
}

fn default_weak_drive() -> f64 {
    0.1
}

fn default_unitarity() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { weak_drive_ratio: default_weak_drive(), unitarity: default_unitarity() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaError {
    pub path: String,
    pub reason: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

fn err(path: impl Into<String>, reason: impl Into<String>) -> SchemaError {
    SchemaError { path: path.into(), reason: reason.into() }
}

/// Parse and fully validate a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<SchemaError>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        vec![err(if path == "." { String::new() } else { path }, e.into_inner().to_string())]
    })?;
    let issues = validate(&config);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(issues)
    }
}

pub fn emit_config(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

fn density_matrix(rows: &[Vec<C64>], n: usize, path: &str, out: &mut Vec<SchemaError>) -> Option<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        out.push(err(path, format!("expected a {n}x{n} matrix over the ground manifold")));
        return None;
    }
    let m = CMat::from_fn(n, n, |i, j| rows[i][j]);
    match GroundDensity::new(m.clone(), 0.0) {
        Ok(_) => Some(m),
        Err(e) => {
            out.push(err(path, e.to_string()));
            None
        }
    }
}

fn check_drive(drive: &Drive, system: &SystemSpec, path: &str, out: &mut Vec<SchemaError>) {
    let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
    match drive {
        Drive::Channels { amplitudes } => {
            let channels: Vec<String> = system
                .medium
                .members()
                .iter()
                .filter_map(|m| match m {
                    emscat::GreenMediumSpec::Waveguide1d { right, left, .. } => Some([right.clone(), left.clone()]),
                    _ => None,
                })
                .flatten()
                .collect();
            for (k, v) in amplitudes {
                if !channels.contains(k) {
                    out.push(err(format!("{path}.amplitudes_sqrt_gamma0.{k}"), "not a waveguide channel"));
                }
                if !finite(v) {
                    out.push(err(format!("{path}.amplitudes_sqrt_gamma0.{k}"), "non-finite amplitude"));
                }
            }
        }
        Drive::Local { fields } => {
            if fields.len() != system.emitters.len() {
                out.push(err(
                    format!("{path}.fields_sqrt_gamma0"),
                    format!("{} fields for {} emitters", fields.len(), system.emitters.len()),
                ));
            }
            if fields.iter().flatten().any(|z| !finite(z)) {
                out.push(err(format!("{path}.fields_sqrt_gamma0"), "non-finite field"));
            }
        }
        Drive::PlaneWave { amplitude, direction } => {
            let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
                out.push(err(format!("{path}.direction"), "direction must be a unit vector"));
            }
            if amplitude.iter().any(|z| !finite(z)) {
                out.push(err(format!("{path}.amplitude_sqrt_gamma0"), "non-finite amplitude"));
            }
        }
    }
}

/// Semantic checks that the type system cannot express.
pub fn validate(config: &RunConfig) -> Vec<SchemaError> {
    let mut out: Vec<SchemaError> =
        config.system.issues().into_iter().map(|i| err(format!("system.{}", i.path), i.reason)).collect();
    if !out.is_empty() {
        return out;
    }
    let n_ground = match build_manifolds(&config.system) {
        Ok(b) => b.n_ground(),
        Err(e) => return vec![err("system", e.to_string())],
    };
    match config.task {
        Task::Spectrum | Task::MintGolden => match &config.spectrum {
            None => out.push(err("spectrum", format!("required for task '{}'", config.task.name()))),
            Some(s) => {
                let g = &s.grid;
                if g.points == 0 {
                    out.push(err("spectrum.grid.points", "must be at least 1"));
                }
                if !g.start_gamma0.is_finite() || !g.stop_gamma0.is_finite() {
                    out.push(err("spectrum.grid", "grid bounds must be finite"));
                } else if g.stop_gamma0 < g.start_gamma0 {
                    out.push(err("spectrum.grid.stop_gamma0", "must not be below start_gamma0"));
                }
                check_drive(&s.drive, &config.system, "spectrum.drive", &mut out);
                if s.detectors.is_empty() && config.task == Task::Spectrum {
                    out.push(err("spectrum.detectors", "at least one detector is required"));
                }
                let mut names = std::collections::HashSet::new();
                for (k, d) in s.detectors.iter().enumerate() {
                    if !names.insert(d.name()) {
                        out.push(err(format!("spectrum.detectors[{k}]"), format!("duplicate detector '{}'", d.name())));
                    }
                    if let Detector::Position { position, .. } = d {
                        if position.iter().any(|x| !x.is_finite()) {
                            out.push(err(format!("spectrum.detectors[{k}].position_wavelengths"), "non-finite"));
                        }
                    }
                }
                if let Some(rows) = &s.ground_density {
                    density_matrix(rows, n_ground, "spectrum.ground_density", &mut out);
                }
                if config.task == Task::MintGolden && !config.system.medium.has_waveguide() {
                    out.push(err("system.medium", "mint-golden needs a waveguide1d member"));
                }
            }
        },
        Task::Evolve => match &config.evolve {
            None => out.push(err("evolve", "required for task 'evolve'")),
            Some(e) => {
                if !(e.dt_inv_gamma0 > 0.0 && e.dt_inv_gamma0.is_finite()) {
                    out.push(err("evolve.dt_inv_gamma0", "must be positive"));
                }
                if e.segments.is_empty() {
                    out.push(err("evolve.segments", "at least one segment is required"));
                }
                for (k, seg) in e.segments.iter().enumerate() {
                    let p = format!("evolve.segments[{k}]");
                    if !(seg.duration_inv_gamma0 >= 0.0 && seg.duration_inv_gamma0.is_finite()) {
                        out.push(err(format!("{p}.duration_inv_gamma0"), "must be finite and >= 0"));
                    }
                    if !seg.omega_gamma0.is_finite() {
                        out.push(err(format!("{p}.omega_gamma0"), "must be finite"));
                    }
                    check_drive(&seg.drive, &config.system, &format!("{p}.drive"), &mut out);
                }
                if let Some(rows) = &e.initial_density {
                    density_matrix(rows, n_ground, "evolve.initial_density", &mut out);
                }
            }
        },
    }
    let t = &config.tolerances;
    if t.weak_drive_ratio.is_nan() || t.weak_drive_ratio <= 0.0 {
        out.push(err("tolerances.weak_drive_ratio", "must be positive"));
    }
    if t.unitarity.is_nan() || t.unitarity <= 0.0 {
        out.push(err("tolerances.unitarity", "must be positive"));
    }
    out
}

/// Ground density from optional rows, or the first collective ground state.
pub fn ground_density(rows: Option<&Vec<Vec<C64>>>, n: usize) -> CMat {
    match rows {
        Some(r) => CMat::from_fn(n, n, |i, j| r[i][j]),
        None => GroundDensity::pure(n, 0).matrix,
    }
}
