//! Non-Hermitian Hamiltonian of the single-excitation manifold, its detuned
//! inverse, the linear-response coherences and the scattered output field.

use std::collections::BTreeMap;

use log::debug;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::effective::{build_excitation, ExcitationOperator};
use crate::error::{Error, Result};
use crate::linalg::{c, cvec3, eigenvalues, hermitian_defect, lu_inverse, max_abs, min_eigenvalue, CMat, CVec3, I};
use crate::media::{
    decay_and_shift, freespace_dyadic, jump_basis, wavenumber, waveguide_amplitude, DecayMatrix, Direction,
    GreenMediumSpec, JumpBasis, ShiftMatrix,
};
use crate::model::{build_manifolds, excited_hamiltonian, ManifoldBasis, SystemSpec};
use crate::parallel::ExecutionMode;

/// Condition estimates above this mark the detuned Hamiltonian as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Drive strengths above this fraction of the smallest excited-state width
/// or detuning leave the weak-drive regime.
pub const WEAK_DRIVE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct NonHermitianHamiltonian {
    /// `H_c,e - Omega - (i/2) Gamma`.
    pub matrix: CMat,
}

impl NonHermitianHamiltonian {
    /// `i (H - H^dagger)`, the decay matrix encoded in the anti-Hermitian part.
    pub fn decay_part(&self) -> CMat {
        (&self.matrix - self.matrix.adjoint()) * I
    }
}

pub fn build_nonhermitian(
    spec: &SystemSpec,
    basis: &ManifoldBasis,
    decay: &DecayMatrix,
    shift: &ShiftMatrix,
) -> Result<NonHermitianHamiltonian> {
    let hc = excited_hamiltonian(spec, basis)?;
    let defect = hermitian_defect(&hc);
    if defect > 1e-12 {
        return Err(Error::InvalidSpec(format!("hc_excited is not Hermitian (defect {defect:e})")));
    }
    let h = NonHermitianHamiltonian { matrix: hc - &shift.matrix - &decay.matrix * (0.5 * I) };
    let lo = min_eigenvalue(&h.decay_part());
    if lo < -1e-12 {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lo });
    }
    Ok(h)
}

/// `[H_nh - (omega + E_g)]^-1` at one drive frequency and ground energy.
#[derive(Debug, Clone)]
pub struct DetunedInverse {
    pub omega: f64,
    pub ground_energy: f64,
    pub matrix: CMat,
    pub condition: f64,
}

pub fn detuned_inverse(h: &NonHermitianHamiltonian, omega: f64, ground_energy: f64) -> Result<DetunedInverse> {
    let n = h.matrix.nrows();
    let shifted = &h.matrix - CMat::identity(n, n) * C64::from(omega + ground_energy);
    let singular = |condition| Error::SingularAtFrequency { omega, condition };
    let (inv, cond) = lu_inverse(&shifted).ok_or(singular(f64::INFINITY))?;
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(singular(cond));
    }
    let residual = max_abs(&(&shifted * &inv - CMat::identity(n, n)));
    if residual >= 1e-10 {
        return Err(singular(cond));
    }
    Ok(DetunedInverse { omega, ground_energy, matrix: inv, condition: cond })
}

/// One detuned inverse per distinct ground energy, looked up by ground state.
#[derive(Debug, Clone)]
pub struct GroundResolvedInverse {
    pub omega: f64,
    pub inverses: Vec<DetunedInverse>,
    slot: Vec<usize>,
}

impl GroundResolvedInverse {
    pub fn new(h: &NonHermitianHamiltonian, omega: f64, ground_energies: &[f64]) -> Result<Self> {
        let mut inverses: Vec<DetunedInverse> = Vec::new();
        let mut slot = Vec::with_capacity(ground_energies.len());
        for &eg in ground_energies {
            let tol = 1e-14 * eg.abs().max(1.0);
            match inverses.iter().position(|d| (d.ground_energy - eg).abs() <= tol) {
                Some(k) => slot.push(k),
                None => {
                    slot.push(inverses.len());
                    inverses.push(detuned_inverse(h, omega, eg)?);
                }
            }
        }
        Ok(Self { omega, inverses, slot })
    }

    /// Inverse used for initial ground state `g`.
    pub fn for_ground(&self, g: usize) -> &DetunedInverse {
        &self.inverses[self.slot[g]]
    }
}

/// Coherent incident field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drive {
    /// Incident amplitudes in named waveguide channels.
    Channels {
        #[serde(rename = "amplitudes_sqrt_gamma0")]
        amplitudes: BTreeMap<String, C64>,
    },
    /// Field envelope `E+(r_j)` at each emitter, in emitter order.
    Local {
        #[serde(rename = "fields_sqrt_gamma0")]
        fields: Vec<[C64; 3]>,
    },
    /// `E+(r) = amplitude * exp(2 pi i direction . r)` with a unit direction.
    PlaneWave {
        #[serde(rename = "amplitude_sqrt_gamma0")]
        amplitude: [C64; 3],
        direction: [f64; 3],
    },
}

impl Drive {
    /// Incident right-moving unit amplitude.
    pub fn right(amplitude: f64) -> Self {
        Self::Channels { amplitudes: BTreeMap::from([("right".to_string(), C64::from(amplitude))]) }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let s = C64::from(s);
        match self {
            Self::Channels { amplitudes } => {
                Self::Channels { amplitudes: amplitudes.iter().map(|(k, v)| (k.clone(), v * s)).collect() }
            }
            Self::Local { fields } => Self::Local { fields: fields.iter().map(|f| f.map(|z| z * s)).collect() },
            Self::PlaneWave { amplitude, direction } => {
                Self::PlaneWave { amplitude: amplitude.map(|z| z * s), direction: *direction }
            }
        }
    }

    /// Incident amplitude in a channel (zero for local and plane-wave drives).
    pub fn channel_amplitude(&self, label: &str) -> C64 {
        match self {
            Self::Channels { amplitudes } => amplitudes.get(label).copied().unwrap_or_default(),
            _ => c(0.0, 0.0),
        }
    }

    /// Incident field at a point (only defined for plane waves).
    pub fn field_at(&self, r: [f64; 3]) -> CVec3 {
        match self {
            Self::PlaneWave { amplitude, direction } => {
                let phase = std::f64::consts::TAU * (direction[0] * r[0] + direction[1] * r[1] + direction[2] * r[2]);
                cvec3(*amplitude) * C64::from_polar(1.0, phase)
            }
            _ => CVec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputField {
    /// Drive frequency, detuning from the carrier in `Gamma0`.
    pub omega: f64,
    pub drive: Drive,
}

/// Excited-manifold amplitudes `sigma_e(g')` for each initial ground state,
/// stored as columns (`n_excited x n_ground`).
#[derive(Debug, Clone)]
pub struct Coherence {
    pub sigma: CMat,
    /// `max |A| / min |eig(H~)|`; the formalism needs this small.
    pub weak_drive_ratio: f64,
}

pub fn solve_coherence(inv: &GroundResolvedInverse, exc: &ExcitationOperator) -> Coherence {
    let a = &exc.matrix;
    let mut sigma = CMat::zeros(a.nrows(), a.ncols());
    for g in 0..a.ncols() {
        let col = &inv.for_ground(g).matrix * a.column(g);
        sigma.set_column(g, &col);
    }
    let drive = max_abs(a);
    let mut ratio = 0.0_f64;
    if drive > 0.0 {
        for d in &inv.inverses {
            // eigenvalues of H~ are reciprocals of those of its inverse
            let largest = eigenvalues(&d.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
            ratio = ratio.max(drive * largest);
        }
        if ratio > WEAK_DRIVE_LIMIT {
            debug!("weak-drive ratio {ratio:.3} at omega = {} exceeds {WEAK_DRIVE_LIMIT}", inv.omega);
        }
    }
    Coherence { sigma, weak_drive_ratio: ratio }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Detector {
    /// Outgoing amplitude in a waveguide channel.
    Channel { label: String },
    /// Scattered plus incident field at a point in free space.
    Position {
        name: String,
        #[serde(rename = "position_wavelengths")]
        position: [f64; 3],
    },
}

impl Detector {
    pub fn channel(label: &str) -> Self {
        Self::Channel { label: label.into() }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Channel { label } => label,
            Self::Position { name, .. } => name,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Self::Channel { .. } => 1,
            Self::Position { .. } => 3,
        }
    }
}

/// Output amplitudes for one detector: `components[k][(g, g')]` multiplies
/// `<sigma_g'g>`. Channel detectors have one component, positions three.
#[derive(Debug, Clone)]
pub struct ScatteringOperator {
    pub omega: f64,
    pub detector: Detector,
    pub components: Vec<CMat>,
}

impl ScatteringOperator {
    /// `sum_{g,g'} amp(g, g') rho_{g'g}` per component.
    pub fn expectation(&self, rho: &CMat) -> Vec<C64> {
        self.components
            .iter()
            .map(|m| {
                let mut acc = c(0.0, 0.0);
                for g in 0..m.nrows() {
                    for gp in 0..m.ncols() {
                        acc += m[(g, gp)] * rho[(gp, g)];
                    }
                }
                acc
            })
            .collect()
    }
}

fn find_channel<'a>(spec: &'a SystemSpec, label: &str) -> Option<(&'a str, Direction)> {
    spec.medium.members().into_iter().find_map(|m| match m {
        GreenMediumSpec::Waveguide1d { id, right, .. } if right == label => Some((id.as_str(), Direction::Right)),
        GreenMediumSpec::Waveguide1d { id, left, .. } if left == label => Some((id.as_str(), Direction::Left)),
        _ => None,
    })
}

/// Output amplitudes for one detector at drive frequency `omega`. Emission
/// into final ground state `g` from initial `g'` is evaluated at the photon
/// frequency `omega - (E_g - E_g')`.
pub fn scattering_operator(
    spec: &SystemSpec,
    basis: &ManifoldBasis,
    field: &InputField,
    coherence: &Coherence,
    detector: &Detector,
) -> Result<ScatteringOperator> {
    let ng = basis.n_ground();
    let energies = basis.ground_energies(spec);
    let sigma = &coherence.sigma;
    let omega = field.omega;
    let components = match detector {
        Detector::Channel { label } => {
            let (member, dir) = find_channel(spec, label)
                .ok_or_else(|| Error::InvalidSpec(format!("detector channel '{label}' is not a waveguide channel")))?;
            let incident = field.drive.channel_amplitude(label);
            let mut m = CMat::zeros(ng, ng);
            for g in 0..ng {
                for gp in 0..ng {
                    let k = wavenumber(spec.carrier_frequency, omega - (energies[g] - energies[gp]));
                    let mut acc = if g == gp { incident } else { c(0.0, 0.0) };
                    for t in basis.transitions().iter().filter(|t| t.ground == g) {
                        let em = &spec.emitters[t.emitter];
                        let rate = em.transitions[t.transition].rate(member);
                        acc += I * waveguide_amplitude(rate, em.position[0], k, dir) * sigma[(t.excited, gp)];
                    }
                    m[(g, gp)] = acc;
                }
            }
            vec![m]
        }
        Detector::Position { position, .. } => {
            let member = spec
                .medium
                .members()
                .into_iter()
                .find(|m| matches!(m, GreenMediumSpec::Freespace3d { .. }))
                .ok_or_else(|| Error::Unsupported("position detectors need a freespace3d medium".into()))?
                .id()
                .to_string();
            let incident = field.drive.field_at(*position);
            let mut out = vec![CMat::zeros(ng, ng); 3];
            for g in 0..ng {
                for gp in 0..ng {
                    let k = wavenumber(spec.carrier_frequency, omega - (energies[g] - energies[gp]));
                    let mut acc = if g == gp { incident } else { CVec3::zeros() };
                    for t in basis.transitions().iter().filter(|t| t.ground == g) {
                        let em = &spec.emitters[t.emitter];
                        let tr = &em.transitions[t.transition];
                        let rate = tr.rate(&member);
                        if rate == 0.0 {
                            continue;
                        }
                        let gn = freespace_dyadic(k, *position, em.position)?;
                        let d = cvec3(tr.orientation).map(|z| z.conj() * rate.sqrt());
                        acc += gn * d * sigma[(t.excited, gp)];
                    }
                    for (p, m) in out.iter_mut().enumerate() {
                        m[(g, gp)] = acc[p];
                    }
                }
            }
            out
        }
    };
    Ok(ScatteringOperator { omega, detector: detector.clone(), components })
}

/// Everything that does not depend on the drive frequency, built once.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    pub spec: SystemSpec,
    pub basis: ManifoldBasis,
    pub decay: DecayMatrix,
    pub shift: ShiftMatrix,
    pub hamiltonian: NonHermitianHamiltonian,
    pub jumps: JumpBasis,
    pub ground_energies: Vec<f64>,
}

impl PreparedSystem {
    /// Validate the spec and build all frequency-independent operators with
    /// the medium evaluated at the carrier.
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        spec.validate()?;
        let basis = build_manifolds(spec)?;
        let (decay, shift) = decay_and_shift(spec, &basis, 0.0)?;
        let hamiltonian = build_nonhermitian(spec, &basis, &decay, &shift)?;
        let jumps = jump_basis(&decay, spec, &basis)?;
        let ground_energies = basis.ground_energies(spec);
        Ok(Self { spec: spec.clone(), basis, decay, shift, hamiltonian, jumps, ground_energies })
    }

    pub fn inverse(&self, omega: f64) -> Result<GroundResolvedInverse> {
        GroundResolvedInverse::new(&self.hamiltonian, omega, &self.ground_energies)
    }

    pub fn excitation(&self, field: &InputField) -> Result<ExcitationOperator> {
        build_excitation(&self.spec, &self.basis, field)
    }

    pub fn coherence(&self, field: &InputField) -> Result<Coherence> {
        let inv = self.inverse(field.omega)?;
        Ok(solve_coherence(&inv, &self.excitation(field)?))
    }

    /// Scattering operators for every detector at one drive frequency.
    pub fn scatter(&self, field: &InputField, detectors: &[Detector]) -> Result<Vec<ScatteringOperator>> {
        let coh = self.coherence(field)?;
        detectors.iter().map(|d| scattering_operator(&self.spec, &self.basis, field, &coh, d)).collect()
    }
}

/// One sweep point. `operators` is an error when the detuned Hamiltonian is
/// singular there; the sweep continues.
#[derive(Debug, Clone)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub operators: Result<Vec<ScatteringOperator>>,
    /// `expectation(rho)` per detector.
    pub weighted: Vec<Vec<C64>>,
}

pub fn spectrum_sweep(
    system: &PreparedSystem,
    drive: &Drive,
    detectors: &[Detector],
    omegas: &[f64],
    rho: &CMat,
    mode: ExecutionMode,
) -> Vec<SpectrumPoint> {
    mode.map(omegas, |&omega| {
        let field = InputField { omega, drive: drive.clone() };
        let operators = system.scatter(&field, detectors);
        let weighted = match &operators {
            Ok(ops) => ops.iter().map(|op| op.expectation(rho)).collect(),
            Err(_) => Vec::new(),
        };
        SpectrumPoint { omega, operators, weighted }
    })
}

/// `max | sum_k |out_k|^2 - sum_k |in_k|^2 |` over initial ground states,
/// summing outgoing power over all final grounds. Zero for lossless media.
pub fn power_defect(ops: &[ScatteringOperator], drive: &Drive) -> f64 {
    let incoming: f64 = match drive {
        Drive::Channels { amplitudes } => amplitudes.values().map(|a| a.norm_sqr()).sum(),
        _ => 0.0,
    };
    let ng = ops.first().map(|o| o.components[0].ncols()).unwrap_or(0);
    (0..ng)
        .map(|gp| {
            let out: f64 = ops
                .iter()
                .filter(|o| matches!(o.detector, Detector::Channel { .. }))
                .map(|o| o.components[0].column(gp).iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum();
            (out - incoming).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EmitterSpec, Level, Transition, Z_HAT};

    fn single(medium: GreenMediumSpec, em: EmitterSpec) -> PreparedSystem {
        PreparedSystem::new(&SystemSpec::new(vec![em], medium)).unwrap()
    }

    fn wg_pair(sep: f64) -> PreparedSystem {
        PreparedSystem::new(&SystemSpec::new(
            vec![EmitterSpec::two_level("a", 0.0, "wg", 1.0), EmitterSpec::two_level("b", sep, "wg", 1.0)],
            GreenMediumSpec::waveguide("wg"),
        ))
        .unwrap()
    }

    #[test]
    fn single_emitter_inverse_closed_form() {
        let mut em = EmitterSpec::two_level("a", 0.0, "wg", 1.0);
        em.levels[1].energy = 0.3;
        let sys = single(GreenMediumSpec::waveguide("wg"), em);
        for omega in [-2.0, 0.0, 0.3, 1.7] {
            let d = detuned_inverse(&sys.hamiltonian, omega, 0.0).unwrap();
            let delta = omega - 0.3;
            let expect = -1.0 / (c(delta, 0.0) + 0.5 * I);
            assert!((d.matrix[(0, 0)] - expect).norm() < 1e-15);
            assert!((d.matrix[(0, 0)].norm() - 1.0 / (delta * delta + 0.25).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn lossless_hamiltonian_is_hc() {
        let spec = SystemSpec::new(vec![EmitterSpec::two_level("a", 0.0, "wg", 0.0)], GreenMediumSpec::waveguide("wg"));
        let sys = PreparedSystem::new(&spec).unwrap();
        assert_eq!(sys.hamiltonian.matrix[(0, 0)], c(0.0, 0.0));
        assert!(matches!(detuned_inverse(&sys.hamiltonian, 0.0, 0.0), Err(Error::SingularAtFrequency { .. })));
        let d = detuned_inverse(&sys.hamiltonian, 0.5, 0.0).unwrap();
        assert!((d.matrix[(0, 0)] + 2.0).norm() < 1e-15);
    }

    #[test]
    fn bright_and_dark_eigenvalues() {
        let sys = wg_pair(1.0);
        let mut ev = eigenvalues(&sys.hamiltonian.matrix);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!(ev[1].norm() < 1e-12);
        // exactly dark at resonance
        assert!(matches!(detuned_inverse(&sys.hamiltonian, 0.0, 0.0), Err(Error::SingularAtFrequency { .. })));
    }

    #[test]
    fn non_hermitian_hc_rejected() {
        let mut spec = SystemSpec::new(
            vec![EmitterSpec {
                id: "a".into(),
                levels: vec![Level::ground("g", 0.0), Level::excited("e1", 0.0), Level::excited("e2", 0.0)],
                transitions: vec![Transition::new("e1", "g", Z_HAT).with_coupling("wg", 1.0)],
                position: [0.0; 3],
            }],
            GreenMediumSpec::waveguide("wg"),
        );
        spec.hc_excited.push(crate::model::HcTerm::Local {
            emitter: "a".into(),
            row: "e1".into(),
            col: "e2".into(),
            value: c(0.2, 0.0),
        });
        assert!(matches!(PreparedSystem::new(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn random_inverse_residual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 12;
            let mut x = CMat::zeros(n, n);
            let mut h = CMat::zeros(n, n);
            for v in x.iter_mut() {
                *v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
            for v in h.iter_mut() {
                *v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
            let gamma = &x * x.adjoint();
            let nh = NonHermitianHamiltonian { matrix: (&h + h.adjoint()) * c(0.5, 0.0) - gamma * (0.5 * I) };
            assert!(min_eigenvalue(&nh.decay_part()) > -1e-12);
            let d = detuned_inverse(&nh, rng.random_range(-2.0..2.0), 0.0).unwrap();
            let shifted = &nh.matrix - CMat::identity(n, n) * C64::from(d.omega);
            assert!(max_abs(&(shifted * &d.matrix - CMat::identity(n, n))) < 1e-10);
        }
    }

    #[test]
    fn resonant_reflection_and_far_detuned_limit() {
        let sys = single(GreenMediumSpec::waveguide("wg"), EmitterSpec::two_level("a", 0.37, "wg", 1.0));
        let dets = [Detector::channel("right"), Detector::channel("left")];
        let ops = sys.scatter(&InputField { omega: 0.0, drive: Drive::right(1.0) }, &dets).unwrap();
        let (t, r) = (ops[0].components[0][(0, 0)], ops[1].components[0][(0, 0)]);
        assert!(t.norm() < 1e-15);
        assert!((r.norm() - 1.0).abs() < 1e-14);
        let ops = sys.scatter(&InputField { omega: 1e7, drive: Drive::right(1.0) }, &dets).unwrap();
        assert!((ops[0].components[0][(0, 0)] - 1.0).norm() < 1e-6);
        assert!(ops[1].components[0][(0, 0)].norm() < 1e-6);
    }

    #[test]
    fn lossy_emitter_quarter_transmission() {
        let em = EmitterSpec {
            id: "a".into(),
            levels: vec![Level::ground("g", 0.0), Level::excited("e", 0.0)],
            transitions: vec![Transition::new("e", "g", Z_HAT).with_coupling("wg", 1.0).with_coupling("loss", 1.0)],
            position: [0.0; 3],
        };
        let medium = GreenMediumSpec::Composite {
            members: vec![GreenMediumSpec::waveguide("wg"), GreenMediumSpec::loss("loss")],
        };
        let sys = single(medium, em);
        let ops = sys.scatter(&InputField { omega: 0.0, drive: Drive::right(1.0) }, &[Detector::channel("right")]).unwrap();
        assert!((ops[0].components[0][(0, 0)].norm_sqr() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn zero_coupling_passes_input_through() {
        let mut em = EmitterSpec::two_level("a", 0.0, "wg", 0.0);
        em.levels[1].energy = 1.0;
        let sys = single(GreenMediumSpec::waveguide("wg"), em);
        let ops = sys.scatter(&InputField { omega: 0.2, drive: Drive::right(0.7) }, &[Detector::channel("right")]).unwrap();
        assert!((ops[0].components[0][(0, 0)] - 0.7).norm() == 0.0);
    }

    #[test]
    fn lambda_driven_on_one_leg_has_one_source_ground() {
        let em = EmitterSpec {
            id: "a".into(),
            levels: vec![Level::ground("g1", 0.0), Level::ground("g2", 0.0), Level::excited("e", 0.0)],
            transitions: vec![
                Transition::new("e", "g1", Z_HAT).with_coupling("loss", 0.5),
                Transition::new("e", "g2", crate::model::X_HAT).with_coupling("loss", 0.5),
            ],
            position: [0.0; 3],
        };
        let sys = single(GreenMediumSpec::loss("loss"), em);
        let field = InputField {
            omega: 0.0,
            drive: Drive::Local { fields: vec![[c(0.0, 0.0), c(0.0, 0.0), c(0.01, 0.0)]] },
        };
        let coh = sys.coherence(&field).unwrap();
        assert!(coh.sigma[(0, 0)].norm() > 0.0);
        assert_eq!(coh.sigma[(0, 1)], c(0.0, 0.0));
        // on resonance |sigma| = 2 |d.E| / Gamma with |d| = sqrt(0.5)
        assert!((coh.sigma[(0, 0)].norm() - 2.0 * 0.01 * 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sweep_modes_agree_and_lossless_is_unitary() {
        let sys = wg_pair(0.25);
        let omegas: Vec<f64> = (0..50).map(|i| -3.0 + 6.0 * i as f64 / 49.0).collect();
        let dets = [Detector::channel("right"), Detector::channel("left")];
        let rho = CMat::identity(1, 1);
        let a = spectrum_sweep(&sys, &Drive::right(1.0), &dets, &omegas, &rho, ExecutionMode::Sequential);
        let b = spectrum_sweep(&sys, &Drive::right(1.0), &dets, &omegas, &rho, ExecutionMode::Parallel);
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.weighted, q.weighted);
            let ops = p.operators.as_ref().unwrap();
            assert!(power_defect(ops, &Drive::right(1.0)) < 1e-12);
        }
    }

    #[test]
    fn position_detector_optical_theorem() {
        // extinction from the forward field equals the scattered power
        let spec = SystemSpec::new(vec![EmitterSpec::two_level("a", 0.0, "fs", 1.0)], GreenMediumSpec::freespace("fs"));
        let sys = PreparedSystem::new(&spec).unwrap();
        let field = InputField {
            omega: 0.3,
            drive: Drive::PlaneWave { amplitude: [c(0.0, 0.0), c(0.0, 0.0), c(1e-3, 0.0)], direction: [1.0, 0.0, 0.0] },
        };
        let coh = sys.coherence(&field).unwrap();
        let sigma = coh.sigma[(0, 0)];
        // scattered power Gamma |sigma|^2 vs extinction from the forward far field
        let scattered = sigma.norm_sqr();
        let far = 4000.0;
        let det = Detector::Position { name: "fwd".into(), position: [far, 0.0, 0.0] };
        let op = scattering_operator(&spec, &sys.basis, &field, &coh, &det).unwrap();
        let ez = op.components[2][(0, 0)];
        let ein = 1e-3 * C64::from_polar(1.0, std::f64::consts::TAU * far);
        let fwd = (ez - ein) * (std::f64::consts::TAU * far) / C64::from_polar(1.0, std::f64::consts::TAU * far);
        // flux per |E|^2 fixed by the resonant cross-section 6 pi / k^2,
        // which turns the forward-amplitude theorem into P = (8/3) Im(E0* f)
        let extinct = (8.0 / 3.0) * (c(1e-3, 0.0).conj() * fwd).im;
        assert!((extinct - scattered).abs() < 1e-3 * scattered, "{extinct} vs {scattered}");
    }
}
