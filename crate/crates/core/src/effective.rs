//! Adiabatic elimination of the excited manifold: effective Hamiltonian and
//! Lindblad operators on the ground manifold, and their master equation.

use log::debug;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{c, cvec3, hermitian_defect, hermitian_part, min_eigenvalue, trace, CMat, CVec, I};
use crate::media::{wavenumber, waveguide_amplitude, Direction, GreenMediumSpec, JumpBasis};
use crate::model::{ManifoldBasis, SystemSpec};
use crate::scattering::{Drive, GroundResolvedInverse, InputField, PreparedSystem};

/// Largest `|M_g|` for which the dense superoperator exponential is used.
pub const EXACT_MAX_GROUND: usize = 16;

/// Excitation operator `A+` (`n_excited x n_ground`); the de-excitation
/// operator is its adjoint.
#[derive(Debug, Clone)]
pub struct ExcitationOperator {
    pub matrix: CMat,
}

/// Excitation amplitudes of the drive on every collective transition.
///
/// Channel drives act through the adjoint of the corresponding emission
/// amplitudes, evaluated at the drive frequency. Field drives use the dipole
/// `sqrt(Gamma_total) * orientation` dotted into the local field.
pub fn build_excitation(spec: &SystemSpec, basis: &ManifoldBasis, field: &InputField) -> Result<ExcitationOperator> {
    let mut a = CMat::zeros(basis.n_excited(), basis.n_ground());
    match &field.drive {
        Drive::Channels { amplitudes } => {
            let k = wavenumber(spec.carrier_frequency, field.omega);
            for (label, &eps) in amplitudes {
                let (member, dir) = spec
                    .medium
                    .members()
                    .into_iter()
                    .find_map(|m| match m {
                        GreenMediumSpec::Waveguide1d { id, right, .. } if right == label => Some((id.clone(), Direction::Right)),
                        GreenMediumSpec::Waveguide1d { id, left, .. } if left == label => Some((id.clone(), Direction::Left)),
                        _ => None,
                    })
                    .ok_or_else(|| Error::InvalidSpec(format!("drive channel '{label}' is not a waveguide channel")))?;
                for t in basis.transitions() {
                    let em = &spec.emitters[t.emitter];
                    let rate = em.transitions[t.transition].rate(&member);
                    a[(t.excited, t.ground)] += waveguide_amplitude(rate, em.position[0], k, dir).conj() * eps;
                }
            }
        }
        Drive::Local { .. } | Drive::PlaneWave { .. } => {
            if let Drive::Local { fields } = &field.drive {
                if fields.len() != spec.emitters.len() {
                    return Err(Error::InvalidSpec(format!(
                        "local drive has {} fields for {} emitters",
                        fields.len(),
                        spec.emitters.len()
                    )));
                }
            }
            for t in basis.transitions() {
                let em = &spec.emitters[t.emitter];
                let tr = &em.transitions[t.transition];
                let e_loc = match &field.drive {
                    Drive::Local { fields } => cvec3(fields[t.emitter]),
                    other => other.field_at(em.position),
                };
                a[(t.excited, t.ground)] += cvec3(tr.orientation).dot(&e_loc) * tr.total_rate().sqrt();
            }
        }
    }
    Ok(ExcitationOperator { matrix: a })
}

/// `B = [H~]^-1 A+`, column by column with the inverse of each initial ground.
fn resolved(exc: &ExcitationOperator, inv: &GroundResolvedInverse) -> CMat {
    let a = &exc.matrix;
    let mut b = CMat::zeros(a.nrows(), a.ncols());
    for g in 0..a.ncols() {
        b.set_column(g, &(&inv.for_ground(g).matrix * a.column(g)));
    }
    b
}

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub matrix: CMat,
}

/// `H_eff = -(A^dagger B + B^dagger A) / 2 + diag(E_g)`.
///
/// With `H~ = H_nh - omega` this gives a two-level light shift
/// `|A|^2 Delta / (Delta^2 + Gamma^2 / 4)`, `Delta = omega - omega_eg`.
pub fn build_effective_hamiltonian(
    exc: &ExcitationOperator,
    inv: &GroundResolvedInverse,
    ground_energies: &[f64],
) -> EffectiveHamiltonian {
    let b = resolved(exc, inv);
    let a = &exc.matrix;
    let mut h = (a.adjoint() * &b + b.adjoint() * a) * c(-0.5, 0.0);
    for (g, &e) in ground_energies.iter().enumerate() {
        h[(g, g)] += C64::from(e);
    }
    // exact Hermiticity by construction up to rounding
    EffectiveHamiltonian { matrix: hermitian_part(&h) }
}

#[derive(Debug, Clone)]
pub struct EffectiveLindblad {
    pub label: String,
    pub matrix: CMat,
}

/// `L_k = c^k [H~]^-1 A+` for every jump channel.
pub fn build_effective_lindblads(
    jumps: &JumpBasis,
    inv: &GroundResolvedInverse,
    exc: &ExcitationOperator,
) -> Vec<EffectiveLindblad> {
    let b = resolved(exc, inv);
    jumps.channels.iter().map(|ch| EffectiveLindblad { label: ch.label.clone(), matrix: &ch.matrix * &b }).collect()
}

/// Density matrix over the ground manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundDensity {
    pub matrix: CMat,
    pub time: f64,
}

impl GroundDensity {
    pub fn new(matrix: CMat, time: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensity("not square".into()));
        }
        let tr = trace(&matrix);
        if (tr - 1.0).norm() > 1e-9 {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let defect = hermitian_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::InvalidDensity(format!("Hermiticity defect {defect:e}")));
        }
        let lo = min_eigenvalue(&matrix);
        if lo < -1e-9 {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {lo:e}")));
        }
        Ok(Self { matrix, time })
    }

    /// Pure population in ground state `g`.
    pub fn pure(n: usize, g: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        m[(g, g)] = c(1.0, 0.0);
        Self { matrix: m, time: 0.0 }
    }
}

/// Lindblad generator `-i[H, rho] + sum_k (L rho L^dagger - {L^dagger L, rho} / 2)`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub hamiltonian: CMat,
    pub jumps: Vec<CMat>,
    // -i H - K / 2 with K = sum L^dagger L
    drift: CMat,
}

impl Liouvillian {
    pub fn new(hamiltonian: CMat, jumps: Vec<CMat>) -> Self {
        let n = hamiltonian.nrows();
        let mut k = CMat::zeros(n, n);
        for l in &jumps {
            k += l.adjoint() * l;
        }
        let drift = &hamiltonian * (-I) - k * c(0.5, 0.0);
        Self { hamiltonian, jumps, drift }
    }

    pub fn effective(h: &EffectiveHamiltonian, lindblads: &[EffectiveLindblad]) -> Self {
        Self::new(h.matrix.clone(), lindblads.iter().map(|l| l.matrix.clone()).collect())
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = &self.drift * rho;
        out += out.adjoint();
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }

    /// Norm bound used for the step-size guard, `2 |H|_F + 2 sum |L|_F^2`.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.hamiltonian.norm() + 2.0 * self.jumps.iter().map(|l| l.norm_squared()).sum::<f64>()
    }

    /// Matrix of the generator on column-stacked `vec(rho)`.
    pub fn superoperator(&self) -> CMat {
        let n = self.dim();
        let id = CMat::identity(n, n);
        let mut s = id.kronecker(&self.drift) + self.drift.conjugate().kronecker(&id);
        for l in &self.jumps {
            s += l.conjugate().kronecker(l);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Fixed-step classical Runge-Kutta.
    Rk4,
    /// Dense exponential of the superoperator (small ground manifolds only).
    Exact,
}

/// Piece of a piecewise-constant drive.
#[derive(Debug, Clone)]
pub struct Segment {
    pub duration: f64,
    pub generator: Liouvillian,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
}

impl Trajectory {
    pub fn last(&self) -> &CMat {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn rk4_step(gen: &Liouvillian, rho: &CMat, dt: f64) -> CMat {
    let h = C64::from(dt);
    let half = C64::from(0.5 * dt);
    let k1 = gen.apply(rho);
    let k2 = gen.apply(&(rho + &k1 * half));
    let k3 = gen.apply(&(rho + &k2 * half));
    let k4 = gen.apply(&(rho + &k3 * h));
    rho + (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * (h / 6.0)
}

fn unvec(v: &CVec, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

/// Propagate through consecutive segments with step `dt`, recording every
/// step. Each segment is split into an integer number of equal steps no
/// longer than `dt`.
pub fn evolve_segments(
    rho0: &GroundDensity,
    segments: &[Segment],
    dt: f64,
    integrator: Integrator,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidSpec(format!("time step {dt} must be positive")));
    }
    let mut times = vec![rho0.time];
    let mut states = vec![rho0.matrix.clone()];
    let mut t = rho0.time;
    let mut rho = rho0.matrix.clone();
    for seg in segments {
        if seg.duration <= 0.0 {
            continue;
        }
        let product = dt * seg.generator.norm_bound();
        if product >= 0.1 {
            return Err(Error::StepTooLarge { product });
        }
        let steps = (seg.duration / dt - 1e-9).ceil().max(1.0) as usize;
        let h = seg.duration / steps as f64;
        let n = seg.generator.dim();
        let propagator = match integrator {
            Integrator::Exact => {
                if n > EXACT_MAX_GROUND {
                    return Err(Error::TooLarge { dim: n, limit: EXACT_MAX_GROUND });
                }
                Some((seg.generator.superoperator() * C64::from(h)).exp())
            }
            Integrator::Rk4 => None,
        };
        debug!("segment: {steps} steps of {h}");
        let t0 = t;
        for s in 1..=steps {
            rho = match &propagator {
                Some(p) => unvec(&(p * CVec::from_column_slice(rho.as_slice())), n),
                None => rk4_step(&seg.generator, &rho, h),
            };
            t = t0 + s as f64 * h;
            times.push(t);
            states.push(rho.clone());
        }
    }
    Ok(Trajectory { times, states })
}

/// Propagate under a constant generator over `[rho0.time, rho0.time + span]`.
pub fn evolve(
    rho0: &GroundDensity,
    generator: &Liouvillian,
    span: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<Trajectory> {
    evolve_segments(rho0, &[Segment { duration: span, generator: generator.clone() }], dt, integrator)
}

/// Effective ground-manifold generator for a constant coherent drive. The
/// inverse is taken at the drive frequency for every initial ground energy.
pub fn effective_generator(system: &PreparedSystem, field: &InputField) -> Result<Liouvillian> {
    let inv = system.inverse(field.omega)?;
    let exc = system.excitation(field)?;
    let h = build_effective_hamiltonian(&exc, &inv, &system.ground_energies);
    let ls = build_effective_lindblads(&system.jumps, &inv, &exc);
    Ok(Liouvillian::effective(&h, &ls))
}
