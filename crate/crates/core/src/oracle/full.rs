//! Lindblad dynamics on the full tensor-product space of all emitter levels,
//! with no elimination of excited states.

use num_complex::Complex64 as C64;

use crate::effective::{evolve, GroundDensity, Integrator, Liouvillian, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{c, cvec3, hermitian_eigen, lu_inverse, CMat, CVec};
use crate::media::{local_couplings, wavenumber, waveguide_amplitude, Direction, MemberKind};
use crate::model::{LevelKind, ManifoldBasis, SystemSpec, HcTerm};
use crate::scattering::{Drive, InputField};

/// Largest full Hilbert-space dimension accepted.
pub const FULL_DIM_LIMIT: usize = 4096;

/// Largest dimension for which the dense steady-state solve is attempted.
pub const STEADY_DIM_LIMIT: usize = 64;

/// Full space: mixed-radix product of every emitter's levels, emitter 0 most
/// significant. Carries the rotating-frame Hamiltonian and jump operators.
#[derive(Debug, Clone)]
pub struct FullStateSpace {
    pub dims: Vec<usize>,
    pub dim: usize,
    pub hamiltonian: CMat,
    pub jumps: Vec<(String, CMat)>,
}

impl FullStateSpace {
    /// Index of the product state with local levels `levels`.
    pub fn index(&self, levels: &[usize]) -> usize {
        levels.iter().zip(&self.dims).fold(0, |acc, (&l, &d)| acc * d + l)
    }

    /// `op` acting on emitter `j` only.
    pub fn lift(&self, j: usize, op: &CMat) -> CMat {
        let mut out = CMat::identity(1, 1);
        for (k, &d) in self.dims.iter().enumerate() {
            let factor = if k == j { op.clone() } else { CMat::identity(d, d) };
            out = out.kronecker(&factor);
        }
        out
    }

    pub fn liouvillian(&self) -> Liouvillian {
        Liouvillian::new(self.hamiltonian.clone(), self.jumps.iter().map(|(_, l)| l.clone()).collect())
    }

    pub fn jump(&self, label: &str) -> Option<&CMat> {
        self.jumps.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    /// Embed a ground-manifold density matrix.
    pub fn embed_ground(&self, basis: &ManifoldBasis, rho: &CMat) -> CMat {
        let idx: Vec<usize> = basis.ground_states.iter().map(|cfg| self.index(cfg)).collect();
        let mut out = CMat::zeros(self.dim, self.dim);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                out[(ia, ib)] = rho[(a, b)];
            }
        }
        out
    }

    /// Block of a full density matrix on the collective ground states.
    pub fn ground_block(&self, basis: &ManifoldBasis, rho: &CMat) -> CMat {
        let idx: Vec<usize> = basis.ground_states.iter().map(|cfg| self.index(cfg)).collect();
        CMat::from_fn(idx.len(), idx.len(), |a, b| rho[(idx[a], idx[b])])
    }
}

fn transition_op(n: usize, upper: usize, lower: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(upper, lower)] = c(1.0, 0.0);
    m
}

/// Build the full space for a coherent drive, in the frame rotating at the
/// drive frequency.
pub fn full_state_space(spec: &SystemSpec, field: &InputField) -> Result<FullStateSpace> {
    spec.validate()?;
    let dims: Vec<usize> = spec.emitters.iter().map(|e| e.levels.len()).collect();
    let dim: usize = dims.iter().product();
    if dim > FULL_DIM_LIMIT {
        return Err(Error::TooLarge { dim, limit: FULL_DIM_LIMIT });
    }
    let mut space = FullStateSpace { dims: dims.clone(), dim, hamiltonian: CMat::zeros(dim, dim), jumps: Vec::new() };

    let mut h = CMat::zeros(dim, dim);
    for (j, em) in spec.emitters.iter().enumerate() {
        let mut local = CMat::zeros(dims[j], dims[j]);
        for (l, lev) in em.levels.iter().enumerate() {
            let shift = if lev.kind == LevelKind::Excited { field.omega } else { 0.0 };
            local[(l, l)] = C64::from(lev.energy - shift);
        }
        h += space.lift(j, &local);
    }
    let level = |name: &str, label: &str| -> Result<(usize, usize)> {
        let j = spec.emitter_index(name).ok_or_else(|| Error::InvalidSpec(format!("unknown emitter '{name}'")))?;
        let l = spec.emitters[j]
            .level_index(label)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown level '{label}'")))?;
        Ok((j, l))
    };
    for term in &spec.hc_excited {
        match term {
            HcTerm::Local { emitter, row, col, value } => {
                let (j, r) = level(emitter, row)?;
                let (_, cl) = level(emitter, col)?;
                h += space.lift(j, &transition_op(dims[j], r, cl)) * *value;
            }
            HcTerm::Exchange { emitter_a, excited_a, ground_a, emitter_b, excited_b, ground_b, value } => {
                let (a, ea) = level(emitter_a, excited_a)?;
                let (_, ga) = level(emitter_a, ground_a)?;
                let (b, eb) = level(emitter_b, excited_b)?;
                let (_, gb) = level(emitter_b, ground_b)?;
                let op = space.lift(a, &transition_op(dims[a], ea, ga)) * space.lift(b, &transition_op(dims[b], gb, eb));
                h += &op * *value + op.adjoint() * value.conj();
            }
        }
    }

    // lowering operator of every declared transition
    let couplings = local_couplings(spec, 0.0)?;
    let lowering: Vec<CMat> = couplings
        .transitions
        .iter()
        .map(|lt| {
            let em = &spec.emitters[lt.emitter];
            let tr = &em.transitions[lt.transition];
            let e = em.level_index(&tr.excited).expect("validated");
            let g = em.level_index(&tr.ground).expect("validated");
            space.lift(lt.emitter, &transition_op(dims[lt.emitter], g, e))
        })
        .collect();
    let n_tr = lowering.len();

    // field-mediated exchange between different emitters
    for member in &couplings.members {
        for a in 0..n_tr {
            for b in 0..n_tr {
                if couplings.transitions[a].emitter != couplings.transitions[b].emitter {
                    let om = member.shift[(a, b)];
                    if om != c(0.0, 0.0) {
                        h -= lowering[a].adjoint() * &lowering[b] * om;
                    }
                }
            }
        }
    }

    // jump operators
    let k0 = wavenumber(spec.carrier_frequency, 0.0);
    let mut jumps = Vec::new();
    for member in &couplings.members {
        match &member.kind {
            MemberKind::Waveguide { right, left } => {
                for (dir, label) in [(Direction::Right, right), (Direction::Left, left)] {
                    let mut l = CMat::zeros(dim, dim);
                    for (a, lt) in couplings.transitions.iter().enumerate() {
                        let em = &spec.emitters[lt.emitter];
                        let rate = em.transitions[lt.transition].rate(&member.id);
                        if rate > 0.0 {
                            l += &lowering[a] * waveguide_amplitude(rate, em.position[0], k0, dir);
                        }
                    }
                    jumps.push((label.clone(), l));
                }
            }
            MemberKind::Freespace | MemberKind::Loss => {
                let (values, vectors) = hermitian_eigen(&member.gram);
                for (k, &lam) in values.iter().enumerate() {
                    if lam < -1e-10 {
                        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lam });
                    }
                    if lam <= 1e-12 {
                        continue;
                    }
                    let mut l = CMat::zeros(dim, dim);
                    for a in 0..n_tr {
                        l += &lowering[a] * (vectors[(a, k)].conj() * lam.sqrt());
                    }
                    jumps.push((format!("{}:{}", member.id, jumps.len()), l));
                }
            }
        }
    }

    // coherent drive
    match &field.drive {
        Drive::Channels { amplitudes } => {
            for (label, &eps) in amplitudes {
                let l = jumps
                    .iter()
                    .find(|(name, _)| name == label)
                    .map(|(_, l)| l)
                    .ok_or_else(|| Error::InvalidSpec(format!("drive channel '{label}' is not a waveguide channel")))?;
                let term = l.adjoint() * eps;
                h -= &term + term.adjoint();
            }
        }
        Drive::Local { .. } | Drive::PlaneWave { .. } => {
            for (a, lt) in couplings.transitions.iter().enumerate() {
                let em = &spec.emitters[lt.emitter];
                let tr = &em.transitions[lt.transition];
                let e_loc = match &field.drive {
                    Drive::Local { fields } => cvec3(*fields.get(lt.emitter).ok_or_else(|| {
                        Error::InvalidSpec("local drive needs one field per emitter".into())
                    })?),
                    other => other.field_at(em.position),
                };
                let amp = cvec3(tr.orientation).dot(&e_loc) * tr.total_rate().sqrt();
                let term = lowering[a].adjoint() * amp;
                h -= &term + term.adjoint();
            }
        }
    }

    space.hamiltonian = h;
    space.jumps = jumps;
    Ok(space)
}

/// Evolve a full density matrix under a constant drive.
pub fn full_lindblad_evolve(
    spec: &SystemSpec,
    field: &InputField,
    rho0: &CMat,
    span: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<(FullStateSpace, Trajectory)> {
    let space = full_state_space(spec, field)?;
    if rho0.nrows() != space.dim {
        return Err(Error::InvalidDensity(format!("expected dimension {}, got {}", space.dim, rho0.nrows())));
    }
    let start = GroundDensity::new(rho0.clone(), 0.0)?;
    let traj = evolve(&start, &space.liouvillian(), span, dt, integrator)?;
    Ok((space, traj))
}

/// Null vector of the dense Liouvillian with unit trace.
pub fn steady_state(space: &FullStateSpace) -> Result<CMat> {
    let n = space.dim;
    if n > STEADY_DIM_LIMIT {
        return Err(Error::TooLarge { dim: n, limit: STEADY_DIM_LIMIT });
    }
    let gen = space.liouvillian();
    let s = gen.superoperator();
    let mut m = s.clone();
    let mut rhs = CVec::zeros(n * n);
    for col in 0..n * n {
        m[(0, col)] = c(0.0, 0.0);
    }
    for i in 0..n {
        m[(0, i + i * n)] = c(1.0, 0.0);
    }
    rhs[0] = c(1.0, 0.0);
    let (inv, _) = lu_inverse(&m).ok_or(Error::NoSteadyState { residual: f64::INFINITY })?;
    let v = inv * rhs;
    let residual = (&s * &v).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    if residual.is_nan() || residual >= 1e-10 {
        return Err(Error::NoSteadyState { residual });
    }
    let rho = CMat::from_column_slice(n, n, v.as_slice());
    Ok((&rho + rho.adjoint()) * c(0.5, 0.0))
}

/// `<b_out> = eps + i <L>` in a waveguide channel at steady state.
pub fn steady_output_amplitude(spec: &SystemSpec, field: &InputField, channel: &str) -> Result<C64> {
    let space = full_state_space(spec, field)?;
    let rho = steady_state(&space)?;
    let l = space
        .jump(channel)
        .ok_or_else(|| Error::InvalidSpec(format!("'{channel}' is not a waveguide channel")))?;
    let expect: C64 = (0..space.dim).map(|i| (l * &rho)[(i, i)]).sum();
    Ok(field.drive.channel_amplitude(channel) + crate::linalg::I * expect)
}

/// Zero-drive limit from amplitudes at two drive strengths, assuming a
/// quadratic leading correction.
pub fn extrapolate_zero_drive(d1: f64, a1: C64, d2: f64, a2: C64) -> C64 {
    let (s1, s2) = (d1 * d1, d2 * d2);
    (a2 * s1 - a1 * s2) / (s1 - s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{trace, trace_distance};
    use crate::media::GreenMediumSpec;
    use crate::model::EmitterSpec;

    fn loss_emitter(detuning: f64) -> SystemSpec {
        let mut em = EmitterSpec::two_level("a", 0.0, "loss", 1.0);
        em.levels[1].energy = detuning;
        SystemSpec::new(vec![em], GreenMediumSpec::loss("loss"))
    }

    fn local(a: f64) -> Drive {
        Drive::Local { fields: vec![[c(0.0, 0.0), c(0.0, 0.0), c(a, 0.0)]] }
    }

    #[test]
    fn free_decay_is_exponential() {
        let spec = loss_emitter(0.0);
        let field = InputField { omega: 0.0, drive: local(0.0) };
        let mut rho0 = CMat::zeros(2, 2);
        rho0[(1, 1)] = c(1.0, 0.0);
        let (_, traj) = full_lindblad_evolve(&spec, &field, &rho0, 5.0, 0.01, Integrator::Rk4).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            assert!((rho[(1, 1)].re - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn weak_drive_steady_population_is_lorentzian() {
        for delta in [0.0, 0.8] {
            let spec = loss_emitter(0.0);
            // s = 2 |A|^2 / (Gamma^2/4 + Delta^2) = 1e-3
            let a = (1e-3 * (0.25 + delta * delta) / 2.0_f64).sqrt();
            let space = full_state_space(&spec, &InputField { omega: delta, drive: local(a) }).unwrap();
            let rho = steady_state(&space).unwrap();
            let lor = a * a / (0.25 + delta * delta);
            assert!((rho[(1, 1)].re - lor).abs() < 0.01 * lor);
            assert!((trace(&rho) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn lossless_resonant_transmission_vanishes_with_drive() {
        let spec = SystemSpec::new(vec![EmitterSpec::two_level("a", 0.0, "wg", 1.0)], GreenMediumSpec::waveguide("wg"));
        let mut last = f64::INFINITY;
        for d in [1e-2, 1e-3, 1e-4] {
            let t = steady_output_amplitude(&spec, &InputField { omega: 0.0, drive: Drive::right(d) }, "right").unwrap() / d;
            assert!(t.norm() < last);
            last = t.norm();
        }
        assert!(last < 1e-6);
        let t = steady_output_amplitude(&spec, &InputField { omega: 1e5, drive: Drive::right(1e-3) }, "right").unwrap();
        assert!((t / 1e-3 - 1.0).norm() < 1e-4);
    }

    #[test]
    fn dt_halving_converges() {
        let spec = loss_emitter(0.4);
        let field = InputField { omega: 0.0, drive: local(0.3) };
        let mut rho0 = CMat::zeros(2, 2);
        rho0[(0, 0)] = c(1.0, 0.0);
        let (_, a) = full_lindblad_evolve(&spec, &field, &rho0, 10.0, 0.02, Integrator::Rk4).unwrap();
        let (_, b) = full_lindblad_evolve(&spec, &field, &rho0, 10.0, 0.01, Integrator::Rk4).unwrap();
        assert!(trace_distance(a.last(), b.last()) < 1e-8);
    }

    #[test]
    fn too_large_rejected() {
        let ems: Vec<EmitterSpec> = (0..13).map(|j| EmitterSpec::two_level(&format!("e{j}"), j as f64, "wg", 1.0)).collect();
        let spec = SystemSpec::new(ems, GreenMediumSpec::waveguide("wg"));
        let r = full_state_space(&spec, &InputField { omega: 0.0, drive: Drive::right(0.0) });
        assert!(matches!(r, Err(Error::TooLarge { dim: 8192, .. })));
    }
}
