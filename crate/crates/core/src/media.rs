//! Medium models: the dyadic Green response, collective decay and shift
//! matrices, and the factorization of the decay into jump channels.
//!
//! Green tensors are normalized so that a unit-rate dipole `d` at `r` decays
//! at `2 d^T Im G(r, r) d^*`, i.e. `Im G(r, r) = 1/2` on the coupled
//! polarizations. Collective rates and shifts between transitions `a`, `b`
//! then read `Gamma_ab = 2 d_a^T Im G d_b^*` and `Omega_ab = d_a^T Re G d_b^*`.

use std::collections::HashSet;
use std::f64::consts::TAU;

use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bilinear, c, cvec3, hermitian_eigen, vec3, CMat, CMat3, CVec3, I};
use crate::model::{collective_dipole, CollectiveTransition, ManifoldBasis, SystemSpec};

/// Pairs closer than this (in wavelengths) are outside the validity of the
/// rotating-wave dipole-dipole interaction.
pub const RWA_MIN_SEPARATION: f64 = 0.1;

/// Eigenvalues of a decay Gram matrix below this are dropped from the jump
/// basis.
pub const JUMP_EIGEN_CUTOFF: f64 = 1e-12;

/// Most negative eigenvalue tolerated before a decay matrix is rejected.
pub const PSD_TOLERANCE: f64 = 1e-10;

fn default_right() -> String {
    "right".into()
}

fn default_left() -> String {
    "left".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GreenMediumSpec {
    /// Symmetric single-mode waveguide along the x axis. Transitions couple
    /// to the guided mode as scalars: the declared rate is the total emission
    /// into the guide, split evenly between the two propagation directions.
    Waveguide1d {
        id: String,
        #[serde(default = "default_right")]
        right: String,
        #[serde(default = "default_left")]
        left: String,
    },
    /// Homogeneous free space with carrier wavenumber `2 pi`.
    Freespace3d { id: String },
    /// Independent isotropic reservoir per emitter (non-guided loss).
    Loss { id: String },
    Composite { members: Vec<GreenMediumSpec> },
}

impl GreenMediumSpec {
    pub fn waveguide(id: &str) -> Self {
        Self::Waveguide1d { id: id.into(), right: default_right(), left: default_left() }
    }

    pub fn freespace(id: &str) -> Self {
        Self::Freespace3d { id: id.into() }
    }

    pub fn loss(id: &str) -> Self {
        Self::Loss { id: id.into() }
    }

    /// Medium id used as the key in transition couplings (empty for a
    /// composite).
    pub fn id(&self) -> &str {
        match self {
            Self::Waveguide1d { id, .. } | Self::Freespace3d { id } | Self::Loss { id } => id,
            Self::Composite { .. } => "",
        }
    }

    /// Flattened list of non-composite members.
    pub fn members(&self) -> Vec<&GreenMediumSpec> {
        match self {
            Self::Composite { members } => members.iter().flat_map(|m| m.members()).collect(),
            other => vec![other],
        }
    }

    pub fn has_waveguide(&self) -> bool {
        self.members().iter().any(|m| matches!(m, Self::Waveguide1d { .. }))
    }

    pub fn has_freespace(&self) -> bool {
        self.members().iter().any(|m| matches!(m, Self::Freespace3d { .. }))
    }

    /// Members and channel names that are visible as ids.
    fn names(&self) -> Vec<String> {
        match self {
            Self::Waveguide1d { id, right, left } => vec![id.clone(), right.clone(), left.clone()],
            Self::Freespace3d { id } | Self::Loss { id } => vec![id.clone()],
            Self::Composite { members } => members.iter().flat_map(|m| m.names()).collect(),
        }
    }

    pub(crate) fn issues(&self, path: &str) -> Vec<crate::model::SpecIssue> {
        use crate::model::SpecIssue;
        let mut out = Vec::new();
        if let Self::Composite { members } = self {
            if members.is_empty() {
                out.push(SpecIssue { path: format!("{path}.members"), reason: "empty composite".into() });
            }
            for (k, m) in members.iter().enumerate() {
                out.extend(m.issues(&format!("{path}.members[{k}]")));
            }
        }
        if let Self::Waveguide1d { id, right, left } = self {
            if right == left || id == right || id == left {
                out.push(SpecIssue { path: path.into(), reason: "waveguide id and channel names must differ".into() });
            }
        }
        if path == "medium" || !path.contains("members") {
            let mut seen = HashSet::new();
            for name in self.names() {
                if name.is_empty() {
                    out.push(SpecIssue { path: path.into(), reason: "empty medium or channel id".into() });
                } else if !seen.insert(name.clone()) && matches!(self, Self::Composite { .. }) {
                    out.push(SpecIssue { path: path.into(), reason: format!("duplicate channel id '{name}'") });
                }
            }
        }
        out
    }
}

/// Propagation wavenumber at detuning `omega` from the carrier.
pub fn wavenumber(carrier: Option<f64>, omega: f64) -> f64 {
    match carrier {
        Some(wc) => TAU * (1.0 + omega / wc),
        None => TAU,
    }
}

/// Normalized scalar response of the symmetric waveguide,
/// `(i/2) exp(i k |dx|)`.
pub fn waveguide_response(k: f64, dx: f64) -> C64 {
    0.5 * I * C64::from_polar(1.0, k * dx.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

/// Emission amplitude of a transition with guided rate `rate` at axial
/// position `x` into one propagation direction. Right movers carry
/// `exp(-i k x)`, left movers `exp(+i k x)`.
pub fn waveguide_amplitude(rate: f64, x: f64, k: f64, dir: Direction) -> C64 {
    let phase = match dir {
        Direction::Right => -k * x,
        Direction::Left => k * x,
    };
    C64::from_polar((0.5 * rate).sqrt(), phase)
}

/// Closed-form free-space dyadic (near, intermediate and far field).
pub fn freespace_dyadic(k: f64, r: [f64; 3], rp: [f64; 3]) -> Result<CMat3> {
    let d = nalgebra::Vector3::new(r[0] - rp[0], r[1] - rp[1], r[2] - rp[2]);
    let dist = d.norm();
    if dist < 1e-12 {
        return Err(Error::SingularSelfTerm);
    }
    let u = d / dist;
    let kr = k * dist;
    let kr2 = kr * kr;
    let pref = 0.75 * C64::from_polar(1.0, kr) / kr;
    let a = c(1.0, 0.0) + (I * kr - 1.0) / kr2;
    let b = (c(3.0, 0.0) - 3.0 * I * kr - kr2) / kr2;
    let mut g = CMat3::zeros();
    for p in 0..3 {
        for q in 0..3 {
            let delta = if p == q { 1.0 } else { 0.0 };
            g[(p, q)] = pref * (a * delta + b * u[p] * u[q]);
        }
    }
    Ok(g)
}

/// Dyadic Green response between two points at detuning `omega`.
///
/// The waveguide response is a scalar; it is returned as a multiple of the
/// identity. The loss reservoir only responds at coincident points.
pub fn green_dyadic(
    medium: &GreenMediumSpec,
    r: [f64; 3],
    rp: [f64; 3],
    omega: f64,
    carrier: Option<f64>,
) -> Result<CMat3> {
    let k = wavenumber(carrier, omega);
    match medium {
        GreenMediumSpec::Waveguide1d { .. } => Ok(CMat3::identity() * waveguide_response(k, r[0] - rp[0])),
        GreenMediumSpec::Freespace3d { .. } => freespace_dyadic(k, r, rp),
        GreenMediumSpec::Loss { .. } => {
            if r == rp {
                Ok(CMat3::identity() * (0.5 * I))
            } else {
                Ok(CMat3::zeros())
            }
        }
        GreenMediumSpec::Composite { members } => {
            let mut acc = CMat3::zeros();
            for m in members {
                acc += green_dyadic(m, r, rp, omega, carrier)?;
            }
            Ok(acc)
        }
    }
}

/// One end of a pair coupling: the emitter, its position, and the dipole
/// `sqrt(rate) * orientation` towards the member being evaluated.
pub(crate) struct DipoleSite {
    pub emitter: usize,
    pub position: [f64; 3],
    pub dipole: CVec3,
    pub rate: f64,
}

/// `(Gamma_ab, Omega_ab)` contributed by one member.
pub(crate) fn member_pair(
    member: &GreenMediumSpec,
    a: &DipoleSite,
    b: &DipoleSite,
    omega: f64,
    carrier: Option<f64>,
) -> Result<(C64, C64)> {
    let same = a.emitter == b.emitter;
    let zero = c(0.0, 0.0);
    match member {
        GreenMediumSpec::Waveguide1d { .. } => {
            let amp = (a.rate * b.rate).sqrt();
            if amp == 0.0 {
                return Ok((zero, zero));
            }
            let g = waveguide_response(wavenumber(carrier, omega), a.position[0] - b.position[0]);
            let shift = if same { zero } else { C64::from(amp * g.re) };
            Ok((C64::from(2.0 * amp * g.im), shift))
        }
        GreenMediumSpec::Freespace3d { .. } | GreenMediumSpec::Loss { .. } => {
            let db = b.dipole.map(|z| z.conj());
            if same {
                return Ok((a.dipole.dot(&db), zero));
            }
            if matches!(member, GreenMediumSpec::Loss { .. }) || a.rate == 0.0 || b.rate == 0.0 {
                return Ok((zero, zero));
            }
            let g = freespace_dyadic(wavenumber(carrier, omega), a.position, b.position)?;
            let im = g.map(|z| C64::from(z.im));
            let re = g.map(|z| C64::from(z.re));
            Ok((2.0 * bilinear(&a.dipole, &im, &db), bilinear(&a.dipole, &re, &db)))
        }
        GreenMediumSpec::Composite { .. } => unreachable!("members are flattened"),
    }
}

fn warn_close_pairs(spec: &SystemSpec) {
    if !spec.medium.has_freespace() {
        return;
    }
    for a in 0..spec.emitters.len() {
        for b in a + 1..spec.emitters.len() {
            let d = vec3(spec.emitters[a].position) - vec3(spec.emitters[b].position);
            if d.norm() < RWA_MIN_SEPARATION {
                warn!(
                    "emitters '{}' and '{}' are {:.3} wavelengths apart; rotating-wave dipole-dipole coupling is unreliable below {}",
                    spec.emitters[a].id,
                    spec.emitters[b].id,
                    d.norm(),
                    RWA_MIN_SEPARATION
                );
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemberKind {
    Waveguide { right: String, left: String },
    Freespace,
    Loss,
}

impl MemberKind {
    fn of(m: &GreenMediumSpec) -> Self {
        match m {
            GreenMediumSpec::Waveguide1d { right, left, .. } => Self::Waveguide { right: right.clone(), left: left.clone() },
            GreenMediumSpec::Freespace3d { .. } => Self::Freespace,
            GreenMediumSpec::Loss { .. } => Self::Loss,
            GreenMediumSpec::Composite { .. } => unreachable!("members are flattened"),
        }
    }
}

/// Contribution of one medium member, over collective transitions.
#[derive(Debug, Clone)]
pub struct MemberDecay {
    pub id: String,
    pub kind: MemberKind,
    /// `Gamma` between collective transitions (Gram structure, PSD).
    pub gram: CMat,
    /// Reduced to the excited manifold.
    pub matrix: CMat,
    pub shift_gram: CMat,
}

/// Collective decay matrix.
#[derive(Debug, Clone)]
pub struct DecayMatrix {
    pub omega_ref: f64,
    pub transitions: Vec<CollectiveTransition>,
    /// `Gamma^{ee'}_{g'g}` indexed by collective transitions `(e, g)`.
    pub gram: CMat,
    /// `sum_g Gamma^{ee'}_{gg}` over the excited manifold.
    pub matrix: CMat,
    pub members: Vec<MemberDecay>,
}

/// Collective field-mediated shifts; single-emitter (Lamb) terms are zero.
#[derive(Debug, Clone)]
pub struct ShiftMatrix {
    pub gram: CMat,
    pub matrix: CMat,
}

/// Sum gram entries over transition pairs that end in the same ground state.
pub fn reduce_to_excited(gram: &CMat, transitions: &[CollectiveTransition], n_excited: usize) -> CMat {
    let mut m = CMat::zeros(n_excited, n_excited);
    for (a, ta) in transitions.iter().enumerate() {
        for (b, tb) in transitions.iter().enumerate() {
            if ta.ground == tb.ground {
                m[(ta.excited, tb.excited)] += gram[(a, b)];
            }
        }
    }
    m
}

fn collective_couplings(spec: &SystemSpec, basis: &ManifoldBasis, omega_ref: f64) -> Result<(DecayMatrix, ShiftMatrix)> {
    warn_close_pairs(spec);
    let trs = basis.transitions().to_vec();
    let n = trs.len();
    let ne = basis.n_excited();
    let mut members = Vec::new();
    let mut gram = CMat::zeros(n, n);
    let mut shift = CMat::zeros(n, n);
    for member in spec.medium.members() {
        let id = member.id();
        let sites: Vec<DipoleSite> = trs
            .iter()
            .map(|t| DipoleSite {
                emitter: t.emitter,
                position: spec.emitters[t.emitter].position,
                dipole: collective_dipole(spec, basis, t.excited, t.ground, t.emitter, id),
                rate: spec.emitters[t.emitter].transitions[t.transition].rate(id),
            })
            .collect();
        let mut mg = CMat::zeros(n, n);
        let mut ms = CMat::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let (gm, om) = member_pair(member, &sites[a], &sites[b], omega_ref, spec.carrier_frequency)?;
                mg[(a, b)] = gm;
                mg[(b, a)] = gm.conj();
                ms[(a, b)] = om;
                ms[(b, a)] = om.conj();
            }
        }
        gram += &mg;
        shift += &ms;
        members.push(MemberDecay {
            id: id.to_string(),
            kind: MemberKind::of(member),
            matrix: reduce_to_excited(&mg, &trs, ne),
            gram: mg,
            shift_gram: ms,
        });
    }
    let decay = DecayMatrix { omega_ref, matrix: reduce_to_excited(&gram, &trs, ne), gram, transitions: trs.clone(), members };
    let shift = ShiftMatrix { matrix: reduce_to_excited(&shift, &trs, ne), gram: shift };
    Ok((decay, shift))
}

/// Collective decay matrix at reference detuning `omega_ref`.
pub fn decay_matrix(spec: &SystemSpec, basis: &ManifoldBasis, omega_ref: f64) -> Result<DecayMatrix> {
    collective_couplings(spec, basis, omega_ref).map(|(d, _)| d)
}

/// Collective shift matrix at reference detuning `omega_ref`.
pub fn shift_matrix(spec: &SystemSpec, basis: &ManifoldBasis, omega_ref: f64) -> Result<ShiftMatrix> {
    collective_couplings(spec, basis, omega_ref).map(|(_, s)| s)
}

/// Both matrices from one pass over the transition pairs.
pub fn decay_and_shift(spec: &SystemSpec, basis: &ManifoldBasis, omega_ref: f64) -> Result<(DecayMatrix, ShiftMatrix)> {
    collective_couplings(spec, basis, omega_ref)
}

/// A jump operator mapping the excited manifold to the ground manifold
/// (`n_ground x n_excited`).
#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub label: String,
    pub matrix: CMat,
}

#[derive(Debug, Clone)]
pub struct JumpBasis {
    pub channels: Vec<JumpChannel>,
    pub n_ground: usize,
    pub n_excited: usize,
}

impl JumpBasis {
    /// `sum_k c_k^dagger c_k`.
    pub fn reconstruct(&self) -> CMat {
        let mut acc = CMat::zeros(self.n_excited, self.n_excited);
        for ch in &self.channels {
            acc += ch.matrix.adjoint() * &ch.matrix;
        }
        acc
    }

    pub fn channel(&self, label: &str) -> Option<&JumpChannel> {
        self.channels.iter().find(|c| c.label == label)
    }
}

/// Eigen-channels of a PSD Gram matrix over collective transitions.
pub fn jump_channels_from_gram(
    gram: &CMat,
    transitions: &[CollectiveTransition],
    n_ground: usize,
    n_excited: usize,
    label: &str,
) -> Result<Vec<JumpChannel>> {
    let (values, vectors) = hermitian_eigen(gram);
    if let Some(&lo) = values.first() {
        if lo < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lo });
        }
    }
    let mut out = Vec::new();
    for (k, &lambda) in values.iter().enumerate() {
        if lambda < JUMP_EIGEN_CUTOFF {
            continue;
        }
        let s = lambda.sqrt();
        let mut m = CMat::zeros(n_ground, n_excited);
        for (a, t) in transitions.iter().enumerate() {
            m[(t.ground, t.excited)] += vectors[(a, k)].conj() * s;
        }
        out.push(JumpChannel { label: format!("{label}:{}", out.len()), matrix: m });
    }
    Ok(out)
}

/// Factor the decay into jump channels: the two propagation directions for
/// waveguide members, eigen-channels of the Gram matrix for every other
/// member.
pub fn jump_basis(decay: &DecayMatrix, spec: &SystemSpec, basis: &ManifoldBasis) -> Result<JumpBasis> {
    let (ng, ne) = (basis.n_ground(), basis.n_excited());
    let mut channels = Vec::new();
    for member in &decay.members {
        match &member.kind {
            MemberKind::Waveguide { right, left } => {
                let k = wavenumber(spec.carrier_frequency, decay.omega_ref);
                for (dir, label) in [(Direction::Right, right), (Direction::Left, left)] {
                    let mut m = CMat::zeros(ng, ne);
                    for t in &decay.transitions {
                        let em = &spec.emitters[t.emitter];
                        let rate = em.transitions[t.transition].rate(&member.id);
                        m[(t.ground, t.excited)] += waveguide_amplitude(rate, em.position[0], k, dir);
                    }
                    channels.push(JumpChannel { label: label.clone(), matrix: m });
                }
            }
            MemberKind::Freespace | MemberKind::Loss => {
                channels.extend(jump_channels_from_gram(&member.gram, &decay.transitions, ng, ne, &member.id)?);
            }
        }
    }
    Ok(JumpBasis { channels, n_ground: ng, n_excited: ne })
}

/// A declared transition of one emitter, independent of any collective
/// basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalTransition {
    pub emitter: usize,
    pub transition: usize,
}

#[derive(Debug, Clone)]
pub struct LocalMember {
    pub id: String,
    pub kind: MemberKind,
    pub gram: CMat,
    pub shift: CMat,
}

/// Decay and shift coefficients between single-emitter transitions, per
/// medium member. These are the coefficients of the collective operators
/// `sum Gamma_ab sigma_a^+ sigma_b^-` on the full emitter Hilbert space.
#[derive(Debug, Clone)]
pub struct LocalCouplings {
    pub transitions: Vec<LocalTransition>,
    pub members: Vec<LocalMember>,
}

pub fn local_couplings(spec: &SystemSpec, omega_ref: f64) -> Result<LocalCouplings> {
    let transitions: Vec<LocalTransition> = spec
        .emitters
        .iter()
        .enumerate()
        .flat_map(|(j, em)| (0..em.transitions.len()).map(move |t| LocalTransition { emitter: j, transition: t }))
        .collect();
    let n = transitions.len();
    let mut members = Vec::new();
    for member in spec.medium.members() {
        let id = member.id();
        let sites: Vec<DipoleSite> = transitions
            .iter()
            .map(|lt| {
                let em = &spec.emitters[lt.emitter];
                let tr = &em.transitions[lt.transition];
                DipoleSite {
                    emitter: lt.emitter,
                    position: em.position,
                    dipole: cvec3(tr.orientation) * C64::from(tr.rate(id).sqrt()),
                    rate: tr.rate(id),
                }
            })
            .collect();
        let mut gram = CMat::zeros(n, n);
        let mut shift = CMat::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let (gm, om) = member_pair(member, &sites[a], &sites[b], omega_ref, spec.carrier_frequency)?;
                gram[(a, b)] = gm;
                gram[(b, a)] = gm.conj();
                shift[(a, b)] = om;
                shift[(b, a)] = om.conj();
            }
        }
        members.push(LocalMember { id: id.to_string(), kind: MemberKind::of(member), gram, shift });
    }
    Ok(LocalCouplings { transitions, members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, min_eigenvalue};
    use crate::model::{build_manifolds, EmitterSpec, Level, Transition, X_HAT, Z_HAT};
    use std::f64::consts::PI;

    fn pair(sep: f64) -> SystemSpec {
        SystemSpec::new(
            vec![EmitterSpec::two_level("a", 0.0, "wg", 1.0), EmitterSpec::two_level("b", sep, "wg", 1.0)],
            GreenMediumSpec::waveguide("wg"),
        )
    }

    #[test]
    fn waveguide_phase_factors() {
        let wg = GreenMediumSpec::waveguide("wg");
        let g0 = green_dyadic(&wg, [0.3, 0.0, 0.0], [0.3, 0.0, 0.0], 0.0, None).unwrap();
        // normalized phase factor g / g(0)
        assert!((g0[(0, 0)] / (0.5 * I) - 1.0).norm() < 1e-15);
        let gh = green_dyadic(&wg, [0.5, 0.0, 0.0], [0.0, 0.0, 0.0], 0.0, None).unwrap();
        assert!((gh[(0, 0)] / (0.5 * I) + 1.0).norm() < 1e-14);
    }

    /// Im G of the waveguide from a discretized sum over +k and -k plane
    /// waves; only the axial separation enters.
    fn waveguide_mode_sum(dx: f64) -> f64 {
        // Im G(x, x') = (1/4) sum_{s = +-1} exp(i s k (x - x')), k on the light line
        let k = TAU;
        let terms: Vec<C64> = [1.0_f64, -1.0].iter().map(|s| C64::from_polar(0.25, s * k * dx)).collect();
        terms.iter().sum::<C64>().re
    }

    #[test]
    fn waveguide_decay_matches_mode_sum() {
        for sep in [0.0, 0.1, 0.25, 0.37, 0.5, 1.0, 1.9] {
            let spec = pair(sep);
            let b = build_manifolds(&spec).unwrap();
            let d = decay_matrix(&spec, &b, 0.0).unwrap();
            let expect = 2.0 * waveguide_mode_sum(sep);
            assert!((d.matrix[(0, 1)].re - expect).abs() < 1e-14, "sep {sep}");
            assert!((d.matrix[(0, 1)].re - (TAU * sep).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn decay_examples() {
        let spec = SystemSpec::new(vec![EmitterSpec::two_level("a", 0.0, "wg", 1.0)], GreenMediumSpec::waveguide("wg"));
        let b = build_manifolds(&spec).unwrap();
        let d = decay_matrix(&spec, &b, 0.0).unwrap();
        assert!((d.matrix[(0, 0)] - 1.0).norm() < 1e-15);

        let spec = pair(1.0);
        let b = build_manifolds(&spec).unwrap();
        let d = decay_matrix(&spec, &b, 0.0).unwrap();
        let (vals, _) = hermitian_eigen(&d.matrix);
        assert!((vals[0]).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);

        let spec = pair(0.25);
        let b = build_manifolds(&spec).unwrap();
        let d = decay_matrix(&spec, &b, 0.0).unwrap();
        assert!(d.matrix[(0, 1)].norm() < 1e-15);
        let (vals, _) = hermitian_eigen(&d.matrix);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
    }

    /// Principal-value Hilbert transform of `Im g(nu) = cos(2 pi nu dx) / 2`
    /// evaluated at `nu0 = 1`, by symmetric pairing around the pole.
    fn kramers_kronig_re(dx: f64) -> f64 {
        let im = |nu: f64| 0.5 * (TAU * nu * dx).cos();
        let cutoff = 4000.0;
        let n = 4_000_000usize;
        let h = cutoff / n as f64;
        // Simpson on u in (0, cutoff] of (f(nu0 + u) - f(nu0 - u)) / u; the
        // integrand is regular at u = 0 with limit 2 f'(nu0).
        let f = |u: f64| {
            if u == 0.0 {
                -2.0 * 0.5 * TAU * dx * (TAU * dx).sin()
            } else {
                (im(1.0 + u) - im(1.0 - u)) / u
            }
        };
        let mut s = f(0.0) + f(cutoff);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn shift_matches_kramers_kronig() {
        for sep in [0.25, 1.0] {
            let spec = pair(sep);
            let b = build_manifolds(&spec).unwrap();
            let s = shift_matrix(&spec, &b, 0.0).unwrap();
            let kk = kramers_kronig_re(sep);
            assert!((s.matrix[(0, 1)].re - kk).abs() < 2e-3, "sep {sep}: {} vs {kk}", s.matrix[(0, 1)].re);
            assert!(s.matrix[(0, 0)].norm() == 0.0 && s.matrix[(1, 1)].norm() == 0.0);
        }
        // lambda/4: maximal exchange -sqrt(G1 G2)/2, lambda: none
        let spec = pair(0.25);
        let b = build_manifolds(&spec).unwrap();
        let s = shift_matrix(&spec, &b, 0.0).unwrap();
        assert!((s.matrix[(0, 1)].re + 0.5).abs() < 1e-14);
        let spec = pair(1.0);
        let b = build_manifolds(&spec).unwrap();
        assert!(shift_matrix(&spec, &b, 0.0).unwrap().matrix[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn single_emitter_shift_is_zero() {
        let spec = SystemSpec::new(vec![EmitterSpec::two_level("a", 0.0, "fs", 1.0)], GreenMediumSpec::freespace("fs"));
        let b = build_manifolds(&spec).unwrap();
        assert_eq!(max_abs(&shift_matrix(&spec, &b, 0.0).unwrap().matrix), 0.0);
    }

    /// `Im G(R)` of free space from a numerical sum over plane-wave
    /// directions, `(3 / 16 pi) int dOmega (1 - k k^T) exp(i k.R)`.
    fn freespace_mode_sum(r: [f64; 3]) -> nalgebra::Matrix3<f64> {
        let (nt, np) = (400, 400);
        let mut acc = nalgebra::Matrix3::<f64>::zeros();
        // Gauss-Legendre would be nicer; midpoint in cos(theta) is enough here
        for it in 0..nt {
            let ct = -1.0 + (it as f64 + 0.5) * 2.0 / nt as f64;
            let st = (1.0 - ct * ct).sqrt();
            for ip in 0..np {
                let ph = (ip as f64 + 0.5) * TAU / np as f64;
                let kh = nalgebra::Vector3::new(st * ph.cos(), st * ph.sin(), ct);
                let phase = TAU * (kh[0] * r[0] + kh[1] * r[1] + kh[2] * r[2]);
                let proj = nalgebra::Matrix3::identity() - kh * kh.transpose();
                acc += proj * phase.cos();
            }
        }
        acc * (3.0 / (16.0 * PI)) * (2.0 / nt as f64) * (TAU / np as f64)
    }

    #[test]
    fn freespace_im_part_matches_mode_sum() {
        for r in [[0.3, 0.0, 0.0], [0.2, 0.4, -0.1], [1.3, 0.7, 0.2]] {
            let g = freespace_dyadic(TAU, r, [0.0; 3]).unwrap();
            let oracle = freespace_mode_sum(r);
            for p in 0..3 {
                for q in 0..3 {
                    assert!((g[(p, q)].im - oracle[(p, q)]).abs() < 2e-4, "{r:?} ({p},{q})");
                }
            }
        }
        // self term limit
        let oracle = freespace_mode_sum([0.0; 3]);
        assert!((oracle[(0, 0)] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn freespace_far_field_decays_as_inverse_distance() {
        for kr_target in [50.0, 200.0, 1000.0] {
            let d = kr_target / TAU;
            let g = freespace_dyadic(TAU, [d, 0.0, 0.0], [0.0; 3]).unwrap();
            // transverse (z, z) component
            let scaled = g[(2, 2)].norm() * kr_target;
            assert!((scaled - 0.75).abs() < 0.75 / kr_target * 1.5, "{scaled}");
        }
    }

    #[test]
    fn freespace_singular_and_reciprocal() {
        let fs = GreenMediumSpec::freespace("fs");
        assert_eq!(green_dyadic(&fs, [0.1; 3], [0.1; 3], 0.0, None), Err(Error::SingularSelfTerm));
        let a = [0.1, -0.3, 0.7];
        let bp = [0.9, 0.2, -0.4];
        let g1 = green_dyadic(&fs, a, bp, 0.0, None).unwrap();
        let g2 = green_dyadic(&fs, bp, a, 0.0, None).unwrap();
        assert!((g1 - g2.transpose()).norm() < 1e-14);
    }

    #[test]
    fn jump_basis_examples() {
        let spec = SystemSpec::new(vec![EmitterSpec::two_level("a", 0.3, "wg", 1.0)], GreenMediumSpec::waveguide("wg"));
        let b = build_manifolds(&spec).unwrap();
        let d = decay_matrix(&spec, &b, 0.0).unwrap();
        let j = jump_basis(&d, &spec, &b).unwrap();
        assert_eq!(j.channels.len(), 2);
        for ch in &j.channels {
            assert!((ch.matrix[(0, 0)].norm_sqr() - 0.5).abs() < 1e-15);
        }
        assert!(max_abs(&(j.reconstruct() - &d.matrix)) < 1e-15);

        // rank one: two emitters decaying to the same ground state
        let trs = vec![
            CollectiveTransition { excited: 0, ground: 0, emitter: 0, transition: 0 },
            CollectiveTransition { excited: 1, ground: 0, emitter: 1, transition: 0 },
        ];
        let gram = CMat::from_element(2, 2, c(1.0, 0.0));
        let chans = jump_channels_from_gram(&gram, &trs, 1, 2, "x").unwrap();
        assert_eq!(chans.len(), 1);
        let m = &chans[0].matrix;
        assert!((m[(0, 0)].norm() - 1.0).abs() < 1e-14 && (m[(0, 1)] - m[(0, 0)]).norm() < 1e-14);

        let chans = jump_channels_from_gram(&CMat::zeros(2, 2), &trs, 1, 2, "x").unwrap();
        assert!(chans.is_empty());

        let bad = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            jump_channels_from_gram(&bad, &trs, 1, 2, "x"),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn lambda_in_freespace_and_loss_is_psd() {
        let em = EmitterSpec {
            id: "a".into(),
            levels: vec![Level::ground("g1", 0.0), Level::ground("g2", 0.1), Level::excited("e", 0.0)],
            transitions: vec![
                Transition::new("e", "g1", Z_HAT).with_coupling("fs", 0.5).with_coupling("loss", 0.2),
                Transition::new("e", "g2", X_HAT).with_coupling("fs", 0.3),
            ],
            position: [0.0; 3],
        };
        let mut em2 = em.clone();
        em2.id = "b".into();
        em2.position = [0.4, 0.3, 0.0];
        let spec = SystemSpec::new(
            vec![em, em2],
            GreenMediumSpec::Composite { members: vec![GreenMediumSpec::freespace("fs"), GreenMediumSpec::loss("loss")] },
        );
        let b = build_manifolds(&spec).unwrap();
        let d = decay_matrix(&spec, &b, 0.0).unwrap();
        assert!(min_eigenvalue(&d.gram) > -1e-12);
        assert!(min_eigenvalue(&d.matrix) > -1e-12);
        let j = jump_basis(&d, &spec, &b).unwrap();
        assert!(max_abs(&(j.reconstruct() - &d.matrix)) < 1e-12);
        // single-emitter diagonal equals the total declared rate
        assert!((d.matrix[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composite_duplicate_ids_rejected() {
        let m = GreenMediumSpec::Composite { members: vec![GreenMediumSpec::waveguide("x"), GreenMediumSpec::loss("x")] };
        assert!(m.issues("medium").iter().any(|i| i.reason.contains("duplicate")));
        let m = GreenMediumSpec::Composite { members: vec![GreenMediumSpec::waveguide("wg"), GreenMediumSpec::loss("right")] };
        assert!(!m.issues("medium").is_empty());
        let m = GreenMediumSpec::Composite { members: vec![GreenMediumSpec::waveguide("wg"), GreenMediumSpec::loss("loss")] };
        assert!(m.issues("medium").is_empty());
    }
}
