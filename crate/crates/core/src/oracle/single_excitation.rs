//! Exact single-photon scattering in a 1D waveguide from a real-space
//! ansatz: plane waves between emitter sites, field jumps at the sites, and
//! one excitation amplitude per single-excitation state.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{c, lu_inverse, CMat, CVec, I};
use crate::media::{local_couplings, wavenumber, GreenMediumSpec, MemberKind};
use crate::model::{build_manifolds, excited_hamiltonian, SystemSpec};

/// Reflection and transmission amplitudes into every final ground state.
#[derive(Debug, Clone)]
pub struct SingleExcitationResult {
    pub r: Vec<C64>,
    pub t: Vec<C64>,
}

/// Photon incident from the left in the guided mode of the (single)
/// waveguide member, emitters starting in ground state `g0`. Couplings to
/// other members enter as the usual non-Hermitian self-energy.
pub fn single_excitation_scattering(spec: &SystemSpec, omega: f64, g0: usize) -> Result<SingleExcitationResult> {
    spec.validate()?;
    let members = spec.medium.members();
    let wg: Vec<&GreenMediumSpec> =
        members.iter().copied().filter(|m| matches!(m, GreenMediumSpec::Waveguide1d { .. })).collect();
    if wg.len() != 1 {
        return Err(Error::Unsupported("single-excitation solver needs exactly one waveguide".into()));
    }
    let wg_id = wg[0].id().to_string();
    let basis = build_manifolds(spec)?;
    let (ng, ne) = (basis.n_ground(), basis.n_excited());
    let ground_e = basis.ground_energies(spec);
    let energy = omega + ground_e[g0];

    // excited block: bare energies, couplings, and non-guided self-energy
    let mut h = excited_hamiltonian(spec, &basis)?;
    let couplings = local_couplings(spec, 0.0)?;
    let index_of = |j: usize, t: usize| {
        couplings.transitions.iter().position(|lt| lt.emitter == j && lt.transition == t).expect("listed")
    };
    for member in couplings.members.iter().filter(|m| !matches!(m.kind, MemberKind::Waveguide { .. })) {
        for ta in basis.transitions() {
            for tb in basis.transitions() {
                if ta.ground != tb.ground {
                    continue;
                }
                let (a, b) = (index_of(ta.emitter, ta.transition), index_of(tb.emitter, tb.transition));
                let om = if ta.emitter == tb.emitter { c(0.0, 0.0) } else { member.shift[(a, b)] };
                h[(ta.excited, tb.excited)] += -om - 0.5 * I * member.gram[(a, b)];
            }
        }
    }

    // sites in increasing x; emitters at equal x share a site
    let mut xs: Vec<f64> = spec.emitters.iter().map(|e| e.position[0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let ns = xs.len();
    let site_of = |j: usize| xs.iter().position(|&x| (x - spec.emitters[j].position[0]).abs() < 1e-12).expect("site");

    // unknowns: a_R[g][s], a_L[g][s] for s in 0..=ns, then c_e
    let n_amp = ns + 1;
    let ar = |g: usize, s: usize| g * n_amp + s;
    let al = |g: usize, s: usize| ng * n_amp + g * n_amp + s;
    let ce = |e: usize| 2 * ng * n_amp + e;
    let n = 2 * ng * n_amp + ne;
    let mut m = CMat::zeros(n, n);
    let mut rhs = CVec::zeros(n);
    let k: Vec<f64> = (0..ng).map(|g| wavenumber(spec.carrier_frequency, energy - ground_e[g])).collect();
    let mut row = 0;

    // field jumps at every site and channel
    for g in 0..ng {
        for (s, &x) in xs.iter().enumerate() {
            let fwd = C64::from_polar(1.0, k[g] * x);
            m[(row, ar(g, s + 1))] = fwd;
            m[(row, ar(g, s))] = -fwd;
            m[(row + 1, al(g, s + 1))] = fwd.conj();
            m[(row + 1, al(g, s))] = -fwd.conj();
            for t in basis.transitions().iter().filter(|t| t.ground == g && site_of(t.emitter) == s) {
                let v = (0.5 * spec.emitters[t.emitter].transitions[t.transition].rate(&wg_id)).sqrt();
                m[(row, ce(t.excited))] += I * v;
                m[(row + 1, ce(t.excited))] -= I * v;
            }
            row += 2;
        }
    }
    // boundaries
    for g in 0..ng {
        m[(row, ar(g, 0))] = c(1.0, 0.0);
        rhs[row] = if g == g0 { c(1.0, 0.0) } else { c(0.0, 0.0) };
        m[(row + 1, al(g, ns))] = c(1.0, 0.0);
        row += 2;
    }
    // emitter amplitudes driven by the mean field at their site
    for e in 0..ne {
        for e2 in 0..ne {
            m[(row, ce(e2))] = h[(e, e2)];
        }
        m[(row, ce(e))] -= C64::from(energy);
        for t in basis.transitions().iter().filter(|t| t.excited == e) {
            let s = site_of(t.emitter);
            let x = xs[s];
            let v = (0.5 * spec.emitters[t.emitter].transitions[t.transition].rate(&wg_id)).sqrt();
            let fwd = C64::from_polar(0.5 * v, k[t.ground] * x);
            m[(row, ar(t.ground, s))] += fwd;
            m[(row, ar(t.ground, s + 1))] += fwd;
            m[(row, al(t.ground, s))] += fwd.conj();
            m[(row, al(t.ground, s + 1))] += fwd.conj();
        }
        row += 1;
    }
    debug_assert_eq!(row, n);

    let (inv, _) = lu_inverse(&m).ok_or(Error::SingularAtFrequency { omega, condition: f64::INFINITY })?;
    let sol = inv * rhs;
    Ok(SingleExcitationResult {
        t: (0..ng).map(|g| sol[ar(g, ns)]).collect(),
        r: (0..ng).map(|g| sol[al(g, 0)]).collect(),
    })
}
