#![allow(dead_code)]

use emscat::linalg::{c, CMat};
use emscat::media::GreenMediumSpec;
use emscat::model::{EmitterSpec, Level, SystemSpec, Transition, X_HAT, Z_HAT};
use emscat::scattering::Drive;

pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn two_level_at(id: &str, x: f64, detuning: f64, couplings: &[(&str, f64)]) -> EmitterSpec {
    let mut tr = Transition::new("e", "g", Z_HAT);
    for (m, r) in couplings {
        tr = tr.with_coupling(m, *r);
    }
    EmitterSpec {
        id: id.into(),
        levels: vec![Level::ground("g", 0.0), Level::excited("e", detuning)],
        transitions: vec![tr],
        position: [x, 0.0, 0.0],
    }
}

pub fn waveguide_chain(xs: &[f64]) -> SystemSpec {
    SystemSpec::new(
        xs.iter().enumerate().map(|(j, &x)| EmitterSpec::two_level(&format!("q{j}"), x, "wg", 1.0)).collect(),
        GreenMediumSpec::waveguide("wg"),
    )
}

pub fn waveguide_with_loss(emitters: Vec<EmitterSpec>) -> SystemSpec {
    SystemSpec::new(
        emitters,
        GreenMediumSpec::Composite { members: vec![GreenMediumSpec::waveguide("wg"), GreenMediumSpec::loss("loss")] },
    )
}

/// Lambda emitter with legs `e-g1` (along z) and `e-g2` (along x) coupled to
/// a waveguide.
pub fn lambda_in_waveguide(leg1: f64, leg2: f64) -> SystemSpec {
    SystemSpec::new(
        vec![EmitterSpec {
            id: "atom".into(),
            levels: vec![Level::ground("g1", 0.0), Level::ground("g2", 0.0), Level::excited("e", 0.0)],
            transitions: vec![
                Transition::new("e", "g1", Z_HAT).with_coupling("wg", leg1),
                Transition::new("e", "g2", X_HAT).with_coupling("wg", leg2),
            ],
            position: [0.0; 3],
        }],
        GreenMediumSpec::waveguide("wg"),
    )
}

/// Local field along z of the given amplitude on every emitter.
pub fn z_drive(n_emitters: usize, amplitude: f64) -> Drive {
    Drive::Local { fields: vec![[c(0.0, 0.0), c(0.0, 0.0), c(amplitude, 0.0)]; n_emitters] }
}

pub fn relative(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn density_checks(rho: &CMat) -> (f64, f64, f64) {
    let tr = emscat::linalg::trace(rho);
    ((tr - 1.0).norm(), emscat::linalg::hermitian_defect(rho), emscat::linalg::min_eigenvalue(rho))
}
