mod common;

use proptest::prelude::*;

use common::*;
use emscat::effective::{effective_generator, evolve, GroundDensity, Integrator};
use emscat::linalg::{max_abs, min_eigenvalue};
use emscat::media::{decay_matrix, GreenMediumSpec};
use emscat::model::{build_manifolds, EmitterSpec, SystemSpec};
use emscat::scattering::{power_defect, Detector, Drive, InputField, PreparedSystem};

fn chain(xs: &[f64], detunings: &[f64]) -> SystemSpec {
    SystemSpec::new(
        xs.iter()
            .zip(detunings)
            .enumerate()
            .map(|(j, (&x, &d))| {
                let mut em = EmitterSpec::two_level(&format!("q{j}"), x, "wg", 1.0);
                em.levels[1].energy = d;
                em
            })
            .collect(),
        GreenMediumSpec::waveguide("wg"),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lossless_chains_conserve_power(
        xs in prop::collection::vec(-2.0..2.0f64, 1..4),
        dets in prop::collection::vec(-1.0..1.0f64, 4),
        omega in -4.0..4.0f64,
    ) {
        let spec = chain(&xs, &dets);
        let sys = PreparedSystem::new(&spec).unwrap();
        let dets = [Detector::channel("right"), Detector::channel("left")];
        if let Ok(ops) = sys.scatter(&InputField { omega, drive: Drive::right(1.0) }, &dets) {
            prop_assert!(power_defect(&ops, &Drive::right(1.0)) < 1e-9);
        }
    }

    #[test]
    fn decay_is_psd_and_hamiltonian_dissipative(xs in prop::collection::vec(-2.0..2.0f64, 1..5)) {
        let spec = chain(&xs, &[0.0; 5]);
        let basis = build_manifolds(&spec).unwrap();
        let d = decay_matrix(&spec, &basis, 0.0).unwrap();
        prop_assert!(min_eigenvalue(&d.matrix) > -1e-12);
        let sys = PreparedSystem::new(&spec).unwrap();
        prop_assert!(min_eigenvalue(&sys.hamiltonian.decay_part()) > -1e-12);
    }

    #[test]
    fn effective_rates_scale_quadratically(a in 0.001..0.05f64, s in 1.0..4.0f64, omega in -2.0..2.0f64) {
        let sys = PreparedSystem::new(&lambda_in_waveguide(0.6, 0.4)).unwrap();
        let g1 = effective_generator(&sys, &InputField { omega, drive: z_drive(1, a) }).unwrap();
        let g2 = effective_generator(&sys, &InputField { omega, drive: z_drive(1, a * s) }).unwrap();
        for (l1, l2) in g1.jumps.iter().zip(&g2.jumps) {
            let (n1, n2) = (l1.norm_squared(), l2.norm_squared());
            prop_assert!((n2 - s * s * n1).abs() <= 1e-12 * n2.max(1e-300));
        }
        let h1 = &g1.hamiltonian;
        let h2 = &g2.hamiltonian;
        prop_assert!(max_abs(&(h2 - h1 * num_complex::Complex64::from(s * s))) < 1e-15);
    }

    #[test]
    fn trajectories_stay_physical(a in 0.01..0.2f64, omega in -2.0..2.0f64) {
        let sys = PreparedSystem::new(&lambda_in_waveguide(0.5, 0.5)).unwrap();
        let gen = effective_generator(&sys, &InputField { omega, drive: z_drive(1, a) }).unwrap();
        let traj = evolve(&GroundDensity::pure(2, 0), &gen, 50.0, 0.5, Integrator::Rk4).unwrap();
        for rho in &traj.states {
            let (tr, herm, lo) = density_checks(rho);
            prop_assert!(tr < 1e-9 && herm < 1e-10 && lo > -1e-7);
        }
    }
}
