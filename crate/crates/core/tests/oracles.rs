//! Reference values from closed-form limits and independent constructions.

use approx::assert_relative_eq;
use floqmem::bath::{bose_occupation, rate};
use floqmem::floquet::{
    auto_n_max, find_crossings, floquet_solve, fourier_coefficients, CrossingSearch,
};
use floqmem::heom::heom_evolve;
use floqmem::lindblad::{
    self, build_degenerate, build_nondegenerate, relaxation_times, transition_frequency,
};
use floqmem::trajectory::uniform_grid;
use floqmem::{BathModel, BlochVector, DriveSpec, HeomSettings, Mat2};

#[test]
fn bath_rates_at_reference_parameters() {
    let b = BathModel::default();
    assert_relative_eq!(b.gamma_x(), 0.2, max_relative = 1e-12);
    assert_relative_eq!(b.gamma_z(1.0), 0.108198, max_relative = 1e-5);
    // J(1) = α/2 and N(1) = 1/(e − 1)
    let n1 = 1.0 / (std::f64::consts::E - 1.0);
    assert_relative_eq!(bose_occupation(1.0, 1.0).unwrap(), n1, max_relative = 1e-14);
    assert_relative_eq!(rate(&b, 1.0), 0.05 * (1.0 + n1), max_relative = 1e-14);
    // zero-frequency limit J(ω)(1+N(ω)) → αω_c·ω/(ω_c²) · 1/(βω) = α/(βω_c)
    assert_relative_eq!(rate(&b, 1e-7), b.gamma_x() / 2.0, max_relative = 1e-6);
}

#[test]
fn detailed_balance() {
    for beta in [0.3, 1.0, 4.0] {
        let b = BathModel {
            beta,
            ..BathModel::default()
        };
        for w in [0.1, 1.0, 2.5, 7.0] {
            assert_relative_eq!(
                rate(&b, w) / rate(&b, -w),
                (beta * w).exp(),
                max_relative = 1e-10
            );
        }
    }
}

#[test]
fn undriven_qubit_is_the_bare_two_level_system() {
    // ω ≠ ω₀ so that ±ω₀/2 stay distinct modulo ω
    let d = DriveSpec {
        omega0: 1.0,
        omega: 1.5,
        amplitude: 0.0,
    };
    let sol = floquet_solve(&d, 256).unwrap();
    let mut e = sol.quasienergies;
    e.sort_by(f64::total_cmp);
    assert_relative_eq!(e[0], -0.5, epsilon = 1e-10);
    assert_relative_eq!(e[1], 0.5, epsilon = 1e-10);
    let t = fourier_coefficients(&sol, 8).unwrap();
    assert_relative_eq!(t.get(0, 0, 1).norm(), 1.0, epsilon = 1e-10);
    assert!(t.max_excluding(0, 1, &[0]) < 1e-10);
    assert!(t.max_excluding(0, 0, &[]) < 1e-10);
}

#[test]
fn weak_resonant_drive_splits_by_the_rabi_frequency() {
    // Rotating-wave limit: ε = ±(ω − Ω)/2, so the folded gap is Ω up to a
    // Bloch-Siegert correction of order Ω²/ω.
    for amp in [0.01, 0.02, 0.05] {
        let sol = floquet_solve(&DriveSpec::resonant(amp), 256).unwrap();
        assert!(
            (sol.gap() - amp).abs() < amp * amp,
            "Omega {amp}: gap {}",
            sol.gap()
        );
    }
}

#[test]
fn fast_drive_crossings_follow_bessel_zeros() {
    // For ω ≫ ω₀ the effective splitting is ω₀ J₀(2Ω/ω).
    let omega = 12.0;
    let zeros = [2.404_825_557_695_773, 5.520_078_110_286_311];
    let found = find_crossings(&CrossingSearch::new(omega, 5.0, 35.0)).unwrap();
    assert_eq!(found.len(), 2, "{found:?}");
    for (x, z) in found.iter().zip(zeros) {
        assert_relative_eq!(*x, z * omega / 2.0, max_relative = 5e-3);
    }
}

#[test]
fn nondegenerate_lindblad_relaxes_to_gibbs_when_undriven() {
    let d = DriveSpec {
        omega0: 1.0,
        omega: 1.5,
        amplitude: 0.0,
    };
    let bath = BathModel::default();
    let sol = floquet_solve(&d, 256).unwrap();
    let t = fourier_coefficients(&sol, 8).unwrap();
    let spec =
        build_nondegenerate(transition_frequency(&t, &sol), d.omega, &bath, 0.0, 1e-3).unwrap();
    let grid = uniform_grid(400.0, 1.0);
    let traj = lindblad::evolve(
        &spec,
        &Mat2::from_real([[0.5, 0.0], [0.0, 0.5]]),
        &grid,
        None,
    )
    .unwrap();
    let last = traj.states().last().unwrap();
    let (p1, p2) = (last.0[0][0].re, last.0[1][1].re);
    let (hi, lo) = if sol.quasienergies[0] > sol.quasienergies[1] {
        (p1, p2)
    } else {
        (p2, p1)
    };
    assert_relative_eq!(hi / lo, (-1.0f64).exp(), max_relative = 1e-6);
}

#[test]
fn degenerate_relaxation_times() {
    let spec = build_degenerate(1.0, &BathModel::default(), 0.2);
    let t = relaxation_times(&spec).unwrap();
    assert_relative_eq!(t.tau_offdiag_re, 115.5, max_relative = 1e-3);
    assert_relative_eq!(t.tau_diag, 5.0, max_relative = 1e-3);
    assert_relative_eq!(t.tau_offdiag_im, 2.447, max_relative = 1e-3);
}

#[test]
fn heom_rates_approach_golden_rule_at_long_times() {
    // Undriven, weak coupling: after the initial slip the excited population
    // decays at rate(ω₀) + rate(−ω₀).
    let bath = BathModel {
        alpha: 0.005,
        ..BathModel::default()
    };
    let d = DriveSpec::resonant(0.0);
    let grid = uniform_grid(60.0, 0.1);
    let s = HeomSettings {
        pade_terms: Some(2),
        ..HeomSettings::default()
    };
    let rho0 = BlochVector::new(0.0, 0.0, 1.0).to_matrix();
    let (traj, _) = heom_evolve(&d, &bath, &rho0, &s, &grid, None).unwrap();
    let g = rate(&bath, 1.0) + rate(&bath, -1.0);
    let peq = rate(&bath, -1.0) / g;
    let p = |k: usize| traj.states()[k].0[0][0].re - peq;
    // effective rate between t = 30 and t = 60
    let eff = (p(300) / p(600)).ln() / 30.0;
    assert_relative_eq!(eff, g, max_relative = 0.02);
}

#[test]
fn coefficient_table_matches_auto_cutoff() {
    let d = DriveSpec::resonant(9.5);
    let sol = floquet_solve(&d, 512).unwrap();
    let t = fourier_coefficients(&sol, auto_n_max(&d)).unwrap();
    assert!((t.parseval_sum() - 2.0).abs() < 1e-4);
}
