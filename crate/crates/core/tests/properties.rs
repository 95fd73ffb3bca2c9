//! Invariants checked on random inputs.

use floqmem::analysis::{detect_peaks, fit_decay, positive_increments, trace_distance_curve};
use floqmem::floquet::{auto_n_max, circle_distance, floquet_solve, fourier_coefficients};
use floqmem::lindblad::{self, build_generic};
use floqmem::qubit::{random_orthogonal_pair, task_rng, trace_norm_half};
use floqmem::trajectory::uniform_grid;
use floqmem::{BathModel, BlochVector, DriveSpec, RunConfig};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn coefficient_symmetries(amp in 0.0f64..9.5, omega in 0.7f64..1.3) {
        let d = DriveSpec { omega0: 1.0, omega, amplitude: amp };
        let sol = floquet_solve(&d, 512).unwrap();
        let t = fourier_coefficients(&sol, auto_n_max(&d)).unwrap();
        prop_assert!((t.parseval_sum() - 2.0).abs() < 1e-4);
        for n in t.harmonics() {
            prop_assert!((t.get(n, 0, 0) + t.get(n, 1, 1)).norm() < 1e-6);
            prop_assert!((t.get(n, 0, 1) - t.get(-n, 1, 0).conj()).norm() < 1e-6);
        }
    }

    #[test]
    fn quasienergies_are_opposite(amp in 0.0f64..10.0, omega in 0.5f64..2.0) {
        // traceless Hamiltonian: det U(T) = 1
        let d = DriveSpec { omega0: 1.0, omega, amplitude: amp };
        let sol = floquet_solve(&d, 256).unwrap();
        let [a, b] = sol.quasienergies;
        prop_assert!(circle_distance(a, -b, omega) < 1e-8);
        prop_assert!(a >= -omega / 2.0 && a < omega / 2.0);
    }

    #[test]
    fn lindblad_maps_contract_trace_distance(amp in 0.5f64..9.0, seed in 0u64..1000, alpha in 0.01f64..0.3) {
        let d = DriveSpec::resonant(amp);
        let bath = BathModel { alpha, ..BathModel::default() };
        let sol = floquet_solve(&d, 256).unwrap();
        let t = fourier_coefficients(&sol, auto_n_max(&d)).unwrap();
        let spec = build_generic(&t, &sol, &bath, t.n_max, 1e-6);
        let maps = lindblad::maps(&spec, &uniform_grid(30.0, 0.25)).unwrap();
        let (a, b, _) = random_orthogonal_pair(&mut task_rng(seed, 0));
        let curve = trace_distance_curve(&maps, a.matrix(), b.matrix());
        prop_assert!((curve.values[0] - 1.0).abs() < 1e-12);
        prop_assert!(positive_increments(&curve.values) < 1e-10);
        for phi in &maps.maps {
            let rho = phi.apply(a.matrix());
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
            prop_assert!(rho.hermitian_eigenvalues()[0] > -1e-10);
        }
    }

    #[test]
    fn orthogonal_pairs_are_perfectly_distinguishable(seed in any::<u64>(), task in 0u64..64) {
        let (a, b, n) = random_orthogonal_pair(&mut task_rng(seed, task));
        prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        prop_assert!((trace_norm_half(&(*a.matrix() - *b.matrix())) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backflow_is_non_negative(values in prop::collection::vec(0.0f64..1.0, 2..50)) {
        prop_assert!(positive_increments(&values) >= 0.0);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(positive_increments(&sorted), 0.0);
    }

    #[test]
    fn decay_fit_recovers_lifetime(tau in 5.0f64..200.0, w in 0.5f64..3.0, phase in 0.0f64..3.0) {
        let times: Vec<f64> = (0..4000).map(|k| k as f64 * 10.0 * tau / 4000.0).collect();
        let dev: Vec<f64> = times.iter().map(|t| ((-t / tau).exp() * (w * t + phase).cos()).abs()).collect();
        let fit = fit_decay(&times, &dev, 1e-6).unwrap();
        prop_assert!((fit.tau / tau - 1.0).abs() < 0.01, "tau {} vs {}", fit.tau, tau);
    }

    #[test]
    fn isolated_spike_is_the_only_peak(base in prop::collection::vec(0.9f64..1.1, 20..60), at in 1usize..19) {
        let mut v = base;
        v[at] = 5.0;
        prop_assert_eq!(detect_peaks(&v), vec![at]);
    }

    #[test]
    fn bloch_round_trip(x in -0.57f64..0.57, y in -0.57f64..0.57, z in -0.57f64..0.57) {
        let b = BlochVector::new(x, y, z);
        let r = BlochVector::from_matrix(&b.to_matrix());
        prop_assert!((r.x - x).abs() < 1e-14 && (r.y - y).abs() < 1e-14 && (r.z - z).abs() < 1e-14);
    }

    #[test]
    fn config_round_trips(amp in 0.0f64..10.0, seed in any::<u64>(), pairs in 1usize..5000) {
        let mut cfg = RunConfig::default();
        cfg.drive.amplitude = amp;
        cfg.analysis.seed = seed;
        cfg.analysis.n_pairs = pairs;
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
