//! Invariants over randomly drawn parameters.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use jchm::dynamics::{format_sig, linspace, rotating_to_lab, StateVector, StaticPropagator, TimeSeries};
use jchm::hamiltonian::{build_dispersive_unitary, build_h_driven_rotating, build_h_eff, build_h_full, SystemParams};
use jchm::hilbert::{
    build_basis, build_polariton_basis, excitation_number, polariton_number, projector, Basis, BasisState, Level, Mode,
    Operator, Qubit,
};
use jchm::spectra::{
    eig_hermitian, eigh_matrix, jc_block, mixing_angle, numeric_repulsion, polariton_states, repulsion_energy,
};

fn params() -> impl Strategy<Value = SystemParams> {
    (0.2f64..5.0, 5.0f64..20.0, 0.1f64..1.5, 0.0f64..0.3, 1u32..=3).prop_map(|(d, dc, g_c, kappa0, n_max)| {
        SystemParams {
            epsilon: 40.0 + d,
            epsilon_c: 40.0 + dc,
            g_c,
            kappa0,
            n_max,
            ..SystemParams::knob_switch()
        }
    })
}

fn random_state(basis: &Arc<Basis>, seed: &[f64]) -> StateVector {
    let amps = nalgebra::DVector::from_iterator(
        basis.dim(),
        (0..basis.dim()).map(|i| Complex64::new(seed[i % seed.len()] + i as f64 * 1e-3, seed[(i + 1) % seed.len()])),
    );
    StateVector::normalized(Arc::clone(basis), amps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonians_are_hermitian_and_conserve_excitations(p in params()) {
        let basis = build_basis(p.n_max, None).unwrap();
        let n = excitation_number(&basis);
        for h in [build_h_full(&p, &basis).unwrap(), build_h_eff(&p, &basis).unwrap()] {
            prop_assert!(h.hermiticity_error() < 1e-12);
            prop_assert!(h.commutator(&n).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn knob_in_ground_state_freezes_polaritons_when_tuned_off(d in 0.2f64..5.0, dc in 5.0f64..20.0, g_c in 0.1f64..1.5) {
        let p = SystemParams { epsilon: 40.0 + d, epsilon_c: 40.0 + dc, g_c, kappa0: g_c * g_c / dc, n_max: 2, ..SystemParams::knob_switch() };
        let basis = build_basis(p.n_max, None).unwrap();
        let h = build_h_eff(&p, &basis).unwrap();
        let pg = projector(&basis, Qubit::Knob, Level::Ground);
        for mode in Mode::BOTH {
            let c = h.commutator(&polariton_number(&basis, mode)).unwrap();
            prop_assert!((&(&pg * &c) * &pg).max_abs() < 1e-10);
        }
    }

    #[test]
    fn static_propagation_is_unitary(p in params(), t in 0.0f64..200.0, seed in prop::collection::vec(-1.0f64..1.0, 4)) {
        let basis = build_basis(p.n_max, Some(2)).unwrap();
        let psi0 = random_state(&basis, &seed);
        let prop = StaticPropagator::new(&build_h_full(&p, &basis).unwrap()).unwrap();
        let psi = &prop.propagate(&psi0, &[t]).unwrap()[0];
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
        let e0 = build_h_full(&p, &basis).unwrap().expectation(&psi0).unwrap();
        let e1 = build_h_full(&p, &basis).unwrap().expectation(psi).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-8 * e0.abs().max(1.0));
    }

    #[test]
    fn eigendecomposition_reconstructs(p in params()) {
        let basis = build_basis(p.n_max, None).unwrap();
        let h = build_h_full(&p, &basis).unwrap();
        let eig = eig_hermitian(&h).unwrap();
        prop_assert!(eig.max_residual() < 1e-10);
        prop_assert!(eig.orthonormality_error() < 1e-10);
        prop_assert!(eig.values().windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = eig.values().iter().sum();
        prop_assert!((trace - h.trace().re).abs() < 1e-8 * trace.abs());
    }

    #[test]
    fn analytic_polariton_energies(d in -5.0f64..5.0, wprime in 30.0f64..50.0, n in 1u32..=4) {
        let p = SystemParams { epsilon: wprime + d, n_max: 4, ..SystemParams::spectrum() };
        let (lower, upper) = polariton_states(&p, wprime, n).unwrap();
        let (vals, _) = eigh_matrix(&jc_block(p.epsilon, wprime, p.g, n)).unwrap();
        prop_assert!((vals[0] - lower.energy).abs() < 1e-10);
        prop_assert!((vals[1] - upper.energy).abs() < 1e-10);
        let theta = mixing_angle(d, p.g, n);
        prop_assert!(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn repulsion_closed_form_matches_diagonalization(d in 0.2f64..5.0, wprime in 35.0f64..45.0) {
        let p = SystemParams { epsilon: wprime + d, n_max: 2, ..SystemParams::spectrum() };
        let closed = repulsion_energy(&p, wprime);
        let numeric = numeric_repulsion(&p, wprime).unwrap();
        prop_assert!(closed > 0.0);
        prop_assert!((closed - numeric).abs() < 1e-10);
    }

    #[test]
    fn dispersive_transform_is_unitary(p in params()) {
        let basis = build_basis(p.n_max, Some(1)).unwrap();
        let u = build_dispersive_unitary(&p, &basis).unwrap();
        let uu = &u * &u.adjoint();
        prop_assert!((&uu - &Operator::identity(&basis)).max_abs() < 1e-12);
    }

    #[test]
    fn frame_change_keeps_excitation_populations(t in 0.0f64..50.0, seed in prop::collection::vec(-1.0f64..1.0, 3)) {
        let p = SystemParams::phase_rabi();
        let basis = build_basis(2, None).unwrap();
        let p = SystemParams { n_max: 2, ..p };
        let rot = StaticPropagator::new(&build_h_driven_rotating(&p, &basis).unwrap()).unwrap();
        let psi0 = random_state(&basis, &seed);
        let psi = &rot.propagate(&psi0, &[t]).unwrap()[0];
        let lab = rotating_to_lab(p.w_d, psi, t);
        for s in basis.states() {
            let a = psi.amplitude(s).norm();
            let b = lab.amplitude(s).norm();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_values_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..20)) {
        let times = linspace(0.0, 1.0, values.len() + 1)[1..].to_vec();
        let mut ts = TimeSeries::new(times).unwrap();
        ts.push_channel("x", values.clone()).unwrap();
        let csv = ts.to_csv();
        let mut lines = csv.lines();
        prop_assert_eq!(lines.next().unwrap(), "t,x");
        for (line, v) in lines.zip(&values) {
            let parsed: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            prop_assert!((parsed - v).abs() <= 1e-11 * v.abs().max(1e-300));
        }
    }

    #[test]
    fn format_sig_keeps_twelve_digits(x in prop::num::f64::NORMAL) {
        let s = format_sig(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
        let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
        prop_assert!(digits <= 13);
    }

    #[test]
    fn polariton_sectors_are_closed_under_h_eff(n in 0u32..=4) {
        let p = SystemParams::spectrum();
        let sector = build_polariton_basis(p.n_max, n);
        prop_assume!(sector.is_ok());
        let sector = sector.unwrap();
        let full = build_basis(p.n_max, None).unwrap();
        let h = build_h_eff(&p, &full).unwrap();
        let inside: Vec<&BasisState> = sector.states().iter().collect();
        for s in &inside {
            for t in full.states() {
                if sector.contains(t) {
                    continue;
                }
                let z = h.element(t, s).unwrap();
                prop_assert!(z.norm() == 0.0);
            }
        }
    }
}

#[test]
fn random_hermitian_matrices_diagonalize() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    for n in [1, 2, 7, 30, 80] {
        let m = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let (vals, vecs) = eigh_matrix(&h).unwrap();
        for (l, e) in vals.iter().enumerate() {
            let v = vecs.column(l);
            assert!(((&h * v) - v * Complex64::new(*e, 0.0)).norm() < 1e-10);
        }
    }
}
