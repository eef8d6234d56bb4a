//! The two-site model Hamiltonians: exact, dispersive effective, and the
//! driven one in the frame rotating with the drive.
//!
//! All energies are in units of the resonator-qubit coupling `g`, times in
//! units of `1/g`, and `hbar = 1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{Basis, BasisState, Level, Mode, Operator, Qubit};
use crate::spectra::exp_i_hermitian;

/// Above this `|g_c / Delta_c|` the dispersive expansion is not trusted.
pub const DISPERSIVE_WARNING_RATIO: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Site qubit frequency.
    pub epsilon: f64,
    /// Knob qubit frequency.
    pub epsilon_c: f64,
    /// Bare resonator frequency.
    pub w: f64,
    /// Resonator-qubit coupling, the energy unit.
    pub g: f64,
    /// Knob-resonator coupling.
    pub g_c: f64,
    /// Direct capacitive hopping.
    pub kappa0: f64,
    /// Drive strength on the knob qubit; zero when undriven.
    pub omega: f64,
    /// Drive frequency, ignored while `omega == 0`.
    pub w_d: f64,
    /// Photon cutoff per resonator.
    pub n_max: u32,
}

impl SystemParams {
    pub const KEYS: [&'static str; 9] = [
        "epsilon",
        "epsilon_c",
        "w",
        "g",
        "g_c",
        "kappa0",
        "omega",
        "w_d",
        "n_max",
    ];

    /// Knob on/off switching: `g_c^2 / Delta_c = kappa0`, site qubits detuned by 5g.
    pub fn knob_switch() -> Self {
        SystemParams {
            epsilon: 45.0,
            epsilon_c: 50.0,
            w: 40.0,
            g: 1.0,
            g_c: 1.0,
            kappa0: 0.1,
            omega: 0.0,
            w_d: 0.0,
            n_max: 4,
        }
    }

    /// Two-polariton spectrum: site qubits detuned by 1g.
    pub fn spectrum() -> Self {
        SystemParams {
            epsilon: 41.0,
            ..Self::knob_switch()
        }
    }

    /// Driven Rabi oscillation between the localized and delocalized states.
    pub fn phase_rabi() -> Self {
        SystemParams {
            omega: 0.07,
            w_d: 50.2750,
            ..Self::spectrum()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("epsilon", self.epsilon),
            ("epsilon_c", self.epsilon_c),
            ("w", self.w),
            ("g", self.g),
            ("g_c", self.g_c),
            ("kappa0", self.kappa0),
            ("omega", self.omega),
            ("w_d", self.w_d),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} is not finite"),
                });
            }
        }
        let check = |ok: bool, name: &'static str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: reason.to_string(),
                })
            }
        };
        check(self.g > 0.0, "g", "must be positive")?;
        check(self.g_c >= 0.0, "g_c", "must be non-negative")?;
        check(self.kappa0 >= 0.0, "kappa0", "must be non-negative")?;
        check(self.omega >= 0.0, "omega", "must be non-negative")?;
        check(self.n_max >= 1, "n_max", "must be at least 1")?;
        Ok(())
    }

    /// `Delta_c = epsilon_c - w`.
    pub fn knob_detuning(&self) -> f64 {
        self.epsilon_c - self.w
    }

    /// `g_c^2 / Delta_c`, the ac Stark shift and mediated hopping scale.
    pub fn stark_shift(&self) -> Result<f64> {
        let dc = self.knob_detuning();
        if dc == 0.0 {
            return Err(Error::ResonantKnob);
        }
        Ok(self.g_c * self.g_c / dc)
    }

    pub fn dispersive_ratio(&self) -> f64 {
        self.g_c / self.knob_detuning()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.dispersive_ratio();
        if !ratio.is_finite() || ratio.abs() >= DISPERSIVE_WARNING_RATIO {
            out.push(format!(
                "g_c/Delta_c = {ratio:.4} is outside the dispersive regime (|ratio| < {DISPERSIVE_WARNING_RATIO})"
            ));
        }
        out
    }

    /// Stark-shifted resonator frequency `w -/+ g_c^2/Delta_c` seen with the
    /// knob in `knob`.
    pub fn shifted_resonator(&self, knob: Level) -> Result<f64> {
        let x = self.stark_shift()?;
        Ok(match knob {
            Level::Ground => self.w - x,
            Level::Excited => self.w + x,
        })
    }

    /// Net photon hopping `kappa0 + (g_c^2/Delta_c) sigma_c^z` of the
    /// effective Hamiltonian.
    pub fn hopping(&self, knob: Level) -> Result<f64> {
        Ok(self.kappa0 + self.stark_shift()? * knob.sigma_z())
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Invalid(format!("value for `{key}` is not finite")));
        }
        match key {
            "epsilon" => self.epsilon = value,
            "epsilon_c" => self.epsilon_c = value,
            "w" => self.w = value,
            "g" => self.g = value,
            "g_c" => self.g_c = value,
            "kappa0" => self.kappa0 = value,
            "omega" => self.omega = value,
            "w_d" => self.w_d = value,
            "n_max" => {
                if value < 0.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(Error::Invalid(format!(
                        "n_max must be a non-negative integer, got {value}"
                    )));
                }
                self.n_max = value as u32
            }
            other => return Err(Error::Invalid(format!("unknown parameter `{other}`"))),
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("epsilon", self.epsilon),
            ("epsilon_c", self.epsilon_c),
            ("w", self.w),
            ("g", self.g),
            ("g_c", self.g_c),
            ("kappa0", self.kappa0),
            ("omega", self.omega),
            ("w_d", self.w_d),
            ("n_max", self.n_max as f64),
        ]
    }

    fn check_basis(&self, basis: &Basis) -> Result<()> {
        self.validate()?;
        if basis.n_max() != self.n_max {
            return Err(Error::CutoffMismatch {
                params: self.n_max,
                basis: basis.n_max(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for SystemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries().iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

fn sqrt(n: u32) -> f64 {
    (n as f64).sqrt()
}

/// Local Jaynes-Cummings terms of both sites acting on `s`.
fn jc_action(p: &SystemParams, s: &BasisState, push: &mut dyn FnMut(f64, BasisState)) {
    for mode in Mode::BOTH {
        let q = mode.local_qubit();
        let n = s.photons(mode);
        let diag = p.epsilon * s.level(q).occupation() as f64 + p.w * n as f64;
        push(diag, *s);
        match s.level(q) {
            // sigma^+ a
            Level::Ground if n > 0 => push(p.g * sqrt(n), s.with_photons(mode, n - 1).with_level(q, Level::Excited)),
            // sigma^- a^dag
            Level::Excited if n < p.n_max => push(
                p.g * sqrt(n + 1),
                s.with_photons(mode, n + 1).with_level(q, Level::Ground),
            ),
            _ => {}
        }
    }
}

/// `coeff * (a_1^dag a_2 + a_1 a_2^dag)` acting on `s`.
fn hopping_action(coeff: f64, n_max: u32, s: &BasisState, push: &mut dyn FnMut(f64, BasisState)) {
    if coeff == 0.0 {
        return;
    }
    let (n1, n2) = (s.n1, s.n2);
    if n2 > 0 && n1 < n_max {
        push(
            coeff * sqrt(n2) * sqrt(n1 + 1),
            BasisState {
                n1: n1 + 1,
                n2: n2 - 1,
                ..*s
            },
        );
    }
    if n1 > 0 && n2 < n_max {
        push(
            coeff * sqrt(n1) * sqrt(n2 + 1),
            BasisState {
                n1: n1 - 1,
                n2: n2 + 1,
                ..*s
            },
        );
    }
}

/// `g_c (sigma_c^+ a_1 + sigma_c^+ a_2 + h.c.)` acting on `s`.
fn knob_exchange_action(p: &SystemParams, s: &BasisState, push: &mut dyn FnMut(f64, BasisState)) {
    for mode in Mode::BOTH {
        let n = s.photons(mode);
        match s.qc {
            Level::Ground if n > 0 => push(
                p.g_c * sqrt(n),
                s.with_photons(mode, n - 1).with_level(Qubit::Knob, Level::Excited),
            ),
            Level::Excited if n < p.n_max => push(
                p.g_c * sqrt(n + 1),
                s.with_photons(mode, n + 1).with_level(Qubit::Knob, Level::Ground),
            ),
            _ => {}
        }
    }
}

/// Exact undriven Hamiltonian: two JC sites, the knob qubit with its
/// exchange coupling to both resonators, and the direct hopping `kappa0`.
/// On a restricted basis the operator is compressed onto that basis.
pub fn build_h_full(params: &SystemParams, basis: &Arc<Basis>) -> Result<Operator> {
    params.check_basis(basis)?;
    Ok(Operator::from_action(basis, basis, |s, push| {
        jc_action(params, s, push);
        push(params.epsilon_c * s.qc.occupation() as f64, *s);
        knob_exchange_action(params, s, push);
        hopping_action(params.kappa0, params.n_max, s, push);
    }))
}

/// Second-order dispersive Hamiltonian. Block-diagonal in the knob qubit:
/// the knob state only sets Stark shifts and the net hopping
/// `kappa0 + (g_c^2/Delta_c) sigma_c^z`.
pub fn build_h_eff(params: &SystemParams, basis: &Arc<Basis>) -> Result<Operator> {
    params.check_basis(basis)?;
    let x = params.stark_shift()?;
    Ok(Operator::from_action(basis, basis, |s, push| {
        jc_action(params, s, push);
        let photons = (s.n1 + s.n2) as f64;
        let knob = match s.qc {
            Level::Ground => -x * photons,
            Level::Excited => params.epsilon_c + 2.0 * x + x * photons,
        };
        push(knob, *s);
        hopping_action(params.kappa0 + x * s.qc.sigma_z(), params.n_max, s, push);
    }))
}

/// Anti-Hermitian generator `(g_c/Delta_c)(a_1 s_c^+ - a_1^dag s_c^- + a_2 s_c^+ - a_2^dag s_c^-)`.
pub fn dispersive_generator(params: &SystemParams, basis: &Arc<Basis>) -> Result<Operator> {
    params.check_basis(basis)?;
    if params.knob_detuning() == 0.0 {
        return Err(Error::ResonantKnob);
    }
    let r = params.dispersive_ratio();
    Ok(Operator::from_action(basis, basis, |s, push| {
        for mode in Mode::BOTH {
            let n = s.photons(mode);
            match s.qc {
                Level::Ground if n > 0 => push(
                    r * sqrt(n),
                    s.with_photons(mode, n - 1).with_level(Qubit::Knob, Level::Excited),
                ),
                Level::Excited if n < params.n_max => push(
                    -r * sqrt(n + 1),
                    s.with_photons(mode, n + 1).with_level(Qubit::Knob, Level::Ground),
                ),
                _ => {}
            }
        }
    }))
}

/// `U = exp(A)` for the dispersive generator `A`, evaluated as
/// `exp(-i K)` with the Hermitian `K = i A`.
pub fn build_dispersive_unitary(params: &SystemParams, basis: &Arc<Basis>) -> Result<Operator> {
    let a = dispersive_generator(params, basis)?;
    let k = Operator::from_matrix(Arc::clone(basis), a.matrix() * Complex64::new(0.0, 1.0))?;
    exp_i_hermitian(&k, 1.0)
}

/// Bare knob drive `sigma_c^+ + sigma_c^-` (without the strength).
pub fn knob_drive(basis: &Arc<Basis>) -> Operator {
    Operator::from_action(basis, basis, |s, push| {
        push(1.0, s.with_level(Qubit::Knob, s.qc.flipped()));
    })
}

/// Static Hamiltonian in the frame rotating at `w_d`:
/// `H - w_d N_tot + Omega (sigma_c^+ + sigma_c^-)`.
///
/// Exact because `H` conserves `N_tot`; a lab-frame state is recovered by
/// applying `exp(-i w_d t N_tot)`.
pub fn build_h_driven_rotating(params: &SystemParams, basis: &Arc<Basis>) -> Result<Operator> {
    if params.omega > 0.0 && params.w_d <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "w_d",
            reason: "drive frequency must be positive".into(),
        });
    }
    let h = build_h_full(params, basis)?;
    let mut m = h.into_matrix();
    for (i, s) in basis.states().iter().enumerate() {
        m[(i, i)] -= Complex64::new(params.w_d * s.excitation_total() as f64, 0.0);
    }
    if params.omega != 0.0 {
        m += knob_drive(basis).matrix() * Complex64::new(params.omega, 0.0);
    }
    Operator::from_matrix(Arc::clone(basis), m)
}

/// Residuals of the dispersive transform on low excitation sectors.
#[derive(Clone, Debug)]
pub struct DispersiveCheck {
    /// `max |(U H U^dag - H_eff)_{ij}|` over states with `N_tot <= max_sector`.
    pub matrix_residual: f64,
    /// Largest eigenvalue difference between `H` and `H_eff` on those sectors.
    pub spectral_residual: f64,
    /// `(g_c/Delta_c)^3 * ||H||` restricted to the same sectors.
    pub third_order_scale: f64,
    pub ratio: f64,
}

/// Compare the exactly transformed `U H U^dag` with `H_eff` on the sectors
/// `N_tot <= max_sector`. `U`, `H` and `H_eff` all conserve `N_tot`, so the
/// low blocks are unaffected by the photon cutoff as long as
/// `max_sector < n_max`.
pub fn dispersive_check(params: &SystemParams, basis: &Arc<Basis>, max_sector: u32) -> Result<DispersiveCheck> {
    let h = build_h_full(params, basis)?;
    let h_eff = build_h_eff(params, basis)?;
    let u = build_dispersive_unitary(params, basis)?;
    let transformed = &(&u * &h) * &u.adjoint();

    let low: Vec<usize> = basis
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.excitation_total() <= max_sector)
        .map(|(i, _)| i)
        .collect();
    let block = |m: &DMatrix<Complex64>| DMatrix::from_fn(low.len(), low.len(), |i, j| m[(low[i], low[j])]);

    let diff = block(transformed.matrix()) - block(h_eff.matrix());
    let matrix_residual = diff.iter().fold(0.0f64, |m, z| m.max(z.norm()));

    let h_low = block(h.matrix());
    let norm = h_low.clone().singular_values().max();

    let mut spectral_residual = 0.0f64;
    for sector in 0..=max_sector {
        let b = Arc::new(Basis::new(basis.n_max(), Some(crate::hilbert::Sector::Total(sector)))?);
        let e_full = crate::spectra::eig_hermitian(&build_h_full(params, &b)?)?;
        let e_eff = crate::spectra::eig_hermitian(&build_h_eff(params, &b)?)?;
        for (a, c) in e_full.values().iter().zip(e_eff.values()) {
            spectral_residual = spectral_residual.max((a - c).abs());
        }
    }
    let ratio = params.dispersive_ratio();
    Ok(DispersiveCheck {
        matrix_residual,
        spectral_residual,
        third_order_scale: ratio.abs().powi(3) * norm,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{
        annihilator, build_basis, build_polariton_basis, excitation_number, polariton_number, projector,
        qubit_lowering, sigma_z,
    };
    use crate::spectra::eig_hermitian;

    fn full(n_max: u32) -> Arc<Basis> {
        build_basis(n_max, None).unwrap()
    }

    /// Independent construction of `H` from elementary operator products.
    fn h_full_by_algebra(p: &SystemParams, b: &Arc<Basis>) -> Operator {
        let a1 = annihilator(b, Mode::One).unwrap();
        let a2 = annihilator(b, Mode::Two).unwrap();
        let s1 = qubit_lowering(b, Qubit::Site1).unwrap();
        let s2 = qubit_lowering(b, Qubit::Site2).unwrap();
        let sc = qubit_lowering(b, Qubit::Knob).unwrap();
        let mut h = Operator::zeros(b);
        for (a, s) in [(&a1, &s1), (&a2, &s2)] {
            h = &h + &(&(&s.adjoint() * s) * p.epsilon);
            h = &h + &(&(&a.adjoint() * a) * p.w);
            h = &h + &(&(&(&s.adjoint() * a) + &(s * &a.adjoint())) * p.g);
        }
        h = &h + &(&(&sc.adjoint() * &sc) * p.epsilon_c);
        let ex = &(&sc.adjoint() * &a1) + &(&sc.adjoint() * &a2);
        h = &h + &(&(&ex + &ex.adjoint()) * p.g_c);
        let hop = &(&a1.adjoint() * &a2) + &(&a1 * &a2.adjoint());
        &h + &(&hop * p.kappa0)
    }

    #[test]
    fn full_hamiltonian_matches_operator_algebra() {
        let p = SystemParams::spectrum();
        let b = full(4);
        let direct = build_h_full(&p, &b).unwrap();
        let algebra = h_full_by_algebra(&p, &b);
        assert!((&direct - &algebra).max_abs() < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_matches_operator_algebra() {
        let p = SystemParams {
            n_max: 3,
            ..SystemParams::knob_switch()
        };
        let b = full(3);
        let x = p.stark_shift().unwrap();
        let a1 = annihilator(&b, Mode::One).unwrap();
        let a2 = annihilator(&b, Mode::Two).unwrap();
        let n_ph = &(&a1.adjoint() * &a1) + &(&a2.adjoint() * &a2);
        let pg = projector(&b, Qubit::Knob, Level::Ground);
        let pe = projector(&b, Qubit::Knob, Level::Excited);
        let id = Operator::identity(&b);
        let hop = &(&a1.adjoint() * &a2) + &(&a1 * &a2.adjoint());

        let jc_only = SystemParams {
            g_c: 0.0,
            kappa0: 0.0,
            epsilon_c: 0.0,
            ..p.clone()
        };
        let mut expected = h_full_by_algebra(&jc_only, &b);
        expected = &expected - &(&(&n_ph * &pg) * x);
        expected = &expected + &(&(&(&id * (p.epsilon_c + 2.0 * x)) + &(&n_ph * x)) * &pe);
        let coupling = &(&id * p.kappa0) + &(&sigma_z(&b, Qubit::Knob) * x);
        expected = &expected + &(&coupling * &hop);

        let h_eff = build_h_eff(&p, &b).unwrap();
        assert!((&h_eff - &expected).max_abs() < 1e-12);
    }

    #[test]
    fn vacuum_and_knob_energies() {
        let p = SystemParams::spectrum();
        let b = full(4);
        let h = build_h_full(&p, &b).unwrap();
        let vac = BasisState::VACUUM;
        let knob = vac.with_level(Qubit::Knob, Level::Excited);
        assert_eq!(h.element(&vac, &vac).unwrap().re, 0.0);
        assert_eq!(h.element(&knob, &knob).unwrap().re, 50.0);

        let h_eff = build_h_eff(&p, &b).unwrap();
        assert!((h_eff.element(&knob, &knob).unwrap().re - 50.2).abs() < 1e-12);
    }

    #[test]
    fn hamiltonians_are_hermitian_and_conserve_excitations() {
        let b = full(4);
        let n_tot = excitation_number(&b);
        for p in [SystemParams::knob_switch(), SystemParams::spectrum()] {
            for h in [build_h_full(&p, &b).unwrap(), build_h_eff(&p, &b).unwrap()] {
                assert!(h.hermiticity_error() < 1e-12);
                assert!(h.commutator(&n_tot).unwrap().spectral_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn conserved_polaritons_plus_knob() {
        let b = full(3);
        let h = build_h_full(
            &SystemParams {
                n_max: 3,
                ..SystemParams::knob_switch()
            },
            &b,
        )
        .unwrap();
        let total = &(&polariton_number(&b, Mode::One) + &polariton_number(&b, Mode::Two))
            + &projector(&b, Qubit::Knob, Level::Excited);
        assert!(h.commutator(&total).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_is_knob_block_diagonal() {
        let b = full(3);
        let h = build_h_eff(
            &SystemParams {
                n_max: 3,
                ..SystemParams::spectrum()
            },
            &b,
        )
        .unwrap();
        for (i, si) in b.states().iter().enumerate() {
            for (j, sj) in b.states().iter().enumerate() {
                if si.qc != sj.qc {
                    assert_eq!(h.matrix()[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn hopping_switches_with_knob() {
        let p = SystemParams {
            n_max: 2,
            ..SystemParams::knob_switch()
        };
        let b = full(2);
        let h = build_h_eff(&p, &b).unwrap();
        for (knob, expected) in [(Level::Ground, 0.0), (Level::Excited, 0.2)] {
            let left = BasisState::new(1, 0, Level::Ground, Level::Ground, knob);
            let right = BasisState::new(0, 1, Level::Ground, Level::Ground, knob);
            let element = h.element(&left, &right).unwrap();
            assert!((element.re - expected).abs() < 1e-15, "{knob:?}: {element}");
            assert!((p.hopping(knob).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn resonant_knob_rejected() {
        let p = SystemParams {
            epsilon_c: 40.0,
            ..SystemParams::knob_switch()
        };
        let b = full(4);
        assert!(matches!(build_h_eff(&p, &b), Err(Error::ResonantKnob)));
        assert!(matches!(build_dispersive_unitary(&p, &b), Err(Error::ResonantKnob)));
        assert!(!p.warnings().is_empty());
    }

    #[test]
    fn cutoff_mismatch_rejected() {
        let p = SystemParams::knob_switch();
        assert!(matches!(
            build_h_full(&p, &full(2)),
            Err(Error::CutoffMismatch { params: 4, basis: 2 })
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut p = SystemParams::knob_switch();
        p.g = 0.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::knob_switch();
        p.kappa0 = -0.1;
        assert!(build_h_full(&p, &full(4)).is_err());
        let mut p = SystemParams::knob_switch();
        assert!(p.set("kappa0", f64::NAN).is_err());
        assert!(p.set("n_max", 2.5).is_err());
        assert!(p.set("nonsense", 1.0).is_err());
    }

    #[test]
    fn dispersive_ratio_warning() {
        let ok = SystemParams::knob_switch();
        assert!(ok.warnings().is_empty());
        let bad = SystemParams { epsilon_c: 41.5, ..ok };
        assert_eq!(bad.warnings().len(), 1);
    }

    #[test]
    fn dispersive_unitary_identity_without_coupling() {
        let p = SystemParams {
            g_c: 0.0,
            ..SystemParams::knob_switch()
        };
        let b = full(2);
        let u = build_dispersive_unitary(&SystemParams { n_max: 2, ..p }, &b).unwrap();
        assert!((&u - &Operator::identity(&b)).max_abs() < 1e-12);
    }

    #[test]
    fn dispersive_unitary_is_unitary() {
        let p = SystemParams::knob_switch();
        let b = full(4);
        let u = build_dispersive_unitary(&p, &b).unwrap();
        let uu = &u * &u.adjoint();
        assert!((&uu - &Operator::identity(&b)).max_abs() < 1e-10);
    }

    #[test]
    fn dispersive_transform_residuals() {
        // H_eff keeps only knob-resonator terms; the dropped first-order
        // knob/site-qubit exchange has size g * g_c/Delta_c, so the matrix
        // residual scales linearly while the spectra agree far better.
        let mut previous = f64::INFINITY;
        let mut previous_spectral = f64::INFINITY;
        for g_c in [1.0, 0.5, 0.25] {
            let p = SystemParams {
                g_c,
                kappa0: g_c * g_c / 10.0,
                ..SystemParams::knob_switch()
            };
            let check = dispersive_check(&p, &full(4), 2).unwrap();
            let linear = p.g * check.ratio;
            assert!(check.matrix_residual < 1.05 * linear, "{check:?}");
            assert!(check.matrix_residual > 0.9 * linear, "{check:?}");
            assert!(check.spectral_residual < 0.2 * linear, "{check:?}");
            // the level shifts themselves improve faster than linearly
            assert!(check.spectral_residual < 0.5 * previous_spectral, "{check:?}");
            assert!(check.matrix_residual < previous);
            previous = check.matrix_residual;
            previous_spectral = check.spectral_residual;
        }
    }

    #[test]
    fn rotating_frame_without_drive_shifts_each_sector() {
        let p = SystemParams {
            omega: 0.0,
            w_d: 50.0,
            n_max: 3,
            ..SystemParams::spectrum()
        };
        let b = full(3);
        let h = build_h_full(&p, &b).unwrap();
        let h_rot = build_h_driven_rotating(&p, &b).unwrap();
        let mut expected: Vec<f64> = Vec::new();
        let mut got: Vec<f64> = Vec::new();
        for sector in 0..=2 * 3 + 3 {
            let sb = build_basis(3, Some(sector)).unwrap();
            let e = eig_hermitian(&build_h_full(&p, &sb).unwrap()).unwrap();
            expected.extend(e.values().iter().map(|v| v - p.w_d * sector as f64));
        }
        got.extend(eig_hermitian(&h_rot).unwrap().values());
        expected.sort_by(f64::total_cmp);
        assert_eq!(expected.len(), got.len());
        for (a, b) in expected.iter().zip(&got) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(h.is_hermitian(1e-12));
    }

    #[test]
    fn drive_only_flips_the_knob() {
        let p = SystemParams::phase_rabi();
        let b = full(4);
        let h = build_h_full(&p, &b).unwrap();
        let h_rot = build_h_driven_rotating(&p, &b).unwrap();
        let n_tot = excitation_number(&b);
        let shifted = &h - &(&n_tot * p.w_d);
        let drive = &h_rot - &shifted;
        for (i, si) in b.states().iter().enumerate() {
            for (j, sj) in b.states().iter().enumerate() {
                let z = drive.matrix()[(i, j)];
                let flips_only_knob = si.with_level(Qubit::Knob, sj.qc) == *sj && si.qc != sj.qc;
                if flips_only_knob {
                    assert!((z.re - p.omega).abs() < 1e-14);
                } else {
                    assert!(z.norm() < 1e-14);
                }
            }
        }
        // [H_rot, N_tot] is carried entirely by the drive term
        let comm = h_rot.commutator(&n_tot).unwrap();
        let drive_comm = drive.commutator(&n_tot).unwrap();
        assert!((&comm - &drive_comm).max_abs() < 1e-10);
        assert!(drive_comm.max_abs() > 0.0);
    }

    #[test]
    fn restricted_bases_compress_consistently() {
        let p = SystemParams::spectrum();
        let b16 = build_polariton_basis(4, 2).unwrap();
        let h_eff = build_h_eff(&p, &b16).unwrap();
        assert_eq!(h_eff.dim(), 16);
        assert!(h_eff.is_hermitian(1e-12));
        let full_eff = build_h_eff(&p, &full(4)).unwrap();
        for s in b16.states() {
            for t in b16.states() {
                assert_eq!(h_eff.element(s, t), full_eff.element(s, t));
            }
        }
    }
}
