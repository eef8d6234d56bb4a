//! Closed-form single-site dressed states.
//!
//! Sign convention: both branches have a non-negative photon component,
//!
//! ```text
//! |n+> = cos(theta) |n,g> + sin(theta) |n-1,e>
//! |n-> = sin(theta) |n,g> - cos(theta) |n-1,e>
//! ```
//!
//! so `|n->` is the negative of the form with the qubit component written
//! first. Only relative signs between product states matter for the
//! delocalized superpositions, and this choice makes the three of them match
//! the numerical eigenstates in energy order.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::StateVector;
use crate::error::{Error, Result};
use crate::hamiltonian::SystemParams;
use crate::hilbert::{Basis, BasisState, Level};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolaritonState {
    /// Site excitations, photons plus the local qubit.
    pub n: u32,
    pub branch: Branch,
    /// Mixing angle; zero for the vacuum.
    pub theta: f64,
    /// Energy relative to the site vacuum.
    pub energy: f64,
}

impl PolaritonState {
    /// Site vacuum `|0-> = |0,g>`.
    pub fn vacuum() -> Self {
        PolaritonState {
            n: 0,
            branch: Branch::Lower,
            theta: 0.0,
            energy: 0.0,
        }
    }

    /// `(amplitude, photons, qubit level)` of the non-zero site components.
    pub fn components(&self) -> Vec<(f64, u32, Level)> {
        if self.n == 0 {
            return vec![(1.0, 0, Level::Ground)];
        }
        let (s, c) = self.theta.sin_cos();
        match self.branch {
            Branch::Upper => vec![(c, self.n, Level::Ground), (s, self.n - 1, Level::Excited)],
            Branch::Lower => vec![(s, self.n, Level::Ground), (-c, self.n - 1, Level::Excited)],
        }
    }

    /// Short label such as `1-` or `2+`.
    pub fn label(&self) -> String {
        let sign = match self.branch {
            Branch::Lower => '-',
            Branch::Upper => '+',
        };
        format!("{}{}", self.n, sign)
    }
}

/// `theta_n` with `tan(theta_n) = (D/2 + sqrt(D^2/4 + n g^2)) / (sqrt(n) g)`.
pub fn mixing_angle(delta: f64, g: f64, n: u32) -> f64 {
    let root_n = (n as f64).sqrt();
    let numerator = delta / 2.0 + (delta * delta / 4.0 + n as f64 * g * g).sqrt();
    numerator.atan2(root_n * g)
}

/// Single-site block on `(|n,g>, |n-1,e>)` for resonator frequency `wprime`.
pub fn jc_block(epsilon: f64, wprime: f64, g: f64, n: u32) -> DMatrix<Complex64> {
    let nf = n as f64;
    let c = |x: f64| Complex64::new(x, 0.0);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c(nf * wprime),
            c(nf.sqrt() * g),
            c(nf.sqrt() * g),
            c((nf - 1.0) * wprime + epsilon),
        ],
    )
}

/// `(|n->, |n+>)` for one site with resonator frequency `wprime`.
pub fn polariton_states(params: &SystemParams, wprime: f64, n: u32) -> Result<(PolaritonState, PolaritonState)> {
    if n == 0 {
        return Err(Error::Invalid(
            "n = 0 has the single state |0,g>; use PolaritonState::vacuum".into(),
        ));
    }
    if n > params.n_max {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: format!("cutoff {} cannot hold the {n}-polariton states", params.n_max),
        });
    }
    let delta = params.epsilon - wprime;
    let theta = mixing_angle(delta, params.g, n);
    let centre = n as f64 * wprime + delta / 2.0;
    let root = (delta * delta / 4.0 + n as f64 * params.g * params.g).sqrt();
    let state = |branch, energy| PolaritonState {
        n,
        branch,
        theta,
        energy,
    };
    Ok((state(Branch::Lower, centre - root), state(Branch::Upper, centre + root)))
}

/// `|n->`, including the vacuum at `n = 0`.
pub fn lower_polariton(params: &SystemParams, wprime: f64, n: u32) -> Result<PolaritonState> {
    if n == 0 {
        return Ok(PolaritonState::vacuum());
    }
    Ok(polariton_states(params, wprime, n)?.0)
}

/// Polariton-polariton on-site repulsion
/// `u_r = E(|2->|0->) - E(|1->|1->) = -D/2 + 2 sqrt(D^2/4 + g^2) - sqrt(D^2/4 + 2 g^2)`.
pub fn repulsion_energy(params: &SystemParams, wprime: f64) -> f64 {
    let d = params.epsilon - wprime;
    let g2 = params.g * params.g;
    -d / 2.0 + 2.0 * (d * d / 4.0 + g2).sqrt() - (d * d / 4.0 + 2.0 * g2).sqrt()
}

/// `|knob> (x) |s1>_1 (x) |s2>_2` on `basis`.
pub fn product_state(
    basis: &Arc<Basis>,
    site1: &PolaritonState,
    site2: &PolaritonState,
    knob: Level,
) -> Result<StateVector> {
    let mut amplitudes = nalgebra::DVector::zeros(basis.dim());
    for (a1, n1, q1) in site1.components() {
        for (a2, n2, q2) in site2.components() {
            let s = BasisState::new(n1, n2, q1, q2, knob);
            let i = basis.index_of(&s).ok_or_else(|| Error::MissingState(s.to_string()))?;
            amplitudes[i] += Complex64::new(a1 * a2, 0.0);
        }
    }
    Ok(StateVector::from_amplitudes_unchecked(Arc::clone(basis), amplitudes))
}
