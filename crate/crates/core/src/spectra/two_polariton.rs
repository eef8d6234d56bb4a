//! The sixteen two-polariton levels of the effective Hamiltonian and the
//! labelling of its eigenstates against localized and delocalized
//! reference states.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::polariton::{lower_polariton, polariton_states, product_state, PolaritonState};
use super::{eig_hermitian, EigenDecomposition, DEGENERACY_GAP};
use crate::dynamics::StateVector;
use crate::error::{Error, Result};
use crate::hamiltonian::{build_h_eff, SystemParams};
use crate::hilbert::{build_polariton_basis, Basis, Level, Operator};

/// Number of named references; every other level is labelled by energy.
const NAMED: usize = 11;

/// Label attached to one energy level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelLabel {
    /// One-based label `l` of `|psi>^l`.
    pub label: usize,
    /// Reference state the level was matched to, if any.
    pub reference: Option<String>,
    /// `|<reference|psi>|`, or zero when unmatched.
    pub overlap: f64,
}

#[derive(Clone, Debug)]
pub struct TwoPolaritonSpectrum {
    params: SystemParams,
    eig: EigenDecomposition,
    labels: Vec<LevelLabel>,
}

impl TwoPolaritonSpectrum {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Energy-ordered decomposition; degenerate clusters are rotated onto
    /// the references.
    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.eig.basis()
    }

    /// Label of every energy level, in energy order.
    pub fn labels(&self) -> &[LevelLabel] {
        &self.labels
    }

    /// True when `|psi>^l` is the `l`-th level for all `l`.
    pub fn labels_follow_energy(&self) -> bool {
        self.labels.iter().enumerate().all(|(k, l)| l.label == k + 1)
    }

    fn level_of(&self, label: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.label == label)
            .ok_or(Error::TooFewLevels {
                needed: label,
                found: self.labels.len(),
            })
    }

    /// `|psi>^label`.
    pub fn state(&self, label: usize) -> Result<StateVector> {
        Ok(self.eig.vector(self.level_of(label)?))
    }

    /// `E_label`.
    pub fn energy(&self, label: usize) -> Result<f64> {
        Ok(self.eig.values()[self.level_of(label)?])
    }

    /// Energies re-referenced so that `E_1 = 0`, in energy order.
    pub fn relative_energies(&self) -> Vec<f64> {
        let e1 = self.eig.values()[0];
        self.eig.values().iter().map(|e| e - e1).collect()
    }
}

/// `|knob, s1, s2>` for the named references. Both knob branches use the
/// Stark-shifted resonator frequency of their own block.
struct Reference {
    name: String,
    state: StateVector,
}

fn sites(params: &SystemParams, knob: Level) -> Result<[PolaritonState; 5]> {
    let wp = params.shifted_resonator(knob)?;
    let (l1, u1) = polariton_states(params, wp, 1)?;
    let (l2, u2) = polariton_states(params, wp, 2)?;
    Ok([lower_polariton(params, wp, 0)?, l1, u1, l2, u2])
}

/// The eight g^c-block product states, in the order
/// `1-1-, 2-0-, 0-2-, 1-1+, 1+1-, 2+0-, 0-2+, 1+1+`.
pub fn localized_reference_states(params: &SystemParams, basis: &Arc<Basis>) -> Result<Vec<(String, StateVector)>> {
    let [z, l1, u1, l2, u2] = sites(params, Level::Ground)?;
    let pairs = [
        (l1, l1),
        (l2, z),
        (z, l2),
        (l1, u1),
        (u1, l1),
        (u2, z),
        (z, u2),
        (u1, u1),
    ];
    pairs
        .iter()
        .map(|(a, b)| {
            let name = format!("g,{},{}", a.label(), b.label());
            Ok((name, product_state(basis, a, b, Level::Ground)?))
        })
        .collect()
}

/// `phi^1, phi^2, phi^3` in the e^c block:
///
/// ```text
/// phi^1 = 1/2 |2-,0-> + 1/2 |0-,2-> - 1/sqrt2 |1-,1->
/// phi^2 = 1/sqrt2 (|2-,0-> - |0-,2->)
/// phi^3 = 1/2 |2-,0-> + 1/2 |0-,2-> + 1/sqrt2 |1-,1->
/// ```
pub fn delocalized_reference_states(params: &SystemParams, basis: &Arc<Basis>) -> Result<[StateVector; 3]> {
    let [z, l1, _, l2, _] = sites(params, Level::Excited)?;
    let ket = |a: &PolaritonState, b: &PolaritonState| -> Result<DVector<Complex64>> {
        Ok(product_state(basis, a, b, Level::Excited)?.amplitudes().clone())
    };
    let (twenty, oh_two, eleven) = (ket(&l2, &z)?, ket(&z, &l2)?, ket(&l1, &l1)?);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mix = |a: f64, b: f64, c: f64| {
        let v = &twenty * Complex64::new(a, 0.0) + &oh_two * Complex64::new(b, 0.0) + &eleven * Complex64::new(c, 0.0);
        StateVector::from_amplitudes_unchecked(Arc::clone(basis), v)
    };
    Ok([mix(0.5, 0.5, -r), mix(r, -r, 0.0), mix(0.5, 0.5, r)])
}

fn references(params: &SystemParams, basis: &Arc<Basis>) -> Result<Vec<Reference>> {
    let mut out: Vec<Reference> = localized_reference_states(params, basis)?
        .into_iter()
        .map(|(name, state)| Reference { name, state })
        .collect();
    for (k, state) in delocalized_reference_states(params, basis)?.into_iter().enumerate() {
        out.push(Reference {
            name: format!("e,phi{}", k + 1),
            state,
        });
    }
    debug_assert_eq!(out.len(), NAMED);
    Ok(out)
}

/// Inside every degenerate cluster, replace the arbitrary eigenbasis by the
/// projections of the references that overlap it most, orthonormalized in
/// that order.
fn align_clusters(eig: &mut EigenDecomposition, refs: &[Reference]) {
    for cluster in eig.degenerate_clusters(DEGENERACY_GAP) {
        let k = cluster.len();
        if k < 2 {
            continue;
        }
        let v = eig.vectors().columns(cluster.start, k).into_owned();
        let projections: Vec<DVector<Complex64>> =
            refs.iter().map(|r| &v * (v.adjoint() * r.state.amplitudes())).collect();
        let mut order: Vec<usize> = (0..refs.len()).collect();
        order.sort_by(|&a, &b| projections[b].norm().total_cmp(&projections[a].norm()));
        let candidates = order
            .into_iter()
            .map(|i| projections[i].clone())
            .chain(v.column_iter().map(|c| c.into_owned()));
        let mut chosen: Vec<DVector<Complex64>> = Vec::with_capacity(k);
        for mut c in candidates {
            if chosen.len() == k {
                break;
            }
            for q in &chosen {
                let overlap = q.dotc(&c);
                c -= q * overlap;
            }
            let norm = c.norm();
            if norm > 1e-6 {
                chosen.push(c / Complex64::new(norm, 0.0));
            }
        }
        eig.replace_columns(cluster, &chosen);
    }
}

/// Greedy maximum-overlap assignment of references to levels; references
/// take labels `1..=11` in their listed order and leftover levels the next
/// labels in energy order.
fn assign(eig: &EigenDecomposition, refs: &[Reference]) -> Vec<LevelLabel> {
    let n = eig.len();
    let overlaps = DMatrix::from_fn(refs.len(), n, |r, l| {
        refs[r].state.amplitudes().dotc(&eig.vectors().column(l)).norm()
    });
    let mut labels: Vec<Option<LevelLabel>> = vec![None; n];
    let mut ref_used = vec![false; refs.len()];
    for _ in 0..refs.len().min(n) {
        let mut best: Option<(usize, usize, f64)> = None;
        for r in (0..refs.len()).filter(|&r| !ref_used[r]) {
            for l in (0..n).filter(|&l| labels[l].is_none()) {
                if best.is_none_or(|(_, _, o)| overlaps[(r, l)] > o) {
                    best = Some((r, l, overlaps[(r, l)]));
                }
            }
        }
        let Some((r, l, o)) = best else { break };
        ref_used[r] = true;
        labels[l] = Some(LevelLabel {
            label: r + 1,
            reference: Some(refs[r].name.clone()),
            overlap: o,
        });
    }
    let mut next = refs.len();
    labels
        .into_iter()
        .map(|slot| {
            slot.unwrap_or_else(|| {
                next += 1;
                LevelLabel {
                    label: next,
                    reference: None,
                    overlap: 0.0,
                }
            })
        })
        .collect()
}

/// Diagonalize the effective Hamiltonian on the two-polariton space (both
/// knob states, 16 levels) and label the eigenstates.
pub fn two_polariton_spectrum(params: &SystemParams) -> Result<TwoPolaritonSpectrum> {
    if params.n_max < 2 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: "the two-polariton space needs a cutoff of at least 2".into(),
        });
    }
    let basis = build_polariton_basis(params.n_max, 2)?;
    let h = build_h_eff(params, &basis)?;
    let mut eig = eig_hermitian(&h)?;
    let refs = references(params, &basis)?;
    align_clusters(&mut eig, &refs);
    eig.recompute_residuals(h.matrix());
    let labels = assign(&eig, &refs);
    Ok(TwoPolaritonSpectrum {
        params: params.clone(),
        eig,
        labels,
    })
}

/// `T[k][j] = |<psi^k| op |psi^j>|` over the energy levels of `eig`.
pub fn transition_elements(eig: &EigenDecomposition, op: &Operator) -> Result<DMatrix<f64>> {
    if op.dim() != eig.basis().dim() || op.codomain().dim() != eig.basis().dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.basis().dim(),
            found: op.dim(),
        });
    }
    let v = eig.vectors();
    let t = v.adjoint() * op.matrix() * v;
    Ok(t.map(|z| z.norm()))
}

/// Drive frequency and the smallest detuning from any competing transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonance {
    /// `E_9 - E_1`.
    pub w_d: f64,
    /// `min(E_2, E_10 - E_9 - E_2)` with `E_1 = 0`.
    pub delta: f64,
    /// False when `delta` is below the degeneracy gap.
    pub usable: bool,
}

/// Read `w_d` and `delta` off an energy-ordered spectrum.
pub fn resonance_and_detuning(eig: &EigenDecomposition) -> Result<Resonance> {
    if eig.len() < 10 {
        return Err(Error::TooFewLevels {
            needed: 10,
            found: eig.len(),
        });
    }
    let e = eig.values();
    let rel = |l: usize| e[l - 1] - e[0];
    let w_d = rel(9);
    let delta = rel(2).min(rel(10) - rel(9) - rel(2));
    Ok(Resonance {
        w_d,
        delta,
        usable: delta > DEGENERACY_GAP,
    })
}

/// `u_r` from diagonalizing two uncoupled sites whose resonators sit at
/// `wprime`: the gap between the two lowest two-polariton levels.
pub fn numeric_repulsion(params: &SystemParams, wprime: f64) -> Result<f64> {
    // no knob coupling and no hopping leaves two bare JC sites at wprime
    let bare = SystemParams {
        w: wprime,
        g_c: 0.0,
        kappa0: 0.0,
        epsilon_c: wprime + 1e3,
        ..params.clone()
    };
    let basis = build_polariton_basis(params.n_max, 2)?;
    let h = build_h_eff(&bare, &basis)?;
    let eig = eig_hermitian(&h)?;
    let lowest = eig.values()[0];
    let next = eig
        .values()
        .iter()
        .find(|&&e| e - lowest > DEGENERACY_GAP)
        .ok_or(Error::TooFewLevels { needed: 2, found: 1 })?;
    Ok(next - lowest)
}
