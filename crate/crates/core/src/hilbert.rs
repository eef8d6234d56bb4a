//! Truncated joint Hilbert space of two resonators, two site qubits and the
//! knob qubit, together with the elementary operators acting on it.
//!
//! Basis states are ordered lexicographically by `(n1, n2, q1, q2, qc)` with
//! `g < e`, so component indices are stable across runs and the CSV outputs
//! are reproducible.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::StateVector;
use crate::error::{Error, Result};

/// Two-level label. `Ground < Excited`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Ground,
    Excited,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Ground, Level::Excited];

    pub fn occupation(self) -> u32 {
        match self {
            Level::Ground => 0,
            Level::Excited => 1,
        }
    }

    /// Eigenvalue of `|e><e| - |g><g|`.
    pub fn sigma_z(self) -> f64 {
        match self {
            Level::Ground => -1.0,
            Level::Excited => 1.0,
        }
    }

    pub fn flipped(self) -> Level {
        match self {
            Level::Ground => Level::Excited,
            Level::Excited => Level::Ground,
        }
    }

    fn symbol(self) -> char {
        match self {
            Level::Ground => 'g',
            Level::Excited => 'e',
        }
    }
}

/// Resonator index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::One, Mode::Two];

    /// The qubit sitting inside this resonator.
    pub fn local_qubit(self) -> Qubit {
        match self {
            Mode::One => Qubit::Site1,
            Mode::Two => Qubit::Site2,
        }
    }
}

impl TryFrom<u32> for Mode {
    type Error = Error;

    fn try_from(index: u32) -> Result<Self> {
        match index {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            other => Err(Error::UnknownMode(other)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qubit {
    Site1,
    Site2,
    Knob,
}

impl std::str::FromStr for Qubit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q1" => Ok(Qubit::Site1),
            "q2" => Ok(Qubit::Site2),
            "qc" => Ok(Qubit::Knob),
            other => Err(Error::UnknownQubit(other.to_string())),
        }
    }
}

/// Occupation-number label of one product state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisState {
    pub n1: u32,
    pub n2: u32,
    pub q1: Level,
    pub q2: Level,
    pub qc: Level,
}

impl BasisState {
    pub const VACUUM: BasisState = BasisState {
        n1: 0,
        n2: 0,
        q1: Level::Ground,
        q2: Level::Ground,
        qc: Level::Ground,
    };

    pub fn new(n1: u32, n2: u32, q1: Level, q2: Level, qc: Level) -> Self {
        BasisState { n1, n2, q1, q2, qc }
    }

    pub fn photons(&self, mode: Mode) -> u32 {
        match mode {
            Mode::One => self.n1,
            Mode::Two => self.n2,
        }
    }

    pub fn level(&self, qubit: Qubit) -> Level {
        match qubit {
            Qubit::Site1 => self.q1,
            Qubit::Site2 => self.q2,
            Qubit::Knob => self.qc,
        }
    }

    pub fn with_photons(mut self, mode: Mode, n: u32) -> Self {
        match mode {
            Mode::One => self.n1 = n,
            Mode::Two => self.n2 = n,
        }
        self
    }

    pub fn with_level(mut self, qubit: Qubit, level: Level) -> Self {
        match qubit {
            Qubit::Site1 => self.q1 = level,
            Qubit::Site2 => self.q2 = level,
            Qubit::Knob => self.qc = level,
        }
        self
    }

    /// Total excitation number including the knob qubit.
    pub fn excitation_total(&self) -> u32 {
        self.n1 + self.n2 + self.q1.occupation() + self.q2.occupation() + self.qc.occupation()
    }

    /// Excitations held by the two resonator sites (photons plus site qubits).
    pub fn polariton_count(&self) -> u32 {
        self.n1 + self.n2 + self.q1.occupation() + self.q2.occupation()
    }

    /// Polariton number of one site: photons plus the local qubit excitation.
    pub fn site_polaritons(&self, mode: Mode) -> u32 {
        self.photons(mode) + self.level(mode.local_qubit()).occupation()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|{},{},{},{},{}>",
            self.n1,
            self.n2,
            self.q1.symbol(),
            self.q2.symbol(),
            self.qc.symbol()
        )
    }
}

/// Restriction of the basis to a fixed excitation count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    /// `excitation_total` fixed.
    Total(u32),
    /// Resonator-site excitations fixed, knob qubit unconstrained. This is the
    /// natural space for the knob-block-diagonal effective Hamiltonian.
    Polaritons(u32),
}

impl Sector {
    fn contains(self, s: &BasisState) -> bool {
        match self {
            Sector::Total(n) => s.excitation_total() == n,
            Sector::Polaritons(n) => s.polariton_count() == n,
        }
    }

    fn max_reachable(self, n_max: u32) -> u32 {
        match self {
            Sector::Total(_) => 2 * n_max + 3,
            Sector::Polaritons(_) => 2 * n_max + 2,
        }
    }

    fn value(self) -> u32 {
        match self {
            Sector::Total(n) | Sector::Polaritons(n) => n,
        }
    }
}

/// Ordered, duplicate-free list of basis states.
#[derive(Clone, Debug)]
pub struct Basis {
    n_max: u32,
    sector: Option<Sector>,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.n_max == other.n_max && self.sector == other.sector && self.states == other.states
    }
}

impl Basis {
    pub fn new(n_max: u32, sector: Option<Sector>) -> Result<Self> {
        if let Some(sec) = sector {
            let max = sec.max_reachable(n_max);
            if sec.value() > max {
                return Err(Error::UnreachableSector {
                    sector: sec.value(),
                    n_max,
                    max,
                });
            }
        }
        let mut states = Vec::new();
        for n1 in 0..=n_max {
            for n2 in 0..=n_max {
                for q1 in Level::ALL {
                    for q2 in Level::ALL {
                        for qc in Level::ALL {
                            let s = BasisState { n1, n2, q1, q2, qc };
                            if sector.is_none_or(|sec| sec.contains(&s)) {
                                states.push(s);
                            }
                        }
                    }
                }
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(Basis {
            n_max,
            sector,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn sector(&self) -> Option<Sector> {
        self.sector
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &BasisState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &BasisState) -> bool {
        self.index.contains_key(s)
    }

    /// Basis holding the image of this one under a lowering operator that
    /// removes one unit of the total and `polariton_drop` units of the
    /// resonator-site count.
    fn lowered(self: &Arc<Self>, polariton_drop: u32) -> Result<Arc<Basis>> {
        let shifted = match self.sector {
            None => return Ok(Arc::clone(self)),
            Some(Sector::Total(n)) => Sector::Total(lower_by(n, 1)?),
            Some(Sector::Polaritons(_)) if polariton_drop == 0 => return Ok(Arc::clone(self)),
            Some(Sector::Polaritons(n)) => Sector::Polaritons(lower_by(n, polariton_drop)?),
        };
        Ok(Arc::new(Basis::new(self.n_max, Some(shifted))?))
    }
}

fn lower_by(n: u32, by: u32) -> Result<u32> {
    n.checked_sub(by)
        .ok_or_else(|| Error::Invalid(format!("sector {n} has no image under a lowering operator")))
}

/// Enumerate the truncated space, optionally restricted to a fixed total
/// excitation number.
pub fn build_basis(n_max: u32, sector: Option<u32>) -> Result<Arc<Basis>> {
    Ok(Arc::new(Basis::new(n_max, sector.map(Sector::Total))?))
}

/// Space with `polaritons` resonator-site excitations and a free knob qubit.
pub fn build_polariton_basis(n_max: u32, polaritons: u32) -> Result<Arc<Basis>> {
    Ok(Arc::new(Basis::new(n_max, Some(Sector::Polaritons(polaritons)))?))
}

/// Dense complex matrix mapping states of `domain` to states of `codomain`.
/// Square operators have identical domain and codomain.
#[derive(Clone, Debug)]
pub struct Operator {
    matrix: DMatrix<Complex64>,
    codomain: Arc<Basis>,
    domain: Arc<Basis>,
}

fn same_basis(a: &Arc<Basis>, b: &Arc<Basis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Operator {
    pub fn from_matrix(basis: Arc<Basis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::map(Arc::clone(&basis), basis, matrix)
    }

    /// Rectangular map from `domain` into `codomain`.
    pub fn map(codomain: Arc<Basis>, domain: Arc<Basis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != codomain.dim() {
            return Err(Error::DimensionMismatch {
                expected: codomain.dim(),
                found: matrix.nrows(),
            });
        }
        if matrix.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: matrix.ncols(),
            });
        }
        Ok(Operator {
            matrix,
            codomain,
            domain,
        })
    }

    pub fn zeros(basis: &Arc<Basis>) -> Self {
        let n = basis.dim();
        Operator {
            matrix: DMatrix::zeros(n, n),
            codomain: Arc::clone(basis),
            domain: Arc::clone(basis),
        }
    }

    pub fn identity(basis: &Arc<Basis>) -> Self {
        let n = basis.dim();
        Operator {
            matrix: DMatrix::identity(n, n),
            codomain: Arc::clone(basis),
            domain: Arc::clone(basis),
        }
    }

    /// Diagonal operator with entries `f(state)`.
    pub fn diagonal(basis: &Arc<Basis>, f: impl Fn(&BasisState) -> f64) -> Self {
        let diag = DVector::from_iterator(basis.dim(), basis.states().iter().map(|s| Complex64::new(f(s), 0.0)));
        Operator {
            matrix: DMatrix::from_diagonal(&diag),
            codomain: Arc::clone(basis),
            domain: Arc::clone(basis),
        }
    }

    /// Build `sum_s sum_k amp_k |t_k><s|` from the action of an operator on
    /// each basis state. Targets outside the codomain are dropped, which
    /// compresses the operator onto a restricted basis.
    pub fn from_action<F>(codomain: &Arc<Basis>, domain: &Arc<Basis>, action: F) -> Self
    where
        F: Fn(&BasisState, &mut dyn FnMut(f64, BasisState)),
    {
        let mut matrix = DMatrix::zeros(codomain.dim(), domain.dim());
        for (col, s) in domain.states().iter().enumerate() {
            action(s, &mut |amp, t| {
                if let Some(row) = codomain.index_of(&t) {
                    matrix[(row, col)] += Complex64::new(amp, 0.0);
                }
            });
        }
        Operator {
            matrix,
            codomain: Arc::clone(codomain),
            domain: Arc::clone(domain),
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Basis of a square operator (its domain).
    pub fn basis(&self) -> &Arc<Basis> {
        &self.domain
    }

    pub fn domain(&self) -> &Arc<Basis> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<Basis> {
        &self.codomain
    }

    pub fn is_square(&self) -> bool {
        same_basis(&self.domain, &self.codomain)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            matrix: self.matrix.adjoint(),
            codomain: Arc::clone(&self.domain),
            domain: Arc::clone(&self.codomain),
        }
    }

    /// `max |M - M^dag|` elementwise; infinite for rectangular maps.
    pub fn hermiticity_error(&self) -> f64 {
        if self.matrix.nrows() != self.matrix.ncols() {
            return f64::INFINITY;
        }
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_error() < tol
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn element(&self, row: &BasisState, col: &BasisState) -> Option<Complex64> {
        let r = self.codomain.index_of(row)?;
        let c = self.domain.index_of(col)?;
        Some(self.matrix[(r, c)])
    }

    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        if !same_basis(&self.domain, &rhs.codomain) {
            return Err(Error::BasisMismatch(
                "left operator's domain differs from right operator's codomain".into(),
            ));
        }
        Ok(Operator {
            matrix: &self.matrix * &rhs.matrix,
            codomain: Arc::clone(&self.codomain),
            domain: Arc::clone(&rhs.domain),
        })
    }

    fn zip(
        &self,
        rhs: &Operator,
        f: impl Fn(&DMatrix<Complex64>, &DMatrix<Complex64>) -> DMatrix<Complex64>,
    ) -> Result<Operator> {
        if !same_basis(&self.domain, &rhs.domain) || !same_basis(&self.codomain, &rhs.codomain) {
            return Err(Error::BasisMismatch("operands act on different bases".into()));
        }
        Ok(Operator {
            matrix: f(&self.matrix, &rhs.matrix),
            codomain: Arc::clone(&self.codomain),
            domain: Arc::clone(&self.domain),
        })
    }

    pub fn try_add(&self, rhs: &Operator) -> Result<Operator> {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Operator) -> Result<Operator> {
        self.zip(rhs, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Operator {
        Operator {
            matrix: &self.matrix * Complex64::new(factor, 0.0),
            codomain: Arc::clone(&self.codomain),
            domain: Arc::clone(&self.domain),
        }
    }

    /// `[self, rhs]` for square operators on the same basis.
    pub fn commutator(&self, rhs: &Operator) -> Result<Operator> {
        let ab = self.compose(rhs)?;
        let ba = rhs.compose(self)?;
        ab.try_sub(&ba)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.matrix.clone().singular_values().max()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if !same_basis(&self.domain, psi.basis()) {
            return Err(Error::BasisMismatch("state lives on a different basis".into()));
        }
        Ok(StateVector::from_amplitudes_unchecked(
            Arc::clone(&self.codomain),
            &self.matrix * psi.amplitudes(),
        ))
    }

    /// `<psi|O|psi>` for a Hermitian operator.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let o_psi = self.apply(psi)?;
        Ok(psi.amplitudes().dotc(o_psi.amplitudes()).re)
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn mul(self, rhs: &'a Operator) -> Operator {
        self.compose(rhs).expect("operator product on mismatched bases")
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn add(self, rhs: &'a Operator) -> Operator {
        self.try_add(rhs).expect("operator sum on mismatched bases")
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn sub(self, rhs: &'a Operator) -> Operator {
        self.try_sub(rhs).expect("operator difference on mismatched bases")
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;

    fn mul(self, rhs: f64) -> Operator {
        self.scale(rhs)
    }
}

/// Photon annihilation operator `a_i`.
///
/// On an unconstrained basis the result is square; on a sector-restricted
/// basis it is the rectangular map from sector `N` to sector `N - 1`.
pub fn annihilator(basis: &Arc<Basis>, mode: Mode) -> Result<Operator> {
    let target = basis.lowered(1)?;
    Ok(Operator::from_action(&target, basis, |s, push| {
        let n = s.photons(mode);
        if n > 0 {
            push((n as f64).sqrt(), s.with_photons(mode, n - 1));
        }
    }))
}

/// `a_i^dag` as a square operator on an unconstrained basis.
pub fn creator(basis: &Arc<Basis>, mode: Mode) -> Result<Operator> {
    Ok(annihilator(basis, mode)?.adjoint())
}

/// Qubit lowering operator `sigma^-` for one of the three qubits.
pub fn qubit_lowering(basis: &Arc<Basis>, which: Qubit) -> Result<Operator> {
    let polariton_drop = if which == Qubit::Knob { 0 } else { 1 };
    let target = basis.lowered(polariton_drop)?;
    Ok(Operator::from_action(&target, basis, |s, push| {
        if s.level(which) == Level::Excited {
            push(1.0, s.with_level(which, Level::Ground));
        }
    }))
}

pub fn qubit_raising(basis: &Arc<Basis>, which: Qubit) -> Result<Operator> {
    Ok(qubit_lowering(basis, which)?.adjoint())
}

/// Projector `|level><level|` on one qubit.
pub fn projector(basis: &Arc<Basis>, which: Qubit, level: Level) -> Operator {
    Operator::diagonal(basis, |s| if s.level(which) == level { 1.0 } else { 0.0 })
}

/// `sigma^z = |e><e| - |g><g|` on one qubit.
pub fn sigma_z(basis: &Arc<Basis>, which: Qubit) -> Operator {
    Operator::diagonal(basis, |s| s.level(which).sigma_z())
}

/// `a_i^dag a_i + |e><e|_i`: photons plus local qubit excitation of site `i`.
pub fn polariton_number(basis: &Arc<Basis>, mode: Mode) -> Operator {
    Operator::diagonal(basis, |s| s.site_polaritons(mode) as f64)
}

/// Total excitation number `N_tot`, including the knob qubit.
pub fn excitation_number(basis: &Arc<Basis>) -> Operator {
    Operator::diagonal(basis, |s| s.excitation_total() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(n_max: u32) -> Arc<Basis> {
        build_basis(n_max, None).unwrap()
    }

    fn ket(basis: &Arc<Basis>, s: BasisState) -> StateVector {
        StateVector::basis_state(basis, &s).unwrap()
    }

    #[test]
    fn unconstrained_dimension() {
        assert_eq!(full(1).dim(), 32);
        for n_max in 0..6 {
            assert_eq!(full(n_max).dim() as u32, (n_max + 1).pow(2) * 8);
        }
    }

    #[test]
    fn vacuum_sector() {
        let b = build_basis(0, Some(0)).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.states()[0], BasisState::VACUUM);
    }

    #[test]
    fn sector_dimension_matches_enumeration() {
        // independent count over all tuples, no ordering involved
        let mut count = 0;
        for n1 in 0..=4u32 {
            for n2 in 0..=4u32 {
                for q in 0..8u32 {
                    if n1 + n2 + q.count_ones() == 2 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(build_basis(4, Some(2)).unwrap().dim(), count);
        assert_eq!(count, 12);
    }

    #[test]
    fn unreachable_sector_rejected() {
        assert!(build_basis(1, Some(5)).is_ok());
        let err = build_basis(1, Some(6)).unwrap_err();
        assert!(matches!(err, Error::UnreachableSector { sector: 6, .. }));
        assert!(err.to_string().contains("unreachable"));
    }

    #[test]
    fn ordering_is_lexicographic() {
        let b = full(2);
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            b.states()[1],
            BasisState::VACUUM.with_level(Qubit::Knob, Level::Excited)
        );
    }

    #[test]
    fn unknown_indices_rejected() {
        assert!(matches!(Mode::try_from(3), Err(Error::UnknownMode(3))));
        assert!("q3".parse::<Qubit>().is_err());
        assert_eq!("qc".parse::<Qubit>().unwrap(), Qubit::Knob);
    }

    #[test]
    fn annihilator_matrix_elements() {
        let b = full(3);
        let a1 = annihilator(&b, Mode::One).unwrap();
        let one = BasisState::new(1, 0, Level::Ground, Level::Ground, Level::Ground);
        let out = a1.apply(&ket(&b, one)).unwrap();
        let i = b.index_of(&BasisState::VACUUM).unwrap();
        assert!((out.amplitudes()[i] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((out.norm() - 1.0).abs() < 1e-15);

        let vac = a1.apply(&ket(&b, BasisState::VACUUM)).unwrap();
        assert_eq!(vac.norm(), 0.0);

        let three = BasisState::new(3, 1, Level::Ground, Level::Excited, Level::Ground);
        let two = three.with_photons(Mode::One, 2);
        assert!((a1.element(&two, &three).unwrap().re - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn number_operator_is_diagonal_occupation() {
        let b = full(3);
        for mode in Mode::BOTH {
            let a = annihilator(&b, mode).unwrap();
            let n = &a.adjoint() * &a;
            for (i, s) in b.states().iter().enumerate() {
                for j in 0..b.dim() {
                    let expected = if i == j { s.photons(mode) as f64 } else { 0.0 };
                    assert!((n.matrix()[(i, j)].re - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn canonical_commutator_except_at_cutoff() {
        let n_max = 3;
        let b = full(n_max);
        for mode in Mode::BOTH {
            let a = annihilator(&b, mode).unwrap();
            let c = a.commutator(&a.adjoint()).unwrap();
            for (i, s) in b.states().iter().enumerate() {
                let expected = if s.photons(mode) < n_max { 1.0 } else { -(n_max as f64) };
                assert!((c.matrix()[(i, i)].re - expected).abs() < 1e-13);
            }
            let offdiag = c.matrix().clone() - DMatrix::from_diagonal(&c.matrix().diagonal());
            assert!(offdiag.iter().all(|z| z.norm() < 1e-14));
        }
    }

    #[test]
    fn knob_lowering() {
        let b = full(1);
        let sm = qubit_lowering(&b, Qubit::Knob).unwrap();
        let up = BasisState::VACUUM.with_level(Qubit::Knob, Level::Excited);
        let out = sm.apply(&ket(&b, up)).unwrap();
        assert_eq!(
            out.amplitudes()[b.index_of(&BasisState::VACUUM).unwrap()],
            Complex64::new(1.0, 0.0)
        );
        let twice = &sm * &sm;
        assert_eq!(twice.max_abs(), 0.0);
    }

    #[test]
    fn raising_lowering_anticommute_to_identity() {
        let b = full(2);
        for q in [Qubit::Site1, Qubit::Site2, Qubit::Knob] {
            let sm = qubit_lowering(&b, q).unwrap();
            let sp = sm.adjoint();
            let anti = &(&sp * &sm) + &(&sm * &sp);
            assert!((&anti - &Operator::identity(&b)).max_abs() < 1e-15);
            let sz = &(&sp * &sm) - &(&sm * &sp);
            assert!((&sz - &sigma_z(&b, q)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn polariton_number_expectations() {
        let b = full(2);
        let n1 = polariton_number(&b, Mode::One);
        let photon = BasisState::new(1, 0, Level::Ground, Level::Ground, Level::Ground);
        let qubit = BasisState::new(0, 0, Level::Excited, Level::Ground, Level::Ground);
        assert_eq!(n1.expectation(&ket(&b, photon)).unwrap(), 1.0);
        assert_eq!(n1.expectation(&ket(&b, qubit)).unwrap(), 1.0);
        assert!(n1.is_hermitian(1e-12));
    }

    #[test]
    fn elementary_operators_are_real() {
        let b = full(2);
        assert!(annihilator(&b, Mode::Two).unwrap().is_real());
        assert!(qubit_lowering(&b, Qubit::Site1).unwrap().is_real());
        assert!(excitation_number(&b).is_real());
    }

    #[test]
    fn sector_maps_are_rectangular() {
        let b2 = build_basis(3, Some(2)).unwrap();
        let a1 = annihilator(&b2, Mode::One).unwrap();
        assert_eq!(a1.domain().dim(), b2.dim());
        assert_eq!(a1.codomain().sector(), Some(Sector::Total(1)));
        assert_eq!(a1.matrix().nrows(), build_basis(3, Some(1)).unwrap().dim());

        let p = build_polariton_basis(2, 2).unwrap();
        assert_eq!(p.dim(), 16);
        let sc = qubit_lowering(&p, Qubit::Knob).unwrap();
        assert!(sc.is_square());
        let s1 = qubit_lowering(&p, Qubit::Site1).unwrap();
        assert_eq!(s1.codomain().sector(), Some(Sector::Polaritons(1)));

        let vac = build_basis(2, Some(0)).unwrap();
        assert!(annihilator(&vac, Mode::One).is_err());
    }

    #[test]
    fn mismatched_products_rejected() {
        let a = annihilator(&full(1), Mode::One).unwrap();
        let b = annihilator(&full(2), Mode::One).unwrap();
        assert!(a.compose(&b).is_err());
        assert!(a.try_add(&b).is_err());
    }
}
