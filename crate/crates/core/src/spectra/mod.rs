//! Hermitian eigendecomposition, analytic polariton states, and the
//! two-polariton spectrum with the quantities derived from it.

mod jacobi;
mod polariton;
mod two_polariton;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::StateVector;
use crate::error::{Error, Result};
use crate::hilbert::{Basis, Operator};

pub use jacobi::{MAX_SWEEPS, OFF_DIAGONAL_TOLERANCE};
pub use polariton::{
    jc_block, lower_polariton, mixing_angle, polariton_states, product_state, repulsion_energy, Branch, PolaritonState,
};
pub use two_polariton::{
    delocalized_reference_states, localized_reference_states, numeric_repulsion, resonance_and_detuning,
    transition_elements, two_polariton_spectrum, LevelLabel, Resonance, TwoPolaritonSpectrum,
};

/// Inputs further than this from Hermitian are rejected.
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Ascending eigenvalues with orthonormal, phase-fixed eigenvectors stored
/// as columns over the basis.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    values: Vec<f64>,
    vectors: DMatrix<Complex64>,
    residuals: Vec<f64>,
    basis: Arc<Basis>,
}

impl EigenDecomposition {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// `||H v_l - E_l v_l||` for every level.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvector `l` (zero-based).
    pub fn vector(&self, l: usize) -> StateVector {
        StateVector::from_amplitudes_unchecked(Arc::clone(&self.basis), self.vectors.column(l).into_owned())
    }

    /// `max |V^dag V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.vectors.ncols();
        let g = self.vectors.adjoint() * &self.vectors - DMatrix::<Complex64>::identity(n, n);
        g.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `V diag(E) V^dag`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = DVector::from_iterator(self.len(), self.values.iter().map(|&e| Complex64::new(e, 0.0)));
        &self.vectors * DMatrix::from_diagonal(&d) * self.vectors.adjoint()
    }

    /// Ranges of indices whose neighbouring eigenvalues lie within `gap`.
    pub fn degenerate_clusters(&self, gap: f64) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for l in 1..=self.len() {
            if l == self.len() || self.values[l] - self.values[l - 1] >= gap {
                out.push(start..l);
                start = l;
            }
        }
        out
    }

    /// Replace the columns of one degenerate cluster by another orthonormal
    /// basis of the same eigenspace.
    pub(crate) fn replace_columns(&mut self, cols: std::ops::Range<usize>, new: &[DVector<Complex64>]) {
        for (k, v) in cols.zip(new) {
            let mut v = v.clone();
            fix_phase(&mut v);
            self.vectors.set_column(k, &v);
        }
    }

    fn recompute_residuals(&mut self, h: &DMatrix<Complex64>) {
        self.residuals = (0..self.len())
            .map(|l| {
                let v = self.vectors.column(l);
                (h * v - v * Complex64::new(self.values[l], 0.0)).norm()
            })
            .collect();
    }
}

/// Rotate `v` so that its largest-magnitude component is real and positive;
/// among equal magnitudes the lowest index wins.
pub(crate) fn fix_phase(v: &mut DVector<Complex64>) {
    let max = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= phase);
    v[pivot] = Complex64::new(v[pivot].norm(), 0.0);
}

/// Diagonalize a raw Hermitian matrix: ascending eigenvalues and the
/// phase-fixed eigenvector columns.
pub fn eigh_matrix(h: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let (values, vectors) = jacobi::eigh(h)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let columns: Vec<DVector<Complex64>> = order
        .iter()
        .map(|&i| {
            let mut v = vectors.column(i).into_owned();
            fix_phase(&mut v);
            v
        })
        .collect();
    let n = h.nrows();
    let mat = if columns.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    Ok((sorted, mat))
}

/// Eigendecomposition of a Hermitian operator.
pub fn eig_hermitian(op: &Operator) -> Result<EigenDecomposition> {
    if !op.is_square() {
        return Err(Error::BasisMismatch(
            "eigendecomposition needs a square operator".into(),
        ));
    }
    let deviation = op.hermiticity_error();
    if deviation >= HERMITICITY_TOLERANCE {
        return Err(Error::NotHermitian { deviation });
    }
    let (values, vectors) = eigh_matrix(op.matrix())?;
    let mut eig = EigenDecomposition {
        values,
        vectors,
        residuals: Vec::new(),
        basis: Arc::clone(op.basis()),
    };
    eig.recompute_residuals(op.matrix());
    Ok(eig)
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn exp_i_hermitian(op: &Operator, t: f64) -> Result<Operator> {
    let eig = eig_hermitian(op)?;
    Operator::from_matrix(Arc::clone(op.basis()), evolution_matrix(&eig, t))
}

pub(crate) fn evolution_matrix(eig: &EigenDecomposition, t: f64) -> DMatrix<Complex64> {
    let phases = DVector::from_iterator(
        eig.len(),
        eig.values().iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
    );
    let v = eig.vectors();
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * v.adjoint()
}
