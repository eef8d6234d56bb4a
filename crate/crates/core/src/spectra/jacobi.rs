//! Cyclic Jacobi diagonalization of dense complex Hermitian matrices.
//!
//! The matrix is first split into the connected components of its sparsity
//! graph (Hamiltonians that conserve an excitation number fall apart into
//! sectors), each component is diagonalized on its own, and the results are
//! scattered back.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
/// Acceptance threshold on the off-diagonal Frobenius norm, relative to the
/// Frobenius norm of the input.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-11;

/// Eigenvalues (unsorted) and the matching eigenvector columns.
pub fn eigh(a: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let mut values = vec![0.0; n];
    let mut vectors = DMatrix::zeros(n, n);
    for comp in components(a) {
        if comp.len() == 1 {
            let i = comp[0];
            values[i] = a[(i, i)].re;
            vectors[(i, i)] = Complex64::new(1.0, 0.0);
            continue;
        }
        let sub = DMatrix::from_fn(comp.len(), comp.len(), |i, j| a[(comp[i], comp[j])]);
        let (vals, vecs) = cyclic(sub)?;
        // eigenvector k of the block is stored in column comp[k]
        for (k, &col) in comp.iter().enumerate() {
            values[col] = vals[k];
            for (i, &row) in comp.iter().enumerate() {
                vectors[(row, col)] = vecs[(i, k)];
            }
        }
    }
    Ok((values, vectors))
}

/// Connected components of the graph with an edge wherever `a[i][j] != 0`.
/// Components are ordered by their smallest index, members ascending.
fn components(a: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for j in 0..n {
        for i in 0..j {
            if a[(i, j)] != Complex64::new(0.0, 0.0) || a[(j, i)] != Complex64::new(0.0, 0.0) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

fn off_norm(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn cyclic(mut a: DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    // Hermitian part only; the caller has already bounded the anti-Hermitian part
    a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut v = DMatrix::<Complex64>::identity(n, n);

    let mut sweep = 0;
    loop {
        let off = off_norm(&a);
        if off <= f64::EPSILON * scale {
            break;
        }
        if sweep == MAX_SWEEPS {
            if off <= OFF_DIAGONAL_TOLERANCE * scale {
                break;
            }
            return Err(Error::NoConvergence {
                sweeps: sweep,
                off_norm: off,
            });
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if r <= 1e-3 * f64::EPSILON * scale {
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                // negligible against both diagonal entries: drop it
                if sweep > 3 && app.abs() + 100.0 * r == app.abs() && aqq.abs() + 100.0 * r == aqq.abs() {
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                rotated = true;
                let phase = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let se = phase * s;
                let se_conj = se.conj();

                // A <- A G with G = [[c, s e], [-s e*, c]] on (p, q)
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * se_conj;
                    a[(k, q)] = akp * se + akq * c;
                }
                // A <- G^dag A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * se;
                    a[(q, k)] = apk * se_conj + aqk * c;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * se_conj;
                    v[(k, q)] = vkp * se + vkq * c;
                }
            }
        }
        sweep += 1;
        if !rotated {
            break;
        }
    }
    Ok(((0..n).map(|i| a[(i, i)].re).collect(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_structure_is_detected() {
        let mut a = DMatrix::<Complex64>::zeros(5, 5);
        a[(0, 3)] = Complex64::new(1.0, 0.0);
        a[(3, 0)] = Complex64::new(1.0, 0.0);
        a[(1, 4)] = Complex64::new(0.0, 2.0);
        a[(4, 1)] = Complex64::new(0.0, -2.0);
        assert_eq!(components(&a), vec![vec![0, 3], vec![1, 4], vec![2]]);
    }

    #[test]
    fn complex_two_by_two() {
        // [[1, 2i], [-2i, 1]] has eigenvalues -1 and 3
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(0.0, -2.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let (mut vals, _) = eigh(&a).unwrap();
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }
}
