//! Small linear-algebra layer: triplet accumulation, CSR storage with
//! matrix-vector products, a dense partial-pivoting solve for the per-element
//! projector systems, the sparse direct factorization used by the time
//! stepper, and a MINRES fallback for the symmetric indefinite systems.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicate entries are summed on compression.
#[derive(Clone, Debug)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &(i, _, _) in &self.entries {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; self.entries.len()];
        let mut vals = vec![0.0; self.entries.len()];
        let mut cursor = counts.clone();
        for &(i, j, v) in &self.entries {
            cols[cursor[i]] = j;
            vals[cursor[i]] = v;
            cursor[i] += 1;
        }
        // Sort each row by column and merge duplicates.
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut out_cols = Vec::with_capacity(cols.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        for i in 0..self.nrows {
            let lo = counts[i];
            let hi = counts[i + 1];
            let mut row: Vec<(usize, f64)> =
                cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                if out_cols.len() > row_ptr[i] && *out_cols.last().unwrap() == c {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_cols.push(c);
                    out_vals.push(v);
                }
            }
            row_ptr[i + 1] = out_cols.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            cols: out_cols,
            vals: out_vals,
        }
    }
}

/// Compressed sparse row matrix with just the operations the solver needs.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += self.vals[k] * x[i];
            }
        }
        y
    }

    /// Quadratic form x^T A y.
    pub fn quad_form(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.matvec(y))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute asymmetry |A - A^T|_max; the matrix must be square.
    pub fn asymmetry(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let aji = self.get(j, i);
                max = max.max((self.vals[k] - aji).abs());
            }
        }
        max
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.cols[k] == j {
                return self.vals[k];
            }
        }
        0.0
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }
}

/// Dense solve with partial pivoting and multiple right-hand sides. Declares
/// the system singular when a pivot falls below 1e-12 of the largest pivot
/// seen so far.
pub fn solve_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    let mut lu = a.clone();
    let mut x = b.clone();
    let mut max_pivot = 0.0f64;
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if lu[(i, k)].abs() > lu[(piv, k)].abs() {
                piv = i;
            }
        }
        let pval = lu[(piv, k)].abs();
        max_pivot = max_pivot.max(pval);
        if pval <= 1e-12 * max_pivot.max(f64::MIN_POSITIVE) {
            return Err(pval);
        }
        if piv != k {
            lu.swap_rows(piv, k);
            x.swap_rows(piv, k);
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = 0.0;
            for j in (k + 1)..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..x.ncols() {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    for j in 0..x.ncols() {
        for k in (0..n).rev() {
            let mut acc = x[(k, j)];
            for m in (k + 1)..n {
                acc -= lu[(k, m)] * x[(m, j)];
            }
            x[(k, j)] = acc / lu[(k, k)];
        }
    }
    Ok(x)
}

/// Sparse LU (fill-reducing ordering chosen by the backend) of a square
/// matrix given in triplet form; the factorization is reused across
/// time steps.
pub struct DirectSolver {
    lu: Lu<usize, f64>,
    n: usize,
}

impl DirectSolver {
    pub fn factorize(n: usize, entries: &[(usize, usize, f64)]) -> Result<DirectSolver> {
        let triplets: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::SingularGlobal(format!("sparse assembly failed: {e:?}")))?;
        let symbolic = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| Error::SingularGlobal(format!("symbolic factorization failed: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, mat.rb())
            .map_err(|e| Error::SingularGlobal(format!("numeric factorization failed: {e:?}")))?;
        Ok(DirectSolver { lu, n })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        assert_eq!(rhs.len(), self.n);
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        DVector::from_fn(self.n, |i, _| x[(i, 0)])
    }
}

/// MINRES for symmetric (possibly indefinite) systems with symmetric diagonal
/// preconditioning. Fallback solver selectable by configuration.
pub fn minres(
    a: &CsrMatrix,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let n = a.nrows;
    assert_eq!(a.ncols, n);
    // Symmetric scaling M = D^-1/2 A D^-1/2 keeps the operator symmetric.
    let mut d = DVector::from_element(n, 1.0);
    for i in 0..n {
        let aii = a.get(i, i).abs();
        if aii > 0.0 {
            d[i] = 1.0 / aii.sqrt();
        }
    }
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let scaled = x.component_mul(&d);
        let y = a.matvec(&scaled);
        y.component_mul(&d)
    };
    let b_scaled = b.component_mul(&d);
    let b_norm = b_scaled.norm();
    if b_norm == 0.0 {
        return Ok(DVector::zeros(n));
    }

    let mut x = DVector::zeros(n);
    let r = b_scaled.clone();
    let mut beta = r.norm();
    let mut v_prev: DVector<f64> = DVector::zeros(n);
    let mut v = &r / beta;
    let mut c_prev = 1.0;
    let mut s_prev = 0.0;
    let mut c = 1.0;
    let mut s = 0.0;
    let mut w = DVector::zeros(n);
    let mut w_prev = DVector::zeros(n);
    let mut eta = beta;
    let mut res = beta;

    for iter in 0..max_iter {
        let mut av = apply(&v);
        let alpha = v.dot(&av);
        av.axpy(-alpha, &v, 1.0);
        av.axpy(-beta, &v_prev, 1.0);
        let beta_next = av.norm();

        // Two previous Givens rotations.
        let rho1_bar = c * alpha - c_prev * s * beta;
        let rho2 = s * alpha + c_prev * c * beta;
        let rho3 = s_prev * beta;
        let rho1 = (rho1_bar * rho1_bar + beta_next * beta_next).sqrt();
        if rho1 == 0.0 {
            break;
        }
        let c_next = rho1_bar / rho1;
        let s_next = beta_next / rho1;

        let w_next = (&v - rho3 * &w_prev - rho2 * &w) / rho1;
        x.axpy(c_next * eta, &w_next, 1.0);
        res *= s_next.abs();
        eta *= -s_next;

        if res <= tol * b_norm {
            return Ok(x.component_mul(&d));
        }
        if beta_next == 0.0 {
            break;
        }

        v_prev = v;
        v = av / beta_next;
        beta = beta_next;
        w_prev = w;
        w = w_next;
        c_prev = c;
        s_prev = s;
        c = c_next;
        s = s_next;
        let _ = iter;
    }
    let final_res = {
        let scaled = x.component_mul(&d);
        (b - a.matvec(&scaled)).norm() / b.norm().max(f64::MIN_POSITIVE)
    };
    if final_res <= tol * 10.0 {
        Ok(x.component_mul(&d))
    } else {
        Err(Error::NoConvergence {
            residual: final_res,
            iterations: max_iter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_matvec_and_duplicates() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 1.0); // merged
        t.push(0, 1, 3.0);
        t.push(1, 0, -1.0);
        let m = t.to_csr();
        let x = DVector::from_vec(vec![2.0, 1.0]);
        let y = m.matvec(&x);
        assert_eq!(y[0], 7.0);
        assert_eq!(y[1], -2.0);
        let yt = m.matvec_transpose(&DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(yt[0], 1.0);
        assert_eq!(yt[1], 3.0);
    }

    #[test]
    fn dense_solve_and_singularity() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = DMatrix::from_column_slice(3, 1, &[3.0, 5.0, 3.0]);
        let x = solve_dense(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[(i, 0)] - 1.0).abs() < 1e-13);
        }
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(solve_dense(&sing, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn direct_solver_indefinite() {
        // Saddle system [[2, 1], [1, 0]].
        let entries = vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)];
        let solver = DirectSolver::factorize(2, &entries).unwrap();
        let x = solver.solve(&DVector::from_vec(vec![3.0, 1.0]));
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn minres_matches_direct_on_symmetric_indefinite() {
        let mut t = Triplets::new(4, 4);
        let dense = [
            [4.0, 1.0, 0.0, 2.0],
            [1.0, 3.0, 1.0, 0.0],
            [0.0, 1.0, -2.0, 1.0],
            [2.0, 0.0, 1.0, -1.0],
        ];
        let mut entries = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if dense[i][j] != 0.0 {
                    t.push(i, j, dense[i][j]);
                    entries.push((i, j, dense[i][j]));
                }
            }
        }
        let csr = t.to_csr();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let direct = DirectSolver::factorize(4, &entries).unwrap().solve(&b);
        let iterative = minres(&csr, &b, 1e-12, 200).unwrap();
        assert!((direct - iterative).norm() < 1e-9);
    }
}
