//! Sparse linear algebra for the implicit grid solvers: CSR storage, ILU(0)
//! preconditioning and right-preconditioned BiCGSTAB.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Row-by-row builder; duplicate columns within a row are summed.
#[derive(Debug)]
pub struct CsrBuilder {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    row: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn new(n: usize, nnz_hint: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self {
            n,
            row_ptr,
            cols: Vec::with_capacity(nnz_hint),
            vals: Vec::with_capacity(nnz_hint),
            row: Vec::with_capacity(8),
        }
    }

    pub fn add(&mut self, col: usize, val: f64) {
        debug_assert!(col < self.n);
        self.row.push((col, val));
    }

    pub fn finish_row(&mut self) {
        self.row.sort_unstable_by_key(|e| e.0);
        let mut last = usize::MAX;
        for &(c, v) in &self.row {
            if c == last {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = c;
            }
        }
        self.row.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(self) -> CsrMatrix {
        assert_eq!(self.row_ptr.len(), self.n + 1, "every row must be finished");
        CsrMatrix { n: self.n, row_ptr: self.row_ptr, cols: self.cols, vals: self.vals }
    }
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, a)| a * x[j]).sum();
        }
    }

    /// Column sums, used by conservation checks.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for (j, v) in self.cols.iter().zip(&self.vals) {
            s[*j] += v;
        }
        s
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.cols[k] == i {
                    *d = k;
                }
            }
            if *d == usize::MAX {
                return Err(Error::NumericalDegeneracy("matrix row without diagonal entry"));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.cols[k]] = k;
            }
            for k in start..end {
                let col = lu.cols[k];
                if col >= i {
                    break;
                }
                let pivot = lu.vals[diag[col]];
                if pivot == 0.0 {
                    return Err(Error::NumericalDegeneracy("zero pivot in ILU(0)"));
                }
                let factor = lu.vals[k] / pivot;
                lu.vals[k] = factor;
                for m in diag[col] + 1..lu.row_ptr[col + 1] {
                    let target = pos[lu.cols[m]];
                    if target != usize::MAX {
                        lu.vals[target] -= factor * lu.vals[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.cols[k]] = usize::MAX;
            }
            if lu.vals[diag[i]] == 0.0 {
                return Err(Error::NumericalDegeneracy("zero pivot in ILU(0)"));
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `(LU) z = r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s / lu.vals[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { relative_tolerance: 1e-10, max_iterations: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Solves `A x = b` starting from the contents of `x`.
pub fn solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], settings: &SolverSettings) -> Result<SolveReport> {
    solve_preconditioned(a, &Ilu0::new(a)?, b, x, settings)
}

/// [`solve`] with a factorization of `a` computed by the caller, for
/// repeated right-hand sides.
pub fn solve_preconditioned(
    a: &CsrMatrix,
    pre: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    settings: &SolverSettings,
) -> Result<SolveReport> {
    let n = a.n;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport::default());
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = norm(&r) / bnorm;
    if res <= settings.relative_tolerance {
        return Ok(SolveReport { iterations: 0, relative_residual: res });
    }
    let r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    for it in 1..=settings.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::SolverDiverged { iterations: it, relative_residual: res });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut y);
        a.mul_vec(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(Error::SolverDiverged { iterations: it, relative_residual: res });
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let snorm = norm(&s) / bnorm;
        if snorm <= settings.relative_tolerance {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(SolveReport { iterations: it, relative_residual: true_residual(a, b, x, bnorm) });
        }
        pre.apply(&s, &mut z);
        a.mul_vec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / bnorm;
        if res <= settings.relative_tolerance {
            return Ok(SolveReport { iterations: it, relative_residual: true_residual(a, b, x, bnorm) });
        }
        if omega == 0.0 {
            return Err(Error::SolverDiverged { iterations: it, relative_residual: res });
        }
    }
    Err(Error::SolverDiverged { iterations: settings.max_iterations, relative_residual: res })
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], bnorm: f64) -> f64 {
    let mut ax = vec![0.0; a.n];
    a.mul_vec(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    norm(&r) / bnorm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_2d(n: usize, shift: f64, skew: f64) -> CsrMatrix {
        let mut b = CsrBuilder::new(n * n, 5 * n * n);
        for j in 0..n {
            for i in 0..n {
                let p = j * n + i;
                b.add(p, 4.0 + shift);
                if i > 0 {
                    b.add(p - 1, -1.0 - skew);
                }
                if i + 1 < n {
                    b.add(p + 1, -1.0 + skew);
                }
                if j > 0 {
                    b.add(p - n, -1.0);
                }
                if j + 1 < n {
                    b.add(p + n, -1.0);
                }
                b.finish_row();
            }
        }
        b.build()
    }

    #[test]
    fn builder_merges_duplicates() {
        let mut b = CsrBuilder::new(2, 4);
        b.add(1, 1.0);
        b.add(0, 2.0);
        b.add(1, 3.0);
        b.finish_row();
        b.add(1, 1.0);
        b.finish_row();
        let m = b.build();
        assert_eq!(m.row(0), (&[0usize, 1][..], &[2.0, 4.0][..]));
    }

    #[test]
    fn ilu_is_exact_on_tridiagonal() {
        let n = 50;
        let mut b = CsrBuilder::new(n, 3 * n);
        for i in 0..n {
            b.add(i, 3.0 + i as f64 * 0.01);
            if i > 0 {
                b.add(i - 1, -1.2);
            }
            if i + 1 < n {
                b.add(i + 1, -0.7);
            }
            b.finish_row();
        }
        let a = b.build();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let rep = solve(&a, &rhs, &mut x, &SolverSettings::default()).unwrap();
        assert!(rep.iterations <= 1);
        assert!(rep.relative_residual < 1e-14);
    }

    #[test]
    fn bicgstab_nonsymmetric_2d() {
        let n = 40;
        let a = poisson_2d(n, 0.1, 0.4);
        let exact: Vec<f64> = (0..n * n).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let mut rhs = vec![0.0; n * n];
        a.mul_vec(&exact, &mut rhs);
        let mut x = vec![0.0; n * n];
        let rep = solve(&a, &rhs, &mut x, &SolverSettings::default()).unwrap();
        assert!(rep.relative_residual <= 1e-10);
        let err = x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "err {err}");
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let a = poisson_2d(30, 0.0, 0.0);
        let rhs = vec![1.0; 900];
        let mut x = vec![0.0; 900];
        let settings = SolverSettings { relative_tolerance: 1e-14, max_iterations: 1 };
        assert!(matches!(solve(&a, &rhs, &mut x, &settings), Err(Error::SolverDiverged { .. })));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = poisson_2d(5, 0.0, 0.0);
        let mut x = vec![1.0; 25];
        solve(&a, &[0.0; 25], &mut x, &SolverSettings::default()).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }
}
