//! Sparse storage and the two linear solvers: SSOR-preconditioned conjugate
//! gradient for the symmetric positive definite heat systems, and a skyline
//! (profile) LU factorization for the Newton tangent systems, which can lose
//! positive definiteness.

use crate::error::FemError;

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            let slot = next[i];
            cols[slot] = j;
            vals[slot] = v;
            next[i] += 1;
        }
        // sort each row and merge duplicates
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for i in 0..n {
            let (lo, hi) = (counts[i], counts[i + 1]);
            let mut row: Vec<(usize, f64)> =
                cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Largest |A_ij - A_ji| over the stored pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// SSOR preconditioner M = w/(2-w) (D/w + L) D^{-1} (D/w + U), applied by a
/// forward then a backward triangular sweep.
struct Ssor<'a> {
    a: &'a CsrMatrix,
    omega: f64,
    diag: Vec<f64>,
}

impl<'a> Ssor<'a> {
    fn new(a: &'a CsrMatrix, omega: f64) -> Result<Ssor<'a>, FemError> {
        if !(omega > 0.0 && omega < 2.0) {
            return Err(FemError::InvalidArgument(format!(
                "SSOR relaxation omega = {omega} must lie in (0, 2)"
            )));
        }
        let mut diag = vec![0.0; a.n];
        for i in 0..a.n {
            diag[i] = a.get(i, i);
            if diag[i] == 0.0 {
                return Err(FemError::SingularMatrix { pivot: i });
            }
        }
        Ok(Ssor { a, omega, diag })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.a.n;
        let w = self.omega;
        let scale = (2.0 - w) / w;
        // forward: (D/w + L) y = scale * r
        for i in 0..n {
            let mut s = scale * r[i];
            for k in self.a.row_ptr[i]..self.a.row_ptr[i + 1] {
                let j = self.a.col_idx[k];
                if j < i {
                    s -= self.a.values[k] * z[j];
                }
            }
            z[i] = s * w / self.diag[i];
        }
        // backward: (D/w + U) z = D y
        for i in (0..n).rev() {
            let mut s = self.diag[i] * z[i];
            for k in self.a.row_ptr[i]..self.a.row_ptr[i + 1] {
                let j = self.a.col_idx[k];
                if j > i {
                    s -= self.a.values[k] * z[j];
                }
            }
            z[i] = s * w / self.diag[i];
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradient with SSOR preconditioning. Non-convergence within
/// `max_iter` is reported through the `converged` flag, not as an error;
/// a vanishing p^T A p inner product is.
pub fn cg_ssor(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    omega: f64,
) -> Result<CgSolution, FemError> {
    assert_eq!(a.n, b.len());
    let precond = Ssor::new(a, omega)?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; a.n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut x = vec![0.0; a.n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; a.n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; a.n];
    let mut iterations = 0;

    // Debug-mode monitor: the CG energy functional 0.5 x'Ax - b'x must not
    // increase on SPD systems.
    #[cfg(debug_assertions)]
    let mut phi_prev = f64::INFINITY;

    for it in 0..max_iter {
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq == 0.0 || !pq.is_finite() {
            return Err(FemError::CgBreakdown { iteration: it });
        }
        let alpha = rz / pq;
        for i in 0..a.n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        iterations = it + 1;

        #[cfg(debug_assertions)]
        {
            let ax = a.matvec_alloc(&x);
            let phi = 0.5 * dot(&x, &ax) - dot(b, &x);
            debug_assert!(
                phi <= phi_prev + 1e-12 * (1.0 + phi_prev.abs()),
                "CG energy increased: {phi} after {phi_prev}"
            );
            phi_prev = phi;
        }

        if norm(&r) / bnorm <= tol {
            break;
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..a.n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let mut resid = b.to_vec();
    let ax = a.matvec_alloc(&x);
    for i in 0..a.n {
        resid[i] -= ax[i];
    }
    let relative_residual = norm(&resid) / bnorm;
    Ok(CgSolution {
        x,
        iterations,
        relative_residual,
        converged: relative_residual <= tol,
    })
}

/// Skyline (profile) LU factorization for matrices with a structurally
/// symmetric pattern. The structured-grid orderings used here are already
/// narrow-band, so no reordering or pivoting is performed; an exact zero
/// pivot is reported with its index.
pub struct SkylineLu {
    n: usize,
    jmin: Vec<usize>,
    /// Unit-lower rows: row i holds columns jmin[i]..i.
    lptr: Vec<usize>,
    lval: Vec<f64>,
    /// Upper columns: column j holds rows jmin[j]..=j (diagonal last).
    uptr: Vec<usize>,
    uval: Vec<f64>,
}

impl SkylineLu {
    pub fn factorize(a: &CsrMatrix) -> Result<SkylineLu, FemError> {
        let n = a.n;
        let mut jmin: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                // symmetric envelope: entry (i, j) widens both triangles
                jmin[i] = jmin[i].min(j);
                jmin[j] = jmin[j].min(i);
            }
        }
        let mut lptr = vec![0usize; n + 1];
        let mut uptr = vec![0usize; n + 1];
        for i in 0..n {
            lptr[i + 1] = lptr[i] + (i - jmin[i]);
            uptr[i + 1] = uptr[i] + (i - jmin[i] + 1);
        }
        let mut lval = vec![0.0f64; lptr[n]];
        let mut uval = vec![0.0f64; uptr[n]];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                let v = a.values[k];
                if j < i {
                    lval[lptr[i] + (j - jmin[i])] = v;
                } else {
                    uval[uptr[j] + (i - jmin[j])] = v;
                }
            }
        }

        // The update sums run over contiguous slices of one L row and one
        // U column, so they reduce to dot products.
        fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
            a.iter().zip(b).map(|(x, y)| x * y).sum()
        }
        for j in 0..n {
            // row j of L (left of the diagonal)
            for k in jmin[j]..j {
                let lo = jmin[j].max(jmin[k]);
                let lrow = lptr[j] + (lo - jmin[j])..lptr[j] + (k - jmin[j]);
                let ucol = uptr[k] + (lo - jmin[k])..uptr[k] + (k - jmin[k]);
                let s = lval[lptr[j] + (k - jmin[j])]
                    - dot_slices(&lval[lrow], &uval[ucol]);
                let pivot = uval[uptr[k] + (k - jmin[k])];
                lval[lptr[j] + (k - jmin[j])] = s / pivot;
            }
            // column j of U (including the diagonal)
            for i in jmin[j]..=j {
                let lo = jmin[i].max(jmin[j]);
                let lrow = lptr[i] + (lo - jmin[i])..lptr[i] + (i - jmin[i]);
                let ucol = uptr[j] + (lo - jmin[j])..uptr[j] + (i - jmin[j]);
                let s = uval[uptr[j] + (i - jmin[j])]
                    - dot_slices(&lval[lrow], &uval[ucol]);
                uval[uptr[j] + (i - jmin[j])] = s;
            }
            let pivot = uval[uptr[j] + (j - jmin[j])];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(FemError::SingularMatrix { pivot: j });
            }
        }
        Ok(SkylineLu {
            n,
            jmin,
            lptr,
            lval,
            uptr,
            uval,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        for i in 0..self.n {
            let lrow = &self.lval[self.lptr[i]..self.lptr[i + 1]];
            let s: f64 = lrow
                .iter()
                .zip(&y[self.jmin[i]..i])
                .map(|(l, yk)| l * yk)
                .sum();
            y[i] -= s;
        }
        // back substitution by columns of U
        for j in (0..self.n).rev() {
            let xj = y[j] / self.uval[self.uptr[j] + (j - self.jmin[j])];
            y[j] = xj;
            let ucol = &self.uval[self.uptr[j]..self.uptr[j] + (j - self.jmin[j])];
            for (yi, uij) in y[self.jmin[j]..j].iter_mut().zip(ucol) {
                *yi -= uij * xj;
            }
        }
        y
    }
}

/// Factorize and solve in one call.
pub fn sparse_direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, FemError> {
    Ok(SkylineLu::factorize(a)?.solve(b))
}
