//! Block Davidson with a diagonal preconditioner.
//!
//! Suited to large blocks whose off-diagonal couplings are weak compared with
//! the spread of the diagonal, where plain Krylov methods crawl through dense
//! clusters of nearly degenerate levels.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use super::{eig_symmetric, LanczosOutcome, Operator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavidsonOptions {
    /// Residual bound relative to `max(1, |E|)`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Ritz vectors tracked beyond the wanted ones; `0` picks a default.
    pub guard: usize,
    /// Eigenvalues closer than this are one cluster.
    pub cluster_gap: f64,
    /// Smallest magnitude of `theta - H_ii` used in the correction equation.
    pub precond_floor: f64,
    /// Give up once this much wall time has passed.
    pub time_limit: Option<Duration>,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            tol: 1e-10,
            max_iterations: 500,
            guard: 0,
            cluster_gap: 1e-10,
            precond_floor: 1e-2,
            time_limit: None,
        }
    }
}

/// Columns of `v` (n x m, column-major) as slices.
fn col(v: &[f64], n: usize, j: usize) -> &[f64] {
    &v[j * n..(j + 1) * n]
}

/// `v[:, 0..m] * y`, for `y` of shape m x k.
fn times(v: &[f64], n: usize, m: usize, y: &DMatrix<f64>) -> Vec<f64> {
    let k = y.ncols();
    let mut out = vec![0.0; n * k];
    unsafe {
        matrixmultiply::dgemm(
            n, m, k, 1.0,
            v.as_ptr(), 1, n as isize,
            y.as_ptr(), 1, y.nrows() as isize,
            0.0,
            out.as_mut_ptr(), 1, n as isize,
        );
    }
    out
}

/// `v[:, 0..m]^T * x`, for `x` of shape n x k; result m x k.
fn inner(v: &[f64], n: usize, m: usize, x: &[f64], k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, k);
    unsafe {
        matrixmultiply::dgemm(
            m, n, k, 1.0,
            v.as_ptr(), n as isize, 1,
            x.as_ptr(), 1, n as isize,
            0.0,
            out.as_mut_ptr(), 1, m as isize,
        );
    }
    out
}

/// `x -= v[:, 0..m] * c`
fn subtract(v: &[f64], n: usize, m: usize, c: &DMatrix<f64>, x: &mut [f64]) {
    let k = c.ncols();
    unsafe {
        matrixmultiply::dgemm(
            n, m, k, -1.0,
            v.as_ptr(), 1, n as isize,
            c.as_ptr(), 1, m as isize,
            1.0,
            x.as_mut_ptr(), 1, n as isize,
        );
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Lowest `count` eigenpairs of `op`, whose diagonal is `diag`.
pub fn davidson_lowest<O: Operator + ?Sized>(
    op: &O,
    diag: &[f64],
    count: usize,
    opts: &DavidsonOptions,
) -> Result<LanczosOutcome> {
    let n = op.dim();
    if diag.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: diag.len() });
    }
    if count == 0 {
        return Err(Error::param("at least one eigenpair must be requested"));
    }
    let count = count.min(n);
    let started = Instant::now();
    let guard = if opts.guard > 0 { opts.guard } else { (count / 2).max(8) };
    let track = (count + guard).min(n);
    let max_basis = (2 * track).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut v = vec![0.0; n * track];
    for (j, &i) in order[..track].iter().enumerate() {
        v[j * n + i] = 1.0;
    }
    let mut m = track;
    let mut w = vec![0.0; n * m];
    for j in 0..m {
        let (src, dst) = (&v[j * n..(j + 1) * n], &mut w[j * n..(j + 1) * n]);
        op.apply(src, dst)?;
    }
    let mut matvecs = m;
    let mut t = inner(&v, n, m, &w, m);
    let mut worst = f64::INFINITY;

    for iteration in 1..=opts.max_iterations {
        let sym = (&t + t.transpose()) * 0.5;
        let (theta, y) = eig_symmetric(sym);
        let mut need = count.min(m);
        while need < m && theta[need] - theta[need - 1] < opts.cluster_gap {
            need += 1;
        }
        let active = need.max(track.min(m));
        let ya = y.columns(0, active).into_owned();
        let x = times(&v, n, m, &ya);
        let mut r = times(&w, n, m, &ya);
        let mut res = vec![0.0; active];
        for i in 0..active {
            let (xi, ri) = (&x[i * n..(i + 1) * n], &mut r[i * n..(i + 1) * n]);
            for (a, b) in ri.iter_mut().zip(xi) {
                *a -= theta[i] * b;
            }
            res[i] = norm(ri);
        }
        let bound = |i: usize| opts.tol * theta[i].abs().max(1.0);
        worst = (0..need).map(|i| res[i] / theta[i].abs().max(1.0)).fold(0.0, f64::max);
        let open: Vec<usize> = (0..active).filter(|&i| res[i] > bound(i)).collect();
        if open.iter().all(|&i| i >= need) {
            let vectors = (0..need).map(|i| x[i * n..(i + 1) * n].to_vec()).collect();
            return Ok(LanczosOutcome {
                values: theta[..need].to_vec(),
                vectors,
                residuals: res[..need].to_vec(),
                iterations: iteration,
                matvecs,
            });
        }
        if opts.time_limit.is_some_and(|limit| started.elapsed() > limit) {
            return Err(Error::NoConvergence { iterations: iteration, worst_residual: worst, best: theta[..need].to_vec() });
        }

        let mut fresh: Vec<f64> = Vec::with_capacity(open.len() * n);
        for &i in &open {
            let ri = &r[i * n..(i + 1) * n];
            let start = fresh.len();
            fresh.extend(ri.iter().zip(diag).map(|(a, d)| {
                let den = theta[i] - d;
                let floor = opts.precond_floor;
                a / if den.abs() < floor { floor.copysign(den) } else { den }
            }));
            let s = 1.0 / norm(&fresh[start..]);
            fresh[start..].iter_mut().for_each(|a| *a *= s);
        }
        let mut b = open.len();

        if m + b > max_basis {
            let keep = track.min(m);
            let yk = y.columns(0, keep).into_owned();
            v = times(&v, n, m, &yk);
            w = times(&w, n, m, &yk);
            t = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&theta[..keep]));
            m = keep;
        }

        for _ in 0..2 {
            let c = inner(&v, n, m, &fresh, b);
            subtract(&v, n, m, &c, &mut fresh);
        }
        let mut kept = 0;
        for j in 0..b {
            let mut cj = fresh[j * n..(j + 1) * n].to_vec();
            for _ in 0..2 {
                for p in 0..kept {
                    let q = col(&fresh, n, p);
                    let c: f64 = q.iter().zip(&cj).map(|(a, b)| a * b).sum();
                    cj.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let len = norm(&cj);
            if len > 1e-6 {
                cj.iter_mut().for_each(|a| *a /= len);
                fresh[kept * n..(kept + 1) * n].copy_from_slice(&cj);
                kept += 1;
            }
        }
        b = kept;
        fresh.truncate(b * n);
        if b == 0 {
            return Err(Error::NoConvergence { iterations: iteration, worst_residual: worst, best: theta[..need].to_vec() });
        }
        let mut hw = vec![0.0; b * n];
        for j in 0..b {
            op.apply(&fresh[j * n..(j + 1) * n], &mut hw[j * n..(j + 1) * n])?;
        }
        matvecs += b;
        let off = inner(&v, n, m, &hw, b);
        let corner = inner(&fresh, n, b, &hw, b);
        let mut grown = DMatrix::zeros(m + b, m + b);
        grown.view_mut((0, 0), (m, m)).copy_from(&t);
        grown.view_mut((0, m), (m, b)).copy_from(&off);
        grown.view_mut((m, 0), (b, m)).copy_from(&off.transpose());
        grown.view_mut((m, m), (b, b)).copy_from(&corner);
        t = grown;
        v.extend_from_slice(&fresh);
        w.extend_from_slice(&hw);
        m += b;
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, worst_residual: worst, best: Vec::new() })
}
