//! Thick-restart Lanczos with full reorthogonalization.
//!
//! Converged pairs are locked and the search continues in their orthogonal
//! complement from fresh random vectors, which recovers every copy of a
//! degenerate level that a single Krylov sequence would miss.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{eig_symmetric, Operator};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Residual bound relative to `max(1, |E|)`.
    pub tol: f64,
    pub seed: u64,
    /// Total restarts allowed across all passes.
    pub max_restarts: usize,
    /// Basis size; `0` picks one from the number of wanted pairs.
    pub basis_size: usize,
    /// Eigenvalues closer than this are one cluster.
    pub cluster_gap: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-10, seed: 0x5eed, max_restarts: 400, basis_size: 0, cluster_gap: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosOutcome {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub matvecs: usize,
}

struct State<'a, O: Operator + ?Sized> {
    op: &'a O,
    n: usize,
    rng: ChaCha8Rng,
    restarts: usize,
    matvecs: usize,
    opts: LanczosOptions,
}

impl<O: Operator + ?Sized> State<'_, O> {
    fn random_orthogonal(&mut self, against: &[&[f64]]) -> Option<Vec<f64>> {
        for _ in 0..5 {
            let mut v: Vec<f64> = (0..self.n).map(|_| self.rng.gen_range(-1.0..1.0)).collect();
            let before = norm(&v);
            for _ in 0..2 {
                for u in against {
                    let c = dot(u, &v);
                    axpy(-c, u, &mut v);
                }
            }
            let after = norm(&v);
            if after > 1e-8 * before {
                scale(1.0 / after, &mut v);
                return Some(v);
            }
        }
        None
    }

    fn matvec(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.op.apply(x, &mut y)?;
        self.matvecs += 1;
        Ok(y)
    }

    /// Lowest `want` pairs of the operator projected off `locked`.
    fn run(&mut self, locked: &[Vec<f64>], want: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        let avail = self.n - locked.len();
        let want = want.min(avail);
        if want == 0 {
            return Ok((Vec::new(), Vec::new(), Vec::new()));
        }
        let size = if self.opts.basis_size > 0 { self.opts.basis_size } else { (2 * want + 20).max(want + 30) };
        let size = size.min(avail).max(want.min(avail));
        let locked_refs: Vec<&[f64]> = locked.iter().map(|v| v.as_slice()).collect();
        let Some(start) = self.random_orthogonal(&locked_refs) else {
            return Ok((Vec::new(), Vec::new(), Vec::new()));
        };
        let mut basis: Vec<Vec<f64>> = vec![start];
        let mut t = DMatrix::<f64>::zeros(size, size);
        let mut worst;
        loop {
            let mut residual: Option<(Vec<f64>, f64)> = None;
            let mut j = basis.len() - 1;
            loop {
                let mut w = self.matvec(&basis[j])?;
                let mut h = vec![0.0; basis.len()];
                for _ in 0..2 {
                    for (i, v) in basis.iter().enumerate() {
                        let c = dot(v, &w);
                        h[i] += c;
                        axpy(-c, v, &mut w);
                    }
                    // Locked directions last, so they cannot leak back in.
                    for u in &locked_refs {
                        let c = dot(u, &w);
                        axpy(-c, u, &mut w);
                    }
                }
                for (i, &hi) in h.iter().enumerate() {
                    t[(i, j)] = hi;
                    t[(j, i)] = hi;
                }
                let beta = norm(&w);
                let scale_t = h.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
                if basis.len() == size {
                    if beta > 1e-13 * scale_t {
                        scale(1.0 / beta, &mut w);
                        residual = Some((w, beta));
                    }
                    break;
                }
                if beta > 1e-13 * scale_t {
                    scale(1.0 / beta, &mut w);
                    t[(j + 1, j)] = beta;
                    t[(j, j + 1)] = beta;
                    basis.push(w);
                } else {
                    let mut against = locked_refs.clone();
                    against.extend(basis.iter().map(|v| v.as_slice()));
                    match self.random_orthogonal(&against) {
                        Some(v) => {
                            t[(j + 1, j)] = 0.0;
                            t[(j, j + 1)] = 0.0;
                            basis.push(v);
                        }
                        None => break,
                    }
                }
                j += 1;
            }
            let m = basis.len();
            let (theta, y) = eig_symmetric(t.view((0, 0), (m, m)).into_owned());
            let beta = residual.as_ref().map_or(0.0, |r| r.1);
            let est: Vec<f64> = (0..m).map(|i| (beta * y[(m - 1, i)]).abs()).collect();
            let mut need = want.min(m);
            while need < m && theta[need] - theta[need - 1] < self.opts.cluster_gap {
                need += 1;
            }
            let ok = |i: usize| est[i] <= self.opts.tol * theta[i].abs().max(1.0);
            worst = (0..need).map(|i| est[i] / theta[i].abs().max(1.0)).fold(0.0, f64::max);
            if (0..need).all(ok) || residual.is_none() {
                let vectors = combine(&basis, &y, need);
                let mut true_res = Vec::with_capacity(need);
                let mut all_ok = true;
                for (i, v) in vectors.iter().enumerate() {
                    let mut hv = self.matvec(v)?;
                    axpy(-theta[i], v, &mut hv);
                    let r = norm(&hv);
                    all_ok &= r <= self.opts.tol * theta[i].abs().max(1.0) || residual.is_none();
                    true_res.push(r);
                }
                if all_ok {
                    return Ok((theta[..need].to_vec(), vectors, true_res));
                }
            }
            self.restarts += 1;
            if self.restarts > self.opts.max_restarts {
                return Err(Error::NoConvergence {
                    iterations: self.restarts,
                    worst_residual: worst,
                    best: theta[..need].to_vec(),
                });
            }
            let keep = (need + (m - need) / 2).min(m - 1).max(1);
            let (r, beta) = residual.expect("restart requires a residual vector");
            let mut next = combine(&basis, &y, keep);
            t.fill(0.0);
            for i in 0..keep {
                t[(i, i)] = theta[i];
                t[(keep, i)] = beta * y[(m - 1, i)];
                t[(i, keep)] = beta * y[(m - 1, i)];
            }
            next.push(r);
            basis = next;
        }
    }
}

/// `basis * y[:, 0..count]`, column by column.
fn combine(basis: &[Vec<f64>], y: &DMatrix<f64>, count: usize) -> Vec<Vec<f64>> {
    let n = basis[0].len();
    (0..count)
        .map(|c| {
            let mut v = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                let coef = y[(i, c)];
                if coef != 0.0 {
                    axpy(coef, b, &mut v);
                }
            }
            v
        })
        .collect()
}

/// Lowest `count` eigenpairs of a symmetric operator.
pub fn lanczos_lowest<O: Operator + ?Sized>(op: &O, count: usize, opts: &LanczosOptions) -> Result<LanczosOutcome> {
    let n = op.dim();
    if count == 0 {
        return Err(Error::param("at least one eigenpair must be requested"));
    }
    let count = count.min(n);
    let mut st = State { op, n, rng: ChaCha8Rng::seed_from_u64(opts.seed), restarts: 0, matvecs: 0, opts: *opts };
    let mut values: Vec<f64> = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut want = count;
    loop {
        let (v, x, r) = st.run(&vectors, want)?;
        let found = v.len();
        values.extend(v);
        vectors.extend(x);
        residuals.extend(r);
        sort_pairs(&mut values, &mut vectors, &mut residuals);
        if vectors.len() >= n || found == 0 {
            break;
        }
        if values.len() < count {
            want = count - values.len();
            continue;
        }
        // Probe the complement for anything below the current top state.
        let (pv, px, pr) = st.run(&vectors, 1)?;
        let top = values[count - 1];
        match pv.first() {
            Some(&lowest) if lowest < top - opts.cluster_gap.max(opts.tol * top.abs().max(1.0)) => {
                values.extend(pv);
                vectors.extend(px);
                residuals.extend(pr);
                sort_pairs(&mut values, &mut vectors, &mut residuals);
            }
            _ => break,
        }
    }
    let mut keep = count.min(values.len());
    while keep < values.len() && values[keep] - values[keep - 1] < opts.cluster_gap {
        keep += 1;
    }
    values.truncate(keep);
    vectors.truncate(keep);
    residuals.truncate(keep);
    Ok(LanczosOutcome { values, vectors, residuals, iterations: st.restarts, matvecs: st.matvecs })
}

fn sort_pairs(values: &mut Vec<f64>, vectors: &mut Vec<Vec<f64>>, residuals: &mut Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *values = order.iter().map(|&i| values[i]).collect();
    *residuals = order.iter().map(|&i| residuals[i]).collect();
    let mut taken: Vec<Option<Vec<f64>>> = vectors.drain(..).map(Some).collect();
    *vectors = order.iter().map(|&i| taken[i].take().unwrap()).collect();
}
