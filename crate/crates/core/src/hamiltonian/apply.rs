use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVectorView};
use rayon::prelude::*;

use super::{BlockHamiltonian, CsrMatrix, InternalOp, Link, Term, TermMask};
use crate::error::{Error, Result};

/// Fibers handled together; fixed so the arithmetic does not depend on threads.
const FIBER_CHUNK: usize = 8;

/// Largest sparse form `to_sparse` will build.
const SPARSE_LIMIT: usize = 80_000_000;

impl InternalOp {
    /// `y_c += s_c W x_c` for each fiber column `c` (`s_c = 1` when `scales` is `None`).
    fn apply_cols(&self, scales: Option<&[f64]>, x: &[f64], y: &mut [f64], d: usize) {
        let nf = x.len() / d;
        match self {
            InternalOp::Zero => {}
            InternalOp::Sparse(m) => {
                for c in 0..nf {
                    let s = scales.map_or(1.0, |s| s[c]);
                    if s != 0.0 {
                        m.mul_add(s, &x[c * d..(c + 1) * d], &mut y[c * d..(c + 1) * d]);
                    }
                }
            }
            InternalOp::Dense(w) => {
                let xv = DMatrixView::from_slice(x, d, nf);
                match scales {
                    None => {
                        let mut yv = DMatrixViewMut::from_slice(y, d, nf);
                        yv.gemm(1.0, w, &xv, 1.0);
                    }
                    Some(s) => {
                        let t: DMatrix<f64> = w * xv;
                        for c in 0..nf {
                            for (yi, ti) in y[c * d..(c + 1) * d].iter_mut().zip(t.column(c).iter()) {
                                *yi += s[c] * ti;
                            }
                        }
                    }
                }
            }
            InternalOp::Factored(f) => {
                for c in 0..nf {
                    let s = scales.map_or(1.0, |s| s[c]);
                    if s == 0.0 {
                        continue;
                    }
                    let xc = DMatrixView::from_slice(&x[c * d..(c + 1) * d], f.nph, f.nr);
                    let mut yc = DMatrixViewMut::from_slice(&mut y[c * d..(c + 1) * d], f.nph, f.nr);
                    yc.zip_apply(&xc, |a, b| *a += s * f.shift * b);
                    for (m, factors) in &f.groups {
                        for (u, w) in factors {
                            let proj = xc.tr_mul(&DVectorView::from_slice(w, f.nph));
                            let z = m * proj;
                            yc.ger(s, &DVectorView::from_slice(u, f.nph), &z, 1.0);
                        }
                    }
                }
            }
        }
    }
}

/// `y += coef X_src M^T`, with every coupling matrix symmetric.
fn apply_links(links: &[Link], mats: &[DMatrix<f64>], x: &[f64], y: &mut [f64], nph: usize, nr: usize) {
    let d = nph * nr;
    let mut yv = DMatrixViewMut::from_slice(y, nph, nr);
    for l in links {
        let xs = DMatrixView::from_slice(&x[l.src * d..(l.src + 1) * d], nph, nr);
        yv.gemm(l.coef, &xs, &mats[l.mat], 1.0);
    }
}

impl BlockHamiltonian {
    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.apply_terms(TermMask::ALL, x, y)
    }

    /// `y = H_mask x`, restricted to the enabled terms that are also in `mask`.
    pub fn apply_terms(&self, mask: TermMask, x: &[f64], y: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        if y.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: y.len() });
        }
        let mask = mask.intersect(self.shared.terms);
        let s = &*self.shared;
        let b = &*s.basis;
        let nph = b.photons.len();
        let nr = b.n_rel();
        let nb = b.phonons.len();
        let d = nph * nr;
        let on = |t: Term| mask.contains(t);
        let fx: Vec<f64> = self.fiber_p.iter().map(|p| p[0]).collect();
        let fy: Vec<f64> = self.fiber_p.iter().map(|p| p[1]).collect();

        y.par_chunks_mut(FIBER_CHUNK * d).enumerate().for_each(|(chunk, ys)| {
            let f0 = chunk * FIBER_CHUNK;
            let nf = ys.len() / d;
            let xs = &x[f0 * d..(f0 + nf) * d];
            for (i, (yi, xi)) in ys.iter_mut().zip(xs).enumerate() {
                let f = f0 + i / d;
                let r = (i % d) / nph;
                let p = i % nph;
                let mut diag = 0.0;
                if on(Term::Kinetic) {
                    diag += self.kinetic[f * nph + p];
                }
                if on(Term::Relative) {
                    diag += s.rel_energy[r];
                }
                if on(Term::Lattice) {
                    diag += s.lattice_shift;
                }
                if on(Term::PhotonFree) {
                    diag += s.photon_energy[p];
                }
                if on(Term::PhononFree) {
                    diag += s.phonon_energy[f % nb];
                }
                *yi = diag * xi;
            }
            if on(Term::PhotonLinear) {
                s.w_lin.apply_cols(None, xs, ys, d);
                s.w_x.apply_cols(Some(&fx[f0..f0 + nf]), xs, ys, d);
                s.w_y.apply_cols(Some(&fy[f0..f0 + nf]), xs, ys, d);
            }
            if on(Term::Diamagnetic) {
                s.w_dia.apply_cols(None, xs, ys, d);
            }
            for fl in 0..nf {
                let yf = &mut ys[fl * d..(fl + 1) * d];
                if on(Term::Lattice) {
                    apply_links(&s.lattice_in[f0 + fl], &s.lattice_mats, x, yf, nph, nr);
                }
                if on(Term::PhononCoupling) {
                    apply_links(&s.phonon_in[f0 + fl], &s.phonon_mats, x, yf, nph, nr);
                }
            }
        });
        Ok(())
    }

    /// Diagonal of the full block.
    pub fn diagonal(&self) -> Vec<f64> {
        let s = &*self.shared;
        let b = &*s.basis;
        let nph = b.photons.len();
        let nr = b.n_rel();
        let nb = b.phonons.len();
        let d = nph * nr;
        let on = |t: Term| s.terms.contains(t);
        let op_diag = |op: &InternalOp, i: usize| match op {
            InternalOp::Zero => 0.0,
            InternalOp::Sparse(m) => m.get(i, i),
            InternalOp::Dense(m) => m[(i, i)],
            InternalOp::Factored(f) => f.entry(i, i),
        };
        (0..self.dim())
            .map(|i| {
                let f = i / d;
                let (r, p) = ((i % d) / nph, i % nph);
                let mut v = self.kinetic[f * nph + p] + s.rel_energy[r];
                if on(Term::Lattice) {
                    v += s.lattice_shift;
                }
                if on(Term::PhotonFree) {
                    v += s.photon_energy[p];
                }
                if on(Term::PhononFree) {
                    v += s.phonon_energy[f % nb];
                }
                if on(Term::PhotonLinear) {
                    let [px, py] = self.fiber_p[f];
                    v += op_diag(&s.w_lin, i % d) + px * op_diag(&s.w_x, i % d) + py * op_diag(&s.w_y, i % d);
                }
                if on(Term::Diamagnetic) {
                    v += op_diag(&s.w_dia, i % d);
                }
                v
            })
            .collect()
    }

    /// Explicit sparse form, built from per-term triplets.
    pub fn to_sparse(&self) -> Result<CsrMatrix> {
        self.to_sparse_terms(TermMask::ALL)
    }

    pub fn to_sparse_terms(&self, mask: TermMask) -> Result<CsrMatrix> {
        let estimate = self.nnz_estimate();
        if estimate > SPARSE_LIMIT {
            return Err(Error::Dimension {
                dim: estimate as u128,
                cap: SPARSE_LIMIT,
                advice: "too many stored entries for explicit storage; use the matrix-free form".into(),
            });
        }
        let mask = mask.intersect(self.shared.terms);
        let s = &*self.shared;
        let b = &*s.basis;
        let nph = b.photons.len();
        let nr = b.n_rel();
        let nb = b.phonons.len();
        let d = nph * nr;
        let nfib = b.n_fibers();
        let on = |t: Term| mask.contains(t);
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(estimate);
        for f in 0..nfib {
            for r in 0..nr {
                for p in 0..nph {
                    let i = f * d + r * nph + p;
                    let parts = [
                        (Term::Kinetic, self.kinetic[f * nph + p]),
                        (Term::Relative, s.rel_energy[r]),
                        (Term::Lattice, s.lattice_shift),
                        (Term::PhotonFree, s.photon_energy[p]),
                        (Term::PhononFree, s.phonon_energy[f % nb]),
                    ];
                    for (term, v) in parts {
                        if on(term) && v != 0.0 {
                            t.push((i, i, v));
                        }
                    }
                }
            }
        }
        let mut internal = |op: &InternalOp, scale: &dyn Fn(usize) -> f64| {
            let entries = op.triplets();
            for f in 0..nfib {
                let sc = scale(f);
                if sc == 0.0 {
                    continue;
                }
                for &(r, c, v) in &entries {
                    t.push((f * d + r, f * d + c, sc * v));
                }
            }
        };
        if on(Term::PhotonLinear) {
            internal(&s.w_lin, &|_| 1.0);
            internal(&s.w_x, &|f| self.fiber_p[f][0]);
            internal(&s.w_y, &|f| self.fiber_p[f][1]);
        }
        if on(Term::Diamagnetic) {
            internal(&s.w_dia, &|_| 1.0);
        }
        let mut links = |incoming: &[Vec<Link>], mats: &[DMatrix<f64>]| {
            for (f, ls) in incoming.iter().enumerate() {
                for l in ls {
                    let m = &mats[l.mat];
                    for ri in 0..nr {
                        for ro in 0..nr {
                            let v = l.coef * m[(ro, ri)];
                            if v == 0.0 {
                                continue;
                            }
                            for p in 0..nph {
                                t.push((f * d + ro * nph + p, l.src * d + ri * nph + p, v));
                            }
                        }
                    }
                }
            }
        };
        if on(Term::Lattice) {
            links(&s.lattice_in, &s.lattice_mats);
        }
        if on(Term::PhononCoupling) {
            links(&s.phonon_in, &s.phonon_mats);
        }
        let dim = self.dim();
        Ok(CsrMatrix::from_triplets(dim, dim, t))
    }

    /// Dense copy, for small blocks.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        Ok(self.to_sparse()?.to_dense())
    }
}
