//! Diagonalization of blocks and per-state characters.

mod davidson;
mod lanczos;
#[cfg(test)]
mod tests;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::CompositeBasis;
use crate::error::{Error, Result};
use crate::hamiltonian::{BlockHamiltonian, CsrMatrix};

pub use davidson::{davidson_lowest, DavidsonOptions};
pub use lanczos::{lanczos_lowest, LanczosOptions, LanczosOutcome};

/// Largest block `eig_dense` accepts by default.
pub const DENSE_THRESHOLD: usize = 4000;

/// Blocks above this size are solved by preconditioned Davidson instead of Lanczos.
pub const DAVIDSON_THRESHOLD: usize = 20_000;

/// A real symmetric linear operator.
pub trait Operator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

impl Operator for BlockHamiltonian {
    fn dim(&self) -> usize {
        BlockHamiltonian::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        BlockHamiltonian::apply(self, x, y)
    }
}

impl Operator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols() || y.len() != self.n_rows() {
            return Err(Error::DimensionMismatch { expected: self.n_cols(), got: x.len() });
        }
        CsrMatrix::apply(self, x, y);
        Ok(())
    }
}

impl Operator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols() || y.len() != self.nrows() {
            return Err(Error::DimensionMismatch { expected: self.ncols(), got: x.len() });
        }
        let xv = nalgebra::DVectorView::from_slice(x, x.len());
        let mut yv = nalgebra::DVectorViewMut::from_slice(y, self.nrows());
        yv.gemv(1.0, self, &xv, 0.0);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Characters {
    pub photon_number: f64,
    pub mean_principal_n: f64,
    pub phonon_number: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Dense,
    Lanczos,
    Davidson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub method: SolverMethod,
    pub iterations: usize,
    pub matvecs: usize,
    /// `||H v - E v||` per returned pair.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub k: [f64; 2],
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    #[serde(skip)]
    pub eigenvectors: Option<DMatrix<f64>>,
    pub characters: Vec<Characters>,
    pub meta: SolverMeta,
}

/// Ascending eigenvalues and matching eigenvector columns of a symmetric matrix.
pub fn eig_symmetric(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Ascending eigenvalues of a complex Hermitian matrix.
pub fn eigvals_hermitian(m: DMatrix<Complex<f64>>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn dense_residuals(h: &DMatrix<f64>, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    let hv = h * vectors;
    (0..values.len())
        .map(|c| {
            let r = hv.column(c) - vectors.column(c) * values[c];
            r.norm()
        })
        .collect()
}

/// Full spectrum of a block up to `DENSE_THRESHOLD`.
pub fn eig_dense(h: &BlockHamiltonian) -> Result<SpectrumResult> {
    eig_dense_with(h, DENSE_THRESHOLD)
}

pub fn eig_dense_with(h: &BlockHamiltonian, threshold: usize) -> Result<SpectrumResult> {
    if h.dim() > threshold {
        return Err(Error::DenseTooLarge { dim: h.dim(), threshold });
    }
    let m = h.to_dense()?;
    let (values, vectors) = eig_symmetric(m.clone());
    let residuals = dense_residuals(&m, &values, &vectors);
    finish(h, values, vectors, SolverMeta { method: SolverMethod::Dense, iterations: 1, matvecs: 0, residuals })
}

/// Lowest `m` eigenpairs: thick-restart Lanczos, or Davidson above `DAVIDSON_THRESHOLD`.
pub fn eig_lowest(h: &BlockHamiltonian, m: usize, tol: f64) -> Result<SpectrumResult> {
    if h.dim() > DAVIDSON_THRESHOLD {
        eig_lowest_davidson(h, m, tol)
    } else {
        eig_lowest_lanczos(h, m, tol)
    }
}

pub fn eig_lowest_lanczos(h: &BlockHamiltonian, m: usize, tol: f64) -> Result<SpectrumResult> {
    let opts = LanczosOptions { tol, seed: seed_for(h.k(), h.dim()), ..LanczosOptions::default() };
    let out = lanczos_lowest(h, m, &opts)?;
    iterative_result(h, out, SolverMethod::Lanczos)
}

pub fn eig_lowest_davidson(h: &BlockHamiltonian, m: usize, tol: f64) -> Result<SpectrumResult> {
    let opts = DavidsonOptions { tol, ..DavidsonOptions::default() };
    let out = davidson_lowest(h, &h.diagonal(), m, &opts)?;
    iterative_result(h, out, SolverMethod::Davidson)
}

fn iterative_result(h: &BlockHamiltonian, out: LanczosOutcome, method: SolverMethod) -> Result<SpectrumResult> {
    let n = h.dim();
    let vectors = DMatrix::from_fn(n, out.values.len(), |r, c| out.vectors[c][r]);
    let meta = SolverMeta {
        method,
        iterations: out.iterations,
        matvecs: out.matvecs,
        residuals: out.residuals,
    };
    finish(h, out.values, vectors, meta)
}

/// Lowest `nbands` states, densely when the block is small enough.
pub fn solve_block(h: &BlockHamiltonian, nbands: usize, tol: f64) -> Result<SpectrumResult> {
    let dim = h.dim();
    if dim <= 1200 || (dim <= DENSE_THRESHOLD && 3 * nbands >= dim) {
        let mut s = eig_dense(h)?;
        s.truncate(nbands);
        Ok(s)
    } else {
        eig_lowest(h, nbands, tol)
    }
}

impl SpectrumResult {
    /// Keeps the lowest `n` states.
    pub fn truncate(&mut self, n: usize) {
        let n = n.min(self.eigenvalues.len());
        self.eigenvalues.truncate(n);
        self.characters.truncate(n);
        self.meta.residuals.truncate(n);
        if let Some(v) = self.eigenvectors.take() {
            self.eigenvectors = Some(v.columns(0, n).into_owned());
        }
    }
}

/// Deterministic seed from the block label.
pub fn seed_for(k: [f64; 2], dim: usize) -> u64 {
    let mut s = k[0].to_bits() ^ k[1].to_bits().rotate_left(29) ^ (dim as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    s ^= s >> 33;
    s.wrapping_mul(0xff51_afd7_ed55_8ccd)
}

fn finish(h: &BlockHamiltonian, values: Vec<f64>, vectors: DMatrix<f64>, meta: SolverMeta) -> Result<SpectrumResult> {
    let basis = h.basis();
    let characters = (0..values.len())
        .map(|c| characters(vectors.column(c).as_slice(), basis))
        .collect::<Result<_>>()?;
    Ok(SpectrumResult { k: h.k(), eigenvalues: values, eigenvectors: Some(vectors), characters, meta })
}

/// Photon number, mean principal quantum number and phonon number of `v`.
pub fn characters(v: &[f64], basis: &CompositeBasis) -> Result<Characters> {
    if v.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: v.len() });
    }
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    if (norm2 - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm2));
    }
    let nph = basis.photons.len();
    let nr = basis.n_rel();
    let nb = basis.phonons.len();
    let photon_total: Vec<f64> = (0..nph).map(|p| basis.photons.total(p) as f64).collect();
    let phonon_total: Vec<f64> = (0..nb).map(|b| basis.phonons.total(b) as f64).collect();
    let principal: Vec<f64> = (0..nr).map(|r| basis.rel_state(r).n as f64).collect();
    let mut c = Characters { photon_number: 0.0, mean_principal_n: 0.0, phonon_number: 0.0 };
    for (i, x) in v.iter().enumerate() {
        let w = x * x;
        if w == 0.0 {
            continue;
        }
        let p = i % nph;
        let r = (i / nph) % nr;
        let b = (i / (nph * nr)) % nb;
        c.photon_number += w * photon_total[p];
        c.mean_principal_n += w * principal[r];
        c.phonon_number += w * phonon_total[b];
    }
    Ok(c)
}
