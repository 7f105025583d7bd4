//! Polarizability and the zero-temperature dielectric matrix.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{composite_dimension, CompositeBasis};
use crate::error::{Error, Result};
use crate::hamiltonian::{Assembler, BlockHamiltonian};
use crate::hydrogen2d::{real_operator, RelOperator};
use crate::linalg::{axpy, dot, norm, scale};
use crate::model::{MatrixEngine, ModelConfig};
use crate::solve::{eig_dense, eig_lowest, eig_symmetric, SolverMeta, SolverMethod, DENSE_THRESHOLD};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// How the excited states entering the sum are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DielectricMethod {
    /// Dense below the dense threshold, Krylov above it.
    Auto,
    /// Full diagonalization.
    Dense,
    /// Lowest eigenpairs, doubling their number until the frequency range is covered.
    Eigenpairs,
    /// Lanczos recursion started from `x_i |0>`; the Ritz values and their
    /// weights reproduce the resolvent moments up to order `2 steps`.
    Krylov { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DielectricOptions {
    pub method: DielectricMethod,
    pub initial_states: usize,
    pub max_states: usize,
    pub tol: f64,
    /// Coverage margin above the largest frequency, in units of `eta`.
    pub margin_eta: f64,
}

impl Default for DielectricOptions {
    fn default() -> Self {
        DielectricOptions {
            method: DielectricMethod::Auto,
            initial_states: 64,
            max_states: 4096,
            tol: 1e-10,
            margin_eta: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub delta_e: f64,
    /// `<n|x_i|0><0|x_j|n>`
    pub strength: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DielectricTable {
    pub omega: Vec<f64>,
    pub eta: f64,
    /// `[[xx, xy], [yx, yy]]` per frequency.
    pub eps: Vec<[[Complex64; 2]; 2]>,
    pub transitions: Vec<Transition>,
    pub ground_energy: f64,
    pub method: DielectricMethod,
    pub meta: SolverMeta,
    pub warnings: Vec<String>,
}

/// Eigenpairs of one block, columns of `vectors` matching `values`.
#[derive(Debug, Clone)]
pub struct Eigenstates {
    pub basis: Arc<CompositeBasis>,
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// `(O (x) 1) v` with `O` acting on the relative index only.
pub fn lift_relative(op: &DMatrix<f64>, basis: &CompositeBasis, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: v.len() });
    }
    let nph = basis.photons.len();
    let nr = basis.n_rel();
    let d = nph * nr;
    let mut y = vec![0.0; v.len()];
    y.par_chunks_mut(d).zip(v.par_chunks(d)).for_each(|(yf, xf)| {
        let xv = DMatrixView::from_slice(xf, nph, nr);
        let mut yv = DMatrixViewMut::from_slice(yf, nph, nr);
        yv.gemm(1.0, &xv, &op.transpose(), 0.0);
    });
    Ok(y)
}

fn dipoles(basis: &CompositeBasis) -> Result<[DMatrix<f64>; 2]> {
    let engine = MatrixEngine::Taylor { order: 1 };
    Ok([
        real_operator(&RelOperator::dipole([1.0, 0.0]), engine, &basis.rel, &basis.rel_sel)?,
        real_operator(&RelOperator::dipole([0.0, 1.0]), engine, &basis.rel, &basis.rel_sel)?,
    ])
}

/// `eps_ij(w) = delta_ij + 4 pi sum_n N_ij / (w - dE_n + i eta)`.
pub fn dielectric_from_transitions(transitions: &[Transition], omega: &[f64], eta: f64) -> Vec<[[Complex64; 2]; 2]> {
    omega
        .par_iter()
        .map(|&w| {
            let mut eps = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
            for t in transitions {
                let g = FOUR_PI / Complex64::new(w - t.delta_e, eta);
                for (i, row) in eps.iter_mut().enumerate() {
                    for (j, e) in row.iter_mut().enumerate() {
                        *e += g * t.strength[i][j];
                    }
                }
            }
            eps
        })
        .collect()
}

pub fn dielectric_t0(model: &ModelConfig, omega: &[f64]) -> Result<DielectricTable> {
    dielectric_t0_with(model, omega, &DielectricOptions::default())
}

/// Zero-temperature dielectric matrix from the `K = 0` block.
pub fn dielectric_t0_with(model: &ModelConfig, omega: &[f64], opts: &DielectricOptions) -> Result<DielectricTable> {
    model.validate()?;
    if omega.is_empty() || omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::param("frequencies must be positive and finite"));
    }
    let basis = Arc::new(composite_dimension(&model.truncation, model)?);
    let h = Assembler::new(model, Arc::clone(&basis))?.block([0.0, 0.0]);
    let cutoff = omega.iter().fold(0.0f64, |m, &w| m.max(w)) + opts.margin_eta * model.eta;
    let method = match opts.method {
        DielectricMethod::Auto if h.dim() <= DENSE_THRESHOLD => DielectricMethod::Dense,
        DielectricMethod::Auto => DielectricMethod::Krylov { steps: 400 },
        m => m,
    };
    let [x, y] = dipoles(&basis)?;
    let mut warnings = Vec::new();
    let (ground_energy, transitions, meta) = match method {
        DielectricMethod::Krylov { steps } => krylov_transitions(&h, &x, &y, steps, opts.tol)?,
        _ => {
            let (states, meta) = if method == DielectricMethod::Dense {
                let s = eig_dense(&h)?;
                (Eigenstates { basis: Arc::clone(&basis), values: s.eigenvalues, vectors: s.eigenvectors.unwrap() }, s.meta)
            } else {
                covering_states(&h, cutoff, opts, &mut warnings)?
            };
            let e0 = states.values[0];
            let v0 = states.vectors.column(0);
            let gx = lift_relative(&x, &basis, v0.as_slice())?;
            let gy = lift_relative(&y, &basis, v0.as_slice())?;
            let transitions = (1..states.values.len())
                .map(|n| {
                    let vn = states.vectors.column(n);
                    let d = [dot(vn.as_slice(), &gx), dot(vn.as_slice(), &gy)];
                    Transition { delta_e: states.values[n] - e0, strength: [[d[0] * d[0], d[0] * d[1]], [d[1] * d[0], d[1] * d[1]]] }
                })
                .collect();
            (e0, transitions, meta)
        }
    };
    let eps = dielectric_from_transitions(&transitions, omega, model.eta);
    Ok(DielectricTable { omega: omega.to_vec(), eta: model.eta, eps, transitions, ground_energy, method, meta, warnings })
}

fn covering_states(
    h: &BlockHamiltonian,
    cutoff: f64,
    opts: &DielectricOptions,
    warnings: &mut Vec<String>,
) -> Result<(Eigenstates, SolverMeta)> {
    let dim = h.dim();
    let mut m = opts.initial_states.clamp(2, dim);
    loop {
        let s = eig_lowest(h, m, opts.tol)?;
        let top = s.eigenvalues.last().copied().unwrap_or(f64::NEG_INFINITY) - s.eigenvalues[0];
        let done = top > cutoff || s.eigenvalues.len() >= dim;
        if done || m >= opts.max_states {
            if !done {
                warnings.push(format!(
                    "only {} states found, reaching {top:.6e} au above the ground state; transitions up to {cutoff:.6e} au are not all included",
                    s.eigenvalues.len()
                ));
            }
            let states = Eigenstates { basis: Arc::clone(h.basis()), values: s.eigenvalues, vectors: s.eigenvectors.unwrap() };
            return Ok((states, s.meta));
        }
        m = (2 * m).min(opts.max_states).min(dim);
    }
}

/// Ritz values and weights of the resolvent seeded with `g`, without reorthogonalization.
fn resolvent_poles(h: &BlockHamiltonian, g: &[f64], steps: usize) -> Result<Vec<(f64, f64)>> {
    let g2 = dot(g, g);
    if g2 == 0.0 {
        return Ok(Vec::new());
    }
    let n = g.len();
    let mut v = g.to_vec();
    scale(1.0 / g2.sqrt(), &mut v);
    let mut prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut b_prev = 0.0;
    for _ in 0..steps.min(n) {
        h.apply(&v, &mut w)?;
        axpy(-b_prev, &prev, &mut w);
        let a = dot(&v, &w);
        axpy(-a, &v, &mut w);
        alpha.push(a);
        let b = norm(&w);
        if b <= 1e-12 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        scale(1.0 / b, &mut w);
        std::mem::swap(&mut prev, &mut v);
        std::mem::swap(&mut v, &mut w);
        b_prev = b;
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
        0 => alpha[i],
        1 => beta[i.min(j)],
        _ => 0.0,
    });
    let (theta, y) = eig_symmetric(t);
    Ok((0..m).map(|k| (theta[k], g2 * y[(0, k)] * y[(0, k)])).collect())
}

fn krylov_transitions(
    h: &BlockHamiltonian,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    steps: usize,
    tol: f64,
) -> Result<(f64, Vec<Transition>, SolverMeta)> {
    let ground = eig_lowest(h, 1, tol)?;
    let e0 = ground.eigenvalues[0];
    let v0 = ground.eigenvectors.as_ref().unwrap().column(0).into_owned();
    let v0 = v0.as_slice();
    let basis = h.basis();
    let project = |mut g: Vec<f64>| {
        let c = dot(v0, &g);
        axpy(-c, v0, &mut g);
        g
    };
    let gx = project(lift_relative(x, basis, v0)?);
    let gy = project(lift_relative(y, basis, v0)?);
    let mut transitions = Vec::new();
    let mut add = |poles: Vec<(f64, f64)>, slot: (usize, usize), sign: f64| {
        for (e, wgt) in poles {
            let mut strength = [[0.0; 2]; 2];
            strength[slot.0][slot.1] = sign * wgt;
            if slot.0 != slot.1 {
                strength[slot.1][slot.0] = sign * wgt;
            }
            transitions.push(Transition { delta_e: e - e0, strength });
        }
    };
    add(resolvent_poles(h, &gx, steps)?, (0, 0), 1.0);
    add(resolvent_poles(h, &gy, steps)?, (1, 1), 1.0);
    let mut plus = gx.clone();
    axpy(1.0, &gy, &mut plus);
    let mut minus = gx.clone();
    axpy(-1.0, &gy, &mut minus);
    if norm(&gx) > 0.0 && norm(&gy) > 0.0 {
        add(resolvent_poles(h, &plus, steps)?, (0, 1), 0.25);
        add(resolvent_poles(h, &minus, steps)?, (0, 1), -0.25);
    }
    let mut meta = ground.meta;
    meta.method = SolverMethod::Lanczos;
    Ok((e0, transitions, meta))
}

impl DielectricTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "omega_au,re_eps_xx,im_eps_xx,re_eps_xy,im_eps_xy,re_eps_yx,im_eps_yx,re_eps_yy,im_eps_yy")?;
        for (om, e) in self.omega.iter().zip(&self.eps) {
            write!(w, "{om:.12e}")?;
            for z in [e[0][0], e[0][1], e[1][0], e[1][1]] {
                write!(w, ",{:.15e},{:.15e}", z.re, z.im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Transition list with columns `delta_e_au, n_xx, n_xy, n_yx, n_yy`.
    pub fn write_transitions_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta_e_au,n_xx,n_xy,n_yx,n_yy")?;
        for t in &self.transitions {
            let s = t.strength;
            writeln!(w, "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}", t.delta_e, s[0][0], s[0][1], s[1][0], s[1][1])?;
        }
        Ok(())
    }

    /// `Im eps_xx` on the grid.
    pub fn im_xx(&self) -> Vec<f64> {
        self.eps.iter().map(|e| e[0][0].im).collect()
    }
}

/// Form of the density operator in the polarizability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityForm {
    /// `-i q.x`
    Linearized,
    /// `-2i sin(q.x/2)`, evaluated by quadrature.
    FullSine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizabilityTable {
    pub omega: Vec<f64>,
    pub p: Vec<Complex64>,
    /// `1 - v(q) P` with `v(q) = -4 pi / |q|^2`.
    pub eps: Vec<Complex64>,
}

/// `P(q, w) = sum_nm |<n|rho(q)|m>|^2 (f_m - f_n) / (w - (E_n - E_m) + i eta)`.
///
/// With `resonant_only`, only pairs with `E_n > E_m` contribute.
#[allow(clippy::too_many_arguments)]
pub fn polarizability(
    states: &Eigenstates,
    q: [f64; 2],
    omega: &[f64],
    occupations: &[f64],
    eta: f64,
    form: DensityForm,
    resonant_only: bool,
) -> Result<PolarizabilityTable> {
    let ns = states.values.len();
    if occupations.len() != ns {
        return Err(Error::DimensionMismatch { expected: ns, got: occupations.len() });
    }
    let q2 = q[0] * q[0] + q[1] * q[1];
    if !(q2 > 0.0) {
        return Err(Error::param("the polarizability needs a nonzero wavevector"));
    }
    let b = &*states.basis;
    let (op, factor) = match form {
        DensityForm::Linearized => {
            let e = MatrixEngine::Taylor { order: 1 };
            let x = real_operator(&RelOperator::dipole([1.0, 0.0]), e, &b.rel, &b.rel_sel)?;
            let y = real_operator(&RelOperator::dipole([0.0, 1.0]), e, &b.rel, &b.rel_sel)?;
            (x * q[0] + y * q[1], 1.0)
        }
        DensityForm::FullSine => (real_operator(&RelOperator::sine(q), MatrixEngine::Quadrature, &b.rel, &b.rel_sel)?, 4.0),
    };
    let lifted: Vec<Vec<f64>> = (0..ns)
        .map(|m| lift_relative(&op, b, states.vectors.column(m).as_slice()))
        .collect::<Result<_>>()?;
    let mut terms = Vec::new();
    for n in 0..ns {
        for m in 0..ns {
            let df = occupations[m] - occupations[n];
            let de = states.values[n] - states.values[m];
            if df == 0.0 || (resonant_only && de <= 0.0) {
                continue;
            }
            let r = dot(states.vectors.column(n).as_slice(), &lifted[m]);
            terms.push((de, factor * r * r * df));
        }
    }
    let p: Vec<Complex64> = omega
        .iter()
        .map(|&w| terms.iter().map(|&(de, s)| s / Complex64::new(w - de, eta)).sum())
        .collect();
    let eps = p.iter().map(|pv| 1.0 + FOUR_PI / q2 * pv).collect();
    Ok(PolarizabilityTable { omega: omega.to_vec(), p, eps })
}
