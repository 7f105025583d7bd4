//! Two-dimensional hydrogen states of the relative coordinate.
//!
//! States `Psi_{n,m} = C_{n,m} e^{i m theta} R_{n,m}(r)` with
//! `R_{n,m}(r) = (beta_n r)^{|m|} e^{-beta_n r/2} L^{(2|m|)}_{n-|m|}(beta_n r)`,
//! `beta_n = 2 mu / (n + 1/2)` and `|m| <= n`.
//!
//! The real basis replaces `e^{i m theta}` by `1`, `sqrt(2) cos(l theta)` for
//! `l > 0` and `sqrt(2) sin(|l| theta)` for `l < 0`. Real states with `l >= 0`
//! are even under the mirror `y -> -y`, those with `l < 0` are odd.

mod quadrature;
mod taylor;

use std::f64::consts::PI;
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EnergyLaw, MatrixEngine};
use crate::special::{factorial_dd, horner, laguerre_coefficients_dd, ln_factorial, Dd};

pub use crate::special::laguerre_coefficients;
pub use quadrature::QuadSettings;

/// Energy of level `n` as printed: `-mu / (2n + 1)`.
pub fn hydrogen_energy(n: u32, mu: f64) -> f64 {
    -mu / (2 * n + 1) as f64
}

pub fn level_energy(n: u32, mu: f64, law: EnergyLaw) -> f64 {
    match law {
        EnergyLaw::Printed => hydrogen_energy(n, mu),
        EnergyLaw::Textbook => -2.0 * mu / ((2 * n + 1) as f64).powi(2),
    }
}

/// `(n, m)` in the complex basis; in the real basis `m` carries the signed
/// label `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelState {
    pub n: u32,
    pub m: i32,
}

impl RelState {
    pub fn is_even(&self) -> bool {
        self.m >= 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelParity {
    #[default]
    Both,
    Even,
    Odd,
}

impl RelParity {
    pub fn admits(&self, s: RelState) -> bool {
        match self {
            RelParity::Both => true,
            RelParity::Even => s.m >= 0,
            RelParity::Odd => s.m < 0,
        }
    }
}

/// All states with `n <= n_max`, ordered by `n` and then `m = 0, 1, -1, 2, -2, ...`.
#[derive(Debug, Clone)]
pub struct RelativeBasis {
    mu: f64,
    n_max: u32,
    states: Vec<RelState>,
    beta: Vec<f64>,
    cnorm: Vec<f64>,
    laguerre: Vec<Vec<f64>>,
    /// Coefficients of `L^{(2|m|+1)}_{n-|m|-1}`, empty when `n = |m|`.
    laguerre_shifted: Vec<Vec<f64>>,
    laguerre_dd: Vec<Vec<Dd>>,
    laguerre_shifted_dd: Vec<Vec<Dd>>,
    factorials: Vec<Dd>,
    memo: Arc<RwLock<HashMap<(usize, usize, i32, bool), f64>>>,
}

impl RelativeBasis {
    pub fn new(mu: f64, n_max: u32) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::param(format!("reduced mass must be positive, got {mu}")));
        }
        if n_max > 60 {
            return Err(Error::param(format!("rel_n_max = {n_max} is beyond the supported range (<= 60)")));
        }
        let mut states = Vec::new();
        for n in 0..=n_max {
            states.push(RelState { n, m: 0 });
            for a in 1..=n as i32 {
                states.push(RelState { n, m: a });
                states.push(RelState { n, m: -a });
            }
        }
        let beta: Vec<f64> = (0..=n_max).map(|n| 2.0 * mu / (n as f64 + 0.5)).collect();
        let cnorm = states
            .iter()
            .map(|s| {
                let a = s.m.unsigned_abs();
                let ln = ln_factorial(s.n - a) - ln_factorial(s.n + a) - ((2 * s.n + 1) as f64).ln();
                beta[s.n as usize] / (2.0 * PI).sqrt() * (0.5 * ln).exp()
            })
            .collect();
        let laguerre = states.iter().map(|s| laguerre_coefficients(2 * s.m.unsigned_abs(), s.n - s.m.unsigned_abs())).collect();
        let laguerre_shifted = states
            .iter()
            .map(|s| {
                let a = s.m.unsigned_abs();
                if s.n > a {
                    laguerre_coefficients(2 * a + 1, s.n - a - 1)
                } else {
                    Vec::new()
                }
            })
            .collect();
        let laguerre_dd = states.iter().map(|s| laguerre_coefficients_dd(2 * s.m.unsigned_abs(), s.n - s.m.unsigned_abs())).collect();
        let laguerre_shifted_dd = states
            .iter()
            .map(|s| {
                let a = s.m.unsigned_abs();
                if s.n > a {
                    laguerre_coefficients_dd(2 * a + 1, s.n - a - 1)
                } else {
                    Vec::new()
                }
            })
            .collect();
        let factorials = (0..=4 * n_max + 64).map(factorial_dd).collect();
        Ok(RelativeBasis {
            mu,
            n_max,
            states,
            beta,
            cnorm,
            laguerre,
            laguerre_shifted,
            laguerre_dd,
            laguerre_shifted_dd,
            factorials,
            memo: Arc::default(),
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[RelState] {
        &self.states
    }

    pub fn index_of(&self, n: u32, m: i32) -> Option<usize> {
        if n > self.n_max || m.unsigned_abs() > n {
            return None;
        }
        let a = m.unsigned_abs() as usize;
        let offset = (n * n) as usize;
        Some(offset + if m == 0 { 0 } else if m > 0 { 2 * a - 1 } else { 2 * a })
    }

    pub fn beta(&self, n: u32) -> f64 {
        self.beta[n as usize]
    }

    pub fn cnorm(&self, idx: usize) -> f64 {
        self.cnorm[idx]
    }

    pub fn laguerre(&self, idx: usize) -> &[f64] {
        &self.laguerre[idx]
    }

    /// Indices of the real-basis states kept by a truncation: those admitted
    /// by `parity`, in basis order, at most `max_states` of them.
    pub fn select(&self, parity: RelParity, max_states: Option<usize>) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.len()).filter(|&i| parity.admits(self.states[i])).collect();
        if let Some(cap) = max_states {
            out.truncate(cap);
        }
        out
    }

    /// `R(r)` and `dR/dr` for state `idx`.
    pub fn radial(&self, idx: usize, r: f64) -> (f64, f64) {
        let s = self.states[idx];
        let beta = self.beta[s.n as usize];
        let a = s.m.unsigned_abs() as i32;
        let x = beta * r;
        let env = (-0.5 * x).exp();
        let l = horner(&self.laguerre[idx], x);
        let dl = -horner(&self.laguerre_shifted[idx], x);
        let pow = x.powi(a);
        let value = pow * env * l;
        let dpow = if a == 0 { 0.0 } else { a as f64 * beta * x.powi(a - 1) };
        let deriv = dpow * env * l - 0.5 * beta * value + beta * pow * env * dl;
        (value, deriv)
    }

    /// `O(n,m,n',m',l) = int_0^inf r^l R_{n',m'} R_{n,m} dr` with `ket = (n,m)`
    /// and `bra = (n',m')`.
    pub fn o(&self, ket: usize, bra: usize, ell: i32) -> f64 {
        self.memoized(ket, bra, ell, false)
    }

    /// `O'(n,m,n',m',l) = int_0^inf r^l R_{n',m'} dR_{n,m}/dr dr`.
    pub fn oprime(&self, ket: usize, bra: usize, ell: i32) -> f64 {
        self.memoized(ket, bra, ell, true)
    }

    fn memoized(&self, ket: usize, bra: usize, ell: i32, prime: bool) -> f64 {
        let key = (ket, bra, ell, prime);
        if let Some(&v) = self.memo.read().unwrap().get(&key) {
            return v;
        }
        let v = if prime { self.oprime_dd(ket, bra, ell) } else { self.double_sum(&self.laguerre_dd[ket], ket, bra, ell) }.to_f64();
        self.memo.write().unwrap().insert(key, v);
        v
    }

    fn oprime_dd(&self, ket: usize, bra: usize, ell: i32) -> Dd {
        let s = self.states[ket];
        let a = s.m.unsigned_abs();
        let beta = Dd::new(self.beta[s.n as usize]);
        let mut acc = self.double_sum(&self.laguerre_dd[ket], ket, bra, ell).mul(beta).mul(Dd::new(-0.5));
        if a > 0 {
            acc = acc.add(self.double_sum(&self.laguerre_dd[ket], ket, bra, ell - 1).mul(Dd::new(a as f64)));
        }
        acc.sub(self.double_sum(&self.laguerre_shifted_dd[ket], ket, bra, ell).mul(beta))
    }

    /// The double sum over Laguerre coefficients, evaluated in double-double
    /// arithmetic because its terms cancel strongly.
    fn double_sum(&self, ket_coeffs: &[Dd], ket: usize, bra: usize, ell: i32) -> Dd {
        if ket_coeffs.is_empty() {
            return Dd::ZERO;
        }
        let (sk, sb) = (self.states[ket], self.states[bra]);
        let (bk, bb) = (self.beta[sk.n as usize], self.beta[sb.n as usize]);
        let (ak, ab) = (sk.m.unsigned_abs() as i32, sb.m.unsigned_abs() as i32);
        let s = Dd::new(bk).add(Dd::new(bb)).mul(Dd::new(0.5));
        let rk = Dd::new(bk).div(s);
        let rb = Dd::new(bb).div(s);
        let bra_coeffs = &self.laguerre_dd[bra];
        let pk: Vec<Dd> = (0..ket_coeffs.len()).map(|j| rk.powi(ak as u32 + j as u32)).collect();
        let pb: Vec<Dd> = (0..bra_coeffs.len()).map(|j| rb.powi(ab as u32 + j as u32)).collect();
        let mut acc = Dd::ZERO;
        for (j, &cj) in ket_coeffs.iter().enumerate() {
            let left = cj.mul(pk[j]);
            for (jp, &cjp) in bra_coeffs.iter().enumerate() {
                let p = j as i32 + jp as i32 + ak + ab + ell;
                assert!(p >= 0, "radial integral diverges at the origin (power {p})");
                let fact = self.factorials.get(p as usize).copied().unwrap_or_else(|| factorial_dd(p as u32));
                acc = acc.add(left.mul(cjp).mul(pb[jp]).mul(fact));
            }
        }
        let e = ell + 1;
        if e >= 0 {
            acc.div(s.powi(e as u32))
        } else {
            acc.mul(s.powi((-e) as u32))
        }
    }

    /// Unitary `T` with `Phi_l = sum_m T_{m,l} Psi_m`.
    pub fn real_transform(&self) -> DMatrix<Complex64> {
        let d = self.len();
        let mut t = DMatrix::zeros(d, d);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (col, s) in self.states.iter().enumerate() {
            if s.m == 0 {
                t[(col, col)] = Complex64::new(1.0, 0.0);
                continue;
            }
            let a = s.m.abs();
            let plus = self.index_of(s.n, a).unwrap();
            let minus = self.index_of(s.n, -a).unwrap();
            if s.m > 0 {
                t[(plus, col)] = Complex64::new(h, 0.0);
                t[(minus, col)] = Complex64::new(h, 0.0);
            } else {
                // (Psi_{|l|} - Psi_{-|l|}) / (i sqrt 2)
                t[(plus, col)] = Complex64::new(0.0, -h);
                t[(minus, col)] = Complex64::new(0.0, h);
            }
        }
        t
    }
}

/// `O` for explicit quantum numbers.
pub fn radial_integral_o(n: u32, m: i32, np: u32, mp: i32, ell: i32, basis: &RelativeBasis) -> Result<f64> {
    let (ket, bra) = lookup_pair(basis, n, m, np, mp)?;
    check_power(m, mp, ell)?;
    Ok(basis.o(ket, bra, ell))
}

/// `O'` for explicit quantum numbers.
pub fn radial_integral_oprime(n: u32, m: i32, np: u32, mp: i32, ell: i32, basis: &RelativeBasis) -> Result<f64> {
    let (ket, bra) = lookup_pair(basis, n, m, np, mp)?;
    check_power(m, mp, ell - 1)?;
    Ok(basis.oprime(ket, bra, ell))
}

fn lookup_pair(basis: &RelativeBasis, n: u32, m: i32, np: u32, mp: i32) -> Result<(usize, usize)> {
    let find = |n, m| basis.index_of(n, m).ok_or_else(|| Error::BasisMismatch(format!("state ({n}, {m}) not in basis")));
    Ok((find(n, m)?, find(np, mp)?))
}

fn check_power(m: i32, mp: i32, ell: i32) -> Result<()> {
    let lowest = (m.unsigned_abs() + mp.unsigned_abs()) as i32;
    if ell + lowest < 0 {
        return Err(Error::param(format!("radial power {ell} makes the integral diverge for m = {m}, m' = {mp}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// `cos(q.x/2)`
    Cosine,
    /// `sin(q.x/2)`
    Sine,
    /// `(p.e) cos(q.x/2)` with `e` at angle `theta_eps`
    MomentumCosine,
    /// `x.v` with `v` the unit vector along `q`
    Dipole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelOperator {
    pub kind: OpKind,
    pub q: [f64; 2],
    pub theta_eps: f64,
}

impl RelOperator {
    pub fn cosine(q: [f64; 2]) -> Self {
        RelOperator { kind: OpKind::Cosine, q, theta_eps: 0.0 }
    }

    pub fn sine(q: [f64; 2]) -> Self {
        RelOperator { kind: OpKind::Sine, q, theta_eps: 0.0 }
    }

    pub fn momentum_cosine(q: [f64; 2], theta_eps: f64) -> Self {
        RelOperator { kind: OpKind::MomentumCosine, q, theta_eps }
    }

    pub fn dipole(axis: [f64; 2]) -> Self {
        RelOperator { kind: OpKind::Dipole, q: axis, theta_eps: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Complex,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelMatrix {
    pub op: RelOperator,
    pub engine: MatrixEngine,
    pub basis_kind: BasisKind,
    pub values: DMatrix<Complex64>,
}

impl RelMatrix {
    /// Sparse CSV dump with columns `row, col, re, im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,re,im")?;
        for c in 0..self.values.ncols() {
            for r in 0..self.values.nrows() {
                let v = self.values[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    writeln!(w, "{r},{c},{:e},{:e}", v.re, v.im)?;
                }
            }
        }
        Ok(())
    }
}

/// Matrix of `op` in the complex `(n, m)` basis.
pub fn relative_matrix(op: &RelOperator, engine: MatrixEngine, basis: &RelativeBasis) -> Result<RelMatrix> {
    relative_matrix_with(op, engine, basis, &QuadSettings::default())
}

pub fn relative_matrix_with(
    op: &RelOperator,
    engine: MatrixEngine,
    basis: &RelativeBasis,
    settings: &QuadSettings,
) -> Result<RelMatrix> {
    check_operator(op)?;
    let values = match engine {
        MatrixEngine::Taylor { order } => taylor::complex_matrix(&taylor::expansion(op, order), basis),
        MatrixEngine::Quadrature => {
            let all: Vec<usize> = (0..basis.len()).collect();
            let real = quadrature::real_matrix(op, basis, &all, settings)?;
            let mut values = real.map(|x| Complex64::new(x, 0.0));
            if op.kind == OpKind::MomentumCosine {
                // stored matrix is i (p.e) cos, undo the factor i
                values *= Complex64::new(0.0, -1.0);
            }
            let t = basis.real_transform();
            &t * values * t.adjoint()
        }
    };
    Ok(RelMatrix { op: *op, engine, basis_kind: BasisKind::Complex, values })
}

fn check_operator(op: &RelOperator) -> Result<()> {
    if !op.q.iter().all(|x| x.is_finite()) || !op.theta_eps.is_finite() {
        return Err(Error::param("operator parameters must be finite"));
    }
    if op.kind == OpKind::Dipole && op.q == [0.0, 0.0] {
        return Err(Error::param("dipole axis must be nonzero"));
    }
    Ok(())
}

/// `T^dagger M T`.
pub fn to_real_basis(matrix: &RelMatrix, basis: &RelativeBasis) -> Result<RelMatrix> {
    if matrix.basis_kind != BasisKind::Complex {
        return Err(Error::BasisMismatch("matrix is already in the real basis".into()));
    }
    if matrix.values.nrows() != basis.len() || matrix.values.ncols() != basis.len() {
        return Err(Error::BasisMismatch(format!(
            "matrix is {}x{} but the basis has {} states",
            matrix.values.nrows(),
            matrix.values.ncols(),
            basis.len()
        )));
    }
    let t = basis.real_transform();
    Ok(RelMatrix { values: t.adjoint() * &matrix.values * t, basis_kind: BasisKind::Real, ..matrix.clone() })
}

/// Real matrix on the real-basis states `sel`. For `MomentumCosine` this is
/// the matrix of `i (p.e) cos(q.x/2)`.
pub fn real_operator(op: &RelOperator, engine: MatrixEngine, basis: &RelativeBasis, sel: &[usize]) -> Result<DMatrix<f64>> {
    real_operator_with(op, engine, basis, sel, &QuadSettings::default())
}

pub fn real_operator_with(
    op: &RelOperator,
    engine: MatrixEngine,
    basis: &RelativeBasis,
    sel: &[usize],
    settings: &QuadSettings,
) -> Result<DMatrix<f64>> {
    check_operator(op)?;
    if let Some(&bad) = sel.iter().find(|&&i| i >= basis.len()) {
        return Err(Error::BasisMismatch(format!("state index {bad} outside a basis of {}", basis.len())));
    }
    match engine {
        MatrixEngine::Quadrature => quadrature::real_matrix(op, basis, sel, settings),
        MatrixEngine::Taylor { .. } => {
            let full = to_real_basis(&relative_matrix_with(op, engine, basis, settings)?, basis)?;
            let phase = if op.kind == OpKind::MomentumCosine { Complex64::i() } else { Complex64::new(1.0, 0.0) };
            Ok(DMatrix::from_fn(sel.len(), sel.len(), |a, b| (phase * full.values[(sel[a], sel[b])]).re))
        }
    }
}

/// Real matrices `M_ab` on the states `sel` with `cos(q.x/2) = sum qx^a qy^b M_ab`
/// under the Taylor engine of the given order.
pub fn cosine_polynomial(order: u32, basis: &RelativeBasis, sel: &[usize]) -> Result<Vec<((u32, u32), DMatrix<f64>)>> {
    if let Some(&bad) = sel.iter().find(|&&i| i >= basis.len()) {
        return Err(Error::BasisMismatch(format!("state index {bad} outside a basis of {}", basis.len())));
    }
    let t = basis.real_transform();
    Ok(taylor::cosine_monomials(order)
        .into_iter()
        .map(|(ab, terms)| {
            let full = t.adjoint() * taylor::complex_matrix(&terms, basis) * &t;
            (ab, DMatrix::from_fn(sel.len(), sel.len(), |r, c| full[(sel[r], sel[c])].re))
        })
        .collect())
}

#[cfg(test)]
mod tests;
