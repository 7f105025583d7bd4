//! The Hamiltonian block at fixed total crystal momentum `K`.
//!
//! States are grouped into fibers labelled by `(kappa, phonon)`. Inside a fiber
//! the relative index is slow and the photon index fast, so a state vector is a
//! column-major `internal_dim x n_fibers` matrix. Photon couplings act inside a
//! fiber; lattice and phonon couplings connect fibers.

mod apply;
mod sparse;
#[cfg(test)]
mod tests;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::CompositeBasis;
use crate::error::{Error, Result};
use crate::hydrogen2d::{cosine_polynomial, real_operator, RelOperator};
use crate::model::{MatrixEngine, ModelConfig};

pub use sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Kinetic,
    Relative,
    Lattice,
    PhotonFree,
    PhononFree,
    PhotonLinear,
    Diamagnetic,
    PhononCoupling,
}

impl Term {
    pub const ALL: [Term; 8] = [
        Term::Kinetic,
        Term::Relative,
        Term::Lattice,
        Term::PhotonFree,
        Term::PhononFree,
        Term::PhotonLinear,
        Term::Diamagnetic,
        Term::PhononCoupling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Kinetic => "kinetic",
            Term::Relative => "relative",
            Term::Lattice => "lattice",
            Term::PhotonFree => "photon_free",
            Term::PhononFree => "phonon_free",
            Term::PhotonLinear => "photon_linear",
            Term::Diamagnetic => "diamagnetic",
            Term::PhononCoupling => "phonon_coupling",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSpec {
    pub name: Term,
    pub enabled: bool,
}

/// Set of active terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermMask(u8);

impl TermMask {
    pub const ALL: TermMask = TermMask(0xff);

    pub fn only(terms: &[Term]) -> Self {
        TermMask(terms.iter().fold(0, |m, t| m | t.bit()))
    }

    /// All terms, with the diamagnetic one following the model flag.
    pub fn for_model(model: &ModelConfig) -> Self {
        TermMask::ALL.with(Term::Diamagnetic, model.flags.include_diamagnetic)
    }

    pub fn from_specs(specs: &[TermSpec]) -> Result<Self> {
        let mut mask = TermMask::ALL;
        for s in specs {
            mask = mask.with(s.name, s.enabled);
        }
        if !mask.contains(Term::Kinetic) || !mask.contains(Term::Relative) {
            return Err(Error::param("the kinetic and relative terms cannot be disabled"));
        }
        Ok(mask)
    }

    pub fn with(self, term: Term, on: bool) -> Self {
        if on {
            TermMask(self.0 | term.bit())
        } else {
            TermMask(self.0 & !term.bit())
        }
    }

    pub fn contains(self, term: Term) -> bool {
        self.0 & term.bit() != 0
    }

    pub fn intersect(self, other: TermMask) -> Self {
        TermMask(self.0 & other.0)
    }

    pub fn specs(self) -> Vec<TermSpec> {
        Term::ALL.iter().map(|&t| TermSpec { name: t, enabled: self.contains(t) }).collect()
    }

    pub fn enabled(self) -> impl Iterator<Item = Term> {
        Term::ALL.into_iter().filter(move |&t| self.contains(t))
    }
}

/// Real operator on one fiber.
#[derive(Debug, Clone)]
enum InternalOp {
    Zero,
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
    Factored(FactoredOp),
}

/// `shift + sum_g sum_t (u_t v_t^T) (x) M_g` on photon (x) relative space.
#[derive(Debug, Clone)]
struct FactoredOp {
    nph: usize,
    nr: usize,
    shift: f64,
    groups: Vec<(DMatrix<f64>, Vec<(Vec<f64>, Vec<f64>)>)>,
}

impl FactoredOp {
    fn entry(&self, row: usize, col: usize) -> f64 {
        let (ro, p2) = (row / self.nph, row % self.nph);
        let (ri, p) = (col / self.nph, col % self.nph);
        let mut v = if row == col { self.shift } else { 0.0 };
        for (m, factors) in &self.groups {
            let photon: f64 = factors.iter().map(|(u, w)| u[p2] * w[p]).sum();
            v += photon * m[(ro, ri)];
        }
        v
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let d = self.nph * self.nr;
        DMatrix::from_fn(d, d, |r, c| self.entry(r, c))
    }
}

impl InternalOp {
    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match self {
            InternalOp::Zero => Vec::new(),
            InternalOp::Sparse(m) => (0..m.n_rows()).flat_map(|r| m.row(r).map(move |(c, v)| (r, c, v))).collect(),
            InternalOp::Dense(m) => {
                let mut out = Vec::new();
                for c in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        if m[(r, c)] != 0.0 {
                            out.push((r, c, m[(r, c)]));
                        }
                    }
                }
                out
            }
            InternalOp::Factored(f) => InternalOp::Dense(f.to_dense()).triplets(),
        }
    }

    fn nnz(&self) -> usize {
        match self {
            InternalOp::Zero => 0,
            InternalOp::Sparse(m) => m.nnz(),
            InternalOp::Dense(m) => m.len(),
            InternalOp::Factored(f) => (f.nph * f.nr).pow(2),
        }
    }

    fn asymmetry(&self) -> (f64, f64) {
        match self {
            InternalOp::Zero => (0.0, 0.0),
            InternalOp::Sparse(m) => (m.asymmetry(), m.max_abs()),
            InternalOp::Dense(m) => ((m - m.transpose()).amax(), m.amax()),
            InternalOp::Factored(f) => {
                let groups: Vec<f64> = f.groups.iter().map(|(m, _)| (m - m.transpose()).amax()).collect();
                let photon = f.groups.iter().map(|(_, factors)| {
                    let pm = factors.iter().fold(DMatrix::zeros(f.nph, f.nph), |acc, (u, w)| {
                        acc + nalgebra::DVector::from_column_slice(u) * nalgebra::DVector::from_column_slice(w).transpose()
                    });
                    ((&pm - pm.transpose()).amax(), pm.amax())
                });
                let mut asym = 0.0f64;
                let mut scale = f.shift.abs();
                for ((m, _), (g, (pa, ps))) in f.groups.iter().zip(groups.iter().zip(photon)) {
                    asym = asym.max(g * ps + pa * m.amax());
                    scale = scale.max(ps * m.amax());
                }
                (asym, scale)
            }
        }
    }
}

/// Accumulates an internal operator, densely when it is expected to be full.
struct OpBuilder {
    dim: usize,
    dense: Option<DMatrix<f64>>,
    triplets: Vec<(usize, usize, f64)>,
}

impl OpBuilder {
    fn new(dim: usize, expected_nnz: usize) -> Self {
        let dense = (expected_nnz.saturating_mul(4) > dim * dim).then(|| DMatrix::zeros(dim, dim));
        OpBuilder { dim, dense, triplets: Vec::new() }
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        match &mut self.dense {
            Some(m) => m[(r, c)] += v,
            None => self.triplets.push((r, c, v)),
        }
    }

    fn finish(self) -> InternalOp {
        match self.dense {
            Some(m) => InternalOp::Dense(m),
            None if self.triplets.is_empty() => InternalOp::Zero,
            None => {
                let m = CsrMatrix::from_triplets(self.dim, self.dim, self.triplets);
                if m.nnz() * 4 > self.dim * self.dim {
                    InternalOp::Dense(m.to_dense())
                } else {
                    InternalOp::Sparse(m)
                }
            }
        }
    }
}

/// Incoming coupling `y_out += coef * (M (x) 1_photon) x_src`.
#[derive(Debug, Clone, Copy)]
struct Link {
    src: usize,
    mat: usize,
    coef: f64,
}

/// Parts of the block that do not depend on `K`.
#[derive(Debug)]
struct Shared {
    basis: Arc<CompositeBasis>,
    terms: TermMask,
    total_mass: f64,
    phonon_boost_in_photon_term: bool,
    photon_momentum: Vec<[f64; 2]>,
    phonon_momentum: Vec<[f64; 2]>,
    rel_energy: Vec<f64>,
    photon_energy: Vec<f64>,
    phonon_energy: Vec<f64>,
    lattice_shift: f64,
    w_lin: InternalOp,
    w_x: InternalOp,
    w_y: InternalOp,
    w_dia: InternalOp,
    lattice_mats: Vec<DMatrix<f64>>,
    lattice_in: Vec<Vec<Link>>,
    phonon_mats: Vec<DMatrix<f64>>,
    phonon_in: Vec<Vec<Link>>,
}

/// Precomputes everything `K`-independent, then builds blocks cheaply.
#[derive(Debug, Clone)]
pub struct Assembler {
    shared: Arc<Shared>,
}

#[derive(Debug, Clone)]
pub struct BlockHamiltonian {
    k: [f64; 2],
    shared: Arc<Shared>,
    kinetic: Vec<f64>,
    fiber_p: Vec<[f64; 2]>,
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn antisymmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m - m.transpose()) * 0.5
}

/// Key identifying `v` and `-v` together.
fn even_key(v: [f64; 2]) -> ([i64; 2], [f64; 2]) {
    let flip = v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0);
    let c = if flip { [-v[0], -v[1]] } else { v };
    ([(c[0] * 1e12).round() as i64, (c[1] * 1e12).round() as i64], c)
}

fn occupation_momentum(occ: &[(u32, u32)], vec: impl Fn(usize) -> [f64; 2]) -> [f64; 2] {
    occ.iter().fold([0.0, 0.0], |acc, &(m, n)| {
        let q = vec(m as usize);
        [acc[0] + n as f64 * q[0], acc[1] + n as f64 * q[1]]
    })
}

fn check_basis(model: &ModelConfig, basis: &CompositeBasis) -> Result<()> {
    if basis.photons.n_modes() != model.photons.len() {
        return Err(Error::BasisMismatch(format!(
            "basis has {} photon modes, model has {}",
            basis.photons.n_modes(),
            model.photons.len()
        )));
    }
    if basis.phonons.n_modes() != model.phonons.len() {
        return Err(Error::BasisMismatch(format!(
            "basis has {} phonon modes, model has {}",
            basis.phonons.n_modes(),
            model.phonons.len()
        )));
    }
    if (basis.rel.mu() - model.exciton.reduced_mass).abs() > 1e-14 * model.exciton.reduced_mass {
        return Err(Error::BasisMismatch(format!(
            "relative basis built for mu = {}, model has mu = {}",
            basis.rel.mu(),
            model.exciton.reduced_mass
        )));
    }
    Ok(())
}

impl Assembler {
    pub fn new(model: &ModelConfig, basis: Arc<CompositeBasis>) -> Result<Self> {
        Self::with_terms(model, basis, TermMask::for_model(model))
    }

    pub fn with_terms(model: &ModelConfig, basis: Arc<CompositeBasis>, terms: TermMask) -> Result<Self> {
        model.validate()?;
        check_basis(model, &basis)?;
        if !terms.contains(Term::Kinetic) || !terms.contains(Term::Relative) {
            return Err(Error::param("the kinetic and relative terms cannot be disabled"));
        }
        let terms = terms.with(Term::Diamagnetic, terms.contains(Term::Diamagnetic) && model.flags.include_diamagnetic);
        let b = &*basis;
        let ex = &model.exciton;
        let zero_point = model.flags.include_zero_point;

        let photon_momentum: Vec<[f64; 2]> =
            b.photons.states().iter().map(|o| occupation_momentum(o, |m| model.photons[m].q)).collect();
        let phonon_momentum: Vec<[f64; 2]> =
            b.phonons.states().iter().map(|o| occupation_momentum(o, |m| model.phonons[m].k)).collect();
        let rel_energy = (0..b.n_rel()).map(|r| model.relative_energy(b.rel_state(r).n)).collect();
        let photon_zp: f64 = if zero_point { 0.5 * model.photons.iter().map(|p| p.omega).sum::<f64>() } else { 0.0 };
        let phonon_zp: f64 = if zero_point { 0.5 * model.phonons.iter().map(|p| p.omega).sum::<f64>() } else { 0.0 };
        let photon_energy = b
            .photons
            .states()
            .iter()
            .map(|o| photon_zp + o.iter().map(|&(m, n)| n as f64 * model.photons[m as usize].omega).sum::<f64>())
            .collect();
        let phonon_energy = b
            .phonons
            .states()
            .iter()
            .map(|o| phonon_zp + o.iter().map(|&(m, n)| n as f64 * model.phonons[m as usize].omega).sum::<f64>())
            .collect();

        let (w_lin, w_x, w_y) = if terms.contains(Term::PhotonLinear) {
            photon_linear(model, b, &photon_momentum)?
        } else {
            (InternalOp::Zero, InternalOp::Zero, InternalOp::Zero)
        };
        let w_dia = if terms.contains(Term::Diamagnetic) { diamagnetic(model, b)? } else { InternalOp::Zero };
        let (lattice_shift, lattice_mats, lattice_in) = lattice(model, b)?;
        let (phonon_mats, phonon_in) = phonon_coupling(model, b)?;

        let shared = Shared {
            total_mass: ex.total_mass,
            phonon_boost_in_photon_term: model.flags.phonon_boost_in_photon_term,
            terms,
            photon_momentum,
            phonon_momentum,
            rel_energy,
            photon_energy,
            phonon_energy,
            lattice_shift,
            w_lin,
            w_x,
            w_y,
            w_dia,
            lattice_mats,
            lattice_in,
            phonon_mats,
            phonon_in,
            basis,
        };
        for op in [&shared.w_lin, &shared.w_x, &shared.w_y, &shared.w_dia] {
            let (asym, scale) = op.asymmetry();
            if asym > 1e-12 * scale.max(1e-300) {
                return Err(Error::NotHermitian(asym));
            }
        }
        Ok(Assembler { shared: Arc::new(shared) })
    }

    pub fn basis(&self) -> &Arc<CompositeBasis> {
        &self.shared.basis
    }

    pub fn terms(&self) -> TermMask {
        self.shared.terms
    }

    pub fn block(&self, k: [f64; 2]) -> BlockHamiltonian {
        let s = &self.shared;
        let b = &*s.basis;
        let nph = b.photons.len();
        let mut kinetic = Vec::with_capacity(b.n_fibers() * nph);
        let mut fiber_p = Vec::with_capacity(b.n_fibers());
        for kap in &b.kappas {
            for qb in &s.phonon_momentum {
                let base = [k[0] + kap.vec[0] - qb[0], k[1] + kap.vec[1] - qb[1]];
                for qp in &s.photon_momentum {
                    let p = [base[0] - qp[0], base[1] - qp[1]];
                    kinetic.push((p[0] * p[0] + p[1] * p[1]) / (2.0 * s.total_mass));
                }
                fiber_p.push(if s.phonon_boost_in_photon_term { base } else { [k[0] + kap.vec[0], k[1] + kap.vec[1]] });
            }
        }
        BlockHamiltonian { k, shared: Arc::clone(&self.shared), kinetic, fiber_p }
    }
}

/// Real-basis matrix of `op`, computed once per `engine`.
fn rel_matrix(op: RelOperator, engine: MatrixEngine, b: &CompositeBasis) -> Result<DMatrix<f64>> {
    real_operator(&op, engine, &b.rel, &b.rel_sel)
}

/// Linear photon coupling split as `w_lin + P_x w_x + P_y w_y`, where `P` is
/// the fiber momentum. `w_lin` carries the momentum operator part and the
/// photon recoil inside `P_eff`.
fn photon_linear(
    model: &ModelConfig,
    b: &CompositeBasis,
    photon_momentum: &[[f64; 2]],
) -> Result<(InternalOp, InternalOp, InternalOp)> {
    let active: Vec<usize> = (0..model.photons.len()).filter(|&j| model.photons[j].amplitude != 0.0).collect();
    if active.is_empty() {
        return Ok((InternalOp::Zero, InternalOp::Zero, InternalOp::Zero));
    }
    let mats: Vec<(DMatrix<f64>, DMatrix<f64>)> = active
        .par_iter()
        .map(|&j| {
            let p = &model.photons[j];
            let s = symmetrize(rel_matrix(RelOperator::sine(p.q), model.engine, b)?);
            let g = antisymmetrize(rel_matrix(RelOperator::momentum_cosine(p.q, p.pol_angle), model.engine, b)?);
            Ok((s, g))
        })
        .collect::<Result<_>>()?;
    let nph = b.photons.len();
    let nr = b.n_rel();
    let dim = nph * nr;
    let m = model.exciton.total_mass;
    let mu = model.exciton.reduced_mass;
    let mut lin = OpBuilder::new(dim, 0);
    let mut wx = OpBuilder::new(dim, 0);
    let mut wy = OpBuilder::new(dim, 0);
    for p in 0..nph {
        let qp = photon_momentum[p];
        for (&j, (s, g)) in active.iter().zip(&mats) {
            let mode = &model.photons[j];
            let e = mode.polarization();
            let a = mode.amplitude;
            let recoil = -(2.0 / m) * (qp[0] * e[0] + qp[1] * e[1]);
            let moves = [(b.photons.raise(p, j as u32), 1.0), (b.photons.lower(p, j as u32), -1.0)];
            for (target, sign) in moves {
                let Some((p2, amp)) = target else { continue };
                for ri in 0..nr {
                    for ro in 0..nr {
                        let (sv, gv) = (s[(ro, ri)], g[(ro, ri)]);
                        let row = ro * nph + p2;
                        let col = ri * nph + p;
                        lin.add(row, col, amp * a * (recoil * sv + sign * gv / mu));
                        wx.add(row, col, amp * a * (2.0 / m) * e[0] * sv);
                        wy.add(row, col, amp * a * (2.0 / m) * e[1] * sv);
                    }
                }
            }
        }
    }
    Ok((lin.finish(), wx.finish(), wy.finish()))
}

fn diamagnetic(model: &ModelConfig, b: &CompositeBasis) -> Result<InternalOp> {
    match model.engine {
        MatrixEngine::Taylor { order } if model.truncation.photon_excitation_cap == 1 => {
            diamagnetic_factored(model, b, order)
        }
        _ => diamagnetic_assembled(model, b),
    }
}

/// One-photon diamagnetic term with the Taylor series split into monomials,
/// so every photon pair enters through rank-one factors.
fn diamagnetic_factored(model: &ModelConfig, b: &CompositeBasis, order: u32) -> Result<InternalOp> {
    let active: Vec<usize> = (0..model.photons.len()).filter(|&j| model.photons[j].amplitude != 0.0).collect();
    if active.is_empty() {
        return Ok(InternalOp::Zero);
    }
    let nph = b.photons.len();
    let nr = b.n_rel();
    let c = 1.0 / (2.0 * model.exciton.reduced_mass);
    let shift: f64 = active.iter().map(|&j| model.photons[j].amplitude.powi(2)).sum::<f64>() * c;
    let single: Vec<Option<usize>> =
        (0..nph).map(|p| (b.photons.total(p) == 1).then(|| b.photons.states()[p][0].0 as usize)).collect();
    let binom = |n: u32, k: u32| crate::special::binomial(n, k);
    let mut groups = Vec::new();
    for ((a, bb), m) in cosine_polynomial(order, &b.rel, &b.rel_sel)? {
        let m = symmetrize(m);
        if m.amax() == 0.0 {
            continue;
        }
        let mut factors = Vec::new();
        for i in 0..2 {
            for s in 0..=a {
                for t in 0..=bb {
                    let mut u = vec![0.0; nph];
                    let mut w = vec![0.0; nph];
                    for (p, mode) in single.iter().enumerate() {
                        let Some(j) = *mode else { continue };
                        let ph = &model.photons[j];
                        if ph.amplitude == 0.0 {
                            continue;
                        }
                        let e = ph.polarization()[i];
                        let (qx, qy) = (ph.q[0], ph.q[1]);
                        u[p] = 2.0 * c * ph.amplitude * e * binom(a, s) * binom(bb, t)
                            * qx.powi((a - s) as i32) * qy.powi((bb - t) as i32);
                        w[p] = ph.amplitude * e * (-qx).powi(s as i32) * (-qy).powi(t as i32);
                    }
                    if u.iter().any(|&x| x != 0.0) && w.iter().any(|&x| x != 0.0) {
                        factors.push((u, w));
                    }
                }
            }
        }
        if !factors.is_empty() {
            groups.push((m, factors));
        }
    }
    Ok(InternalOp::Factored(FactoredOp { nph, nr, shift, groups }))
}

fn diamagnetic_assembled(model: &ModelConfig, b: &CompositeBasis) -> Result<InternalOp> {
    let active: Vec<usize> = (0..model.photons.len()).filter(|&j| model.photons[j].amplitude != 0.0).collect();
    if active.is_empty() {
        return Ok(InternalOp::Zero);
    }
    let pairs = model.truncation.photon_excitation_cap >= 2;
    let mut keys: HashMap<[i64; 2], [f64; 2]> = HashMap::new();
    for &j in &active {
        for &jp in &active {
            let (qj, qk) = (model.photons[j].q, model.photons[jp].q);
            let (key, v) = even_key([qj[0] - qk[0], qj[1] - qk[1]]);
            keys.entry(key).or_insert(v);
            if pairs {
                let (key, v) = even_key([qj[0] + qk[0], qj[1] + qk[1]]);
                keys.entry(key).or_insert(v);
            }
        }
    }
    let mut keys: Vec<([i64; 2], [f64; 2])> = keys.into_iter().collect();
    keys.sort_by_key(|(k, _)| *k);
    let mats: Vec<DMatrix<f64>> = keys
        .par_iter()
        .map(|(_, v)| Ok(symmetrize(rel_matrix(RelOperator::cosine(*v), model.engine, b)?)))
        .collect::<Result<_>>()?;
    let index: HashMap<[i64; 2], usize> = keys.iter().enumerate().map(|(i, (k, _))| (*k, i)).collect();
    let lookup = |v: [f64; 2]| &mats[index[&even_key(v).0]];

    let nph = b.photons.len();
    let nr = b.n_rel();
    let dim = nph * nr;
    let c = 1.0 / (2.0 * model.exciton.reduced_mass);
    let one_photon = active.len() * active.len() * nr * nr;
    let mut w = OpBuilder::new(dim, one_photon.saturating_mul(nph.div_ceil(active.len().max(1))));
    let constant: f64 = active.iter().map(|&j| model.photons[j].amplitude.powi(2)).sum::<f64>() * c;
    for i in 0..dim {
        w.add(i, i, constant);
    }
    let dot = |j: usize, k: usize| {
        let (a, bb) = (model.photons[j].polarization(), model.photons[k].polarization());
        a[0] * bb[0] + a[1] * bb[1]
    };
    let push = |w: &mut OpBuilder, p: usize, p2: usize, coef: f64, d: &DMatrix<f64>| {
        for ri in 0..nr {
            for ro in 0..nr {
                w.add(ro * nph + p2, ri * nph + p, coef * d[(ro, ri)]);
            }
        }
    };
    for p in 0..nph {
        for &jp in &active {
            let Some((p1, a1)) = b.photons.lower(p, jp as u32) else { continue };
            for &j in &active {
                let Some((p2, a2)) = b.photons.raise(p1, j as u32) else { continue };
                let (mj, mk) = (&model.photons[j], &model.photons[jp]);
                let coef = 2.0 * c * mj.amplitude * mk.amplitude * dot(j, jp) * a1 * a2;
                if coef != 0.0 {
                    push(&mut w, p, p2, coef, lookup([mj.q[0] - mk.q[0], mj.q[1] - mk.q[1]]));
                }
            }
        }
        if pairs {
            for &jp in &active {
                for &j in &active {
                    let (mj, mk) = (&model.photons[j], &model.photons[jp]);
                    let coef = -c * mj.amplitude * mk.amplitude * dot(j, jp);
                    if coef == 0.0 {
                        continue;
                    }
                    let d = lookup([mj.q[0] + mk.q[0], mj.q[1] + mk.q[1]]);
                    if let Some((p1, a1)) = b.photons.lower(p, jp as u32) {
                        if let Some((p2, a2)) = b.photons.lower(p1, j as u32) {
                            push(&mut w, p, p2, coef * a1 * a2, d);
                        }
                    }
                    if let Some((p1, a1)) = b.photons.raise(p, jp as u32) {
                        if let Some((p2, a2)) = b.photons.raise(p1, j as u32) {
                            push(&mut w, p, p2, coef * a1 * a2, d);
                        }
                    }
                }
            }
        }
    }
    Ok(w.finish())
}

type Coupling = (Vec<DMatrix<f64>>, Vec<Vec<Link>>);

fn lattice(model: &ModelConfig, b: &CompositeBasis) -> Result<(f64, Vec<DMatrix<f64>>, Vec<Vec<Link>>)> {
    let ex = &model.exciton;
    let shift = 2.0 * ex.weight(0, 0);
    let mut hops: Vec<(i32, i32, f64)> =
        ex.weights.iter().filter(|w| (w.n1, w.n2) != (0, 0) && w.w != 0.0).map(|w| (w.n1, w.n2, w.w)).collect();
    hops.sort_by_key(|h| (h.0, h.1));
    let canonical = |n1: i32, n2: i32| if n1 < 0 || (n1 == 0 && n2 < 0) { (-n1, -n2) } else { (n1, n2) };
    let mut reps: Vec<(i32, i32)> = hops.iter().map(|h| canonical(h.0, h.1)).collect();
    reps.dedup();
    reps.sort();
    reps.dedup();
    let cosines: Vec<DMatrix<f64>> = reps
        .par_iter()
        .map(|&(n1, n2)| Ok(symmetrize(rel_matrix(RelOperator::cosine(ex.kappa(n1, n2)), MatrixEngine::Quadrature, b)?)))
        .collect::<Result<_>>()?;
    let mats: Vec<DMatrix<f64>> = hops
        .iter()
        .map(|&(n1, n2, w)| {
            let i = reps.binary_search(&canonical(n1, n2)).unwrap();
            &cosines[i] * (2.0 * w)
        })
        .collect();
    let index: HashMap<(i32, i32), usize> = b.kappas.iter().enumerate().map(|(i, k)| ((k.n1, k.n2), i)).collect();
    let nb = b.phonons.len();
    let mut incoming = vec![Vec::new(); b.n_fibers()];
    for (ko, kap) in b.kappas.iter().enumerate() {
        for (h, &(n1, n2, _)) in hops.iter().enumerate() {
            let Some(&ks) = index.get(&(kap.n1 - n1, kap.n2 - n2)) else { continue };
            for ph in 0..nb {
                incoming[b.fiber(ko, ph)].push(Link { src: b.fiber(ks, ph), mat: h, coef: 1.0 });
            }
        }
    }
    Ok((shift, mats, incoming))
}

fn phonon_coupling(model: &ModelConfig, b: &CompositeBasis) -> Result<Coupling> {
    let active: Vec<usize> = (0..model.phonons.len()).filter(|&i| model.phonons[i].gamma != 0.0).collect();
    let mats: Vec<DMatrix<f64>> = active
        .par_iter()
        .map(|&i| {
            let ph = &model.phonons[i];
            Ok(symmetrize(rel_matrix(RelOperator::cosine(ph.k), model.engine, b)?) * (2.0 * ph.gamma))
        })
        .collect::<Result<_>>()?;
    let mut incoming = vec![Vec::new(); b.n_fibers()];
    for kap in 0..b.kappas.len() {
        for src in 0..b.phonons.len() {
            for (mat, &i) in active.iter().enumerate() {
                for target in [b.phonons.raise(src, i as u32), b.phonons.lower(src, i as u32)] {
                    if let Some((dst, amp)) = target {
                        incoming[b.fiber(kap, dst)].push(Link { src: b.fiber(kap, src), mat, coef: amp });
                    }
                }
            }
        }
    }
    for links in &mut incoming {
        links.sort_by_key(|l| (l.src, l.mat));
    }
    Ok((mats, incoming))
}

/// Builds the block at `K` from scratch.
pub fn assemble_block(k: [f64; 2], model: &ModelConfig, basis: Arc<CompositeBasis>) -> Result<BlockHamiltonian> {
    Ok(Assembler::new(model, basis)?.block(k))
}

/// `H v` as a new vector.
pub fn apply_block(h: &BlockHamiltonian, v: &[f64]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; h.dim()];
    h.apply(v, &mut y)?;
    Ok(y)
}

/// `<v|H_term|v>` for every enabled term, in `Term::ALL` order.
pub fn term_breakdown(h: &BlockHamiltonian, v: &[f64]) -> Result<Vec<(Term, f64)>> {
    let mut y = vec![0.0; h.dim()];
    h.terms()
        .enabled()
        .map(|t| {
            h.apply_terms(TermMask::only(&[t]), v, &mut y)?;
            Ok((t, crate::linalg::dot(v, &y)))
        })
        .collect()
}

impl BlockHamiltonian {
    pub fn k(&self) -> [f64; 2] {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.shared.basis.dim()
    }

    pub fn basis(&self) -> &Arc<CompositeBasis> {
        &self.shared.basis
    }

    pub fn terms(&self) -> TermMask {
        self.shared.terms
    }

    pub fn term_specs(&self) -> Vec<TermSpec> {
        self.shared.terms.specs()
    }

    /// Stored entries of the sparse form, without building it.
    pub fn nnz_estimate(&self) -> usize {
        let s = &self.shared;
        let b = &*s.basis;
        let nph = b.photons.len();
        let internal = s.w_lin.nnz() + s.w_x.nnz() + s.w_y.nnz() + s.w_dia.nnz();
        let count = |links: &[Vec<Link>], mats: &[DMatrix<f64>]| -> usize {
            links.iter().flatten().map(|l| mats[l.mat].len() * nph).sum()
        };
        let links = count(&s.lattice_in, &s.lattice_mats) + count(&s.phonon_in, &s.phonon_mats);
        self.dim() + internal * b.n_fibers() + links
    }
}
