//! The untransformed Hamiltonian on a closed centre-of-mass momentum grid.
//!
//! Boson operators come with explicit `e^{+-i q.X}` factors that shift the
//! centre-of-mass momentum `P`, the kinetic energy is `|P|^2 / 2M`, and the
//! light-matter terms follow from minimal coupling of both particles at
//! `x_e = X + x/2` and `x_h = X - x/2`. Its spectrum must equal the union of
//! the boosted blocks over the grid.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{composite_dimension, TruncationSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::Assembler;
use crate::hydrogen2d::{real_operator, RelOperator};
use crate::model::{ExcitonParams, LatticeWeight, MatrixEngine, ModelConfig, PhononMode, PhotonMode};
use crate::solve::{eig_symmetric, eigvals_hermitian};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommensurateToy {
    pub name: String,
    pub model: ModelConfig,
    pub k_origin: [f64; 2],
    pub k_step: [f64; 2],
    pub k_points: usize,
}

impl CommensurateToy {
    pub fn k_grid(&self) -> Vec<[f64; 2]> {
        (0..self.k_points)
            .map(|j| {
                let t = j as f64;
                [self.k_origin[0] + t * self.k_step[0], self.k_origin[1] + t * self.k_step[1]]
            })
            .collect()
    }

    /// Rejects boson wavevectors that are not integer multiples of the grid step.
    pub fn check(&self) -> Result<()> {
        let s2 = self.k_step[0].powi(2) + self.k_step[1].powi(2);
        if self.k_points == 0 || s2 == 0.0 {
            return Err(Error::NotCommensurate("the K grid needs a nonzero step and at least one point".into()));
        }
        let vecs = self.model.photons.iter().map(|p| p.q).chain(self.model.phonons.iter().map(|p| p.k));
        for v in vecs {
            let t = (v[0] * self.k_step[0] + v[1] * self.k_step[1]) / s2;
            let n = t.round();
            let off = [v[0] - n * self.k_step[0], v[1] - n * self.k_step[1]];
            if off[0].hypot(off[1]) > 1e-12 * s2.sqrt().max(1.0) {
                return Err(Error::NotCommensurate(format!(
                    "wavevector {v:?} is not a multiple of the grid step {:?}",
                    self.k_step
                )));
            }
        }
        Ok(())
    }
}

fn toy_model(w: f64, n_max: u32, cap: u32, fock: u32) -> ModelConfig {
    let ex = ExcitonParams::square_lattice(0.3, 9.0, w).unwrap();
    let tr = TruncationSpec { kappa_shell: 1, rel_n_max: n_max, photon_excitation_cap: cap, phonon_fock_cap: fock, ..Default::default() };
    let mut m = ModelConfig::matter_only(ex, tr);
    m.engine = MatrixEngine::Quadrature;
    m
}

fn toy(name: &str, model: ModelConfig) -> CommensurateToy {
    let step = model.exciton.b1[0] / 8.0;
    CommensurateToy { name: name.into(), model, k_origin: [0.0, 0.0], k_step: [step, 0.0], k_points: 8 }
}

/// Photon-only, phonon-only and combined toys on an 8-point grid.
pub fn standard_toys() -> Vec<CommensurateToy> {
    let step = 2.0 * std::f64::consts::PI / 9.0 / 8.0;
    let mut photon = toy_model(0.004, 2, 1, 1);
    photon.photons = vec![PhotonMode::te([step, 0.0], 0.1, 0.02)];
    let mut phonon = toy_model(0.004, 2, 1, 3);
    phonon.phonons = vec![PhononMode { k: [step, 0.0], omega: 0.02, gamma: 0.004 }];
    let mut both = toy_model(0.004, 1, 1, 2);
    both.photons = vec![PhotonMode::te([step, 0.0], 0.1, 0.02)];
    both.phonons = vec![PhononMode { k: [2.0 * step, 0.0], omega: 0.02, gamma: 0.004 }];
    vec![toy("photon-only", photon), toy("phonon-only", phonon), toy("combined", both)]
}

/// Every coupling switched off; both constructions reduce to the same diagonal.
pub fn zero_coupling_toy() -> CommensurateToy {
    let step = 2.0 * std::f64::consts::PI / 9.0 / 8.0;
    let mut m = toy_model(0.0, 1, 1, 2);
    m.photons = vec![PhotonMode::te([step, 0.0], 0.1, 0.0)];
    m.phonons = vec![PhononMode { k: [step, 0.0], omega: 0.02, gamma: 0.0 }];
    toy("zero-coupling", m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceResult {
    pub toy: String,
    pub dim: usize,
    pub max_deviation: f64,
}

fn key(p: [f64; 2]) -> [i64; 2] {
    [(p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64]
}

/// Max sorted-spectrum difference between the untransformed Hamiltonian and the boosted blocks.
pub fn commensurate_equivalence(toy: &CommensurateToy) -> Result<EquivalenceResult> {
    toy.check()?;
    let model = &toy.model;
    let basis = Arc::new(composite_dimension(&model.truncation, model)?);
    let asm = Assembler::new(model, Arc::clone(&basis))?;
    let grid = toy.k_grid();
    let total = grid.len() * basis.dim();
    if total > 4000 {
        return Err(Error::param(format!("commensurate toy has dimension {total}; keep it at or below 4000")));
    }

    let mut boosted: Vec<f64> = grid
        .par_iter()
        .map(|&k| Ok(eig_symmetric(asm.block(k).to_dense()?).0))
        .collect::<Result<Vec<_>>>()?
        .concat();
    boosted.sort_by(f64::total_cmp);

    let h = untransformed(model, &grid)?;
    let direct = eigvals_hermitian(h);
    let max_deviation = boosted.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EquivalenceResult { toy: toy.name.clone(), dim: total, max_deviation })
}

struct State {
    p: [f64; 2],
    ph: usize,
    pn: usize,
}

/// Dense complex Hamiltonian in the `(P, rel, photons, phonons)` basis.
pub fn untransformed(model: &ModelConfig, grid: &[[f64; 2]]) -> Result<DMatrix<Complex64>> {
    let b = composite_dimension(&model.truncation, model)?;
    let ex = &model.exciton;
    let nr = b.n_rel();
    let occ_momentum = |occ: &[(u32, u32)], vec: &dyn Fn(usize) -> [f64; 2]| {
        occ.iter().fold([0.0, 0.0], |acc, &(m, n)| {
            let v = vec(m as usize);
            [acc[0] + n as f64 * v[0], acc[1] + n as f64 * v[1]]
        })
    };
    let q_ph: Vec<[f64; 2]> = b.photons.states().iter().map(|o| occ_momentum(o, &|m| model.photons[m].q)).collect();
    let q_pn: Vec<[f64; 2]> = b.phonons.states().iter().map(|o| occ_momentum(o, &|m| model.phonons[m].k)).collect();

    let mut states = Vec::new();
    let mut index: HashMap<([i64; 2], usize, usize), usize> = HashMap::new();
    for k in grid {
        for kap in &b.kappas {
            for (pn, qb) in q_pn.iter().enumerate() {
                let base = [k[0] + kap.vec[0] - qb[0], k[1] + kap.vec[1] - qb[1]];
                for (ph, qp) in q_ph.iter().enumerate() {
                    let p = [base[0] - qp[0], base[1] - qp[1]];
                    if index.insert((key(p), ph, pn), states.len()).is_some() {
                        return Err(Error::NotCommensurate("two basis states share a momentum label".into()));
                    }
                    states.push(State { p, ph, pn });
                }
            }
        }
    }
    let n = states.len() * nr;
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let find = |p: [f64; 2], ph: usize, pn: usize| index.get(&(key(p), ph, pn)).copied();
    let engine = model.engine;
    let rel = |op: RelOperator| real_operator(&op, engine, &b.rel, &b.rel_sel);

    // x_e +- x_h sums of plane waves: e^{ik.X} 2 cos(k.x/2) and e^{ik.X} 2i sin(k.x/2).
    let lattice: Vec<(LatticeWeight, DMatrix<f64>)> = ex
        .weights
        .iter()
        .filter(|w| (w.n1, w.n2) != (0, 0) && w.w != 0.0)
        .map(|w| Ok((*w, real_operator(&RelOperator::cosine(ex.kappa(w.n1, w.n2)), MatrixEngine::Quadrature, &b.rel, &b.rel_sel)?)))
        .collect::<Result<_>>()?;
    let photon_mats: Vec<(DMatrix<f64>, DMatrix<f64>)> = model
        .photons
        .iter()
        .map(|p| Ok((rel(RelOperator::sine(p.q))?, rel(RelOperator::momentum_cosine(p.q, p.pol_angle))?)))
        .collect::<Result<_>>()?;
    let phonon_mats: Vec<DMatrix<f64>> = model.phonons.iter().map(|p| rel(RelOperator::cosine(p.k))).collect::<Result<_>>()?;
    let mut dia_cache: HashMap<[i64; 2], DMatrix<f64>> = HashMap::new();
    let dia_on = model.flags.include_diamagnetic && model.photons.iter().any(|p| p.amplitude != 0.0);
    if dia_on {
        for a in &model.photons {
            for c in &model.photons {
                for v in [[a.q[0] - c.q[0], a.q[1] - c.q[1]], [a.q[0] + c.q[0], a.q[1] + c.q[1]]] {
                    if let std::collections::hash_map::Entry::Vacant(e) = dia_cache.entry(key(v)) {
                        e.insert(rel(RelOperator::cosine(v))?);
                    }
                }
            }
        }
    }

    let m_tot = ex.total_mass;
    let m_e = ex.m_e;
    let zp = if model.flags.include_zero_point {
        0.5 * model.photons.iter().map(|p| p.omega).sum::<f64>() + 0.5 * model.phonons.iter().map(|p| p.omega).sum::<f64>()
    } else {
        0.0
    };
    let dia_const: f64 = if dia_on { model.photons.iter().map(|p| p.amplitude * p.amplitude).sum::<f64>() / m_e } else { 0.0 };
    let i = Complex64::i();

    for (si, s) in states.iter().enumerate() {
        let col = |r: usize| si * nr + r;
        let free_ph: f64 = b.photons.states()[s.ph].iter().map(|&(m, c)| c as f64 * model.photons[m as usize].omega).sum();
        let free_pn: f64 = b.phonons.states()[s.pn].iter().map(|&(m, c)| c as f64 * model.phonons[m as usize].omega).sum();
        let kin = (s.p[0] * s.p[0] + s.p[1] * s.p[1]) / (2.0 * m_tot);
        for r in 0..nr {
            let e = kin + model.relative_energy(b.rel_state(r).n) + free_ph + free_pn + zp + 2.0 * ex.weight(0, 0) + dia_const;
            h[(col(r), col(r))] += e;
        }
        let mut add = |target: Option<usize>, coef: &dyn Fn(usize, usize) -> Complex64| {
            if let Some(t) = target {
                for ri in 0..nr {
                    for ro in 0..nr {
                        h[(t * nr + ro, col(ri))] += coef(ro, ri);
                    }
                }
            }
        };
        for (w, c) in &lattice {
            let kv = ex.kappa(w.n1, w.n2);
            add(find([s.p[0] + kv[0], s.p[1] + kv[1]], s.ph, s.pn), &|ro, ri| Complex64::from(2.0 * w.w * c[(ro, ri)]));
        }
        for (j, mode) in model.photons.iter().enumerate() {
            if mode.amplitude == 0.0 {
                continue;
            }
            let (sin, g) = &photon_mats[j];
            let e = mode.polarization();
            let pe = s.p[0] * e[0] + s.p[1] * e[1];
            let a = mode.amplitude / m_e;
            // (p.e) cos = -i g, with g the real matrix of i (p.e) cos
            if let Some((t, amp)) = b.photons.lower(s.ph, j as u32) {
                let target = find([s.p[0] + mode.q[0], s.p[1] + mode.q[1]], t, s.pn);
                add(target, &|ro, ri| (i * pe * sin[(ro, ri)] - 2.0 * i * g[(ro, ri)]) * (a * amp));
            }
            if let Some((t, amp)) = b.photons.raise(s.ph, j as u32) {
                let target = find([s.p[0] - mode.q[0], s.p[1] - mode.q[1]], t, s.pn);
                add(target, &|ro, ri| (-i * pe * sin[(ro, ri)] - 2.0 * i * g[(ro, ri)]) * (a * amp));
            }
        }
        if dia_on {
            for (j, mj) in model.photons.iter().enumerate() {
                for (jp, mk) in model.photons.iter().enumerate() {
                    let ej = mj.polarization();
                    let ek = mk.polarization();
                    let pre = mj.amplitude * mk.amplitude * (ej[0] * ek[0] + ej[1] * ek[1]) / (2.0 * m_e);
                    if pre == 0.0 {
                        continue;
                    }
                    let sum = key([mj.q[0] + mk.q[0], mj.q[1] + mk.q[1]]);
                    let diff = key([mk.q[0] - mj.q[0], mk.q[1] - mj.q[1]]);
                    let cos_of = |k: [i64; 2]| {
                        dia_cache.get(&k).or_else(|| dia_cache.get(&[-k[0], -k[1]])).expect("cached diamagnetic cosine")
                    };
                    // a_j a_j' e^{i(q+q').X}
                    if let Some((t1, a1)) = b.photons.lower(s.ph, jp as u32) {
                        if let Some((t2, a2)) = b.photons.lower(t1, j as u32) {
                            let c = cos_of(sum);
                            let target = find([s.p[0] + mj.q[0] + mk.q[0], s.p[1] + mj.q[1] + mk.q[1]], t2, s.pn);
                            add(target, &|ro, ri| Complex64::from(pre * a1 * a2 * 2.0 * c[(ro, ri)]));
                        }
                    }
                    // a_j^+ a_j'^+ e^{-i(q+q').X}
                    if let Some((t1, a1)) = b.photons.raise(s.ph, jp as u32) {
                        if let Some((t2, a2)) = b.photons.raise(t1, j as u32) {
                            let c = cos_of(sum);
                            let target = find([s.p[0] - mj.q[0] - mk.q[0], s.p[1] - mj.q[1] - mk.q[1]], t2, s.pn);
                            add(target, &|ro, ri| Complex64::from(pre * a1 * a2 * 2.0 * c[(ro, ri)]));
                        }
                    }
                    // a_j^+ a_j' e^{i(q'-q).X}, twice from the two normal-ordered cross terms
                    if let Some((t1, a1)) = b.photons.lower(s.ph, jp as u32) {
                        if let Some((t2, a2)) = b.photons.raise(t1, j as u32) {
                            let c = cos_of(diff);
                            let target = find([s.p[0] + mk.q[0] - mj.q[0], s.p[1] + mk.q[1] - mj.q[1]], t2, s.pn);
                            add(target, &|ro, ri| Complex64::from(2.0 * pre * a1 * a2 * 2.0 * c[(ro, ri)]));
                        }
                    }
                }
            }
        }
        for (j, mode) in model.phonons.iter().enumerate() {
            if mode.gamma == 0.0 {
                continue;
            }
            let c = &phonon_mats[j];
            if let Some((t, amp)) = b.phonons.lower(s.pn, j as u32) {
                let target = find([s.p[0] + mode.k[0], s.p[1] + mode.k[1]], s.ph, t);
                add(target, &|ro, ri| Complex64::from(2.0 * mode.gamma * amp * c[(ro, ri)]));
            }
            if let Some((t, amp)) = b.phonons.raise(s.pn, j as u32) {
                let target = find([s.p[0] - mode.k[0], s.p[1] - mode.k[1]], s.ph, t);
                add(target, &|ro, ri| Complex64::from(2.0 * mode.gamma * amp * c[(ro, ri)]));
            }
        }
    }
    Ok(h)
}
