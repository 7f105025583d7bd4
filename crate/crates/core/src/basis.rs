//! Composite index space `kappa x phonon x relative x photon`.
//!
//! Flat index `((kappa * N_phonon + phonon) * N_rel + rel) * N_photon + photon`,
//! so every `(kappa, phonon)` fiber is a contiguous block of `N_rel * N_photon`
//! amplitudes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrogen2d::{RelParity, RelState, RelativeBasis};
use crate::model::ModelConfig;

pub const DEFAULT_DIMENSION_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSpec {
    pub kappa_shell: u32,
    pub rel_n_max: u32,
    pub rel_parity: RelParity,
    /// Keep only the first this-many real relative states.
    pub rel_max_states: Option<usize>,
    /// Bound on the total photon number.
    pub photon_excitation_cap: u32,
    /// Bound on each phonon occupation (exclusive).
    pub phonon_fock_cap: u32,
    pub dimension_cap: usize,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec {
            kappa_shell: 1,
            rel_n_max: 3,
            rel_parity: RelParity::Both,
            rel_max_states: None,
            photon_excitation_cap: 1,
            phonon_fock_cap: 1,
            dimension_cap: DEFAULT_DIMENSION_CAP,
        }
    }
}

impl TruncationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.phonon_fock_cap == 0 {
            return Err(Error::param("phonon_fock_cap must be at least 1 (it counts Fock states per mode)"));
        }
        if self.rel_max_states == Some(0) {
            return Err(Error::param("rel_max_states must be positive"));
        }
        if self.kappa_shell > 50 {
            return Err(Error::param("kappa_shell above 50 is not supported"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub n1: i32,
    pub n2: i32,
    pub vec: [f64; 2],
}

/// `(2 shell + 1)^2` reciprocal vectors, `n1` outer and `n2` inner, both ascending.
pub fn enumerate_kappa(b1: [f64; 2], b2: [f64; 2], shell: u32) -> Vec<Kappa> {
    let s = shell as i32;
    let mut out = Vec::with_capacity(((2 * s + 1) * (2 * s + 1)) as usize);
    for n1 in -s..=s {
        for n2 in -s..=s {
            let vec = [n1 as f64 * b1[0] + n2 as f64 * b2[0], n1 as f64 * b1[1] + n2 as f64 * b2[1]];
            out.push(Kappa { n1, n2, vec });
        }
    }
    out
}

/// Sparse occupation: `(mode, count)` pairs sorted by mode, zero counts omitted.
pub type Occupation = Vec<(u32, u32)>;

fn checked_binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of occupations of `n_modes` modes with total at most `cap`.
pub fn photon_state_count(n_modes: usize, cap: u32) -> Option<u128> {
    if n_modes == 0 {
        return Some(1);
    }
    let mut total: u128 = 0;
    for t in 0..=cap as u128 {
        total = total.checked_add(checked_binomial(n_modes as u128 + t - 1, t)?)?;
    }
    Some(total)
}

/// All occupations with total `<= cap`: vacuum first, then by total, and
/// within a total by the ascending sorted list of occupied mode indices.
pub fn enumerate_photon_states(n_modes: usize, cap: u32, limit: usize) -> Result<Vec<Occupation>> {
    let count = photon_state_count(n_modes, cap).unwrap_or(u128::MAX);
    if count > limit as u128 {
        return Err(Error::Dimension {
            dim: count,
            cap: limit,
            advice: format!("{n_modes} photon modes with excitation cap {cap}; lower the cap or the mode count"),
        });
    }
    let mut out = vec![Vec::new()];
    if n_modes == 0 {
        return Ok(out);
    }
    for total in 1..=cap as usize {
        let mut seq = vec![0u32; total];
        loop {
            out.push(compress(&seq));
            let last = n_modes as u32 - 1;
            match (0..total).rev().find(|&i| seq[i] < last) {
                None => break,
                Some(i) => {
                    let v = seq[i] + 1;
                    seq[i..].iter_mut().for_each(|s| *s = v);
                }
            }
        }
    }
    Ok(out)
}

fn compress(seq: &[u32]) -> Occupation {
    let mut occ: Occupation = Vec::new();
    for &m in seq {
        match occ.last_mut() {
            Some((mode, c)) if *mode == m => *c += 1,
            _ => occ.push((m, 1)),
        }
    }
    occ
}

/// Occupation space with ladder-operator lookups.
#[derive(Debug, Clone)]
pub struct FockSpace {
    n_modes: usize,
    states: Vec<Occupation>,
    lookup: HashMap<Occupation, usize>,
}

impl FockSpace {
    pub fn new(n_modes: usize, states: Vec<Occupation>) -> Self {
        let lookup = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        FockSpace { n_modes, states, lookup }
    }

    /// Photon space truncated by total number.
    pub fn photons(n_modes: usize, cap: u32, limit: usize) -> Result<Self> {
        Ok(Self::new(n_modes, enumerate_photon_states(n_modes, cap, limit)?))
    }

    /// Phonon space truncated per mode: occupations `0..cap`, first mode slowest.
    pub fn phonons(n_modes: usize, cap: u32, limit: usize) -> Result<Self> {
        let count = (cap as u128).checked_pow(n_modes as u32).unwrap_or(u128::MAX);
        if count > limit as u128 {
            return Err(Error::Dimension {
                dim: count,
                cap: limit,
                advice: format!("{n_modes} phonon modes with {cap} Fock states each; lower phonon_fock_cap"),
            });
        }
        let mut states = Vec::with_capacity(count as usize);
        let mut digits = vec![0u32; n_modes];
        for _ in 0..count {
            states.push(digits.iter().enumerate().filter(|(_, &c)| c > 0).map(|(m, &c)| (m as u32, c)).collect());
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < cap {
                    break;
                }
                *d = 0;
            }
        }
        Ok(Self::new(n_modes, states))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn index_of(&self, occ: &Occupation) -> Option<usize> {
        self.lookup.get(occ).copied()
    }

    pub fn count(&self, state: usize, mode: u32) -> u32 {
        self.states[state].iter().find(|(m, _)| *m == mode).map_or(0, |&(_, c)| c)
    }

    pub fn total(&self, state: usize) -> u32 {
        self.states[state].iter().map(|&(_, c)| c).sum()
    }

    /// `a_mode |state>` as `(target, sqrt(n))`, if nonzero and inside the space.
    pub fn lower(&self, state: usize, mode: u32) -> Option<(usize, f64)> {
        let occ = &self.states[state];
        let pos = occ.iter().position(|(m, _)| *m == mode)?;
        let n = occ[pos].1;
        let mut next = occ.clone();
        if n == 1 {
            next.remove(pos);
        } else {
            next[pos].1 -= 1;
        }
        self.index_of(&next).map(|t| (t, (n as f64).sqrt()))
    }

    /// `a_mode^dagger |state>` as `(target, sqrt(n+1))`, if inside the space.
    pub fn raise(&self, state: usize, mode: u32) -> Option<(usize, f64)> {
        let occ = &self.states[state];
        let mut next = occ.clone();
        let n = match occ.binary_search_by_key(&mode, |&(m, _)| m) {
            Ok(pos) => {
                next[pos].1 += 1;
                occ[pos].1
            }
            Err(pos) => {
                next.insert(pos, (mode, 1));
                0
            }
        };
        self.index_of(&next).map(|t| (t, (n as f64 + 1.0).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompositeIndex {
    pub kappa: usize,
    pub phonon: usize,
    pub rel: usize,
    pub photon: usize,
}

#[derive(Debug, Clone)]
pub struct CompositeBasis {
    pub kappas: Vec<Kappa>,
    pub rel: RelativeBasis,
    /// Indices into `rel` of the kept real states.
    pub rel_sel: Vec<usize>,
    pub photons: FockSpace,
    pub phonons: FockSpace,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub n_kappa: usize,
    pub n_rel: usize,
    pub n_photon_states: usize,
    pub n_phonon_states: usize,
    pub dim: usize,
    pub ordering: String,
    pub rel_states: Vec<RelState>,
}

impl CompositeBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rel(&self) -> usize {
        self.rel_sel.len()
    }

    pub fn n_fibers(&self) -> usize {
        self.kappas.len() * self.phonons.len()
    }

    /// Size of one `(kappa, phonon)` fiber.
    pub fn internal_dim(&self) -> usize {
        self.rel_sel.len() * self.photons.len()
    }

    pub fn fiber(&self, kappa: usize, phonon: usize) -> usize {
        kappa * self.phonons.len() + phonon
    }

    pub fn flat_index(&self, idx: CompositeIndex) -> usize {
        ((idx.kappa * self.phonons.len() + idx.phonon) * self.rel_sel.len() + idx.rel) * self.photons.len() + idx.photon
    }

    pub fn unflatten(&self, i: usize) -> CompositeIndex {
        let np = self.photons.len();
        let nr = self.rel_sel.len();
        let nb = self.phonons.len();
        let photon = i % np;
        let rest = i / np;
        let rel = rest % nr;
        let rest = rest / nr;
        CompositeIndex { kappa: rest / nb, phonon: rest % nb, rel, photon }
    }

    /// Real-basis label of the `r`-th kept relative state.
    pub fn rel_state(&self, r: usize) -> RelState {
        self.rel.states()[self.rel_sel[r]]
    }

    pub fn summary(&self) -> BasisSummary {
        BasisSummary {
            n_kappa: self.kappas.len(),
            n_rel: self.n_rel(),
            n_photon_states: self.photons.len(),
            n_phonon_states: self.phonons.len(),
            dim: self.dim,
            ordering: "((kappa*N_phonon + phonon)*N_rel + rel)*N_photon + photon".into(),
            rel_states: (0..self.n_rel()).map(|r| self.rel_state(r)).collect(),
        }
    }
}

/// Dimension of the truncated space without enumerating it.
pub fn estimate_dimension(spec: &TruncationSpec, model: &ModelConfig) -> Result<u128> {
    let nk = (2 * spec.kappa_shell as u128 + 1).pow(2);
    let rel = RelativeBasis::new(model.exciton.reduced_mass, spec.rel_n_max)?;
    let nr = rel.select(spec.rel_parity, spec.rel_max_states).len() as u128;
    let nph = photon_state_count(model.photons.len(), spec.photon_excitation_cap).unwrap_or(u128::MAX);
    let npn = if model.phonons.is_empty() {
        1
    } else {
        (spec.phonon_fock_cap as u128).checked_pow(model.phonons.len() as u32).unwrap_or(u128::MAX)
    };
    Ok(nk.saturating_mul(nr).saturating_mul(nph).saturating_mul(npn))
}

/// Enumerates the composite space for `spec` and `model`.
pub fn composite_dimension(spec: &TruncationSpec, model: &ModelConfig) -> Result<CompositeBasis> {
    spec.validate()?;
    let dim = estimate_dimension(spec, model)?;
    if dim == 0 {
        return Err(Error::param("truncation leaves an empty space (check rel_parity and rel_max_states)"));
    }
    if dim > spec.dimension_cap as u128 {
        return Err(Error::Dimension {
            dim,
            cap: spec.dimension_cap,
            advice: "reduce kappa_shell, rel_n_max, rel_max_states, the photon mode count or phonon_fock_cap".into(),
        });
    }
    let kappas = enumerate_kappa(model.exciton.b1, model.exciton.b2, spec.kappa_shell);
    let rel = RelativeBasis::new(model.exciton.reduced_mass, spec.rel_n_max)?;
    let rel_sel = rel.select(spec.rel_parity, spec.rel_max_states);
    let photons = FockSpace::photons(model.photons.len(), spec.photon_excitation_cap, spec.dimension_cap)?;
    let phonons = if model.phonons.is_empty() {
        FockSpace::new(0, vec![Vec::new()])
    } else {
        FockSpace::phonons(model.phonons.len(), spec.phonon_fock_cap, spec.dimension_cap)?
    };
    let dim = kappas.len() * rel_sel.len() * photons.len() * phonons.len();
    Ok(CompositeBasis { kappas, rel, rel_sel, photons, phonons, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExcitonParams, PhononMode, PhotonMode};

    fn model_with(n_photon: usize, n_phonon: usize) -> ModelConfig {
        let ex = ExcitonParams::square_lattice(0.3, 9.0, 0.05).unwrap();
        let mut m = ModelConfig::matter_only(ex, TruncationSpec::default());
        m.photons = (0..n_photon).map(|i| PhotonMode::te([1e-3 * i as f64, 0.0], 0.15, 1e-3)).collect();
        m.phonons = (0..n_phonon).map(|_| PhononMode { k: [0.05, 0.0], omega: 2e-3, gamma: 1e-5 }).collect();
        m
    }

    #[test]
    fn kappa_counts() {
        assert_eq!(enumerate_kappa([1.0, 0.0], [0.0, 1.0], 0).len(), 1);
        assert_eq!(enumerate_kappa([1.0, 0.0], [0.0, 1.0], 1).len(), 9);
        assert_eq!(enumerate_kappa([1.0, 0.0], [0.0, 1.0], 2).len(), 25);
        let k = enumerate_kappa([1.0, 0.0], [0.0, 2.0], 1);
        assert_eq!((k[4].n1, k[4].n2), (0, 0));
        assert_eq!(k[5].vec, [0.0, 2.0]);
    }

    #[test]
    fn photon_counts() {
        assert_eq!(enumerate_photon_states(256, 1, usize::MAX).unwrap().len(), 257);
        assert_eq!(enumerate_photon_states(7, 0, usize::MAX).unwrap(), vec![Vec::<(u32, u32)>::new()]);
        let s = enumerate_photon_states(2, 2, usize::MAX).unwrap();
        let expect: Vec<Occupation> =
            vec![vec![], vec![(0, 1)], vec![(1, 1)], vec![(0, 2)], vec![(0, 1), (1, 1)], vec![(1, 2)]];
        assert_eq!(s, expect);
        for (n, cap) in [(5, 3), (1, 4), (9, 2)] {
            let states = enumerate_photon_states(n, cap, usize::MAX).unwrap();
            assert_eq!(states.len() as u128, photon_state_count(n, cap).unwrap());
        }
        assert!(matches!(enumerate_photon_states(1000, 6, 5_000_000), Err(Error::Dimension { .. })));
        assert!(photon_state_count(usize::MAX / 2, 40).is_none() || enumerate_photon_states(usize::MAX / 2, 40, 10).is_err());
    }

    #[test]
    fn ladder_operators() {
        let f = FockSpace::photons(3, 2, usize::MAX).unwrap();
        let vac = 0;
        let (one, amp) = f.raise(vac, 1).unwrap();
        assert_eq!(f.states()[one], vec![(1, 1)]);
        assert_eq!(amp, 1.0);
        let (two, amp) = f.raise(one, 1).unwrap();
        assert_eq!(f.states()[two], vec![(1, 2)]);
        assert_eq!(amp, 2f64.sqrt());
        assert!(f.raise(two, 0).is_none());
        assert_eq!(f.lower(two, 1), Some((one, 2f64.sqrt())));
        assert_eq!(f.lower(one, 0), None);
        let p = FockSpace::phonons(2, 3, usize::MAX).unwrap();
        assert_eq!(p.len(), 9);
        assert_eq!(p.states()[1], vec![(1, 1)]);
        assert_eq!(p.states()[3], vec![(0, 1)]);
        assert!(p.raise(2, 1).is_none());
    }

    #[test]
    fn dimensions() {
        let mut spec = TruncationSpec { kappa_shell: 1, rel_n_max: 3, rel_max_states: Some(10), ..Default::default() };
        spec.phonon_fock_cap = 16;
        let m = model_with(256, 1);
        assert_eq!(estimate_dimension(&spec, &m).unwrap(), 370_080);
        let m0 = model_with(0, 0);
        let b = composite_dimension(&spec, &m0).unwrap();
        assert_eq!(b.dim(), 90);
        let tiny = TruncationSpec { kappa_shell: 0, rel_n_max: 0, ..Default::default() };
        assert_eq!(composite_dimension(&tiny, &m0).unwrap().dim(), 1);
        let huge = TruncationSpec { kappa_shell: 5, rel_n_max: 10, photon_excitation_cap: 2, ..Default::default() };
        let err = composite_dimension(&huge, &model_with(256, 0)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        let empty = TruncationSpec { rel_n_max: 0, rel_parity: RelParity::Odd, ..Default::default() };
        assert!(composite_dimension(&empty, &m0).is_err());
    }

    #[test]
    fn exhaustive_round_trip() {
        let spec = TruncationSpec { kappa_shell: 1, rel_n_max: 2, photon_excitation_cap: 2, phonon_fock_cap: 3, ..Default::default() };
        let b = composite_dimension(&spec, &model_with(4, 2)).unwrap();
        assert_eq!(b.dim(), 9 * 9 * 15 * 9);
        for i in 0..b.dim() {
            assert_eq!(b.flat_index(b.unflatten(i)), i);
        }
    }

    proptest::proptest! {
        #[test]
        fn sampled_round_trip(i in 0usize..370_080) {
            let spec = TruncationSpec { kappa_shell: 1, rel_n_max: 3, rel_max_states: Some(10), phonon_fock_cap: 16, ..Default::default() };
            let m = model_with(256, 1);
            let b = composite_dimension(&spec, &m).unwrap();
            proptest::prop_assert_eq!(b.flat_index(b.unflatten(i)), i);
        }
    }
}
