//! Band structures, group velocities and the dielectric response.

mod csv;
mod dielectric;
#[cfg(test)]
mod tests;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{composite_dimension, TruncationSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::Assembler;
use crate::model::ModelConfig;
use crate::solve::{solve_block, Characters, SolverMeta};

pub use csv::{write_header, Header};
pub use dielectric::{
    dielectric_from_transitions, dielectric_t0, dielectric_t0_with, lift_relative, polarizability, DensityForm,
    DielectricMethod, DielectricOptions, DielectricTable, Eigenstates, PolarizabilityTable, Transition,
};

/// Piecewise-linear path through vertices given in fractions of `b1, b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub vertices: Vec<PathVertex>,
    pub points_per_segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathVertex {
    pub label: String,
    pub frac: [f64; 2],
}

impl Default for PathSpec {
    /// `Gamma -> X -> M -> Gamma`, 64 points per segment.
    fn default() -> Self {
        let v = |label: &str, frac: [f64; 2]| PathVertex { label: label.into(), frac };
        PathSpec {
            vertices: vec![v("G", [0.0, 0.0]), v("X", [0.5, 0.0]), v("M", [0.5, 0.5]), v("G", [0.0, 0.0])],
            points_per_segment: 64,
        }
    }
}

impl PathSpec {
    /// `(s, K)` samples; `s` is the arc length in inverse bohr.
    pub fn sample(&self, b1: [f64; 2], b2: [f64; 2]) -> Result<Vec<(f64, [f64; 2])>> {
        if self.vertices.len() < 2 || self.points_per_segment == 0 {
            return Err(Error::param("a path needs at least two vertices and one point per segment"));
        }
        for v in &self.vertices {
            if v.frac.iter().any(|f| !f.is_finite() || f.abs() > 0.5 + 1e-12) {
                return Err(Error::param(format!("path vertex {} lies outside the first Brillouin zone", v.label)));
            }
        }
        let cart = |f: [f64; 2]| [f[0] * b1[0] + f[1] * b2[0], f[0] * b1[1] + f[1] * b2[1]];
        let mut out = Vec::new();
        let mut s = 0.0;
        for w in self.vertices.windows(2) {
            let (a, b) = (cart(w[0].frac), cart(w[1].frac));
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            if len == 0.0 {
                return Err(Error::param(format!("repeated path vertex {}", w[1].label)));
            }
            let n = self.points_per_segment;
            for i in 0..n {
                let t = i as f64 / n as f64;
                out.push((s + t * len, [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]));
            }
            s += len;
        }
        out.push((s, cart(self.vertices.last().unwrap().frac)));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub s: f64,
    pub k: [f64; 2],
    pub energies: Vec<f64>,
    pub characters: Vec<Characters>,
    pub meta: SolverMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTable {
    pub nbands: usize,
    pub points: Vec<BandPoint>,
}

/// Lowest `nbands` levels along `path`.
pub fn band_structure(model: &ModelConfig, spec: &TruncationSpec, path: &PathSpec, nbands: usize) -> Result<BandTable> {
    let mut model = model.clone();
    model.truncation = spec.clone();
    let basis = Arc::new(composite_dimension(spec, &model)?);
    let asm = Assembler::new(&model, basis)?;
    let samples = path.sample(model.exciton.b1, model.exciton.b2)?;
    band_structure_at(&asm, &samples, nbands, 1e-10)
}

/// Lowest `nbands` levels at the given `(s, K)` samples, in sample order.
pub fn band_structure_at(asm: &Assembler, samples: &[(f64, [f64; 2])], nbands: usize, tol: f64) -> Result<BandTable> {
    if nbands == 0 {
        return Err(Error::param("nbands must be at least 1"));
    }
    let points = samples
        .par_iter()
        .map(|&(s, k)| {
            let mut r = solve_block(&asm.block(k), nbands, tol).map_err(|e| e.at_k(k))?;
            r.truncate(nbands);
            Ok(BandPoint { s, k, energies: r.eigenvalues, characters: r.characters, meta: r.meta })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandTable { nbands, points })
}

impl BandTable {
    /// Energies of band `b` along the path.
    pub fn band(&self, b: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.energies[b]).collect()
    }

    pub fn path_parameter(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.s).collect()
    }

    /// CSV body with the band columns; callers add the header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,Kx,Ky,band_index,energy_au,photon_character,mean_principal_n,phonon_number")?;
        for p in &self.points {
            for (b, (e, c)) in p.energies.iter().zip(&p.characters).enumerate() {
                writeln!(
                    w,
                    "{:.12e},{:.12e},{:.12e},{},{:.15e},{:.12e},{:.12e},{:.12e}",
                    p.s, p.k[0], p.k[1], b, e, c.photon_number, c.mean_principal_n, c.phonon_number
                )?;
            }
        }
        Ok(())
    }
}

/// `dE/ds` per point and band: central differences inside, one-sided at the ends.
pub fn group_velocity(table: &BandTable) -> Result<Vec<Vec<f64>>> {
    let n = table.points.len();
    if n < 3 {
        return Err(Error::param(format!("group velocity needs at least 3 path points, got {n}")));
    }
    let s = table.path_parameter();
    let nb = table.points.iter().map(|p| p.energies.len()).min().unwrap_or(0);
    let e = |i: usize, b: usize| table.points[i].energies[b];
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (0..nb).map(|b| (e(hi, b) - e(lo, b)) / (s[hi] - s[lo])).collect()
        })
        .collect())
}
