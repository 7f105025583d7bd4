//! Convergence of probe quantities under truncation refinement.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::quad::{evaluate, Integrand, Resolution};
use crate::basis::composite_dimension;
use crate::error::{Error, Result};
use crate::hamiltonian::Assembler;
use crate::hydrogen2d::{RelOperator, RelativeBasis};
use crate::model::ModelConfig;
use crate::observables::dielectric_t0;
use crate::solve::solve_block;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    RelNMax,
    KappaShell,
    PhononFockCap,
    /// Radial and angular node count of the oracle quadrature.
    QuadratureResolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    GroundEnergy,
    /// Lowest transition at `K = 0` carrying at least a thousandth of the largest dipole weight.
    FirstBrightTransition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub level: u32,
    pub value: f64,
    /// Change from the previous level; for the quadrature scan, the largest elementwise drift.
    pub change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub parameter: ScanParameter,
    pub probe: Probe,
    pub rows: Vec<ScanRow>,
    /// Whether every successive `|change|` is no larger than the one before.
    pub monotone: bool,
}

fn probe_value(model: &ModelConfig, probe: Probe) -> Result<f64> {
    match probe {
        Probe::GroundEnergy => {
            let basis = Arc::new(composite_dimension(&model.truncation, model)?);
            let h = Assembler::new(model, basis)?.block([0.0, 0.0]);
            Ok(solve_block(&h, 1, 1e-10)?.eigenvalues[0])
        }
        Probe::FirstBrightTransition => {
            let t = dielectric_t0(model, &[1.0])?;
            let top = t.transitions.iter().map(|x| x.strength[0][0]).fold(0.0, f64::max);
            t.transitions
                .iter()
                .filter(|x| x.strength[0][0] >= 1e-3 * top && x.delta_e > 0.0)
                .map(|x| x.delta_e)
                .min_by(f64::total_cmp)
                .ok_or_else(|| Error::param("no bright transition found"))
        }
    }
}

/// Probe value per level with successive changes.
pub fn convergence_scan(model: &ModelConfig, parameter: ScanParameter, levels: &[u32], probe: Probe) -> Result<ScanTable> {
    if levels.len() < 3 {
        return Err(Error::param("a convergence scan needs at least three levels"));
    }
    let mut rows: Vec<ScanRow> = Vec::with_capacity(levels.len());
    if parameter == ScanParameter::QuadratureResolution {
        let basis = RelativeBasis::new(model.exciton.reduced_mass, model.truncation.rel_n_max)?;
        let op = RelOperator::cosine(model.exciton.b1);
        let mut prev: Option<nalgebra::DMatrix<num_complex::Complex64>> = None;
        for &level in levels {
            let n = level as usize;
            let m = evaluate(&op, &basis, Integrand::ExactOperator, Resolution { radial: n, angular: n });
            let change = prev.as_ref().map(|p| (&m - p).iter().map(|z| z.norm()).fold(0.0, f64::max));
            rows.push(ScanRow { level, value: m[(0, 0)].re, change });
            prev = Some(m);
        }
    } else {
        for &level in levels {
            let mut m = model.clone();
            match parameter {
                ScanParameter::RelNMax => m.truncation.rel_n_max = level,
                ScanParameter::KappaShell => m.truncation.kappa_shell = level,
                ScanParameter::PhononFockCap => m.truncation.phonon_fock_cap = level,
                ScanParameter::QuadratureResolution => unreachable!(),
            }
            let value = probe_value(&m, probe)?;
            let change = rows.last().map(|r| value - r.value);
            rows.push(ScanRow { level, value, change });
        }
    }
    let changes: Vec<f64> = rows.iter().filter_map(|r| r.change.map(f64::abs)).collect();
    let monotone = changes.windows(2).all(|w| w[1] <= w[0]);
    Ok(ScanTable { parameter, probe, rows, monotone })
}
