//! Independent reference computations and the conformance report.
//!
//! Nothing here reuses the library's matrix-element kernels. Radial
//! functions come from their own Laguerre recurrence, integrals from scaled
//! Gauss-Laguerre and trapezoid rules.

mod equivalence;
mod printed;
mod quad;
mod scan;

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use equivalence::{
    commensurate_equivalence, standard_toys, untransformed, zero_coupling_toy, CommensurateToy, EquivalenceResult,
};
pub use printed::{compare_family, printed_matrix, Family, FamilyComparison, Reading};
pub use quad::{
    angular_identity, evaluate, gamma_identity, quad_radial, quad_radial_scale, quad_relative_matrix, Integrand, Resolution,
    MIN_RESOLUTION,
};
pub use scan::{convergence_scan, Probe, ScanParameter, ScanRow, ScanTable};

use crate::error::Result;
use crate::hydrogen2d::{relative_matrix, RelOperator, RelativeBasis};
use crate::model::MatrixEngine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub checks: Vec<CheckRecord>,
    pub notes: Vec<String>,
}

impl ConformanceReport {
    pub fn push(&mut self, name: impl Into<String>, max_abs_error: f64, tolerance: f64) -> bool {
        let pass = max_abs_error <= tolerance;
        self.checks.push(CheckRecord { name: name.into(), max_abs_error, tolerance, pass });
        pass
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Closed-form `O` and `O'` against quadrature over every pair with `n, n' <= n_max`, `0 <= ell <= ell_max`.
///
/// Errors are relative to `max(1, int |integrand|)`.
pub fn radial_integral_errors(mu: f64, n_max: u32, ell_max: i32) -> Result<(f64, f64)> {
    let basis = RelativeBasis::new(mu, n_max)?;
    let (mut eo, mut ep) = (0.0f64, 0.0f64);
    for ket in 0..basis.len() {
        for bra in 0..basis.len() {
            for ell in 0..=ell_max {
                let exact = quad_radial(&basis, ket, bra, ell, false, 96);
                let scale = quad_radial_scale(&basis, ket, bra, ell, false, 96).max(1.0);
                eo = eo.max((basis.o(ket, bra, ell) - exact).abs() / scale);
                let exact = quad_radial(&basis, ket, bra, ell, true, 96);
                let scale = quad_radial_scale(&basis, ket, bra, ell, true, 96).max(1.0);
                ep = ep.max((basis.oprime(ket, bra, ell) - exact).abs() / scale);
            }
        }
    }
    Ok((eo, ep))
}

/// Largest deviation of the complex-basis Gram matrix from the identity.
pub fn gram_error(mu: f64, n_max: u32) -> Result<f64> {
    let basis = RelativeBasis::new(mu, n_max)?;
    let states = basis.states();
    let mut worst = 0.0f64;
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            let g = if states[a].m == states[b].m {
                2.0 * PI * basis.cnorm(a) * basis.cnorm(b) * quad_radial(&basis, a, b, 1, false, 96)
            } else {
                0.0
            };
            worst = worst.max((g - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(worst)
}

/// Library Taylor engine against quadrature of the same truncated series, for
/// each `|q|` at angles drawn from `seed`.
pub fn taylor_errors(mu: f64, n_max: u32, order: u32, magnitudes: &[f64], seed: u64) -> Result<Vec<(f64, f64)>> {
    let basis = RelativeBasis::new(mu, n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(magnitudes.len());
    for &qn in magnitudes {
        let t: f64 = rng.gen_range(0.0..2.0 * PI);
        let te: f64 = rng.gen_range(0.0..2.0 * PI);
        let q = [qn * t.cos(), qn * t.sin()];
        let mut worst = 0.0f64;
        for op in [RelOperator::cosine(q), RelOperator::sine(q), RelOperator::momentum_cosine(q, te)] {
            let lib = relative_matrix(&op, MatrixEngine::Taylor { order }, &basis)?.values;
            let reference = quad_relative_matrix(&op, &basis, Integrand::Taylor { order }, Resolution::default())?;
            worst = worst.max(max_diff(&lib, &reference));
        }
        out.push((qn, worst));
    }
    Ok(out)
}

/// Library quadrature engine against the oracle on the exact operators.
pub fn quadrature_engine_error(mu: f64, n_max: u32, q: [f64; 2], theta_e: f64) -> Result<f64> {
    let basis = RelativeBasis::new(mu, n_max)?;
    let mut worst = 0.0f64;
    for op in [RelOperator::cosine(q), RelOperator::sine(q), RelOperator::momentum_cosine(q, theta_e), RelOperator::dipole(q)] {
        let lib = relative_matrix(&op, MatrixEngine::Quadrature, &basis)?.values;
        let reference = quad_relative_matrix(&op, &basis, Integrand::ExactOperator, Resolution::default())?;
        worst = worst.max(max_diff(&lib, &reference));
    }
    Ok(worst)
}

/// Runs every conformance check at reduced mass `mu`.
///
/// `include_equivalence` adds the commensurate toys, which take the longest.
pub fn run_conformance(mu: f64, include_equivalence: bool) -> Result<ConformanceReport> {
    let mut report = ConformanceReport::default();

    let (eo, ep) = radial_integral_errors(mu, 6, 4)?;
    report.push("radial O, n <= 6, ell <= 4", eo, 1e-10);
    report.push("radial O', n <= 6, ell <= 4", ep, 1e-10);

    let taylor = taylor_errors(mu, 4, 2, &[0.001, 0.01, 0.053], 7)?;
    for (qn, e) in taylor {
        report.push(format!("taylor engine vs truncated-series quadrature, |q| = {qn}"), e, 1e-8);
    }

    report.push("gram matrix, n <= 6", gram_error(mu, 6)?, 1e-9);

    let basis = RelativeBasis::new(mu, 6)?;
    let id = quad_relative_matrix(&RelOperator::cosine([0.0, 0.0]), &basis, Integrand::ExactOperator, Resolution::default())?;
    report.push("cos at q = 0 is the identity", max_diff(&id, &DMatrix::identity(basis.len(), basis.len())), 1e-12);
    report.push("gamma identity int e^-2s s^3 = 3/8", (gamma_identity(MIN_RESOLUTION) - 0.375).abs(), 1e-14);
    report.push("angular identity int cos^2 = pi", (angular_identity(MIN_RESOLUTION, 0.3) - PI).abs(), 1e-13);

    report.push("quadrature engine vs oracle", quadrature_engine_error(mu, 3, [0.3, -0.2], 0.7)?, 1e-9);

    if include_equivalence {
        for toy in standard_toys().iter().chain(std::iter::once(&zero_coupling_toy())) {
            let r = commensurate_equivalence(toy)?;
            report.push(format!("commensurate equivalence, {} (dim {})", r.toy, r.dim), r.max_deviation, 1e-10);
        }
    }

    let small = RelativeBasis::new(mu, 3)?;
    for family in Family::ALL {
        let c = compare_family(family, &small, [0.02, 0.013], 0.4)?;
        if c.printed_error > 1e-6 {
            report.notes.push(format!(
                "{family:?}: printed form deviates by {:.3e}; best reading ({}) deviates by {:.3e}",
                c.printed_error,
                c.best.describe(),
                c.best_error
            ));
        }
    }
    Ok(report)
}
