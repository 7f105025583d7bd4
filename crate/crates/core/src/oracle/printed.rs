//! Closed-form matrix-element families transcribed literally, for
//! comparison against the quadrature oracle.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::quad::{quad_radial, quad_relative_matrix, quad_shifted, Integrand, Resolution};
use crate::error::Result;
use crate::hydrogen2d::{RelOperator, RelativeBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SineDm1,
    CosineDm0,
    CosineDm2,
    DipoleDm1,
    MomentumDm1,
    MomentumDm3,
    RadialOPrime,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::SineDm1,
        Family::CosineDm0,
        Family::CosineDm2,
        Family::DipoleDm1,
        Family::MomentumDm1,
        Family::MomentumDm3,
        Family::RadialOPrime,
    ];
}

/// How a transcribed formula is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub conjugate_phases: bool,
    pub oprime_times_beta: bool,
}

impl Reading {
    pub const AS_PRINTED: Reading = Reading { conjugate_phases: false, oprime_times_beta: false };

    pub const ALL: [Reading; 4] = [
        Reading::AS_PRINTED,
        Reading { conjugate_phases: true, oprime_times_beta: false },
        Reading { conjugate_phases: false, oprime_times_beta: true },
        Reading { conjugate_phases: true, oprime_times_beta: true },
    ];

    pub fn describe(self) -> &'static str {
        match (self.conjugate_phases, self.oprime_times_beta) {
            (false, false) => "as printed",
            (true, false) => "phases conjugated",
            (false, true) => "O' multiplied by beta_n",
            (true, true) => "phases conjugated and O' multiplied by beta_n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyComparison {
    pub family: Family,
    /// Error of each reading, in `Reading::ALL` order.
    pub errors: Vec<f64>,
    pub printed_error: f64,
    /// Reading with the smallest error.
    pub best: Reading,
    pub best_error: f64,
}

/// `O'` via the printed decomposition, with the Laguerre double sum integrated numerically.
fn oprime_printed(basis: &RelativeBasis, ket: usize, bra: usize, ell: i32, reading: Reading, nodes: usize) -> f64 {
    let s = basis.states()[ket];
    let a = s.m.unsigned_abs() as f64;
    let beta = basis.beta(s.n);
    let lower = if a == 0.0 { 0.0 } else { basis.o(ket, bra, ell - 1) };
    let v = a / beta * lower - 0.5 * basis.o(ket, bra, ell) - quad_shifted(basis, ket, bra, ell, nodes);
    if reading.oprime_times_beta {
        v * beta
    } else {
        v
    }
}

/// Complex-basis matrix of the family's entries, zero elsewhere, and the entry mask.
pub fn printed_matrix(
    family: Family,
    basis: &RelativeBasis,
    q: [f64; 2],
    theta_e: f64,
    reading: Reading,
) -> (DMatrix<Complex64>, DMatrix<bool>) {
    let n = basis.len();
    let states = basis.states();
    let qn = q[0].hypot(q[1]);
    let tq = q[1].atan2(q[0]);
    let ph = |angle: f64| Complex64::from_polar(1.0, if reading.conjugate_phases { -angle } else { angle });
    let nodes = 64;
    let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut mask = DMatrix::from_element(n, n, false);
    for ket in 0..n {
        for bra in 0..n {
            let (sk, sb) = (states[ket], states[bra]);
            let cc = basis.cnorm(ket) * basis.cnorm(bra);
            let m = sk.m as f64;
            let o = |ell: i32| basis.o(ket, bra, ell);
            let op = |ell: i32| oprime_printed(basis, ket, bra, ell, reading, nodes);
            let dm = sb.m - sk.m;
            let val = match family {
                Family::SineDm1 if dm.abs() == 1 => {
                    let s = dm as f64;
                    Some(cc * PI * qn / 2.0 * ph(s * tq) * o(2))
                }
                Family::CosineDm0 if dm == 0 => {
                    let delta = if sk.n == sb.n { 1.0 } else { 0.0 };
                    Some(Complex64::from(delta - cc * PI * qn * qn / 8.0 * o(3)))
                }
                Family::CosineDm2 if dm.abs() == 2 => {
                    let s = (dm / 2) as f64;
                    Some(-cc * PI * qn * qn / 16.0 * ph(-2.0 * s * tq) * o(3))
                }
                Family::DipoleDm1 if dm.abs() == 1 => {
                    let s = dm as f64;
                    Some(cc * PI * ph(s * tq) * o(2))
                }
                Family::MomentumDm1 if dm.abs() == 1 => {
                    let s = dm as f64;
                    let inner = ph(2.0 * s * (tq - theta_e));
                    let lead = Complex64::from(-s * m * o(0) + op(1));
                    let corr = (2.0 - inner) * (-s * m * o(2)) + (2.0 + inner) * op(3);
                    Some(cc * PI * ph(s * theta_e) * (lead - corr * (qn * qn / 32.0)))
                }
                Family::MomentumDm3 if dm.abs() == 3 => {
                    let s = (dm / 3) as f64;
                    Some(cc * PI * qn * qn / 32.0 * ph(s * (theta_e + 2.0 * tq)) * (s * m * o(2) - op(3)))
                }
                _ => None,
            };
            if let Some(v) = val {
                // the momentum families are printed for i (p.e) cos
                let v = if matches!(family, Family::MomentumDm1 | Family::MomentumDm3) { v * Complex64::new(0.0, -1.0) } else { v };
                out[(bra, ket)] = v;
                mask[(bra, ket)] = true;
            }
        }
    }
    (out, mask)
}

fn operator_for(family: Family, q: [f64; 2], theta_e: f64) -> (RelOperator, Integrand) {
    match family {
        Family::SineDm1 => (RelOperator::sine(q), Integrand::Taylor { order: 1 }),
        Family::CosineDm0 | Family::CosineDm2 => (RelOperator::cosine(q), Integrand::Taylor { order: 2 }),
        Family::DipoleDm1 => (RelOperator::dipole(q), Integrand::ExactOperator),
        Family::MomentumDm1 | Family::MomentumDm3 | Family::RadialOPrime => {
            (RelOperator::momentum_cosine(q, theta_e), Integrand::Taylor { order: 2 })
        }
    }
}

/// Errors of every reading of `family` against the oracle.
pub fn compare_family(family: Family, basis: &RelativeBasis, q: [f64; 2], theta_e: f64) -> Result<FamilyComparison> {
    let errors: Vec<f64> = if family == Family::RadialOPrime {
        Reading::ALL
            .iter()
            .map(|&reading| {
                let mut worst = 0.0f64;
                for ket in 0..basis.len() {
                    for bra in 0..basis.len() {
                        for ell in 1..=4 {
                            let exact = quad_radial(basis, ket, bra, ell, true, 64);
                            let printed = oprime_printed(basis, ket, bra, ell, reading, 64);
                            worst = worst.max((exact - printed).abs() / exact.abs().max(1.0));
                        }
                    }
                }
                worst
            })
            .collect()
    } else {
        let (op, mode) = operator_for(family, q, theta_e);
        let oracle = quad_relative_matrix(&op, basis, mode, Resolution::default())?;
        Reading::ALL
            .iter()
            .map(|&reading| {
                let (m, mask) = printed_matrix(family, basis, q, theta_e, reading);
                let mut worst = 0.0f64;
                for (i, &on) in mask.iter().enumerate() {
                    if on {
                        worst = worst.max((m[i] - oracle[i]).norm());
                    }
                }
                worst
            })
            .collect()
    };
    let (bi, &best_error) = errors.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    Ok(FamilyComparison { family, printed_error: errors[0], best: Reading::ALL[bi], best_error, errors })
}
