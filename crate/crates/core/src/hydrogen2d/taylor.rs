//! Closed-form matrix elements of Taylor-truncated operators.
//!
//! Every operator is expanded into terms `c r^a e^{ik theta} D` with `D` one
//! of `1`, `d/dr` or `(1/r) d/dtheta`. The angular integral of each term is a
//! Kronecker delta and the radial one an `O` or `O'` integral.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{OpKind, RelOperator, RelativeBasis};
use crate::special::{binomial, ln_factorial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Deriv {
    None,
    Radial,
    /// `(1/r) d/dtheta`
    Angular,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub coef: Complex64,
    pub power: i32,
    pub harmonic: i32,
    pub deriv: Deriv,
}

/// `cos^j(theta - phi)` as a sum of harmonics.
fn cos_power(j: u32, phi: f64) -> Vec<(i32, Complex64)> {
    let scale = 0.5f64.powi(j as i32);
    (0..=j)
        .map(|t| {
            let k = j as i32 - 2 * t as i32;
            (k, Complex64::from_polar(scale * binomial(j, t), -(k as f64) * phi))
        })
        .collect()
}

/// Truncated series of `cos(q.x/2)` (`odd = false`) or `sin(q.x/2)`.
fn trig_series(q: [f64; 2], order: u32, odd: bool) -> Vec<Term> {
    let qn = q[0].hypot(q[1]);
    let theta_q = q[1].atan2(q[0]);
    let mut out = Vec::new();
    let start = if odd { 1 } else { 0 };
    for j in (start..=order).step_by(2) {
        let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if qn == 0.0 && j > 0 {
            continue;
        }
        let radial = sign * (j as f64 * (0.5 * qn).ln() - ln_factorial(j)).exp();
        let radial = if j == 0 { sign } else { radial };
        for (k, c) in cos_power(j, theta_q) {
            out.push(Term { coef: c * radial, power: j as i32, harmonic: k, deriv: Deriv::None });
        }
    }
    out
}

/// `(p.e) = -i [cos(theta - theta_e) d/dr - sin(theta - theta_e) (1/r) d/dtheta]`.
fn momentum(theta_e: f64) -> Vec<Term> {
    let i = Complex64::i();
    let up = Complex64::from_polar(0.5, -theta_e);
    let down = Complex64::from_polar(0.5, theta_e);
    vec![
        Term { coef: -i * up, power: 0, harmonic: 1, deriv: Deriv::Radial },
        Term { coef: -i * down, power: 0, harmonic: -1, deriv: Deriv::Radial },
        // -sin(x) = (-e^{ix} + e^{-ix}) / (2i)
        Term { coef: -i * (-up / i), power: 0, harmonic: 1, deriv: Deriv::Angular },
        Term { coef: -i * (down / i), power: 0, harmonic: -1, deriv: Deriv::Angular },
    ]
}

fn multiply(a: &[Term], b: &[Term]) -> Vec<Term> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            debug_assert!(x.deriv == Deriv::None);
            out.push(Term { coef: x.coef * y.coef, power: x.power + y.power, harmonic: x.harmonic + y.harmonic, deriv: y.deriv });
        }
    }
    out
}

fn merge(terms: Vec<Term>) -> Vec<Term> {
    let mut acc: BTreeMap<(i32, i32, Deriv), Complex64> = BTreeMap::new();
    for t in terms {
        *acc.entry((t.power, t.harmonic, t.deriv)).or_default() += t.coef;
    }
    acc.into_iter()
        .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
        .map(|((power, harmonic, deriv), coef)| Term { coef, power, harmonic, deriv })
        .collect()
}

pub(crate) fn expansion(op: &RelOperator, order: u32) -> Vec<Term> {
    let terms = match op.kind {
        OpKind::Cosine => trig_series(op.q, order, false),
        OpKind::Sine => trig_series(op.q, order, true),
        OpKind::MomentumCosine => multiply(&trig_series(op.q, order, false), &momentum(op.theta_eps)),
        OpKind::Dipole => {
            let theta_v = op.q[1].atan2(op.q[0]);
            cos_power(1, theta_v)
                .into_iter()
                .map(|(k, c)| Term { coef: c, power: 1, harmonic: k, deriv: Deriv::None })
                .collect()
        }
    };
    merge(terms)
}

/// `cos(q.x/2)` truncated at `order`, as `sum qx^a qy^b T_ab`; returns `((a, b), T_ab)`.
pub(crate) fn cosine_monomials(order: u32) -> Vec<((u32, u32), Vec<Term>)> {
    let i = Complex64::i();
    let mut out = Vec::new();
    for j in (0..=order).step_by(2) {
        let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let scale = sign * (-(j as f64) * 2f64.ln() - ln_factorial(j)).exp();
        for a in 0..=j {
            let b = j - a;
            // x^a y^b = r^j cos^a sin^b, with sin = (e^{i theta} - e^{-i theta}) / 2i
            let mut terms = Vec::new();
            for s in 0..=a {
                for u in 0..=b {
                    let k = (a as i32 - 2 * s as i32) + (b as i32 - 2 * u as i32);
                    let parity = if u % 2 == 0 { 1.0 } else { -1.0 };
                    let c = scale * binomial(j, a) * binomial(a, s) * binomial(b, u) * parity * 0.5f64.powi(j as i32);
                    let coef = Complex64::new(c, 0.0) / i.powi(b as i32);
                    terms.push(Term { coef, power: j as i32, harmonic: k, deriv: Deriv::None });
                }
            }
            out.push(((a, b), merge(terms)));
        }
    }
    out
}

pub(crate) fn complex_matrix(terms: &[Term], basis: &RelativeBasis) -> DMatrix<Complex64> {
    let n = basis.len();
    let states = basis.states();
    DMatrix::from_fn(n, n, |bra, ket| {
        let (sb, sk) = (states[bra], states[ket]);
        let mut acc = Complex64::new(0.0, 0.0);
        for t in terms.iter().filter(|t| sk.m + t.harmonic == sb.m) {
            let radial = match t.deriv {
                Deriv::None => Complex64::from(basis.o(ket, bra, t.power + 1)),
                Deriv::Radial => Complex64::from(basis.oprime(ket, bra, t.power + 1)),
                Deriv::Angular if sk.m == 0 => continue,
                Deriv::Angular => Complex64::new(0.0, sk.m as f64 * basis.o(ket, bra, t.power)),
            };
            acc += t.coef * radial;
        }
        acc * (2.0 * PI * basis.cnorm(bra) * basis.cnorm(ket))
    })
}
