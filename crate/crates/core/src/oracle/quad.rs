//! Brute-force 2D quadrature in the complex `(n, m)` basis.
//!
//! The radial integral of every pair `(n, n')` uses a Gauss-Laguerre rule
//! scaled to the pair's common exponential `e^{-(beta_n + beta_n') r / 2}`, so
//! polynomial integrands are integrated exactly. Angles use the trapezoid rule.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrogen2d::{OpKind, RelOperator, RelativeBasis};
use crate::special::{gauss_laguerre, laguerre};

pub const MIN_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub radial: usize,
    pub angular: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { radial: MIN_RESOLUTION, angular: MIN_RESOLUTION }
    }
}

impl Resolution {
    pub fn doubled(self) -> Self {
        Resolution { radial: 2 * self.radial, angular: 2 * self.angular }
    }
}

/// What gets integrated for the `q`-dependent kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrand {
    /// `cos` and `sin` replaced by their Maclaurin series through `z^order`.
    Taylor { order: u32 },
    ExactOperator,
}

/// Scaled Gauss-Laguerre rule: `int_0^inf e^{-s r} f(r) dr ~ sum w_i f(r_i)`.
pub(crate) struct Laguerre {
    nodes: Vec<f64>,
    ln_w: Vec<f64>,
}

impl Laguerre {
    /// The `n`-point rule, built once per process.
    pub(crate) fn new(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Laguerre>>>> = OnceLock::new();
        let mut cache = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(n)
            .or_insert_with(|| {
                let (nodes, ln_w) = gauss_laguerre(n);
                Arc::new(Laguerre { nodes, ln_w })
            })
            .clone()
    }

    pub(crate) fn scaled(&self, s: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().zip(&self.ln_w).map(move |(&x, &lw)| (x / s, lw.exp() / s)).filter(|&(_, w)| w > 0.0)
    }
}

/// `R / e^{-beta r/2}` and `R' / e^{-beta r/2}`, from the Laguerre recurrence.
pub(crate) fn radial_poly(basis: &RelativeBasis, idx: usize, r: f64) -> (f64, f64) {
    let s = basis.states()[idx];
    let beta = basis.beta(s.n);
    let a = s.m.unsigned_abs();
    let k = s.n - a;
    let x = beta * r;
    let l = laguerre(2.0 * a as f64, k, x);
    let dl = if k == 0 { 0.0 } else { -laguerre(2.0 * a as f64 + 1.0, k - 1, x) };
    let pow = x.powi(a as i32);
    let dpow = if a == 0 { 0.0 } else { a as f64 * x.powi(a as i32 - 1) };
    let p = pow * l;
    let dp = beta * (dpow * l + pow * dl);
    (p, dp - 0.5 * beta * p)
}

/// `f(z) = cos z` or `sin z`, optionally as a truncated series.
fn trig(z: f64, odd: bool, mode: Integrand) -> f64 {
    match mode {
        Integrand::ExactOperator => {
            if odd {
                z.sin()
            } else {
                z.cos()
            }
        }
        Integrand::Taylor { order } => {
            let mut term = if odd { z } else { 1.0 };
            let mut j = u32::from(odd);
            let mut acc = 0.0;
            while j <= order {
                acc += term;
                term *= -z * z / (((j + 1) * (j + 2)) as f64);
                j += 2;
            }
            acc
        }
    }
}

/// Matrix of `op` in the complex basis, refined until two resolutions agree.
pub fn quad_relative_matrix(op: &RelOperator, basis: &RelativeBasis, mode: Integrand, res: Resolution) -> Result<DMatrix<Complex64>> {
    if res.radial < MIN_RESOLUTION || res.angular < MIN_RESOLUTION {
        return Err(Error::param(format!("quadrature resolution must be at least {MIN_RESOLUTION} in each direction")));
    }
    let mut prev = evaluate(op, basis, mode, res);
    let mut res = res;
    let mut change = f64::INFINITY;
    for _ in 0..2 {
        res = res.doubled();
        let next = evaluate(op, basis, mode, res);
        let scale = next.iter().map(|z| z.norm()).fold(1.0, f64::max);
        change = (&next - &prev).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;
        if change < 1e-10 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature { residual: change, tolerance: 1e-10, context: format!("oracle {:?} at q = {:?}", op.kind, op.q) })
}

/// One evaluation at fixed resolution.
pub fn evaluate(op: &RelOperator, basis: &RelativeBasis, mode: Integrand, res: Resolution) -> DMatrix<Complex64> {
    let n = basis.len();
    let states = basis.states();
    let rule = Laguerre::new(res.radial);
    let m_top = basis.n_max() as i32;
    let nd = (4 * m_top + 1) as usize;
    let thetas: Vec<f64> = (0..res.angular).map(|j| 2.0 * PI * j as f64 / res.angular as f64).collect();
    let wt = 2.0 * PI / res.angular as f64;
    let phases: Vec<Vec<Complex64>> = thetas
        .iter()
        .map(|&t| (0..nd).map(|d| Complex64::from_polar(1.0, (d as i32 - 2 * m_top) as f64 * t)).collect())
        .collect();
    let trig_t: Vec<(f64, f64)> = thetas.iter().map(|t| (t.cos(), t.sin())).collect();
    let q = op.q;
    let (te_c, te_s) = (op.theta_eps.cos(), op.theta_eps.sin());
    let axis = {
        let l = q[0].hypot(q[1]);
        if l > 0.0 {
            [q[0] / l, q[1] / l]
        } else {
            [1.0, 0.0]
        }
    };
    let kernel = |r: f64, ct: f64, st: f64| {
        let (x, y) = (r * ct, r * st);
        let z = 0.5 * (q[0] * x + q[1] * y);
        match op.kind {
            OpKind::Cosine | OpKind::MomentumCosine => trig(z, false, mode),
            OpKind::Sine => trig(z, true, mode),
            OpKind::Dipole => axis[0] * x + axis[1] * y,
        }
    };
    let mut by_level: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, s) in states.iter().enumerate() {
        by_level.entry(s.n).or_default().push(i);
    }
    let mut out = DMatrix::zeros(n, n);
    for nb in 0..=basis.n_max() {
        for nk in 0..=basis.n_max() {
            let s = 0.5 * (basis.beta(nb) + basis.beta(nk));
            let (bras, kets) = (&by_level[&nb], &by_level[&nk]);
            for (r, w) in rule.scaled(s) {
                // Fourier moments of the kernel, plain and times cos/sin(theta - theta_e).
                let mut f0 = vec![Complex64::new(0.0, 0.0); nd];
                let mut fc = vec![Complex64::new(0.0, 0.0); nd];
                let mut fs = vec![Complex64::new(0.0, 0.0); nd];
                for (j, &(ct, st)) in trig_t.iter().enumerate() {
                    let k = kernel(r, ct, st) * wt;
                    let c_rel = ct * te_c + st * te_s;
                    let s_rel = st * te_c - ct * te_s;
                    for (((a, b), c), &ph) in f0.iter_mut().zip(fc.iter_mut()).zip(fs.iter_mut()).zip(&phases[j]) {
                        *a += ph * k;
                        *b += ph * (k * c_rel);
                        *c += ph * (k * s_rel);
                    }
                }
                let polys: HashMap<usize, (f64, f64)> =
                    bras.iter().chain(kets.iter()).map(|&i| (i, radial_poly(basis, i, r))).collect();
                for &b in bras {
                    for &k in kets {
                        let d = (states[k].m - states[b].m + 2 * m_top) as usize;
                        let (pb, _) = polys[&b];
                        let (pk, dk) = polys[&k];
                        let val = match op.kind {
                            OpKind::MomentumCosine => {
                                let mk = states[k].m as f64;
                                // (p.e) = -i [cos(t - te) d/dr - sin(t - te) (1/r) d/dt]
                                let grad = fc[d] * dk - fs[d] * Complex64::new(0.0, mk / r) * pk;
                                Complex64::new(0.0, -1.0) * grad * pb
                            }
                            _ => f0[d] * (pb * pk),
                        };
                        out[(b, k)] += val * (w * r);
                    }
                }
            }
        }
    }
    for b in 0..n {
        for k in 0..n {
            out[(b, k)] *= basis.cnorm(b) * basis.cnorm(k);
        }
    }
    out
}

/// `int_0^inf r^ell R_bra R_ket dr`, or with `dR_ket/dr` when `prime`.
pub fn quad_radial(basis: &RelativeBasis, ket: usize, bra: usize, ell: i32, prime: bool, nodes: usize) -> f64 {
    let states = basis.states();
    let s = 0.5 * (basis.beta(states[ket].n) + basis.beta(states[bra].n));
    let rule = Laguerre::new(nodes);
    rule.scaled(s)
        .map(|(r, w)| {
            let (pb, _) = radial_poly(basis, bra, r);
            let (pk, dk) = radial_poly(basis, ket, r);
            w * r.powi(ell) * pb * if prime { dk } else { pk }
        })
        .sum()
}

/// `int_0^inf |r^ell R_bra R_ket| dr`, or with `dR_ket/dr` when `prime`; the scale of cancellation in [`quad_radial`].
pub fn quad_radial_scale(basis: &RelativeBasis, ket: usize, bra: usize, ell: i32, prime: bool, nodes: usize) -> f64 {
    let states = basis.states();
    let s = 0.5 * (basis.beta(states[ket].n) + basis.beta(states[bra].n));
    Laguerre::new(nodes)
        .scaled(s)
        .map(|(r, w)| {
            let (pb, _) = radial_poly(basis, bra, r);
            let (pk, dk) = radial_poly(basis, ket, r);
            (w * r.powi(ell) * pb * if prime { dk } else { pk }).abs()
        })
        .sum()
}

/// `int_0^inf r^ell R_bra x^|m| e^{-x/2} L^{(2|m|+1)}_{n-|m|-1}(x) dr` for the ket `(n, m)`.
pub(crate) fn quad_shifted(basis: &RelativeBasis, ket: usize, bra: usize, ell: i32, nodes: usize) -> f64 {
    let states = basis.states();
    let sk = states[ket];
    let a = sk.m.unsigned_abs();
    if sk.n == a {
        return 0.0;
    }
    let bk = basis.beta(sk.n);
    let s = 0.5 * (bk + basis.beta(states[bra].n));
    Laguerre::new(nodes)
        .scaled(s)
        .map(|(r, w)| {
            let (pb, _) = radial_poly(basis, bra, r);
            let x = bk * r;
            w * r.powi(ell) * pb * x.powi(a as i32) * laguerre(2.0 * a as f64 + 1.0, sk.n - a - 1, x)
        })
        .sum()
}

/// `int_0^inf e^{-2s} s^3 ds` through the same scaled rule.
pub fn gamma_identity(nodes: usize) -> f64 {
    Laguerre::new(nodes).scaled(2.0).map(|(r, w)| w * r.powi(3)).sum()
}

/// `int_0^{2 pi} cos^2(phi - phi0) dphi` on the trapezoid grid.
pub fn angular_identity(points: usize, phi0: f64) -> f64 {
    let h = 2.0 * PI / points as f64;
    (0..points).map(|j| (h * j as f64 - phi0).cos().powi(2) * h).sum()
}
