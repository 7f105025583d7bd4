//! Real-basis matrix elements of the exact operators by numerical quadrature.
//!
//! Radial integrals use composite Gauss-Legendre panels that grow
//! geometrically away from the origin and are capped by the oscillation
//! length of `q.x/2`. Angular integrals use the trapezoid rule, which is
//! spectrally accurate for periodic integrands. Angular nodes come in mirror
//! pairs `theta, -theta`, so mirror-odd moments of a mirror-even kernel vanish
//! identically.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{OpKind, RelOperator, RelativeBasis};
use crate::error::{Error, Result};
use crate::special::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub points_per_panel: usize,
    /// Acceptance threshold on the change under refinement, relative to
    /// `max(1, max |M|)`.
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { points_per_panel: 20, tolerance: 1e-10, max_doublings: 2 }
    }
}

/// One harmonic `coef * cos(k theta)` or `coef * sin(k theta)`.
#[derive(Debug, Clone, Copy)]
struct Harm {
    k: i32,
    sin: bool,
    coef: f64,
}

fn real_harmonic(ell: i32) -> Harm {
    match ell {
        0 => Harm { k: 0, sin: false, coef: 1.0 },
        l if l > 0 => Harm { k: l, sin: false, coef: std::f64::consts::SQRT_2 },
        l => Harm { k: -l, sin: true, coef: std::f64::consts::SQRT_2 },
    }
}

fn derivative(h: Harm) -> Harm {
    let k = h.k as f64;
    if h.sin {
        Harm { k: h.k, sin: false, coef: k * h.coef }
    } else {
        Harm { k: h.k, sin: true, coef: -k * h.coef }
    }
}

/// `(c cos theta + s sin theta) * h`
fn times_first(c: f64, s: f64, h: Harm) -> [Harm; 4] {
    let (up, down) = (h.k + 1, h.k - 1);
    if h.sin {
        // cos t sin k t = [sin(k+1)t + sin(k-1)t]/2 ; sin t sin k t = [cos(k-1)t - cos(k+1)t]/2
        [
            Harm { k: up, sin: true, coef: 0.5 * c * h.coef },
            Harm { k: down, sin: true, coef: 0.5 * c * h.coef },
            Harm { k: down, sin: false, coef: 0.5 * s * h.coef },
            Harm { k: up, sin: false, coef: -0.5 * s * h.coef },
        ]
    } else {
        // cos t cos k t = [cos(k+1)t + cos(k-1)t]/2 ; sin t cos k t = [sin(k+1)t - sin(k-1)t]/2
        [
            Harm { k: up, sin: false, coef: 0.5 * c * h.coef },
            Harm { k: down, sin: false, coef: 0.5 * c * h.coef },
            Harm { k: up, sin: true, coef: 0.5 * s * h.coef },
            Harm { k: down, sin: true, coef: -0.5 * s * h.coef },
        ]
    }
}

/// `int f(theta) u(theta) v(theta) dtheta` from the Fourier moments of `f`.
fn bilinear(cm: &[f64], sm: &[f64], u: Harm, v: Harm) -> f64 {
    let c = |k: i32| cm[k.unsigned_abs() as usize];
    let s = |k: i32| if k < 0 { -sm[(-k) as usize] } else { sm[k as usize] };
    let (a, b) = (u.k, v.k);
    let val = match (u.sin, v.sin) {
        (false, false) => 0.5 * (c(a - b) + c(a + b)),
        (true, true) => 0.5 * (c(a - b) - c(a + b)),
        (true, false) => 0.5 * (s(a + b) + s(a - b)),
        (false, true) => 0.5 * (s(a + b) - s(a - b)),
    };
    u.coef * v.coef * val
}

struct RadialGrid {
    r: Vec<f64>,
    w: Vec<f64>,
}

fn radial_grid(r_max: f64, h_first: f64, h_cap: f64, npts: usize, refine: u32) -> RadialGrid {
    let (x, w) = gauss_legendre(npts);
    let scale = 0.5f64.powi(refine as i32);
    let mut edges = vec![0.0];
    let mut h = h_first * scale;
    let cap = h_cap * scale;
    while *edges.last().unwrap() < r_max {
        let last = *edges.last().unwrap();
        edges.push((last + h).min(r_max));
        h = (h * 1.3).min(cap);
    }
    let mut grid = RadialGrid { r: Vec::new(), w: Vec::new() };
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            grid.r.push(a + half * (xi + 1.0));
            grid.w.push(half * wi);
        }
    }
    grid
}

#[derive(Clone, Copy)]
enum Kernel {
    Cos([f64; 2]),
    Sin([f64; 2]),
    /// `cos(q.x/2) (e . grad)`
    GradCos([f64; 2], [f64; 2]),
    Dipole([f64; 2]),
}

impl Kernel {
    fn wavevector(&self) -> [f64; 2] {
        match *self {
            Kernel::Cos(q) | Kernel::Sin(q) | Kernel::GradCos(q, _) => q,
            Kernel::Dipole(_) => [0.0, 0.0],
        }
    }

    /// Kernel value at `(r cos t, r sin t)` given `r cos t` and `r sin t`.
    fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Kernel::Cos(q) | Kernel::GradCos(q, _) => (0.5 * (q[0] * x + q[1] * y)).cos(),
            Kernel::Sin(q) => (0.5 * (q[0] * x + q[1] * y)).sin(),
            Kernel::Dipole(v) => v[0] * x + v[1] * y,
        }
    }
}

/// Real-basis matrix of `op` on the states `sel`. For the momentum operator
/// the returned matrix is that of `i (p.e) cos(q.x/2)`, which is real.
pub fn real_matrix(op: &RelOperator, basis: &RelativeBasis, sel: &[usize], settings: &QuadSettings) -> Result<DMatrix<f64>> {
    let kernel = match op.kind {
        OpKind::Cosine => Kernel::Cos(op.q),
        OpKind::Sine => Kernel::Sin(op.q),
        OpKind::MomentumCosine => Kernel::GradCos(op.q, [op.theta_eps.cos(), op.theta_eps.sin()]),
        OpKind::Dipole => {
            let n = op.q[0].hypot(op.q[1]);
            if n == 0.0 {
                return Err(Error::param("dipole axis must be nonzero"));
            }
            Kernel::Dipole([op.q[0] / n, op.q[1] / n])
        }
    };
    let mut prev = evaluate(kernel, basis, sel, settings, 0);
    let mut last_change = f64::INFINITY;
    for level in 1..=settings.max_doublings {
        let next = evaluate(kernel, basis, sel, settings, level);
        let scale = next.amax().max(1.0);
        last_change = (&next - &prev).amax() / scale;
        if last_change <= settings.tolerance {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature {
        residual: last_change,
        tolerance: settings.tolerance,
        context: format!("{:?} at q = {:?}", op.kind, op.q),
    })
}

fn evaluate(kernel: Kernel, basis: &RelativeBasis, sel: &[usize], settings: &QuadSettings, level: u32) -> DMatrix<f64> {
    let d = sel.len();
    let mut out = DMatrix::zeros(d, d);
    if d == 0 {
        return out;
    }
    let states = basis.states();
    let n_top = sel.iter().map(|&i| states[i].n).max().unwrap();
    let beta_min = basis.beta(n_top);
    let beta_max = sel.iter().map(|&i| basis.beta(states[i].n)).fold(0.0, f64::max);
    let r_max = (60.0 + 4.0 * n_top as f64) / beta_min;
    let q = kernel.wavevector();
    let qn = q[0].hypot(q[1]);
    let h_osc = if qn > 0.0 { 4.0 / qn } else { f64::INFINITY };
    let h_cap = (r_max / 30.0).min(h_osc);
    let grid = radial_grid(r_max, (0.25 / beta_max).min(h_cap), h_cap, settings.points_per_panel, level);

    let ell_max = sel.iter().map(|&i| states[i].m.unsigned_abs()).max().unwrap() as usize;
    let k_max = 2 * ell_max + 2;
    let norms: Vec<f64> = sel.iter().map(|&i| basis.cnorm(i)).collect();
    let harms: Vec<Harm> = sel.iter().map(|&i| real_harmonic(states[i].m)).collect();

    let mut cm = vec![0.0; k_max + 1];
    let mut sm = vec![0.0; k_max + 1];
    let mut rad = vec![0.0; d];
    let mut drad = vec![0.0; d];
    for (&r, &wr) in grid.r.iter().zip(&grid.w) {
        let z = match kernel {
            Kernel::Dipole(_) => r,
            _ => 0.5 * qn * r,
        };
        let base = k_max as f64 + z + 10.0 * z.cbrt() + 30.0;
        let n_theta = ((base / 4.0).ceil() as usize * 4) << level;
        fourier_moments(kernel, r, n_theta, &mut cm, &mut sm);
        let mut negligible = true;
        for (a, &i) in sel.iter().enumerate() {
            let (v, dv) = basis.radial(i, r);
            rad[a] = v * norms[a];
            drad[a] = dv * norms[a];
            negligible &= v.abs() < 1e-300;
        }
        if negligible {
            continue;
        }
        let jac = wr * r;
        for b in 0..d {
            for a in 0..d {
                let val = match kernel {
                    Kernel::GradCos(_, e) => {
                        let mut acc = 0.0;
                        for h in times_first(e[0], e[1], harms[b]) {
                            acc += drad[b] * bilinear(&cm, &sm, harms[a], h);
                        }
                        // -sin(t - t_e) = -e_x sin t + e_y cos t
                        for h in times_first(e[1], -e[0], derivative(harms[b])) {
                            acc += rad[b] / r * bilinear(&cm, &sm, harms[a], h);
                        }
                        rad[a] * acc
                    }
                    _ => rad[a] * rad[b] * bilinear(&cm, &sm, harms[a], harms[b]),
                };
                out[(a, b)] += jac * val;
            }
        }
    }
    out
}

/// Trapezoid Fourier moments `int f cos(k t)`, `int f sin(k t)` at radius `r`.
fn fourier_moments(kernel: Kernel, r: f64, n: usize, cm: &mut [f64], sm: &mut [f64]) {
    let w = 2.0 * PI / n as f64;
    let half = n / 2;
    let table: Vec<(f64, f64)> = (0..n).map(|j| (w * j as f64).sin_cos()).map(|(s, c)| (c, s)).collect();
    cm.iter_mut().for_each(|x| *x = 0.0);
    sm.iter_mut().for_each(|x| *x = 0.0);
    for j in 0..=half {
        let (c, s) = table[j];
        let fp = kernel.eval(r * c, r * s);
        let fm = kernel.eval(r * c, -r * s);
        let (even, odd) = if j == 0 || j == half { (fp, 0.0) } else { (fp + fm, fp - fm) };
        for k in 0..cm.len() {
            let (ck, sk) = table[(k * j) % n];
            cm[k] += even * ck;
            sm[k] += odd * sk;
        }
    }
    cm.iter_mut().for_each(|x| *x *= w);
    sm.iter_mut().for_each(|x| *x *= w);
}
