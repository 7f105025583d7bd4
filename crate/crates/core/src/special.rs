//! Factorials, Laguerre polynomials and Gauss rules.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// `ln(n!)`, exact summation below 256 and Stirling series above.
pub fn ln_factorial(n: u32) -> f64 {
    if n < 256 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Power-series coefficients of the generalized Laguerre polynomial `L_b^(alpha)`.
pub fn laguerre_coefficients(alpha: u32, order: u32) -> Vec<f64> {
    let b = order as f64;
    let a = alpha as f64;
    let mut coeffs = Vec::with_capacity(order as usize + 1);
    let mut c = binomial(order + alpha, order);
    coeffs.push(c);
    for j in 0..order {
        let jf = j as f64;
        c = -c * (b - jf) / ((jf + 1.0) * (a + jf + 1.0));
        coeffs.push(c);
    }
    coeffs
}

/// Evaluates `L_b^(alpha)(x)` by the three-term recurrence.
pub fn laguerre(alpha: f64, order: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if order == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..order {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Laguerre rule for `int_0^inf e^{-x} f(x) dx`.
///
/// Returns nodes and `ln` of the weights, since the weights underflow for
/// large `n`.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Golub-Welsch guesses, refined by Newton on the scaled recurrence
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + 1.0
        } else if i + 1 == j || j + 1 == i {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guesses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut nodes = Vec::with_capacity(n);
    let mut ln_w = Vec::with_capacity(n);
    for g in guesses {
        let mut x = g;
        for _ in 0..50 {
            let (p, dp, _) = scaled_laguerre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        // w = 1 / (x L_n'(x)^2)
        let (_, dp, ln_scale) = scaled_laguerre(n, x);
        nodes.push(x);
        ln_w.push(-x.ln() - 2.0 * (dp.abs().ln() + ln_scale));
    }
    (nodes, ln_w)
}

/// Returns `(L_n, L_n')` divided by a common scale, and `ln` of that scale.
fn scaled_laguerre(n: usize, x: f64) -> (f64, f64, f64) {
    let mut ln_scale = 0.0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 {
            cur /= m;
            prev /= m;
            ln_scale += m.ln();
        }
    }
    // cur = L_n, prev = L_{n-1}
    let d = n as f64 * (cur - prev) / x;
    (cur, d, ln_scale)
}

/// Double-double number `hi + lo` with about 32 significant digits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let r = Dd::renorm(s.hi, s.lo + t.hi);
        Dd::renorm(r.hi, r.lo + t.lo)
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::new(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::new(q2)));
        let q3 = r.hi / o.hi;
        Dd::renorm(q1, q2).add(Dd::new(q3))
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut acc = Dd::ONE;
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Laguerre coefficients in double-double precision.
pub fn laguerre_coefficients_dd(alpha: u32, order: u32) -> Vec<Dd> {
    let mut c = Dd::new(binomial(order + alpha, order));
    let mut out = vec![c];
    for j in 0..order {
        let num = -((order - j) as f64);
        let den = ((j + 1) * (alpha + j + 1)) as f64;
        c = c.mul(Dd::new(num)).div(Dd::new(den));
        out.push(c);
    }
    out
}

/// `n!` in double-double precision.
pub fn factorial_dd(n: u32) -> Dd {
    (2..=n).fold(Dd::ONE, |acc, k| acc.mul(Dd::new(k as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laguerre_coefficient_examples() {
        assert_eq!(laguerre_coefficients(0, 0), vec![1.0]);
        assert_eq!(laguerre_coefficients(2, 1), vec![3.0, -1.0]);
        assert_eq!(laguerre_coefficients(0, 2), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn coefficients_match_recurrence() {
        for alpha in 0..9 {
            for order in 0..12 {
                let c = laguerre_coefficients(alpha, order);
                for &x in &[0.0, 0.3, 1.7, 5.0, 11.0] {
                    let a = horner(&c, x);
                    let b = laguerre(alpha as f64, order, x);
                    assert_relative_eq!(a, b, epsilon = 1e-9 * (1.0 + b.abs()), max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn double_double() {
        let third = Dd::ONE.div(Dd::new(3.0));
        let back = third.mul(Dd::new(3.0)).sub(Dd::ONE);
        assert!(back.to_f64().abs() < 1e-30);
        let big = factorial_dd(25);
        assert_eq!(big.hi, 15511210043330985984000000.0);
        let c = laguerre_coefficients_dd(3, 4);
        let f = laguerre_coefficients(3, 4);
        for (a, b) in c.iter().zip(&f) {
            assert!((a.to_f64() - b).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), epsilon = 1e-14);
        let exact: f64 = (2..=300).map(|k| (k as f64).ln()).sum();
        assert_relative_eq!(ln_factorial(300), exact, max_relative = 1e-13);
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        for p in 0..40 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-14, "p = {p}: {s} vs {exact}");
        }
    }

    #[test]
    fn laguerre_rule_gamma_moments() {
        let (x, lw) = gauss_laguerre(200);
        let total: f64 = lw.iter().map(|l| l.exp()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-13);
        // int e^{-2s} s^3 ds = 3!/2^4
        let s: f64 = x.iter().zip(&lw).map(|(&x, &l)| l.exp() * 0.5f64.powi(4) * x.powi(3)).sum();
        assert_relative_eq!(s, 0.375, epsilon = 1e-13);
        for k in 0..12 {
            let s: f64 = x.iter().zip(&lw).map(|(&x, &l)| (l + k as f64 * x.ln()).exp()).sum();
            assert_relative_eq!(s, (ln_factorial(k)).exp(), max_relative = 1e-12);
        }
    }
}
