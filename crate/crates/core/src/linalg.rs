//! Vector kernels with a reduction order fixed by the vector length alone.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// `<a|b>`, summed in 4096-element chunks whose partials are added in order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let partials: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partials.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len());
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(y, x)| {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    });
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|x| x.iter_mut().for_each(|v| *v *= alpha));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_is_independent_of_thread_count() {
        let a: Vec<f64> = (0..20_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.5).collect();
        let b: Vec<f64> = (0..20_000).map(|i| ((i * 104_729) % 997) as f64 * 1e-3).collect();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| dot(&a, &b));
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| dot(&a, &b));
        assert_eq!(serial.to_bits(), wide.to_bits());
        let mut y = b.clone();
        axpy(2.0, &a, &mut y);
        assert_eq!(y[3], b[3] + 2.0 * a[3]);
        scale(0.5, &mut y);
        assert!((norm(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
    }
}
