use super::*;
use crate::basis::{composite_dimension, TruncationSpec};
use crate::hamiltonian::Assembler;
use crate::hydrogen2d::{level_energy, RelParity};
use crate::model::{EnergyLaw, ExcitonParams, ModelConfig, PhotonMode};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn assembler(w: f64, n_max: u32, shell: u32, photons: Vec<PhotonMode>) -> Assembler {
    let ex = ExcitonParams::square_lattice(0.3, 9.0, w).unwrap();
    let tr = TruncationSpec { kappa_shell: shell, rel_n_max: n_max, ..Default::default() };
    let mut model = ModelConfig::matter_only(ex, tr);
    model.photons = photons;
    let basis = composite_dimension(&model.truncation, &model).unwrap();
    Assembler::new(&model, Arc::new(basis)).unwrap()
}

/// Cyclic Jacobi rotations on a real symmetric matrix.
fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn one_by_one() {
    let (v, x) = eig_symmetric(DMatrix::from_element(1, 1, -2.5));
    assert_eq!(v, vec![-2.5]);
    assert_eq!(x[(0, 0)].abs(), 1.0);
}

#[test]
fn dense_matches_decoupled_levels() {
    let asm = assembler(0.0, 2, 1, Vec::new());
    let k = [0.1, 0.2];
    let s = eig_dense(&asm.block(k)).unwrap();
    let b = asm.basis();
    let mut expect = Vec::new();
    for kap in &b.kappas {
        let p = [k[0] + kap.vec[0], k[1] + kap.vec[1]];
        for r in 0..b.n_rel() {
            expect.push((p[0] * p[0] + p[1] * p[1]) / 1.2 + level_energy(b.rel_state(r).n, 0.15, EnergyLaw::Printed));
        }
    }
    expect.sort_by(f64::total_cmp);
    for (a, e) in s.eigenvalues.iter().zip(&expect) {
        assert!((a - e).abs() < 1e-12);
    }
    let v = s.eigenvectors.as_ref().unwrap();
    let gram = v.transpose() * v;
    assert!((gram - DMatrix::identity(v.ncols(), v.ncols())).amax() < 1e-10);
    assert!(s.meta.residuals.iter().all(|&r| r < 1e-12));
    assert!(eig_dense_with(&asm.block(k), 10).is_err());
}

#[test]
fn random_hermitian_against_jacobi() {
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in 0..i {
            let z = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    let ours = eigvals_hermitian(m.clone());
    let mut embed = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            embed[(i, j)] = z.re;
            embed[(i + n, j + n)] = z.re;
            embed[(i, j + n)] = -z.im;
            embed[(i + n, j)] = z.im;
        }
    }
    let reference = jacobi_eigenvalues(embed);
    for (i, e) in ours.iter().enumerate() {
        assert!((e - reference[2 * i]).abs() < 1e-11 && (e - reference[2 * i + 1]).abs() < 1e-11);
    }
}

#[test]
fn lanczos_matches_dense() {
    let asm = assembler(0.02, 3, 2, Vec::new());
    let h = asm.block([0.05, 0.0]);
    assert!(h.dim() >= 400);
    let dense = eig_dense(&h).unwrap();
    let lz = eig_lowest(&h, 50, 1e-11).unwrap();
    assert!(lz.eigenvalues.len() >= 50);
    for i in 0..50 {
        assert!((dense.eigenvalues[i] - lz.eigenvalues[i]).abs() < 1e-10, "{i}: {} vs {}", dense.eigenvalues[i], lz.eigenvalues[i]);
    }
    for (e, r) in lz.eigenvalues.iter().zip(&lz.meta.residuals) {
        assert!(*r <= 1e-11 * e.abs().max(1.0));
    }
    let v = lz.eigenvectors.as_ref().unwrap();
    assert!((v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols())).amax() < 1e-10);
    let again = eig_lowest(&h, 50, 1e-11).unwrap();
    assert_eq!(lz.eigenvalues, again.eigenvalues);
}

#[test]
fn lanczos_finds_every_degenerate_copy() {
    let asm = assembler(0.0, 3, 1, Vec::new());
    let h = asm.block([0.0, 0.0]);
    let lz = eig_lowest(&h, 9, 1e-11).unwrap();
    let e0 = level_energy(0, 0.15, EnergyLaw::Printed);
    let e1 = level_energy(1, 0.15, EnergyLaw::Printed);
    let e2 = level_energy(2, 0.15, EnergyLaw::Printed);
    assert!((lz.eigenvalues[0] - e0).abs() < 1e-12);
    let count = |e: f64| lz.eigenvalues.iter().filter(|&&x| (x - e).abs() < 1e-9).count();
    assert_eq!(count(e1), 3);
    assert_eq!(count(e2), 5);
    let one = eig_lowest(&h, 1, 1e-11).unwrap();
    assert!((one.eigenvalues[0] - e0).abs() < 1e-12);
}

#[test]
fn character_values() {
    let asm = assembler(0.0, 2, 0, vec![PhotonMode::te([0.0, 0.01], 0.1, 0.0)]);
    let b = asm.basis();
    let idx = |rel: usize, photon: usize| b.flat_index(crate::basis::CompositeIndex { kappa: 0, phonon: 0, rel, photon });
    let mut v = vec![0.0; b.dim()];
    v[idx(0, 0)] = 1.0;
    let c = characters(&v, b).unwrap();
    assert_eq!(c.photon_number, 0.0);
    let n1 = (0..b.n_rel()).find(|&r| b.rel_state(r).n == 1).unwrap();
    let mut v = vec![0.0; b.dim()];
    v[idx(n1, 0)] = 0.5f64.sqrt();
    v[idx(n1, 1)] = 0.5f64.sqrt();
    let c = characters(&v, b).unwrap();
    assert!((c.photon_number - 0.5).abs() < 1e-15);
    assert!((c.mean_principal_n - 1.0).abs() < 1e-15);
    assert_eq!(c.phonon_number, 0.0);
    v[0] += 0.1;
    assert!(matches!(characters(&v, b), Err(Error::NotNormalized(_))));
}

#[test]
fn characters_stay_in_bounds() {
    let asm = assembler(0.01, 2, 1, vec![PhotonMode::te([0.0, 0.01], 0.05, 0.02), PhotonMode::te([0.01, 0.0], 0.06, 0.02)]);
    let s = eig_dense(&asm.block([0.0, 0.0])).unwrap();
    for c in &s.characters {
        assert!(c.photon_number >= -1e-12 && c.photon_number <= 1.0 + 1e-12);
        assert!(c.mean_principal_n >= 0.0 && c.mean_principal_n <= 2.0 + 1e-12);
    }
}

#[test]
fn parity_restricted_runs() {
    let ex = ExcitonParams::square_lattice(0.3, 9.0, 0.0).unwrap();
    let tr = TruncationSpec { kappa_shell: 0, rel_n_max: 2, rel_parity: RelParity::Even, ..Default::default() };
    let model = ModelConfig::matter_only(ex, tr);
    let basis = composite_dimension(&model.truncation, &model).unwrap();
    let s = eig_dense(&Assembler::new(&model, Arc::new(basis)).unwrap().block([0.0, 0.0])).unwrap();
    assert_eq!(s.eigenvalues.len(), 6);
}

#[test]
fn davidson_matches_dense() {
    let photons = vec![PhotonMode::te([0.02, 0.0], 0.1, 0.02), PhotonMode::te([0.0, -0.03], 0.12, 0.02)];
    let asm = assembler(0.02, 3, 1, photons);
    let h = asm.block([0.07, -0.02]);
    let dense = eig_dense(&h).unwrap();
    let dv = eig_lowest_davidson(&h, 30, 1e-11).unwrap();
    assert_eq!(dv.meta.method, SolverMethod::Davidson);
    for i in 0..30 {
        assert!((dense.eigenvalues[i] - dv.eigenvalues[i]).abs() < 1e-10, "{i}: {} vs {}", dense.eigenvalues[i], dv.eigenvalues[i]);
    }
    let v = dv.eigenvectors.as_ref().unwrap();
    assert!((v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols())).amax() < 1e-10);
}

#[test]
fn davidson_finds_every_degenerate_copy() {
    let asm = assembler(0.0, 3, 1, Vec::new());
    let h = asm.block([0.0, 0.0]);
    let dv = eig_lowest_davidson(&h, 9, 1e-11).unwrap();
    let e1 = level_energy(1, 0.15, EnergyLaw::Printed);
    let e2 = level_energy(2, 0.15, EnergyLaw::Printed);
    let count = |e: f64| dv.eigenvalues.iter().filter(|&&x| (x - e).abs() < 1e-9).count();
    assert_eq!(count(e1), 3);
    assert_eq!(count(e2), 5);
}
