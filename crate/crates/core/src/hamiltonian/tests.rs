use super::*;
use crate::basis::{composite_dimension, TruncationSpec};
use crate::hydrogen2d::{level_energy, RelParity};
use crate::linalg::dot;
use crate::model::{EnergyLaw, ExcitonParams, PhononMode, PhotonMode};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exciton(w: f64) -> ExcitonParams {
    ExcitonParams::square_lattice(0.3, 9.0, w).unwrap()
}

fn truncation(n_max: u32, cap: u32) -> TruncationSpec {
    TruncationSpec { kappa_shell: 1, rel_n_max: n_max, photon_excitation_cap: cap, phonon_fock_cap: 2, ..Default::default() }
}

fn full_model() -> ModelConfig {
    let mut m = ModelConfig::matter_only(exciton(0.004), truncation(2, 2));
    m.photons = vec![
        PhotonMode::te([0.004, 0.0], 0.02, 0.01),
        PhotonMode::te([0.0, -0.006], 0.025, 0.008),
        PhotonMode::te([0.003, 0.003], 0.03, 0.012),
    ];
    m.phonons = vec![PhononMode { k: [0.05, 0.0], omega: 0.003, gamma: 0.002 }, PhononMode { k: [0.0, 0.05], omega: 0.004, gamma: 0.001 }];
    m
}

fn build(model: &ModelConfig) -> Assembler {
    let basis = composite_dimension(&model.truncation, model).unwrap();
    Assembler::new(model, Arc::new(basis)).unwrap()
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sorted_eigs(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn decoupled_spectrum() {
    let model = ModelConfig::matter_only(exciton(0.0), truncation(2, 1));
    let asm = build(&model);
    let k = [0.11, -0.05];
    let h = asm.block(k);
    let b = asm.basis();
    let mut expect = Vec::new();
    for kap in &b.kappas {
        let p = [k[0] + kap.vec[0], k[1] + kap.vec[1]];
        for r in 0..b.n_rel() {
            expect.push((p[0] * p[0] + p[1] * p[1]) / 1.2 + level_energy(b.rel_state(r).n, 0.15, EnergyLaw::Printed));
        }
    }
    expect.sort_by(f64::total_cmp);
    let got = sorted_eigs(h.to_dense().unwrap());
    for (a, e) in got.iter().zip(&expect) {
        assert!((a - e).abs() < 1e-13, "{a} vs {e}");
    }
    let v = random(h.dim(), 1);
    let y = apply_block(&h, &v).unwrap();
    let d = h.diagonal();
    for i in 0..h.dim() {
        assert!((y[i] - d[i] * v[i]).abs() < 1e-15);
    }
}

#[test]
fn lattice_does_not_mix_parity() {
    let mut model = ModelConfig::matter_only(exciton(0.005), truncation(2, 1));
    model.truncation.rel_parity = RelParity::Both;
    let asm = build(&model);
    let h = asm.block([0.0, 0.0]).to_sparse().unwrap();
    let b = asm.basis();
    for i in 0..h.n_rows() {
        for (j, v) in h.row(i) {
            let (a, c) = (b.rel_state(b.unflatten(i).rel), b.rel_state(b.unflatten(j).rel));
            assert!(a.is_even() == c.is_even() || v == 0.0);
        }
    }
    let even = {
        let mut m = model.clone();
        m.truncation.rel_parity = RelParity::Even;
        sorted_eigs(build(&m).block([0.0, 0.0]).to_dense().unwrap())
    };
    let odd = {
        let mut m = model.clone();
        m.truncation.rel_parity = RelParity::Odd;
        sorted_eigs(build(&m).block([0.0, 0.0]).to_dense().unwrap())
    };
    let mut union: Vec<f64> = even.into_iter().chain(odd).collect();
    union.sort_by(f64::total_cmp);
    let both = sorted_eigs(h.to_dense());
    for (a, e) in both.iter().zip(&union) {
        assert!((a - e).abs() < 1e-12);
    }
    assert!(both[1] - both[0] > 1e-6, "lowest level at Gamma is degenerate");
}

#[test]
fn sparse_and_matrix_free_agree() {
    let model = full_model();
    let asm = build(&model);
    let h = asm.block([0.07, 0.02]);
    let sp = h.to_sparse().unwrap();
    assert!(sp.asymmetry() <= 1e-12 * sp.max_abs());
    for seed in 0..3 {
        let v = random(h.dim(), seed);
        let a = apply_block(&h, &v).unwrap();
        let mut b = vec![0.0; h.dim()];
        sp.apply(&v, &mut b);
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-13 * scale, "{diff} vs {scale}");
    }
    let d = h.diagonal();
    for i in (0..h.dim()).step_by(37) {
        assert!((d[i] - sp.get(i, i)).abs() < 1e-15);
    }
}

#[test]
fn matrix_free_is_symmetric() {
    let model = full_model();
    let h = build(&model).block([-0.1, 0.3]);
    let (u, v) = (random(h.dim(), 10), random(h.dim(), 11));
    let (hu, hv) = (apply_block(&h, &u).unwrap(), apply_block(&h, &v).unwrap());
    let (a, b) = (dot(&u, &hv), dot(&hu, &v));
    assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
}

#[test]
fn term_breakdown_sums_to_expectation() {
    let model = full_model();
    let h = build(&model).block([0.2, 0.0]);
    let v = random(h.dim(), 5);
    let parts = term_breakdown(&h, &v).unwrap();
    assert_eq!(parts.len(), 8);
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let hv = apply_block(&h, &v).unwrap();
    let e = dot(&v, &hv);
    assert!((total - e).abs() < 1e-12 * e.abs().max(1.0));

    let mut single = model.clone();
    single.photons.truncate(1);
    single.truncation.photon_excitation_cap = 1;
    let h = build(&single).block([0.2, 0.0]);
    for seed in 0..5 {
        let v = random(h.dim(), 20 + seed);
        let dia = term_breakdown(&h, &v).unwrap().into_iter().find(|p| p.0 == Term::Diamagnetic).unwrap().1;
        assert!(dia >= 0.0);
    }
}

#[test]
fn ground_state_has_no_linear_photon_energy() {
    let mut model = full_model();
    model.phonons.clear();
    model.exciton = exciton(0.0);
    let asm = build(&model);
    let h = asm.block([0.0, 0.0]);
    let mut v = vec![0.0; h.dim()];
    let b = asm.basis();
    let centre = b.kappas.iter().position(|k| k.n1 == 0 && k.n2 == 0).unwrap();
    v[b.flat_index(crate::basis::CompositeIndex { kappa: centre, phonon: 0, rel: 0, photon: 0 })] = 1.0;
    let parts = term_breakdown(&h, &v).unwrap();
    assert_eq!(parts.iter().find(|p| p.0 == Term::PhotonLinear).unwrap().1, 0.0);
}

#[test]
fn blocks_assembled_concurrently_are_identical() {
    let model = full_model();
    let asm = build(&model);
    let ks: Vec<[f64; 2]> = (0..4).map(|i| [0.05 * i as f64, -0.02 * i as f64]).collect();
    let v = random(asm.basis().dim(), 3);
    let serial: Vec<Vec<f64>> = ks.iter().map(|&k| apply_block(&asm.block(k), &v).unwrap()).collect();
    let fresh: Vec<Vec<f64>> =
        ks.par_iter().map(|&k| apply_block(&build(&model).block(k), &v).unwrap()).collect();
    for (a, b) in serial.iter().zip(&fresh) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let threaded = pool.install(|| apply_block(&asm.block(ks[2]), &v).unwrap());
    assert!(threaded.iter().zip(&serial[2]).all(|(x, y)| x.to_bits() == y.to_bits()));
}

/// Long-wavelength single-mode Hamiltonian built from the dipole matrix and
/// `<a|p.e|b> = i mu (E_a - E_b) <a|x.e|b>`.
#[test]
fn single_long_wavelength_mode() {
    let (omega, amp) = (0.2, 0.03);
    let mut model = ModelConfig::matter_only(exciton(0.0), truncation(2, 1));
    model.energy_law = EnergyLaw::Textbook;
    model.photons = vec![PhotonMode::te([0.0, 0.0], omega, amp)];
    let k = [0.04, 0.09];
    let asm = build(&model);
    let h = asm.block(k);
    let b = asm.basis();
    let e = model.photons[0].polarization();
    let x = real_operator(&RelOperator::dipole(e), MatrixEngine::Taylor { order: 2 }, &b.rel, &b.rel_sel).unwrap();
    let nr = b.n_rel();
    let mu = 0.15;
    let en: Vec<f64> = (0..nr).map(|r| level_energy(b.rel_state(r).n, mu, EnergyLaw::Textbook)).collect();
    let dim = b.dim();
    let mut oracle = DMatrix::<f64>::zeros(dim, dim);
    for (ki, kap) in b.kappas.iter().enumerate() {
        let p = [k[0] + kap.vec[0], k[1] + kap.vec[1]];
        let kin = (p[0] * p[0] + p[1] * p[1]) / 1.2;
        for r in 0..nr {
            for n in 0..2 {
                let i = (ki * nr + r) * 2 + n;
                oracle[(i, i)] = kin + en[r] + n as f64 * omega + amp * amp / (2.0 * mu) * (1.0 + 2.0 * n as f64);
            }
            for s in 0..nr {
                let g = -mu * (en[r] - en[s]) * x[(r, s)];
                let up = (ki * nr + r) * 2 + 1;
                let down = (ki * nr + s) * 2;
                oracle[(up, down)] += amp / mu * g;
                oracle[(down, up)] += amp / mu * g;
            }
        }
    }
    let ours = h.to_dense().unwrap();
    let a = sorted_eigs(ours.clone());
    let o = sorted_eigs(oracle);
    for (x, y) in a.iter().zip(&o) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
    assert!((&ours - ours.transpose()).amax() == 0.0);
    for i in 0..dim {
        for j in 0..dim {
            let (ci, cj) = (b.unflatten(i), b.unflatten(j));
            if ci.photon == cj.photon && i != j {
                assert!(ours[(i, j)].abs() < 1e-15);
            }
            if ci.photon == 1 && cj.photon == 0 {
                let mirror = b.flat_index(crate::basis::CompositeIndex { rel: cj.rel, photon: 1, ..cj });
                let partner = b.flat_index(crate::basis::CompositeIndex { rel: ci.rel, photon: 0, ..ci });
                assert!((ours[(i, j)] + ours[(mirror, partner)]).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn bad_inputs() {
    let model = full_model();
    let other = ModelConfig::matter_only(exciton(0.0), truncation(2, 1));
    let basis = Arc::new(composite_dimension(&other.truncation, &other).unwrap());
    assert!(matches!(Assembler::new(&model, basis), Err(Error::BasisMismatch(_))));
    let h = build(&other).block([0.0, 0.0]);
    assert!(matches!(apply_block(&h, &[1.0]), Err(Error::DimensionMismatch { .. })));
    assert!(TermMask::from_specs(&[TermSpec { name: Term::Kinetic, enabled: false }]).is_err());
    let mask = TermMask::from_specs(&[TermSpec { name: Term::Lattice, enabled: false }]).unwrap();
    assert!(!mask.contains(Term::Lattice) && mask.contains(Term::Diamagnetic));
}

#[test]
fn factored_diamagnetic_matches_assembled() {
    let mut m = full_model();
    m.truncation.photon_excitation_cap = 1;
    m.photons.push(PhotonMode::te([-0.02, 0.011], 0.04, 0.02));
    for order in [2, 4] {
        m.engine = MatrixEngine::Taylor { order };
        let basis = composite_dimension(&m.truncation, &m).unwrap();
        let InternalOp::Factored(f) = diamagnetic(&m, &basis).unwrap() else { panic!("expected the factored form") };
        let InternalOp::Dense(want) = diamagnetic_assembled(&m, &basis).unwrap() else { panic!("expected a dense form") };
        assert!((f.to_dense() - &want).amax() < 1e-14 * want.amax(), "order {order}");
    }
    let asm = build(&m);
    let h = asm.block([0.01, -0.03]);
    let dense = h.to_dense().unwrap();
    let x = random(h.dim(), 3);
    let mut y = vec![0.0; h.dim()];
    h.apply(&x, &mut y).unwrap();
    let want = &dense * nalgebra::DVector::from_vec(x);
    assert!(y.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-13));
    assert!((&dense - dense.transpose()).amax() < 1e-14);
    let diag = h.diagonal();
    assert!(diag.iter().enumerate().all(|(i, v)| (v - dense[(i, i)]).abs() < 1e-15));
}
