use std::sync::{Arc, OnceLock};

use blochkit::basis::composite_dimension;
use blochkit::config::preset;
use blochkit::hamiltonian::Assembler;
use blochkit::observables::{dielectric_from_transitions, Transition};
use blochkit::solve::{eig_dense, eig_lowest};
use proptest::prelude::*;

fn toy(name: &'static str) -> &'static Assembler {
    static PHOTON: OnceLock<Assembler> = OnceLock::new();
    static PHONON: OnceLock<Assembler> = OnceLock::new();
    let cell = if name == "toy-photon" { &PHOTON } else { &PHONON };
    cell.get_or_init(|| {
        let model = preset(name).unwrap().model.build().unwrap();
        let basis = Arc::new(composite_dimension(&model.truncation, &model).unwrap());
        Assembler::new(&model, basis).unwrap()
    })
}

fn k_in_zone() -> impl Strategy<Value = [f64; 2]> {
    let half = std::f64::consts::PI / 9.0;
    (-half..half, -half..half).prop_map(|(x, y)| [x, y])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blocks_are_symmetric(k in k_in_zone(), phonon in any::<bool>()) {
        let h = toy(if phonon { "toy-phonon" } else { "toy-photon" }).block(k).to_dense().unwrap();
        prop_assert!((&h - h.transpose()).amax() <= 1e-12 * h.amax());
    }

    #[test]
    fn apply_matches_the_dense_matrix(k in k_in_zone(), seed in 0u64..1000) {
        let h = toy("toy-photon").block(k);
        let m = h.to_dense().unwrap();
        let v: Vec<f64> = (0..h.dim()).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 50.0 - 1.0).collect();
        let mut y = vec![0.0; h.dim()];
        h.apply(&v, &mut y).unwrap();
        let want = &m * nalgebra::DVector::from_vec(v);
        let err = y.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * m.amax() * h.dim() as f64);
    }

    #[test]
    fn lanczos_agrees_with_dense(k in k_in_zone()) {
        let h = toy("toy-phonon").block(k);
        let dense = eig_dense(&h).unwrap().eigenvalues;
        let lz = eig_lowest(&h, 6, 1e-12).unwrap().eigenvalues;
        for (a, b) in lz.iter().zip(&dense) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn absorption_has_nonpositive_imaginary_part(
        lines in prop::collection::vec((1e-3f64..1.0, 0.0f64..10.0, -1.0f64..1.0, 0.0f64..10.0), 1..8),
        w in 0.0f64..2.0,
        eta in 1e-4f64..1e-1,
    ) {
        let transitions: Vec<Transition> = lines
            .iter()
            .map(|&(de, a, c, b)| {
                let xy = c * (a * b).sqrt();
                Transition { delta_e: de, strength: [[a, xy], [xy, b]] }
            })
            .collect();
        let eps = dielectric_from_transitions(&transitions, &[w], eta)[0];
        prop_assert!(eps[0][0].im <= 0.0 && eps[1][1].im <= 0.0);
    }
}
