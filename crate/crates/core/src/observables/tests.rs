use super::*;
use crate::basis::{composite_dimension, TruncationSpec};
use crate::hamiltonian::Assembler;
use crate::model::{ExcitonParams, ModelConfig, PhotonMode};
use crate::solve::eig_dense;
use num_complex::Complex64;

fn exciton(w: f64) -> ExcitonParams {
    ExcitonParams::square_lattice(0.3, 9.0, w).unwrap()
}

fn trunc(shell: u32, n_max: u32, cap: u32) -> TruncationSpec {
    TruncationSpec { kappa_shell: shell, rel_n_max: n_max, photon_excitation_cap: cap, ..Default::default() }
}

fn short_path(points: usize) -> PathSpec {
    PathSpec { points_per_segment: points, ..PathSpec::default() }
}

#[test]
fn free_bands_follow_the_kinetic_law() {
    let model = ModelConfig::matter_only(exciton(0.0), trunc(1, 1, 1));
    let table = band_structure(&model, &model.truncation, &short_path(6), 1).unwrap();
    assert_eq!(table.points.len(), 19);
    let e0 = table.points[0].energies[0];
    for p in &table.points {
        let k2 = p.k[0] * p.k[0] + p.k[1] * p.k[1];
        assert!((p.energies[0] - e0 - k2 / 1.2).abs() < 1e-12);
    }
    let v = group_velocity(&table).unwrap();
    // Along G -> X the slope is |K| / M; central differences are exact for a parabola.
    for i in 1..6 {
        let k = table.points[i].k[0];
        assert!((v[i][0] - k / 0.6).abs() < 1e-10, "{} vs {}", v[i][0], k / 0.6);
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("s,Kx,Ky,band_index,energy_au,photon_character,mean_principal_n,phonon_number\n"));
    assert_eq!(text.lines().count(), 20);
}

#[test]
fn velocity_vanishes_at_gamma_and_refines_quadratically() {
    let mut model = ModelConfig::matter_only(exciton(0.004), trunc(1, 2, 1));
    model.photons = vec![PhotonMode::te([0.0, 0.0], 0.03, 0.01)];
    let path = |n| PathSpec {
        vertices: vec![
            PathVertex { label: "X'".into(), frac: [-0.1, 0.0] },
            PathVertex { label: "G".into(), frac: [0.0, 0.0] },
            PathVertex { label: "X".into(), frac: [0.1, 0.0] },
        ],
        points_per_segment: n,
    };
    let err = |n: usize| {
        let t = band_structure(&model, &model.truncation, &path(n), 1).unwrap();
        group_velocity(&t).unwrap()[n][0].abs()
    };
    assert!(err(4) < 1e-10);
    // Off the symmetry point the central difference error drops four-fold per halving.
    let slope = |n: usize| {
        let t = band_structure(&model, &model.truncation, &path(n), 1).unwrap();
        group_velocity(&t).unwrap()[n / 2][0]
    };
    let (a, b, c) = (slope(4), slope(8), slope(16));
    let ratio = (a - b) / (b - c);
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn path_rejects_bad_vertices() {
    let b = [[0.7, 0.0], [0.0, 0.7]];
    let mut p = short_path(2);
    p.vertices[1].frac = [0.6, 0.0];
    assert!(p.sample(b[0], b[1]).is_err());
    let mut p = short_path(2);
    p.vertices[1].frac = [0.0, 0.0];
    assert!(p.sample(b[0], b[1]).is_err());
    assert!(group_velocity(&BandTable { nbands: 1, points: Vec::new() }).is_err());
}

fn small_model() -> ModelConfig {
    let mut m = ModelConfig::matter_only(exciton(0.004), trunc(1, 2, 1));
    m.photons = vec![PhotonMode::te([0.001, 0.0], 0.09, 0.005), PhotonMode::te([0.0, 0.001], 0.09, 0.005)];
    m.eta = 2e-3;
    m
}

#[test]
fn dielectric_is_causal_and_decays() {
    let model = small_model();
    let omega: Vec<f64> = (1..=60).map(|i| 0.005 * i as f64).collect();
    let t = dielectric_t0(&model, &omega).unwrap();
    assert_eq!(t.method, DielectricMethod::Dense);
    for e in &t.eps {
        assert!(e[0][0].im <= 1e-14 && e[1][1].im <= 1e-14);
        // C4 symmetry of the lattice and the mode pair.
        assert!((e[0][0] - e[1][1]).norm() < 1e-9 * e[0][0].norm());
    }
    // Far above every transition the response decays as 4 pi sum N / w.
    let far = dielectric_t0(&model, &[10.0]).unwrap();
    let sum: f64 = far.transitions.iter().map(|t| t.strength[0][0]).sum();
    let tail = (far.eps[0][0][0] - 1.0) * 10.0;
    assert!((tail.re - 4.0 * std::f64::consts::PI * sum).abs() < 0.05 * tail.re);
    let mut csv = Vec::new();
    t.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 61);
}

#[test]
fn single_transition_peak_height() {
    let model = small_model();
    let t = dielectric_t0(&model, &[0.1]).unwrap();
    let strongest = t.transitions.iter().max_by(|a, b| a.strength[0][0].total_cmp(&b.strength[0][0])).unwrap();
    let on = dielectric_from_transitions(std::slice::from_ref(strongest), &[strongest.delta_e], model.eta);
    let expect = -4.0 * std::f64::consts::PI * strongest.strength[0][0] / model.eta;
    assert!((on[0][0][0].im - expect).abs() < 1e-12 * expect.abs());
    assert!((on[0][0][0].re - 1.0).abs() < 1e-12);
}

#[test]
fn krylov_and_eigenpair_paths_match_dense() {
    let model = small_model();
    let omega: Vec<f64> = (1..=40).map(|i| 0.0075 * i as f64).collect();
    let dense = dielectric_t0(&model, &omega).unwrap();
    let kry = dielectric_t0_with(
        &model,
        &omega,
        &DielectricOptions { method: DielectricMethod::Krylov { steps: 300 }, ..Default::default() },
    )
    .unwrap();
    let pairs = dielectric_t0_with(
        &model,
        &omega,
        &DielectricOptions { method: DielectricMethod::Eigenpairs, initial_states: 16, ..Default::default() },
    )
    .unwrap();
    assert!((kry.ground_energy - dense.ground_energy).abs() < 1e-10);
    let scale = dense.eps.iter().map(|e| e[0][0].norm()).fold(0.0, f64::max);
    for ((d, k), p) in dense.eps.iter().zip(&kry.eps).zip(&pairs.eps) {
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[i][j] - k[i][j]).norm() < 1e-8 * scale, "{:?} vs {:?}", d[i][j], k[i][j]);
            }
        }
        // The truncated eigenpair sum misses only far transitions.
        assert!((d[0][0] - p[0][0]).norm() < 1e-3 * scale);
    }
}

fn states(model: &ModelConfig) -> Eigenstates {
    let basis = Arc::new(composite_dimension(&model.truncation, model).unwrap());
    let h = Assembler::new(model, Arc::clone(&basis)).unwrap().block([0.0, 0.0]);
    let s = eig_dense(&h).unwrap();
    Eigenstates { basis, values: s.eigenvalues, vectors: s.eigenvectors.unwrap() }
}

#[test]
fn polarizability_limits() {
    let model = small_model();
    let st = states(&model);
    let ns = st.values.len();
    let omega = [0.05, 0.1, 0.2];
    let flat = vec![0.3; ns];
    let p = polarizability(&st, [1e-3, 0.0], &omega, &flat, model.eta, DensityForm::Linearized, false).unwrap();
    assert!(p.p.iter().all(|z| z.norm() == 0.0));
    assert!(p.eps.iter().all(|z| *z == Complex64::new(1.0, 0.0)));

    let mut ground = vec![0.0; ns];
    ground[0] = 1.0;
    let q = 1e-3;
    let lin = polarizability(&st, [q, 0.0], &omega, &ground, model.eta, DensityForm::Linearized, true).unwrap();
    let t0 = dielectric_t0(&model, &omega).unwrap();
    for (a, b) in lin.eps.iter().zip(&t0.eps) {
        assert!((a - b[0][0]).norm() < 1e-10, "{a} vs {}", b[0][0]);
    }

    // The full sine differs from the linearized density at relative order q^2.
    let gap = |q: f64| {
        let a = polarizability(&st, [q, 0.0], &omega, &ground, model.eta, DensityForm::Linearized, true).unwrap();
        let b = polarizability(&st, [q, 0.0], &omega, &ground, model.eta, DensityForm::FullSine, true).unwrap();
        (a.p[1] - b.p[1]).norm() / a.p[1].norm()
    };
    let (g1, g2) = (gap(0.04), gap(0.02));
    assert!((g1 / g2 - 4.0).abs() < 0.2, "{g1} {g2}");
    assert!(polarizability(&st, [0.0, 0.0], &omega, &ground, model.eta, DensityForm::Linearized, true).is_err());
    assert!(polarizability(&st, [q, 0.0], &omega, &ground[1..], model.eta, DensityForm::Linearized, true).is_err());
}

#[test]
fn header_lines() {
    let mut h = Header::new();
    h.add("eta_au", &1e-3).unwrap().add("dims", &[3, 4]).unwrap();
    let mut out = Vec::new();
    write_header(&mut out, &h).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# code_version: \"blochkit "));
    assert_eq!(lines[1], "# eta_au: 0.001");
    assert_eq!(lines[2], "# dims: [3,4]");
}
