use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;

const TAYLOR2: MatrixEngine = MatrixEngine::Taylor { order: 2 };

fn camax(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn basis(n_max: u32) -> RelativeBasis {
    RelativeBasis::new(0.15, n_max).unwrap()
}

#[test]
fn energies() {
    assert_eq!(hydrogen_energy(0, 0.15), -0.15);
    assert_relative_eq!(hydrogen_energy(1, 0.15), -0.05, epsilon = 1e-17);
    let mut last = f64::NEG_INFINITY;
    for n in 0..200 {
        let e = hydrogen_energy(n, 0.15);
        assert!(e < 0.0 && e > last);
        last = e;
    }
    assert_relative_eq!(level_energy(1, 0.5, EnergyLaw::Textbook), -1.0 / 9.0, epsilon = 1e-16);
}

#[test]
fn state_layout() {
    let b = basis(3);
    assert_eq!(b.len(), 16);
    for (i, s) in b.states().iter().enumerate() {
        assert_eq!(b.index_of(s.n, s.m), Some(i));
    }
    assert_eq!(b.states()[1], RelState { n: 1, m: 0 });
    assert_eq!(b.states()[2], RelState { n: 1, m: 1 });
    assert_eq!(b.states()[3], RelState { n: 1, m: -1 });
    assert_eq!(b.index_of(1, 2), None);
}

#[test]
fn normalization_constants() {
    let b = basis(4);
    let beta0 = 0.6;
    assert_relative_eq!(b.beta(0), beta0, epsilon = 1e-15);
    assert_relative_eq!(b.cnorm(0), beta0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
    let i = b.index_of(2, -1).unwrap();
    let expect = b.beta(2) / (2.0 * PI).sqrt() * (1.0f64 / (5.0 * 6.0)).sqrt();
    assert_relative_eq!(b.cnorm(i), expect, max_relative = 1e-14);
}

#[test]
fn radial_examples() {
    let b = basis(2);
    let o = radial_integral_o(0, 0, 0, 0, 1, &b).unwrap();
    assert_relative_eq!(o, 1.0 / 0.36, max_relative = 1e-14);
    let op = radial_integral_oprime(0, 0, 0, 0, 1, &b).unwrap();
    assert_relative_eq!(op, -1.0 / (2.0 * 0.6), max_relative = 1e-14);
    assert!(radial_integral_o(0, 0, 3, 0, 1, &b).is_err());
    assert!(radial_integral_o(0, 0, 0, 0, -1, &b).is_err());
}

#[test]
fn normalization_from_radial_integral() {
    let b = basis(6);
    for i in 0..b.len() {
        let v = 2.0 * PI * b.cnorm(i).powi(2) * b.o(i, i, 1);
        assert_relative_eq!(v, 1.0, max_relative = 1e-10);
    }
}

#[test]
fn radial_derivative_is_consistent() {
    let b = basis(4);
    for i in 0..b.len() {
        for &r in &[0.3, 2.0, 7.5, 20.0] {
            let h = 1e-5;
            let fd = (b.radial(i, r + h).0 - b.radial(i, r - h).0) / (2.0 * h);
            let (_, d) = b.radial(i, r);
            assert!((fd - d).abs() < 1e-8 * (1.0 + d.abs()), "state {i} r {r}: {fd} vs {d}");
        }
    }
}

#[test]
fn cosine_at_zero_is_identity() {
    let b = basis(3);
    for engine in [TAYLOR2, MatrixEngine::Quadrature] {
        let m = relative_matrix(&RelOperator::cosine([0.0, 0.0]), engine, &b).unwrap();
        let id = DMatrix::<Complex64>::identity(b.len(), b.len());
        assert!(camax(&(&m.values - id)) < 1e-12, "{engine:?}");
        let s = relative_matrix(&RelOperator::sine([0.0, 0.0]), engine, &b).unwrap();
        assert!(camax(&s.values) < 1e-14);
    }
}

#[test]
fn hermitian_and_real() {
    let b = basis(3);
    let ops = [
        RelOperator::cosine([0.03, -0.02]),
        RelOperator::sine([0.01, 0.04]),
        RelOperator::dipole([0.6, 0.8]),
        RelOperator::momentum_cosine([0.03, 0.04], (0.04f64).atan2(0.03) + PI / 2.0),
    ];
    for op in ops {
        let m = relative_matrix(&op, TAYLOR2, &b).unwrap();
        assert!(camax(&(&m.values - m.values.adjoint())) < 1e-12, "{op:?}");
        let r = to_real_basis(&m, &b).unwrap();
        if op.kind == OpKind::MomentumCosine {
            assert!(r.values.map(|z| z.re.abs()).max() < 1e-12);
        } else {
            assert!(r.values.map(|z| z.im.abs()).max() < 1e-12, "{op:?}");
        }
        assert!(to_real_basis(&r, &b).is_err());
    }
}

#[test]
fn identity_maps_to_identity() {
    let b = basis(3);
    let id = RelMatrix {
        op: RelOperator::cosine([0.0, 0.0]),
        engine: TAYLOR2,
        basis_kind: BasisKind::Complex,
        values: DMatrix::identity(b.len(), b.len()),
    };
    let r = to_real_basis(&id, &b).unwrap();
    assert!(camax(&(r.values - DMatrix::<Complex64>::identity(b.len(), b.len()))) < 1e-15);
}

#[test]
fn selection_rules() {
    let b = basis(4);
    let s = relative_matrix(&RelOperator::sine([0.01, 0.0]), TAYLOR2, &b).unwrap();
    let c = relative_matrix(&RelOperator::cosine([0.01, 0.0]), TAYLOR2, &b).unwrap();
    for (i, si) in b.states().iter().enumerate() {
        for (j, sj) in b.states().iter().enumerate() {
            let dm = (si.m - sj.m).abs();
            if dm != 1 {
                assert_eq!(s.values[(i, j)], Complex64::new(0.0, 0.0));
            }
            if dm != 0 && dm != 2 {
                assert_eq!(c.values[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
    }
}

#[test]
fn quadrature_gram_matrix() {
    let b = basis(6);
    let all: Vec<usize> = (0..b.len()).collect();
    let g = real_operator(&RelOperator::cosine([0.0, 0.0]), MatrixEngine::Quadrature, &b, &all).unwrap();
    assert!((g - DMatrix::identity(b.len(), b.len())).amax() < 1e-9);
}

#[test]
fn lattice_matrix_conserves_mirror_parity() {
    let b = basis(3);
    let all: Vec<usize> = (0..b.len()).collect();
    for q in [[0.698, 0.0], [0.0, -0.698], [1.4, 0.0]] {
        let m = real_operator(&RelOperator::cosine(q), MatrixEngine::Quadrature, &b, &all).unwrap();
        for (i, si) in b.states().iter().enumerate() {
            for (j, sj) in b.states().iter().enumerate() {
                if si.is_even() != sj.is_even() {
                    assert_eq!(m[(i, j)], 0.0, "q = {q:?} ({i}, {j})");
                }
            }
        }
        assert!((&m - m.transpose()).amax() < 1e-12);
    }
}

#[test]
fn quadrature_engine_matches_taylor_at_small_q() {
    let b = basis(3);
    let all: Vec<usize> = (0..b.len()).collect();
    let q: [f64; 2] = [0.004, -0.003];
    let te = q[1].atan2(q[0]) + PI / 2.0;
    for op in [RelOperator::cosine(q), RelOperator::sine(q), RelOperator::momentum_cosine(q, te), RelOperator::dipole([1.0, 0.0])] {
        let exact = real_operator(&op, MatrixEngine::Quadrature, &b, &all).unwrap();
        let taylor = real_operator(&op, MatrixEngine::Taylor { order: 12 }, &b, &all).unwrap();
        let scale = exact.amax();
        assert!((&exact - &taylor).amax() < 1e-9 * scale.max(1.0), "{op:?}: {}", (&exact - &taylor).amax());
    }
}

#[test]
fn csv_dump() {
    let b = basis(1);
    let m = relative_matrix(&RelOperator::cosine([0.0, 0.0]), TAYLOR2, &b).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("row,col,re,im\n"));
    assert!(text.lines().count() > b.len());
}

proptest! {
    #[test]
    fn o_is_symmetric(a in 0usize..25, c in 0usize..25, ell in 0i32..5) {
        let b = basis(4);
        let x = b.o(a, c, ell);
        let y = b.o(c, a, ell);
        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
    }

    #[test]
    fn integration_by_parts(a in 0usize..25, c in 0usize..25, ell in 1i32..5) {
        let b = basis(4);
        let lhs = b.oprime(a, c, ell) + b.oprime(c, a, ell) + ell as f64 * b.o(a, c, ell - 1);
        let scale = b.oprime(a, c, ell).abs().max(b.o(a, c, ell - 1).abs()).max(1.0);
        prop_assert!(lhs.abs() <= 1e-10 * scale, "residual {}", lhs);
    }

    #[test]
    fn real_basis_cosine_is_real_symmetric(qx in -0.06f64..0.06, qy in -0.06f64..0.06) {
        let b = basis(3);
        let m = to_real_basis(&relative_matrix(&RelOperator::cosine([qx, qy]), TAYLOR2, &b).unwrap(), &b).unwrap();
        prop_assert!(m.values.map(|z| z.im.abs()).max() < 1e-12);
        prop_assert!(camax(&(&m.values - m.values.transpose())) < 1e-12);
    }
}

#[test]
fn cosine_polynomial_reproduces_the_taylor_matrix() {
    let b = basis(3);
    let sel = b.select(RelParity::Both, None);
    for order in [2, 4] {
        let parts = cosine_polynomial(order, &b, &sel).unwrap();
        for q in [[0.03, -0.02], [0.4, 0.25], [-1.1, 0.7]] {
            let want = real_operator(&RelOperator::cosine(q), MatrixEngine::Taylor { order }, &b, &sel).unwrap();
            let mut got = DMatrix::zeros(sel.len(), sel.len());
            for ((a, c), m) in &parts {
                got += m * (q[0].powi(*a as i32) * q[1].powi(*c as i32));
            }
            assert!((&got - &want).amax() < 1e-12 * want.amax().max(1.0), "order {order}, q {q:?}");
        }
    }
}
