use clairaut_core::clairaut::{classical_hamiltonian, GenericTransform};
use clairaut_core::partition::{hessian, numerical_rank, partition_indices};
use clairaut_core::sampling::{phase_point, probe};
use clairaut_core::{DomainBox, LagrangianSystem, MixedHamiltonian};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CORPUS: [(usize, &str); 7] = [
    (1, "0.5*v1^2 - 0.5*q1^2"),
    (2, "0.5*(v1^2 + v2^2) + q1*q2"),
    (2, "v1*v2"),
    (2, "0.5*(v1+v2)^2"),
    (2, "0.5*v1^2 + q1*v2"),
    (3, "0.5*(v1^2 + v2^2) + q3*(v1 - v2)"),
    (2, "exp(v1) + sin(q2)*v2 + q1*v1"),
];

fn build(n: usize, src: &str) -> MixedHamiltonian {
    let sys = LagrangianSystem::new(n, src, DomainBox::uniform(2 * n, -1.0, 1.0).unwrap()).unwrap();
    let part = partition_indices(&sys, 64, 0).unwrap();
    MixedHamiltonian::new(sys, part)
}

#[test]
fn partition_holds_at_fresh_points() {
    for (n, src) in CORPUS {
        let h = build(n, src);
        let part = h.partition();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let x = h.system().domain().sample(&mut rng);
            let w = hessian(h.system(), &x[..n], &x[n..]).unwrap();
            assert_eq!(numerical_rank(&w, part.rank_tolerance), part.k, "{src}");
            let w11 = part.w11(&w);
            if part.k > 0 {
                assert!(w11.determinant().abs() > part.rank_tolerance, "{src}");
            }
            // leading block of the permuted matrix is the regular block
            let perm = part.permuted(&w);
            assert_eq!(perm.view((0, 0), (part.k, part.k)).clone_owned(), w11);
        }
    }
}

#[test]
fn envelope_gradient_identities() {
    for (n, src) in CORPUS {
        let h = build(n, src);
        let part = h.partition().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pt = phase_point(&h, &mut rng).unwrap();
            let grad = h.momentum_gradient_fd(&pt.q, &pt.p, &pt.v2).unwrap();
            let p1: Vec<f64> = part.regular.iter().map(|&i| pt.p[i]).collect();
            let v1 = h.solve_envelope(&pt.q, &p1, &pt.v2).unwrap();
            for (a, &i) in part.regular.iter().enumerate() {
                assert!((grad[i] - v1[a]).abs() <= 1e-6, "{src}: dH/dp1 {} vs {}", grad[i], v1[a]);
            }
            for (b, &i) in part.nonregular.iter().enumerate() {
                assert!((grad[i] - pt.v2[b]).abs() <= 1e-8, "{src}: dH/dp2 {} vs {}", grad[i], pt.v2[b]);
            }
        }
    }
}

#[test]
fn constraints_do_not_depend_on_free_velocities() {
    for (n, src) in CORPUS {
        let h = build(n, src);
        let part = h.partition().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let pt = phase_point(&h, &mut rng).unwrap();
            let p1: Vec<f64> = part.regular.iter().map(|&i| pt.p[i]).collect();
            let reference = h.psi(&pt.q, &p1, &pt.v2).unwrap();
            let h0_ref = h.h_zero_with_probe(&pt.q, &p1, &pt.v2).unwrap();
            let norm = reference.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for _ in 0..10 {
                let c = probe(&h, &mut rng);
                let psi = h.psi(&pt.q, &p1, &c).unwrap();
                for (a, b) in psi.iter().zip(&reference) {
                    assert!((a - b).abs() <= 1e-8 * (1.0 + norm), "{src}");
                }
                let h0 = h.h_zero_with_probe(&pt.q, &p1, &c).unwrap();
                assert!((h0 - h0_ref).abs() <= 1e-8 * (1.0 + h0_ref.abs()), "{src}");
            }
        }
    }
}

#[test]
fn classical_reduction_for_regular_systems() {
    let extra = "0.25*v1^4 + 0.5*v1^2 + exp(0.3*v2) + 0.5*v2^2 + cos(q1)*v1*v2*0.1";
    for (n, src) in CORPUS.iter().copied().chain([(2, extra)]) {
        let h = build(n, src);
        if !h.partition().is_regular() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let pt = phase_point(&h, &mut rng).unwrap();
            let mixed = h.mixed_hamiltonian(&pt.q, &pt.p, &[]).unwrap();
            let classical = classical_hamiltonian(h.system(), &pt.q, &pt.p, &pt.v).unwrap();
            assert!((mixed - classical).abs() <= 1e-9 * (1.0 + classical.abs()), "{src}");
        }
    }
}

#[test]
fn generic_transform_of_convex_function_is_conjugate() {
    let g = GenericTransform::new(2, "0.5*x1^2 + exp(x2)", DomainBox::uniform(2, -1.0, 1.0).unwrap()).unwrap();
    for (p1, p2) in [(0.3, 1.0f64), (-0.8, 0.5), (0.0, 2.0)] {
        let want = 0.5 * p1 * p1 + p2 * p2.ln() - p2;
        assert!((g.eval(&[p1, p2], &[]).unwrap() - want).abs() < 1e-12);
    }
}

/// Rank of a central-difference Hessian of `H` in all momenta at fixed `v2`.
fn momentum_hessian_rank(h: &MixedHamiltonian, q: &[f64], p: &[f64], v2: &[f64]) -> usize {
    let n = p.len();
    let f = |p: &[f64]| h.mixed_hamiltonian(q, p, v2).unwrap();
    let step: Vec<f64> = p.iter().map(|x| 1e-4 * (1.0 + x.abs())).collect();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = [[0.0; 2]; 2];
            for (a, si) in [1.0, -1.0].iter().enumerate() {
                for (b, sj) in [1.0, -1.0].iter().enumerate() {
                    let mut x = p.to_vec();
                    x[i] += si * step[i];
                    x[j] += sj * step[j];
                    s[a][b] = f(&x);
                }
            }
            w[(i, j)] = (s[0][0] - s[0][1] - s[1][0] + s[1][1]) / (4.0 * step[i] * step[j]);
        }
    }
    numerical_rank(&w, 1e-6)
}

#[test]
fn momentum_hessian_has_the_velocity_rank() {
    for (n, src) in CORPUS {
        let h = build(n, src);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let pt = phase_point(&h, &mut rng).unwrap();
            assert_eq!(momentum_hessian_rank(&h, &pt.q, &pt.p, &pt.v2), h.partition().k, "{src}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // L = 0.5*(a v1 + b v2)^2 + c q1 v2 has k = 1 and Psi = (b/a) p1 + c q1
    // when |a| >= |b|
    #[test]
    fn degenerate_quadratic_family(
        a in 0.5..3.0f64,
        ratio in -1.0..1.0f64,
        c in -2.0..2.0f64,
        q in prop::collection::vec(-1.0..1.0f64, 2),
        p in prop::collection::vec(-2.0..2.0f64, 2),
        v2 in -1.0..1.0f64,
    ) {
        let b = 0.9 * ratio * a;
        let src = format!("0.5*({a:e}*v1 + ({b:e})*v2)^2 + ({c:e})*q1*v2");
        let h = build(2, &src);
        prop_assert_eq!(h.partition().k, 1);
        prop_assert_eq!(&h.partition().regular, &vec![0]);
        let phi = h.phi(&q, &p).unwrap()[0];
        let want = p[1] - (b / a * p[0] + c * q[0]);
        prop_assert!((phi - want).abs() <= 1e-9 * (1.0 + want.abs()));
        let full = h.mixed_hamiltonian(&q, &p, &[v2]).unwrap();
        let h0 = h.h_zero(&q, &[p[0]]).unwrap();
        prop_assert!((full - h0 - v2 * phi).abs() <= 1e-8 * (1.0 + full.abs()));
        prop_assert!(h.clairaut_residual(&q, &p, &[v2]).unwrap() <= 1e-6);
    }
}
