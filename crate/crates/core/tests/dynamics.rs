use clairaut_core::dynamics::{
    compare_trajectories, el_rhs, ham_rhs, integrate_el, integrate_ham, time_grid, DynamicsError, HamOptions,
};
use clairaut_core::partition::partition_indices;
use clairaut_core::{DomainBox, GaugeChoice, LagrangianSystem, MixedHamiltonian, Trajectory};

fn build(n: usize, src: &str) -> MixedHamiltonian {
    let sys = LagrangianSystem::new(n, src, DomainBox::uniform(2 * n, -1.0, 1.0).unwrap()).unwrap();
    let part = partition_indices(&sys, 64, 0).unwrap();
    MixedHamiltonian::new(sys, part)
}

/// Hamiltonian run from the momenta of `(q0, (v10, C2(q0)))`, shifted by
/// `phi0` in the nonregular components.
fn matched_ham(
    h: &MixedHamiltonian,
    g: &GaugeChoice,
    q0: &[f64],
    v10: &[f64],
    phi0: f64,
    span: (f64, f64),
    dt: f64,
    options: HamOptions,
) -> Result<Trajectory, DynamicsError> {
    let part = h.partition();
    let v0 = part.merge(v10, &g.eval(q0).unwrap());
    let mut p0 = h.system().velocity_dual(q0, &v0).unwrap().gradient;
    for &i in &part.nonregular {
        p0[i] += phi0;
    }
    integrate_ham(h, g, q0, &p0, span, dt, options)
}

#[test]
fn oscillator_returns_after_one_period() {
    let h = build(1, "0.5*v1^2 - 0.5*q1^2");
    let period = 2.0 * std::f64::consts::PI;
    let traj = integrate_el(&h, &GaugeChoice::empty(1), &[1.0], &[0.0], (0.0, period), 1e-3).unwrap();
    assert_eq!(*traj.times.last().unwrap(), period);
    assert!((traj.last_q()[0] - 1.0).abs() <= 1e-6);
    assert!(traj.last_v()[0].abs() <= 1e-6);
    for (t, q) in traj.times.iter().zip(&traj.q) {
        assert!((q[0] - t.cos()).abs() <= 1e-9);
    }
}

#[test]
fn rk4_has_fourth_order_error() {
    let h = build(1, "0.5*v1^2 - 0.5*q1^2");
    let err = |dt: f64| {
        let traj = integrate_el(&h, &GaugeChoice::empty(1), &[1.0], &[0.0], (0.0, 2.0), dt).unwrap();
        (traj.last_q()[0] - 2f64.cos()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn free_singular_drift() {
    let h = build(2, "0.5*(v1+v2)^2");
    let traj = integrate_el(&h, &GaugeChoice::constant(2, &[0.0]), &[0.0, 0.0], &[1.0], (0.0, 3.0), 1e-3).unwrap();
    for (t, q) in traj.times.iter().zip(&traj.q) {
        assert!((q[0] - t).abs() <= 1e-9);
    }
    assert!(traj.max_el_i2_res() == 0.0);
}

#[test]
fn degenerate_step_is_rejected() {
    let h = build(2, "0.5*(v1+v2)^2");
    let g = GaugeChoice::constant(2, &[0.0]);
    for dt in [0.0, -1e-3, f64::NAN] {
        assert!(matches!(
            integrate_el(&h, &g, &[0.0, 0.0], &[1.0], (0.0, 1.0), dt),
            Err(DynamicsError::InvalidStep(_))
        ));
    }
}

#[test]
fn constant_gauge_hamiltonian_flow() {
    let h = build(2, "0.5*(v1+v2)^2");
    let g = GaugeChoice::constant(2, &[1.0]);
    let opts = HamOptions {
        enforce_primary: true,
        ..HamOptions::default()
    };
    let traj = integrate_ham(&h, &g, &[0.0, 0.0], &[2.0, 2.0], (0.0, 5.0), 1e-3, opts).unwrap();
    for i in 0..traj.len() {
        let t = traj.times[i];
        assert!((traj.q[i][0] - t).abs() <= 1e-9);
        assert!((traj.q[i][1] - t).abs() <= 1e-9);
        assert!((traj.p[i][0] - 2.0).abs() <= 1e-12);
        assert!(traj.phi[i][0].abs() <= 1e-9);
    }
    match integrate_ham(&h, &g, &[0.0, 0.0], &[2.0, 5.0], (0.0, 5.0), 1e-3, opts) {
        Err(DynamicsError::PrimaryViolated { phi, .. }) => assert!((phi[0] - 3.0).abs() < 1e-12),
        other => panic!("expected a constraint violation, got {other:?}"),
    }
}

#[test]
fn hamiltonian_rhs_examples() {
    let h = build(2, "0.5*(v1+v2)^2");
    let c = -0.7;
    let r = ham_rhs(&h, &GaugeChoice::constant(2, &[c]), &[0.5, 0.5], &[0.25], &[0.0], true).unwrap();
    assert!((r.qdot[0] - (0.25 - c)).abs() <= 1e-12);
    assert!((r.qdot[1] - c).abs() <= 1e-15);
    assert!(r.p1dot[0].abs() <= 1e-15);

    let h = build(2, "0.5*v1^2 + q1*v2");
    let r = ham_rhs(&h, &GaugeChoice::constant(2, &[0.2]), &[0.1, 0.4], &[-0.6], &[0.0], true).unwrap();
    assert!((r.p2dot[0] + 0.6).abs() <= 1e-12);
    assert!((r.p1dot[0] - 0.2).abs() <= 1e-12);
}

#[test]
fn el_and_hamiltonian_agree() {
    let cases: [(usize, &str, &[&str], &[f64], &[f64], f64); 4] = [
        (2, "0.5*(v1+v2)^2", &["1"], &[0.0, 0.0], &[1.0], 0.0),
        (2, "0.5*(v1+v2)^2", &["sin(q1) + 0.2*q2"], &[0.1, -0.3], &[0.6], 0.4),
        (2, "0.5*v1^2 + q1*v2", &["0.3*q1"], &[0.5, 0.0], &[-0.2], 0.0),
        (3, "0.5*(v1^2 + v2^2) + q3*(v1 - v2)", &["q1"], &[0.2, 0.1, -0.4], &[0.5, -0.3], 0.5),
    ];
    for (n, src, gauge, q0, v10, phi0) in cases {
        let h = build(n, src);
        let g = GaugeChoice::new(n, gauge).unwrap();
        let el = integrate_el(&h, &g, q0, v10, (0.0, 10.0), 1e-3).unwrap();
        let ham = matched_ham(&h, &g, q0, v10, phi0, (0.0, 10.0), 1e-3, HamOptions::default()).unwrap();
        let cmp = compare_trajectories(&el, &ham).unwrap();
        assert!(cmp.passes(1e-7), "{src}: {cmp:?}");
        // the EL side sits on the constraint surface, the Hamiltonian side keeps its offset
        assert!(el.max_phi() <= 1e-9, "{src}");
        assert!((ham.max_phi() - phi0).abs() <= 1e-9, "{src}");
    }
}

#[test]
fn dropping_r_terms_breaks_agreement() {
    let h = build(2, "0.5*(v1+v2)^2");
    let g = GaugeChoice::new(2, &["q1"]).unwrap();
    let el = integrate_el(&h, &g, &[0.0, 0.0], &[0.8], (0.0, 10.0), 1e-3).unwrap();
    let no_r = HamOptions {
        r_terms: false,
        ..HamOptions::default()
    };
    let bad = matched_ham(&h, &g, &[0.0, 0.0], &[0.8], 1.0, (0.0, 10.0), 1e-3, no_r).unwrap();
    assert!(compare_trajectories(&el, &bad).unwrap().max() > 1e-3);
    // on the constraint surface the R-terms vanish
    let on_shell = matched_ham(&h, &g, &[0.0, 0.0], &[0.8], 0.0, (0.0, 10.0), 1e-3, no_r).unwrap();
    assert!(compare_trajectories(&el, &on_shell).unwrap().passes(1e-7));
}

#[test]
fn sum_of_coordinates_is_gauge_invariant() {
    let h = build(2, "0.5*(v1+v2)^2");
    let total = 0.9;
    let runs: Vec<Trajectory> = [0.3, -0.5]
        .iter()
        .map(|&c| {
            let g = GaugeChoice::constant(2, &[c]);
            integrate_ham(&h, &g, &[0.1, 0.2], &[total, total], (0.0, 10.0), 1e-3, HamOptions::default()).unwrap()
        })
        .collect();
    for (a, b) in runs[0].q.iter().zip(&runs[1].q) {
        assert!(((a[0] + a[1]) - (b[0] + b[1])).abs() <= 1e-7);
    }
    assert!(compare_trajectories(&runs[0], &runs[1]).unwrap().q > 1.0);
}

/// Independent RK4 for `H = 0.5*|p|^2 + U(q)`.
fn classical_flow(grad_u: impl Fn(&[f64]) -> Vec<f64>, q0: &[f64], p0: &[f64], grid: &[f64]) -> Vec<Vec<f64>> {
    let n = q0.len();
    let f = |y: &[f64]| -> Vec<f64> {
        let g = grad_u(&y[..n]);
        y[n..].iter().copied().chain(g.iter().map(|x| -x)).collect()
    };
    let mut y: Vec<f64> = q0.iter().chain(p0).copied().collect();
    let mut out = vec![y.clone()];
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let shift = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
        let k1 = f(&y);
        let k2 = f(&shift(&y, &k1, h / 2.0));
        let k3 = f(&shift(&y, &k2, h / 2.0));
        let k4 = f(&shift(&y, &k3, h));
        for i in 0..2 * n {
            y[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        }
        out.push(y.clone());
    }
    out
}

#[test]
fn regular_flow_matches_classical_integrator() {
    let cases: [(usize, &str, fn(&[f64]) -> Vec<f64>); 2] = [
        (1, "0.5*v1^2 - 0.5*q1^2", |q| vec![q[0]]),
        (2, "0.5*(v1^2 + v2^2) + q1*q2", |q| vec![-q[1], -q[0]]),
    ];
    for (n, src, grad_u) in cases {
        let h = build(n, src);
        let q0 = vec![0.4; n];
        let p0: Vec<f64> = (0..n).map(|i| 0.3 - 0.5 * i as f64).collect();
        let traj = integrate_ham(&h, &GaugeChoice::empty(n), &q0, &p0, (0.0, 3.0), 1e-2, HamOptions::default()).unwrap();
        let grid = time_grid(0.0, 3.0, 1e-2).unwrap();
        let reference = classical_flow(grad_u, &q0, &p0, &grid);
        for (i, y) in reference.iter().enumerate() {
            for j in 0..n {
                assert!((traj.q[i][j] - y[j]).abs() <= 1e-9, "{src}");
                assert!((traj.p[i][j] - y[n + j]).abs() <= 1e-9, "{src}");
            }
        }
    }
}

#[test]
fn comparison_needs_matching_grids() {
    let h = build(1, "0.5*v1^2 - 0.5*q1^2");
    let g = GaugeChoice::empty(1);
    let a = integrate_el(&h, &g, &[1.0], &[0.0], (0.0, 1.0), 1e-2).unwrap();
    let b = integrate_el(&h, &g, &[1.0], &[0.0], (0.0, 1.0), 2e-2).unwrap();
    assert_eq!(compare_trajectories(&a, &a).unwrap().max(), 0.0);
    assert!(matches!(compare_trajectories(&a, &b), Err(DynamicsError::GridMismatch { .. })));
}

#[test]
fn csv_layout_is_stable() {
    let h = build(2, "0.5*(v1+v2)^2");
    let g = GaugeChoice::new(2, &["0.5*q1"]).unwrap();
    let run = || {
        let traj = integrate_el(&h, &g, &[0.1, 0.0], &[0.2], (0.0, 0.5), 0.1).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let text = run();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,q1,q2,v1,v2,p1,p2,phi_1,el_i2_res,hs3_res");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').count() == 10));
    assert_eq!(text, run());
}

#[test]
fn i2_row_flags_incompatible_gauge() {
    let h = build(2, "0.5*v1^2 + q1*v2");
    let r = el_rhs(&h, &GaugeChoice::constant(2, &[0.0]), &[0.0, 0.0], &[1.5]).unwrap();
    assert!((r.i2_residual[0] - 1.5).abs() <= 1e-15);
    let traj = integrate_el(&h, &GaugeChoice::constant(2, &[0.0]), &[0.0, 0.0], &[1.5], (0.0, 1.0), 1e-2).unwrap();
    assert!(traj.max_el_i2_res() >= 1.5);
    assert!((traj.max_hs3_res() - traj.max_el_i2_res()).abs() <= 1e-9);
}
