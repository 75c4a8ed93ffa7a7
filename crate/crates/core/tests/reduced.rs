use llg_calib::config::RunConfig;
use llg_calib::llg::{Form, Scheme};
use llg_calib::reduced::{self, DomainBall, Status};
use llg_calib::Error;

fn coarse() -> RunConfig {
    RunConfig::desk().coarsened(1).unwrap()
}

#[test]
fn linearized_state_matches_central_differences() {
    let cfg = coarse();
    let sc = cfg.scenario().unwrap();
    let p = cfg.params_true;
    let (base, _) = reduced::forward(&p, &sc).unwrap();
    let beta = [0.4, -0.9];
    let (u, _) = reduced::solve_linearized(beta, &base, &sc).unwrap();
    let a = p.as_array();
    let eps = 1e-4;
    let (sp, _) = reduced::forward(&p.with_alpha([a[0] + eps * beta[0], a[1] + eps * beta[1]]), &sc).unwrap();
    let (sm, _) = reduced::forward(&p.with_alpha([a[0] - eps * beta[0], a[1] - eps * beta[1]]), &sc).unwrap();
    let mut fd = sp.m.clone();
    fd.axpy(-1.0, &sm.m);
    let fd = fd.scaled(0.5 / eps);
    let mut d = fd.clone();
    d.axpy(-1.0, &u);
    assert!(d.norm() <= 1e-7 * u.norm(), "{}", d.norm() / u.norm());
}

#[test]
fn tangent_gradient_matches_finite_differences_of_the_misfit() {
    let cfg = coarse();
    let sc = cfg.scenario().unwrap();
    let (_, y) = reduced::forward(&cfg.params_true, &sc).unwrap();
    let p = cfg.params_init;
    let (base, v) = reduced::forward(&p, &sc).unwrap();
    let r = v.sub(&y);
    let j = |a: [f64; 2]| {
        let (_, v) = reduced::forward(&p.with_alpha(a), &sc).unwrap();
        0.5 * v.sub(&y).inner(&v.sub(&y))
    };
    let a = p.as_array();
    let eps = 1e-5;
    for i in 0..2 {
        let mut e = [0.0; 2];
        e[i] = 1.0;
        let tangent = reduced::apply_fprime(e, &base, &sc).unwrap().inner(&r);
        let (mut ap, mut am) = (a, a);
        ap[i] += eps;
        am[i] -= eps;
        let fd = (j(ap) - j(am)) / (2.0 * eps);
        assert!((tangent - fd).abs() <= 1e-6 * fd.abs(), "component {i}: {tangent} vs {fd}");
    }
}

#[test]
fn adjoint_gradient_converges_to_the_tangent_gradient() {
    let desk = RunConfig::desk();
    let mut gaps = vec![];
    for cfg in [desk.coarsened(2).unwrap(), desk.coarsened(1).unwrap(), desk] {
        let sc = cfg.scenario().unwrap();
        let (_, y) = reduced::forward(&cfg.params_true, &sc).unwrap();
        let (base, v) = reduced::forward(&cfg.params_init, &sc).unwrap();
        let r = v.sub(&y);
        let g = reduced::gradient(&r, &base, &sc).unwrap();
        let t = [
            reduced::apply_fprime([1.0, 0.0], &base, &sc).unwrap().inner(&r),
            reduced::apply_fprime([0.0, 1.0], &base, &sc).unwrap().inner(&r),
        ];
        gaps.push(((g[0] - t[0]).powi(2) + (g[1] - t[1]).powi(2)).sqrt() / t[0].hypot(t[1]));
    }
    assert!(gaps[2] <= 1e-2, "{gaps:?}");
    for w in gaps.windows(2) {
        assert!(w[0] / w[1] >= 2.0, "{gaps:?}");
    }
}

#[test]
fn starting_at_the_truth_needs_no_iterations() {
    let mut cfg = coarse();
    cfg.params_init = cfg.params_true;
    let sc = cfg.scenario().unwrap();
    let (_, y) = reduced::forward(&cfg.params_true, &sc).unwrap();
    let h = reduced::landweber(&y, &cfg.params_init, &sc, &cfg.ball, &cfg.stop_rule(0.0), &cfg.line_search()).unwrap();
    assert_eq!(h.iterations(), 0);
    assert_eq!(h.status, Status::Discrepancy);
    assert_eq!(h.last().residual, 0.0);
}

#[test]
fn accepted_steps_never_increase_the_residual() {
    let cfg = coarse();
    let sc = cfg.scenario().unwrap();
    let (_, clean) = reduced::forward(&cfg.params_true, &sc).unwrap();
    let (y, delta) = llg_calib::config::add_noise(&clean, 2e-2, 9);
    let h = reduced::landweber(&y, &cfg.params_init, &sc, &cfg.ball, &cfg.stop_rule(delta), &cfg.line_search()).unwrap();
    assert_eq!(h.status, Status::Discrepancy);
    assert!(h.last().residual <= cfg.solver.tau * delta);
    assert!(h.records.windows(2).all(|w| w[1].residual < w[0].residual));
    let prev = &h.records[h.records.len() - 2];
    assert!(prev.residual > cfg.solver.tau * delta);
}

#[test]
fn derivatives_refuse_projected_schemes() {
    let mut sc = coarse().scenario().unwrap();
    sc.scheme = Scheme { form: Form::Inverted, projection: true };
    let p = coarse().params_true;
    let (base, _) = reduced::forward(&p, &sc).unwrap();
    assert!(matches!(reduced::solve_linearized([1.0, 0.0], &base, &sc), Err(Error::Config(_))));
}

#[test]
fn ball_projection_lands_inside_and_keeps_interior_points() {
    let ball = DomainBall::new([2.0, 0.0], 1.5).unwrap();
    assert_eq!(ball.project([2.3, 0.4]), [2.3, 0.4]);
    for a in [[10.0, 3.0], [-5.0, 0.0], [2.0, -8.0]] {
        let q = ball.project(a);
        assert!(ball.contains(q), "{q:?}");
        assert!(q[0] >= ball.min_alpha1());
    }
}
