//! Every runnable example, compiled into the test binary and executed.

mod simulate {
    include!("../examples/simulate.rs");
}
mod forward_llg {
    include!("../examples/forward_llg.rs");
}
mod adjoint_test {
    include!("../examples/adjoint_test.rs");
}
mod landweber {
    include!("../examples/landweber.rs");
}
mod kaczmarz {
    include!("../examples/kaczmarz.rs");
}
mod aao {
    include!("../examples/aao.rs");
}

#[test]
fn simulate_example_hits_the_noise_level_and_round_trips() {
    let o = simulate::run_example().unwrap();
    assert!((o.realized_rel - o.delta_rel).abs() <= 1e-10);
    assert!(o.round_trip_exact);
}

#[test]
fn forward_example_projection_keeps_unit_norm() {
    let o = forward_llg::run_example().unwrap();
    assert!(o.drift_projected <= 1e-12);
    assert!(o.drift_free > o.drift_projected);
    assert!(o.energies.iter().all(|e| e.is_finite()));
}

#[test]
fn adjoint_example_mismatch_shrinks() {
    let o = adjoint_test::run_example().unwrap();
    let (c, f) = (o.mismatches[0], o.mismatches[1]);
    assert!(f.0 < c.0 && f.1 < c.1);
    assert!(f.0 <= 1e-2 && f.1 <= 5e-2);
}

#[test]
fn landweber_example_recovers_the_coefficients() {
    let o = landweber::run_example().unwrap();
    assert!(o.relative_error <= 1e-3, "{}", o.relative_error);
    assert!(o.residuals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn kaczmarz_example_stops_by_discrepancy() {
    let o = kaczmarz::run_example().unwrap();
    assert_eq!(o.status, llg_calib::reduced::Status::Discrepancy);
    assert!(o.relative_error < 0.1);
    assert!(o.sweeps > 0 && o.sweeps <= 100);
}

#[test]
fn aao_example_decreases_the_joint_residual() {
    let o = aao::run_example().unwrap();
    assert!(o.residuals.windows(2).all(|w| w[1] < w[0]));
    assert!(o.residuals.last().unwrap() < &(0.1 * o.residuals[0]));
    assert_eq!(o.pde_residuals.len(), o.residuals.len());
    assert!(o.alpha[0] > 1.5 && o.alpha[1] > 0.0);
    assert!(o.norm_drift.is_finite());
}
