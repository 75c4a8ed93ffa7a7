// All-at-once Landweber: the trajectory and the coefficients are updated jointly,
// starting from the frozen initial state.
//
// `cargo run --release --example aao`

use llg_calib::aao::{self, AaoState};
use llg_calib::config::RunConfig;
use llg_calib::reduced;

pub struct Outcome {
    pub residuals: Vec<f64>,
    pub pde_residuals: Vec<f64>,
    pub alpha: [f64; 2],
    pub norm_drift: f64,
}

pub fn run_example() -> llg_calib::Result<Outcome> {
    let cfg = RunConfig::desk().coarsened(1)?;
    let sc = cfg.scenario()?;
    let (_, y) = reduced::forward(&cfg.params_true, &sc)?;
    let mut stop = cfg.stop_rule(0.0);
    stop.max_iter = 40;
    let init = AaoState::zero(&sc, cfg.params_init);
    let (h, state) = aao::aao_landweber_state(&y, &init, &sc, &cfg.ball, &stop, &cfg.line_search())?;
    for r in h.records.iter().step_by(10) {
        println!(
            "iter {:>3}: alpha ({:.4}, {:.4}), residual {:.3e}, pde residual {:.3e}",
            r.iter,
            r.alpha[0],
            r.alpha[1],
            r.residual,
            r.pde_residual_w.unwrap_or(f64::NAN)
        );
    }
    let norm_drift = aao::norm_drift(&state, &sc);
    println!("{:?}; max ||m| - 1| of the iterate {norm_drift:.3e}", h.status);
    Ok(Outcome {
        residuals: h.records.iter().map(|r| r.residual).collect(),
        pde_residuals: h.records.iter().filter_map(|r| r.pde_residual_w).collect(),
        alpha: h.final_alpha(),
        norm_drift,
    })
}

#[allow(dead_code)]
fn main() -> llg_calib::Result<()> {
    run_example().map(|_| ())
}
