// Reduced Landweber iteration on self-generated, noise-free data.
//
// `cargo run --release --example landweber`

use llg_calib::config::RunConfig;
use llg_calib::reduced;

pub struct Outcome {
    pub relative_error: f64,
    pub residuals: Vec<f64>,
}

pub fn run_example() -> llg_calib::Result<Outcome> {
    let cfg = RunConfig::desk().coarsened(1)?;
    let sc = cfg.scenario()?;
    let (_, y) = reduced::forward(&cfg.params_true, &sc)?;
    let mut stop = cfg.stop_rule(0.0);
    stop.max_iter = 150;
    let h = reduced::landweber(&y, &cfg.params_init, &sc, &cfg.ball, &stop, &cfg.line_search())?;
    let (a, t) = (h.final_alpha(), cfg.params_true.as_array());
    let relative_error = ((a[0] - t[0]).powi(2) + (a[1] - t[1]).powi(2)).sqrt() / t[0].hypot(t[1]);
    println!("{:?} after {} iterations: alpha = {a:?}, relative error {relative_error:.3e}", h.status, h.iterations());
    Ok(Outcome { relative_error, residuals: h.records.iter().map(|r| r.residual).collect() })
}

#[allow(dead_code)]
fn main() -> llg_calib::Result<()> {
    run_example().map(|_| ())
}
