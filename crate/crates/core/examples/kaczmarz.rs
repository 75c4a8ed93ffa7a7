// Landweber-Kaczmarz sweeps, one sub-step per receive channel, on 1 % noisy data
// with the discrepancy principle applied per channel.
//
// `cargo run --release --example kaczmarz`

use llg_calib::config::{add_noise, RunConfig};
use llg_calib::reduced;

pub struct Outcome {
    pub status: reduced::Status,
    pub sweeps: usize,
    pub relative_error: f64,
}

pub fn run_example() -> llg_calib::Result<Outcome> {
    let cfg = RunConfig::desk().coarsened(1)?;
    let sc = cfg.scenario()?;
    let (_, clean) = reduced::forward(&cfg.params_true, &sc)?;
    let (y, delta) = add_noise(&clean, 1e-2, 3);
    let splits = cfg.splits(&sc.setup)?;
    let sub = vec![delta / (splits.len() as f64).sqrt(); splits.len()];
    let mut stop = cfg.stop_rule(delta);
    stop.max_iter = 100;
    let h = reduced::landweber_kaczmarz(&y, &cfg.params_init, &sc, &cfg.ball, &splits, &sub, &stop, &cfg.line_search())?;
    let (a, t) = (h.final_alpha(), cfg.params_true.as_array());
    let relative_error = ((a[0] - t[0]).powi(2) + (a[1] - t[1]).powi(2)).sqrt() / t[0].hypot(t[1]);
    println!(
        "{} splits, {:?} after {} sweeps: alpha = {a:?}, relative error {relative_error:.3e}",
        splits.len(),
        h.status,
        h.iterations()
    );
    Ok(Outcome { status: h.status, sweeps: h.iterations(), relative_error })
}

#[allow(dead_code)]
fn main() -> llg_calib::Result<()> {
    run_example().map(|_| ())
}
