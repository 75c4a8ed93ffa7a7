// Generate clean and noisy voltages for a coarse copy of the desk scenario and
// read them back from disk.
//
// `cargo run --release --example simulate`

use llg_calib::config::RunConfig;
use llg_calib::runner;

pub struct Outcome {
    pub delta_rel: f64,
    pub realized_rel: f64,
    pub round_trip_exact: bool,
}

pub fn run_example() -> llg_calib::Result<Outcome> {
    let mut cfg = RunConfig::desk().coarsened(1)?;
    cfg.noise.delta_rel = 1e-2;
    let sim = runner::simulate(&cfg)?;
    let dir = std::env::temp_dir().join(format!("llg-calib-simulate-{}", std::process::id()));
    runner::write_simulation(&cfg, &sim, &dir)?;
    let (noisy, manifest) = runner::read_data(&dir)?;
    std::fs::remove_dir_all(&dir)?;
    let realized_rel = sim.noisy.sub(&sim.clean).norm() / sim.clean.norm();
    println!(
        "{} channels x {} samples, delta_rel {:.3e}, realized {:.3e}, drift {:.2e}",
        noisy.channels.len(),
        noisy.nt() + 1,
        cfg.noise.delta_rel,
        realized_rel,
        manifest.norm_drift
    );
    Ok(Outcome { delta_rel: cfg.noise.delta_rel, realized_rel, round_trip_exact: noisy == sim.noisy })
}

#[allow(dead_code)]
fn main() -> llg_calib::Result<()> {
    run_example().map(|_| ())
}
