// Integrate the LLG equation from a field-aligned start, with and without the
// renormalization step, and report norm drift and exchange/Zeeman energy.
//
// `cargo run --release --example forward_llg`

use llg_calib::config::RunConfig;
use llg_calib::llg::{self, Scheme};

pub struct Outcome {
    pub drift_free: f64,
    pub drift_projected: f64,
    pub energies: Vec<f64>,
}

pub fn run_example() -> llg_calib::Result<Outcome> {
    let cfg = RunConfig::desk().coarsened(1)?;
    let sc = cfg.scenario()?;
    let p = cfg.params_true;
    let run = |projection| llg::solve(&sc.grid, &sc.m0, &p, &sc.field, sc.nt, sc.dt, Scheme { projection, ..sc.scheme });
    let free = run(false)?;
    let projected = run(true)?;
    let energies = (0..=sc.nt)
        .step_by(sc.nt / 8)
        .map(|n| {
            let h = sc.field.at(&sc.grid, n, n as f64 * sc.dt);
            llg::landau_energy(&sc.grid, &free.m.frames[n], &h, 0.5, 1.0, 1.0)
        })
        .collect::<llg_calib::Result<Vec<_>>>()?;
    println!("grid {}x{}, {} steps", sc.grid.nx, sc.grid.ny, sc.nt);
    println!("norm drift: free {:.3e}, projected {:.3e}", free.norm_drift(), projected.norm_drift());
    println!("energy at t = 0, T/8, ...: {energies:.4?}");
    Ok(Outcome { drift_free: free.norm_drift(), drift_projected: projected.norm_drift(), energies })
}

#[allow(dead_code)]
fn main() -> llg_calib::Result<()> {
    run_example().map(|_| ())
}
