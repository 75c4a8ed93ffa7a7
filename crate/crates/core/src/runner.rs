//! File-level drivers used by the command line tool: simulate data, reconstruct, report.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aao::{self, AaoState};
use crate::config::{add_noise, Mode, RunConfig};
use crate::error::{Error, Result};
use crate::grid::{write_field_csv, VecField};
use crate::observation::Measurements;
use crate::reduced::{self, History, Status};

pub const CLEAN_FILE: &str = "clean.csv";
pub const NOISY_FILE: &str = "noisy.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FINAL_STATE_FILE: &str = "final_state.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub nt: usize,
    pub dt: f64,
    pub n_conc: usize,
    pub n_coils: usize,
    pub delta_rel: f64,
    pub seed: u64,
    /// Realized `‖noisy - clean‖`.
    pub delta: f64,
    pub clean_norm: f64,
    pub norm_drift: f64,
    pub params_true: [f64; 2],
    pub files: Vec<String>,
}

pub struct Simulation {
    pub clean: Measurements,
    pub noisy: Measurements,
    pub final_state: VecField,
    pub manifest: Manifest,
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let sc = cfg.scenario()?;
    let (sol, clean) = reduced::forward(&cfg.params_true, &sc)?;
    let (noisy, delta) = add_noise(&clean, cfg.noise.delta_rel, cfg.noise.seed);
    let manifest = Manifest {
        nt: sc.nt,
        dt: sc.dt,
        n_conc: clean.n_conc,
        n_coils: clean.n_coils,
        delta_rel: cfg.noise.delta_rel,
        seed: cfg.noise.seed,
        delta,
        clean_norm: clean.norm(),
        norm_drift: sol.norm_drift(),
        params_true: cfg.params_true.as_array(),
        files: [CLEAN_FILE, NOISY_FILE, FINAL_STATE_FILE].map(String::from).to_vec(),
    };
    let final_state = sol.m.frames[sc.nt].clone();
    Ok(Simulation { clean, noisy, final_state, manifest })
}

pub fn write_simulation(cfg: &RunConfig, sim: &Simulation, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    sim.clean.write_csv(BufWriter::new(File::create(out.join(CLEAN_FILE))?))?;
    sim.noisy.write_csv(BufWriter::new(File::create(out.join(NOISY_FILE))?))?;
    write_field_csv(&cfg.grid, &sim.final_state, BufWriter::new(File::create(out.join(FINAL_STATE_FILE))?))?;
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&sim.manifest)?)?;
    Ok(())
}

/// Noisy data and realized noise level from a `simulate` output directory.
pub fn read_data(dir: &Path) -> Result<(Measurements, Manifest)> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let data = Measurements::read_csv(BufReader::new(File::open(dir.join(NOISY_FILE))?))?;
    if data.nt() != manifest.nt || data.n_conc != manifest.n_conc || data.n_coils != manifest.n_coils {
        return Err(Error::Parse { what: NOISY_FILE.into(), msg: "shape disagrees with the manifest".into() });
    }
    Ok((data, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub status: Status,
    pub iterations: usize,
    pub final_alpha: [f64; 2],
    pub residual: f64,
    pub delta: f64,
    pub tau: f64,
    pub discrepancy_reached: bool,
    /// `|α̂ - α̂*| / |α̂*|` against the configured true parameters.
    pub relative_error: f64,
    pub wallclock_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pde_residual_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub norm_drift: Option<f64>,
}

pub struct Reconstruction {
    pub history: History,
    pub summary: Summary,
}

/// Runs the algorithm selected by `cfg.mode` on data with noise level `delta`.
pub fn reconstruct(cfg: &RunConfig, data: &Measurements, delta: f64) -> Result<Reconstruction> {
    cfg.validate()?;
    let sc = cfg.scenario()?;
    let stop = cfg.stop_rule(delta);
    let ls = cfg.line_search();
    let mut drift = None;
    let history = match cfg.mode {
        Mode::ReconstructReduced => reduced::landweber(data, &cfg.params_init, &sc, &cfg.ball, &stop, &ls)?,
        Mode::ReconstructKaczmarz => {
            let splits = cfg.splits(&sc.setup)?;
            let sub = vec![delta / (splits.len() as f64).sqrt(); splits.len()];
            reduced::landweber_kaczmarz(data, &cfg.params_init, &sc, &cfg.ball, &splits, &sub, &stop, &ls)?
        }
        Mode::ReconstructAao => {
            let init = AaoState::zero(&sc, cfg.params_init);
            let ls = reduced::LineSearch { mu0: cfg.solver.aao_mu0, ..ls };
            let (h, state) = aao::aao_landweber_state(data, &init, &sc, &cfg.ball, &stop, &ls)?;
            drift = Some(aao::norm_drift(&state, &sc));
            h
        }
        Mode::Simulate | Mode::Verify => {
            return Err(Error::Config(format!("mode {:?} does not select a reconstruction", cfg.mode)))
        }
    };
    let last = history.last();
    let truth = cfg.params_true.as_array();
    let a = last.alpha;
    let relative_error = ((a[0] - truth[0]).powi(2) + (a[1] - truth[1]).powi(2)).sqrt() / (truth[0].powi(2) + truth[1].powi(2)).sqrt();
    let summary = Summary {
        mode: cfg.mode,
        status: history.status,
        iterations: history.iterations(),
        final_alpha: a,
        residual: last.residual,
        delta,
        tau: stop.tau,
        discrepancy_reached: history.status == Status::Discrepancy,
        relative_error,
        wallclock_ms: last.wallclock_ms,
        pde_residual_w: last.pde_residual_w,
        norm_drift: drift,
    };
    Ok(Reconstruction { history, summary })
}

pub fn write_reconstruction(rec: &Reconstruction, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    rec.history.write_csv(BufWriter::new(File::create(out.join(HISTORY_FILE))?))?;
    fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&rec.summary)?)?;
    Ok(())
}
