//! JSON run configuration and scenario construction.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::llg::{self, DriveField, DriveTerm, ExternalField, Form, InitMode, Params, Scheme, Wave};
use crate::observation::{self, CoilSetup, Fourier, Measurements, Selection};
use crate::reduced::{DomainBall, LineSearch, Scenario, StopRule};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub nt: usize,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub terms: Vec<DriveTerm>,
}

/// Gaussian blob `amplitude · exp(-|x - center|² / (2 width²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub center: [f64; 2],
    pub width: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

/// Affine vector profile `base + x·grad_x + y·grad_y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineProfile {
    pub base: Vec3,
    #[serde(default)]
    pub grad_x: Vec3,
    #[serde(default)]
    pub grad_y: Vec3,
}

/// Transfer function coefficients; the period is the run's time horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilSpec {
    #[serde(default = "unit")]
    pub mu0: f64,
    pub concentrations: Vec<Blob>,
    pub sensitivities: Vec<AffineProfile>,
    pub transfer: Vec<TransferSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub delta_rel: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    Channels,
    Breakpoints(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub form: Form,
    #[serde(default)]
    pub projection: bool,
    #[serde(default = "approx_init")]
    pub init: InitMode,
    pub max_iter: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    /// Step scale of the all-at-once iteration.
    #[serde(default = "default_mu0")]
    pub aao_mu0: f64,
}

fn approx_init() -> InitMode {
    InitMode::Approximate
}
fn default_tau() -> f64 {
    1.5
}
fn default_mu0() -> f64 {
    1.0
}
fn default_halvings() -> u32 {
    30
}
fn default_split() -> SplitSpec {
    SplitSpec::Channels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    ReconstructReduced,
    ReconstructKaczmarz,
    ReconstructAao,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Grid,
    pub time: TimeSpec,
    pub params_true: Params,
    pub params_init: Params,
    pub ball: DomainBall,
    pub field: FieldSpec,
    pub coils: CoilSpec,
    pub noise: NoiseSpec,
    pub solver: SolverSpec,
    pub mode: Mode,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dt(&self) -> f64 {
        self.time.t_end / self.time.nt as f64
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.grid.validate()?;
        if self.time.nt < 2 || !(self.time.t_end > 0.0) {
            return cfg(format!("time: need nt >= 2 and t_end > 0, got {:?}", self.time));
        }
        self.params_true.validate().map_err(|e| Error::Config(format!("params_true: {e}")))?;
        self.params_init.validate().map_err(|e| Error::Config(format!("params_init: {e}")))?;
        DomainBall::new(self.ball.center, self.ball.radius).map_err(|e| Error::Config(format!("ball: {e}")))?;
        if !self.ball.contains(self.params_init.as_array()) {
            return cfg("params_init: outside the ball".into());
        }
        let c = &self.coils;
        if c.concentrations.is_empty() || c.sensitivities.is_empty() {
            return cfg("coils: need at least one concentration and one sensitivity".into());
        }
        if c.transfer.len() != c.sensitivities.len() {
            return cfg("coils.transfer: one transfer function per sensitivity".into());
        }
        if c.concentrations.iter().any(|b| !(b.width > 0.0) || b.amplitude < 0.0) {
            return cfg("coils.concentrations: width must be positive, amplitude non-negative".into());
        }
        if !(self.noise.delta_rel >= 0.0) {
            return cfg("noise.delta_rel must be non-negative".into());
        }
        if !(self.solver.tau >= 1.0) || !(self.solver.mu0 > 0.0) || !(self.solver.aao_mu0 > 0.0) {
            return cfg("solver: need tau >= 1 and positive step scales".into());
        }
        // the slowest admissible damping sets the step bound for every iterate
        let worst = Params { alpha_hat1: self.ball.min_alpha1(), ..self.params_true };
        for (name, p) in [("ball", worst), ("params_true", self.params_true)] {
            llg::check_stability(&self.grid, &p, self.dt())
                .map_err(|e| Error::Config(format!("time step vs {name}: {e}")))?;
        }
        if let SplitSpec::Breakpoints(b) = &self.solver.split {
            observation::time_windows(b, self.time.nt, self.dt())?;
        }
        Ok(())
    }

    pub fn drive(&self) -> DriveField {
        DriveField { period: self.time.t_end, terms: self.field.terms.clone() }
    }

    pub fn coil_setup(&self) -> Result<CoilSetup> {
        let g = self.grid;
        let conc = self
            .coils
            .concentrations
            .iter()
            .map(|b| {
                g.sample_scalar(|x, y| {
                    let r2 = (x - b.center[0]).powi(2) + (y - b.center[1]).powi(2);
                    b.amplitude * (-r2 / (2.0 * b.width * b.width)).exp()
                })
            })
            .collect();
        let sens = self
            .coils
            .sensitivities
            .iter()
            .map(|s| g.sample(|x, y| std::array::from_fn(|k| s.base[k] + x * s.grad_x[k] + y * s.grad_y[k])))
            .collect();
        let transfer = self
            .coils
            .transfer
            .iter()
            .map(|t| Fourier { period: self.time.t_end, mean: t.mean, cos: t.cos.clone(), sin: t.sin.clone() })
            .collect();
        CoilSetup::new(g, conc, sens, transfer, self.coils.mu0)
    }

    pub fn scheme(&self) -> Scheme {
        Scheme { form: self.solver.form, projection: self.solver.projection }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let field = ExternalField::Drive(self.drive());
        let h0 = field.at(&self.grid, 0, 0.0);
        let m0 = llg::stationary_init(&self.grid, &h0, self.solver.init, &self.params_true)?;
        Ok(Scenario {
            grid: self.grid,
            nt: self.time.nt,
            dt: self.dt(),
            m0,
            field,
            setup: self.coil_setup()?,
            scheme: self.scheme(),
        })
    }

    pub fn stop_rule(&self, delta: f64) -> StopRule {
        StopRule { max_iter: self.solver.max_iter, tau: self.solver.tau, delta }
    }

    pub fn line_search(&self) -> LineSearch {
        LineSearch { mu0: self.solver.mu0, max_halvings: self.solver.max_halvings }
    }

    pub fn splits(&self, setup: &CoilSetup) -> Result<Vec<Selection>> {
        match &self.solver.split {
            SplitSpec::Channels => Ok(observation::channel_split(setup)),
            SplitSpec::Breakpoints(b) => observation::time_windows(b, self.time.nt, self.dt()),
        }
    }

    /// Same scenario on a grid refined `level` times (`h/2`, `dt/4` per level).
    pub fn refined(&self, level: u32) -> RunConfig {
        let mut c = self.clone();
        for _ in 0..level {
            c.grid.nx = 2 * c.grid.nx - 1;
            c.grid.ny = 2 * c.grid.ny - 1;
            c.time.nt *= 4;
        }
        c
    }

    /// Same scenario on a grid coarsened `level` times.
    pub fn coarsened(&self, level: u32) -> Result<RunConfig> {
        let mut c = self.clone();
        for _ in 0..level {
            if !(c.grid.nx - 1).is_multiple_of(2) || !(c.grid.ny - 1).is_multiple_of(2) || !c.time.nt.is_multiple_of(4) {
                return Err(Error::Config("grid cannot be coarsened evenly".into()));
            }
            c.grid.nx = (c.grid.nx - 1) / 2 + 1;
            c.grid.ny = (c.grid.ny - 1) / 2 + 1;
            c.time.nt /= 4;
        }
        c.grid.validate()?;
        Ok(c)
    }

    /// Reference scenario: 17×17 nodes on `[0,4]²`, 512 steps on `[0,1]`, 2 blobs, 2 coils.
    pub fn desk() -> RunConfig {
        let z = [0.0; 3];
        RunConfig {
            grid: Grid { nx: 17, ny: 17, lx: 4.0, ly: 4.0 },
            time: TimeSpec { nt: 512, t_end: 1.0 },
            params_true: Params { alpha_hat1: 2.0, alpha_hat2: 0.5, m_s: 1.0 },
            params_init: Params { alpha_hat1: 1.5, alpha_hat2: 0.0, m_s: 1.0 },
            ball: DomainBall { center: [2.0, 0.0], radius: 1.5 },
            field: FieldSpec {
                terms: vec![
                    DriveTerm { base: [0.0, 0.0, 1.0], grad_x: [0.0, 0.0, 0.25], grad_y: z, wave: Wave::Const },
                    DriveTerm { base: [1.5, 0.0, 0.0], grad_x: z, grad_y: [0.25, 0.0, 0.0], wave: Wave::Cos(1) },
                    DriveTerm { base: [0.0, 1.5, 0.0], grad_x: [0.0, -0.25, 0.0], grad_y: z, wave: Wave::Sin(1) },
                ],
            },
            coils: CoilSpec {
                mu0: 1.0,
                concentrations: vec![
                    Blob { center: [1.2, 1.5], width: 0.6, amplitude: 1.0 },
                    Blob { center: [2.8, 2.6], width: 0.5, amplitude: 1.0 },
                ],
                sensitivities: vec![
                    AffineProfile { base: [0.0, 0.0, 1.0], grad_x: z, grad_y: z },
                    AffineProfile { base: [0.5, 0.0, 0.0], grad_x: [0.25, 0.0, 0.0], grad_y: z },
                ],
                transfer: vec![
                    TransferSpec { mean: 0.0, cos: vec![1.0], sin: vec![0.5] },
                    TransferSpec { mean: 0.2, cos: vec![0.0, 0.3], sin: vec![1.0] },
                ],
            },
            noise: NoiseSpec { delta_rel: 0.0, seed: 7 },
            solver: SolverSpec {
                form: Form::Inverted,
                projection: false,
                init: InitMode::Approximate,
                max_iter: 500,
                tau: 1.5,
                mu0: 1.0,
                max_halvings: 30,
                split: SplitSpec::Channels,
                aao_mu0: 1.0,
            },
            mode: Mode::ReconstructReduced,
        }
    }
}

/// White Gaussian noise scaled so that `‖noise‖ = delta_rel · ‖clean‖` exactly.
///
/// Returns the noisy data and the realized absolute level.
pub fn add_noise(clean: &Measurements, delta_rel: f64, seed: u64) -> (Measurements, f64) {
    if delta_rel == 0.0 {
        return (clean.clone(), 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = clean.zeros_like();
    for v in noise.channels.iter_mut().flatten() {
        *v = StandardNormal.sample(&mut rng);
    }
    let target = delta_rel * clean.norm();
    let noise = noise.scaled(target / noise.norm());
    let mut noisy = clean.clone();
    noisy.axpy(1.0, &noise);
    let realized = noisy.sub(clean).norm();
    (noisy, realized)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_config_is_valid_and_round_trips() {
        let c = RunConfig::desk();
        c.validate().unwrap();
        let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = RunConfig::desk();
        c.time.nt = 64;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("time step"), "{msg}");
        let mut c = RunConfig::desk();
        c.params_init.alpha_hat1 = 0.1;
        assert!(c.validate().unwrap_err().to_string().contains("params_init"));
    }

    #[test]
    fn refine_and_coarsen_are_inverse() {
        let c = RunConfig::desk();
        assert_eq!(c.refined(1).coarsened(1).unwrap(), c);
        assert_eq!(c.coarsened(1).unwrap().grid.nx, 9);
    }

    #[test]
    fn noise_hits_the_requested_level() {
        let mut m = Measurements::zeros(2, 2, 64, 1.0 / 64.0);
        for (c, tr) in m.channels.iter_mut().enumerate() {
            for (i, v) in tr.iter_mut().enumerate() {
                *v = ((c + 1) as f64 * i as f64 * 0.1).cos();
            }
        }
        let (noisy, delta) = add_noise(&m, 0.01, 3);
        assert!((noisy.sub(&m).norm() / m.norm() - 0.01).abs() < 1e-10);
        assert!((delta - 0.01 * m.norm()).abs() < 1e-12 * m.norm());
        assert_eq!(add_noise(&m, 0.01, 3).0, noisy);
        assert_eq!(add_noise(&m, 0.0, 3).0, m);
    }
}
