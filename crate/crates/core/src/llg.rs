//! Forward Landau-Lifshitz-Gilbert solver on a [`Grid`].
//!
//! Two algebraically equivalent right-hand sides are provided:
//!
//! * the Gilbert form `m_t = -α₁ m×(m×(Δm+h)) + α₂ m×(Δm+h)`, and
//! * the inverted form `(α̂₁ m_S² I - α̂₂ [m]ₓ) m_t = m_S² Δm + |∇m|² m + m_S² h - (m·h) m`,
//!   solved node by node with the closed-form 3×3 inverse.
//!
//! Time stepping is explicit Euler with optional renormalization onto `|m| = m_S`.
//! Rates are stored per time cell as forward differences of the stored snapshots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_sq, FieldSeries, Grid, Jacobian, VecField};
use crate::vec3::{axpy, cross, dot, norm, scale, solve_shifted_cross, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha_hat1: f64,
    pub alpha_hat2: f64,
    #[serde(default = "one")]
    pub m_s: f64,
}

fn one() -> f64 {
    1.0
}

impl Params {
    pub fn new(alpha_hat1: f64, alpha_hat2: f64) -> Result<Self> {
        Self::with_saturation(alpha_hat1, alpha_hat2, 1.0)
    }

    pub fn with_saturation(alpha_hat1: f64, alpha_hat2: f64, m_s: f64) -> Result<Self> {
        let p = Params { alpha_hat1, alpha_hat2, m_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_hat1 > 0.0 && self.alpha_hat1.is_finite()) {
            return Err(Error::Domain(format!("alpha_hat1 = {} must be positive", self.alpha_hat1)));
        }
        if !self.alpha_hat2.is_finite() || !(self.m_s > 0.0 && self.m_s.is_finite()) {
            return Err(Error::Domain("alpha_hat2 and m_s must be finite, m_s > 0".into()));
        }
        Ok(())
    }

    /// Builds `(α̂₁, α̂₂)` from the Gilbert damping/precession pair `(α₁, α₂)`.
    pub fn from_gilbert(alpha1: f64, alpha2: f64, m_s: f64) -> Result<Self> {
        let d = m_s * m_s * alpha1 * alpha1 + alpha2 * alpha2;
        Self::with_saturation(alpha1 / d, alpha2 / d, m_s)
    }

    /// The Gilbert pair `(α₁, α₂)`; the map is its own inverse.
    pub fn gilbert(&self) -> (f64, f64) {
        let d = self.m_s * self.m_s * self.alpha_hat1 * self.alpha_hat1
            + self.alpha_hat2 * self.alpha_hat2;
        (self.alpha_hat1 / d, self.alpha_hat2 / d)
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.alpha_hat1, self.alpha_hat2]
    }

    /// Same saturation, new `(α̂₁, α̂₂)`; no validation.
    pub fn with_alpha(&self, a: [f64; 2]) -> Params {
        Params { alpha_hat1: a[0], alpha_hat2: a[1], m_s: self.m_s }
    }
}

/// One additive term `(base + x·grad_x + y·grad_y) · φ(t)` of a drive field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveTerm {
    pub base: Vec3,
    #[serde(default)]
    pub grad_x: Vec3,
    #[serde(default)]
    pub grad_y: Vec3,
    #[serde(default)]
    pub wave: Wave,
}

/// Time profile of a drive term, harmonics of the base period.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wave {
    #[default]
    Const,
    Cos(u32),
    Sin(u32),
}

impl Wave {
    pub fn eval(&self, t: f64, period: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * t / period;
        match *self {
            Wave::Const => 1.0,
            Wave::Cos(k) => (k as f64 * w).cos(),
            Wave::Sin(k) => (k as f64 * w).sin(),
        }
    }
}

/// Spatially affine, time-periodic field given by its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveField {
    pub period: f64,
    pub terms: Vec<DriveTerm>,
}

impl DriveField {
    pub fn eval(&self, x: f64, y: f64, t: f64) -> Vec3 {
        let mut h = [0.0; 3];
        for term in &self.terms {
            let s = term.wave.eval(t, self.period);
            for k in 0..3 {
                h[k] += s * (term.base[k] + x * term.grad_x[k] + y * term.grad_y[k]);
            }
        }
        h
    }
}

/// External field seen by the magnetization.
#[derive(Debug, Clone, PartialEq)]
pub enum ExternalField {
    Static(VecField),
    Drive(DriveField),
    /// One frame per time step; frame `n` is used at `t_n`.
    Sampled(FieldSeries),
}

impl ExternalField {
    pub fn fill(&self, grid: &Grid, n: usize, t: f64, out: &mut VecField) {
        match self {
            ExternalField::Static(f) => out.clone_from(f),
            ExternalField::Drive(d) => {
                out.resize(grid.len(), [0.0; 3]);
                for (k, o) in out.iter_mut().enumerate() {
                    let (x, y) = grid.point(k);
                    *o = d.eval(x, y, t);
                }
            }
            ExternalField::Sampled(s) => out.clone_from(&s.frames[n]),
        }
    }

    pub fn at(&self, grid: &Grid, n: usize, t: f64) -> VecField {
        let mut out = grid.zeros();
        self.fill(grid, n, t, &mut out);
        out
    }

    pub fn is_static(&self) -> bool {
        matches!(self, ExternalField::Static(_))
    }

    pub(crate) fn check(&self, grid: &Grid, nt: usize, dt: f64) -> Result<()> {
        match self {
            ExternalField::Static(f) => grid.check(f),
            ExternalField::Drive(_) => Ok(()),
            ExternalField::Sampled(s) => {
                if s.frames.len() != nt + 1 || (s.dt - dt).abs() > 1e-12 * dt {
                    return Err(Error::Config(format!(
                        "sampled field has {} frames at dt={}, run needs {} at dt={}",
                        s.frames.len(),
                        s.dt,
                        nt + 1,
                        dt
                    )));
                }
                s.frames.iter().try_for_each(|f| grid.check(f))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// Gilbert form with `(α₁, α₂)`.
    Gilbert,
    /// Inverted form with `(α̂₁, α̂₂)`.
    #[default]
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub form: Form,
    pub projection: bool,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme { form: Form::Inverted, projection: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Approximate,
    Relaxed,
}

/// Largest admissible explicit step: `α̂₁ / λ_max(-Δ_N)`, half the sharp Euler limit.
pub fn stability_bound(grid: &Grid, p: &Params) -> f64 {
    let lam = 4.0 / (grid.hx() * grid.hx()) + 4.0 / (grid.hy() * grid.hy());
    p.alpha_hat1 / lam
}

pub fn check_stability(grid: &Grid, p: &Params, dt: f64) -> Result<()> {
    let bound = stability_bound(grid, p);
    if dt > 0.0 && dt <= bound {
        Ok(())
    } else {
        Err(Error::Stability { dt, bound })
    }
}

/// Reusable scratch for one rate evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub lap: VecField,
    pub grad: Vec<Jacobian>,
}

impl Workspace {
    pub fn new(grid: &Grid) -> Self {
        Workspace { lap: grid.zeros(), grad: vec![[[0.0; 3]; 2]; grid.len()] }
    }
}

/// Rate of the inverted form at one node.
#[inline]
pub fn inverted_rate_node(m: Vec3, lap: Vec3, gsq: f64, h: Vec3, p: &Params) -> Vec3 {
    let ms2 = p.m_s * p.m_s;
    let mh = dot(m, h);
    let mut r = [0.0; 3];
    for k in 0..3 {
        r[k] = ms2 * lap[k] + gsq * m[k] + ms2 * h[k] - mh * m[k];
    }
    solve_shifted_cross(p.alpha_hat1 * ms2, -p.alpha_hat2, m, r)
}

/// Rate of the Gilbert form at one node.
#[inline]
pub fn gilbert_rate_node(m: Vec3, lap: Vec3, h: Vec3, p: &Params) -> Vec3 {
    let (a1, a2) = p.gilbert();
    let heff = [lap[0] + h[0], lap[1] + h[1], lap[2] + h[2]];
    let mh = cross(m, heff);
    let mmh = cross(m, mh);
    [-a1 * mmh[0] + a2 * mh[0], -a1 * mmh[1] + a2 * mh[1], -a1 * mmh[2] + a2 * mh[2]]
}

/// Full-field rate `m_t` for the chosen form.
pub fn rate(grid: &Grid, m: &[Vec3], h: &[Vec3], p: &Params, form: Form, ws: &mut Workspace) -> VecField {
    grid.laplacian_into(m, &mut ws.lap);
    match form {
        Form::Inverted => {
            grid.gradient_into(m, &mut ws.grad);
            (0..grid.len())
                .map(|k| inverted_rate_node(m[k], ws.lap[k], grad_sq(&ws.grad[k]), h[k], p))
                .collect()
        }
        Form::Gilbert => (0..grid.len()).map(|k| gilbert_rate_node(m[k], ws.lap[k], h[k], p)).collect(),
    }
}

fn advance(m: &[Vec3], r: &[Vec3], dt: f64, projection: bool, m_s: f64) -> VecField {
    m.iter()
        .zip(r)
        .map(|(a, b)| {
            let v = axpy(*a, dt, *b);
            if projection {
                scale(m_s / norm(v), v)
            } else {
                v
            }
        })
        .collect()
}

/// One explicit step of the inverted form.
pub fn step_inverted(grid: &Grid, m: &[Vec3], h: &[Vec3], dt: f64, p: &Params, projection: bool) -> Result<VecField> {
    grid.check(m)?;
    grid.check(h)?;
    check_stability(grid, p, dt)?;
    let mut ws = Workspace::new(grid);
    let r = rate(grid, m, h, p, Form::Inverted, &mut ws);
    Ok(advance(m, &r, dt, projection, p.m_s))
}

/// One explicit step of the Gilbert form.
pub fn step_gilbert(grid: &Grid, m: &[Vec3], h: &[Vec3], dt: f64, p: &Params, projection: bool) -> Result<VecField> {
    grid.check(m)?;
    grid.check(h)?;
    check_stability(grid, p, dt)?;
    let mut ws = Workspace::new(grid);
    let r = rate(grid, m, h, p, Form::Gilbert, &mut ws);
    Ok(advance(m, &r, dt, projection, p.m_s))
}

#[derive(Debug, Clone)]
pub struct LlgSolution {
    pub m: FieldSeries,
    /// `rates[n] = (m_{n+1} - m_n)/dt`, attached to the cell `[t_n, t_{n+1}]`.
    pub rates: Vec<VecField>,
    pub params: Params,
    pub scheme: Scheme,
}

impl LlgSolution {
    pub fn grid(&self) -> &Grid {
        &self.m.grid
    }

    pub fn nt(&self) -> usize {
        self.m.nt()
    }

    pub fn dt(&self) -> f64 {
        self.m.dt
    }

    /// `max_n max_x ||m| - m_S|`.
    pub fn norm_drift(&self) -> f64 {
        self.m
            .frames
            .iter()
            .flatten()
            .map(|v| (norm(*v) - self.params.m_s).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates from `m0` over `nt` steps of size `dt`.
pub fn solve(
    grid: &Grid,
    m0: &[Vec3],
    p: &Params,
    h: &ExternalField,
    nt: usize,
    dt: f64,
    scheme: Scheme,
) -> Result<LlgSolution> {
    p.validate()?;
    grid.check(m0)?;
    h.check(grid, nt, dt)?;
    check_stability(grid, p, dt)?;
    if let Some(k) = m0.iter().position(|v| (norm(*v) - p.m_s).abs() > 1e-6 * p.m_s) {
        let (i, j) = grid.ij(k);
        return Err(Error::Domain(format!("initial state not normalized at node ({i},{j})")));
    }
    let mut ws = Workspace::new(grid);
    let mut hbuf = grid.zeros();
    let mut frames = Vec::with_capacity(nt + 1);
    frames.push(m0.to_vec());
    for n in 0..nt {
        h.fill(grid, n, n as f64 * dt, &mut hbuf);
        let m = &frames[n];
        let r = rate(grid, m, &hbuf, p, scheme.form, &mut ws);
        let next = advance(m, &r, dt, scheme.projection, p.m_s);
        if next.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: n + 1 });
        }
        frames.push(next);
    }
    let m = FieldSeries { grid: *grid, dt, frames };
    let rates = m.forward_differences();
    Ok(LlgSolution { m, rates, params: *p, scheme })
}

/// Initial magnetization in equilibrium with `h0`.
///
/// `Approximate` aligns with the field node by node; `Relaxed` then runs
/// projected pseudo-time steps of the Gilbert form (its rate is tangent, so it vanishes
/// exactly at stationary states) with the field frozen until `‖m_t‖ < 1e-8`.
pub fn stationary_init(grid: &Grid, h0: &[Vec3], mode: InitMode, p: &Params) -> Result<VecField> {
    grid.check(h0)?;
    let mut m = Vec::with_capacity(h0.len());
    for (k, h) in h0.iter().enumerate() {
        let n = norm(*h);
        if !(n > 0.0) {
            let (i, j) = grid.ij(k);
            return Err(Error::ZeroField { node: k, i, j });
        }
        m.push(scale(p.m_s / n, *h));
    }
    if mode == InitMode::Approximate {
        return Ok(m);
    }
    let dt = 0.9 * stability_bound(grid, p);
    let mut ws = Workspace::new(grid);
    const MAX_STEPS: usize = 2_000_000;
    for step in 0..MAX_STEPS {
        let r = rate(grid, &m, h0, p, Form::Gilbert, &mut ws);
        if grid.norm(&r) < 1e-8 {
            return Ok(m);
        }
        m = advance(&m, &r, dt, true, p.m_s);
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step });
        }
    }
    Err(Error::Solve { step: MAX_STEPS, msg: "relaxation did not reach ‖m_t‖ < 1e-8".into() })
}

/// Residual `α₁ m×(m×(Δm+h)) - α₂ m×(Δm+h)` of the stationary problem.
pub fn stationary_residual(grid: &Grid, m: &[Vec3], h: &[Vec3], p: &Params) -> Result<VecField> {
    let lap = grid.laplacian(m)?;
    grid.check(h)?;
    Ok((0..grid.len())
        .map(|k| {
            let r = gilbert_rate_node(m[k], lap[k], h[k], p);
            [-r[0], -r[1], -r[2]]
        })
        .collect())
}

/// `E = A ∫|∇m|² - μ₀ m_S ∫ h·m`.
pub fn landau_energy(grid: &Grid, m: &[Vec3], h: &[Vec3], a: f64, mu0: f64, m_s: f64) -> Result<f64> {
    grid.check(h)?;
    let g = grid.gradient(m)?;
    let s: Vec<f64> = (0..grid.len()).map(|k| a * grad_sq(&g[k]) - mu0 * m_s * dot(h[k], m[k])).collect();
    grid.integrate(&s)
}
