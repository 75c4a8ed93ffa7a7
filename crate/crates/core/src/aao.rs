//! All-at-once formulation: the state `m = m₀ + m̂` stays an unknown next to `α̂`.
//!
//! `𝔽(m̂, α̂) = (𝔽₀, 𝔽_obs)` with the LLG residual
//!
//! `𝔽₀ = α̂₁m̂_t - Δ(m₀+m̂) - α̂₂(m₀+m̂)×m̂_t - |∇(m₀+m̂)|²(m₀+m̂) - h + ((m₀+m̂)·h)(m₀+m̂)`
//!
//! measured in `W = H¹(0,T;L²)*` through the time integral operators `I₁`, `I₂`, and
//! `𝔽_obs = K m̂_t`. Adjoints map into `U` (inner product with `Δu`, `u_t` and `∇u(T)`)
//! by one backward and one forward implicit-Euler heat solve.
//!
//! Time convention: `m̂_t` at node `n < nt` is the forward difference of cell `n`;
//! node `nt` reuses the last cell.

use std::time::Instant;

use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::na::DMatrix;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::grid::{grad_pair, grad_sq, grad_t_grad, time_weights, FieldSeries, Grid, Jacobian, VecField};
use crate::llg::Params;
use crate::observation::{self, Measurements};
use crate::reduced::{DomainBall, History, IterRecord, LineSearch, Scenario, Status, StopRule};
use crate::vec3::{cross, dot, Vec3};

#[derive(Debug, Clone)]
pub struct AaoState {
    /// Deviation from the initial state; `m_hat.frames[0]` is zero.
    pub m_hat: FieldSeries,
    pub params: Params,
}

impl AaoState {
    pub fn new(m_hat: FieldSeries, params: Params) -> Result<Self> {
        if m_hat.frames[0].iter().flatten().any(|v| *v != 0.0) {
            return Err(Error::Domain("m_hat must vanish at t = 0".into()));
        }
        Ok(AaoState { m_hat, params })
    }

    /// `m̂ = 0`.
    pub fn zero(sc: &Scenario, params: Params) -> Self {
        AaoState { m_hat: FieldSeries::zeros(sc.grid, sc.nt, sc.dt), params }
    }

    /// `m̂ = m - m₀` for a full trajectory `m`.
    pub fn from_trajectory(m: &FieldSeries, params: Params) -> Self {
        let m0 = m.frames[0].clone();
        let mut m_hat = m.clone();
        for f in &mut m_hat.frames {
            for (v, a) in f.iter_mut().zip(&m0) {
                *v = [v[0] - a[0], v[1] - a[1], v[2] - a[2]];
            }
        }
        AaoState { m_hat, params }
    }
}

#[derive(Debug, Clone)]
pub struct AaoResidual {
    pub pde: FieldSeries,
    pub obs: Measurements,
}

impl AaoResidual {
    pub fn axpy(&mut self, s: f64, other: &AaoResidual) {
        self.pde.axpy(s, &other.pde);
        self.obs.axpy(s, &other.obs);
    }

    /// `‖·‖²_W + ‖·‖²_Y`.
    pub fn norm(&self) -> f64 {
        (w_inner(&self.pde, &self.pde) + self.obs.inner(&self.obs)).sqrt()
    }

    pub fn inner(&self, other: &AaoResidual) -> f64 {
        w_inner(&self.pde, &other.pde) + self.obs.inner(&other.obs)
    }
}

/// Node rates: cell `n` for `n < nt`, cell `nt-1` at `nt`.
fn node_rates(s: &FieldSeries) -> (Vec<VecField>, Vec<VecField>) {
    let cells = s.forward_differences();
    let mut nodes = cells.clone();
    nodes.push(cells[cells.len() - 1].clone());
    (cells, nodes)
}

fn full_state(sc: &Scenario, m_hat: &FieldSeries) -> Vec<VecField> {
    m_hat
        .frames
        .iter()
        .map(|f| f.iter().zip(&sc.m0).map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]).collect())
        .collect()
}

struct Trajectory {
    m: Vec<VecField>,
    cells: Vec<VecField>,
    rates: Vec<VecField>,
    lap: Vec<VecField>,
    grad: Vec<Vec<Jacobian>>,
    h: Vec<VecField>,
}

fn trajectory(sc: &Scenario, m_hat: &FieldSeries) -> Result<Trajectory> {
    let g = &sc.grid;
    if m_hat.frames.len() != sc.nt + 1 {
        return Err(Error::Shape { expected: sc.nt + 1, found: m_hat.frames.len() });
    }
    m_hat.frames.iter().try_for_each(|f| g.check(f))?;
    let m = full_state(sc, m_hat);
    let (cells, rates) = node_rates(m_hat);
    let lap = m.iter().map(|f| g.laplacian(f)).collect::<Result<Vec<_>>>()?;
    let grad = m.iter().map(|f| g.gradient(f)).collect::<Result<Vec<_>>>()?;
    let h = (0..=sc.nt).map(|n| sc.field.at(g, n, n as f64 * sc.dt)).collect();
    Ok(Trajectory { m, cells, rates, lap, grad, h })
}

/// `𝔽(m̂, α̂)`; the observation part is `K m̂_t` without subtracting data.
pub fn residual(state: &AaoState, sc: &Scenario) -> Result<AaoResidual> {
    let tr = trajectory(sc, &state.m_hat)?;
    let (a1, a2) = (state.params.alpha_hat1, state.params.alpha_hat2);
    let frames = (0..=sc.nt)
        .map(|n| {
            (0..sc.grid.len())
                .map(|k| {
                    let (m, d, h) = (tr.m[n][k], tr.rates[n][k], tr.h[n][k]);
                    let gsq = grad_sq(&tr.grad[n][k]);
                    let mxd = cross(m, d);
                    let mh = dot(m, h);
                    std::array::from_fn(|c| {
                        a1 * d[c] - tr.lap[n][k][c] - a2 * mxd[c] - gsq * m[c] - h[c] + mh * m[c]
                    })
                })
                .collect()
        })
        .collect();
    let obs = observation::apply_k(&sc.setup, &tr.cells, sc.dt)?;
    Ok(AaoResidual { pde: FieldSeries { grid: sc.grid, dt: sc.dt, frames }, obs })
}

/// `𝔽′(m̂, α̂)(u, β)`.
pub fn apply_derivative(state: &AaoState, u: &FieldSeries, beta: [f64; 2], sc: &Scenario) -> Result<AaoResidual> {
    if u.frames[0].iter().flatten().any(|v| *v != 0.0) {
        return Err(Error::Domain("direction must vanish at t = 0".into()));
    }
    let tr = trajectory(sc, &state.m_hat)?;
    let g = &sc.grid;
    let (a1, a2) = (state.params.alpha_hat1, state.params.alpha_hat2);
    let (ucells, urates) = node_rates(u);
    let frames = (0..=sc.nt)
        .map(|n| {
            let lap_u = g.laplacian(&u.frames[n])?;
            let grad_u = g.gradient(&u.frames[n])?;
            Ok((0..g.len())
                .map(|k| {
                    let (m, d, h) = (tr.m[n][k], tr.rates[n][k], tr.h[n][k]);
                    let (uk, e) = (u.frames[n][k], urates[n][k]);
                    let mxd = cross(m, d);
                    let uxd = cross(uk, d);
                    let mxe = cross(m, e);
                    let pair = 2.0 * grad_pair(&tr.grad[n][k], &grad_u[k]);
                    let gsq = grad_sq(&tr.grad[n][k]);
                    let (mh, uh) = (dot(m, h), dot(uk, h));
                    std::array::from_fn(|c| {
                        beta[0] * d[c] - beta[1] * mxd[c] + a1 * e[c] - lap_u[k][c] - a2 * uxd[c] - a2 * mxe[c]
                            - pair * m[c]
                            - gsq * uk[c]
                            + mh * uk[c]
                            + uh * m[c]
                    })
                })
                .collect())
        })
        .collect::<Result<Vec<VecField>>>()?;
    let obs = observation::apply_k(&sc.setup, &ucells, sc.dt)?;
    Ok(AaoResidual { pde: FieldSeries { grid: *g, dt: sc.dt, frames }, obs })
}

/// Cumulative trapezoid integrals `C_n = ∫₀^{t_n} w` and `S_n = ∫₀^{t_n} s w(s) ds`.
fn cumulative(w: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let mut c = vec![0.0; n];
    let mut s = vec![0.0; n];
    for i in 1..n {
        let (t0, t1) = ((i - 1) as f64 * dt, i as f64 * dt);
        c[i] = c[i - 1] + 0.5 * dt * (w[i - 1] + w[i]);
        s[i] = s[i - 1] + 0.5 * dt * (t0 * w[i - 1] + t1 * w[i]);
    }
    (c, s)
}

/// `I₁[w](t) = ∫₀ᵗ w - (1/T) ∫₀ᵀ (T-s) w(s) ds`, trapezoid rule.
pub fn i1(w: &[f64], dt: f64) -> Vec<f64> {
    let (c, s) = cumulative(w, dt);
    let nt = w.len() - 1;
    let t_end = nt as f64 * dt;
    let q = t_end * c[nt] - s[nt];
    c.iter().map(|ci| ci - q / t_end).collect()
}

/// `I₂[w](t) = -∫₀ᵗ (t-s) w(s) ds + (t/T) ∫₀ᵀ (T-s) w(s) ds`; vanishes at both ends.
pub fn i2(w: &[f64], dt: f64) -> Vec<f64> {
    let (c, s) = cumulative(w, dt);
    let nt = w.len() - 1;
    let t_end = nt as f64 * dt;
    let q = t_end * c[nt] - s[nt];
    (0..=nt)
        .map(|i| {
            let t = i as f64 * dt;
            -(t * c[i] - s[i]) + (t / t_end) * q
        })
        .collect()
}

fn field_lin(a: VecField, p: f64, x: &VecField, q: f64, y: &VecField) -> VecField {
    a.iter()
        .zip(x)
        .zip(y)
        .map(|((a, x), y)| std::array::from_fn(|c| a[c] + p * x[c] + q * y[c]))
        .collect()
}

fn cumulative_field(w: &FieldSeries) -> (Vec<VecField>, Vec<VecField>) {
    let n = w.frames.len();
    let dt = w.dt;
    let mut c = vec![w.grid.zeros(); n];
    let mut s = vec![w.grid.zeros(); n];
    for i in 1..n {
        let (t0, t1) = ((i - 1) as f64 * dt, i as f64 * dt);
        c[i] = field_lin(c[i - 1].clone(), 0.5 * dt, &w.frames[i - 1], 0.5 * dt, &w.frames[i]);
        s[i] = field_lin(s[i - 1].clone(), 0.5 * dt * t0, &w.frames[i - 1], 0.5 * dt * t1, &w.frames[i]);
    }
    (c, s)
}

/// `I₁` applied node- and component-wise to a field series.
pub fn i1_field(w: &FieldSeries) -> FieldSeries {
    let (c, s) = cumulative_field(w);
    let nt = w.nt();
    let t_end = nt as f64 * w.dt;
    let q: VecField = c[nt].iter().zip(&s[nt]).map(|(a, b)| std::array::from_fn(|k| t_end * a[k] - b[k])).collect();
    let frames = c
        .iter()
        .map(|ci| ci.iter().zip(&q).map(|(a, b)| std::array::from_fn(|k| a[k] - b[k] / t_end)).collect())
        .collect();
    FieldSeries { grid: w.grid, dt: w.dt, frames }
}

/// `I₂` applied node- and component-wise to a field series.
pub fn i2_field(w: &FieldSeries) -> FieldSeries {
    let (c, s) = cumulative_field(w);
    let nt = w.nt();
    let t_end = nt as f64 * w.dt;
    let q: VecField = c[nt].iter().zip(&s[nt]).map(|(a, b)| std::array::from_fn(|k| t_end * a[k] - b[k])).collect();
    let frames = (0..=nt)
        .map(|i| {
            let t = i as f64 * w.dt;
            (0..w.grid.len())
                .map(|n| std::array::from_fn(|k| -(t * c[i][n][k] - s[i][n][k]) + (t / t_end) * q[n][k]))
                .collect()
        })
        .collect();
    FieldSeries { grid: w.grid, dt: w.dt, frames }
}

/// `(w₁, w₂)_W = ∫₀ᵀ ∫_Ω I₁[w₁]·I₁[w₂]`.
pub fn w_inner(a: &FieldSeries, b: &FieldSeries) -> f64 {
    i1_field(a).inner(&i1_field(b))
}

/// `(u₁, u₂)_U = ∬ Δu₁·Δu₂ + u₁_t·u₂_t + ∫ ∇u₁(T):∇u₂(T)`.
pub fn u_inner(a: &FieldSeries, b: &FieldSeries) -> f64 {
    let g = &a.grid;
    let nt = a.nt();
    let w = time_weights(nt, a.dt);
    let mut s = 0.0;
    for n in 0..=nt {
        let la = g.laplacian(&a.frames[n]).expect("series on its grid");
        let lb = g.laplacian(&b.frames[n]).expect("series on its grid");
        s += w[n] * g.inner(&la, &lb);
    }
    let (ca, cb) = (a.forward_differences(), b.forward_differences());
    s += crate::grid::cell_inner(g, a.dt, &ca, &cb);
    let ga = g.gradient(&a.frames[nt]).expect("series on its grid");
    let gb = g.gradient(&b.frames[nt]).expect("series on its grid");
    let pairs: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| grad_pair(x, y)).collect();
    s + g.integrate(&pairs).expect("series on its grid")
}

/// Factorized `I - dt·Δ_N` for implicit Euler heat steps.
pub struct HeatSolver {
    grid: Grid,
    weights: Vec<f64>,
    chol: CscCholesky<f64>,
}

impl HeatSolver {
    /// Factorizes `W (I - dt Δ_N)`, symmetric positive definite for trapezoid weights `W`.
    pub fn new(grid: &Grid, dt: f64) -> Result<Self> {
        let n = grid.len();
        let w = grid.weights();
        let (nx, ny) = (grid.nx, grid.ny);
        let (ix2, iy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
        let mut coo = CooMatrix::new(n, n);
        for j in 0..ny {
            for i in 0..nx {
                let r = grid.index(i, j);
                let mut diag = 1.0 + dt * 2.0 * (ix2 + iy2);
                let mut push = |c: usize, v: f64| coo.push(r, c, -dt * v * w[r]);
                let xs = if i == 0 { [1, 1] } else if i == nx - 1 { [nx - 2, nx - 2] } else { [i - 1, i + 1] };
                let ys = if j == 0 { [1, 1] } else if j == ny - 1 { [ny - 2, ny - 2] } else { [j - 1, j + 1] };
                for ii in xs {
                    push(grid.index(ii, j), ix2);
                }
                for jj in ys {
                    push(grid.index(i, jj), iy2);
                }
                diag *= w[r];
                coo.push(r, r, diag);
            }
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).map_err(|e| Error::Solve { step: 0, msg: format!("{e:?}") })?;
        Ok(HeatSolver { grid: *grid, weights: w, chol })
    }

    /// Solves `(I - dt Δ_N) x = rhs`.
    pub fn solve(&self, rhs: &[Vec3]) -> VecField {
        let n = self.grid.len();
        let mut b = DMatrix::from_fn(n, 3, |r, c| self.weights[r] * rhs[r][c]);
        self.chol.solve_mut(&mut b);
        (0..n).map(|r| [b[(r, 0)], b[(r, 1)], b[(r, 2)]]).collect()
    }
}

/// Solves `-v_t - Δv = f, v(T) = g`, then `z_t - Δz = v, z(0) = 0`; returns `z`.
///
/// For every `u` with `u(0) = 0` this gives `(z, u)_U = ∬ f·u + ∫ g·u(T)` up to
/// discretization error.
pub fn auxiliary_solve(f: &FieldSeries, g: &[Vec3], heat: &HeatSolver) -> Result<FieldSeries> {
    let nt = f.nt();
    let dt = f.dt;
    let grid = f.grid;
    grid.check(g)?;
    let mut v = vec![grid.zeros(); nt + 1];
    v[nt] = g.to_vec();
    for n in (0..nt).rev() {
        let rhs: VecField =
            v[n + 1].iter().zip(&f.frames[n]).map(|(a, b)| std::array::from_fn(|c| a[c] + dt * b[c])).collect();
        v[n] = heat.solve(&rhs);
        if v[n].iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Solve { step: n, msg: "backward heat solve produced non-finite values".into() });
        }
    }
    let mut z = vec![grid.zeros(); nt + 1];
    for n in 0..nt {
        let rhs: VecField =
            z[n].iter().zip(&v[n + 1]).map(|(a, b)| std::array::from_fn(|c| a[c] + dt * b[c])).collect();
        z[n + 1] = heat.solve(&rhs);
        if z[n + 1].iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Solve { step: n + 1, msg: "forward heat solve produced non-finite values".into() });
        }
    }
    Ok(FieldSeries { grid, dt, frames: z })
}

/// Source `f^y` and final value `g^y_T` of the PDE-block adjoint for `y = I₂[y_w]`,
/// plus the parameter components `(∬ m̂_t·y, -∬ (m×m̂_t)·y)`.
pub fn pde_adjoint_data(y_w: &FieldSeries, state: &AaoState, sc: &Scenario) -> Result<(FieldSeries, VecField, [f64; 2])> {
    let tr = trajectory(sc, &state.m_hat)?;
    let g = &sc.grid;
    let (a1, a2) = (state.params.alpha_hat1, state.params.alpha_hat2);
    let y = i2_field(y_w);
    let y_t = i1_field(y_w).scaled(-1.0);
    let mut frames = Vec::with_capacity(sc.nt + 1);
    for n in 0..=sc.nt {
        let lap_y = g.laplacian(&y.frames[n])?;
        let grad_y = g.gradient(&y.frames[n])?;
        frames.push(
            (0..g.len())
                .map(|k| {
                    let (m, d, h) = (tr.m[n][k], tr.rates[n][k], tr.h[n][k]);
                    let (yk, ytk) = (y.frames[n][k], y_t.frames[n][k]);
                    let gm = &tr.grad[n][k];
                    let dxy = cross(d, yk);
                    let ytxm = cross(ytk, m);
                    let yxd = cross(yk, d);
                    let my = dot(m, yk);
                    let a = grad_t_grad(gm, &grad_y[k], m);
                    let b = grad_t_grad(gm, gm, yk);
                    let gsq = grad_sq(gm);
                    let mh = dot(m, h);
                    std::array::from_fn(|c| {
                        -a1 * ytk[c] - lap_y[k][c] - a2 * dxy[c] + a2 * ytxm[c] + a2 * yxd[c]
                            + 2.0 * my * tr.lap[n][k][c]
                            + 2.0 * a[c]
                            + 2.0 * b[c]
                            - gsq * yk[c]
                            + mh * yk[c]
                            + my * h[c]
                    })
                })
                .collect::<VecField>(),
        );
    }
    let nt = sc.nt;
    let g_t: VecField = (0..g.len())
        .map(|k| {
            let yk = y.frames[nt][k];
            let yxm = cross(yk, tr.m[nt][k]);
            std::array::from_fn(|c| a1 * yk[c] - a2 * yxm[c])
        })
        .collect();
    let w = time_weights(nt, sc.dt);
    let mut gamma = [0.0; 2];
    for n in 0..=nt {
        let mxd: VecField = tr.m[n].iter().zip(&tr.rates[n]).map(|(a, b)| cross(*a, *b)).collect();
        gamma[0] += w[n] * g.inner(&tr.rates[n], &y.frames[n]);
        gamma[1] -= w[n] * g.inner(&mxd, &y.frames[n]);
    }
    Ok((FieldSeries { grid: *g, dt: sc.dt, frames }, g_t, gamma))
}

/// `(∂𝔽₀/∂m̂)* y_w` and `(∂𝔽₀/∂α̂)* y_w`.
pub fn adjoint_pde_block(y_w: &FieldSeries, state: &AaoState, sc: &Scenario, heat: &HeatSolver) -> Result<(FieldSeries, [f64; 2])> {
    let (f, g, gamma) = pde_adjoint_data(y_w, state, sc)?;
    Ok((auxiliary_solve(&f, &g, heat)?, gamma))
}

/// `(∂𝔽_obs/∂m̂)* y_obs`, sources `f = K̃ y_obs`, `g = K̃_T y_obs`.
pub fn adjoint_obs_block(y_obs: &Measurements, sc: &Scenario, heat: &HeatSolver) -> Result<FieldSeries> {
    let f = observation::apply_ktilde(&sc.setup, y_obs)?;
    let g = observation::apply_ktilde_final(&sc.setup, y_obs)?;
    auxiliary_solve(&f, &g, heat)
}

/// `𝔽′(m̂, α̂)* (y_w, y_obs)` in `U × ℝ²`.
pub fn apply_adjoint(r: &AaoResidual, state: &AaoState, sc: &Scenario, heat: &HeatSolver) -> Result<(FieldSeries, [f64; 2])> {
    let (mut z, gamma) = adjoint_pde_block(&r.pde, state, sc, heat)?;
    let zo = adjoint_obs_block(&r.obs, sc, heat)?;
    z.axpy(1.0, &zo);
    Ok((z, gamma))
}

/// `max ||m₀ + m̂| - m_S|` over all nodes; the iteration does not enforce the unit norm.
pub fn norm_drift(state: &AaoState, sc: &Scenario) -> f64 {
    full_state(sc, &state.m_hat)
        .iter()
        .flatten()
        .map(|v| (crate::vec3::norm(*v) - state.params.m_s).abs())
        .fold(0.0, f64::max)
}

/// Joint Landweber iteration on `(m̂, α̂)` for `𝔽(m̂, α̂) = (0, y)`.
///
/// The step is backtracked on `‖𝔽₀‖²_W + ‖𝔽_obs - y‖²_Y`; `α̂` is kept in the ball,
/// `m̂` is not projected.
pub fn aao_landweber(
    y: &Measurements,
    init: &AaoState,
    sc: &Scenario,
    ball: &DomainBall,
    stop: &StopRule,
    ls: &LineSearch,
) -> Result<History> {
    aao_landweber_state(y, init, sc, ball, stop, ls).map(|(h, _)| h)
}

/// [`aao_landweber`] that also returns the final iterate.
pub fn aao_landweber_state(
    y: &Measurements,
    init: &AaoState,
    sc: &Scenario,
    ball: &DomainBall,
    stop: &StopRule,
    ls: &LineSearch,
) -> Result<(History, AaoState)> {
    if !ball.contains(init.params.as_array()) {
        return Err(Error::Domain(format!("initial guess {:?} outside the ball", init.params.as_array())));
    }
    let clock = Instant::now();
    let heat = HeatSolver::new(&sc.grid, sc.dt)?;
    let eval = |s: &AaoState| -> Result<AaoResidual> {
        let mut r = residual(s, sc)?;
        r.obs.axpy(-1.0, y);
        Ok(r)
    };
    let mut state = init.clone();
    let mut r = eval(&state)?;
    let mut res = r.norm();
    let rec = |iter: usize, s: &AaoState, r: &AaoResidual, res: f64, mu: f64| IterRecord {
        iter,
        alpha: s.params.as_array(),
        residual: res,
        mu,
        wallclock_ms: clock.elapsed().as_secs_f64() * 1e3,
        pde_residual_w: Some(w_inner(&r.pde, &r.pde).sqrt()),
    };
    let mut records = vec![rec(0, &state, &r, res, 0.0)];
    let mut status = Status::MaxIter;
    for iter in 1..=stop.max_iter {
        if res <= stop.tau * stop.delta {
            status = Status::Discrepancy;
            break;
        }
        let (z, gamma) = apply_adjoint(&r, &state, sc, &heat)?;
        let a = state.params.as_array();
        let mut mu = ls.mu0;
        let mut accepted = None;
        for _ in 0..=ls.max_halvings {
            let alpha = ball.project([a[0] - mu * gamma[0], a[1] - mu * gamma[1]]);
            let mut m_hat = state.m_hat.clone();
            m_hat.axpy(-mu, &z);
            let trial = AaoState { m_hat, params: state.params.with_alpha(alpha) };
            let tr = eval(&trial)?;
            let tres = tr.norm();
            if tres < res {
                accepted = Some((trial, tr, tres, mu));
                break;
            }
            mu *= 0.5;
        }
        match accepted {
            Some((s, tr, tres, mu)) => {
                state = s;
                r = tr;
                res = tres;
                records.push(rec(iter, &state, &r, res, mu));
            }
            None => {
                status = Status::Stalled;
                break;
            }
        }
    }
    if status == Status::MaxIter && res <= stop.tau * stop.delta {
        status = Status::Discrepancy;
    }
    Ok((History { records, status }, state))
}
