//! Reduced formulation: `F(α̂) = K ∂_t S(α̂)` with the state eliminated.
//!
//! * [`solve_linearized`] differentiates the explicit inverted-form scheme exactly, so
//!   `F′` is the true derivative of the discrete forward map.
//! * [`solve_adjoint`] discretizes the continuous adjoint equation backward in time;
//!   the resulting gradient carries an `O(dt + h²)` discretization error.
//! * [`landweber`] and [`landweber_kaczmarz`] iterate with backtracking and projection
//!   onto a parameter ball.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_pair, grad_sq, grad_t_grad, FieldSeries, Grid, Jacobian, VecField};
use crate::llg::{self, ExternalField, Form, LlgSolution, Params, Scheme};
use crate::observation::{self, CoilSetup, Measurements, Selection};
use crate::vec3::{add, axpy, cross, dot, solve_shifted_cross, Vec3};

/// Everything except the parameters: grid, time grid, initial state, field, coils.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid,
    pub nt: usize,
    pub dt: f64,
    pub m0: VecField,
    pub field: ExternalField,
    pub setup: CoilSetup,
    pub scheme: Scheme,
}

impl Scenario {
    pub fn t_end(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    fn require_differentiable(&self, p: &Params) -> Result<()> {
        if self.scheme.form != Form::Inverted || self.scheme.projection {
            return Err(Error::Config(
                "derivatives need the inverted form without projection".into(),
            ));
        }
        if p.m_s != 1.0 {
            return Err(Error::Config("derivatives assume m_s = 1".into()));
        }
        Ok(())
    }
}

/// Closed ball `|α̂ - center| ≤ radius` with `radius < center₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBall {
    pub center: [f64; 2],
    pub radius: f64,
}

impl DomainBall {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(center[0] > 0.0 && radius > 0.0 && radius < center[0]) {
            return Err(Error::Domain(format!(
                "ball needs 0 < radius < center₁ (center {center:?}, radius {radius})"
            )));
        }
        Ok(DomainBall { center, radius })
    }

    pub fn min_alpha1(&self) -> f64 {
        self.center[0] - self.radius
    }

    pub fn contains(&self, a: [f64; 2]) -> bool {
        let d = ((a[0] - self.center[0]).powi(2) + (a[1] - self.center[1]).powi(2)).sqrt();
        d <= self.radius * (1.0 + 1e-12) && a[0] >= self.min_alpha1() * (1.0 - 1e-12)
    }

    pub fn project(&self, a: [f64; 2]) -> [f64; 2] {
        let d = [a[0] - self.center[0], a[1] - self.center[1]];
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let mut out = if n > self.radius {
            let s = self.radius / n;
            [self.center[0] + s * d[0], self.center[1] + s * d[1]]
        } else {
            a
        };
        out[0] = out[0].max(self.min_alpha1());
        out
    }
}

/// Runs the forward solver and the observation.
pub fn forward(p: &Params, sc: &Scenario) -> Result<(LlgSolution, Measurements)> {
    let sol = llg::solve(&sc.grid, &sc.m0, p, &sc.field, sc.nt, sc.dt, sc.scheme)?;
    let v = observation::apply_k(&sc.setup, &sol.rates, sc.dt)?;
    Ok((sol, v))
}

/// Per-step quantities of the base trajectory shared by linearized and adjoint solves.
struct Frame {
    lap: VecField,
    grad: Vec<Jacobian>,
    h: VecField,
}

fn frame(sc: &Scenario, base: &LlgSolution, n: usize) -> Frame {
    let g = &sc.grid;
    let m = &base.m.frames[n];
    let mut lap = g.zeros();
    let mut grad = vec![[[0.0; 3]; 2]; g.len()];
    g.laplacian_into(m, &mut lap);
    g.gradient_into(m, &mut grad);
    Frame { lap, grad, h: sc.field.at(g, n, n as f64 * sc.dt) }
}

/// Linearized state `u = S′(α̂)β` and its per-cell forward differences.
pub fn solve_linearized(beta: [f64; 2], base: &LlgSolution, sc: &Scenario) -> Result<(FieldSeries, Vec<VecField>)> {
    let p = base.params;
    sc.require_differentiable(&p)?;
    let g = &sc.grid;
    let (a1, a2) = (p.alpha_hat1, p.alpha_hat2);
    let mut frames = Vec::with_capacity(sc.nt + 1);
    frames.push(g.zeros());
    let mut lap_u = g.zeros();
    let mut grad_u = vec![[[0.0; 3]; 2]; g.len()];
    for n in 0..sc.nt {
        let fr = frame(sc, base, n);
        let m = &base.m.frames[n];
        let mt = &base.rates[n];
        let u = &frames[n];
        g.laplacian_into(u, &mut lap_u);
        g.gradient_into(u, &mut grad_u);
        let next: VecField = (0..g.len())
            .map(|k| {
                let (mk, tk, uk, hk) = (m[k], mt[k], u[k], fr.h[k]);
                let pair = 2.0 * grad_pair(&grad_u[k], &fr.grad[k]);
                let gsq = grad_sq(&fr.grad[k]);
                let (mh, uh) = (dot(mk, hk), dot(uk, hk));
                let mxt = cross(mk, tk);
                let uxt = cross(uk, tk);
                let mut r = [0.0; 3];
                for c in 0..3 {
                    r[c] = -beta[0] * tk[c] + beta[1] * mxt[c] + a2 * uxt[c] + lap_u[k][c] + pair * mk[c]
                        + gsq * uk[c]
                        - mh * uk[c]
                        - uh * mk[c];
                }
                axpy(uk, sc.dt, solve_shifted_cross(a1, -a2, mk, r))
            })
            .collect();
        if next.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: n + 1 });
        }
        frames.push(next);
    }
    let u = FieldSeries { grid: *g, dt: sc.dt, frames };
    let ut = u.forward_differences();
    Ok((u, ut))
}

/// `F′(α̂)β = K u_t`.
pub fn apply_fprime(beta: [f64; 2], base: &LlgSolution, sc: &Scenario) -> Result<Measurements> {
    let (_, ut) = solve_linearized(beta, base, sc)?;
    observation::apply_k(&sc.setup, &ut, sc.dt)
}

pub type Mat3 = [[f64; 3]; 3];

/// `M = α̂₁ I + α̂₂ [m]ₓ` and its inverse, node by node.
pub fn mt_final_matrix(p: &Params, m_t: &[Vec3]) -> Result<Vec<(Mat3, Mat3)>> {
    if !(p.alpha_hat1 > 0.0) {
        return Err(Error::Domain(format!("alpha_hat1 = {} must be positive", p.alpha_hat1)));
    }
    let (a, b) = (p.alpha_hat1, p.alpha_hat2);
    Ok(m_t
        .iter()
        .map(|m| {
            let mat = [
                [a, -b * m[2], b * m[1]],
                [b * m[2], a, -b * m[0]],
                [-b * m[1], b * m[0], a],
            ];
            let mut inv = [[0.0; 3]; 3];
            for c in 0..3 {
                let mut e = [0.0; 3];
                e[c] = 1.0;
                let col = solve_shifted_cross(a, b, *m, e);
                for r in 0..3 {
                    inv[r][c] = col[r];
                }
            }
            (mat, inv)
        })
        .collect())
}

/// Backward solve of the adjoint equation
///
/// `-α̂₁p_t - α̂₂ m×p_t - 2α̂₂ m_t×p - Δp + 2(∇mᵀ∇m)p + 2(∇mᵀ∇p)m
///  + (-|∇m|² + m·h)p + (m·p)(h + 2Δm) = K̃z`,
///
/// with `(α̂₁I + α̂₂[m(T)]ₓ) p(T) = K̃_T z`. Explicit in all terms except `p_t`.
pub fn solve_adjoint(z: &Measurements, base: &LlgSolution, sc: &Scenario) -> Result<FieldSeries> {
    let p = base.params;
    sc.require_differentiable(&p)?;
    let g = &sc.grid;
    let nt = sc.nt;
    let (a1, a2) = (p.alpha_hat1, p.alpha_hat2);
    let kz = observation::apply_ktilde(&sc.setup, z)?;
    let kzt = observation::apply_ktilde_final(&sc.setup, z)?;
    let mut frames = vec![g.zeros(); nt + 1];
    let m_end = &base.m.frames[nt];
    frames[nt] = (0..g.len()).map(|k| solve_shifted_cross(a1, a2, m_end[k], kzt[k])).collect();
    let mut lap_q = g.zeros();
    let mut grad_q = vec![[[0.0; 3]; 2]; g.len()];
    let mut upper = frame(sc, base, nt);
    for n in (0..nt).rev() {
        let q = frames[n + 1].clone();
        g.laplacian_into(&q, &mut lap_q);
        g.gradient_into(&q, &mut grad_q);
        let m_up = &base.m.frames[n + 1];
        let m_lo = &base.m.frames[n];
        let rate_lo = &base.rates[n];
        let rate_up = &base.rates[(n + 1).min(nt - 1)];
        let src = &kz.frames[n + 1];
        let step: VecField = (0..g.len())
            .map(|k| {
                let (m, qk, hk) = (m_up[k], q[k], upper.h[k]);
                let mt = [
                    0.5 * (rate_lo[k][0] + rate_up[k][0]),
                    0.5 * (rate_lo[k][1] + rate_up[k][1]),
                    0.5 * (rate_lo[k][2] + rate_up[k][2]),
                ];
                let gm = &upper.grad[k];
                let gsq = grad_sq(gm);
                let mh = dot(m, hk);
                let mq = dot(m, qk);
                let tq = cross(mt, qk);
                let a = grad_t_grad(gm, gm, qk);
                let b = grad_t_grad(gm, &grad_q[k], m);
                let hl = add(hk, [2.0 * upper.lap[k][0], 2.0 * upper.lap[k][1], 2.0 * upper.lap[k][2]]);
                let mut r = [0.0; 3];
                for c in 0..3 {
                    r[c] = -2.0 * a2 * tq[c] - lap_q[k][c] + 2.0 * a[c] + 2.0 * b[c] + (mh - gsq) * qk[c]
                        + mq * hl[c]
                        - src[k][c];
                }
                let pt = solve_shifted_cross(a1, a2, m_lo[k], r);
                axpy(qk, -sc.dt, pt)
            })
            .collect();
        if step.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: n });
        }
        frames[n] = step;
        upper = frame(sc, base, n);
    }
    Ok(FieldSeries { grid: *g, dt: sc.dt, frames })
}

/// `F′(α̂)* z ≈ (-∬ m_t·p, ∬ (m×m_t)·p)` from an adjoint state.
pub fn gradient_from_adjoint(base: &LlgSolution, adj: &FieldSeries) -> [f64; 2] {
    let g = base.grid();
    let dt = base.dt();
    let mut out = [0.0; 2];
    for (n, mt) in base.rates.iter().enumerate() {
        let m = &base.m.frames[n];
        let p = &adj.frames[n];
        let mxt: VecField = m.iter().zip(mt).map(|(a, b)| cross(*a, *b)).collect();
        out[0] -= dt * g.inner(mt, p);
        out[1] += dt * g.inner(&mxt, p);
    }
    out
}

/// Adjoint-based `F′(α̂)* z`.
pub fn gradient(z: &Measurements, base: &LlgSolution, sc: &Scenario) -> Result<[f64; 2]> {
    let adj = solve_adjoint(z, base, sc)?;
    Ok(gradient_from_adjoint(base, &adj))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iter: usize,
    /// Discrepancy factor τ.
    pub tau: f64,
    /// Absolute noise level δ of the data.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// First trial step of every iteration.
    pub mu0: f64,
    pub max_halvings: u32,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch { mu0: 1.0, max_halvings: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Residual fell below `τ·δ`.
    Discrepancy,
    MaxIter,
    /// No step size reduced the residual.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub alpha: [f64; 2],
    pub residual: f64,
    pub mu: f64,
    pub wallclock_ms: f64,
    pub pde_residual_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<IterRecord>,
    pub status: Status,
}

impl History {
    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("history holds the initial record")
    }

    pub fn final_alpha(&self) -> [f64; 2] {
        self.last().alpha
    }

    pub fn iterations(&self) -> usize {
        self.last().iter
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let with_pde = self.records.iter().any(|r| r.pde_residual_w.is_some());
        write!(out, "iter,alpha1,alpha2,residual,mu,wallclock_ms")?;
        if with_pde {
            write!(out, ",pde_residual_W")?;
        }
        writeln!(out)?;
        for r in &self.records {
            write!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iter, r.alpha[0], r.alpha[1], r.residual, r.mu, r.wallclock_ms
            )?;
            if with_pde {
                write!(out, ",{:.16e}", r.pde_residual_w.unwrap_or(f64::NAN))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

struct Current {
    params: Params,
    base: LlgSolution,
    data: Measurements,
}

fn evaluate(params: Params, sc: &Scenario) -> Result<Current> {
    let (base, data) = forward(&params, sc)?;
    Ok(Current { params, base, data })
}

/// Trial evaluations that leave the solver's stable range count as rejected steps.
fn try_evaluate(params: Params, sc: &Scenario) -> Result<Option<Current>> {
    match evaluate(params, sc) {
        Ok(c) => Ok(Some(c)),
        Err(Error::Blowup { .. }) | Err(Error::Stability { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Backtracking gradient step on `½‖restrict(F(α̂) - y)‖²`; `None` if no step helps.
fn descent_step(
    cur: &Current,
    y: &Measurements,
    sel: &Selection,
    sc: &Scenario,
    ball: &DomainBall,
    ls: &LineSearch,
) -> Result<Option<(Current, f64)>> {
    let r = cur.data.sub(y).restrict(sel)?;
    let res = r.norm();
    let g = gradient(&r, &cur.base, sc)?;
    let a = cur.params.as_array();
    let mut mu = ls.mu0;
    for _ in 0..=ls.max_halvings {
        let trial = ball.project([a[0] - mu * g[0], a[1] - mu * g[1]]);
        if trial != a {
            if let Some(next) = try_evaluate(cur.params.with_alpha(trial), sc)? {
                if next.data.sub(y).restrict(sel)?.norm() < res {
                    return Ok(Some((next, mu)));
                }
            }
        }
        mu *= 0.5;
    }
    Ok(None)
}

fn start(alpha_init: &Params, sc: &Scenario, ball: &DomainBall) -> Result<Current> {
    if !ball.contains(alpha_init.as_array()) {
        return Err(Error::Domain(format!("initial guess {:?} outside the ball", alpha_init.as_array())));
    }
    sc.require_differentiable(alpha_init)?;
    evaluate(*alpha_init, sc)
}

/// Projected Landweber iteration `α̂ ← P(α̂ - μ F′(α̂)*(F(α̂) - y))`.
pub fn landweber(
    y: &Measurements,
    alpha_init: &Params,
    sc: &Scenario,
    ball: &DomainBall,
    stop: &StopRule,
    ls: &LineSearch,
) -> Result<History> {
    let clock = Instant::now();
    let mut cur = start(alpha_init, sc, ball)?;
    let mut res = cur.data.sub(y).norm();
    let rec = |iter: usize, c: &Current, res: f64, mu: f64| IterRecord {
        iter,
        alpha: c.params.as_array(),
        residual: res,
        mu,
        wallclock_ms: clock.elapsed().as_secs_f64() * 1e3,
        pde_residual_w: None,
    };
    let mut records = vec![rec(0, &cur, res, 0.0)];
    let mut status = Status::MaxIter;
    for iter in 1..=stop.max_iter {
        if res <= stop.tau * stop.delta {
            status = Status::Discrepancy;
            break;
        }
        match descent_step(&cur, y, &Selection::All, sc, ball, ls)? {
            Some((next, mu)) => {
                cur = next;
                res = cur.data.sub(y).norm();
                records.push(rec(iter, &cur, res, mu));
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
    Ok(History { records, status })
}

/// Cyclic Landweber-Kaczmarz over the sub-operators given by `splits`.
///
/// Sub-step `j` is skipped while `‖r_j‖ ≤ τ·δ_j`; the run stops once a whole sweep
/// is skipped. One history record per sweep.
#[allow(clippy::too_many_arguments)]
pub fn landweber_kaczmarz(
    y: &Measurements,
    alpha_init: &Params,
    sc: &Scenario,
    ball: &DomainBall,
    splits: &[Selection],
    sub_deltas: &[f64],
    stop: &StopRule,
    ls: &LineSearch,
) -> Result<History> {
    if splits.is_empty() || splits.len() != sub_deltas.len() {
        return Err(Error::Config("one noise level per split is required".into()));
    }
    let clock = Instant::now();
    let mut cur = start(alpha_init, sc, ball)?;
    let rec = |iter: usize, c: &Current, y: &Measurements, mu: f64| IterRecord {
        iter,
        alpha: c.params.as_array(),
        residual: c.data.sub(y).norm(),
        mu,
        wallclock_ms: clock.elapsed().as_secs_f64() * 1e3,
        pde_residual_w: None,
    };
    let mut records = vec![rec(0, &cur, y, 0.0)];
    let mut status = Status::MaxIter;
    for sweep in 1..=stop.max_iter {
        let mut moved = false;
        let mut any_active = false;
        let mut last_mu = 0.0;
        for (sel, dj) in splits.iter().zip(sub_deltas) {
            let rj = cur.data.sub(y).restrict(sel)?.norm();
            if rj <= stop.tau * dj {
                continue;
            }
            any_active = true;
            if let Some((next, mu)) = descent_step(&cur, y, sel, sc, ball, ls)? {
                cur = next;
                last_mu = mu;
                moved = true;
            }
        }
        if !any_active {
            status = Status::Discrepancy;
            break;
        }
        records.push(rec(sweep, &cur, y, last_mu));
        if !moved {
            status = Status::Stalled;
            break;
        }
    }
    Ok(History { records, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn final_matrix_examples() {
        let p = Params::new(1.0, 1.0).unwrap();
        let (m, inv) = mt_final_matrix(&p, &[[0.0, 0.0, 1.0]]).unwrap()[0];
        assert_eq!(m, [[1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert!((det - 2.0).abs() < 1e-15);
        for r in 0..3 {
            for c in 0..3 {
                let s: f64 = (0..3).map(|k| m[r][k] * inv[k][c]).sum();
                assert!((s - if r == c { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
        let q = Params::new(2.5, 0.0).unwrap();
        let (_, inv) = mt_final_matrix(&q, &[[0.6, 0.0, 0.8]]).unwrap()[0];
        assert!((inv[0][0] - 0.4).abs() < 1e-15 && inv[0][1] == 0.0);
        assert!(mt_final_matrix(&Params { alpha_hat1: 0.0, alpha_hat2: 1.0, m_s: 1.0 }, &[[0.0; 3]]).is_err());
    }

    #[test]
    fn ball_projection() {
        let b = DomainBall::new([2.0, 0.0], 1.5).unwrap();
        assert_eq!(b.project([2.5, 0.3]), [2.5, 0.3]);
        let p = b.project([10.0, 0.0]);
        assert!((p[0] - 3.5).abs() < 1e-15 && p[1] == 0.0);
        assert!(b.contains(b.project([-4.0, 7.0])));
        assert!(DomainBall::new([1.0, 0.0], 1.0).is_err());
    }
}
