//! Uniform rectangular node grid with Neumann ghost mirroring, finite-difference
//! operators for 3-component fields, and trapezoidal quadrature in space and time.
//!
//! Nodes are numbered row-major: `idx = j * nx + i` with `x = i * hx`, `y = j * hy`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{same_len, Error, Result};
use crate::vec3::{dot, Vec3};

pub type VecField = Vec<Vec3>;

/// Per-node Jacobian, `jac[d][c] = ∂_d f_c` with `d` the axis (0 = x, 1 = y).
pub type Jacobian = [[f64; 3]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let g = Grid { nx, ny, lx, ly };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nx >= 3
            && self.ny >= 3
            && self.lx.is_finite()
            && self.ly.is_finite()
            && self.lx > 0.0
            && self.ly > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::BadGrid { nx: self.nx, ny: self.ny })
        }
    }

    /// Unit square with `n × n` nodes.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    /// Trapezoidal weight of a node: `hx·hy`, halved per boundary axis.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let (i, j) = self.ij(idx);
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx() * self.hy()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    pub fn check(&self, f: &[Vec3]) -> Result<()> {
        same_len(self.len(), f.len())
    }

    pub fn zeros(&self) -> VecField {
        vec![[0.0; 3]; self.len()]
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> Vec3) -> VecField {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.point(k);
                f(x, y)
            })
            .collect()
    }

    pub fn sample_scalar(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.point(k);
                f(x, y)
            })
            .collect()
    }

    /// Five-point Laplacian with mirrored ghost nodes (`f_{-1} = f_1`).
    pub fn laplacian(&self, f: &[Vec3]) -> Result<VecField> {
        self.check(f)?;
        let mut out = self.zeros();
        self.laplacian_into(f, &mut out);
        Ok(out)
    }

    pub fn laplacian_into(&self, f: &[Vec3], out: &mut [Vec3]) {
        assert_eq!(f.len(), self.len());
        assert_eq!(out.len(), self.len());
        let (nx, ny) = (self.nx, self.ny);
        let ix2 = 1.0 / (self.hx() * self.hx());
        let iy2 = 1.0 / (self.hy() * self.hy());
        for j in 0..ny {
            let jm = if j == 0 { 1 } else { j - 1 };
            let jp = if j == ny - 1 { ny - 2 } else { j + 1 };
            for i in 0..nx {
                let im = if i == 0 { 1 } else { i - 1 };
                let ip = if i == nx - 1 { nx - 2 } else { i + 1 };
                let c = f[j * nx + i];
                let (w, e) = (f[j * nx + im], f[j * nx + ip]);
                let (s, n) = (f[jm * nx + i], f[jp * nx + i]);
                let o = &mut out[j * nx + i];
                for k in 0..3 {
                    o[k] = (w[k] - 2.0 * c[k] + e[k]) * ix2 + (s[k] - 2.0 * c[k] + n[k]) * iy2;
                }
            }
        }
    }

    /// Nodal Jacobians: central differences inside, one-sided second order on the boundary.
    pub fn gradient(&self, f: &[Vec3]) -> Result<Vec<Jacobian>> {
        self.check(f)?;
        let mut out = vec![[[0.0; 3]; 2]; self.len()];
        self.gradient_into(f, &mut out);
        Ok(out)
    }

    pub fn gradient_into(&self, f: &[Vec3], out: &mut [Jacobian]) {
        assert_eq!(f.len(), self.len());
        assert_eq!(out.len(), self.len());
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (self.hx(), self.hy());
        for j in 0..ny {
            for i in 0..nx {
                let at = |ii: usize, jj: usize| f[jj * nx + ii];
                let o = &mut out[j * nx + i];
                o[0] = diff1(i, nx, hx, |ii| at(ii, j));
                o[1] = diff1(j, ny, hy, |jj| at(i, jj));
            }
        }
    }

    /// `∫_Ω s dx` by the tensor trapezoid rule.
    pub fn integrate(&self, s: &[f64]) -> Result<f64> {
        same_len(self.len(), s.len())?;
        Ok(s.iter().enumerate().map(|(k, v)| self.weight(k) * v).sum())
    }

    /// `∫_Ω a·b dx`.
    pub fn inner(&self, a: &[Vec3], b: &[Vec3]) -> f64 {
        assert_eq!(a.len(), self.len());
        assert_eq!(b.len(), self.len());
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(k, (x, y))| self.weight(k) * dot(*x, *y))
            .sum()
    }

    pub fn norm(&self, a: &[Vec3]) -> f64 {
        self.inner(a, a).sqrt()
    }
}

fn diff1(i: usize, n: usize, h: f64, f: impl Fn(usize) -> Vec3) -> Vec3 {
    let mut d = [0.0; 3];
    if i == 0 {
        let (a, b, c) = (f(0), f(1), f(2));
        for k in 0..3 {
            d[k] = (-3.0 * a[k] + 4.0 * b[k] - c[k]) / (2.0 * h);
        }
    } else if i == n - 1 {
        let (a, b, c) = (f(n - 1), f(n - 2), f(n - 3));
        for k in 0..3 {
            d[k] = (3.0 * a[k] - 4.0 * b[k] + c[k]) / (2.0 * h);
        }
    } else {
        let (a, b) = (f(i - 1), f(i + 1));
        for k in 0..3 {
            d[k] = (b[k] - a[k]) / (2.0 * h);
        }
    }
    d
}

/// `|∇f|²` at one node.
#[inline]
pub fn grad_sq(j: &Jacobian) -> f64 {
    dot(j[0], j[0]) + dot(j[1], j[1])
}

/// Frobenius pairing `∇u : ∇w` at one node.
#[inline]
pub fn grad_pair(a: &Jacobian, b: &Jacobian) -> f64 {
    dot(a[0], b[0]) + dot(a[1], b[1])
}

/// `(∇aᵀ ∇b) v`, i.e. `Σ_d ∂_d a (∂_d b · v)`.
#[inline]
pub fn grad_t_grad(a: &Jacobian, b: &Jacobian, v: Vec3) -> Vec3 {
    let s0 = dot(b[0], v);
    let s1 = dot(b[1], v);
    [
        a[0][0] * s0 + a[1][0] * s1,
        a[0][1] * s0 + a[1][1] * s1,
        a[0][2] * s0 + a[1][2] * s1,
    ]
}

/// Trapezoid weights on `nt + 1` uniformly spaced samples.
pub fn time_weights(nt: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; nt + 1];
    w[0] = 0.5 * dt;
    w[nt] = 0.5 * dt;
    w
}

/// `∫ s dt` by the trapezoid rule; needs at least two samples.
pub fn integrate_time(samples: &[f64], dt: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Shape { expected: 2, found: samples.len() });
    }
    let n = samples.len() - 1;
    let inner: f64 = samples[1..n].iter().sum();
    Ok(dt * (inner + 0.5 * (samples[0] + samples[n])))
}

/// Snapshots `frames[n]` at `t_n = n·dt`, `n = 0..=nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub grid: Grid,
    pub dt: f64,
    pub frames: Vec<VecField>,
}

impl FieldSeries {
    pub fn zeros(grid: Grid, nt: usize, dt: f64) -> Self {
        FieldSeries { grid, dt, frames: vec![grid.zeros(); nt + 1] }
    }

    pub fn nt(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.nt() as f64 * self.dt
    }

    /// Forward differences `(f_{n+1} - f_n)/dt`, one per cell, `nt` in total.
    pub fn forward_differences(&self) -> Vec<VecField> {
        self.frames
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| {
                        [(b[0] - a[0]) / self.dt, (b[1] - a[1]) / self.dt, (b[2] - a[2]) / self.dt]
                    })
                    .collect()
            })
            .collect()
    }

    /// Space-time trapezoid pairing over all snapshots.
    pub fn inner(&self, other: &FieldSeries) -> f64 {
        assert_eq!(self.frames.len(), other.frames.len());
        let w = time_weights(self.nt(), self.dt);
        self.frames
            .iter()
            .zip(&other.frames)
            .zip(&w)
            .map(|((a, b), wt)| wt * self.grid.inner(a, b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&mut self, s: f64, other: &FieldSeries) {
        for (a, b) in self.frames.iter_mut().zip(&other.frames) {
            for (x, y) in a.iter_mut().zip(b) {
                for k in 0..3 {
                    x[k] += s * y[k];
                }
            }
        }
    }

    pub fn scaled(&self, s: f64) -> FieldSeries {
        let mut out = self.clone();
        for f in &mut out.frames {
            for v in f.iter_mut() {
                *v = [s * v[0], s * v[1], s * v[2]];
            }
        }
        out
    }
}

/// `∫₀ᵀ ∫_Ω a·b` for per-cell series (piecewise constant in time).
pub fn cell_inner(grid: &Grid, dt: f64, a: &[VecField], b: &[VecField]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| dt * grid.inner(x, y)).sum()
}

/// Writes one snapshot as `i,j,x,y,v0,v1,v2`.
pub fn write_field_csv<W: Write>(grid: &Grid, f: &[Vec3], mut out: W) -> Result<()> {
    grid.check(f)?;
    writeln!(out, "i,j,x,y,v0,v1,v2")?;
    for (k, v) in f.iter().enumerate() {
        let (i, j) = grid.ij(k);
        let (x, y) = grid.point(k);
        writeln!(out, "{i},{j},{x:.16e},{y:.16e},{:.16e},{:.16e},{:.16e}", v[0], v[1], v[2])?;
    }
    Ok(())
}

pub fn read_field_csv<R: BufRead>(grid: &Grid, input: R) -> Result<VecField> {
    let bad = |msg: String| Error::Parse { what: "field csv".into(), msg };
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
    if header.trim() != "i,j,x,y,v0,v1,v2" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = grid.zeros();
    let mut seen = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(bad(format!("expected 7 columns, got {}", cols.len())));
        }
        let i: usize = cols[0].parse().map_err(|e| bad(format!("{e}")))?;
        let j: usize = cols[1].parse().map_err(|e| bad(format!("{e}")))?;
        if i >= grid.nx || j >= grid.ny {
            return Err(bad(format!("node ({i},{j}) outside grid")));
        }
        let mut v = [0.0; 3];
        for k in 0..3 {
            v[k] = cols[4 + k].trim().parse().map_err(|e| bad(format!("{e}")))?;
        }
        out[grid.index(i, j)] = v;
        seen += 1;
    }
    same_len(grid.len(), seen)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_zero_laplacian_and_gradient() {
        let g = Grid::new(7, 5, 2.0, 1.5).unwrap();
        let f = vec![[1.0, 2.0, 3.0]; g.len()];
        let l = g.laplacian(&f).unwrap();
        let d = g.gradient(&f).unwrap();
        assert!(l.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(d.iter().flatten().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_is_exact_on_linear_fields() {
        let g = Grid::new(6, 9, 1.0, 2.0).unwrap();
        let f = g.sample(|x, y| [3.0 * x, -2.0 * y, x + y]);
        let d = g.gradient(&f).unwrap();
        for jac in &d {
            assert!((jac[0][0] - 3.0).abs() < 1e-12);
            assert!((jac[1][1] + 2.0).abs() < 1e-12);
            assert!((jac[0][2] - 1.0).abs() < 1e-12 && (jac[1][2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_cosine_converges_at_second_order() {
        let err = |n: usize| {
            let g = Grid::new(n, n, 2.0, 2.0).unwrap();
            let k = PI / g.lx;
            let f = g.sample(|x, _| [(k * x).cos(), 0.0, 0.0]);
            let l = g.laplacian(&f).unwrap();
            l.iter()
                .zip(&f)
                .map(|(a, b)| (a[0] + k * k * b[0]).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(17) / err(33);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn trapezoid_is_exact_on_bilinear() {
        let g = Grid::unit(5).unwrap();
        let one = vec![1.0; g.len()];
        assert!((g.integrate(&one).unwrap() - 1.0).abs() < 1e-14);
        let xy = g.sample_scalar(|x, y| x * y);
        assert!((g.integrate(&xy).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn sine_bump_integral() {
        let g = Grid::unit(65).unwrap();
        let s = g.sample_scalar(|x, y| (PI * x).sin() * (PI * y).sin());
        let exact = 4.0 / (PI * PI);
        assert!((g.integrate(&s).unwrap() - exact).abs() < 2e-3 * exact);
    }

    #[test]
    fn time_trapezoid() {
        let nt = 100;
        let dt = 1.0 / nt as f64;
        let ones = vec![1.0; nt + 1];
        let t: Vec<f64> = (0..=nt).map(|n| n as f64 * dt).collect();
        let s: Vec<f64> = t.iter().map(|t| (2.0 * PI * t).sin()).collect();
        assert!((integrate_time(&ones, dt).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate_time(&t, dt).unwrap() - 0.5).abs() < 1e-14);
        assert!(integrate_time(&s, dt).unwrap().abs() < 1e-3);
        assert!(integrate_time(&[1.0], dt).is_err());
    }

    #[test]
    fn mismatched_field_is_rejected() {
        let g = Grid::unit(4).unwrap();
        assert!(matches!(g.laplacian(&[[0.0; 3]; 3]), Err(Error::Shape { .. })));
        assert!(Grid::new(2, 5, 1.0, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(4, 3, 1.0, 0.5).unwrap();
        let f = g.sample(|x, y| [x.sin() / 3.0, y.exp(), x * y - 1e-17]);
        let mut buf = Vec::new();
        write_field_csv(&g, &f, &mut buf).unwrap();
        let back = read_field_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(f, back);
    }
}
