//! Voltage measurement chain.
//!
//! Channel `(k, ℓ)` records
//! `v_{kℓ}(t) = ∫₀ᵀ ∫_Ω -μ₀ ã_ℓ(t-τ) c_k(x) p_ℓ(x) · m_t(x, τ) dx dτ`,
//! with `ã_ℓ` a `T`-periodic trigonometric polynomial.
//!
//! Discretization: `m_t` is constant on each time cell (forward differences) and the
//! kernel is integrated over each cell with the trapezoid rule. The companion
//! operators [`apply_ktilde`] and [`apply_ktilde_final`] are built so that
//!
//! `⟨K u_t, z⟩ = ⟨u, K̃ z⟩ + ⟨u(T), K̃_T z⟩`
//!
//! holds exactly for every discrete `u` with `u(0) = 0`. `K̃` differentiates the
//! kernel convolution with centered differences in `τ`; [`apply_ktilde_analytic`]
//! uses `ã′` instead and agrees to second order in `dt`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{same_len, Error, Result};
use crate::grid::{time_weights, FieldSeries, Grid, VecField};
use crate::vec3::{dot, Vec3};

/// `mean + Σ_k cos_k cos(2πkt/T) + sin_k sin(2πkt/T)`, `k = 1, 2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fourier {
    pub period: f64,
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl Fourier {
    fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    pub fn value(&self, t: f64) -> f64 {
        let w = self.omega() * t;
        let mut s = self.mean;
        for (k, c) in self.cos.iter().enumerate() {
            s += c * ((k + 1) as f64 * w).cos();
        }
        for (k, c) in self.sin.iter().enumerate() {
            s += c * ((k + 1) as f64 * w).sin();
        }
        s
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let om = self.omega();
        let w = om * t;
        let mut s = 0.0;
        for (k, c) in self.cos.iter().enumerate() {
            let kk = (k + 1) as f64;
            s -= c * kk * om * (kk * w).sin();
        }
        for (k, c) in self.sin.iter().enumerate() {
            let kk = (k + 1) as f64;
            s += c * kk * om * (kk * w).cos();
        }
        s
    }

    /// Values at `q·dt` for `q = 0..nt`, where `nt·dt` is one period.
    fn table(&self, nt: usize, dt: f64) -> Vec<f64> {
        (0..nt).map(|q| self.value(q as f64 * dt)).collect()
    }
}

/// Concentrations, coil sensitivities and transfer functions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilSetup {
    pub grid: Grid,
    /// `c_k`, one nodal scalar field per concentration.
    pub concentrations: Vec<Vec<f64>>,
    /// `p_ℓ`, one nodal vector field per receive coil.
    pub sensitivities: Vec<VecField>,
    /// `ã_ℓ`, one per receive coil.
    pub transfer: Vec<Fourier>,
    pub mu0: f64,
    /// Negates `K̃` and `K̃_T`; only for demonstrating that duality checks detect it.
    pub flip_adjoint: bool,
}

impl CoilSetup {
    pub fn new(
        grid: Grid,
        concentrations: Vec<Vec<f64>>,
        sensitivities: Vec<VecField>,
        transfer: Vec<Fourier>,
        mu0: f64,
    ) -> Result<Self> {
        for c in &concentrations {
            same_len(grid.len(), c.len())?;
            if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config("concentrations must be finite and non-negative".into()));
            }
        }
        for p in &sensitivities {
            grid.check(p)?;
        }
        if transfer.len() != sensitivities.len() {
            return Err(Error::Config(format!(
                "{} transfer functions for {} coils",
                transfer.len(),
                sensitivities.len()
            )));
        }
        if concentrations.is_empty() || sensitivities.is_empty() {
            return Err(Error::Config("need at least one concentration and one coil".into()));
        }
        Ok(CoilSetup { grid, concentrations, sensitivities, transfer, mu0, flip_adjoint: false })
    }

    pub fn n_conc(&self) -> usize {
        self.concentrations.len()
    }

    pub fn n_coils(&self) -> usize {
        self.sensitivities.len()
    }

    pub fn n_channels(&self) -> usize {
        self.n_conc() * self.n_coils()
    }

    pub fn channel(&self, k: usize, l: usize) -> usize {
        k * self.n_coils() + l
    }

    pub fn channel_pair(&self, ch: usize) -> (usize, usize) {
        (ch / self.n_coils(), ch % self.n_coils())
    }

    /// `c_k p_ℓ` at every node.
    fn profile(&self, ch: usize) -> VecField {
        let (k, l) = self.channel_pair(ch);
        self.concentrations[k]
            .iter()
            .zip(&self.sensitivities[l])
            .map(|(c, p)| [c * p[0], c * p[1], c * p[2]])
            .collect()
    }

    /// Periods must match the time horizon so that table lookups wrap exactly.
    fn check_time(&self, nt: usize, dt: f64) -> Result<()> {
        let t_end = nt as f64 * dt;
        for a in &self.transfer {
            if (a.period - t_end).abs() > 1e-12 * t_end {
                return Err(Error::Config(format!(
                    "transfer period {} differs from time horizon {}",
                    a.period, t_end
                )));
            }
        }
        Ok(())
    }

    /// `K_{kℓ}(t, τ, x) = -μ₀ ã_ℓ(t-τ) c_k(x) p_ℓ(x)`.
    pub fn kernel(&self, k: usize, l: usize, t: f64, tau: f64, node: usize) -> Result<Vec3> {
        if k >= self.n_conc() || l >= self.n_coils() || node >= self.grid.len() {
            return Err(Error::Domain(format!("kernel index ({k},{l},{node}) out of range")));
        }
        let a = &self.transfer[l];
        let arg = (t - tau).rem_euclid(a.period);
        let s = -self.mu0 * a.value(arg) * self.concentrations[k][node];
        let p = self.sensitivities[l][node];
        Ok([s * p[0], s * p[1], s * p[2]])
    }
}

/// Voltage traces sampled at `t_i = i·dt`, `i = 0..=nt`, one per channel `(k, ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub dt: f64,
    pub n_conc: usize,
    pub n_coils: usize,
    /// `channels[k * n_coils + ℓ][i]`.
    pub channels: Vec<Vec<f64>>,
}

impl Measurements {
    pub fn zeros(n_conc: usize, n_coils: usize, nt: usize, dt: f64) -> Self {
        Measurements { dt, n_conc, n_coils, channels: vec![vec![0.0; nt + 1]; n_conc * n_coils] }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_conc, self.n_coils, self.nt(), self.dt)
    }

    pub fn nt(&self) -> usize {
        self.channels[0].len() - 1
    }

    /// Trapezoid-in-time pairing summed over channels.
    pub fn inner(&self, other: &Measurements) -> f64 {
        assert_eq!(self.channels.len(), other.channels.len());
        let w = time_weights(self.nt(), self.dt);
        self.channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.iter().zip(b).zip(&w).map(|((x, y), w)| w * x * y).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn sub(&self, other: &Measurements) -> Measurements {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn axpy(&mut self, s: f64, other: &Measurements) {
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Measurements {
        let mut out = self.clone();
        out.channels.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    /// Zero-extends outside the selection.
    pub fn restrict(&self, sel: &Selection) -> Result<Measurements> {
        let mut out = self.clone();
        match sel {
            Selection::All => {}
            Selection::Channels(list) => {
                for &(k, l) in list {
                    if k >= self.n_conc || l >= self.n_coils {
                        return Err(Error::Domain(format!("channel ({k},{l}) out of range")));
                    }
                }
                for (ch, trace) in out.channels.iter_mut().enumerate() {
                    let pair = (ch / self.n_coils, ch % self.n_coils);
                    if !list.contains(&pair) {
                        trace.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
            Selection::Samples { start, end } => {
                if start >= end || *end > self.nt() + 1 {
                    return Err(Error::Domain(format!("sample window {start}..{end} invalid")));
                }
                for trace in &mut out.channels {
                    for (i, v) in trace.iter_mut().enumerate() {
                        if i < *start || i >= *end {
                            *v = 0.0;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t")?;
        for k in 0..self.n_conc {
            for l in 0..self.n_coils {
                write!(out, ",v_{k}_{l}")?;
            }
        }
        writeln!(out)?;
        for i in 0..=self.nt() {
            write!(out, "{:.16e}", i as f64 * self.dt)?;
            for c in &self.channels {
                write!(out, ",{:.16e}", c[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Measurements> {
        let bad = |msg: String| Error::Parse { what: "measurements csv".into(), msg };
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut pairs = Vec::new();
        for c in &cols[1..] {
            let parts: Vec<&str> = c.split('_').collect();
            if parts.len() != 3 || parts[0] != "v" {
                return Err(bad(format!("bad channel column {c:?}")));
            }
            let k: usize = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
            let l: usize = parts[2].parse().map_err(|e| bad(format!("{e}")))?;
            pairs.push((k, l));
        }
        let n_conc = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 1;
        let n_coils = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
        if pairs.len() != n_conc * n_coils
            || pairs.iter().enumerate().any(|(i, &(k, l))| i != k * n_coils + l)
        {
            return Err(bad("channel columns must be complete and row-major".into()));
        }
        let mut times = Vec::new();
        let mut channels = vec![Vec::new(); pairs.len()];
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != cols.len() {
                return Err(bad(format!("row has {} columns, header {}", vals.len(), cols.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{e}")));
            times.push(parse(vals[0])?);
            for (c, v) in channels.iter_mut().zip(&vals[1..]) {
                c.push(parse(v)?);
            }
        }
        if times.len() < 2 {
            return Err(bad("need at least two samples".into()));
        }
        let nt = times.len() - 1;
        let dt = times[nt] / nt as f64;
        Ok(Measurements { dt, n_conc, n_coils, channels })
    }
}

/// Which part of the data a sub-operator sees.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    All,
    Channels(Vec<(usize, usize)>),
    /// Samples `start..end` (exclusive end).
    Samples { start: usize, end: usize },
}

/// Partitions `[0, T]` at the given breakpoints; each sample belongs to exactly one window.
pub fn time_windows(breakpoints: &[f64], nt: usize, dt: f64) -> Result<Vec<Selection>> {
    let t_end = nt as f64 * dt;
    if breakpoints.len() < 2 {
        return Err(Error::Config("need at least two breakpoints".into()));
    }
    let mut idx = Vec::with_capacity(breakpoints.len());
    for &b in breakpoints {
        let q = (b / dt).round();
        if (q * dt - b).abs() > 1e-9 * dt.max(t_end) || q < 0.0 || q > nt as f64 {
            return Err(Error::Config(format!("breakpoint {b} is not on the time grid")));
        }
        idx.push(q as usize);
    }
    if idx[0] != 0 || *idx.last().unwrap() != nt || idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("breakpoints must increase from 0 to T".into()));
    }
    let last = idx.len() - 2;
    Ok(idx
        .windows(2)
        .enumerate()
        .map(|(j, w)| Selection::Samples { start: w[0], end: if j == last { nt + 1 } else { w[1] } })
        .collect())
}

/// One selection per channel.
pub fn channel_split(setup: &CoilSetup) -> Vec<Selection> {
    (0..setup.n_channels()).map(|ch| Selection::Channels(vec![setup.channel_pair(ch)])).collect()
}

/// `∫_Ω c_k p_ℓ · f dx` for every channel.
fn moments(setup: &CoilSetup, f: &[Vec3]) -> Vec<f64> {
    let g = &setup.grid;
    (0..setup.n_channels())
        .map(|ch| {
            let (k, l) = setup.channel_pair(ch);
            let c = &setup.concentrations[k];
            let p = &setup.sensitivities[l];
            (0..g.len()).map(|n| g.weight(n) * c[n] * dot(p[n], f[n])).sum()
        })
        .collect()
}

/// Voltages from per-cell rates (`rates.len() == nt`).
pub fn apply_k(setup: &CoilSetup, rates: &[VecField], dt: f64) -> Result<Measurements> {
    let nt = rates.len();
    if nt == 0 {
        return Err(Error::Shape { expected: 1, found: 0 });
    }
    for r in rates {
        setup.grid.check(r)?;
    }
    setup.check_time(nt, dt)?;
    let cell: Vec<Vec<f64>> = rates.iter().map(|r| moments(setup, r)).collect();
    let mut out = Measurements::zeros(setup.n_conc(), setup.n_coils(), nt, dt);
    for (ch, trace) in out.channels.iter_mut().enumerate() {
        let (_, l) = setup.channel_pair(ch);
        let table = setup.transfer[l].table(nt, dt);
        // node weights of the piecewise-constant rate under the trapezoid rule per cell
        let node: Vec<f64> = (0..=nt)
            .map(|j| {
                let left = if j > 0 { cell[j - 1][ch] } else { 0.0 };
                let right = if j < nt { cell[j][ch] } else { 0.0 };
                0.5 * dt * (left + right)
            })
            .collect();
        for (i, v) in trace.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, gj) in node.iter().enumerate() {
                let q = (i as isize - j as isize).rem_euclid(nt as isize) as usize;
                s += table[q] * gj;
            }
            *v = -setup.mu0 * s;
        }
    }
    Ok(out)
}

/// `A_{kℓ}(τ_j) = Σ_i w_i (-μ₀) ã_ℓ(t_i - τ_j) z_{kℓ}(t_i)` for every channel and node.
fn kernel_convolution(setup: &CoilSetup, z: &Measurements) -> Result<Vec<Vec<f64>>> {
    if z.n_conc != setup.n_conc() || z.n_coils != setup.n_coils() {
        return Err(Error::Shape { expected: setup.n_channels(), found: z.channels.len() });
    }
    let nt = z.nt();
    setup.check_time(nt, z.dt)?;
    let w = time_weights(nt, z.dt);
    Ok((0..setup.n_channels())
        .map(|ch| {
            let (_, l) = setup.channel_pair(ch);
            let table = setup.transfer[l].table(nt, z.dt);
            let zc = &z.channels[ch];
            (0..=nt)
                .map(|j| {
                    let mut s = 0.0;
                    for i in 0..=nt {
                        let q = (i as isize - j as isize).rem_euclid(nt as isize) as usize;
                        s += w[i] * table[q] * zc[i];
                    }
                    -setup.mu0 * s
                })
                .collect()
        })
        .collect())
}

fn spread(setup: &CoilSetup, coeffs: &[f64]) -> VecField {
    let mut out = setup.grid.zeros();
    for (ch, &s) in coeffs.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(setup.profile(ch)) {
            for k in 0..3 {
                o[k] += s * p[k];
            }
        }
    }
    out
}

fn sign(setup: &CoilSetup) -> f64 {
    if setup.flip_adjoint {
        -1.0
    } else {
        1.0
    }
}

/// `K̃z(x, τ_j) = Σ c_k p_ℓ · (-∂_τ A_{kℓ})(τ_j)`, differenced to match [`apply_k`].
pub fn apply_ktilde(setup: &CoilSetup, z: &Measurements) -> Result<FieldSeries> {
    let a = kernel_convolution(setup, z)?;
    let nt = z.nt();
    let dt = z.dt;
    let sg = sign(setup);
    let frames = (0..=nt)
        .map(|j| {
            let coeffs: Vec<f64> = a
                .iter()
                .map(|aj| {
                    let d = if j == 0 {
                        (aj[1] - aj[0]) / dt
                    } else if j == nt {
                        (aj[nt] - aj[nt - 1]) / dt
                    } else {
                        (aj[j + 1] - aj[j - 1]) / (2.0 * dt)
                    };
                    -sg * d
                })
                .collect();
            spread(setup, &coeffs)
        })
        .collect();
    Ok(FieldSeries { grid: setup.grid, dt, frames })
}

/// `K̃z` with the analytic derivative: `Σ c_k p_ℓ ∫ (-μ₀) ã′_ℓ(t-τ) z_{kℓ}(t) dt`.
pub fn apply_ktilde_analytic(setup: &CoilSetup, z: &Measurements) -> Result<FieldSeries> {
    if z.channels.len() != setup.n_channels() {
        return Err(Error::Shape { expected: setup.n_channels(), found: z.channels.len() });
    }
    let nt = z.nt();
    let dt = z.dt;
    setup.check_time(nt, dt)?;
    let w = time_weights(nt, dt);
    let sg = sign(setup);
    let frames = (0..=nt)
        .map(|j| {
            let coeffs: Vec<f64> = (0..setup.n_channels())
                .map(|ch| {
                    let (_, l) = setup.channel_pair(ch);
                    let a = &setup.transfer[l];
                    let s: f64 = (0..=nt)
                        .map(|i| w[i] * a.derivative((i as f64 - j as f64) * dt) * z.channels[ch][i])
                        .sum();
                    -sg * setup.mu0 * s
                })
                .collect();
            spread(setup, &coeffs)
        })
        .collect();
    Ok(FieldSeries { grid: setup.grid, dt, frames })
}

/// `K̃_T z = Σ c_k p_ℓ ∫ (-μ₀) ã_ℓ(t) z_{kℓ}(t) dt`.
pub fn apply_ktilde_final(setup: &CoilSetup, z: &Measurements) -> Result<VecField> {
    let a = kernel_convolution(setup, z)?;
    let nt = z.nt();
    let sg = sign(setup);
    let coeffs: Vec<f64> = a.iter().map(|aj| sg * aj[nt]).collect();
    Ok(spread(setup, &coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(grid: Grid) -> CoilSetup {
        let c0 = grid.sample_scalar(|x, y| (-(x - 0.3).powi(2) - (y - 0.6).powi(2)).exp());
        let c1 = grid.sample_scalar(|x, _| 1.0 + x);
        let p0 = vec![[0.0, 0.0, 1.0]; grid.len()];
        let p1 = grid.sample(|x, _| [x, 0.2, 0.0]);
        let a0 = Fourier { period: 1.0, mean: 0.0, cos: vec![0.4], sin: vec![1.0, 0.3] };
        let a1 = Fourier { period: 1.0, mean: 0.1, cos: vec![0.0, 0.7], sin: vec![] };
        CoilSetup::new(grid, vec![c0, c1], vec![p0, p1], vec![a0, a1], 1.3).unwrap()
    }

    #[test]
    fn fourier_is_periodic_and_derivative_matches() {
        let a = Fourier { period: 0.7, mean: 0.2, cos: vec![1.0, -0.5], sin: vec![0.3] };
        for t in [0.0, 0.13, 0.5, 1.9] {
            assert!((a.value(t + 0.7) - a.value(t)).abs() < 1e-12);
            let fd = (a.value(t + 1e-6) - a.value(t - 1e-6)) / 2e-6;
            assert!((fd - a.derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn kernel_basics() {
        let g = Grid::unit(4).unwrap();
        let s = setup(g);
        let k = s.kernel(1, 0, 0.25, 0.25, 5).unwrap();
        let want = -1.3 * s.transfer[0].value(0.0) * s.concentrations[1][5];
        assert!((k[2] - want).abs() < 1e-15);
        let a = s.kernel(0, 1, 0.3, 0.1, 2).unwrap();
        let b = s.kernel(0, 1, 1.3, 0.1, 2).unwrap();
        assert!((0..3).all(|i| (a[i] - b[i]).abs() < 1e-12));
        assert!(s.kernel(2, 0, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn zero_inputs_give_zero_outputs() {
        let g = Grid::unit(4).unwrap();
        let s = setup(g);
        let nt = 8;
        let dt = 1.0 / nt as f64;
        let v = apply_k(&s, &vec![g.zeros(); nt], dt).unwrap();
        assert!(v.channels.iter().flatten().all(|x| *x == 0.0));
        let z = Measurements::zeros(2, 2, nt, dt);
        assert!(apply_ktilde(&s, &z).unwrap().frames.iter().flatten().flatten().all(|x| *x == 0.0));
        assert!(apply_ktilde_final(&s, &z).unwrap().iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn windows_partition_the_samples() {
        let w = time_windows(&[0.0, 0.25, 0.5, 1.0], 8, 0.125).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[2], Selection::Samples { start: 4, end: 9 });
        assert!(time_windows(&[0.0, 0.3, 1.0], 8, 0.125).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut m = Measurements::zeros(2, 3, 4, 0.25);
        for (c, tr) in m.channels.iter_mut().enumerate() {
            for (i, v) in tr.iter_mut().enumerate() {
                *v = (c as f64 + 1.0) * (i as f64).sin() / 7.0;
            }
        }
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = Measurements::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
