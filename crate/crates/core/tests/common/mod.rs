#![allow(dead_code)]

use llg_calib::grid::{Grid, VecField};
use llg_calib::llg::Params;
use llg_calib::observation::{CoilSetup, Fourier};

pub type V = [f64; 3];

fn det(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cramer's rule for `(a1 I - a2 [m]x) x = r`.
fn solve3(a1: f64, a2: f64, m: V, r: V) -> V {
    let mat = [
        [a1, a2 * m[2], -a2 * m[1]],
        [-a2 * m[2], a1, a2 * m[0]],
        [a2 * m[1], -a2 * m[0], a1],
    ];
    let d = det(mat);
    std::array::from_fn(|c| {
        let mut mc = mat;
        for row in 0..3 {
            mc[row][c] = r[row];
        }
        det(mc) / d
    })
}

/// Spatially uniform dynamics `α̂₁ m_t - α̂₂ m × m_t = h - (m·h) m`.
pub fn macrospin_rhs(p: &Params, m: V, h: V) -> V {
    let mh = m[0] * h[0] + m[1] * h[1] + m[2] * h[2];
    let r = std::array::from_fn(|c| h[c] - mh * m[c]);
    solve3(p.alpha_hat1, p.alpha_hat2, m, r)
}

/// Classical RK4 on `[0, t_end]`, every step kept.
pub fn rk4(f: impl Fn(f64, V) -> V, m0: V, t_end: f64, steps: usize) -> Vec<V> {
    let dt = t_end / steps as f64;
    let add = |a: V, s: f64, b: V| -> V { std::array::from_fn(|c| a[c] + s * b[c]) };
    let mut m = m0;
    let mut out = vec![m];
    for n in 0..steps {
        let t = n as f64 * dt;
        let k1 = f(t, m);
        let k2 = f(t + dt / 2.0, add(m, dt / 2.0, k1));
        let k3 = f(t + dt / 2.0, add(m, dt / 2.0, k2));
        let k4 = f(t + dt, add(m, dt, k3));
        m = std::array::from_fn(|c| m[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]));
        out.push(m);
    }
    out
}

pub fn small_setup(grid: Grid, period: f64) -> CoilSetup {
    let c0 = grid.sample_scalar(|x, y| (-(x - 0.3).powi(2) - (y - 0.6).powi(2)).exp());
    let c1 = grid.sample_scalar(|x, y| 0.5 + x * y);
    let p0 = grid.sample(|_, y| [0.1, 0.0, 1.0 - 0.2 * y]);
    let p1 = grid.sample(|x, _| [x, 0.2, 0.0]);
    let a0 = Fourier { period, mean: 0.0, cos: vec![0.4], sin: vec![1.0, 0.3] };
    let a1 = Fourier { period, mean: 0.1, cos: vec![0.0, 0.7], sin: vec![-0.2] };
    CoilSetup::new(grid, vec![c0, c1], vec![p0, p1], vec![a0, a1], 1.3).unwrap()
}

/// Direct quadrature of `v(t_i) = ∫∫ K(t_i, τ, x)·m_t(x, τ) dx dτ` with the kernel evaluated
/// from its definition, trapezoid in `τ` over each cell and in `x` over the grid.
pub fn naive_voltages(setup: &CoilSetup, rates: &[VecField], dt: f64) -> Vec<Vec<f64>> {
    let g = &setup.grid;
    let nt = rates.len();
    let mut out = vec![vec![0.0; nt + 1]; setup.n_channels()];
    for k in 0..setup.n_conc() {
        for l in 0..setup.n_coils() {
            let ch = setup.channel(k, l);
            for i in 0..=nt {
                let t = i as f64 * dt;
                let mut s = 0.0;
                for (j, r) in rates.iter().enumerate() {
                    for node in 0..g.len() {
                        let a = setup.kernel(k, l, t, j as f64 * dt, node).unwrap();
                        let b = setup.kernel(k, l, t, (j + 1) as f64 * dt, node).unwrap();
                        let w = g.weight(node) * 0.5 * dt;
                        for c in 0..3 {
                            s += w * (a[c] + b[c]) * r[node][c];
                        }
                    }
                }
                out[ch][i] = s;
            }
        }
    }
    out
}
