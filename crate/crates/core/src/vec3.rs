//! Small helpers for 3-vectors stored as `[f64; 3]`.

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// `a + s * b`
#[inline]
pub fn axpy(a: Vec3, s: f64, b: Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `(c I + d [n]x) x = r` in closed form.
///
/// `[n]x` is the cross-product matrix, so `[n]x v = n × v`. The determinant is
/// `c (c² + d² |n|²)`, nonzero whenever `c != 0`.
#[inline]
pub fn solve_shifted_cross(c: f64, d: f64, n: Vec3, r: Vec3) -> Vec3 {
    // (cI + dN)^{-1} = (c² I - c d N + d² n nᵀ) / (c (c² + d² |n|²))
    let nn = dot(n, n);
    let det = c * (c * c + d * d * nn);
    let nxr = cross(n, r);
    let nr = dot(n, r);
    let mut x = [0.0; 3];
    for k in 0..3 {
        x[k] = (c * c * r[k] - c * d * nxr[k] + d * d * nr * n[k]) / det;
    }
    x
}
