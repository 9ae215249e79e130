//! 2x2 matrix helpers. Matrices are row-major: `m[i][j]`.

pub type Mat2 = [[f64; 2]; 2];

pub const ZERO2: Mat2 = [[0.0; 2]; 2];

#[inline]
pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[inline]
pub fn inv2(m: &Mat2) -> Mat2 {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

#[inline]
pub fn matvec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// `m^T v`
#[inline]
pub fn matvec_t(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]]
}

#[inline]
pub fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: [f64; 2]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn trace(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

/// Spectral condition number of a 2x2 matrix.
pub fn cond2(m: &Mat2) -> f64 {
    let fro2 = m.iter().flatten().map(|v| v * v).sum::<f64>();
    let d = det2(m).abs();
    if d == 0.0 {
        return f64::INFINITY;
    }
    // sigma_max / sigma_min from the invariants of m^T m
    let s = (fro2 * fro2 - 4.0 * d * d).max(0.0).sqrt();
    ((fro2 + s) / (fro2 - s).max(f64::MIN_POSITIVE)).sqrt()
}
