//! Gauss rules on the unit interval and the reference triangle.
//!
//! The reference triangle is `{(x, y) : x >= 0, y >= 0, x + y <= 1}`; its rules
//! are built from a collapsed (Duffy) tensor product of Gauss-Legendre rules,
//! so every weight is positive.

/// Quadrature rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Quadrature rule on the reference triangle. Weights sum to `1/2`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Legendre polynomial P_n and its derivative at `x` in `[-1, 1]`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> LineRule {
    assert!(n >= 1);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // ascending order on [0, 1]
        points[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    LineRule { points, weights }
}

/// Gauss-Lobatto abscissae with `n >= 2` points on `[0, 1]`, ascending.
pub fn gauss_lobatto_points(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = n - 1;
    let mut pts = vec![0.0; n];
    pts[0] = 0.0;
    pts[m] = 1.0;
    // interior points are the roots of P'_m
    for i in 1..m {
        let mut x = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            // P'_m and P''_m from the Legendre ODE
            let (p, dp) = legendre(m, x);
            let ddp = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        pts[i] = 0.5 * (x + 1.0);
    }
    // symmetrize to remove rounding asymmetry
    for i in 0..n / 2 {
        let s = 0.5 * (pts[i] + 1.0 - pts[m - i]);
        pts[i] = s;
        pts[m - i] = 1.0 - s;
    }
    if n % 2 == 1 {
        pts[n / 2] = 0.5;
    }
    pts
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `order`.
pub fn line_rule(order: usize) -> LineRule {
    gauss_legendre(order / 2 + 1)
}

/// Rule on the reference triangle exact for bivariate polynomials of total degree `order`.
pub fn triangle_rule(order: usize) -> TriangleRule {
    // x = u, y = v (1 - u): the Jacobian (1 - u) raises the degree in u by one
    let ru = gauss_legendre(order.div_ceil(2) + 1);
    let rv = gauss_legendre(order / 2 + 1);
    let mut points = Vec::with_capacity(ru.points.len() * rv.points.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (&u, &wu) in ru.points.iter().zip(&ru.weights) {
        for (&v, &wv) in rv.points.iter().zip(&rv.weights) {
            points.push([u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

/// Maps a reference rule onto the triangle `(a, b, c)`, weights scaled by its area.
pub fn map_triangle_rule(rule: &TriangleRule, tri: [[f64; 2]; 3]) -> Vec<([f64; 2], f64)> {
    let [a, b, c] = tri;
    let e1 = [b[0] - a[0], b[1] - a[1]];
    let e2 = [c[0] - a[0], c[1] - a[1]];
    let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            (
                [a[0] + e1[0] * p[0] + e2[0] * p[1], a[1] + e1[1] * p[0] + e2[1] * p[1]],
                w * det,
            )
        })
        .collect()
}
