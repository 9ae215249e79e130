//! Manufactured and no-flow test problems.

use std::f64::consts::PI;

use crate::geometry::LevelSet;
use crate::linalg::Mat2;
use crate::mesh::Point;

/// Exact data of a Stokes problem with unit viscosity.
pub trait Example: Send + Sync {
    fn level_set(&self) -> &dyn LevelSet;
    fn velocity(&self, x: Point) -> [f64; 2];
    /// `grad[i][j] = d u_i / d x_j`
    fn velocity_gradient(&self, x: Point) -> Mat2;
    fn pressure(&self, x: Point) -> f64;
    fn pressure_gradient(&self, x: Point) -> Point;
    /// `f = -Delta u + grad p`
    fn force(&self, x: Point) -> [f64; 2];
}

/// `(x - shift)^4 + y^4 - 1/4`
#[derive(Clone, Copy, Debug, Default)]
pub struct QuarticLevelSet {
    pub shift: f64,
}

impl LevelSet for QuarticLevelSet {
    fn value(&self, x: Point) -> f64 {
        let s = x[0] - self.shift;
        s.powi(4) + x[1].powi(4) - 0.25
    }
    fn gradient(&self, x: Point) -> Point {
        let s = x[0] - self.shift;
        [4.0 * s.powi(3), 4.0 * x[1].powi(3)]
    }
}

/// Smoothed six pointed star `r - 0.7 + 0.2 cos(6 theta)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct StarLevelSet;

impl LevelSet for StarLevelSet {
    fn value(&self, x: Point) -> f64 {
        let r = x[0].hypot(x[1]);
        let t = x[1].atan2(x[0]);
        r - 0.7 + 0.2 * (6.0 * t).cos()
    }
    fn gradient(&self, x: Point) -> Point {
        let r = x[0].hypot(x[1]);
        if r < 1e-300 {
            // the origin lies well inside the domain; any finite value will do
            return [0.0, 0.0];
        }
        let t = x[1].atan2(x[0]);
        let (er, et) = ([x[0] / r, x[1] / r], [-x[1] / r, x[0] / r]);
        let dt = -1.2 * (6.0 * t).sin() / r;
        [er[0] + dt * et[0], er[1] + dt * et[1]]
    }
}

/// Example 1: quartic domain with a smooth solenoidal velocity.
///
/// `u = (4 y^3 c, -4 x^3 c)` with `c = cos(2 pi r)`, `r = x^4 + y^4`,
/// and `p = sin(pi x y) + x^3 + y^3`.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuarticExample {
    pub level_set: QuarticLevelSet,
}

impl QuarticExample {
    pub fn new() -> Self {
        Self::default()
    }

    /// `-Delta u`
    pub fn minus_laplacian(&self, p: Point) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let r = x.powi(4) + y.powi(4);
        let (s, c) = (2.0 * PI * r).sin_cos();
        let pi2 = PI * PI;
        let lap1 = -96.0 * PI * x * x * y.powi(3) * s - 256.0 * pi2 * x.powi(6) * y.powi(3) * c + 24.0 * y * c
            - 288.0 * PI * y.powi(5) * s
            - 256.0 * pi2 * y.powi(9) * c;
        let lap2 = -(24.0 * x * c - 288.0 * PI * x.powi(5) * s - 256.0 * pi2 * x.powi(9) * c
            - 96.0 * PI * x.powi(3) * y * y * s
            - 256.0 * pi2 * x.powi(3) * y.powi(6) * c);
        [-lap1, -lap2]
    }
}

impl Example for QuarticExample {
    fn level_set(&self) -> &dyn LevelSet {
        &self.level_set
    }
    fn velocity(&self, p: Point) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let c = (2.0 * PI * (x.powi(4) + y.powi(4))).cos();
        [4.0 * y.powi(3) * c, -4.0 * x.powi(3) * c]
    }
    fn velocity_gradient(&self, p: Point) -> Mat2 {
        let (x, y) = (p[0], p[1]);
        let (s, c) = (2.0 * PI * (x.powi(4) + y.powi(4))).sin_cos();
        [
            [-32.0 * PI * x.powi(3) * y.powi(3) * s, 12.0 * y * y * c - 32.0 * PI * y.powi(6) * s],
            [-12.0 * x * x * c + 32.0 * PI * x.powi(6) * s, 32.0 * PI * x.powi(3) * y.powi(3) * s],
        ]
    }
    fn pressure(&self, p: Point) -> f64 {
        (PI * p[0] * p[1]).sin() + p[0].powi(3) + p[1].powi(3)
    }
    fn pressure_gradient(&self, p: Point) -> Point {
        let c = (PI * p[0] * p[1]).cos();
        [PI * p[1] * c + 3.0 * p[0] * p[0], PI * p[0] * c + 3.0 * p[1] * p[1]]
    }
    fn force(&self, p: Point) -> [f64; 2] {
        let l = self.minus_laplacian(p);
        let g = self.pressure_gradient(p);
        [l[0] + g[0], l[1] + g[1]]
    }
}

/// Example 2: no flow in the star domain, `f = grad p` with `p = x^5 + y^5`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoFlowExample {
    pub level_set: StarLevelSet,
}

impl NoFlowExample {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Example for NoFlowExample {
    fn level_set(&self) -> &dyn LevelSet {
        &self.level_set
    }
    fn velocity(&self, _p: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn velocity_gradient(&self, _p: Point) -> Mat2 {
        [[0.0; 2]; 2]
    }
    fn pressure(&self, p: Point) -> f64 {
        p[0].powi(5) + p[1].powi(5)
    }
    fn pressure_gradient(&self, p: Point) -> Point {
        [5.0 * p[0].powi(4), 5.0 * p[1].powi(4)]
    }
    fn force(&self, p: Point) -> [f64; 2] {
        self.pressure_gradient(p)
    }
}

/// Example 1 (`id = 1`) or Example 2 (`id = 2`).
pub fn example_by_id(id: u32) -> Option<Box<dyn Example>> {
    match id {
        1 => Some(Box::new(QuarticExample::new())),
        2 => Some(Box::new(NoFlowExample::new())),
        _ => None,
    }
}
