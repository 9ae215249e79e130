//! Level sets, the isoparametric deformation and cut-cell quadrature.

mod cut;
mod deformation;
mod quadrature;

pub use cut::{cut_subdivide, triangle_area, CutPieces};
pub use deformation::{build_deformation, IsoDeformation};
pub use quadrature::{build_quadratures, CutQuadrature, QuadPoint, SurfacePoint};

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{det2, Mat2, ZERO2};
use crate::mesh::{alfeld_split, classify_elements, AlfeldMesh, ElementSets, MacroMesh, Point};
use crate::spaces::reference::ReferenceElement;

/// Upper bound on local Lagrange nodes (degree 4).
pub const MAX_LOCAL: usize = 15;
const INVERSE_ITERS: usize = 60;

/// Scalar field whose negative part is the physical domain.
pub trait LevelSet: Send + Sync {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Point;
}

/// `a x + b y + c`
#[derive(Clone, Copy, Debug)]
pub struct LinearLevelSet {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LevelSet for LinearLevelSet {
    fn value(&self, x: Point) -> f64 {
        self.a * x[0] + self.b * x[1] + self.c
    }
    fn gradient(&self, _x: Point) -> Point {
        [self.a, self.b]
    }
}

/// `|x - center|^2 - r^2`
#[derive(Clone, Copy, Debug)]
pub struct CircleLevelSet {
    pub center: Point,
    pub radius: f64,
}

impl LevelSet for CircleLevelSet {
    fn value(&self, x: Point) -> f64 {
        (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2) - self.radius.powi(2)
    }
    fn gradient(&self, x: Point) -> Point {
        [2.0 * (x[0] - self.center[0]), 2.0 * (x[1] - self.center[1])]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantLevelSet(pub f64);

impl LevelSet for ConstantLevelSet {
    fn value(&self, _x: Point) -> f64 {
        self.0
    }
    fn gradient(&self, _x: Point) -> Point {
        [0.0, 0.0]
    }
}

/// Continuous P1 level set on the Alfeld vertices.
#[derive(Clone, Debug)]
pub struct DiscreteLevelSet {
    pub nodal_values: Vec<f64>,
    /// Values with `|v| <= snap_tol` count as `-snap_tol` (inside).
    pub snap_tol: f64,
}

impl DiscreteLevelSet {
    #[inline]
    pub fn vertex_value(&self, v: usize) -> f64 {
        let val = self.nodal_values[v];
        if val.abs() <= self.snap_tol {
            -self.snap_tol
        } else {
            val
        }
    }

    /// Snapped vertex values of element `e`.
    pub fn element_values(&self, am: &AlfeldMesh, e: usize) -> [f64; 3] {
        let t = am.children[e];
        [self.vertex_value(t[0]), self.vertex_value(t[1]), self.vertex_value(t[2])]
    }

    /// Value of the interpolant at reference point `xref` of element `e`.
    pub fn eval_ref(&self, am: &AlfeldMesh, e: usize, xref: Point) -> f64 {
        let v = self.element_values(am, e);
        v[0] * (1.0 - xref[0] - xref[1]) + v[1] * xref[0] + v[2] * xref[1]
    }
}

/// Nodal P1 interpolation of `ls` on the Alfeld vertices (barycenters included).
pub fn interpolate_p1(ls: &dyn LevelSet, am: &AlfeldMesh) -> Result<DiscreteLevelSet> {
    let mut nodal_values = Vec::with_capacity(am.vertices.len());
    for (v, p) in am.vertices.iter().enumerate() {
        let val = ls.value(*p);
        if !val.is_finite() {
            return Err(Error::NonFiniteLevelSet { vertex: v, x: p[0], y: p[1] });
        }
        nodal_values.push(val);
    }
    Ok(DiscreteLevelSet { nodal_values, snap_tol: 1e-12 * am.h() })
}

/// The reference-to-physical map of one Alfeld element, `phi_K = Phi_h o phi_K~`.
#[derive(Clone, Debug)]
pub struct ElementMap {
    pub element: usize,
    /// Affine (tilde) vertices.
    pub vertices: [Point; 3],
    /// Affine Jacobian with columns `p1 - p0`, `p2 - p0`.
    pub affine: Mat2,
    pub affine_inv: Mat2,
    pub det_affine: f64,
    /// Physical positions of the degree-k nodes when the element is curved.
    pub curved: Option<[Point; MAX_LOCAL]>,
}

/// Map value and derivatives at a reference point.
#[derive(Clone, Copy, Debug)]
pub struct MapEval {
    pub x: Point,
    /// `F = D phi_K`
    pub f: Mat2,
    pub det: f64,
    /// `dF / dx^_m` for m = 0, 1
    pub df: [Mat2; 2],
}

impl ElementMap {
    pub fn is_curved(&self) -> bool {
        self.curved.is_some()
    }

    /// Affine image of a reference point.
    #[inline]
    pub fn tilde(&self, xref: Point) -> Point {
        let [p0, _, _] = self.vertices;
        let a = &self.affine;
        [p0[0] + a[0][0] * xref[0] + a[0][1] * xref[1], p0[1] + a[1][0] * xref[0] + a[1][1] * xref[1]]
    }

    /// Inverse of the affine map, extended to the whole plane.
    #[inline]
    pub fn to_ref(&self, xt: Point) -> Point {
        let d = [xt[0] - self.vertices[0][0], xt[1] - self.vertices[0][1]];
        crate::linalg::matvec(&self.affine_inv, d)
    }

    /// Evaluates the map; `re` is the degree-k reference element of the deformation.
    pub fn eval(&self, re: &ReferenceElement, xref: Point) -> MapEval {
        match &self.curved {
            None => MapEval { x: self.tilde(xref), f: self.affine, det: self.det_affine, df: [ZERO2; 2] },
            Some(nodes) => {
                let n = re.len();
                let mut vals = [0.0; MAX_LOCAL];
                let mut grads = [[0.0; 2]; MAX_LOCAL];
                let mut hess = [[0.0; 3]; MAX_LOCAL];
                re.values_grads(xref, &mut vals, &mut grads);
                re.hessians(xref, &mut hess);
                let mut x = [0.0; 2];
                let mut f = ZERO2;
                let mut df = [ZERO2; 2];
                for j in 0..n {
                    let y = nodes[j];
                    for i in 0..2 {
                        x[i] += y[i] * vals[j];
                        f[i][0] += y[i] * grads[j][0];
                        f[i][1] += y[i] * grads[j][1];
                        df[0][i][0] += y[i] * hess[j][0];
                        df[0][i][1] += y[i] * hess[j][1];
                        df[1][i][0] += y[i] * hess[j][1];
                        df[1][i][1] += y[i] * hess[j][2];
                    }
                }
                MapEval { x, f, det: det2(&f), df }
            }
        }
    }

    /// Reference point whose image under the (polynomially extended) map is
    /// `x`, by damped Newton from `guess`. `None` when the iteration stalls,
    /// which happens where the extension folds far outside the element.
    pub fn inverse(&self, re: &ReferenceElement, x: Point, guess: Point) -> Option<Point> {
        if self.curved.is_none() {
            return Some(self.to_ref(x));
        }
        let tol = 1e-14 * (1.0 + x[0].abs() + x[1].abs());
        let mut y = guess;
        let mut ev = self.eval(re, y);
        let mut r = [ev.x[0] - x[0], ev.x[1] - x[1]];
        for _ in 0..INVERSE_ITERS {
            let rn = r[0].hypot(r[1]);
            if rn <= tol {
                return Some(y);
            }
            if ev.det == 0.0 {
                return None;
            }
            let s = crate::linalg::matvec(&crate::linalg::inv2(&ev.f), r);
            let mut t = 1.0;
            loop {
                let yn = [y[0] - t * s[0], y[1] - t * s[1]];
                let en = self.eval(re, yn);
                let rr = [en.x[0] - x[0], en.x[1] - x[1]];
                if rr[0].hypot(rr[1]) < (1.0 - 1e-4 * t) * rn {
                    (y, ev, r) = (yn, en, rr);
                    break;
                }
                t *= 0.5;
                if t < 1e-6 {
                    return None;
                }
            }
        }
        None
    }

    /// Physical image of a reference point.
    pub fn point(&self, re: &ReferenceElement, xref: Point) -> Point {
        match &self.curved {
            None => self.tilde(xref),
            Some(nodes) => {
                let mut vals = [0.0; MAX_LOCAL];
                re.values(xref, &mut vals);
                let mut x = [0.0; 2];
                for j in 0..re.len() {
                    x[0] += nodes[j][0] * vals[j];
                    x[1] += nodes[j][1] * vals[j];
                }
                x
            }
        }
    }
}

/// Whether integration domains use the high-order deformation or the
/// polygonal P1 zero set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryMode {
    HighOrder,
    P1,
}

/// Everything that describes the discrete domain: split mesh, P1 level set,
/// element sets and the deformation `Phi_h`.
#[derive(Clone, Debug)]
pub struct CutGeometry {
    pub mesh: AlfeldMesh,
    pub phi: DiscreteLevelSet,
    pub sets: ElementSets,
    pub deformation: IsoDeformation,
    pub reference: ReferenceElement,
}

impl CutGeometry {
    pub fn build(ls: &dyn LevelSet, background: &MacroMesh, k: usize, mode: GeometryMode) -> Result<Self> {
        let mesh = alfeld_split(background);
        let phi = interpolate_p1(ls, &mesh)?;
        let sets = classify_elements(&mesh, &phi)?;
        let deformation = match mode {
            GeometryMode::HighOrder => build_deformation(ls, &phi, &mesh, &sets, k)?,
            GeometryMode::P1 => IsoDeformation::identity(&mesh, k),
        };
        Ok(Self { reference: ReferenceElement::new(k), mesh, phi, sets, deformation })
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn degree(&self) -> usize {
        self.deformation.degree
    }

    pub fn element_map(&self, e: usize) -> ElementMap {
        let vertices = self.mesh.element_points(e);
        let affine = [
            [vertices[1][0] - vertices[0][0], vertices[2][0] - vertices[0][0]],
            [vertices[1][1] - vertices[0][1], vertices[2][1] - vertices[0][1]],
        ];
        let curved = if self.deformation.curved[e] {
            let mut nodes = [[0.0; 2]; MAX_LOCAL];
            for (j, &g) in self.deformation.numbering.element(e).iter().enumerate() {
                let p = self.deformation.numbering.positions[g];
                let d = self.deformation.displacement[g];
                nodes[j] = [p[0] + d[0], p[1] + d[1]];
            }
            Some(nodes)
        } else {
            None
        };
        ElementMap {
            element: e,
            vertices,
            affine,
            affine_inv: crate::linalg::inv2(&affine),
            det_affine: det2(&affine),
            curved,
        }
    }

    /// Writes the mapped interface `Gamma_h` as legacy-VTK polydata (one
    /// polyline per cut element, `samples` segments each).
    pub fn write_interface_vtk<W: Write>(&self, mut w: W, samples: usize) -> Result<()> {
        let mut pts = Vec::new();
        let mut lines = Vec::new();
        for &e in &self.sets.alfeld_cut {
            let vals = self.phi.element_values(&self.mesh, e);
            let pieces = cut_subdivide(crate::spaces::reference::REF_VERTICES, vals);
            if let Some([a, b]) = pieces.segment {
                let map = self.element_map(e);
                let start = pts.len();
                for s in 0..=samples {
                    let t = s as f64 / samples as f64;
                    pts.push(map.point(&self.reference, [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]));
                }
                lines.push((start, samples + 1));
            }
        }
        writeln!(w, "# vtk DataFile Version 3.0\ninterface\nASCII\nDATASET POLYDATA")?;
        writeln!(w, "POINTS {} double", pts.len())?;
        for p in &pts {
            writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
        }
        let size: usize = lines.iter().map(|l| l.1 + 1).sum();
        writeln!(w, "LINES {} {}", lines.len(), size)?;
        for (start, n) in lines {
            let ids: Vec<String> = (start..start + n).map(|i| i.to_string()).collect();
            writeln!(w, "{} {}", n, ids.join(" "))?;
        }
        Ok(())
    }
}
