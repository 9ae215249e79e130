//! Quadrature on the mapped domains `Omega_h`, `Gamma_h`, the band and the
//! whole active mesh.
//!
//! Cut elements are subdivided in reference coordinates by the P1 zero set;
//! the resulting rules are pushed through `phi_K`, so physical weights carry
//! `det(D phi_K)` (volumes) or `|D phi_K tau|` (the interface).

use super::{cut_subdivide, CutGeometry, ElementMap};
use crate::error::{Error, Result};
use crate::linalg::{inv2, matvec, matvec_t, norm};
use crate::mesh::{ElementClass, Point};
use crate::quadrature::{line_rule, map_triangle_rule, triangle_rule, TriangleRule};
use crate::spaces::reference::REF_VERTICES;
use std::io::Write;

#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub xref: Point,
    pub x: Point,
    pub weight: f64,
}

/// Quadrature point carrying the discrete normal `n_h` (and the interface tangent).
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub xref: Point,
    pub x: Point,
    pub weight: f64,
    pub normal: Point,
    pub tangent: Point,
}

/// Per-element quadrature tables, indexed by Alfeld element.
#[derive(Clone, Debug)]
pub struct CutQuadrature {
    pub order: usize,
    /// `Omega_h`
    pub volume: Vec<Vec<QuadPoint>>,
    /// `Omega_h^T` (every active element)
    pub bulk: Vec<Vec<QuadPoint>>,
    /// `Gamma_h`
    pub interface: Vec<Vec<SurfacePoint>>,
    /// `Omega_h^Gamma` with the extended normal (tangent unused)
    pub band: Vec<Vec<SurfacePoint>>,
}

/// `n_h = F^{-T} grad^ phi_h / |.|` with the constant reference gradient of the P1 level set.
pub fn discrete_normal(f: &crate::linalg::Mat2, vals: [f64; 3]) -> Point {
    let gref = [vals[1] - vals[0], vals[2] - vals[0]];
    let w = matvec_t(&inv2(f), gref);
    let n = norm(w);
    [w[0] / n, w[1] / n]
}

fn full_rule(
    geom: &CutGeometry,
    map: &ElementMap,
    rule: &TriangleRule,
    out: &mut Vec<QuadPoint>,
) -> Result<()> {
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let ev = map.eval(&geom.reference, *p);
        if !(ev.det > 0.0) {
            return Err(Error::ElementInversion { element: map.element, det: ev.det });
        }
        out.push(QuadPoint { xref: *p, x: ev.x, weight: w * ev.det });
    }
    Ok(())
}

/// Builds all rules with exactness `order` on the reference element.
pub fn build_quadratures(geom: &CutGeometry, order: usize) -> Result<CutQuadrature> {
    let n = geom.mesh.n_elements();
    let mut q = CutQuadrature {
        order,
        volume: vec![Vec::new(); n],
        bulk: vec![Vec::new(); n],
        interface: vec![Vec::new(); n],
        band: vec![Vec::new(); n],
    };
    let tri = triangle_rule(order);
    let line = line_rule(order);
    for &e in &geom.sets.active {
        let map = geom.element_map(e);
        let mut bulk = Vec::with_capacity(tri.len());
        full_rule(geom, &map, &tri, &mut bulk)?;
        match geom.sets.class[e] {
            ElementClass::Inside => q.volume[e] = bulk.clone(),
            ElementClass::Outside => {}
            ElementClass::Cut => {
                let vals = geom.phi.element_values(&geom.mesh, e);
                let pieces = cut_subdivide(REF_VERTICES, vals);
                let mut vol = Vec::new();
                for sub in &pieces.inside {
                    for (p, w) in map_triangle_rule(&tri, *sub) {
                        let ev = map.eval(&geom.reference, p);
                        if !(ev.det > 0.0) {
                            return Err(Error::ElementInversion { element: e, det: ev.det });
                        }
                        vol.push(QuadPoint { xref: p, x: ev.x, weight: w * ev.det });
                    }
                }
                q.volume[e] = vol;
                if let Some([a, b]) = pieces.segment {
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let mut surf = Vec::with_capacity(line.points.len());
                    for (t, w) in line.points.iter().zip(&line.weights) {
                        let p = [a[0] + t * d[0], a[1] + t * d[1]];
                        let ev = map.eval(&geom.reference, p);
                        if !(ev.det > 0.0) {
                            return Err(Error::ElementInversion { element: e, det: ev.det });
                        }
                        let ft = matvec(&ev.f, d);
                        let len = norm(ft);
                        surf.push(SurfacePoint {
                            xref: p,
                            x: ev.x,
                            weight: w * len,
                            normal: discrete_normal(&ev.f, vals),
                            tangent: [ft[0] / len, ft[1] / len],
                        });
                    }
                    q.interface[e] = surf;
                }
                q.band[e] = bulk
                    .iter()
                    .map(|qp| {
                        let ev = map.eval(&geom.reference, qp.xref);
                        SurfacePoint {
                            xref: qp.xref,
                            x: qp.x,
                            weight: qp.weight,
                            normal: discrete_normal(&ev.f, vals),
                            tangent: [0.0; 2],
                        }
                    })
                    .collect();
            }
        }
        q.bulk[e] = bulk;
    }
    Ok(q)
}

impl CutQuadrature {
    /// `meas(Omega_h)` from the volume rule.
    pub fn volume_measure(&self) -> f64 {
        self.volume.iter().flatten().map(|p| p.weight).sum()
    }

    pub fn interface_measure(&self) -> f64 {
        self.interface.iter().flatten().map(|p| p.weight).sum()
    }

    /// Writes `element domain x y weight [nx ny]` lines.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# element domain x y weight nx ny")?;
        for (e, pts) in self.volume.iter().enumerate() {
            for p in pts {
                writeln!(w, "{e} volume {:.17e} {:.17e} {:.17e}", p.x[0], p.x[1], p.weight)?;
            }
        }
        for (e, pts) in self.interface.iter().enumerate() {
            for p in pts {
                writeln!(
                    w,
                    "{e} interface {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                    p.x[0], p.x[1], p.weight, p.normal[0], p.normal[1]
                )?;
            }
        }
        Ok(())
    }
}
