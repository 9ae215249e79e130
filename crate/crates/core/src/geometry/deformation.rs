//! The isoparametric mesh deformation `Phi_h`.
//!
//! On every cut element the degree-k nodes are moved along the normalized
//! level-set gradient until the degree-k interpolant of the level set takes the
//! value of the P1 interpolant at the undisplaced node. Nodes shared between
//! cut elements receive the mean of their per-element displacements; every
//! other node stays in place.

use super::{LevelSet, DiscreteLevelSet, MAX_LOCAL};
use crate::error::{Error, Result};
use crate::linalg::{inv2, matvec_t};
use crate::mesh::{AlfeldMesh, ElementSets, NodeNumbering, Point};
use crate::quadrature::triangle_rule;
use crate::spaces::reference::ReferenceElement;

const ROOT_TOL: f64 = 1e-14;
const ROOT_MAX_ITER: usize = 50;
const MAX_DAMPING: usize = 30;

/// Nodal displacement field of degree `k` on the Alfeld mesh.
#[derive(Clone, Debug)]
pub struct IsoDeformation {
    pub degree: usize,
    pub numbering: NodeNumbering,
    pub displacement: Vec<Point>,
    /// Elements with at least one displaced node.
    pub curved: Vec<bool>,
}

impl IsoDeformation {
    pub fn identity(am: &AlfeldMesh, k: usize) -> Self {
        let numbering = NodeNumbering::new(am, k);
        let n = numbering.n_nodes;
        Self { degree: k, numbering, displacement: vec![[0.0; 2]; n], curved: vec![false; am.n_elements()] }
    }

    pub fn max_displacement(&self) -> f64 {
        self.displacement.iter().map(|d| d[0].hypot(d[1])).fold(0.0, f64::max)
    }
}

/// Safeguarded Newton iteration for `g(d) = 0` on `[lo, hi]` with `lo < 0 < hi`;
/// `g` returns value and derivative. The bracket grows geometrically from the
/// origin so that the root nearest to `d = 0` is found.
fn find_root(g: impl Fn(f64) -> (f64, f64), lo: f64, hi: f64) -> Option<f64> {
    let (g0, _) = g(0.0);
    if g0 == 0.0 {
        return Some(0.0);
    }
    let mut s = 1e-3;
    let (lo, hi) = loop {
        let (l, r) = (s * lo, s * hi);
        let (gl, gr) = (g(l).0, g(r).0);
        if gl.signum() != g0.signum() {
            break (l, 0.0);
        }
        if gr.signum() != g0.signum() {
            break (0.0, r);
        }
        if s >= 1.0 {
            return None;
        }
        s = (2.0 * s).min(1.0);
    };
    let (glo, ghi) = (g(lo).0, g(hi).0);
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    // keep g(a) < 0 < g(b)
    let (mut a, mut b) = if glo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut d = 0.0;
    for _ in 0..ROOT_MAX_ITER {
        let (val, der) = g(d);
        if val == 0.0 {
            return Some(d);
        }
        if val < 0.0 {
            a = d;
        } else {
            b = d;
        }
        let newton = if der != 0.0 { d - val / der } else { f64::NAN };
        let (l, r) = (a.min(b), a.max(b));
        let next = if newton.is_finite() && newton > l && newton < r { newton } else { 0.5 * (a + b) };
        let step = (next - d).abs();
        d = next;
        if step <= ROOT_TOL {
            return Some(d);
        }
    }
    Some(d)
}

/// Builds `Phi_h` for degree `k >= 2`.
pub fn build_deformation(
    ls: &dyn LevelSet,
    phi: &DiscreteLevelSet,
    am: &AlfeldMesh,
    sets: &ElementSets,
    k: usize,
) -> Result<IsoDeformation> {
    assert!(k >= 2, "isoparametric deformation needs k >= 2");
    let mut def = IsoDeformation::identity(am, k);
    let re = ReferenceElement::new(k);
    let n_loc = re.len();
    let h = am.h();
    let mut sum = vec![[0.0; 2]; def.numbering.n_nodes];
    let mut count = vec![0u32; def.numbering.n_nodes];

    for &e in &sets.alfeld_cut {
        let [p0, p1, p2] = am.element_points(e);
        let a = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let a_inv = inv2(&a);
        let to_ref = |x: Point| {
            let d = [x[0] - p0[0], x[1] - p0[1]];
            [a_inv[0][0] * d[0] + a_inv[0][1] * d[1], a_inv[1][0] * d[0] + a_inv[1][1] * d[1]]
        };
        let nodes = def.numbering.element(e);
        let mut phi_nodes = [0.0; MAX_LOCAL];
        for (j, &g) in nodes.iter().enumerate() {
            phi_nodes[j] = ls.value(def.numbering.positions[g]);
        }
        let vals = phi.element_values(am, e);
        // degree-k interpolant, polynomially extended beyond the element
        let interp = |x: Point| -> (f64, Point) {
            let mut v = [0.0; MAX_LOCAL];
            let mut gr = [[0.0; 2]; MAX_LOCAL];
            re.values_grads(to_ref(x), &mut v, &mut gr);
            let (mut val, mut gref) = (0.0, [0.0; 2]);
            for j in 0..n_loc {
                val += phi_nodes[j] * v[j];
                gref[0] += phi_nodes[j] * gr[j][0];
                gref[1] += phi_nodes[j] * gr[j][1];
            }
            (val, matvec_t(&a_inv, gref))
        };
        for (j, &g) in nodes.iter().enumerate() {
            let x = def.numbering.positions[g];
            let xr = re.nodes()[j];
            let target = vals[0] * (1.0 - xr[0] - xr[1]) + vals[1] * xr[0] + vals[2] * xr[1];
            let grad = ls.gradient(x);
            let gn = grad[0].hypot(grad[1]);
            let dir = if gn > 0.0 { [grad[0] / gn, grad[1] / gn] } else { [0.0, 0.0] };
            let root = find_root(
                |d| {
                    let (v, gr) = interp([x[0] + d * dir[0], x[1] + d * dir[1]]);
                    (v - target, gr[0] * dir[0] + gr[1] * dir[1])
                },
                -0.5 * h,
                0.5 * h,
            )
            .ok_or(Error::RootNotBracketed { x: x[0], y: x[1] })?;
            sum[g][0] += root * dir[0];
            sum[g][1] += root * dir[1];
            count[g] += 1;
        }
    }
    for (g, c) in count.iter().enumerate() {
        if *c > 0 {
            let d = [sum[g][0] / *c as f64, sum[g][1] / *c as f64];
            let mag = d[0].hypot(d[1]);
            if mag > 0.5 * h {
                return Err(Error::DisplacementTooLarge { node: g, magnitude: mag });
            }
            def.displacement[g] = d;
        }
    }
    for e in 0..am.n_elements() {
        def.curved[e] = def.numbering.element(e).iter().any(|&g| def.displacement[g] != [0.0, 0.0]);
    }
    // Coarse meshes can fold skinny Alfeld elements; halve the displacements
    // of offending elements until every map is valid again.
    for _ in 0..MAX_DAMPING {
        let bad = inverted_elements(am, &def, &re);
        if bad.is_empty() {
            break;
        }
        for (e, _) in bad {
            for &g in def.numbering.element(e) {
                def.displacement[g][0] *= 0.5;
                def.displacement[g][1] *= 0.5;
            }
        }
    }
    if let Some(&(element, det)) = inverted_elements(am, &def, &re).first() {
        return Err(Error::ElementInversion { element, det });
    }
    for e in 0..am.n_elements() {
        def.curved[e] = def.numbering.element(e).iter().any(|&g| def.displacement[g] != [0.0, 0.0]);
    }
    Ok(def)
}

/// Elements whose `det(D phi_K)` is not positive somewhere on a degree-2k
/// rule, at the nodes or on an equispaced lattice, with the first offending value.
fn inverted_elements(am: &AlfeldMesh, def: &IsoDeformation, re: &ReferenceElement) -> Vec<(usize, f64)> {
    let mut bad = Vec::new();
    let mut points = triangle_rule(2 * def.degree).points;
    points.extend_from_slice(re.nodes());
    let m = 4 * def.degree;
    for j in 0..=m {
        for i in 0..=m - j {
            points.push([i as f64 / m as f64, j as f64 / m as f64]);
        }
    }
    let mut nodes = [[0.0; 2]; MAX_LOCAL];
    let mut grads = [[0.0; 2]; MAX_LOCAL];
    let mut vals = [0.0; MAX_LOCAL];
    for e in (0..am.n_elements()).filter(|&e| def.curved[e]) {
        for (j, &g) in def.numbering.element(e).iter().enumerate() {
            let p = def.numbering.positions[g];
            let d = def.displacement[g];
            nodes[j] = [p[0] + d[0], p[1] + d[1]];
        }
        for x in &points {
            re.values_grads(*x, &mut vals, &mut grads);
            let mut f = [[0.0; 2]; 2];
            for j in 0..re.len() {
                for i in 0..2 {
                    f[i][0] += nodes[j][i] * grads[j][0];
                    f[i][1] += nodes[j][i] * grads[j][1];
                }
            }
            let det = crate::linalg::det2(&f);
            if !(det > 0.0) {
                bad.push((e, det));
                break;
            }
        }
    }
    bad
}
