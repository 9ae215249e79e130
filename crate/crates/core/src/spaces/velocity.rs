//! Piola-mapped Scott-Vogelius velocities with nodal degrees of freedom.
//!
//! On element `K` a velocity is `v = (1/J) F v^ o phi_K^{-1}` with `v^` a
//! vector polynomial of degree `k` on the reference triangle. The global
//! unknowns are the physical values `v(a_j)` at the mapped Lagrange nodes
//! `a_j = phi_K(a^_j)`, two per node. The local transform between physical
//! nodal values and reference nodal values is block diagonal with blocks
//! `(1/J) F` evaluated at the nodes.

use crate::error::{Error, Result};
use crate::geometry::{CutGeometry, ElementMap, MapEval, MAX_LOCAL};
use crate::linalg::{cond2, inv2, matvec, norm, Mat2, ZERO2};
use crate::mesh::Point;
use crate::quadrature::line_rule;
use crate::spaces::reference::{ReferenceElement, REF_EDGES, REF_VERTICES};

pub const MAX_VDOFS: usize = 2 * MAX_LOCAL;

/// Values of all local velocity basis functions at one point.
#[derive(Clone, Debug)]
pub struct VelocityBasis {
    pub n: usize,
    pub value: [[f64; 2]; MAX_VDOFS],
    /// Physical gradients, `grad[i][m] = d v_i / d x_m`.
    pub grad: [Mat2; MAX_VDOFS],
    pub div: [f64; MAX_VDOFS],
}

impl Default for VelocityBasis {
    fn default() -> Self {
        Self { n: 0, value: [[0.0; 2]; MAX_VDOFS], grad: [ZERO2; MAX_VDOFS], div: [0.0; MAX_VDOFS] }
    }
}

/// Value, gradient and divergence of a velocity field at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityValue {
    pub value: [f64; 2],
    pub grad: Mat2,
    pub div: f64,
}

/// The global velocity space `V_h` on the active mesh.
#[derive(Clone, Debug)]
pub struct VelocitySpace {
    pub degree: usize,
    /// Lagrange node of the deformation numbering -> velocity node (`usize::MAX` if unused).
    pub node_index: Vec<usize>,
    /// Velocity node -> Lagrange node.
    pub nodes: Vec<usize>,
}

impl VelocitySpace {
    pub fn new(geom: &CutGeometry) -> Self {
        let num = &geom.deformation.numbering;
        let mut node_index = vec![usize::MAX; num.n_nodes];
        let mut nodes = Vec::new();
        for &e in &geom.sets.active {
            for &g in num.element(e) {
                if node_index[g] == usize::MAX {
                    node_index[g] = nodes.len();
                    nodes.push(g);
                }
            }
        }
        Self { degree: geom.degree(), node_index, nodes }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    /// Physical (mapped) position of velocity node `i`.
    pub fn node_position(&self, geom: &CutGeometry, i: usize) -> Point {
        let g = self.nodes[i];
        let p = geom.deformation.numbering.positions[g];
        let d = geom.deformation.displacement[g];
        [p[0] + d[0], p[1] + d[1]]
    }

    /// Local evaluator for active element `e`.
    pub fn element(&self, geom: &CutGeometry, e: usize) -> Result<VelocityElement> {
        let map = geom.element_map(e);
        let re = &geom.reference;
        let n = re.len();
        let mut dofs = [0usize; MAX_VDOFS];
        for (j, &g) in geom.deformation.numbering.element(e).iter().enumerate() {
            let v = self.node_index[g];
            debug_assert!(v != usize::MAX);
            dofs[2 * j] = 2 * v;
            dofs[2 * j + 1] = 2 * v + 1;
        }
        let mut to_ref = [ZERO2; MAX_LOCAL];
        let mut worst: f64 = 1.0;
        for j in 0..n {
            let ev = map.eval(re, re.nodes()[j]);
            if !(ev.det > 0.0) {
                return Err(Error::ElementInversion { element: e, det: ev.det });
            }
            let fi = inv2(&ev.f);
            to_ref[j] = [[ev.det * fi[0][0], ev.det * fi[0][1]], [ev.det * fi[1][0], ev.det * fi[1][1]]];
            worst = worst.max(cond2(&ev.f));
        }
        if worst > 1e12 {
            return Err(Error::IllConditionedTransform { element: e, cond: worst });
        }
        Ok(VelocityElement { map, n_nodes: n, dofs, to_ref })
    }
}

/// Velocity basis of one element.
#[derive(Clone, Debug)]
pub struct VelocityElement {
    pub map: ElementMap,
    pub n_nodes: usize,
    /// Global dof of local dof `2 j + c` (node `j`, component `c`).
    pub dofs: [usize; MAX_VDOFS],
    /// `J F^{-1}` at each node: physical nodal value -> reference nodal value.
    pub to_ref: [Mat2; MAX_LOCAL],
}

impl VelocityElement {
    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs[..self.n_dofs()]
    }

    /// Evaluates all basis functions at `xref` (which may lie outside the
    /// reference triangle: the polynomial formulas extend).
    pub fn eval(&self, re: &ReferenceElement, xref: Point, out: &mut VelocityBasis) -> MapEval {
        let ev = self.map.eval(re, xref);
        self.eval_with(re, xref, &ev, out);
        ev
    }

    pub fn eval_with(&self, re: &ReferenceElement, xref: Point, ev: &MapEval, out: &mut VelocityBasis) {
        let n = self.n_nodes;
        let mut psi = [0.0; MAX_LOCAL];
        let mut dpsi = [[0.0; 2]; MAX_LOCAL];
        re.values_grads(xref, &mut psi, &mut dpsi);
        let f = &ev.f;
        let jac = ev.det;
        let finv = inv2(f);
        // P = F / J and its reference derivatives
        let p = [[f[0][0] / jac, f[0][1] / jac], [f[1][0] / jac, f[1][1] / jac]];
        let mut dp = [ZERO2; 2];
        if self.map.is_curved() {
            for l in 0..2 {
                let dfl = &ev.df[l];
                let tr = finv[0][0] * dfl[0][0] + finv[0][1] * dfl[1][0] + finv[1][0] * dfl[0][1] + finv[1][1] * dfl[1][1];
                for i in 0..2 {
                    for m in 0..2 {
                        dp[l][i][m] = (dfl[i][m] - tr * f[i][m]) / jac;
                    }
                }
            }
        }
        out.n = 2 * n;
        for j in 0..n {
            let g = &self.to_ref[j];
            for c in 0..2 {
                let col = [g[0][c], g[1][c]];
                let vhat = [psi[j] * col[0], psi[j] * col[1]];
                let idx = 2 * j + c;
                out.value[idx] = matvec(&p, vhat);
                // reference derivatives of v = P v^
                let mut dref = [[0.0; 2]; 2]; // dref[l] = d v / d x^_l
                for l in 0..2 {
                    let dv = [dpsi[j][l] * col[0], dpsi[j][l] * col[1]];
                    let a = matvec(&p, dv);
                    let b = matvec(&dp[l], vhat);
                    dref[l] = [a[0] + b[0], a[1] + b[1]];
                }
                let mut grad = ZERO2;
                for i in 0..2 {
                    for m in 0..2 {
                        grad[i][m] = dref[0][i] * finv[0][m] + dref[1][i] * finv[1][m];
                    }
                }
                out.grad[idx] = grad;
                out.div[idx] = (dpsi[j][0] * col[0] + dpsi[j][1] * col[1]) / jac;
            }
        }
    }

    /// Field value from local coefficients (physical nodal values).
    pub fn eval_field(&self, re: &ReferenceElement, coeffs: &[f64], xref: Point) -> VelocityValue {
        let mut basis = VelocityBasis::default();
        self.eval(re, xref, &mut basis);
        combine(&basis, coeffs)
    }

    /// Local coefficients gathered from a global vector.
    pub fn gather(&self, global: &[f64]) -> [f64; MAX_VDOFS] {
        let mut c = [0.0; MAX_VDOFS];
        for (i, &d) in self.dofs().iter().enumerate() {
            c[i] = global[d];
        }
        c
    }
}

/// Linear combination of basis values.
pub fn combine(basis: &VelocityBasis, coeffs: &[f64]) -> VelocityValue {
    let mut v = VelocityValue { value: [0.0; 2], grad: ZERO2, div: 0.0 };
    for i in 0..basis.n {
        let c = coeffs[i];
        if c == 0.0 {
            continue;
        }
        v.value[0] += c * basis.value[i][0];
        v.value[1] += c * basis.value[i][1];
        for a in 0..2 {
            for b in 0..2 {
                v.grad[a][b] += c * basis.grad[i][a][b];
            }
        }
        v.div += c * basis.div[i];
    }
    v
}

/// Elementwise evaluation of a global velocity vector at a reference point.
pub fn eval_velocity(
    space: &VelocitySpace,
    geom: &CutGeometry,
    e: usize,
    coeffs: &[f64],
    xref: Point,
) -> Result<VelocityValue> {
    let el = space.element(geom, e)?;
    let local = el.gather(coeffs);
    Ok(el.eval_field(&geom.reference, &local[..el.n_dofs()], xref))
}

/// Nodal interpolant `I_V v` (physical values at mapped nodes).
///
/// With `flux_correct`, elements with facets on the boundary of the active mesh
/// receive facet-bubble corrections (added in the affine configuration and
/// Piola-mapped back) so that the normal flux through every such facet matches
/// that of `v`.
pub fn interpolate_velocity(
    space: &VelocitySpace,
    geom: &CutGeometry,
    v: &dyn Fn(Point) -> [f64; 2],
    flux_correct: bool,
) -> Result<Vec<f64>> {
    let mut coeffs = vec![0.0; space.n_dofs()];
    for i in 0..space.n_nodes() {
        let val = v(space.node_position(geom, i));
        coeffs[2 * i] = val[0];
        coeffs[2 * i + 1] = val[1];
    }
    if flux_correct {
        for (e, l) in active_boundary_facets(geom) {
            correct_facet_flux(space, geom, e, l, v, &mut coeffs)?;
        }
    }
    Ok(coeffs)
}

/// `(element, local edge)` pairs of facets on the boundary of the active mesh.
pub fn active_boundary_facets(geom: &CutGeometry) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &e in &geom.sets.active {
        for l in 0..3 {
            let f = &geom.mesh.facets[geom.mesh.elem_facets[e][l]];
            let boundary = match f.other(e) {
                None => true,
                Some(nb) => !geom.sets.is_active(nb),
            };
            if boundary {
                out.push((e, l));
            }
        }
    }
    out
}

/// Outward normal flux `int_F v . n ds` over local edge `l` of an element, with
/// `v` evaluated at physical points.
pub fn facet_flux(
    geom: &CutGeometry,
    map: &ElementMap,
    l: usize,
    v: &mut dyn FnMut(Point, &MapEval) -> [f64; 2],
) -> f64 {
    let [a, b] = REF_EDGES[l];
    let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    let rule = line_rule(4 * geom.degree() + 2);
    let mut flux = 0.0;
    for (t, w) in rule.points.iter().zip(&rule.weights) {
        let xr = [pa[0] + t * d[0], pa[1] + t * d[1]];
        let ev = map.eval(&geom.reference, xr);
        let ft = matvec(&ev.f, d);
        // counter-clockwise orientation: outward normal times ds is (t_y, -t_x) dt
        let nds = [ft[1], -ft[0]];
        let val = v(xr, &ev);
        flux += w * (val[0] * nds[0] + val[1] * nds[1]);
    }
    flux
}

fn correct_facet_flux(
    space: &VelocitySpace,
    geom: &CutGeometry,
    e: usize,
    l: usize,
    v: &dyn Fn(Point) -> [f64; 2],
    coeffs: &mut [f64],
) -> Result<()> {
    let el = space.element(geom, e)?;
    let re = &geom.reference;
    let local = el.gather(coeffs);
    let mut basis = VelocityBasis::default();
    let defect = facet_flux(geom, &el.map, l, &mut |xr, ev| {
        el.eval_with(re, xr, ev, &mut basis);
        let vh = combine(&basis, &local[..el.n_dofs()]).value;
        let ve = v(ev.x);
        [ve[0] - vh[0], ve[1] - vh[1]]
    });
    // bubble 4 lambda_a lambda_b on the affine facet, integral = 2/3 |F~|
    let [a, b] = REF_EDGES[l];
    let (ta, tb) = (el.map.tilde(REF_VERTICES[a]), el.map.tilde(REF_VERTICES[b]));
    let tvec = [tb[0] - ta[0], tb[1] - ta[1]];
    let flen = norm(tvec);
    let alpha = defect / (2.0 / 3.0 * flen);
    let n_tilde = [tvec[1] / flen, -tvec[0] / flen];
    // reference field of the tilde bubble: det(A) A^{-1} n~ times the bubble
    let ai = el.map.affine_inv;
    let dir_ref = {
        let r = matvec(&ai, n_tilde);
        [el.map.det_affine * r[0], el.map.det_affine * r[1]]
    };
    let bary = |x: Point| [1.0 - x[0] - x[1], x[0], x[1]];
    for j in 0..el.n_nodes {
        let xr = re.nodes()[j];
        let lam = bary(xr);
        let bub = 4.0 * lam[a] * lam[b];
        if bub == 0.0 {
            continue;
        }
        let ev = el.map.eval(re, xr);
        let phys = matvec(&ev.f, dir_ref);
        coeffs[el.dofs[2 * j]] += alpha * bub * phys[0] / ev.det;
        coeffs[el.dofs[2 * j + 1]] += alpha * bub * phys[1] / ev.det;
    }
    Ok(())
}
