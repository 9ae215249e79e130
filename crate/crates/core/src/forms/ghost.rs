//! Direct (volumetric patch jump) ghost penalty.
//!
//! For a facet with owners `K1`, `K2` the jump on `K_i` compares the function
//! with the extension of its representation on the neighbour `K_j`. A physical
//! point `x = phi_i(x^_i)` of `K_i` is paired with the extended reference point
//! `x^_j` solving `phi_j(x^_j) = x`, where `phi_j` is the polynomial map of
//! `K_j` continued beyond the element. Pairing through the undeformed
//! coordinates instead (`x^_j = A_j^{-1} (x~ - p_j)`) is off by `O(h^2)`
//! because the deformation is only continuous across facets, which caps the
//! consistency of the penalty; that pairing is kept as the fallback where the
//! continued map folds and Newton stalls (seen on coarse meshes only).
//! For Piola-mapped velocities the neighbour's value `(1/J_j) F_j v^_j` is the
//! quotient of the two polynomials `J~_j (v o Phi_h)` and `J~_j`, so this is
//! exactly the rational extension.

use crate::error::{Error, Result};
use crate::geometry::{CutGeometry, ElementMap, MAX_LOCAL};
use crate::mesh::{ElementClass, Point};
use crate::quadrature::{triangle_rule, TriangleRule};
use crate::solver::TripletBuilder;
use crate::spaces::reference::ReferenceElement;
use crate::spaces::{combine, ContinuousSpace, VelocityBasis, VelocitySpace};

use super::FormParams;

/// Smallest admissible extended Jacobian ratio `J~`.
pub const MIN_EXTENDED_JACOBIAN: f64 = 1e-8;

/// One quadrature point of a facet patch: a point of `K_own` and the
/// corresponding extended reference point of `K_other`.
#[derive(Clone, Copy, Debug)]
pub struct PatchPoint {
    pub own: usize,
    pub other: usize,
    pub xref_own: Point,
    pub xref_other: Point,
    /// Physical weight (`w^ J_own`).
    pub weight: f64,
}

/// Quadrature points covering both halves of the patch of facet `f`.
pub fn patch_points(geom: &CutGeometry, f: usize, rule: &TriangleRule) -> Result<Vec<PatchPoint>> {
    let facet = &geom.mesh.facets[f];
    let [e1, e2] = facet.owners;
    let (m1, m2) = (geom.element_map(e1), geom.element_map(e2));
    let mut pts = Vec::with_capacity(2 * rule.len());
    for (own, other, mo, mx) in [(e1, e2, &m1, &m2), (e2, e1, &m2, &m1)] {
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let ev = mo.eval(&geom.reference, *x);
            if !(ev.det > 0.0) {
                return Err(Error::ElementInversion { element: own, det: ev.det });
            }
            let guess = mx.to_ref(mo.tilde(*x));
            let xref_other = if mo.is_curved() || mx.is_curved() {
                mx.inverse(&geom.reference, ev.x, guess).unwrap_or(guess)
            } else {
                guess
            };
            pts.push(PatchPoint { own, other, xref_own: *x, xref_other, weight: w * ev.det });
        }
    }
    Ok(pts)
}

fn check_extension(geom: &CutGeometry, map: &ElementMap, f: usize, xref: Point) -> Result<()> {
    let ev = map.eval(&geom.reference, xref);
    let jt = ev.det / map.det_affine;
    if !(jt.abs() >= MIN_EXTENDED_JACOBIAN) {
        return Err(Error::DegenerateJacobian { facet: f, value: jt });
    }
    Ok(())
}

/// Local dof union of the two owners and the positions of each owner's dofs in it.
fn union_dofs(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut all: Vec<usize> = a.to_vec();
    let mut pos_b = Vec::with_capacity(b.len());
    for &d in b {
        match all.iter().position(|&x| x == d) {
            Some(p) => pos_b.push(p),
            None => {
                pos_b.push(all.len());
                all.push(d);
            }
        }
    }
    let pos_a = (0..a.len()).collect();
    (all, pos_a, pos_b)
}

fn add_local(out: &mut TripletBuilder, dofs: &[usize], local: &[Vec<f64>]) {
    for a in 0..dofs.len() {
        for b in a..dofs.len() {
            out.add(dofs[a], dofs[b], local[a][b]);
        }
    }
}

/// Ghost penalty on `V_h`: `(gamma_gp / h^2) sum_F int_{omega_F} |jump|^2`.
pub fn assemble_ghost_penalty(
    params: &FormParams,
    geom: &CutGeometry,
    vspace: &VelocitySpace,
    facets: &[usize],
) -> Result<TripletBuilder> {
    let mut out = TripletBuilder::symmetric(vspace.n_dofs());
    let scale = params.gamma_gp / (geom.h() * geom.h());
    let rule = triangle_rule(params.order_gp);
    let re = &geom.reference;
    let mut bo = VelocityBasis::default();
    let mut bx = VelocityBasis::default();
    for &f in facets {
        let [e1, e2] = geom.mesh.facets[f].owners;
        let el1 = vspace.element(geom, e1)?;
        let el2 = vspace.element(geom, e2)?;
        let (dofs, p1, p2) = union_dofs(el1.dofs(), el2.dofs());
        let n = dofs.len();
        let mut local = vec![vec![0.0; n]; n];
        let mut jump = vec![[0.0; 2]; n];
        for pp in patch_points(geom, f, &rule)? {
            let (own, other, po, px) = if pp.own == e1 { (&el1, &el2, &p1, &p2) } else { (&el2, &el1, &p2, &p1) };
            check_extension(geom, &other.map, f, pp.xref_other)?;
            own.eval(re, pp.xref_own, &mut bo);
            other.eval(re, pp.xref_other, &mut bx);
            jump.iter_mut().for_each(|j| *j = [0.0; 2]);
            for (a, &p) in po.iter().enumerate() {
                jump[p][0] += bo.value[a][0];
                jump[p][1] += bo.value[a][1];
            }
            for (a, &p) in px.iter().enumerate() {
                jump[p][0] -= bx.value[a][0];
                jump[p][1] -= bx.value[a][1];
            }
            let w = scale * pp.weight;
            for a in 0..n {
                for b in a..n {
                    local[a][b] += w * (jump[a][0] * jump[b][0] + jump[a][1] * jump[b][1]);
                }
            }
        }
        add_local(&mut out, &dofs, &local);
    }
    Ok(out)
}

/// Ghost penalty on a continuous scalar space with the plain composition
/// pullback: the neighbour's reference polynomial is evaluated at the
/// extended point.
pub fn assemble_scalar_ghost_penalty(
    params: &FormParams,
    geom: &CutGeometry,
    space: &ContinuousSpace,
    facets: &[usize],
) -> Result<TripletBuilder> {
    let mut out = TripletBuilder::symmetric(space.n_dofs());
    let scale = params.gamma_gp / (geom.h() * geom.h());
    let rule = triangle_rule(params.order_gp);
    let mut vo = [0.0; MAX_LOCAL];
    let mut vx = [0.0; MAX_LOCAL];
    for &f in facets {
        let [e1, e2] = geom.mesh.facets[f].owners;
        let d1: Vec<usize> = space.element_dofs(e1).collect();
        let d2: Vec<usize> = space.element_dofs(e2).collect();
        let (dofs, p1, p2) = union_dofs(&d1, &d2);
        let n = dofs.len();
        let mut local = vec![vec![0.0; n]; n];
        let mut jump = vec![0.0; n];
        for pp in patch_points(geom, f, &rule)? {
            let (po, px) = if pp.own == e1 { (&p1, &p2) } else { (&p2, &p1) };
            space.reference.values(pp.xref_own, &mut vo);
            space.reference.values(pp.xref_other, &mut vx);
            jump.fill(0.0);
            for (a, &p) in po.iter().enumerate() {
                jump[p] += vo[a];
            }
            for (a, &p) in px.iter().enumerate() {
                jump[p] -= vx[a];
            }
            let w = scale * pp.weight;
            for a in 0..n {
                for b in a..n {
                    local[a][b] += w * jump[a] * jump[b];
                }
            }
        }
        add_local(&mut out, &dofs, &local);
    }
    Ok(out)
}

/// Facets used by the pressure recovery: ghost-penalty facets between a cut
/// element and an inside or cut element.
pub fn postprocess_facets(geom: &CutGeometry) -> Vec<usize> {
    geom.sets
        .gp_facets
        .iter()
        .copied()
        .filter(|&f| {
            let [a, b] = geom.mesh.facets[f].owners;
            let (ca, cb) = (geom.sets.class[a], geom.sets.class[b]);
            (ca == ElementClass::Cut || cb == ElementClass::Cut)
                && ca != ElementClass::Outside
                && cb != ElementClass::Outside
        })
        .collect()
}

/// `i_h(v, v)` for a coefficient vector of `V_h` (same quadrature as the matrix).
pub fn ghost_penalty_energy(
    params: &FormParams,
    geom: &CutGeometry,
    vspace: &VelocitySpace,
    facets: &[usize],
    coeffs: &[f64],
) -> Result<f64> {
    let scale = params.gamma_gp / (geom.h() * geom.h());
    let rule = triangle_rule(params.order_gp);
    let re = &geom.reference;
    let mut basis = VelocityBasis::default();
    let mut total = 0.0;
    for &f in facets {
        for pp in patch_points(geom, f, &rule)? {
            let own = vspace.element(geom, pp.own)?;
            let other = vspace.element(geom, pp.other)?;
            check_extension(geom, &other.map, f, pp.xref_other)?;
            own.eval(re, pp.xref_own, &mut basis);
            let vo = combine(&basis, &own.gather(coeffs)[..own.n_dofs()]).value;
            other.eval(re, pp.xref_other, &mut basis);
            let vx = combine(&basis, &other.gather(coeffs)[..other.n_dofs()]).value;
            total += scale * pp.weight * ((vo[0] - vx[0]).powi(2) + (vo[1] - vx[1]).powi(2));
        }
    }
    Ok(total)
}

/// `i_h(v, v)` for a smooth field `v`. On each owner the polynomial
/// `J~ (v o Phi_h)` is replaced by its L2 projection (on the reference
/// element) onto polynomials of degree `2k - 1`; the neighbour's extension is
/// the ratio of the extended projection and the extended `J~`.
pub fn ghost_penalty_field_energy(
    params: &FormParams,
    geom: &CutGeometry,
    facets: &[usize],
    v: &dyn Fn(Point) -> [f64; 2],
) -> Result<f64> {
    let scale = params.gamma_gp / (geom.h() * geom.h());
    let rule = triangle_rule(params.order_gp);
    let deg = 2 * geom.degree() - 1;
    let proj = Projector::new(deg, 2 * deg + 4);
    let re = &geom.reference;
    let mut total = 0.0;
    for &f in facets {
        let [e1, e2] = geom.mesh.facets[f].owners;
        let maps = [geom.element_map(e1), geom.element_map(e2)];
        let coeffs: Vec<[Vec<f64>; 2]> = maps
            .iter()
            .map(|m| {
                proj.project(|x| {
                    let ev = m.eval(re, x);
                    let jt = ev.det / m.det_affine;
                    let val = v(ev.x);
                    [jt * val[0], jt * val[1]]
                })
            })
            .collect();
        for pp in patch_points(geom, f, &rule)? {
            let (io, ix) = if pp.own == e1 { (0, 1) } else { (1, 0) };
            let vo = v(maps[io].point(re, pp.xref_own));
            let ev = maps[ix].eval(re, pp.xref_other);
            let jt = ev.det / maps[ix].det_affine;
            if !(jt.abs() >= MIN_EXTENDED_JACOBIAN) {
                return Err(Error::DegenerateJacobian { facet: f, value: jt });
            }
            let w = proj.eval(&coeffs[ix], pp.xref_other);
            total += scale * pp.weight * ((vo[0] - w[0] / jt).powi(2) + (vo[1] - w[1] / jt).powi(2));
        }
    }
    Ok(total)
}

/// L2 projection onto polynomials of a fixed degree on the reference triangle,
/// using the Lagrange basis of that degree.
struct Projector {
    re: ReferenceElement,
    rule: TriangleRule,
    mass_inv: Vec<f64>,
}

impl Projector {
    fn new(degree: usize, order: usize) -> Self {
        let re = ReferenceElement::new(degree);
        let rule = triangle_rule(order);
        let n = re.len();
        let mut mass = vec![0.0; n * n];
        let mut vals = vec![0.0; n];
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            re.values(*x, &mut vals);
            for a in 0..n {
                for b in 0..n {
                    mass[a * n + b] += w * vals[a] * vals[b];
                }
            }
        }
        let mass_inv = crate::spaces::reference::invert_dense(&mass, n);
        Self { re, rule, mass_inv }
    }

    fn project(&self, g: impl Fn(Point) -> [f64; 2]) -> [Vec<f64>; 2] {
        let n = self.re.len();
        let mut rhs = [vec![0.0; n], vec![0.0; n]];
        let mut vals = vec![0.0; n];
        for (x, w) in self.rule.points.iter().zip(&self.rule.weights) {
            self.re.values(*x, &mut vals);
            let gx = g(*x);
            for a in 0..n {
                rhs[0][a] += w * gx[0] * vals[a];
                rhs[1][a] += w * gx[1] * vals[a];
            }
        }
        let solve = |r: &Vec<f64>| (0..n).map(|a| (0..n).map(|b| self.mass_inv[a * n + b] * r[b]).sum()).collect();
        [solve(&rhs[0]), solve(&rhs[1])]
    }

    fn eval(&self, c: &[Vec<f64>; 2], x: Point) -> [f64; 2] {
        let mut vals = vec![0.0; self.re.len()];
        self.re.values(x, &mut vals);
        let dot = |c: &Vec<f64>| c.iter().zip(&vals).map(|(a, b)| a * b).sum::<f64>();
        [dot(&c[0]), dot(&c[1])]
    }
}
