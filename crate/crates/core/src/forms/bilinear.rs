//! Volume, Nitsche, multiplier and pressure forms.

use crate::geometry::{CutGeometry, CutQuadrature, MAX_LOCAL};
use crate::linalg::{dot, matvec};
use crate::mesh::Point;
use crate::quadrature::triangle_rule;
use crate::solver::TripletBuilder;
use crate::spaces::{eval_scalar_basis, ContinuousSpace, PressureSpace, ScalarBasis, VelocityBasis, VelocitySpace, MAX_VDOFS};
use crate::error::Result;

use super::FormParams;

/// `a_h(u, v) = (grad u, grad v)_{Omega_h} - (grad u n, v)_{Gamma_h}
/// - (grad v n, u)_{Gamma_h} + (gamma_n / h) (u, v)_{Gamma_h}`
pub fn assemble_a(
    params: &FormParams,
    geom: &CutGeometry,
    quad: &CutQuadrature,
    vspace: &VelocitySpace,
) -> Result<TripletBuilder> {
    let mut out = TripletBuilder::symmetric(vspace.n_dofs());
    let re = &geom.reference;
    let penalty = params.gamma_n / geom.h();
    let mut basis = VelocityBasis::default();
    let mut local = [[0.0; MAX_VDOFS]; MAX_VDOFS];
    for &e in &geom.sets.active {
        if quad.volume[e].is_empty() && quad.interface[e].is_empty() {
            continue;
        }
        let el = vspace.element(geom, e)?;
        let n = el.n_dofs();
        for row in local.iter_mut().take(n) {
            row[..n].fill(0.0);
        }
        for qp in &quad.volume[e] {
            el.eval(re, qp.xref, &mut basis);
            for a in 0..n {
                let ga = &basis.grad[a];
                for b in a..n {
                    let gb = &basis.grad[b];
                    local[a][b] += qp.weight
                        * (ga[0][0] * gb[0][0] + ga[0][1] * gb[0][1] + ga[1][0] * gb[1][0] + ga[1][1] * gb[1][1]);
                }
            }
        }
        for sp in &quad.interface[e] {
            el.eval(re, sp.xref, &mut basis);
            let nrm = sp.normal;
            let mut dn = [[0.0; 2]; MAX_VDOFS];
            for a in 0..n {
                dn[a] = matvec(&basis.grad[a], nrm);
            }
            for a in 0..n {
                for b in a..n {
                    let ua = basis.value[a];
                    let ub = basis.value[b];
                    local[a][b] += sp.weight * (-dot(dn[b], ua) - dot(dn[a], ub) + penalty * dot(ua, ub));
                }
            }
        }
        let dofs = el.dofs();
        for a in 0..n {
            for b in a..n {
                out.add(dofs[a], dofs[b], local[a][b]);
            }
        }
    }
    Ok(out)
}

/// `b_h(q, v) = -int_{Omega_h^T} q div v`, integrated on the reference
/// element where the Jacobians cancel: `-int q^ div^ v^`.
pub fn assemble_b(geom: &CutGeometry, vspace: &VelocitySpace, pspace: &PressureSpace) -> Result<TripletBuilder> {
    let mut out = TripletBuilder::new(pspace.n_dofs(), vspace.n_dofs());
    let re = &geom.reference;
    let rule = triangle_rule(2 * geom.degree());
    let nq = pspace.n_local();
    let mut psi = [0.0; MAX_LOCAL];
    let mut dpsi = [[0.0; 2]; MAX_LOCAL];
    let mut q = [0.0; MAX_LOCAL];
    let mut local = [[0.0; MAX_VDOFS]; MAX_LOCAL];
    for &e in &geom.sets.active {
        let el = vspace.element(geom, e)?;
        let n = el.n_nodes;
        for row in local.iter_mut().take(nq) {
            row[..2 * n].fill(0.0);
        }
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            re.values_grads(*x, &mut psi, &mut dpsi);
            pspace.reference.values(*x, &mut q);
            for j in 0..n {
                let g = &el.to_ref[j];
                for c in 0..2 {
                    let divref = dpsi[j][0] * g[0][c] + dpsi[j][1] * g[1][c];
                    for a in 0..nq {
                        local[a][2 * j + c] -= w * q[a] * divref;
                    }
                }
            }
        }
        let off = pspace.offset(geom, e);
        for a in 0..nq {
            for (b, &d) in el.dofs().iter().enumerate() {
                out.add(off + a, d, local[a][b]);
            }
        }
    }
    Ok(out)
}

/// `c_h(mu, v) = int_{Gamma_h} mu n_h . v`
pub fn assemble_c(
    geom: &CutGeometry,
    quad: &CutQuadrature,
    vspace: &VelocitySpace,
    mspace: &ContinuousSpace,
) -> Result<TripletBuilder> {
    let mut out = TripletBuilder::new(mspace.n_dofs(), vspace.n_dofs());
    let re = &geom.reference;
    let mut basis = VelocityBasis::default();
    let mut mu = [0.0; MAX_LOCAL];
    for &e in &mspace.elements {
        if quad.interface[e].is_empty() {
            continue;
        }
        let el = vspace.element(geom, e)?;
        let n = el.n_dofs();
        let mdofs: Vec<usize> = mspace.element_dofs(e).collect();
        let mut local = vec![[0.0; MAX_VDOFS]; mdofs.len()];
        for sp in &quad.interface[e] {
            el.eval(re, sp.xref, &mut basis);
            mspace.reference.values(sp.xref, &mut mu);
            for b in 0..n {
                let vn = dot(basis.value[b], sp.normal);
                for a in 0..mdofs.len() {
                    local[a][b] += sp.weight * mu[a] * vn;
                }
            }
        }
        for (a, &ma) in mdofs.iter().enumerate() {
            for (b, &d) in el.dofs().iter().enumerate() {
                out.add(ma, d, local[a][b]);
            }
        }
    }
    Ok(out)
}

/// `j_h(lambda, mu) = -h gamma_lambda int_{band} (n_h . grad lambda)(n_h . grad mu)`
pub fn assemble_j(
    params: &FormParams,
    geom: &CutGeometry,
    quad: &CutQuadrature,
    mspace: &ContinuousSpace,
) -> Result<TripletBuilder> {
    let mut out = TripletBuilder::symmetric(mspace.n_dofs());
    let scale = -geom.h() * params.gamma_lambda;
    let mut basis = ScalarBasis::default();
    for &e in &mspace.elements {
        let map = geom.element_map(e);
        let dofs: Vec<usize> = mspace.element_dofs(e).collect();
        let n = dofs.len();
        let mut local = vec![vec![0.0; n]; n];
        for sp in &quad.band[e] {
            let ev = map.eval(&geom.reference, sp.xref);
            eval_scalar_basis(&mspace.reference, sp.xref, &ev, &mut basis);
            let dn: Vec<f64> = (0..n).map(|a| dot(basis.grad[a], sp.normal)).collect();
            for a in 0..n {
                for b in a..n {
                    local[a][b] += scale * sp.weight * dn[a] * dn[b];
                }
            }
        }
        for a in 0..n {
            for b in a..n {
                out.add(dofs[a], dofs[b], local[a][b]);
            }
        }
    }
    Ok(out)
}

/// `(f, v)_{Omega_h}`
pub fn assemble_rhs(
    geom: &CutGeometry,
    quad: &CutQuadrature,
    vspace: &VelocitySpace,
    f: &dyn Fn(Point) -> [f64; 2],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; vspace.n_dofs()];
    let re = &geom.reference;
    let mut basis = VelocityBasis::default();
    for &e in &geom.sets.active {
        if quad.volume[e].is_empty() {
            continue;
        }
        let el = vspace.element(geom, e)?;
        let mut local = [0.0; MAX_VDOFS];
        for qp in &quad.volume[e] {
            el.eval(re, qp.xref, &mut basis);
            let fx = f(qp.x);
            for (a, l) in local.iter_mut().enumerate().take(el.n_dofs()) {
                *l += qp.weight * dot(fx, basis.value[a]);
            }
        }
        for (a, &d) in el.dofs().iter().enumerate() {
            out[d] += local[a];
        }
    }
    Ok(out)
}

/// `m_i = int_{Omega_h^T} q_i` for every pressure basis function.
pub fn pressure_mean_vector(geom: &CutGeometry, quad: &CutQuadrature, pspace: &PressureSpace) -> Vec<f64> {
    let mut m = vec![0.0; pspace.n_dofs()];
    let mut q = [0.0; MAX_LOCAL];
    for &e in &geom.sets.active {
        let off = pspace.offset(geom, e);
        for qp in &quad.bulk[e] {
            pspace.reference.values(qp.xref, &mut q);
            for a in 0..pspace.n_local() {
                m[off + a] += qp.weight * q[a];
            }
        }
    }
    m
}
