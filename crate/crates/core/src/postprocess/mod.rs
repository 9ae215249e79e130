//! Recovery of a continuous pressure from the discrete velocity.
//!
//! Testing the momentum equation with gradients gives
//! `(grad p, grad q)_{Omega_h} = (f, grad q)_{Omega_h} + (Delta u, grad q)_{Omega_h}`,
//! and for solenoidal `u` the last term is a boundary integral of the scalar
//! curl `w = d_1 u_2 - d_2 u_1`:
//! `(Delta u, grad q) = -int_{Gamma_h} w (n_2 d_1 q - n_1 d_2 q)`.

use crate::error::{Error, Result};
use crate::forms::{assemble_scalar_ghost_penalty, postprocess_facets, Discretization};
use crate::geometry::MAX_LOCAL;
use crate::linalg::dot;
use crate::mesh::Point;
use crate::solver::{solve_direct, TripletBuilder};
use crate::spaces::{combine, eval_scalar_basis, ContinuousSpace, ScalarBasis, VelocityBasis};

/// Continuous pressure `p*` with its space.
#[derive(Clone, Debug)]
pub struct RecoveredPressure {
    pub space: ContinuousSpace,
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

/// Solves for `p* in Q_h*` with `(p*, 1)_{Omega_h} = 0`.
pub fn recover_pressure(d: &Discretization, u: &[f64], f: &dyn Fn(Point) -> [f64; 2]) -> Result<RecoveredPressure> {
    let g = &d.geom;
    let space = ContinuousSpace::continuous_pressure(g);
    let n = space.n_dofs();
    if u.len() != d.vspace.n_dofs() {
        return Err(Error::DimensionMismatch(format!("velocity length {} vs {}", u.len(), d.vspace.n_dofs())));
    }
    let mut mat = TripletBuilder::symmetric(n + 1);
    let gp = assemble_scalar_ghost_penalty(&d.params, g, &space, &postprocess_facets(g))?;
    let mut rhs = vec![0.0; n + 1];
    let mut sb = ScalarBasis::default();
    let mut vb = VelocityBasis::default();
    for &e in &space.elements {
        let map = g.element_map(e);
        let dofs: Vec<usize> = space.element_dofs(e).collect();
        let nl = dofs.len();
        let mut local = [[0.0; MAX_LOCAL]; MAX_LOCAL];
        let mut lrhs = [0.0; MAX_LOCAL];
        let mut lmean = [0.0; MAX_LOCAL];
        for qp in &d.quad.volume[e] {
            let ev = map.eval(&g.reference, qp.xref);
            eval_scalar_basis(&space.reference, qp.xref, &ev, &mut sb);
            let fx = f(qp.x);
            for a in 0..nl {
                for b in a..nl {
                    local[a][b] += qp.weight * dot(sb.grad[a], sb.grad[b]);
                }
                lrhs[a] += qp.weight * dot(fx, sb.grad[a]);
                lmean[a] += qp.weight * sb.value[a];
            }
        }
        if !d.quad.interface[e].is_empty() {
            let el = d.vspace.element(g, e)?;
            let coeffs = el.gather(u);
            for sp in &d.quad.interface[e] {
                let ev = el.eval(&g.reference, sp.xref, &mut vb);
                let grad = combine(&vb, &coeffs[..el.n_dofs()]).grad;
                let w = grad[1][0] - grad[0][1];
                eval_scalar_basis(&space.reference, sp.xref, &ev, &mut sb);
                let nrm = sp.normal;
                for a in 0..nl {
                    let t = nrm[1] * sb.grad[a][0] - nrm[0] * sb.grad[a][1];
                    lrhs[a] += d.params.curl_sign * sp.weight * w * t;
                }
            }
        }
        for a in 0..nl {
            for b in a..nl {
                mat.add(dofs[a], dofs[b], local[a][b]);
            }
            rhs[dofs[a]] += lrhs[a];
            mat.add(dofs[a], n, lmean[a]);
        }
    }
    mat.add_block(&gp, 0, 0)?;
    let sol = solve_direct(&mat.build(), &rhs)?;
    let mut coeffs = sol.x;
    coeffs.truncate(n);
    Ok(RecoveredPressure { space, coeffs, residual: sol.residual })
}
