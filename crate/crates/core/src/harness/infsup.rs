//! Discrete inf-sup probe on the active mesh.
//!
//! The constant is the square root of the smallest eigenvalue of
//! `B A^{-1} B^T q = mu M q` over zero-mean pressures, with `A` the `H^1`
//! stiffness of velocities vanishing on the boundary of the active mesh and
//! `M` the pressure mass matrix.

use crate::error::{Error, Result};
use crate::forms::Discretization;
use crate::quadrature::triangle_rule;
use crate::solver::{Factorization, SparseMatrix, TripletBuilder};
use crate::spaces::reference::REF_EDGES;
use crate::spaces::{active_boundary_facets, VelocityBasis, MAX_VDOFS};

const MAX_ITERS: usize = 5000;
const TOL: f64 = 1e-8;

/// The matrices of the probe. Velocity columns are renumbered to the free
/// (interior) dofs.
#[derive(Clone, Debug)]
pub struct InfSupBlocks {
    /// `(grad u, grad v)_{Omega_h^T}` on free dofs.
    pub a: SparseMatrix,
    /// `-(q, div v)_{Omega_h^T}`, pressures by free velocity dofs.
    pub b: SparseMatrix,
    /// `(p, q)_{Omega_h^T}`
    pub mass: SparseMatrix,
    /// `int_{Omega_h^T} q_i`
    pub mean: Vec<f64>,
}

/// Assembles the probe matrices.
pub fn inf_sup_blocks(d: &Discretization) -> Result<InfSupBlocks> {
    let g = &d.geom;
    let re = &g.reference;
    let k = g.degree();
    let nu = d.vspace.n_dofs();
    let mut fixed = vec![false; nu];
    for (e, l) in active_boundary_facets(g) {
        let el = d.vspace.element(g, e)?;
        let mut nodes: Vec<usize> = REF_EDGES[l].to_vec();
        nodes.extend((0..k - 1).map(|i| 3 + l * (k - 1) + i));
        for j in nodes {
            fixed[el.dofs[2 * j]] = true;
            fixed[el.dofs[2 * j + 1]] = true;
        }
    }
    let mut free = vec![usize::MAX; nu];
    let mut nf = 0;
    for (i, f) in fixed.iter().enumerate() {
        if !f {
            free[i] = nf;
            nf += 1;
        }
    }

    let np = d.pspace.n_dofs();
    let nq = d.pspace.n_local();
    let mut a = TripletBuilder::symmetric(nf);
    let mut mass = TripletBuilder::symmetric(np);
    let mut basis = VelocityBasis::default();
    let mut q = [0.0; crate::geometry::MAX_LOCAL];
    for &e in &g.sets.active {
        let el = d.vspace.element(g, e)?;
        let n = el.n_dofs();
        let mut local = [[0.0; MAX_VDOFS]; MAX_VDOFS];
        let off = d.pspace.offset(g, e);
        for qp in &d.quad.bulk[e] {
            el.eval(re, qp.xref, &mut basis);
            for i in 0..n {
                let gi = &basis.grad[i];
                for j in i..n {
                    let gj = &basis.grad[j];
                    local[i][j] += qp.weight
                        * (gi[0][0] * gj[0][0] + gi[0][1] * gj[0][1] + gi[1][0] * gj[1][0] + gi[1][1] * gj[1][1]);
                }
            }
            d.pspace.reference.values(qp.xref, &mut q);
            for i in 0..nq {
                for j in i..nq {
                    mass.add(off + i, off + j, qp.weight * q[i] * q[j]);
                }
            }
        }
        let dofs = el.dofs();
        for i in 0..n {
            for j in i..n {
                let (fi, fj) = (free[dofs[i]], free[dofs[j]]);
                if fi != usize::MAX && fj != usize::MAX {
                    a.add(fi, fj, local[i][j]);
                }
            }
        }
    }

    // B on the reference element, as in the system assembly
    let mut b = TripletBuilder::new(np, nf);
    let rule = triangle_rule(2 * k);
    let mut psi = [0.0; crate::geometry::MAX_LOCAL];
    let mut dpsi = [[0.0; 2]; crate::geometry::MAX_LOCAL];
    for &e in &g.sets.active {
        let el = d.vspace.element(g, e)?;
        let off = d.pspace.offset(g, e);
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            re.values_grads(*x, &mut psi, &mut dpsi);
            d.pspace.reference.values(*x, &mut q);
            for j in 0..el.n_nodes {
                let t = &el.to_ref[j];
                for c in 0..2 {
                    let col = free[el.dofs[2 * j + c]];
                    if col == usize::MAX {
                        continue;
                    }
                    let divref = dpsi[j][0] * t[0][c] + dpsi[j][1] * t[1][c];
                    for i in 0..nq {
                        b.add(off + i, col, -w * q[i] * divref);
                    }
                }
            }
        }
    }
    let mean = crate::forms::pressure_mean_vector(g, &d.quad, &d.pspace);
    Ok(InfSupBlocks { a: a.build(), b: b.build(), mass: mass.build(), mean })
}

/// Smallest generalized singular value of `B` over zero-mean pressures, by
/// inverse iteration on the Schur complement through the sparse saddle point
/// matrix `[[A, B^T, 0], [B, 0, m], [0, m^T, 0]]`.
pub fn inf_sup_constant(d: &Discretization) -> Result<f64> {
    let blk = inf_sup_blocks(d)?;
    let (nf, np) = (blk.a.n_rows, blk.mass.n_rows);
    let n = nf + np + 1;
    let mut kb = TripletBuilder::symmetric(n);
    for i in 0..nf {
        for (j, v) in blk.a.row(i) {
            if j >= i {
                kb.add(i, j, v);
            }
        }
    }
    for i in 0..np {
        for (j, v) in blk.b.row(i) {
            kb.add(j, nf + i, v);
        }
        kb.add(nf + i, n - 1, blk.mean[i]);
    }
    let kmat = kb.build();
    let lu = Factorization::new(&kmat)?;

    let ones_mean: f64 = blk.mean.iter().sum();
    let project = |q: &mut [f64]| {
        let s: f64 = blk.mean.iter().zip(q.iter()).map(|(m, x)| m * x).sum::<f64>() / ones_mean;
        q.iter_mut().for_each(|x| *x -= s);
    };
    let mnorm = |q: &[f64]| blk.mass.bilinear(q, q).sqrt();

    // deterministic start: a mix of element-wise linear pressures
    let mut q: Vec<f64> = (0..np).map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5).collect();
    project(&mut q);
    let nq = mnorm(&q);
    q.iter_mut().for_each(|x| *x /= nq);
    let mut mu = f64::INFINITY;
    let mut rhs = vec![0.0; n];
    for _ in 0..MAX_ITERS {
        let r = blk.mass.mul(&q);
        rhs.fill(0.0);
        rhs[nf..nf + np].copy_from_slice(&r);
        let sol = lu.solve(&rhs)?;
        let mut qn: Vec<f64> = sol[nf..nf + np].iter().map(|y| -y).collect();
        project(&mut qn);
        let qmq: f64 = r.iter().zip(&qn).map(|(a, b)| a * b).sum();
        let est = 1.0 / qmq;
        let nn = mnorm(&qn);
        if !(nn > 0.0) || !est.is_finite() {
            return Err(Error::SingularSystem { pivot: 0 });
        }
        q = qn.into_iter().map(|x| x / nn).collect();
        let change = (est - mu).abs() / est.abs();
        mu = est;
        if change <= TOL {
            return Ok(mu.max(0.0).sqrt());
        }
    }
    Err(Error::NoConvergence { what: "inf-sup inverse iteration", iterations: MAX_ITERS, last: mu.max(0.0).sqrt() })
}
