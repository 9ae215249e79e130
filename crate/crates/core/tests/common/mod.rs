//! Checks shared by the integration tests and the acceptance target. Each
//! check returns the measured quantity so callers can apply their own bound.

#![allow(dead_code)]

use cutsv::forms::{
    assemble_b, assemble_j, assemble_system, ghost_penalty_energy, Discretization, FormParams,
};
use cutsv::geometry::{build_quadratures, cut_subdivide, triangle_area, GeometryMode, LevelSet};
use cutsv::harness::{level_mesh, QuarticExample, QuarticLevelSet};
use cutsv::mesh::Point;
use cutsv::quadrature::line_rule;
use cutsv::spaces::reference::{REF_EDGES, REF_VERTICES};
use cutsv::spaces::{
    active_boundary_facets, combine, facet_flux, interpolate_velocity, VelocityBasis, VelocityElement,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x5EED;

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED)
}

/// Example 1 geometry with `k = 2` on refinement `level`.
pub fn quartic(level: usize, mode: GeometryMode) -> Discretization {
    quartic_k(level, 2, mode)
}

pub fn quartic_k(level: usize, k: usize, mode: GeometryMode) -> Discretization {
    Discretization::new(&QuarticLevelSet::default(), &level_mesh(0.3, level), FormParams::new(k), mode).unwrap()
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random point strictly inside the reference triangle.
pub fn random_ref_point(rng: &mut ChaCha8Rng) -> Point {
    loop {
        let (a, b) = (rng.gen_range(0.02..0.96), rng.gen_range(0.02..0.96));
        if a + b < 0.98 {
            return [a, b];
        }
    }
}

fn curved_elements(d: &Discretization) -> Vec<usize> {
    d.geom.sets.active.iter().copied().filter(|&e| d.geom.deformation.curved[e]).collect()
}

fn frob(m: &[[f64; 2]; 2]) -> f64 {
    (m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2)).sqrt()
}

/// Largest `|tr(grad v) - (1/J) div^ v^| / |grad v|` over `samples` random
/// points of curved elements, for random local coefficients.
pub fn piola_divergence_defect(d: &Discretization, samples: usize) -> f64 {
    let mut rng = rng();
    let curved = curved_elements(d);
    assert!(!curved.is_empty());
    let mut basis = VelocityBasis::default();
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let e = curved[(s * 7919) % curved.len()];
        let el = d.vspace.element(&d.geom, e).unwrap();
        let c = random_vector(el.n_dofs(), &mut rng);
        el.eval(&d.geom.reference, random_ref_point(&mut rng), &mut basis);
        let v = combine(&basis, &c);
        let tr = v.grad[0][0] + v.grad[1][1];
        worst = worst.max((tr - v.div).abs() / frob(&v.grad));
    }
    worst
}

/// Physical-coordinate central differences of a velocity, moving through the
/// inverse element map.
fn fd_gradient(el: &VelocityElement, d: &Discretization, c: &[f64], xref: Point, step: f64) -> [[f64; 2]; 2] {
    let re = &d.geom.reference;
    let x = el.map.point(re, xref);
    let mut g = [[0.0; 2]; 2];
    for m in 0..2 {
        let mut val = [[0.0; 2]; 2];
        for (s, sign) in [1.0, -1.0].iter().enumerate() {
            let mut y = x;
            y[m] += sign * step;
            let yref = el.map.inverse(re, y, xref).expect("inverse map");
            val[s] = el.eval_field(re, c, yref).value;
        }
        for i in 0..2 {
            g[i][m] = (val[0][i] - val[1][i]) / (2.0 * step);
        }
    }
    g
}

/// Largest relative deviation of the Piola-chain-rule gradient from central
/// differences (step `1e-6`) at random points of curved elements.
pub fn gradient_fd_defect(d: &Discretization, samples: usize) -> f64 {
    let mut rng = rng();
    let curved = curved_elements(d);
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let e = curved[(s * 104_729) % curved.len()];
        let el = d.vspace.element(&d.geom, e).unwrap();
        let c = random_vector(el.n_dofs(), &mut rng);
        let xref = random_ref_point(&mut rng);
        let g = el.eval_field(&d.geom.reference, &c, xref).grad;
        let fd = fd_gradient(&el, d, &c, xref, 1e-6);
        let diff = [[g[0][0] - fd[0][0], g[0][1] - fd[0][1]], [g[1][0] - fd[1][0], g[1][1] - fd[1][1]]];
        worst = worst.max(frob(&diff) / frob(&g));
    }
    worst
}

/// `|q^T B v - (-int q tr(grad v))| / sum |contributions|` with the second
/// route integrated in physical space at order `4k`.
pub fn b_two_route_defect(d: &Discretization) -> f64 {
    let mut rng = rng();
    let g = &d.geom;
    let b = assemble_b(g, &d.vspace, &d.pspace).unwrap().build();
    let q = random_vector(d.pspace.n_dofs(), &mut rng);
    let v = random_vector(d.vspace.n_dofs(), &mut rng);
    let route1 = b.bilinear(&q, &v);
    let quad = build_quadratures(g, 4 * g.degree()).unwrap();
    let mut basis = VelocityBasis::default();
    let mut qv = [0.0; 16];
    let (mut route2, mut scale) = (0.0, 0.0);
    for &e in &g.sets.active {
        let el = d.vspace.element(g, e).unwrap();
        let local = el.gather(&v);
        let off = d.pspace.offset(g, e);
        for qp in &quad.bulk[e] {
            el.eval(&g.reference, qp.xref, &mut basis);
            let val = combine(&basis, &local[..el.n_dofs()]);
            d.pspace.reference.values(qp.xref, &mut qv);
            let qh: f64 = (0..d.pspace.n_local()).map(|a| q[off + a] * qv[a]).sum();
            let term = -qp.weight * qh * (val.grad[0][0] + val.grad[1][1]);
            route2 += term;
            scale += term.abs();
        }
    }
    (route1 - route2).abs() / scale
}

/// Interior facets of the active mesh with the local edge in each owner.
fn interior_active_facets(d: &Discretization) -> Vec<(usize, [usize; 2], [usize; 2])> {
    let am = &d.geom.mesh;
    let sets = &d.geom.sets;
    let mut out = Vec::new();
    for (fi, f) in am.facets.iter().enumerate() {
        if f.n_owners == 2 && f.owners.iter().all(|&e| sets.is_active(e)) {
            let l = [am.local_edge(f.owners[0], fi), am.local_edge(f.owners[1], fi)];
            out.push((fi, f.owners, l));
        }
    }
    out
}

/// Reference point on local edge `l` of `e` at parameter `t` measured from
/// the global facet vertex `start`.
fn edge_point(d: &Discretization, e: usize, l: usize, start: usize, t: f64) -> Point {
    let [a, b] = REF_EDGES[l];
    let tri = d.geom.mesh.children[e];
    let (pa, pb) = if tri[a] == start { (REF_VERTICES[a], REF_VERTICES[b]) } else { (REF_VERTICES[b], REF_VERTICES[a]) };
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

/// Largest jump of `v . n` across interior facets relative to `max |v|`, at
/// `samples` random facet points for a random coefficient vector. Also
/// returns the largest mismatch of the two mapped facet points.
pub fn normal_jump(d: &Discretization, samples: usize) -> (f64, f64) {
    let mut rng = rng();
    let re = &d.geom.reference;
    let facets = interior_active_facets(d);
    let curved: Vec<_> =
        facets.iter().copied().filter(|(_, o, _)| o.iter().any(|&e| d.geom.deformation.curved[e])).collect();
    assert!(!curved.is_empty());
    let coeffs = random_vector(d.vspace.n_dofs(), &mut rng);
    let (mut jump, mut vmax, mut xgap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..samples {
        // every other sample on a facet of a curved element
        let pool = if i % 2 == 0 { &curved } else { &facets };
        let (fi, owners, l) = pool[rng.gen_range(0..pool.len())];
        let start = d.geom.mesh.facets[fi].vertices[0];
        let t = rng.gen_range(0.0..1.0);
        let mut vals = [[0.0; 2]; 2];
        let mut xs = [[0.0; 2]; 2];
        let mut normal = [0.0; 2];
        for s in 0..2 {
            let el = d.vspace.element(&d.geom, owners[s]).unwrap();
            let xr = edge_point(d, owners[s], l[s], start, t);
            let local = el.gather(&coeffs);
            vals[s] = el.eval_field(re, &local[..el.n_dofs()], xr).value;
            xs[s] = el.map.point(re, xr);
            if s == 0 {
                let [a, b] = REF_EDGES[l[0]];
                let dref = [REF_VERTICES[b][0] - REF_VERTICES[a][0], REF_VERTICES[b][1] - REF_VERTICES[a][1]];
                let ev = el.map.eval(re, xr);
                let tau = [ev.f[0][0] * dref[0] + ev.f[0][1] * dref[1], ev.f[1][0] * dref[0] + ev.f[1][1] * dref[1]];
                let n = tau[0].hypot(tau[1]);
                normal = [tau[1] / n, -tau[0] / n];
            }
        }
        let jn = (vals[0][0] - vals[1][0]) * normal[0] + (vals[0][1] - vals[1][1]) * normal[1];
        jump = jump.max(jn.abs());
        vmax = vmax.max(vals[0][0].hypot(vals[0][1]));
        xgap = xgap.max((xs[0][0] - xs[1][0]).hypot(xs[0][1] - xs[1][1]));
    }
    (jump / vmax, xgap)
}

/// Ghost-penalty energy of the interpolant of a global polynomial field of
/// degree `k` on an undeformed geometry.
pub fn ghost_penalty_of_global_polynomial(d: &Discretization) -> f64 {
    let v = |x: Point| [1.0 + 2.0 * x[0] - x[1] + x[0] * x[1], 0.5 * x[0] * x[0] - x[1] * x[1] + 0.3];
    let c = interpolate_velocity(&d.vspace, &d.geom, &v, false).unwrap();
    ghost_penalty_energy(&d.params, &d.geom, &d.vspace, &d.geom.sets.gp_facets, &c).unwrap()
}

/// `max_i |(J 1)_i|` for the multiplier stabilization.
pub fn j_of_constant(d: &Discretization) -> f64 {
    let j = assemble_j(&d.params, &d.geom, &d.quad, &d.mspace).unwrap().build();
    j.mul(&vec![1.0; d.mspace.n_dofs()]).iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `max |M_ij - M_ji|` of the assembled saddle point matrix.
pub fn system_asymmetry(d: &Discretization) -> f64 {
    let ex = QuarticExample::new();
    let sys = assemble_system(d, &|x| cutsv::harness::Example::force(&ex, x)).unwrap();
    sys.matrix.asymmetry()
}

/// Length of local edge `l` of an element under its map.
fn facet_length(d: &Discretization, el: &VelocityElement, l: usize) -> f64 {
    let [a, b] = REF_EDGES[l];
    let dref = [REF_VERTICES[b][0] - REF_VERTICES[a][0], REF_VERTICES[b][1] - REF_VERTICES[a][1]];
    let rule = line_rule(8);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(t, w)| {
            let xr = [REF_VERTICES[a][0] + t * dref[0], REF_VERTICES[a][1] + t * dref[1]];
            let f = el.map.eval(&d.geom.reference, xr).f;
            w * (f[0][0] * dref[0] + f[0][1] * dref[1]).hypot(f[1][0] * dref[0] + f[1][1] * dref[1])
        })
        .sum()
}

/// Largest `|int_F (I_V v - v) . n| / |F|` over boundary facets of the active
/// mesh, for the flux-corrected (or plain) interpolant of `v`.
pub fn boundary_flux_defect(d: &Discretization, v: &dyn Fn(Point) -> [f64; 2], flux_correct: bool) -> f64 {
    let g = &d.geom;
    let c = interpolate_velocity(&d.vspace, g, v, flux_correct).unwrap();
    let mut basis = VelocityBasis::default();
    let mut worst: f64 = 0.0;
    for (e, l) in active_boundary_facets(g) {
        let el = d.vspace.element(g, e).unwrap();
        let local = el.gather(&c);
        let defect = facet_flux(g, &el.map, l, &mut |xr, ev| {
            el.eval_with(&g.reference, xr, ev, &mut basis);
            let vh = combine(&basis, &local[..el.n_dofs()]).value;
            let ve = v(ev.x);
            [vh[0] - ve[0], vh[1] - ve[1]]
        });
        worst = worst.max(defect.abs() / facet_length(d, &el, l));
    }
    worst
}

/// Largest `|area(inside) + area(outside) - area| / area` over `n` random
/// triangles and value triples.
pub fn cut_area_partition_defect(n: usize) -> f64 {
    let mut rng = rng();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < n {
        let mut tri = [[0.0; 2]; 3];
        for p in tri.iter_mut() {
            *p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        }
        if triangle_area(&tri) < 0.0 {
            tri.swap(1, 2);
        }
        let area = triangle_area(&tri);
        if area < 1e-3 {
            continue;
        }
        done += 1;
        let mut vals = [0.0; 3];
        for v in vals.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let neg = [-vals[0], -vals[1], -vals[2]];
        let sum = |vals: [f64; 3]| cut_subdivide(tri, vals).inside.iter().map(triangle_area).sum::<f64>();
        worst = worst.max((sum(vals) + sum(neg) - area).abs() / area);
    }
    worst
}

/// `max |phi(x_q)|` over interface quadrature points.
pub fn interface_level_set_error(d: &Discretization, ls: &dyn LevelSet) -> f64 {
    cutsv::harness::geometry_error(&d.quad, ls)
}
