mod common;

use common::{quartic, random_vector, rng};
use cutsv::forms::{
    assemble_a, assemble_blocks, assemble_c, assemble_ghost_penalty, assemble_j, assemble_rhs, assemble_system,
    build_saddle_system, divergence_norms, ghost_penalty_field_energy, Discretization, FormParams,
};
use cutsv::geometry::{CircleLevelSet, GeometryMode, LevelSet};
use cutsv::harness::{
    inf_sup_blocks, inf_sup_constant, level_mesh, mean_eoc, solve_level, QuarticExample, QuarticLevelSet, StudyConfig,
};
use cutsv::linalg::{dot, matvec};
use cutsv::solver::SparseMatrix;
use cutsv::spaces::reference::REF_EDGES;
use cutsv::spaces::{active_boundary_facets, eval_velocity, interpolate_scalar, interpolate_velocity};
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

fn dense(m: &SparseMatrix) -> Mat<f64> {
    let d = m.to_dense();
    Mat::from_fn(d.len(), d.first().map_or(0, |r| r.len()), |i, j| d[i][j])
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn nitsche_form_of_a_translation_is_the_penalty() {
    let d = quartic(1, GeometryMode::P1);
    let a = assemble_a(&d.params, &d.geom, &d.quad, &d.vspace).unwrap().build();
    let c = [0.7, -1.3];
    let u = interpolate_velocity(&d.vspace, &d.geom, &|_| c, false).unwrap();
    let expected = d.params.gamma_n / d.h() * (c[0] * c[0] + c[1] * c[1]) * d.quad.interface_measure();
    let got = a.bilinear(&u, &u);
    assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
}

#[test]
fn nitsche_form_is_symmetric() {
    let d = quartic(1, GeometryMode::HighOrder);
    let a = assemble_a(&d.params, &d.geom, &d.quad, &d.vspace).unwrap().build();
    let mut r = rng();
    for _ in 0..20 {
        let (u, v) = (random_vector(a.n_rows, &mut r), random_vector(a.n_rows, &mut r));
        assert!((a.bilinear(&u, &v) - a.bilinear(&v, &u)).abs() <= 1e-12 * norm(&u) * norm(&v));
    }
}

/// Value and gradient of a field given element and reference point.
type FieldAt<'a> = &'a dyn Fn(usize, [f64; 2], [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]);

/// `a_h(u, v)` by evaluating both fields at every quadrature point.
fn a_by_fields(
    d: &Discretization,
    u: FieldAt,
    v: &[f64],
) -> f64 {
    let g = &d.geom;
    let pen = d.params.gamma_n / d.h();
    let mut s = 0.0;
    for &e in &g.sets.active {
        for qp in &d.quad.volume[e] {
            let (_, gu) = u(e, qp.xref, qp.x);
            let gv = eval_velocity(&d.vspace, g, e, v, qp.xref).unwrap().grad;
            s += qp.weight * (0..2).map(|i| dot(gu[i], gv[i])).sum::<f64>();
        }
        for sp in &d.quad.interface[e] {
            let (uu, gu) = u(e, sp.xref, sp.x);
            let vv = eval_velocity(&d.vspace, g, e, v, sp.xref).unwrap();
            let (dun, dvn) = (matvec(&gu, sp.normal), matvec(&vv.grad, sp.normal));
            s += sp.weight * (-dot(dun, vv.value) - dot(dvn, uu) + pen * dot(uu, vv.value));
        }
    }
    s
}

#[test]
fn nitsche_form_matches_field_evaluation() {
    let lin = |x: [f64; 2]| [0.3 + 1.1 * x[0] - 0.7 * x[1], -0.2 + 0.4 * x[0] + 0.9 * x[1]];
    let grad = [[1.1, -0.7], [0.4, 0.9]];
    let mut r = rng();
    // undeformed mesh: the interpolant is the linear field itself
    let d = quartic(1, GeometryMode::P1);
    let a = assemble_a(&d.params, &d.geom, &d.quad, &d.vspace).unwrap().build();
    let u = interpolate_velocity(&d.vspace, &d.geom, &lin, false).unwrap();
    let v = random_vector(a.n_rows, &mut r);
    let want = a_by_fields(&d, &|_, _, x| (lin(x), grad), &v);
    assert!((a.bilinear(&u, &v) - want).abs() <= 1e-12 * want.abs().max(1.0));
    // curved mesh: evaluate the discrete field instead
    let d = quartic(1, GeometryMode::HighOrder);
    let a = assemble_a(&d.params, &d.geom, &d.quad, &d.vspace).unwrap().build();
    let u = interpolate_velocity(&d.vspace, &d.geom, &lin, false).unwrap();
    let v = random_vector(a.n_rows, &mut r);
    let field = |e: usize, xr: [f64; 2], _x: [f64; 2]| {
        let w = eval_velocity(&d.vspace, &d.geom, e, &u, xr).unwrap();
        (w.value, w.grad)
    };
    let want = a_by_fields(&d, &field, &v);
    assert!((a.bilinear(&u, &v) - want).abs() <= 1e-12 * want.abs().max(1.0));
}

#[test]
fn constant_pressure_is_orthogonal_to_interior_divergence() {
    for mode in [GeometryMode::P1, GeometryMode::HighOrder] {
        let d = quartic(1, mode);
        let b = cutsv::forms::assemble_b(&d.geom, &d.vspace, &d.pspace).unwrap().build();
        let mut v = random_vector(d.vspace.n_dofs(), &mut rng());
        let k = d.params.k;
        for (e, l) in active_boundary_facets(&d.geom) {
            let el = d.vspace.element(&d.geom, e).unwrap();
            let mut nodes = REF_EDGES[l].to_vec();
            nodes.extend((0..k - 1).map(|i| 3 + l * (k - 1) + i));
            for j in nodes {
                v[el.dofs[2 * j]] = 0.0;
                v[el.dofs[2 * j + 1]] = 0.0;
            }
        }
        let ones = vec![1.0; d.pspace.n_dofs()];
        let bv = b.mul(&v);
        let scale: f64 = (0..b.n_rows).map(|i| b.row(i).map(|(j, x)| (x * v[j]).abs()).sum::<f64>()).sum();
        assert!(dot_n(&ones, &bv).abs() <= 1e-12 * scale, "{mode:?}");
    }
}

fn dot_n(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Generalized eigenvalues of `(B A^{-1} B^T, M)` in ascending order.
fn dense_inf_sup_spectrum(d: &Discretization) -> Vec<f64> {
    let blk = inf_sup_blocks(d).unwrap();
    let (a, b, m) = (dense(&blk.a), dense(&blk.b), dense(&blk.mass));
    let x = a.llt(Side::Lower).unwrap().solve(b.transpose().to_owned());
    let s = &b * &x;
    let evd = m.self_adjoint_eigen(Side::Lower).unwrap();
    let (u, ev) = (evd.U(), evd.S().column_vector());
    let w = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] / ev[j].sqrt());
    let t = w.transpose() * &s * &w;
    t.self_adjoint_eigenvalues(Side::Lower).unwrap()
}

#[test]
fn inf_sup_constant_matches_dense_eigenvalues() {
    for level in 0..=1 {
        let d = quartic(level, GeometryMode::HighOrder);
        let ev = dense_inf_sup_spectrum(&d);
        // constants are the only pressures B^T annihilates
        assert!(ev[0].abs() <= 1e-10 * ev[ev.len() - 1], "level {level}: {:?}", &ev[..3]);
        assert!(ev[1] > 1e-10);
        let beta = inf_sup_constant(&d).unwrap();
        assert!((beta - ev[1].sqrt()).abs() <= 1e-5 * beta, "level {level}: {beta} vs {}", ev[1].sqrt());
    }
}

#[test]
fn multiplier_flux_of_a_radial_field() {
    // for a normal-continuous field, c_h(1, v) is the volume integral of div v
    for mode in [GeometryMode::P1, GeometryMode::HighOrder] {
        let d = quartic(1, mode);
        let g = &d.geom;
        let c = assemble_c(g, &d.quad, &d.vspace, &d.mspace).unwrap().build();
        let v = interpolate_velocity(&d.vspace, g, &|x| [0.5 * x[0], 0.5 * x[1]], false).unwrap();
        let ones = vec![1.0; d.mspace.n_dofs()];
        let ch = dot_n(&ones, &c.mul(&v));
        let mut by_points = 0.0;
        for &e in &g.sets.alfeld_cut {
            for sp in &d.quad.interface[e] {
                by_points += sp.weight * dot(eval_velocity(&d.vspace, g, e, &v, sp.xref).unwrap().value, sp.normal);
            }
        }
        assert!((ch - by_points).abs() <= 1e-11 * ch.abs(), "{mode:?}");
        if mode == GeometryMode::P1 {
            let mut div = 0.0;
            for &e in &g.sets.active {
                for qp in &d.quad.volume[e] {
                    div += qp.weight * eval_velocity(&d.vspace, g, e, &v, qp.xref).unwrap().div;
                }
            }
            assert!((ch - div).abs() <= 1e-11 * ch.abs());
            assert!((ch - d.quad.volume_measure()).abs() <= 1e-11);
        }
    }
}

#[test]
fn multiplier_flux_of_a_tangential_field_is_bounded_by_its_normal_defect() {
    let ls = QuarticLevelSet::default();
    let curl = |x: [f64; 2]| {
        let g = ls.gradient(x);
        [-g[1], g[0]]
    };
    let defects: Vec<f64> = (0..=3)
        .map(|l| {
            let d = quartic(l, GeometryMode::HighOrder);
            let g = &d.geom;
            let c = assemble_c(g, &d.quad, &d.vspace, &d.mspace).unwrap().build();
            let v = interpolate_velocity(&d.vspace, g, &curl, false).unwrap();
            let ch = dot_n(&vec![1.0; d.mspace.n_dofs()], &c.mul(&v));
            let mut defect = 0.0;
            for &e in &g.sets.alfeld_cut {
                for sp in &d.quad.interface[e] {
                    let vn = dot(eval_velocity(&d.vspace, g, e, &v, sp.xref).unwrap().value, sp.normal);
                    defect += sp.weight * vn.abs();
                }
            }
            assert!(ch.abs() <= defect + 1e-14, "level {l}: {ch} vs {defect}");
            defect
        })
        .collect();
    // limited by the O(h^k) accuracy of the discrete normal
    let rate = mean_eoc(&defects).unwrap();
    assert!(rate >= 1.5, "{defects:?} {rate}");
}

#[test]
fn ghost_penalty_is_positive_semidefinite() {
    let d = quartic(1, GeometryMode::HighOrder);
    let gp = assemble_ghost_penalty(&d.params, &d.geom, &d.vspace, &d.geom.sets.gp_facets).unwrap().build();
    let mut r = rng();
    for _ in 0..50 {
        let v = random_vector(gp.n_rows, &mut r);
        assert!(gp.bilinear(&v, &v) >= 0.0);
    }
}

#[test]
fn ghost_penalty_of_smooth_fields_decays() {
    // the estimate i_h(v, v) <= C h^(2k) is an upper bound; see the notes on
    // the measured rates
    let v = |x: [f64; 2]| [x[0].sin(), x[1].cos()];
    for mode in [GeometryMode::P1, GeometryMode::HighOrder] {
        let e: Vec<f64> = (1..=4)
            .map(|l| {
                let d = quartic(l, mode);
                ghost_penalty_field_energy(&d.params, &d.geom, &d.geom.sets.gp_facets, &v).unwrap()
            })
            .collect();
        let rate = mean_eoc(&e).unwrap();
        assert!(rate >= 2.0 * 2.0 - 0.5, "{mode:?}: {e:?} {rate}");
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{mode:?}: {e:?}");
    }
}

#[test]
fn multiplier_stabilization_is_negative_semidefinite() {
    for kl in [1, 2] {
        let mut params = FormParams::new(2);
        params.k_lambda = kl;
        let d = Discretization::new(&QuarticLevelSet::default(), &level_mesh(0.3, 1), params, GeometryMode::HighOrder)
            .unwrap();
        let j = assemble_j(&d.params, &d.geom, &d.quad, &d.mspace).unwrap().build();
        let mut r = rng();
        for _ in 0..50 {
            let l = random_vector(j.n_rows, &mut r);
            assert!(j.bilinear(&l, &l) <= 0.0);
        }
    }
}

#[test]
fn multiplier_stabilization_of_normal_extensions_decays() {
    // on a circle, functions of the angle are constant along the normals
    let ls = CircleLevelSet { center: [0.0, 0.0], radius: 0.61 };
    let f = |x: [f64; 2]| (3.0 * x[1].atan2(x[0])).cos() + 0.5 * x[1].atan2(x[0]).sin();
    for kl in [1, 2] {
        let vals: Vec<f64> = (0..=3)
            .map(|l| {
                let mut params = FormParams::new(2);
                params.k_lambda = kl;
                let d = Discretization::new(&ls, &level_mesh(0.3, l), params, GeometryMode::HighOrder).unwrap();
                let j = assemble_j(&d.params, &d.geom, &d.quad, &d.mspace).unwrap().build();
                let lam = interpolate_scalar(&d.mspace, &d.geom, &f);
                -j.bilinear(&lam, &lam)
            })
            .collect();
        let rate = mean_eoc(&vals).unwrap();
        assert!(rate >= 2.0 * kl as f64, "k_lambda = {kl}: {vals:?} {rate}");
    }
}

#[test]
fn rhs_examples() {
    let d = quartic(1, GeometryMode::HighOrder);
    let g = &d.geom;
    assert!(assemble_rhs(g, &d.quad, &d.vspace, &|_| [0.0, 0.0]).unwrap().iter().all(|&x| x == 0.0));
    let ex = QuarticExample::new();
    let f = assemble_rhs(g, &d.quad, &d.vspace, &|x| cutsv::harness::Example::force(&ex, x)).unwrap();
    let lap = assemble_rhs(g, &d.quad, &d.vspace, &|x| ex.minus_laplacian(x)).unwrap();
    let grad = assemble_rhs(g, &d.quad, &d.vspace, &|x| cutsv::harness::Example::pressure_gradient(&ex, x)).unwrap();
    let scale = norm(&f);
    for i in 0..f.len() {
        assert!((f[i] - lap[i] - grad[i]).abs() <= 1e-12 * scale);
    }
    // (f, v) for a constant f by evaluating v at the volume points
    let v = random_vector(d.vspace.n_dofs(), &mut rng());
    let c = [0.4, -0.9];
    let rhs = assemble_rhs(g, &d.quad, &d.vspace, &|_| c).unwrap();
    let mut want = 0.0;
    for &e in &g.sets.active {
        for qp in &d.quad.volume[e] {
            want += qp.weight * dot(c, eval_velocity(&d.vspace, g, e, &v, qp.xref).unwrap().value);
        }
    }
    assert!((dot_n(&rhs, &v) - want).abs() <= 1e-11 * want.abs().max(1.0));
}

struct Solved {
    d: Discretization,
    sys: cutsv::forms::SaddleSystem,
    x: Vec<f64>,
}

fn solved(level: usize, scale: f64) -> Solved {
    let d = quartic(level, GeometryMode::HighOrder);
    let ex = QuarticExample::new();
    let f = |x: [f64; 2]| {
        let v = cutsv::harness::Example::force(&ex, x);
        [scale * v[0], scale * v[1]]
    };
    let sys = assemble_system(&d, &f).unwrap();
    let sol = sys.solve().unwrap();
    let mut x = sol.u.clone();
    x.extend(&sol.p);
    x.extend(&sol.lambda);
    x.push(sol.s);
    Solved { d, sys, x }
}

#[test]
fn saddle_layout() {
    let d = quartic(0, GeometryMode::HighOrder);
    let blocks = assemble_blocks(&d, &|_| [1.0, 0.0]).unwrap();
    let sys = build_saddle_system(&blocks).unwrap();
    assert_eq!(sys.dim(), d.vspace.n_dofs() + d.pspace.n_dofs() + d.mspace.n_dofs() + 1);
    assert_eq!(sys.matrix.n_rows, sys.dim());
    assert_eq!(sys.matrix.asymmetry(), 0.0);
    let (nu, np) = (sys.n_u, sys.n_p);
    // the pressure and mean blocks are empty on the diagonal
    for i in nu..nu + np {
        assert_eq!(sys.matrix.get(i, i), 0.0);
    }
    assert_eq!(sys.matrix.get(sys.dim() - 1, sys.dim() - 1), 0.0);
    assert!(sys.rhs[nu..].iter().all(|&x| x == 0.0));
}

#[test]
fn solution_is_divergence_free_and_satisfies_every_equation() {
    let s = solved(1, 1.0);
    let u = &s.x[..s.sys.n_u];
    let (_, worst) = divergence_norms(&s.d, u).unwrap();
    let a = assemble_a(&s.d.params, &s.d.geom, &s.d.quad, &s.d.vspace).unwrap().build();
    let energy = a.bilinear(u, u).abs().sqrt();
    assert!(worst <= 1e-9 * energy, "{worst} vs {energy}");
    let m = &s.sys.matrix;
    let mx = m.mul(&s.x);
    for (i, (mxi, bi)) in mx.iter().zip(&s.sys.rhs).enumerate() {
        let denom: f64 = m.row(i).map(|(j, v)| (v * s.x[j]).abs()).sum::<f64>() + bi.abs();
        if denom > 0.0 {
            assert!((mxi - bi).abs() <= 1e-10 * denom, "row {i}");
        }
    }
    // c_h(1, u_h) is the sum of the multiplier equations
    let c = assemble_c(&s.d.geom, &s.d.quad, &s.d.vspace, &s.d.mspace).unwrap().build();
    let cu = c.mul(u);
    let scale: f64 = (0..c.n_rows).map(|i| c.row(i).map(|(j, v)| (v * u[j]).abs()).sum::<f64>()).sum();
    assert!(cu.iter().sum::<f64>().abs() <= 1e-10 * scale);
}

#[test]
fn solution_is_linear_in_the_force() {
    let (a, b) = (solved(1, 1.0), solved(1, 3.0));
    let n = norm(&b.x);
    for (x, y) in a.x.iter().zip(&b.x) {
        assert!((3.0 * x - y).abs() <= 1e-10 * n);
    }
}

#[test]
fn nitsche_parameter_robustness() {
    let errs: Vec<f64> = [20.0, 40.0, 80.0]
        .iter()
        .map(|&gamma_n| {
            let cfg = StudyConfig { gamma_n, ..StudyConfig::default() };
            solve_level(&cfg, 2).unwrap().row.h1u
        })
        .collect();
    let (lo, hi) = errs.iter().fold((f64::MAX, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    assert!(hi / lo < 1.2, "{errs:?}");
}
