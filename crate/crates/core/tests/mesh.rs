use cutsv::geometry::{interpolate_p1, ConstantLevelSet, LevelSet};
use cutsv::harness::{level_mesh, QuarticLevelSet, BACKGROUND};
use cutsv::mesh::{alfeld_split, build_background_mesh, classify_elements, refine_uniform, ElementClass, Rect};
use cutsv::spaces::reference::lagrange_nodes;
use cutsv::Error;
use proptest::prelude::*;

#[test]
fn background_mesh_counts() {
    let m = build_background_mesh(BACKGROUND, 1.0);
    assert_eq!((m.triangles.len(), m.vertices.len()), (8, 9));
    let m = build_background_mesh(BACKGROUND, 0.3);
    // N = ceil(2 / 0.3) = 7
    assert_eq!(m.triangles.len(), 2 * 7 * 7);
    assert!((m.h - 2.0 / 7.0).abs() < 1e-15);
}

#[test]
fn refinement_chain_keeps_invariants() {
    let m = build_background_mesh(BACKGROUND, 1.0);
    let r1 = refine_uniform(&m);
    assert_eq!(r1.triangles.len(), 32);
    let r2 = refine_uniform(&r1);
    assert!((r2.max_edge_length() - m.max_edge_length() / 4.0).abs() <= 1e-14);
    for mm in [&r1, &r2] {
        mm.check_invariants().unwrap();
    }
}

#[test]
fn alfeld_split_of_coarse_mesh() {
    let m = build_background_mesh(BACKGROUND, 1.0);
    let am = alfeld_split(&m);
    assert_eq!(am.children.len(), 24);
    for t in 0..m.triangles.len() {
        let kids: Vec<usize> = (0..am.children.len()).filter(|&e| am.parent[e] == t).collect();
        assert_eq!(kids.len(), 3);
        let s: f64 = kids.iter().map(|&e| am.area(e)).sum();
        assert!((s - m.area(t)).abs() <= 1e-14 * m.area(t));
    }
    assert!(am.facets.iter().filter(|f| !f.is_boundary()).all(|f| f.n_owners == 2));
}

#[test]
fn edge_nodes_sit_at_lobatto_abscissae() {
    // interior Gauss-Lobatto points on [0, 1] in closed form
    let expected: [Vec<f64>; 3] = [
        vec![0.5],
        vec![0.5 * (1.0 - 0.2f64.sqrt()), 0.5 * (1.0 + 0.2f64.sqrt())],
        vec![0.5 * (1.0 - (3.0f64 / 7.0).sqrt()), 0.5, 0.5 * (1.0 + (3.0f64 / 7.0).sqrt())],
    ];
    for k in 2..=4 {
        let nodes = lagrange_nodes(k);
        // first edge (0,0)-(1,0): nodes 3 .. 3 + k - 1 in increasing order
        for (s, t) in expected[k - 2].iter().enumerate() {
            let x = nodes[3 + s];
            assert!(x[1].abs() < 1e-15);
            assert!((x[0] - t).abs() < 1e-14, "k={k} s={s}");
        }
    }
}

#[test]
fn negative_level_set_makes_everything_inside() {
    let am = alfeld_split(&build_background_mesh(BACKGROUND, 0.5));
    let phi = interpolate_p1(&ConstantLevelSet(-1.0), &am).unwrap();
    let s = classify_elements(&am, &phi).unwrap();
    assert!(s.class.iter().all(|&c| c == ElementClass::Inside));
    assert!(s.alfeld_cut.is_empty() && s.gp_facets.is_empty() && s.n_cut_macro() == 0);
    assert_eq!(s.active.len(), am.children.len());
}

#[test]
fn positive_level_set_is_rejected() {
    let am = alfeld_split(&build_background_mesh(BACKGROUND, 0.5));
    let phi = interpolate_p1(&ConstantLevelSet(1.0), &am).unwrap();
    assert!(matches!(classify_elements(&am, &phi), Err(Error::EmptyActiveSet)));
}

#[test]
fn non_finite_level_set_names_the_vertex() {
    struct Bad;
    impl LevelSet for Bad {
        fn value(&self, x: [f64; 2]) -> f64 {
            if x == [0.0, 0.0] { f64::NAN } else { -1.0 }
        }
        fn gradient(&self, _x: [f64; 2]) -> [f64; 2] {
            [0.0, 0.0]
        }
    }
    let am = alfeld_split(&build_background_mesh(BACKGROUND, 0.5));
    match interpolate_p1(&Bad, &am) {
        Err(Error::NonFiniteLevelSet { x, y, .. }) => assert_eq!([x, y], [0.0, 0.0]),
        other => panic!("{other:?}"),
    }
}

/// Value of the P1 interpolant at a point of macro triangle `t`, located by
/// barycentric coordinates in the Alfeld children.
fn p1_value(am: &cutsv::mesh::AlfeldMesh, vals: &[f64], t: usize, x: [f64; 2]) -> f64 {
    for e in (0..am.children.len()).filter(|&e| am.parent[e] == t) {
        let [a, b, c] = am.element_points(e);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
        let l0 = 1.0 - l1 - l2;
        if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
            let v = am.children[e];
            return l0 * vals[v[0]] + l1 * vals[v[1]] + l2 * vals[v[2]];
        }
    }
    unreachable!("point outside its macro triangle")
}

#[test]
fn cut_macro_count_matches_dense_sampling() {
    let m = build_background_mesh(BACKGROUND, 0.3);
    let am = alfeld_split(&m);
    let ls = QuarticLevelSet::default();
    let phi = interpolate_p1(&ls, &am).unwrap();
    let sets = classify_elements(&am, &phi).unwrap();
    let n = 140; // ~10^4 samples per triangle
    let mut brute = 0;
    for t in 0..m.triangles.len() {
        let [a, b, c] = m.triangle_points(t);
        let (mut neg, mut pos) = (false, false);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let (s, r) = (i as f64 / n as f64, j as f64 / n as f64);
                let x = [a[0] + s * (b[0] - a[0]) + r * (c[0] - a[0]), a[1] + s * (b[1] - a[1]) + r * (c[1] - a[1])];
                let v = p1_value(&am, &phi.nodal_values, t, x);
                neg |= v < 0.0;
                pos |= v > 0.0;
            }
        }
        if neg && pos {
            brute += 1;
        }
    }
    assert!(brute > 0);
    assert_eq!(sets.n_cut_macro(), brute);
}

#[test]
fn element_sets_are_nested_and_consistent() {
    let ls = QuarticLevelSet::default();
    for level in 0..3 {
        let am = alfeld_split(&level_mesh(0.3, level));
        let s = classify_elements(&am, &interpolate_p1(&ls, &am).unwrap()).unwrap();
        let count = |c| s.class.iter().filter(|&&x| x == c).count();
        assert_eq!(count(ElementClass::Inside) + count(ElementClass::Cut) + count(ElementClass::Outside), am.children.len());
        for t in 0..am.macro_mesh.triangles.len() {
            assert!(!s.cut_macro[t] || s.gp_macro[t]);
            assert!(!s.gp_macro[t] || s.active_macro[t]);
        }
        for (i, f) in am.facets.iter().enumerate() {
            let both = f.n_owners == 2 && f.owners.iter().all(|&e| s.gp_macro[am.parent[e]]);
            assert_eq!(s.gp_facets.contains(&i), both, "facet {i}");
        }
        // facets inside one macro triangle are included
        assert!(s.gp_facets.iter().any(|&f| {
            let [a, b] = am.facets[f].owners;
            am.parent[a] == am.parent[b]
        }));
        assert!(s.alfeld_cut.iter().all(|&e| s.class[e] == ElementClass::Cut));
        assert!(s.alfeld_interior.iter().all(|&e| s.class[e] == ElementClass::Inside || s.class[e] == ElementClass::Outside));
    }
}

/// Largest distance from a vertex of a cut element to the curve
/// `x^4 + y^4 = 1/4`, against a dense parametrization of the curve.
fn band_width(level: usize) -> f64 {
    let ls = QuarticLevelSet::default();
    let am = alfeld_split(&level_mesh(0.3, level));
    let s = classify_elements(&am, &interpolate_p1(&ls, &am).unwrap()).unwrap();
    let r = 0.25f64.powf(0.25);
    let curve: Vec<[f64; 2]> = (0..40_000)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / 40_000.0;
            let (c, sn) = (t.cos(), t.sin());
            [r * c.signum() * c.abs().sqrt(), r * sn.signum() * sn.abs().sqrt()]
        })
        .collect();
    let mut worst: f64 = 0.0;
    for &e in &s.alfeld_cut {
        for p in am.element_points(e) {
            let d = curve.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

#[test]
fn cut_band_shrinks_linearly() {
    let w: Vec<f64> = (1..=3).map(band_width).collect();
    for pair in w.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.5..=2.5).contains(&ratio), "{w:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn structured_meshes_are_valid(h in 0.05f64..1.5, wx in 0.5f64..3.0, wy in 0.5f64..3.0, x0 in -2.0f64..2.0) {
        let rect = Rect::new([x0, -1.0], [x0 + wx, -1.0 + wy]);
        let m = build_background_mesh(rect, h);
        let nx = ((wx / h).ceil() as usize).max(2);
        let ny = ((wy / h).ceil() as usize).max(2);
        prop_assert_eq!(m.triangles.len(), 2 * nx * ny);
        prop_assert!((0..m.triangles.len()).all(|t| m.area(t) > 0.0));
        let total: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
        prop_assert!((total - wx * wy).abs() <= 1e-12 * wx * wy);
        let bnd = m.facets.iter().filter(|f| f.is_boundary()).count();
        prop_assert_eq!(bnd, 2 * (nx + ny));
    }

    #[test]
    fn alfeld_children_tile_random_meshes(h in 0.1f64..1.0) {
        let m = build_background_mesh(BACKGROUND, h);
        let am = alfeld_split(&m);
        prop_assert_eq!(am.children.len(), 3 * m.triangles.len());
        for t in 0..m.triangles.len() {
            let s: f64 = (0..3).map(|i| am.area(3 * t + i)).sum();
            prop_assert!((s - m.area(t)).abs() <= 1e-14 * m.area(t));
        }
    }
}
