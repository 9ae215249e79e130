//! Background triangulations, Alfeld splits, Lagrange node numbering and the
//! classification of elements and facets against a discrete level set.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::DiscreteLevelSet;
use crate::spaces::reference::{interior_count, lagrange_nodes, REF_EDGES};

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }
}

/// An edge of a triangulation with its one or two adjacent triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Facet {
    pub vertices: [usize; 2],
    pub owners: [usize; 2],
    /// Number of adjacent triangles (1 on the boundary, 2 inside).
    pub n_owners: u8,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.n_owners == 1
    }

    /// The neighbor of `owner` across this facet.
    pub fn other(&self, owner: usize) -> Option<usize> {
        if self.n_owners < 2 {
            None
        } else if self.owners[0] == owner {
            Some(self.owners[1])
        } else {
            Some(self.owners[0])
        }
    }
}

/// Facets of a triangle list in first-encounter order, plus per-triangle
/// facet indices for the local edges `(0,1)`, `(1,2)`, `(2,0)`.
fn build_facets(triangles: &[[usize; 3]]) -> (Vec<Facet>, Vec<[usize; 3]>) {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
    let mut facets: Vec<Facet> = Vec::with_capacity(triangles.len() * 2);
    let mut elem_facets = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut ef = [0; 3];
        for (l, [a, b]) in REF_EDGES.iter().enumerate() {
            let (va, vb) = (tri[*a], tri[*b]);
            let key = (va.min(vb), va.max(vb));
            let idx = *lookup.entry(key).or_insert_with(|| {
                facets.push(Facet { vertices: [key.0, key.1], owners: [t, usize::MAX], n_owners: 0 });
                facets.len() - 1
            });
            let f = &mut facets[idx];
            f.owners[f.n_owners as usize] = t;
            f.n_owners += 1;
            ef[l] = idx;
        }
        elem_facets.push(ef);
    }
    (facets, elem_facets)
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// A conforming triangulation of the background domain.
#[derive(Clone, Debug)]
pub struct MacroMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    pub elem_facets: Vec<[usize; 3]>,
    /// Grid spacing used as the global mesh size `h`.
    pub h: f64,
}

impl MacroMesh {
    fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, h: f64) -> Self {
        let (facets, elem_facets) = build_facets(&triangles);
        Self { vertices, triangles, facets, elem_facets, h }
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn boundary_flags(&self) -> Vec<bool> {
        self.facets.iter().map(Facet::is_boundary).collect()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.facets
            .iter()
            .map(|f| dist(self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]))
            .fold(0.0, f64::max)
    }

    fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Checks adjacency, orientation and quasi-uniformity.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (i, f) in self.facets.iter().enumerate() {
            if f.n_owners == 0 || f.n_owners > 2 {
                return Err(format!("facet {i} has {} owners", f.n_owners));
            }
        }
        // boundary facets must lie on the bounding box
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let tol = 1e-12 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        for (i, f) in self.facets.iter().filter(|f| f.is_boundary()).enumerate() {
            let (a, b) = (self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]);
            let on_box = (0..2).any(|d| {
                ((a[d] - lo[d]).abs() < tol && (b[d] - lo[d]).abs() < tol)
                    || ((a[d] - hi[d]).abs() < tol && (b[d] - hi[d]).abs() < tol)
            });
            if !on_box {
                return Err(format!("boundary facet {i} is interior to the box"));
            }
        }
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for t in 0..self.triangles.len() {
            if self.area(t) <= 0.0 {
                return Err(format!("triangle {t} not positively oriented"));
            }
            let d = self.diameter(t);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if dmax > 4.0 * dmin {
            return Err(format!("diameter ratio {} exceeds 4", dmax / dmin));
        }
        Ok(())
    }
}

/// Structured triangulation of `rect`: an `nx x ny` grid of squares, each split
/// along its SW-NE diagonal. `n = ceil(side / h)`, clamped to at least 2.
pub fn build_background_mesh(rect: Rect, h: f64) -> MacroMesh {
    assert!(h > 0.0 && rect.max[0] > rect.min[0] && rect.max[1] > rect.min[1]);
    let (wx, wy) = (rect.max[0] - rect.min[0], rect.max[1] - rect.min[1]);
    let nx = ((wx / h).ceil() as usize).max(2);
    let ny = ((wy / h).ceil() as usize).max(2);
    let (dx, dy) = (wx / nx as f64, wy / ny as f64);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([rect.min[0] + i as f64 * dx, rect.min[1] + j as f64 * dy]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (sw, se, ne, nw) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([sw, se, ne]);
            triangles.push([sw, ne, nw]);
        }
    }
    MacroMesh::from_parts(vertices, triangles, dx.max(dy))
}

/// Red refinement: each triangle is split into four by its edge midpoints.
pub fn refine_uniform(m: &MacroMesh) -> MacroMesh {
    let mut vertices = m.vertices.clone();
    let mut mid = vec![usize::MAX; m.facets.len()];
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for (t, tri) in m.triangles.iter().enumerate() {
        let mut mids = [0; 3];
        for l in 0..3 {
            let f = m.elem_facets[t][l];
            if mid[f] == usize::MAX {
                let [a, b] = m.facets[f].vertices;
                let (pa, pb) = (m.vertices[a], m.vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                mid[f] = vertices.len() - 1;
            }
            mids[l] = mid[f];
        }
        let [a, b, c] = *tri;
        let [mab, mbc, mca] = mids;
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }
    MacroMesh::from_parts(vertices, triangles, 0.5 * m.h)
}

/// Barycentric (Alfeld) split of a macro mesh.
///
/// Vertex numbering: macro vertices first, then one barycenter per macro
/// triangle. Child `3 t + i` of macro triangle `t = (a0, a1, a2)` is
/// `(a_i, a_{i+1}, g_t)`.
#[derive(Clone, Debug)]
pub struct AlfeldMesh {
    pub macro_mesh: MacroMesh,
    pub vertices: Vec<Point>,
    pub children: Vec<[usize; 3]>,
    pub parent: Vec<usize>,
    pub facets: Vec<Facet>,
    pub elem_facets: Vec<[usize; 3]>,
}

pub fn alfeld_split(m: &MacroMesh) -> AlfeldMesh {
    let nv = m.vertices.len();
    let mut vertices = m.vertices.clone();
    let mut children = Vec::with_capacity(3 * m.triangles.len());
    let mut parent = Vec::with_capacity(3 * m.triangles.len());
    for (t, tri) in m.triangles.iter().enumerate() {
        let [a, b, c] = m.triangle_points(t);
        vertices.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
        let g = nv + t;
        for i in 0..3 {
            children.push([tri[i], tri[(i + 1) % 3], g]);
            parent.push(t);
        }
    }
    let (facets, elem_facets) = build_facets(&children);
    AlfeldMesh { macro_mesh: m.clone(), vertices, children, parent, facets, elem_facets }
}

impl AlfeldMesh {
    pub fn h(&self) -> f64 {
        self.macro_mesh.h
    }

    pub fn n_elements(&self) -> usize {
        self.children.len()
    }

    pub fn element_points(&self, e: usize) -> [Point; 3] {
        let [a, b, c] = self.children[e];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_points(e);
        signed_area(a, b, c)
    }

    /// Local edge index of facet `f` in element `e`.
    pub fn local_edge(&self, e: usize, f: usize) -> usize {
        self.elem_facets[e].iter().position(|&g| g == f).expect("facet not on element")
    }

    /// Writes the split mesh as a legacy-VTK ASCII unstructured grid, with an
    /// optional integer cell field.
    pub fn write_vtk<W: Write>(&self, mut w: W, cell_field: Option<(&str, &[i32])>) -> Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0\nalfeld mesh\nASCII\nDATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
        }
        let n = self.children.len();
        writeln!(w, "CELLS {} {}", n, 4 * n)?;
        for c in &self.children {
            writeln!(w, "3 {} {} {}", c[0], c[1], c[2])?;
        }
        writeln!(w, "CELL_TYPES {n}")?;
        for _ in 0..n {
            writeln!(w, "5")?;
        }
        if let Some((name, vals)) = cell_field {
            writeln!(w, "CELL_DATA {n}\nSCALARS {name} int 1\nLOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v}")?;
            }
        }
        Ok(())
    }
}

/// Global numbering of degree-`k` Lagrange nodes on an Alfeld mesh.
///
/// Vertex nodes come first, then `k - 1` nodes per facet (ordered from the
/// lower to the higher vertex index), then interior nodes element by element.
#[derive(Clone, Debug)]
pub struct NodeNumbering {
    pub degree: usize,
    pub n_nodes: usize,
    /// `elem_nodes[e * n_local + j]` is the global node of local node `j` of element `e`.
    pub elem_nodes: Vec<usize>,
    pub n_local: usize,
    /// Node coordinates on the affine (undeformed) mesh.
    pub positions: Vec<Point>,
}

impl NodeNumbering {
    pub fn new(am: &AlfeldMesh, degree: usize) -> Self {
        assert!(degree >= 1);
        let ref_nodes = lagrange_nodes(degree);
        let n_local = ref_nodes.len();
        let nv = am.vertices.len();
        let per_edge = degree - 1;
        let n_int = interior_count(degree);
        let n_nodes = nv + am.facets.len() * per_edge + am.children.len() * n_int;
        let mut elem_nodes = vec![0; am.children.len() * n_local];
        let mut positions = vec![[0.0; 2]; n_nodes];
        for (e, tri) in am.children.iter().enumerate() {
            let [p0, p1, p2] = am.element_points(e);
            let map = |x: [f64; 2]| {
                [
                    p0[0] + (p1[0] - p0[0]) * x[0] + (p2[0] - p0[0]) * x[1],
                    p0[1] + (p1[1] - p0[1]) * x[0] + (p2[1] - p0[1]) * x[1],
                ]
            };
            let base = e * n_local;
            elem_nodes[base..base + 3].copy_from_slice(tri);
            for (l, [a, b]) in REF_EDGES.iter().enumerate() {
                let f = am.elem_facets[e][l];
                let forward = tri[*a] < tri[*b];
                for s in 0..per_edge {
                    let gs = if forward { s } else { per_edge - 1 - s };
                    elem_nodes[base + 3 + l * per_edge + s] = nv + f * per_edge + gs;
                }
            }
            for s in 0..n_int {
                elem_nodes[base + 3 + 3 * per_edge + s] = nv + am.facets.len() * per_edge + e * n_int + s;
            }
            for (j, x) in ref_nodes.iter().enumerate() {
                positions[elem_nodes[base + j]] = map(*x);
            }
        }
        Self { degree, n_nodes, elem_nodes, n_local, positions }
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elem_nodes[e * self.n_local..(e + 1) * self.n_local]
    }
}

/// Position of an Alfeld element relative to the discrete interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementClass {
    Inside,
    Cut,
    Outside,
}

/// Element and facet sets derived from the P1 level set.
#[derive(Clone, Debug)]
pub struct ElementSets {
    /// Class of every Alfeld element.
    pub class: Vec<ElementClass>,
    pub active_macro: Vec<bool>,
    pub cut_macro: Vec<bool>,
    pub gp_macro: Vec<bool>,
    /// Alfeld elements of active macro elements, ascending.
    pub active: Vec<usize>,
    /// Position of each Alfeld element in `active` (`usize::MAX` if inactive).
    pub active_index: Vec<usize>,
    /// Alfeld elements meeting the discrete interface (the band).
    pub alfeld_cut: Vec<usize>,
    /// Active Alfeld elements whose closure is disjoint from the band.
    pub alfeld_interior: Vec<usize>,
    /// Ghost-penalty facets of the Alfeld mesh.
    pub gp_facets: Vec<usize>,
}

impl ElementSets {
    pub fn is_active(&self, e: usize) -> bool {
        self.active_index[e] != usize::MAX
    }

    pub fn band_elements(&self) -> &[usize] {
        &self.alfeld_cut
    }

    pub fn n_active_macro(&self) -> usize {
        self.active_macro.iter().filter(|&&b| b).count()
    }

    pub fn n_cut_macro(&self) -> usize {
        self.cut_macro.iter().filter(|&&b| b).count()
    }
}

/// Classifies Alfeld elements by the signs of the (snapped) P1 vertex values.
pub fn classify_elements(am: &AlfeldMesh, phi: &DiscreteLevelSet) -> Result<ElementSets> {
    let class: Vec<ElementClass> = am
        .children
        .iter()
        .map(|tri| {
            let neg = tri.iter().filter(|&&v| phi.vertex_value(v) < 0.0).count();
            match neg {
                3 => ElementClass::Inside,
                0 => ElementClass::Outside,
                _ => ElementClass::Cut,
            }
        })
        .collect();
    let nm = am.macro_mesh.triangles.len();
    let mut active_macro = vec![false; nm];
    let mut cut_macro = vec![false; nm];
    for (e, c) in class.iter().enumerate() {
        let t = am.parent[e];
        match c {
            ElementClass::Inside => active_macro[t] = true,
            ElementClass::Cut => {
                active_macro[t] = true;
                cut_macro[t] = true;
            }
            ElementClass::Outside => {}
        }
    }
    if !active_macro.iter().any(|&a| a) {
        return Err(Error::EmptyActiveSet);
    }
    let mm = &am.macro_mesh;
    let mut gp_macro = cut_macro.clone();
    for f in &mm.facets {
        if f.n_owners == 2 {
            let [t1, t2] = f.owners;
            if cut_macro[t1] && active_macro[t2] {
                gp_macro[t2] = true;
            }
            if cut_macro[t2] && active_macro[t1] {
                gp_macro[t1] = true;
            }
        }
    }
    let active: Vec<usize> = (0..am.children.len()).filter(|&e| active_macro[am.parent[e]]).collect();
    let mut active_index = vec![usize::MAX; am.children.len()];
    for (i, &e) in active.iter().enumerate() {
        active_index[e] = i;
    }
    let alfeld_cut: Vec<usize> =
        (0..am.children.len()).filter(|&e| class[e] == ElementClass::Cut).collect();
    let mut band_vertex = vec![false; am.vertices.len()];
    for &e in &alfeld_cut {
        for &v in &am.children[e] {
            band_vertex[v] = true;
        }
    }
    let alfeld_interior: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&e| am.children[e].iter().all(|&v| !band_vertex[v]))
        .collect();
    let gp_facets: Vec<usize> = am
        .facets
        .iter()
        .enumerate()
        .filter(|(_, f)| f.n_owners == 2 && f.owners.iter().all(|&k| gp_macro[am.parent[k]]))
        .map(|(i, _)| i)
        .collect();
    Ok(ElementSets {
        class,
        active_macro,
        cut_macro,
        gp_macro,
        active,
        active_index,
        alfeld_cut,
        alfeld_interior,
        gp_facets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Rect {
        Rect::new([-1.0, -1.0], [1.0, 1.0])
    }

    #[test]
    fn background_counts() {
        let m = build_background_mesh(unit_box(), 1.0);
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.vertices.len(), 9);
        let m = build_background_mesh(unit_box(), 0.3);
        assert_eq!(m.triangles.len(), 98);
        assert!((0..m.triangles.len()).all(|t| m.area(t) > 0.0));
        m.check_invariants().unwrap();
        // h is clamped so that n >= 2
        assert_eq!(build_background_mesh(unit_box(), 10.0).triangles.len(), 8);
    }

    #[test]
    fn refinement() {
        let m0 = build_background_mesh(unit_box(), 1.0);
        let m1 = refine_uniform(&m0);
        assert_eq!(m1.triangles.len(), 32);
        let m2 = refine_uniform(&m1);
        assert!((m2.max_edge_length() - m0.max_edge_length() / 4.0).abs() < 1e-14);
        m1.check_invariants().unwrap();
        m2.check_invariants().unwrap();
        // red refinement of the structured mesh reproduces the finer structured mesh
        let direct = build_background_mesh(unit_box(), 0.25);
        assert_eq!(direct.triangles.len(), m2.triangles.len());
        let total: f64 = (0..m2.triangles.len()).map(|t| m2.area(t)).sum();
        assert!((total - 4.0).abs() < 1e-13);
    }

    #[test]
    fn alfeld_children_partition_parent() {
        let m = build_background_mesh(unit_box(), 1.0);
        let am = alfeld_split(&m);
        assert_eq!(am.children.len(), 24);
        for t in 0..m.triangles.len() {
            let s: f64 = (0..3).map(|i| am.area(3 * t + i)).sum();
            assert!((s - m.area(t)).abs() <= 1e-14 * m.area(t));
        }
        for f in &am.facets {
            let on_boundary = {
                let (a, b) = (am.vertices[f.vertices[0]], am.vertices[f.vertices[1]]);
                (0..2).any(|d| (a[d].abs() - 1.0).abs() < 1e-14 && (a[d] - b[d]).abs() < 1e-14)
            };
            assert_eq!(f.is_boundary(), on_boundary);
            if !on_boundary {
                assert_eq!(f.n_owners, 2);
            }
        }
    }

    #[test]
    fn node_numbering_shared_and_located() {
        let m = build_background_mesh(unit_box(), 1.0);
        let am = alfeld_split(&m);
        for k in 2..=4 {
            let num = NodeNumbering::new(&am, k);
            let refn = lagrange_nodes(k);
            for e in 0..am.n_elements() {
                let [p0, p1, p2] = am.element_points(e);
                for (j, &g) in num.element(e).iter().enumerate() {
                    let x = refn[j];
                    let p = [
                        p0[0] + (p1[0] - p0[0]) * x[0] + (p2[0] - p0[0]) * x[1],
                        p0[1] + (p1[1] - p0[1]) * x[0] + (p2[1] - p0[1]) * x[1],
                    ];
                    assert!(dist(p, num.positions[g]) < 1e-14, "k={k} e={e} j={j}");
                }
            }
            // every node is referenced by some element
            let mut seen = vec![false; num.n_nodes];
            num.elem_nodes.iter().for_each(|&g| seen[g] = true);
            assert!(seen.iter().all(|&s| s));
        }
    }
}
