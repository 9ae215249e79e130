//! Finite element spaces on the mapped active mesh.

pub mod reference;
mod velocity;

pub use velocity::{
    active_boundary_facets, combine, eval_velocity, facet_flux, interpolate_velocity, VelocityBasis,
    VelocityElement, VelocitySpace, VelocityValue, MAX_VDOFS,
};

use std::io::Write;

use crate::error::Result;
use crate::geometry::{CutGeometry, MapEval, MAX_LOCAL};
use crate::linalg::{inv2, matvec_t};
use crate::mesh::{ElementClass, NodeNumbering, Point};
use reference::ReferenceElement;

/// Scalar basis values and physical gradients at one point.
#[derive(Clone, Debug)]
pub struct ScalarBasis {
    pub n: usize,
    pub value: [f64; MAX_LOCAL],
    pub grad: [Point; MAX_LOCAL],
}

impl Default for ScalarBasis {
    fn default() -> Self {
        Self { n: 0, value: [0.0; MAX_LOCAL], grad: [[0.0; 2]; MAX_LOCAL] }
    }
}

/// Composition-mapped scalar basis: `q = q^ o phi_K^{-1}`, `grad q = F^{-T} grad^ q^`.
pub fn eval_scalar_basis(re: &ReferenceElement, xref: Point, ev: &MapEval, out: &mut ScalarBasis) {
    let mut g = [[0.0; 2]; MAX_LOCAL];
    re.values_grads(xref, &mut out.value, &mut g);
    let finv = inv2(&ev.f);
    out.n = re.len();
    for j in 0..out.n {
        out.grad[j] = matvec_t(&finv, g[j]);
    }
}

/// Discontinuous pressures `Q_h`: degree `k - 1` per active Alfeld element.
#[derive(Clone, Debug)]
pub struct PressureSpace {
    pub degree: usize,
    pub reference: ReferenceElement,
    pub n_elements: usize,
}

impl PressureSpace {
    pub fn new(geom: &CutGeometry) -> Self {
        let degree = geom.degree() - 1;
        Self { degree, reference: ReferenceElement::new(degree), n_elements: geom.sets.active.len() }
    }

    pub fn n_local(&self) -> usize {
        self.reference.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_elements * self.n_local()
    }

    /// First dof of Alfeld element `e` (which must be active).
    pub fn offset(&self, geom: &CutGeometry, e: usize) -> usize {
        geom.sets.active_index[e] * self.n_local()
    }
}

/// Continuous Lagrange space of a given degree on a subset of Alfeld elements.
///
/// Used for the multiplier space `Sigma_h` (cut elements) and the continuous
/// pressure space `Q_h*` (elements meeting `Omega_h`).
#[derive(Clone, Debug)]
pub struct ContinuousSpace {
    pub degree: usize,
    pub reference: ReferenceElement,
    pub numbering: NodeNumbering,
    /// Lagrange node -> dof (`usize::MAX` if unused).
    pub node_dof: Vec<usize>,
    /// Dof -> Lagrange node.
    pub dof_node: Vec<usize>,
    /// Elements carrying the space, ascending.
    pub elements: Vec<usize>,
    pub supported: Vec<bool>,
}

impl ContinuousSpace {
    pub fn new(geom: &CutGeometry, degree: usize, elements: Vec<usize>) -> Self {
        let numbering = NodeNumbering::new(&geom.mesh, degree);
        let mut node_dof = vec![usize::MAX; numbering.n_nodes];
        let mut dof_node = Vec::new();
        let mut supported = vec![false; geom.mesh.n_elements()];
        for &e in &elements {
            supported[e] = true;
            for &g in numbering.element(e) {
                if node_dof[g] == usize::MAX {
                    node_dof[g] = dof_node.len();
                    dof_node.push(g);
                }
            }
        }
        Self { degree, reference: ReferenceElement::new(degree), numbering, node_dof, dof_node, elements, supported }
    }

    /// `Sigma_h` of degree `k_lambda` on the cut elements.
    pub fn multiplier(geom: &CutGeometry, k_lambda: usize) -> Self {
        Self::new(geom, k_lambda, geom.sets.alfeld_cut.clone())
    }

    /// `Q_h*` of degree `k - 1` on the inside and cut elements.
    pub fn continuous_pressure(geom: &CutGeometry) -> Self {
        let elements =
            geom.sets.active.iter().copied().filter(|&e| geom.sets.class[e] != ElementClass::Outside).collect();
        Self::new(geom, geom.degree() - 1, elements)
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_node.len()
    }

    /// Local-to-global dofs of a supported element.
    pub fn element_dofs(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.numbering.element(e).iter().map(|&g| self.node_dof[g])
    }

    /// Physical (mapped) positions of all dofs.
    pub fn dof_positions(&self, geom: &CutGeometry) -> Vec<Point> {
        let mut pos = vec![[0.0; 2]; self.n_dofs()];
        let mut seen = vec![false; self.n_dofs()];
        for &e in &self.elements {
            let map = geom.element_map(e);
            for (j, d) in self.element_dofs(e).enumerate() {
                if !seen[d] {
                    seen[d] = true;
                    pos[d] = map.point(&geom.reference, self.reference.nodes()[j]);
                }
            }
        }
        pos
    }

    /// Value and physical gradient at a reference point of element `e`.
    pub fn eval(&self, geom: &CutGeometry, e: usize, coeffs: &[f64], xref: Point) -> (f64, Point) {
        let map = geom.element_map(e);
        let ev = map.eval(&geom.reference, xref);
        let mut b = ScalarBasis::default();
        eval_scalar_basis(&self.reference, xref, &ev, &mut b);
        let (mut v, mut g) = (0.0, [0.0; 2]);
        for (j, d) in self.element_dofs(e).enumerate() {
            v += coeffs[d] * b.value[j];
            g[0] += coeffs[d] * b.grad[j][0];
            g[1] += coeffs[d] * b.grad[j][1];
        }
        (v, g)
    }
}

/// Nodal interpolation at the mapped nodes.
pub fn interpolate_scalar(space: &ContinuousSpace, geom: &CutGeometry, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    space.dof_positions(geom).into_iter().map(f).collect()
}

/// Writes velocity, pressure and (optionally) a continuous pressure sampled
/// on a lattice of `n` subdivisions per active element, as legacy VTK.
#[allow(clippy::too_many_arguments)]
pub fn write_fields_vtk<W: Write>(
    mut w: W,
    geom: &CutGeometry,
    vspace: &VelocitySpace,
    u: &[f64],
    pspace: &PressureSpace,
    p: &[f64],
    pstar: Option<(&ContinuousSpace, &[f64])>,
    n: usize,
) -> Result<()> {
    let re = &geom.reference;
    let mut pts = Vec::new();
    let mut vel = Vec::new();
    let mut pres = Vec::new();
    let mut pst = Vec::new();
    let mut cells = Vec::new();
    let mut pv = [0.0; MAX_LOCAL];
    for &e in &geom.sets.active {
        let el = vspace.element(geom, e)?;
        let local = el.gather(u);
        let off = pspace.offset(geom, e);
        let mut index = vec![vec![0usize; n + 1]; n + 1];
        for j in 0..=n {
            for i in 0..=(n - j) {
                let xr = [i as f64 / n as f64, j as f64 / n as f64];
                let val = el.eval_field(re, &local[..el.n_dofs()], xr);
                index[j][i] = pts.len();
                pts.push(el.map.point(re, xr));
                vel.push(val.value);
                pspace.reference.values(xr, &mut pv);
                pres.push((0..pspace.n_local()).map(|l| p[off + l] * pv[l]).sum::<f64>());
                if let Some((qs, c)) = pstar {
                    pst.push(if qs.supported[e] { qs.eval(geom, e, c, xr).0 } else { 0.0 });
                }
            }
        }
        for j in 0..n {
            for i in 0..(n - j) {
                cells.push([index[j][i], index[j][i + 1], index[j + 1][i]]);
                if i + 1 < n - j {
                    cells.push([index[j][i + 1], index[j + 1][i + 1], index[j + 1][i]]);
                }
            }
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0\nfields\nASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", pts.len())?;
    for p in &pts {
        writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {} {}", cells.len(), 4 * cells.len())?;
    for c in &cells {
        writeln!(w, "3 {} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len())?;
    for _ in &cells {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", pts.len())?;
    writeln!(w, "VECTORS velocity double")?;
    for v in &vel {
        writeln!(w, "{:.17e} {:.17e} 0", v[0], v[1])?;
    }
    writeln!(w, "SCALARS pressure double 1\nLOOKUP_TABLE default")?;
    for v in &pres {
        writeln!(w, "{v:.17e}")?;
    }
    if pstar.is_some() {
        writeln!(w, "SCALARS pressure_post double 1\nLOOKUP_TABLE default")?;
        for v in &pst {
            writeln!(w, "{v:.17e}")?;
        }
    }
    Ok(())
}
