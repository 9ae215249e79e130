//! Bilinear forms and the saddle point system
//!
//! ```text
//! [ A + I   B^T  C^T  0 ] [u]   [f]
//! [ B       0    0    m ] [p] = [0]
//! [ C       0    J    0 ] [l]   [0]
//! [ 0       m^T  0    0 ] [s]   [0]
//! ```
//!
//! with `A` from `a_h`, `I` the ghost penalty, `B` from `b_h`, `C` from `c_h`,
//! `J` from `j_h` and `m` the pressure means over the active mesh.

mod bilinear;
mod ghost;

pub use bilinear::{assemble_a, assemble_b, assemble_c, assemble_j, assemble_rhs, pressure_mean_vector};
pub use ghost::{
    assemble_ghost_penalty, assemble_scalar_ghost_penalty, ghost_penalty_energy, ghost_penalty_field_energy,
    patch_points, postprocess_facets, PatchPoint, MIN_EXTENDED_JACOBIAN,
};

use crate::error::{Error, Result};
use crate::geometry::{build_quadratures, CutGeometry, CutQuadrature, GeometryMode, LevelSet};
use crate::mesh::{MacroMesh, Point};
use crate::solver::{solve_factored, Factorization, SparseMatrix, TripletBuilder};
use crate::spaces::{ContinuousSpace, PressureSpace, VelocitySpace};

/// Discretization parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FormParams {
    pub k: usize,
    pub k_lambda: usize,
    pub gamma_n: f64,
    pub gamma_gp: f64,
    pub gamma_lambda: f64,
    /// Exactness of the volume and interface rules.
    pub order_volume: usize,
    /// Exactness of the ghost-penalty patch rules.
    pub order_gp: usize,
    /// Coefficient of `int_{Gamma_h} w (n_2 d_1 q - n_1 d_2 q)` (with `w` the
    /// scalar curl of `u_h`) in the pressure recovery right-hand side.
    pub curl_sign: f64,
}

impl FormParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            k_lambda: k - 1,
            gamma_n: 40.0,
            gamma_gp: 0.1,
            gamma_lambda: 0.1,
            order_volume: 2 * k + 2,
            order_gp: 4 * k,
            curl_sign: -1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.k) {
            return Err(Error::Config(format!("velocity degree k = {} not in 2..=4", self.k)));
        }
        if self.k_lambda + 1 != self.k && self.k_lambda != self.k {
            return Err(Error::Config(format!("multiplier degree {} must be k - 1 or k", self.k_lambda)));
        }
        if !(self.gamma_n > 0.0) || !(self.gamma_gp >= 0.0) || !(self.gamma_lambda >= 0.0) {
            return Err(Error::Config("penalty parameters must be positive".into()));
        }
        if self.order_volume < 2 * self.k {
            return Err(Error::Config(format!("quadrature order {} below 2k", self.order_volume)));
        }
        Ok(())
    }
}

/// Geometry, quadrature and the four spaces of one mesh level.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub params: FormParams,
    pub geom: CutGeometry,
    pub quad: CutQuadrature,
    pub vspace: VelocitySpace,
    pub pspace: PressureSpace,
    pub mspace: ContinuousSpace,
}

impl Discretization {
    pub fn new(ls: &dyn LevelSet, background: &MacroMesh, params: FormParams, mode: GeometryMode) -> Result<Self> {
        params.validate()?;
        let geom = CutGeometry::build(ls, background, params.k, mode)?;
        let quad = build_quadratures(&geom, params.order_volume)?;
        let vspace = VelocitySpace::new(&geom);
        let pspace = PressureSpace::new(&geom);
        let mspace = ContinuousSpace::multiplier(&geom, params.k_lambda);
        Ok(Self { params, geom, quad, vspace, pspace, mspace })
    }

    pub fn h(&self) -> f64 {
        self.geom.h()
    }
}

/// Assembled saddle point system with its block layout.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub n_u: usize,
    pub n_p: usize,
    pub n_lambda: usize,
}

/// Unknowns of the saddle point system.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub s: f64,
    pub residual: f64,
}

impl SaddleSystem {
    pub fn dim(&self) -> usize {
        self.n_u + self.n_p + self.n_lambda + 1
    }

    pub fn split(&self, x: &[f64], residual: f64) -> Solution {
        let (u, rest) = x.split_at(self.n_u);
        let (p, rest) = rest.split_at(self.n_p);
        let (l, rest) = rest.split_at(self.n_lambda);
        Solution { u: u.to_vec(), p: p.to_vec(), lambda: l.to_vec(), s: rest[0], residual }
    }

    pub fn factorize(&self) -> Result<Factorization> {
        Factorization::new(&self.matrix)
    }

    pub fn solve(&self) -> Result<Solution> {
        let lu = self.factorize()?;
        self.solve_with(&lu)
    }

    pub fn solve_with(&self, lu: &Factorization) -> Result<Solution> {
        let sol = solve_factored(&self.matrix, lu, &self.rhs)?;
        Ok(self.split(&sol.x, sol.residual))
    }
}

/// Blocks of the system before they are merged.
#[derive(Clone, Debug)]
pub struct SystemBlocks {
    pub a: TripletBuilder,
    pub gp: TripletBuilder,
    pub b: TripletBuilder,
    pub c: TripletBuilder,
    pub j: TripletBuilder,
    pub mean: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Assembles every block for the right-hand side `f`.
pub fn assemble_blocks(d: &Discretization, f: &dyn Fn(Point) -> [f64; 2]) -> Result<SystemBlocks> {
    let g = &d.geom;
    Ok(SystemBlocks {
        a: assemble_a(&d.params, g, &d.quad, &d.vspace)?,
        gp: assemble_ghost_penalty(&d.params, g, &d.vspace, &g.sets.gp_facets)?,
        b: assemble_b(g, &d.vspace, &d.pspace)?,
        c: assemble_c(g, &d.quad, &d.vspace, &d.mspace)?,
        j: assemble_j(&d.params, g, &d.quad, &d.mspace)?,
        mean: pressure_mean_vector(g, &d.quad, &d.pspace),
        rhs: assemble_rhs(g, &d.quad, &d.vspace, f)?,
    })
}

/// Merges the blocks into one exactly symmetric matrix.
pub fn build_saddle_system(blocks: &SystemBlocks) -> Result<SaddleSystem> {
    let (n_u, n_u2) = blocks.a.dims();
    let n_p = blocks.b.dims().0;
    let n_lambda = blocks.c.dims().0;
    let checks = [
        (n_u == n_u2, "A is not square"),
        (blocks.gp.dims() == (n_u, n_u), "ghost penalty size"),
        (blocks.b.dims().1 == n_u, "B columns"),
        (blocks.c.dims().1 == n_u, "C columns"),
        (blocks.j.dims() == (n_lambda, n_lambda), "J size"),
        (blocks.mean.len() == n_p, "mean vector length"),
        (blocks.rhs.len() == n_u, "rhs length"),
        (blocks.a.is_symmetric() && blocks.gp.is_symmetric() && blocks.j.is_symmetric(), "diagonal blocks symmetric"),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(Error::DimensionMismatch(what.into()));
        }
    }
    let n = n_u + n_p + n_lambda + 1;
    let mut m = TripletBuilder::symmetric(n);
    m.add_block(&blocks.a, 0, 0)?;
    m.add_block(&blocks.gp, 0, 0)?;
    m.add_block(&blocks.b, n_u, 0)?;
    m.add_block(&blocks.c, n_u + n_p, 0)?;
    m.add_block(&blocks.j, n_u + n_p, n_u + n_p)?;
    for (i, &v) in blocks.mean.iter().enumerate() {
        m.add(n_u + i, n - 1, v);
    }
    let mut rhs = vec![0.0; n];
    rhs[..n_u].copy_from_slice(&blocks.rhs);
    Ok(SaddleSystem { matrix: m.build(), rhs, n_u, n_p, n_lambda })
}

/// Assembles the full system of one discretization.
pub fn assemble_system(d: &Discretization, f: &dyn Fn(Point) -> [f64; 2]) -> Result<SaddleSystem> {
    build_saddle_system(&assemble_blocks(d, f)?)
}

/// `||div u_h||_{L2(Omega_h^T)}` and the largest per-element norm.
pub fn divergence_norms(d: &Discretization, u: &[f64]) -> Result<(f64, f64)> {
    let re = &d.geom.reference;
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    let mut basis = crate::spaces::VelocityBasis::default();
    for &e in &d.geom.sets.active {
        let el = d.vspace.element(&d.geom, e)?;
        let local = el.gather(u);
        let mut s = 0.0;
        for qp in &d.quad.bulk[e] {
            el.eval(re, qp.xref, &mut basis);
            let div: f64 = (0..el.n_dofs()).map(|a| local[a] * basis.div[a]).sum();
            s += qp.weight * div * div;
        }
        total += s;
        worst = worst.max(s.sqrt());
    }
    Ok((total.sqrt(), worst))
}
