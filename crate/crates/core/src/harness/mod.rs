//! Study drivers: convergence tables, the interface-shift conditioning sweep,
//! error norms, rates and file output.

mod config;
pub mod examples;
mod infsup;

pub use config::{GeometryArg, StudyConfig};
pub use examples::{example_by_id, Example, NoFlowExample, QuarticExample, QuarticLevelSet, StarLevelSet};
pub use infsup::{inf_sup_blocks, inf_sup_constant, InfSupBlocks};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::forms::{assemble_system, divergence_norms, Discretization, Solution};
use crate::geometry::{build_quadratures, LevelSet};
use crate::linalg::dot;
use crate::mesh::{build_background_mesh, refine_uniform, MacroMesh, Rect};
use crate::postprocess::{recover_pressure, RecoveredPressure};
use crate::solver::condition_estimate_with;
use crate::spaces::{combine, eval_scalar_basis, write_fields_vtk, ScalarBasis, VelocityBasis};

/// The background domain `(-1, 1)^2`.
pub const BACKGROUND: Rect = Rect { min: [-1.0, -1.0], max: [1.0, 1.0] };

/// Background mesh of refinement level `level` starting from size `h0`.
pub fn level_mesh(h0: f64, level: usize) -> MacroMesh {
    let mut m = build_background_mesh(BACKGROUND, h0);
    for _ in 0..level {
        m = refine_uniform(&m);
    }
    m
}

/// Error norms of one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    /// `||u - u_h||_{Omega_h}`
    pub l2u: f64,
    /// `||grad(u - u_h)||_{Omega_h}`
    pub h1u: f64,
    /// `||(p - mean p) - p*||_{Omega_h}`
    pub l2p_star: f64,
    /// `||grad(p - p*)||_{Omega_h}`
    pub h1p_star: f64,
    /// `||div u_h||_{Omega_h^T}`
    pub l2div: f64,
    /// Largest `|phi|` at interface quadrature points.
    pub geometry: f64,
}

/// Errors against an exact solution, on cut rules of order `2k + 4`.
pub fn compute_errors(
    d: &Discretization,
    sol: &Solution,
    pstar: &RecoveredPressure,
    ex: &dyn Example,
) -> Result<ErrorNorms> {
    let g = &d.geom;
    let re = &g.reference;
    let quad = build_quadratures(g, 2 * d.params.k + 4)?;
    let mut vb = VelocityBasis::default();
    let mut sb = ScalarBasis::default();
    // mean of the exact pressure over Omega_h
    let (mut pint, mut vol) = (0.0, 0.0);
    for qp in quad.volume.iter().flatten() {
        pint += qp.weight * ex.pressure(qp.x);
        vol += qp.weight;
    }
    let pmean = pint / vol;
    let mut n = ErrorNorms::default();
    for &e in &g.sets.active {
        if quad.volume[e].is_empty() {
            continue;
        }
        let el = d.vspace.element(g, e)?;
        let uc = el.gather(&sol.u);
        let pdofs: Vec<usize> =
            if pstar.space.supported[e] { pstar.space.element_dofs(e).collect() } else { Vec::new() };
        for qp in &quad.volume[e] {
            let ev = el.eval(re, qp.xref, &mut vb);
            let uh = combine(&vb, &uc[..el.n_dofs()]);
            let ue = ex.velocity(qp.x);
            let ge = ex.velocity_gradient(qp.x);
            n.l2u += qp.weight * ((ue[0] - uh.value[0]).powi(2) + (ue[1] - uh.value[1]).powi(2));
            n.h1u += qp.weight
                * (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (ge[i][j] - uh.grad[i][j]).powi(2)).sum::<f64>();
            eval_scalar_basis(&pstar.space.reference, qp.xref, &ev, &mut sb);
            let (mut ph, mut gph) = (0.0, [0.0; 2]);
            for (a, &dof) in pdofs.iter().enumerate() {
                let c = pstar.coeffs[dof];
                ph += c * sb.value[a];
                gph[0] += c * sb.grad[a][0];
                gph[1] += c * sb.grad[a][1];
            }
            let gpe = ex.pressure_gradient(qp.x);
            n.l2p_star += qp.weight * (ex.pressure(qp.x) - pmean - ph).powi(2);
            n.h1p_star += qp.weight * ((gpe[0] - gph[0]).powi(2) + (gpe[1] - gph[1]).powi(2));
        }
    }
    n.l2u = n.l2u.sqrt();
    n.h1u = n.h1u.sqrt();
    n.l2p_star = n.l2p_star.sqrt();
    n.h1p_star = n.h1p_star.sqrt();
    n.l2div = divergence_norms(d, &sol.u)?.0;
    n.geometry = geometry_error(&quad, ex.level_set());
    Ok(n)
}

/// `max |phi(x_q)|` over the interface points of a rule.
pub fn geometry_error(quad: &crate::geometry::CutQuadrature, ls: &dyn LevelSet) -> f64 {
    quad.interface.iter().flatten().map(|p| ls.value(p.x).abs()).fold(0.0, f64::max)
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub lvl: usize,
    pub h: f64,
    pub l2u: f64,
    pub h1u: f64,
    pub l2p_star: f64,
    pub l2div: f64,
    pub condest: Option<f64>,
    pub h1p_star: f64,
    pub geometry: f64,
    pub n_dofs: usize,
    /// Seconds; not written to data files.
    pub wall_time: f64,
}

/// Everything produced by one level, for callers that need more than the row.
pub struct LevelOutput {
    pub row: ResultRow,
    pub disc: Discretization,
    pub solution: Solution,
    pub pstar: RecoveredPressure,
}

fn at_level(level: usize) -> impl Fn(Error) -> Error {
    move |e| Error::AtLevel { level, source: Box::new(e) }
}

/// Build, assemble, solve, recover the pressure and measure errors on one level.
pub fn solve_level(cfg: &StudyConfig, level: usize) -> Result<LevelOutput> {
    let start = Instant::now();
    let ex = cfg.example()?;
    let run = || -> Result<LevelOutput> {
        let mesh = level_mesh(cfg.h0, level);
        let d = Discretization::new(ex.level_set(), &mesh, cfg.form_params(), cfg.geometry.mode())?;
        let f = |x: [f64; 2]| ex.force(x);
        let sys = assemble_system(&d, &f)?;
        let lu = sys.factorize()?;
        let solution = sys.solve_with(&lu)?;
        let condest =
            if cfg.condest { Some(condition_estimate_with(&sys.matrix, &lu, cfg.cond_tol, cfg.seed)?) } else { None };
        let pstar = recover_pressure(&d, &solution.u, &f)?;
        let e = compute_errors(&d, &solution, &pstar, ex.as_ref())?;
        let row = ResultRow {
            lvl: level,
            h: d.h(),
            l2u: e.l2u,
            h1u: e.h1u,
            l2p_star: e.l2p_star,
            l2div: e.l2div,
            condest,
            h1p_star: e.h1p_star,
            geometry: e.geometry,
            n_dofs: sys.dim(),
            wall_time: 0.0,
        };
        Ok(LevelOutput { row, disc: d, solution, pstar })
    };
    let mut out = run().map_err(at_level(level))?;
    out.row.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Runs every configured level, writing data, manifest and (optionally) VTK
/// files when an output directory is set.
pub fn run_convergence(cfg: &StudyConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for level in cfg.min_level..=cfg.max_level {
        let out = solve_level(cfg, level)?;
        if let (Some(dir), true) = (&cfg.out, cfg.vtk) {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}_lvl{level}.vtk", cfg.name()));
            let d = &out.disc;
            write_fields_vtk(
                BufWriter::new(File::create(path)?),
                &d.geom,
                &d.vspace,
                &out.solution.u,
                &d.pspace,
                &out.solution.p,
                Some((&out.pstar.space, &out.pstar.coeffs)),
                2 * d.params.k,
            )?;
        }
        rows.push(out.row);
    }
    if let Some(dir) = &cfg.out {
        write_outputs(cfg, dir, &rows)?;
    }
    Ok(rows)
}

fn write_outputs(cfg: &StudyConfig, dir: &Path, rows: &[ResultRow]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let data = dir.join(format!("{}.data", cfg.name()));
    write_data(BufWriter::new(File::create(&data)?), rows)?;
    write_extra(BufWriter::new(File::create(dir.join(format!("{}_extra.data", cfg.name())))?), rows)?;
    write_manifest(BufWriter::new(File::create(dir.join(format!("{}.manifest", cfg.name())))?), cfg)?;
    Ok(data)
}

/// Convergence table `lvl h l2u h1u l2p* l2d [condest]`.
pub fn write_data<W: Write>(mut w: W, rows: &[ResultRow]) -> Result<()> {
    let cond = rows.iter().any(|r| r.condest.is_some());
    writeln!(w, "lvl h l2u h1u l2p* l2d{}", if cond { " condest" } else { "" })?;
    for r in rows {
        write!(w, "{} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}", r.lvl, r.h, r.l2u, r.h1u, r.l2p_star, r.l2div)?;
        if cond {
            write!(w, " {:.10e}", r.condest.unwrap_or(f64::NAN))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Supplementary table `lvl h1p* geom ndofs`.
pub fn write_extra<W: Write>(mut w: W, rows: &[ResultRow]) -> Result<()> {
    writeln!(w, "lvl h1p* geom ndofs")?;
    for r in rows {
        writeln!(w, "{} {:.10e} {:.10e} {}", r.lvl, r.h1p_star, r.geometry, r.n_dofs)?;
    }
    Ok(())
}

/// Echo of the resolved configuration.
pub fn write_manifest<W: Write>(mut w: W, cfg: &StudyConfig) -> Result<()> {
    writeln!(w, "# cutsv {}", env!("CARGO_PKG_VERSION"))?;
    write!(w, "{}", cfg.to_key_values())?;
    Ok(())
}

/// Rates between consecutive rows, `log2(e_{l-1} / e_l)`; `None` where an
/// error is zero or not finite.
pub fn compute_eoc(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 && w[1] > 0.0 && w[0].is_finite() && w[1].is_finite() {
                Some((w[0] / w[1]).log2())
            } else {
                None
            }
        })
        .collect()
}

/// Mean rate over the whole sequence, `log2(e_first / e_last) / (n - 1)`.
pub fn mean_eoc(errors: &[f64]) -> Option<f64> {
    let (a, b) = (*errors.first()?, *errors.last()?);
    if errors.len() < 2 || !(a > 0.0 && b > 0.0) {
        return None;
    }
    Some((a / b).log2() / (errors.len() - 1) as f64)
}

/// One shift of the conditioning sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub shift: f64,
    pub kappa: f64,
}

/// Shift of step `i` of the sweep.
pub fn sweep_shift(i: usize, steps: usize) -> f64 {
    -0.2 + 0.4 * i as f64 / steps as f64
}

/// Condition estimate of the full system for one shifted quartic domain.
pub fn sweep_condition(cfg: &StudyConfig, mesh: &MacroMesh, shift: f64) -> Result<f64> {
    let ls = QuarticLevelSet { shift };
    let d = Discretization::new(&ls, mesh, cfg.form_params(), cfg.geometry.mode())?;
    let ex = QuarticExample::new();
    let sys = assemble_system(&d, &|x| ex.force(x))?;
    let lu = sys.factorize()?;
    condition_estimate_with(&sys.matrix, &lu, cfg.cond_tol, cfg.seed)
}

/// `(x_i, kappa_i)` for `x_i = -0.2 + 0.4 i / steps`, `i = 0..=steps`.
pub fn run_interface_sweep(cfg: &StudyConfig) -> Result<Vec<SweepRow>> {
    let mesh = build_background_mesh(BACKGROUND, cfg.sweep_h);
    let steps = cfg.sweep_steps;
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(steps + 1);
    let mut rows: Vec<Option<Result<SweepRow>>> = (0..=steps).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunks: Vec<_> = rows.chunks_mut((steps + 1).div_ceil(workers)).enumerate().collect();
        let chunk_len = (steps + 1).div_ceil(workers);
        for (c, chunk) in chunks {
            let mesh = &mesh;
            s.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    let i = c * chunk_len + j;
                    let shift = sweep_shift(i, steps);
                    *slot = Some(
                        sweep_condition(cfg, mesh, shift)
                            .map(|kappa| SweepRow { index: i, shift, kappa })
                            .map_err(at_level(i)),
                    );
                }
            });
        }
    });
    let rows: Vec<SweepRow> = rows.into_iter().map(|r| r.expect("every shift visited")).collect::<Result<_>>()?;
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("sweep.data"))?);
        writeln!(w, "i shift condest")?;
        for r in &rows {
            writeln!(w, "{} {:.10e} {:.10e}", r.index, r.shift, r.kappa)?;
        }
        write_manifest(BufWriter::new(File::create(dir.join("sweep.manifest"))?), cfg)?;
    }
    Ok(rows)
}

/// Geometry diagnostics for one level: Alfeld mesh, interface polyline and
/// quadrature tables.
pub fn dump_geometry(cfg: &StudyConfig, level: usize, dir: &Path) -> Result<()> {
    let ex = cfg.example()?;
    let mesh = level_mesh(cfg.h0, level);
    let d = Discretization::new(ex.level_set(), &mesh, cfg.form_params(), cfg.geometry.mode())
        .map_err(at_level(level))?;
    std::fs::create_dir_all(dir)?;
    let classes: Vec<i32> = d.geom.sets.class.iter().map(|c| *c as i32).collect();
    d.geom.mesh.write_vtk(BufWriter::new(File::create(dir.join(format!("mesh_lvl{level}.vtk")))?), Some(("class", &classes)))?;
    d.geom.write_interface_vtk(BufWriter::new(File::create(dir.join(format!("interface_lvl{level}.vtk")))?), 8)?;
    d.quad.write_text(BufWriter::new(File::create(dir.join(format!("quadrature_lvl{level}.txt")))?))?;
    Ok(())
}

/// `int_{Gamma_h} u_h . n_h`
pub fn interface_flux(d: &Discretization, u: &[f64]) -> Result<f64> {
    let mut vb = VelocityBasis::default();
    let mut total = 0.0;
    for &e in &d.geom.sets.alfeld_cut {
        let el = d.vspace.element(&d.geom, e)?;
        let c = el.gather(u);
        for sp in &d.quad.interface[e] {
            el.eval(&d.geom.reference, sp.xref, &mut vb);
            total += sp.weight * dot(combine(&vb, &c[..el.n_dofs()]).value, sp.normal);
        }
    }
    Ok(total)
}
