//! Sparse direct solves and spectral condition estimates.
//!
//! Factorizations are delegated to `faer` (`L B L^T` for symmetric matrices,
//! LU otherwise), run sequentially so that results are reproducible
//! bit for bit.

mod sparse;

pub use sparse::{write_vector_market, SparseMatrix, TripletBuilder};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative residual accepted by [`solve_direct`].
pub const RESIDUAL_TOL: f64 = 1e-9;
const REFINEMENT_STEPS: usize = 10;
/// Refinement stops once the residual is this small.
const REFINEMENT_TARGET: f64 = 1e-14;
/// Shift of the non-positive diagonal entries, relative to the largest one.
const REGULARIZATION: f64 = 1e-13;
const MAX_POWER_ITERS: usize = 10_000;
/// Seed of the start vectors of the power iterations.
pub const CONDITION_SEED: u64 = 0x5EED;

/// Factorization of a square sparse matrix.
///
/// Symmetric matrices use a supernodal `L B L^T` factorization with AMD
/// ordering and Bunch-Kaufman pivoting inside supernodes. Pivoting cannot
/// leave a supernode, so exactly zero diagonal blocks (saddle point systems)
/// are shifted by a tiny negative multiple of the largest diagonal entry; the
/// shift is removed again by iterative refinement against the unshifted
/// matrix. If refinement does not reach [`RESIDUAL_TOL`] on a probe right-hand
/// side, or the matrix is not symmetric, a column-pivoted LU is used instead.
pub struct Factorization {
    n: usize,
    matrix: SparseMatrix,
    inner: Inner,
}

enum Inner {
    Lblt(Lblt),
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

struct Lblt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    perm_fwd: Vec<usize>,
    perm_inv: Vec<usize>,
}

impl Lblt {
    fn new(m: &SparseMatrix) -> Result<Self> {
        let diag: Vec<f64> = (0..m.n_rows).map(|i| m.get(i, i)).collect();
        let scale = diag.iter().fold(0.0f64, |s, d| s.max(d.abs())).max(f64::MIN_POSITIVE);
        let a = to_faer_shifted(m, &diag, -REGULARIZATION * scale)?;
        let symbolic = factorize_symbolic_cholesky(
            a.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams {
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            },
        )
        .map_err(|e| Error::DimensionMismatch(format!("{e:?}")))?;
        let n = m.n_rows;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n];
        let mut perm_fwd = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        let mut mem =
            MemBuffer::new(symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default()));
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut perm_fwd,
            &mut perm_inv,
            a.as_ref(),
            Side::Lower,
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        );
        Ok(Self { symbolic, values, subdiag, perm_fwd, perm_inv })
    }

    fn solve_in_place(&self, x: &mut Mat<f64>) {
        let perm = PermRef::new_checked(&self.perm_fwd, &self.perm_inv, self.perm_fwd.len());
        let f = IntranodeLbltRef::new(&self.symbolic, &self.values, &self.subdiag, perm);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(x.ncols(), Par::Seq));
        f.solve_in_place_with_conj(Conj::No, x.as_mut(), Par::Seq, MemStack::new(&mut mem));
    }
}

impl Factorization {
    pub fn new(m: &SparseMatrix) -> Result<Self> {
        if m.n_rows != m.n_cols {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", m.n_rows, m.n_cols)));
        }
        faer::set_global_parallelism(Par::Seq);
        if m.symmetric || m.asymmetry() == 0.0 {
            let f = Self { n: m.n_rows, matrix: m.clone(), inner: Inner::Lblt(Lblt::new(m)?) };
            let probe: Vec<f64> = (0..m.n_rows).map(|i| 1.0 + (i % 7) as f64).collect();
            if matches!(f.solve_with_residual(&probe), Ok((_, r)) if r <= RESIDUAL_TOL) {
                return Ok(f);
            }
        }
        let a = to_faer(m)?;
        let lu = a.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::SingularSystem { pivot: index },
            other => Error::DimensionMismatch(format!("{other:?}")),
        })?;
        Ok(Self { n: m.n_rows, matrix: m.clone(), inner: Inner::Lu(lu) })
    }

    /// Whether the symmetric `L B L^T` path is in use.
    pub fn is_symmetric(&self) -> bool {
        matches!(self.inner, Inner::Lblt(_))
    }

    fn apply_inverse(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        match &self.inner {
            Inner::Lblt(f) => f.solve_in_place(&mut x),
            Inner::Lu(lu) => {
                use faer::prelude::Solve;
                x = lu.solve(&x);
            }
        }
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if let Some(p) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularSystem { pivot: p });
        }
        Ok(out)
    }

    /// Solves with iterative refinement, returning the relative residual.
    pub fn solve_with_residual(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!("rhs length {} vs {} rows", b.len(), self.n)));
        }
        let mut x = self.apply_inverse(b)?;
        let (mut r, mut rel) = relative_residual(&self.matrix, &x, b);
        for _ in 0..REFINEMENT_STEPS {
            if rel <= REFINEMENT_TARGET {
                break;
            }
            let dx = self.apply_inverse(&r)?;
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let (r2, rel2) = relative_residual(&self.matrix, &trial, b);
            if !(rel2 < rel) {
                break;
            }
            (x, r, rel) = (trial, r2, rel2);
        }
        Ok((x, rel))
    }

    /// Solves with iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_with_residual(b)?.0)
    }
}

/// Lower triangle in faer's column format, with `shift` added to every
/// non-positive diagonal entry.
fn to_faer_shifted(m: &SparseMatrix, diag: &[f64], shift: f64) -> Result<SparseColMat<usize, f64>> {
    let mut trip = Vec::with_capacity(m.nnz());
    for i in 0..m.n_rows {
        if diag[i] <= 0.0 {
            trip.push(Triplet::new(i, i, shift));
        }
        for (j, v) in m.row(i) {
            if !v.is_finite() {
                return Err(Error::DimensionMismatch(format!("non-finite entry at ({i},{j})")));
            }
            if j <= i {
                trip.push(Triplet::new(i, j, v));
            }
        }
    }
    SparseColMat::<usize, f64>::try_new_from_triplets(m.n_rows, m.n_cols, &trip)
        .map_err(|e| Error::DimensionMismatch(format!("{e:?}")))
}

/// Copies into faer's column format.
fn to_faer(m: &SparseMatrix) -> Result<SparseColMat<usize, f64>> {
    let mut trip = Vec::with_capacity(m.nnz());
    for i in 0..m.n_rows {
        for (j, v) in m.row(i) {
            if !v.is_finite() {
                return Err(Error::DimensionMismatch(format!("non-finite entry at ({i},{j})")));
            }
            trip.push(Triplet::new(i, j, v));
        }
    }
    SparseColMat::<usize, f64>::try_new_from_triplets(m.n_rows, m.n_cols, &trip)
        .map_err(|e| Error::DimensionMismatch(format!("{e:?}")))
}

/// Solution of a linear system with its relative residual.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(m: &SparseMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let mx = m.mul(x);
    let r: Vec<f64> = b.iter().zip(&mx).map(|(b, a)| b - a).collect();
    let nb = norm(b);
    let rel = if nb > 0.0 { norm(&r) / nb } else { norm(&r) };
    (r, rel)
}

/// Solves with an existing factorization of `m`; fails if the refined
/// residual exceeds [`RESIDUAL_TOL`].
pub fn solve_factored(m: &SparseMatrix, lu: &Factorization, b: &[f64]) -> Result<LinearSolution> {
    if b.len() != m.n_rows || lu.n != m.n_rows {
        return Err(Error::DimensionMismatch(format!("rhs length {} vs {} rows", b.len(), m.n_rows)));
    }
    let (x, rel) = lu.solve_with_residual(b)?;
    if !(rel <= RESIDUAL_TOL) {
        return Err(Error::ResidualTooLarge { residual: rel });
    }
    Ok(LinearSolution { x, residual: rel })
}

/// Factorizes and solves `M x = b`.
pub fn solve_direct(m: &SparseMatrix, b: &[f64]) -> Result<LinearSolution> {
    let lu = Factorization::new(m)?;
    solve_factored(m, &lu, b)
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    x
}

/// Iterates `x <- op(x) / |op(x)|` until `|op(x)|` changes by at most `tol`
/// relatively. `|op(x)|` is the square root of the Rayleigh quotient of
/// `op^2`, which converges to the extremal eigenvalue magnitude also for
/// indefinite matrices with eigenvalues of both signs.
fn power_iteration(
    mut op: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut x: Vec<f64>,
    tol: f64,
    what: &'static str,
) -> Result<f64> {
    let mut est = 0.0;
    for it in 0..MAX_POWER_ITERS {
        let y = op(&x)?;
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        let change = (ny - est).abs() / ny;
        est = ny;
        x = y.into_iter().map(|v| v / ny).collect();
        if it > 0 && change <= tol {
            return Ok(est);
        }
    }
    Err(Error::NoConvergence { what, iterations: MAX_POWER_ITERS, last: est })
}

/// Largest and smallest eigenvalue magnitudes of a symmetric matrix.
pub fn extremal_magnitudes(m: &SparseMatrix, lu: &Factorization, tol: f64, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = random_unit(m.n_rows, &mut rng);
    let max = power_iteration(|x| Ok(m.mul(x)), x0.clone(), tol, "power iteration")?;
    let inv = power_iteration(|x| lu.solve(x), x0, tol, "inverse power iteration")?;
    Ok((max, 1.0 / inv))
}

/// `kappa = |lambda|_max / |lambda|_min` by power and inverse power iteration.
pub fn condition_estimate(m: &SparseMatrix, tol: f64) -> Result<f64> {
    let lu = Factorization::new(m)?;
    condition_estimate_with(m, &lu, tol, CONDITION_SEED)
}

/// [`condition_estimate`] with an existing factorization and start-vector seed.
pub fn condition_estimate_with(m: &SparseMatrix, lu: &Factorization, tol: f64, seed: u64) -> Result<f64> {
    let (max, min) = extremal_magnitudes(m, lu, tol, seed)?;
    Ok(max / min)
}
