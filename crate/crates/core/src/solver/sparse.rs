//! Compressed sparse row storage and a deterministic triplet builder.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    /// Built from a symmetric builder (exactly symmetric storage).
    pub symmetric: bool,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n_rows) {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// `x^T M y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.mul(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    /// Largest `|M_ij - M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                d[i][j] = v;
            }
        }
        d
    }

    /// Matrix Market coordinate format (`general`, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Dense vector in Matrix Market array format.
pub fn write_vector_market<W: Write>(mut w: W, v: &[f64]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:.17e}")?;
    }
    Ok(())
}

/// Accumulates `(row, col, value)` triplets. Duplicates are summed in
/// insertion order after a stable sort, so the result does not depend on
/// anything but the sequence of `add` calls.
///
/// In symmetric mode every off-diagonal entry is stored once and mirrored
/// when the matrix is built, which makes the result exactly symmetric.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    symmetric: bool,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, symmetric: false, entries: Vec::new() }
    }

    pub fn symmetric(n: usize) -> Self {
        Self { n_rows: n, n_cols: n, symmetric: true, entries: Vec::new() }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Adds `v` at `(r, c)`. In symmetric mode this also stands for the
    /// mirrored entry `(c, r)`, so callers add each off-diagonal pair once.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        if self.symmetric && r > c {
            self.entries.push((c, r, v));
        } else {
            self.entries.push((r, c, v));
        }
    }

    /// Appends every entry of another builder, shifted by `(dr, dc)`. A
    /// non-symmetric block added to a symmetric builder also fills its
    /// transposed position.
    pub fn add_block(&mut self, other: &TripletBuilder, dr: usize, dc: usize) -> Result<()> {
        if dr + other.n_rows > self.n_rows || dc + other.n_cols > self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "block {}x{} at ({dr},{dc}) exceeds {}x{}",
                other.n_rows, other.n_cols, self.n_rows, self.n_cols
            )));
        }
        for &(r, c, v) in &other.entries {
            self.add(r + dr, c + dc, v);
            if other.symmetric && r != c && !(self.symmetric && dr == dc) {
                self.add(c + dr, r + dc, v);
            }
        }
        Ok(())
    }

    pub fn build(&self) -> SparseMatrix {
        let mut e = self.entries.clone();
        if self.symmetric {
            let mirrored: Vec<_> = e.iter().filter(|t| t.0 != t.1).map(|&(r, c, v)| (c, r, v)).collect();
            e.extend(mirrored);
        }
        e.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(e.len());
        let mut values: Vec<f64> = Vec::with_capacity(e.len());
        let mut last = (usize::MAX, usize::MAX);
        for (r, c, v) in e {
            if (r, c) == last {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = (r, c);
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values, symmetric: self.symmetric }
    }
}
