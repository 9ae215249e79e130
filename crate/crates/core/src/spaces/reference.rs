//! Lagrange reference elements on the unit triangle.
//!
//! Node layout for degree `k`: the three vertices, then `k - 1` nodes on each
//! edge `(0,1)`, `(1,2)`, `(2,0)` at Gauss-Lobatto abscissae (ordered from the
//! first to the second edge vertex), then the interior nodes on the
//! equispaced barycentric lattice.

use crate::quadrature::gauss_lobatto_points;

/// Reference vertices of the unit triangle.
pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Local edges as pairs of local vertex indices.
pub const REF_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Number of Lagrange nodes of degree `k` on a triangle.
pub fn node_count(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Number of interior nodes of degree `k`.
pub fn interior_count(k: usize) -> usize {
    if k < 3 {
        0
    } else {
        (k - 1) * (k - 2) / 2
    }
}

/// Reference node coordinates in the layout described in the module docs.
pub fn lagrange_nodes(k: usize) -> Vec<[f64; 2]> {
    let mut nodes = REF_VERTICES.to_vec();
    if k == 0 {
        return vec![[1.0 / 3.0, 1.0 / 3.0]];
    }
    if k >= 2 {
        let gl = gauss_lobatto_points(k + 1);
        for [a, b] in REF_EDGES {
            let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
            for &t in &gl[1..k] {
                nodes.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
            }
        }
        // interior: barycentric (i, j, l) / k with all entries positive
        for j in 1..k {
            for i in 1..k {
                let l = k as i64 - i as i64 - j as i64;
                if l >= 1 {
                    nodes.push([i as f64 / k as f64, j as f64 / k as f64]);
                }
            }
        }
    }
    nodes
}

/// Nodal Lagrange basis of degree `k`, expanded in monomials `x^i y^j`.
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<[f64; 2]>,
    exponents: Vec<(usize, usize)>,
    /// `coeffs[m * n + i]` is the coefficient of monomial `m` in basis function `i`.
    coeffs: Vec<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Self {
        let nodes = lagrange_nodes(degree);
        let mut exponents = Vec::new();
        for total in 0..=degree {
            for j in 0..=total {
                exponents.push((total - j, j));
            }
        }
        let n = nodes.len();
        assert_eq!(exponents.len(), n);
        // Vandermonde V[r][m] = mono_m(node_r); basis coefficients solve V C = I
        let mut v = vec![0.0; n * n];
        for (r, p) in nodes.iter().enumerate() {
            for (m, &(i, j)) in exponents.iter().enumerate() {
                v[r * n + m] = p[0].powi(i as i32) * p[1].powi(j as i32);
            }
        }
        let coeffs = invert_dense(&v, n);
        Self { degree, nodes, exponents, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn powers(&self, x: f64) -> [f64; 8] {
        let mut p = [1.0; 8];
        for i in 1..=self.degree.min(7) {
            p[i] = p[i - 1] * x;
        }
        p
    }

    /// Basis values at `x`.
    pub fn values(&self, x: [f64; 2], out: &mut [f64]) {
        let n = self.len();
        let (px, py) = (self.powers(x[0]), self.powers(x[1]));
        out[..n].fill(0.0);
        for (m, &(i, j)) in self.exponents.iter().enumerate() {
            let mono = px[i] * py[j];
            let row = &self.coeffs[m * n..(m + 1) * n];
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * mono;
            }
        }
    }

    /// Basis values and reference gradients at `x`.
    pub fn values_grads(&self, x: [f64; 2], vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let n = self.len();
        let (px, py) = (self.powers(x[0]), self.powers(x[1]));
        vals[..n].fill(0.0);
        grads[..n].fill([0.0; 2]);
        for (m, &(i, j)) in self.exponents.iter().enumerate() {
            let mono = px[i] * py[j];
            let dx = if i > 0 { i as f64 * px[i - 1] * py[j] } else { 0.0 };
            let dy = if j > 0 { j as f64 * px[i] * py[j - 1] } else { 0.0 };
            let row = &self.coeffs[m * n..(m + 1) * n];
            for b in 0..n {
                let c = row[b];
                vals[b] += c * mono;
                grads[b][0] += c * dx;
                grads[b][1] += c * dy;
            }
        }
    }

    /// Reference Hessians `[xx, xy, yy]` at `x`.
    pub fn hessians(&self, x: [f64; 2], hess: &mut [[f64; 3]]) {
        let n = self.len();
        let (px, py) = (self.powers(x[0]), self.powers(x[1]));
        hess[..n].fill([0.0; 3]);
        for (m, &(i, j)) in self.exponents.iter().enumerate() {
            if i + j < 2 {
                continue;
            }
            let xx = if i > 1 { (i * (i - 1)) as f64 * px[i - 2] * py[j] } else { 0.0 };
            let xy = if i > 0 && j > 0 { (i * j) as f64 * px[i - 1] * py[j - 1] } else { 0.0 };
            let yy = if j > 1 { (j * (j - 1)) as f64 * px[i] * py[j - 2] } else { 0.0 };
            let row = &self.coeffs[m * n..(m + 1) * n];
            for b in 0..n {
                let c = row[b];
                hess[b][0] += c * xx;
                hess[b][1] += c * xy;
                hess[b][2] += c * yy;
            }
        }
    }
}

/// Inverse of a small dense row-major matrix by Gauss-Jordan elimination with partial pivoting.
pub(crate) fn invert_dense(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap();
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
                inv.swap(col * n + c, piv * n + c);
            }
        }
        let d = m[col * n + col];
        assert!(d != 0.0, "singular matrix in invert_dense");
        for c in 0..n {
            m[col * n + c] /= d;
            inv[col * n + c] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for c in 0..n {
                        m[r * n + c] -= f * m[col * n + c];
                        inv[r * n + c] -= f * inv[col * n + c];
                    }
                }
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn node_counts() {
        for k in 1..=4 {
            assert_eq!(lagrange_nodes(k).len(), node_count(k));
        }
        assert_eq!(interior_count(4), 3);
    }

    #[test]
    fn nodal_and_partition_of_unity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in 1..=4 {
            let el = ReferenceElement::new(k);
            let n = el.len();
            let mut v = vec![0.0; n];
            for (j, p) in el.nodes().iter().enumerate() {
                el.values(*p, &mut v);
                for (i, vi) in v.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((vi - e).abs() < 1e-12, "k={k}");
                }
            }
            let mut g = vec![[0.0; 2]; n];
            for _ in 0..50 {
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                let x = if a + b > 1.0 { [1.0 - a, 1.0 - b] } else { [a, b] };
                el.values_grads(x, &mut v, &mut g);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
                let gs = g.iter().fold([0.0; 2], |s, d| [s[0] + d[0], s[1] + d[1]]);
                assert!(gs[0].abs() < 1e-11 && gs[1].abs() < 1e-11);
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let el = ReferenceElement::new(3);
        let n = el.len();
        let x = [0.21, 0.33];
        let mut h = vec![[0.0; 3]; n];
        el.hessians(x, &mut h);
        let eps = 1e-5;
        let (mut v, mut gp, mut gm) = (vec![0.0; n], vec![[0.0; 2]; n], vec![[0.0; 2]; n]);
        el.values_grads([x[0] + eps, x[1]], &mut v, &mut gp);
        el.values_grads([x[0] - eps, x[1]], &mut v, &mut gm);
        for b in 0..n {
            let fd_xx = (gp[b][0] - gm[b][0]) / (2.0 * eps);
            let fd_xy = (gp[b][1] - gm[b][1]) / (2.0 * eps);
            assert!((fd_xx - h[b][0]).abs() < 1e-6 * (1.0 + h[b][0].abs()));
            assert!((fd_xy - h[b][1]).abs() < 1e-6 * (1.0 + h[b][1].abs()));
        }
    }
}
