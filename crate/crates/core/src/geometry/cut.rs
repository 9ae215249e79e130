//! Marching-triangle subdivision of a triangle by a linear level set.

use crate::mesh::Point;

/// Inside part (`values < 0`) and interface segment of a linearly cut triangle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutPieces {
    pub inside: Vec<[Point; 3]>,
    pub segment: Option<[Point; 2]>,
}

fn lerp_zero(a: Point, b: Point, va: f64, vb: f64) -> Point {
    let t = va / (va - vb);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn d2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Splits `tri` by the zero set of the linear interpolant of `values`.
///
/// Values must be non-zero (snapped). The inside region is returned as one
/// triangle (one negative vertex) or two (two negative vertices, the
/// quadrilateral split along its shorter diagonal). Sub-triangles keep the
/// orientation of `tri`.
pub fn cut_subdivide(tri: [Point; 3], values: [f64; 3]) -> CutPieces {
    let neg: Vec<usize> = (0..3).filter(|&i| values[i] < 0.0).collect();
    match neg.len() {
        3 => CutPieces { inside: vec![tri], segment: None },
        0 => CutPieces::default(),
        1 => {
            let i = neg[0];
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let pij = lerp_zero(tri[i], tri[j], values[i], values[j]);
            let pik = lerp_zero(tri[i], tri[k], values[i], values[k]);
            CutPieces { inside: vec![[tri[i], pij, pik]], segment: Some([pij, pik]) }
        }
        _ => {
            // the positive vertex k, negatives i -> j in cyclic order
            let k = (0..3).find(|&v| values[v] >= 0.0).unwrap();
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let pjk = lerp_zero(tri[j], tri[k], values[j], values[k]);
            let pik = lerp_zero(tri[i], tri[k], values[i], values[k]);
            let inside = if d2(tri[i], pjk) <= d2(tri[j], pik) {
                vec![[tri[i], tri[j], pjk], [tri[i], pjk, pik]]
            } else {
                vec![[tri[i], tri[j], pik], [tri[j], pjk, pik]]
            };
            CutPieces { inside, segment: Some([pjk, pik]) }
        }
    }
}

/// Signed area of a triangle.
pub fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]))
}
