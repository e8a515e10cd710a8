//! Small dense linear-algebra helpers: cyclic Jacobi eigendecomposition for
//! symmetric matrices and fixed-order moment accumulation.

use nalgebra::{DMatrix, DVector};

use crate::Point;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted in decreasing order and `vectors` holds the
/// matching orthonormal eigenvectors as columns. Each eigenvector is oriented
/// so that its first component with magnitude above `1e-12` is positive.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi rotations on a symmetric matrix. Only the upper triangle
/// drives the rotations; the input is assumed symmetric.
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> SymmetricEigen {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "symmetric_eigen needs a square matrix");
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    let frob = a.norm();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-3 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        if let Some(first) = col.iter().find(|c| c.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    SymmetricEigen { values, vectors }
}

/// Largest absolute entry of `a - a^T`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Averages each off-diagonal pair so the result is exactly symmetric.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    out
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Arithmetic mean of a non-empty set of points, summed in index order.
pub fn mean<'a, I>(points: I, dim: usize) -> DVector<f64>
where
    I: IntoIterator<Item = &'a Point>,
{
    let mut acc = DVector::zeros(dim);
    let mut count = 0usize;
    for p in points {
        acc += p;
        count += 1;
    }
    if count > 0 {
        acc /= count as f64;
    }
    acc
}

/// `(1/N) Σ (x - center)(x - center)^T`, summed in index order.
pub fn scatter_about<'a, I>(points: I, center: &DVector<f64>) -> DMatrix<f64>
where
    I: IntoIterator<Item = &'a Point>,
{
    let dim = center.len();
    let mut acc = DMatrix::zeros(dim, dim);
    let mut count = 0usize;
    for p in points {
        let d = p - center;
        acc.ger(1.0, &d, &d, 1.0);
        count += 1;
    }
    if count > 0 {
        acc /= count as f64;
    }
    symmetrize(&acc)
}

/// Largest pairwise Euclidean distance.
pub fn diameter(points: &[Point]) -> f64 {
    let mut best = 0.0_f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}
