//! Small dense inverses for the confusion-matrix solve.

use ndarray::Array2;

use crate::scalar::Scalar;

/// Pivots with magnitude below this are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-12;

/// Singular values at or below this are dropped by the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;

/// LU factorization with partial pivoting, stored in place.
#[derive(Debug, Clone)]
pub struct Lu<S> {
    factors: Array2<S>,
    perm: Vec<usize>,
    min_pivot: S,
}

impl<S: Scalar> Lu<S> {
    pub fn factor(a: &Array2<S>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = S::infinity();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[[i, k]].abs().partial_cmp(&lu[[j, k]].abs()).unwrap())
                .unwrap();
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let pivot = lu[[k, k]];
            min_pivot = min_pivot.min(pivot.abs());
            if pivot == S::zero() {
                continue;
            }
            for i in k + 1..n {
                let factor = lu[[i, k]] / pivot;
                lu[[i, k]] = factor;
                for j in k + 1..n {
                    let u = lu[[k, j]];
                    lu[[i, j]] = lu[[i, j]] - factor * u;
                }
            }
        }
        Lu { factors: lu, perm, min_pivot }
    }

    /// Smallest pivot magnitude encountered (`+inf` for an empty matrix).
    pub fn min_pivot(&self) -> S {
        self.min_pivot
    }

    pub fn is_singular(&self) -> bool {
        self.min_pivot < S::of(SINGULAR_PIVOT)
    }

    /// Inverse from the factors. Only meaningful when not singular.
    pub fn inverse(&self) -> Array2<S> {
        let n = self.factors.nrows();
        let mut inv = Array2::zeros((n, n));
        for col in 0..n {
            // forward substitution on the permuted unit vector
            let mut y = vec![S::zero(); n];
            for i in 0..n {
                let mut acc = if self.perm[i] == col { S::one() } else { S::zero() };
                for (j, yj) in y.iter().enumerate().take(i) {
                    acc = acc - self.factors[[i, j]] * *yj;
                }
                y[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = y[i];
                for j in i + 1..n {
                    acc = acc - self.factors[[i, j]] * inv[[j, col]];
                }
                inv[[i, col]] = acc / self.factors[[i, i]];
            }
        }
        inv
    }
}

/// Moore-Penrose pseudo-inverse through a one-sided Jacobi SVD, computed in `f64`.
pub fn pseudo_inverse<S: Scalar>(a: &Array2<S>) -> Array2<S> {
    let (rows, cols) = a.dim();
    if rows == 0 || cols == 0 {
        return Array2::zeros((cols, rows));
    }
    let mut u = a.mapv(|x| x.widen());
    let mut v = Array2::<f64>::eye(cols);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    alpha += u[[i, p]] * u[[i, p]];
                    beta += u[[i, q]] * u[[i, q]];
                    gamma += u[[i, p]] * u[[i, q]];
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pinv = Array2::<f64>::zeros((cols, rows));
    for j in 0..cols {
        let sigma = u.column(j).dot(&u.column(j)).sqrt();
        if sigma <= PINV_CUTOFF {
            continue;
        }
        for r in 0..cols {
            for c in 0..rows {
                pinv[[r, c]] += v[[r, j]] * u[[c, j]] / (sigma * sigma);
            }
        }
    }
    pinv.mapv(S::of)
}

const MAX_SWEEPS: usize = 60;

fn rotate(m: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[[i, p]], m[[i, q]]);
        m[[i, p]] = c * x - s * y;
        m[[i, q]] = s * x + c * y;
    }
}
