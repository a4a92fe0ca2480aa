//! Dense linear algebra for small problems: Householder-QR least squares
//! (Granger regressions, ≤ 13 columns) and cyclic Jacobi eigendecomposition
//! of symmetric matrices (24×24 covariance). Robustness over speed — these
//! matrices are tiny.

use ndarray::Array2;

/// Result of a least-squares fit `min ‖X·β − y‖²`.
#[derive(Debug, Clone)]
pub struct LstsqFit {
    pub coeffs: Vec<f64>,
    pub rss: f64,
    /// True when a diagonal entry of R collapsed (numerically dependent
    /// columns). The corresponding coefficients are zeroed.
    pub rank_deficient: bool,
}

/// Least squares via Householder QR without pivoting. Rank deficiency is
/// detected by comparing each |R[j,j]| against the largest one; dependent
/// columns get coefficient 0 so the fit stays total.
pub fn lstsq(x: &Array2<f64>, y: &[f64]) -> LstsqFit {
    let (n, p) = x.dim();
    assert_eq!(n, y.len(), "lstsq: row count mismatch");
    assert!(n >= p && p > 0, "lstsq: need n ≥ p ≥ 1, got {n}×{p}");

    // compact storage: R accumulates in the upper triangle of `a`, each
    // Householder vector's tail stays below the diagonal of its column
    let mut a = x.clone();
    let mut b = y.to_vec();

    for j in 0..p {
        let mut norm = 0.0;
        for i in j..n {
            norm += a[[i, j]] * a[[i, j]];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue; // column already zero at and below the diagonal
        }
        let alpha = if a[[j, j]] > 0.0 { -norm } else { norm };
        // v = x_j − alpha·e_j; v0 kept explicit, tail stays in column j
        let v0 = a[[j, j]] - alpha;
        let mut vnorm2 = v0 * v0;
        for i in (j + 1)..n {
            vnorm2 += a[[i, j]] * a[[i, j]];
        }
        if vnorm2 == 0.0 {
            a[[j, j]] = alpha;
            continue;
        }
        let beta = 2.0 / vnorm2;
        // apply H = I − beta·v·vᵀ to the remaining columns
        for k in (j + 1)..p {
            let mut dot = v0 * a[[j, k]];
            for i in (j + 1)..n {
                dot += a[[i, j]] * a[[i, k]];
            }
            let s = beta * dot;
            a[[j, k]] -= s * v0;
            for i in (j + 1)..n {
                a[[i, k]] -= s * a[[i, j]];
            }
        }
        // apply H to b
        let mut dot = v0 * b[j];
        for i in (j + 1)..n {
            dot += a[[i, j]] * b[i];
        }
        let s = beta * dot;
        b[j] -= s * v0;
        for i in (j + 1)..n {
            b[i] -= s * a[[i, j]];
        }
        // column j of R is alpha on the diagonal, zero below; the tail
        // entries left in place are the reflector, never read again by the
        // back substitution (it only touches the upper triangle).
        a[[j, j]] = alpha;
    }

    // back substitution on R (upper triangle of a) with rank guard
    let mut diag_max = 0.0f64;
    for j in 0..p {
        diag_max = diag_max.max(a[[j, j]].abs());
    }
    let tol = diag_max * (n.max(p) as f64) * f64::EPSILON;
    let mut rank_deficient = false;
    let mut coeffs = vec![0.0; p];
    for j in (0..p).rev() {
        let mut s = b[j];
        for k in (j + 1)..p {
            s -= a[[j, k]] * coeffs[k];
        }
        if a[[j, j]].abs() <= tol {
            rank_deficient = true;
            coeffs[j] = 0.0;
        } else {
            coeffs[j] = s / a[[j, j]];
        }
    }

    // residual sum of squares against the original system
    let mut rss = 0.0;
    for i in 0..n {
        let mut pred = 0.0;
        for j in 0..p {
            pred += x[[i, j]] * coeffs[j];
        }
        let r = y[i] - pred;
        rss += r * r;
    }
    LstsqFit { coeffs, rss, rank_deficient }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns. Convergence: off-diagonal Frobenius norm below
/// `1e-12 · max(1, ‖M‖_F)` — the tolerance is relative to the matrix scale
/// so covariance matrices of large-magnitude data converge too.
pub fn jacobi_eigh(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi_eigh: matrix must be square");
    for i in 0..n {
        for j in (i + 1)..n {
            assert!(
                (m[[i, j]] - m[[j, i]]).abs() <= 1e-9 * (1.0 + m[[i, j]].abs()),
                "jacobi_eigh: matrix not symmetric at ({i},{j})"
            );
        }
    }

    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    let fro: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * fro.max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a[[i, j]] * a[[i, j]];
            }
        }
        if off.sqrt() < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() < tol / (n as f64) {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    // sort descending by eigenvalue, carrying columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).expect("NaN eigenvalue"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, new_col]] = v[[r, old_col]];
        }
    }
    (eigenvalues, vectors)
}
