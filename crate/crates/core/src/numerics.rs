//! Dense symmetric eigendecomposition (cyclic Jacobi), small SVD, and
//! classical multidimensional scaling.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`; its
    /// largest-magnitude component is positive.
    pub eigenvectors: Matrix,
}

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps visit `(p, q)` pairs in row order, so results are bit-reproducible.
/// The input must be symmetric to within `1e-12 · max(1, max|a_ij|)`.
pub fn sym_eig(a: &Matrix) -> Result<SymEigResult> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let scale = a.max_abs().max(1.0);
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }

    let mut w = a.clone();
    // Work on the exactly symmetric part.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = s;
            w[(j, i)] = s;
        }
    }
    let mut v = Matrix::identity(n);
    let norm = w.frobenius_sq().sqrt();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += w[(p, q)] * w[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * norm || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut w, &mut v, p, q, c, s);
                w[(p, p)] = app - t * apq;
                w[(q, q)] = aqq + t * apq;
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].total_cmp(&w[(i, i)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut best = 0;
        for r in 0..n {
            if v[(r, src)].abs() > v[(best, src)].abs() {
                best = r;
            }
        }
        let sign = if v[(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            eigenvectors[(r, col)] = sign * v[(r, src)];
        }
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Applies the rotation in the `(p, q)` plane: `W ← JᵀWJ`, `V ← VJ`.
fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = w.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let wkp = w[(k, p)];
        let wkq = w[(k, q)];
        let np = c * wkp - s * wkq;
        let nq = s * wkp + c * wkq;
        w[(k, p)] = np;
        w[(p, k)] = np;
        w[(k, q)] = nq;
        w[(q, k)] = nq;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Thin SVD `A = U·diag(σ)·Vᵀ` with `k = min(rows, cols)` components.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

/// SVD of a small matrix through the eigendecomposition of `AᵀA`.
///
/// Left vectors are `A·v_i` re-orthogonalised by Gram–Schmidt; directions
/// with a vanishing image are completed to an orthonormal set.
pub fn svd_small(a: &Matrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let (r, c) = a.shape();
    let k = r.min(c);
    let ata = a.t_matmul(a)?;
    let eig = sym_eig(&ata)?;
    let v = Matrix::from_fn(c, k, |i, j| eig.eigenvectors[(i, j)]);
    let av = a.matmul(&v)?;

    let norm = a.frobenius_sq().sqrt();
    let floor = 1e-14 * norm.max(f64::MIN_POSITIVE);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    let mut missing = Vec::new();
    for j in 0..k {
        let w = av.column(j);
        let mut u = w.clone();
        orthogonalize(&mut u, &u_cols);
        let len = dot(&u, &u).sqrt();
        if len > floor {
            u.iter_mut().for_each(|x| *x /= len);
            sigma.push(dot(&u, &w).max(0.0));
            u_cols.push(u);
        } else {
            sigma.push(0.0);
            missing.push(j);
            u_cols.push(vec![0.0; r]);
        }
    }
    for &j in &missing {
        let others: Vec<Vec<f64>> = u_cols
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j && !missing.contains(&i) || i < j && missing.contains(&i))
            .map(|(_, u)| u.clone())
            .collect();
        u_cols[j] = complete_basis_vector(r, &others);
    }

    // Keep the descending order exact after recomputing σ from the images.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let u = Matrix::from_fn(r, k, |i, j| u_cols[order[j]][i]);
    let vv = Matrix::from_fn(c, k, |i, j| v[(i, order[j])]);
    Ok(Svd {
        u,
        singular_values: order.iter().map(|&i| sigma[i]).collect(),
        v: vv,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two passes of modified Gram–Schmidt against `basis`.
fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let bb = dot(b, b);
            if bb == 0.0 {
                continue;
            }
            let proj = dot(x, b) / bb;
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= proj * bi);
        }
    }
}

/// A unit vector orthogonal to every (unit or zero) vector in `basis`.
fn complete_basis_vector(dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_len = 0.0;
    for e in 0..dim {
        let mut x = vec![0.0; dim];
        x[e] = 1.0;
        orthogonalize(&mut x, basis);
        let len = dot(&x, &x).sqrt();
        if len > best_len {
            best_len = len;
            best = Some(x);
        }
        if len > 0.5 {
            break;
        }
    }
    let mut x = best.unwrap_or_else(|| vec![0.0; dim]);
    if best_len > 0.0 {
        x.iter_mut().for_each(|xi| *xi /= best_len);
    }
    x
}

/// `−½ · C·S·C` for a square `S`, with `C` the centering matrix.
pub fn double_center(s: &Matrix) -> Result<Matrix> {
    let m = s.rows();
    if s.cols() != m {
        return Err(Error::ShapeMismatch("double centering needs a square matrix".into()));
    }
    if m == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let inv = 1.0 / m as f64;
    let row_means: Vec<f64> = s.row_iter().map(|r| r.iter().sum::<f64>() * inv).collect();
    let col_means = s.column_means();
    let grand = row_means.iter().sum::<f64>() * inv;
    Ok(Matrix::from_fn(m, m, |i, j| {
        -0.5 * (s[(i, j)] - row_means[i] - col_means[j] + grand)
    }))
}

/// Output of [`classical_mds`].
#[derive(Debug, Clone, PartialEq)]
pub struct MdsEmbedding {
    /// `m × dim` coordinates with zero column means.
    pub coords: Matrix,
    /// Full spectrum of the double-centred Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
}

/// Classical MDS: top-`dim` eigenpairs of `B = −½·C·(D∘D)·C`, with
/// coordinates `V_d · diag(max(λ, 0))^{1/2}`.
pub fn classical_mds(d: &Matrix, dim: usize) -> Result<MdsEmbedding> {
    let m = d.rows();
    if d.cols() != m {
        return Err(Error::ShapeMismatch(format!(
            "distance matrix must be square, got {}x{}",
            d.rows(),
            d.cols()
        )));
    }
    if dim == 0 || dim >= m {
        return Err(Error::invalid(format!(
            "MDS dimension {dim} must lie in 1..{m} for {m} points"
        )));
    }
    if d.as_slice().iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("distances must be finite and nonnegative"));
    }
    let squared = Matrix::from_fn(m, m, |i, j| d[(i, j)] * d[(i, j)]);
    let b = double_center(&squared)?;
    let eig = sym_eig(&b)?;
    let mut coords = Matrix::zeros(m, dim);
    for j in 0..dim {
        let scale = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..m {
            coords[(i, j)] = eig.eigenvectors[(i, j)] * scale;
        }
    }
    // Eigenvectors of nonzero eigenvalues are already ⟂ 1; this only removes
    // rounding residue.
    let coords = coords.centered();
    Ok(MdsEmbedding {
        coords,
        eigenvalues: eig.eigenvalues,
    })
}

/// Pairwise Euclidean distance matrix of the rows of `x`.
pub fn pairwise_distances(x: &Matrix) -> Matrix {
    let m = x.rows();
    Matrix::from_fn(m, m, |i, j| crate::synthetic::euclidean(x.row(i), x.row(j)))
}
