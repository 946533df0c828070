//! Small dense 3×3 kernels: cyclic Jacobi eigensolver, one-sided Jacobi SVD,
//! and spectral functions of symmetric matrices.

use nalgebra::{Matrix3, Vector3};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition `a = V diag(λ) Vᵀ` of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order. Each eigenvector is signed so
/// that its largest-magnitude component is positive (first such component on
/// ties), making the output reproducible bit-for-bit.
pub fn symmetric_eigen(a: &Mat3) -> (Vec3, Mat3) {
    let mut a = (a + a.transpose()) * 0.5;
    let mut v = Mat3::identity();
    for _ in 0..MAX_SWEEPS {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let diag = a[(0, 0)].powi(2) + a[(1, 1)].powi(2) + a[(2, 2)].powi(2);
        if off == 0.0 || off <= 1e-36 * diag {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut j = Mat3::identity();
            j[(p, p)] = c;
            j[(q, q)] = c;
            j[(p, q)] = s;
            j[(q, p)] = -s;
            a = j.transpose() * a * j;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= j;
        }
    }
    let values = Vec3::new(a[(0, 0)], a[(1, 1)], a[(2, 2)]);
    sort_desc(values, v)
}

/// Singular value decomposition `m = W diag(σ) Vᵀ` by one-sided (Hestenes)
/// Jacobi rotations on the columns of `m`.
///
/// The rotations are exactly the Jacobi rotations of the Gram matrix `mᵀm`,
/// so `V` holds its eigenvectors and `σ²` its eigenvalues, but orthogonality
/// of `W` does not degrade with the condition number. Singular values are
/// descending; columns of `W` for zero singular values are left zero.
pub fn jacobi_svd(m: &Mat3) -> (Mat3, Vec3, Mat3) {
    let mut a = *m;
    let mut v = Mat3::identity();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = a.column(i).norm_squared();
            let beta = a.column(j).norm_squared();
            let gamma = a.column(i).dot(&a.column(j));
            if gamma == 0.0 || gamma.abs() <= 1e-17 * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            for mat in [&mut a, &mut v] {
                let ci = mat.column(i).into_owned();
                let cj = mat.column(j).into_owned();
                mat.set_column(i, &(ci * c - cj * s));
                mat.set_column(j, &(ci * s + cj * c));
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = Vec3::zeros();
    let mut w = Mat3::zeros();
    for k in 0..3 {
        let norm = a.column(k).norm();
        sigma[k] = norm;
        if norm > 0.0 {
            w.set_column(k, &(a.column(k) / norm));
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));
    let permute = |m: &Mat3| Mat3::from_columns(&[m.column(order[0]), m.column(order[1]), m.column(order[2])]);
    let sigma = Vec3::new(sigma[order[0]], sigma[order[1]], sigma[order[2]]);
    (permute(&w), sigma, permute(&v))
}

/// Applies `f` to the spectrum of a symmetric matrix.
pub fn symmetric_map(a: &Mat3, f: impl Fn(f64) -> f64) -> Mat3 {
    let (values, vectors) = symmetric_eigen(a);
    let d = Mat3::from_diagonal(&values.map(f));
    let out = vectors * d * vectors.transpose();
    (out + out.transpose()) * 0.5
}

pub fn symmetric_exp(a: &Mat3) -> Mat3 {
    symmetric_map(a, f64::exp)
}

/// Moore–Penrose pseudo-inverse; singular values below `rtol·σ_max` count as zero.
pub fn pseudo_inverse(m: &Mat3, rtol: f64) -> Mat3 {
    let (w, sigma, v) = jacobi_svd(m);
    let cutoff = sigma[0] * rtol;
    let mut inv = Mat3::zeros();
    for k in 0..3 {
        if sigma[k] > cutoff && sigma[k] > 0.0 {
            inv += v.column(k) * w.column(k).transpose() / sigma[k];
        }
    }
    inv
}

/// Frobenius inner product `tr(aᵀ b)`.
pub fn frobenius(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

fn sort_desc(values: Vec3, vectors: Mat3) -> (Vec3, Mat3) {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]).then(x.cmp(&y)));
    let mut out_v = Mat3::zeros();
    let mut out_l = Vec3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        out_l[dst] = values[src];
        let mut col = vectors.column(src).into_owned();
        let lead = (0..3)
            .max_by(|&x, &y| col[x].abs().total_cmp(&col[y].abs()).then(y.cmp(&x)))
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col = -col;
        }
        out_v.set_column(dst, &col);
    }
    (out_l, out_v)
}
