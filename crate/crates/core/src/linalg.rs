//! Dense complex linear-algebra helpers shared by every module.
//!
//! Kronecker products follow the row-lexicographic convention
//! `x ⊗ y = [x_1 y_1, x_1 y_2, ..., x_1 y_n, ..., x_n y_n]`.

use nalgebra::{ComplexField, DMatrix, DVector, Dyn, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Imaginary unit.
pub const J: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `x ⊗ y` for column vectors.
pub fn kron_vec(x: &CVector, y: &CVector) -> CVector {
    let m = y.len();
    let mut out = CVector::zeros(x.len() * m);
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            out[i * m + j] = xi * yj;
        }
    }
    out
}

/// General Kronecker product of two matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

/// Largest absolute imaginary part of any entry.
pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// SVD computed on a copy scaled to unit largest entry.
///
/// nalgebra's convergence test is absolute, so small-normed matrices lose
/// relative accuracy without the rescaling.
pub fn svd<T>(m: &DMatrix<T>, compute_u: bool, compute_v: bool) -> SVD<T, Dyn, Dyn>
where
    T: ComplexField<RealField = f64>,
{
    let scale = m.iter().fold(0.0, |acc: f64, z| acc.max(z.clone().modulus()));
    if !(scale > 0.0 && scale.is_finite()) {
        return SVD::new(m.clone(), compute_u, compute_v);
    }
    let mut out = SVD::new(m.map(|z| z.unscale(scale)), compute_u, compute_v);
    out.singular_values *= scale;
    out
}

/// Singular values in descending order.
pub fn singular_values<T>(m: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64>,
{
    svd(m, false, false).singular_values.iter().copied().collect()
}

/// Spectral norm (largest singular value).
pub fn norm2<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Minimum-norm least-squares solution of `M x ≈ b` through a truncated SVD.
///
/// Singular triplets with `σ_i / σ_1 < epsilon` are discarded. A floor of
/// `max(rows, cols) · f64::EPSILON` is always applied to the relative cutoff so
/// that numerically-zero directions never enter the solution, including when
/// `epsilon == 0`.
pub fn thresholded_pinv_solve<T>(m: &DMatrix<T>, b: &DVector<T>, epsilon: f64) -> Result<DVector<T>>
where
    T: ComplexField<RealField = f64>,
{
    let (rows, cols) = m.shape();
    if b.len() != rows {
        return Err(Error::Dimension(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            rows
        )));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::ZeroMatrix);
    }
    // tall systems are reduced to their triangular factor first
    let (reduced, rhs) = if rows > cols {
        let qr = m.clone().qr();
        let rhs = qr.q().adjoint() * b;
        (qr.r(), rhs)
    } else {
        (m.clone(), b.clone())
    };
    let svd = svd(&reduced, true, true);
    let sigma = &svd.singular_values;
    let s1 = sigma[0];
    if !(s1 > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let floor = rows.max(cols) as f64 * f64::EPSILON;
    let cutoff = epsilon.max(floor) * s1;
    let keep = sigma.iter().take_while(|&&s| s >= cutoff).count();

    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let apply = |r: &DVector<T>| {
        let mut x = DVector::<T>::zeros(cols);
        for i in 0..keep {
            let coef = u.column(i).dotc(r).unscale(sigma[i]);
            // row i of V^H, conjugated, is the i-th right singular vector
            for k in 0..cols {
                x[k] += v_t[(i, k)].clone().conjugate() * coef.clone();
            }
        }
        x
    };
    let mut x = apply(&rhs);
    // iterative refinement
    for _ in 0..2 {
        let dx = apply(&(&rhs - &reduced * &x));
        x += dx;
    }
    Ok(x)
}

/// Stack complex rows into a real matrix `[Re M; Im M]`.
///
/// For a real unknown vector this carries the same information as stacking
/// the rows for `+jω` and their conjugates for `-jω`.
pub fn split_rows(m: &CMatrix) -> DMatrix<f64> {
    let (r, cl) = m.shape();
    let mut out = DMatrix::<f64>::zeros(2 * r, cl);
    for i in 0..r {
        for j in 0..cl {
            out[(i, j)] = m[(i, j)].re;
            out[(r + i, j)] = m[(i, j)].im;
        }
    }
    out
}

/// Vector counterpart of [`split_rows`].
pub fn split_vec(v: &CVector) -> DVector<f64> {
    let n = v.len();
    let mut out = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        out[i] = v[i].re;
        out[n + i] = v[i].im;
    }
    out
}

/// Largest relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: C64, b: C64, floor: f64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(floor)
}
