//! Quadratic state-space systems
//!
//! ```text
//! E x' = A x + Q (x ⊗ x) + B u,    y = C x
//! ```
//!
//! and closed-form evaluation of their first three generalized transfer
//! functions. All resolvent applications go through an LU factorization of
//! `sE - A`; no explicit inverse is ever formed.

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{kron_vec, to_complex, CMatrix, CVector, C64};

/// Relative pivot size below which `sE - A` is treated as singular.
const PIVOT_RTOL: f64 = 1e-14;

/// One nonzero of the quadratic operator: `Q[row, i*n + j] = val`.
#[derive(Clone, Copy, Debug)]
struct QEntry {
    row: usize,
    i: usize,
    j: usize,
    val: C64,
}

#[derive(Clone, Debug)]
pub struct QuadraticSystem {
    e: CMatrix,
    a: CMatrix,
    q: CMatrix,
    b: CVector,
    c: CVector,
    symmetric: bool,
    e_identity: bool,
    q_entries: Vec<QEntry>,
    /// Nonzeros of `A` as `(row, col, val)` when it is sparse enough to pay off.
    a_entries: Option<Vec<(usize, usize, C64)>>,
}

/// LU factorization of `sE - A` (or its transpose) at a fixed complex point.
pub struct Factored {
    s: C64,
    lu: LU<C64, Dyn, Dyn>,
}

impl Factored {
    pub fn solve(&self, v: &CVector) -> Result<CVector> {
        self.lu.solve(v).ok_or(Error::SingularResolvent { re: self.s.re, im: self.s.im })
    }
}

fn check_pivots(lu: &LU<C64, Dyn, Dyn>, s: C64) -> Result<()> {
    let u = lu.u();
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for i in 0..u.nrows() {
        let d = u[(i, i)].norm();
        max = max.max(d);
        min = min.min(d);
    }
    if !(max > 0.0) || !min.is_finite() || min <= PIVOT_RTOL * max {
        return Err(Error::SingularResolvent { re: s.re, im: s.im });
    }
    Ok(())
}

impl QuadraticSystem {
    /// Builds a system from complex matrices. `c` holds the output row as a
    /// column vector.
    pub fn new(e: CMatrix, a: CMatrix, q: CMatrix, b: CVector, c: CVector) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        if a.shape() != (n, n) || e.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "E is {:?} and A is {:?}, both must be {n}x{n}",
                e.shape(),
                a.shape()
            )));
        }
        if q.shape() != (n, n * n) {
            return Err(Error::Dimension(format!("Q is {:?}, expected {}x{}", q.shape(), n, n * n)));
        }
        if b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!("B has {} rows and C has {} columns, expected {n}", b.len(), c.len())));
        }
        if e.iter().chain(a.iter()).chain(q.iter()).chain(b.iter()).chain(c.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("system matrices contain non-finite entries".into()));
        }
        let lu = e.clone().lu();
        check_pivots(&lu, C64::new(0.0, 0.0)).map_err(|_| Error::SingularDescriptor)?;
        let e_identity = e == CMatrix::identity(n, n);
        let q_entries = collect_entries(&q, n);
        let a_entries = sparse_entries(&a);
        Ok(Self { e, a, q, b, c, symmetric: false, e_identity, q_entries, a_entries })
    }

    pub fn from_real(
        e: &DMatrix<f64>,
        a: &DMatrix<f64>,
        q: &DMatrix<f64>,
        b: &[f64],
        c: &[f64],
    ) -> Result<Self> {
        Self::new(
            to_complex(e),
            to_complex(a),
            to_complex(q),
            CVector::from_iterator(b.len(), b.iter().map(|&v| C64::new(v, 0.0))),
            CVector::from_iterator(c.len(), c.iter().map(|&v| C64::new(v, 0.0))),
        )
    }

    /// Marks the quadratic operator as symmetric after verifying
    /// `Q(e_i ⊗ e_j) = Q(e_j ⊗ e_i)` on every canonical pair.
    pub fn with_symmetric(mut self, flag: bool) -> Result<Self> {
        if flag {
            let dev = symmetry_defect(&self.q);
            let scale = self.q.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
            if dev > 1e-12 * scale {
                return Err(Error::NotSymmetric(dev));
            }
        }
        self.symmetric = flag;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn e(&self) -> &CMatrix {
        &self.e
    }
    pub fn a(&self) -> &CMatrix {
        &self.a
    }
    pub fn q(&self) -> &CMatrix {
        &self.q
    }
    pub fn b(&self) -> &CVector {
        &self.b
    }
    /// Output map, stored as a column.
    pub fn c(&self) -> &CVector {
        &self.c
    }
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
    pub fn e_is_identity(&self) -> bool {
        self.e_identity
    }

    /// True when every matrix entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        [&self.e, &self.a, &self.q].iter().all(|m| m.iter().all(|z| z.im == 0.0))
            && self.b.iter().chain(self.c.iter()).all(|z| z.im == 0.0)
    }

    /// Same linear part with a different quadratic operator.
    pub fn with_q(&self, q: CMatrix) -> Result<Self> {
        Self::new(self.e.clone(), self.a.clone(), q, self.b.clone(), self.c.clone())
    }

    /// Same system with `Q = 0`.
    pub fn linear_part(&self) -> Self {
        let n = self.n();
        let mut out = self.clone();
        out.q = CMatrix::zeros(n, n * n);
        out.q_entries.clear();
        out.symmetric = true;
        out
    }

    /// LU factorization of `sE - A`.
    pub fn factor(&self, s: C64) -> Result<Factored> {
        let m = self.e.map(|z| z * s) - &self.a;
        let lu = m.lu();
        check_pivots(&lu, s)?;
        Ok(Factored { s, lu })
    }

    /// LU factorization of `(sE - A)^T` (plain transpose, not adjoint).
    pub fn factor_transpose(&self, s: C64) -> Result<Factored> {
        let m = (self.e.map(|z| z * s) - &self.a).transpose();
        let lu = m.lu();
        check_pivots(&lu, s)?;
        Ok(Factored { s, lu })
    }

    /// `(sE - A)^{-1} v`.
    pub fn resolvent_apply(&self, s: C64, v: &CVector) -> Result<CVector> {
        if v.len() != self.n() {
            return Err(Error::Dimension(format!("vector of length {} for n = {}", v.len(), self.n())));
        }
        self.factor(s)?.solve(v)
    }

    /// `G1(s) = Φ(s) B`.
    pub fn eval_g1(&self, s: C64) -> Result<CVector> {
        self.factor(s)?.solve(&self.b)
    }

    /// `J1(s) = C Φ(s)`, returned as a column vector.
    pub fn eval_j1(&self, s: C64) -> Result<CVector> {
        self.factor_transpose(s)?.solve(&self.c)
    }

    pub fn eval_h1(&self, s: C64) -> Result<C64> {
        Ok(self.c.dot(&self.eval_g1(s)?))
    }

    /// `Q (x ⊗ y)` using the stored nonzeros.
    pub fn apply_q(&self, x: &CVector, y: &CVector) -> CVector {
        let mut out = CVector::zeros(self.n());
        for e in &self.q_entries {
            out[e.row] += e.val * x[e.i] * y[e.j];
        }
        out
    }

    /// `G2(s) = Φ(2s) Q (G1(s) ⊗ G1(s))`.
    pub fn eval_g2(&self, s: C64) -> Result<CVector> {
        let g1 = self.eval_g1(s)?;
        self.g2_from(s, &g1)
    }

    fn g2_from(&self, s: C64, g1: &CVector) -> Result<CVector> {
        let rhs = self.apply_q(g1, g1);
        self.factor(s * 2.0)?.solve(&rhs)
    }

    pub fn eval_h2(&self, s: C64) -> Result<C64> {
        Ok(self.c.dot(&self.eval_g2(s)?))
    }

    /// `H3(s)`, using the single-term form when the symmetric flag is set and
    /// the two-term form otherwise.
    pub fn eval_h3(&self, s: C64) -> Result<C64> {
        if self.symmetric {
            self.eval_h3_symmetric(s)
        } else {
            self.eval_h3_two_term(s)
        }
    }

    /// `2 C Φ(3s) Q (G2 ⊗ G1)`.
    pub fn eval_h3_symmetric(&self, s: C64) -> Result<C64> {
        let g1 = self.eval_g1(s)?;
        let g2 = self.g2_from(s, &g1)?;
        let rhs = self.apply_q(&g2, &g1) * C64::new(2.0, 0.0);
        Ok(self.c.dot(&self.factor(s * 3.0)?.solve(&rhs)?))
    }

    /// `C Φ(3s) Q (G2 ⊗ G1 + G1 ⊗ G2)`.
    pub fn eval_h3_two_term(&self, s: C64) -> Result<C64> {
        let g1 = self.eval_g1(s)?;
        let g2 = self.g2_from(s, &g1)?;
        let rhs = self.apply_q(&g2, &g1) + self.apply_q(&g1, &g2);
        Ok(self.c.dot(&self.factor(s * 3.0)?.solve(&rhs)?))
    }

    /// `[H1(s), H2(s), H3(s)]` with the factorizations shared across levels.
    pub fn eval_all(&self, s: C64) -> Result<[C64; 3]> {
        let g1 = self.eval_g1(s)?;
        let g2 = self.g2_from(s, &g1)?;
        let rhs = if self.symmetric {
            self.apply_q(&g2, &g1) * C64::new(2.0, 0.0)
        } else {
            self.apply_q(&g2, &g1) + self.apply_q(&g1, &g2)
        };
        let h3 = self.c.dot(&self.factor(s * 3.0)?.solve(&rhs)?);
        Ok([self.c.dot(&g1), self.c.dot(&g2), h3])
    }

    /// `H_m(s)` for `m ∈ {1, 2, 3}`.
    pub fn eval_h(&self, m: usize, s: C64) -> Result<C64> {
        match m {
            1 => self.eval_h1(s),
            2 => self.eval_h2(s),
            3 => self.eval_h3(s),
            _ => Err(Error::InvalidArgument(format!("transfer function order {m} not supported (1..=3)"))),
        }
    }

    /// Right-hand side `E^{-1}(A x + Q(x⊗x) + B u)` without the `E^{-1}`.
    pub(crate) fn rhs_unscaled(&self, x: &CVector, u: C64) -> CVector {
        let mut out = self.apply_q(x, x);
        match &self.a_entries {
            Some(entries) => {
                for &(i, j, v) in entries {
                    out[i] += v * x[j];
                }
            }
            None => out.gemv(C64::new(1.0, 0.0), &self.a, x, C64::new(1.0, 0.0)),
        }
        out.axpy(u, &self.b, C64::new(1.0, 0.0));
        out
    }
}

fn sparse_entries(a: &CMatrix) -> Option<Vec<(usize, usize, C64)>> {
    let n = a.nrows();
    let nnz = a.iter().filter(|z| **z != C64::new(0.0, 0.0)).count();
    if n < 16 || nnz * 8 > n * n {
        return None;
    }
    let mut out = Vec::with_capacity(nnz);
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] != C64::new(0.0, 0.0) {
                out.push((i, j, a[(i, j)]));
            }
        }
    }
    Some(out)
}

fn collect_entries(q: &CMatrix, n: usize) -> Vec<QEntry> {
    let mut out = Vec::new();
    // column-major walk so the order is reproducible
    for col in 0..q.ncols() {
        for row in 0..q.nrows() {
            let val = q[(row, col)];
            if val != C64::new(0.0, 0.0) {
                out.push(QEntry { row, i: col / n, j: col % n, val });
            }
        }
    }
    out
}

/// Largest `|Q(e_i⊗e_j) - Q(e_j⊗e_i)|` over all canonical pairs.
pub fn symmetry_defect(q: &CMatrix) -> f64 {
    let n = q.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for row in 0..n {
                dev = dev.max((q[(row, i * n + j)] - q[(row, j * n + i)]).norm());
            }
        }
    }
    dev
}

/// Dense `Qop (x ⊗ y)`.
pub fn apply_q(q: &CMatrix, x: &CVector, y: &CVector) -> Result<CVector> {
    if q.ncols() != x.len() * y.len() {
        return Err(Error::Dimension(format!(
            "Q has {} columns but x ⊗ y has length {}",
            q.ncols(),
            x.len() * y.len()
        )));
    }
    Ok(q * kron_vec(x, y))
}

/// Symmetric part of a quadratic operator: columns `(i, j)` and `(j, i)` are
/// both replaced by their average. Leaves `Q(x ⊗ x)` unchanged for every `x`.
pub fn symmetrize_q(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let mut out = q.clone();
    let half = C64::new(0.5, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            for row in 0..n {
                let avg = (q[(row, i * n + j)] + q[(row, j * n + i)]) * half;
                out[(row, i * n + j)] = avg;
                out[(row, j * n + i)] = avg;
            }
        }
    }
    out
}
