//! Least-squares inference of the reduced quadratic operator.
//!
//! With `v_Q` the column-stacked `r x r²` operator, the second transfer
//! function of the reduced model is linear in `v_Q`,
//!
//! ```text
//! H2(s) = (G1(s)ᵀ ⊗ G1(s)ᵀ ⊗ J1(2s)) v_Q,
//! ```
//!
//! and the third one (symmetric form) is the quadratic form `v_Qᵀ K(s) v_Q`
//! with
//!
//! ```text
//! K(s) = 2 [(G1 ⊗ G1) ⊗ Φ(2s)ᵀ] ⊗ G1ᵀ ⊗ J1(3s).
//! ```
//!
//! The coupled fit freezes the left factor of the quadratic form at the
//! previous iterate, solves the stacked linear problem, and repeats until the
//! iterate stops moving.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, kron_vec, split_rows, split_vec, thresholded_pinv_solve, CMatrix, CVector, C64};
use crate::system::{symmetrize_q, Factored, QuadraticSystem};

/// Column-stacked quadratic operator, length `r³`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorizedQ {
    v: CVector,
    r: usize,
}

impl VectorizedQ {
    pub fn from_vector(v: CVector) -> Result<Self> {
        let r = cube_root(v.len()).ok_or_else(|| Error::Dimension(format!("length {} is not a perfect cube", v.len())))?;
        Ok(Self { v, r })
    }

    pub fn zeros(r: usize) -> Self {
        Self { v: CVector::zeros(r * r * r), r }
    }

    pub fn as_vector(&self) -> &CVector {
        &self.v
    }
    pub fn order(&self) -> usize {
        self.r
    }
}

fn cube_root(len: usize) -> Option<usize> {
    let r = (len as f64).cbrt().round() as usize;
    (r > 0 && r * r * r == len).then_some(r)
}

/// `v_Q = [(Q e_1)ᵀ ... (Q e_{r²})ᵀ]ᵀ`.
pub fn vectorize_q(q: &CMatrix) -> Result<VectorizedQ> {
    let r = q.nrows();
    if q.ncols() != r * r || r == 0 {
        return Err(Error::Dimension(format!("Q is {:?}, expected r x r²", q.shape())));
    }
    // nalgebra storage is column-major already
    Ok(VectorizedQ { v: CVector::from_column_slice(q.as_slice()), r })
}

pub fn reshape_vq(v: &VectorizedQ) -> CMatrix {
    CMatrix::from_column_slice(v.r, v.r * v.r, v.v.as_slice())
}

/// Convergence and truncation settings for the coupled iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Absolute tolerance on `‖v̄_Q - ṽ_Q‖₂`.
    pub tau: f64,
    /// Relative singular-value cutoff for every pseudo-inverse.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tau: 1e-10, epsilon: 0.0, max_iter: 500 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// How complex least-squares rows are turned into a solvable system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LsMode {
    /// Rows are split into real and imaginary parts and the unknown is real.
    /// Equivalent to stacking the conjugate rows at `-jω`; requires a real
    /// linear model.
    #[default]
    RealSplit,
    /// Rows are used as given; the unknown is complex.
    Complex,
}

/// Truncated-SVD least squares in the chosen arithmetic.
pub fn ls_solve(m: &CMatrix, b: &CVector, epsilon: f64, mode: LsMode) -> Result<CVector> {
    match mode {
        LsMode::Complex => thresholded_pinv_solve(m, b, epsilon),
        LsMode::RealSplit => {
            let x = thresholded_pinv_solve(&split_rows(m), &split_vec(b), epsilon)?;
            Ok(x.map(|v| C64::new(v, 0.0)))
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadraticFitResult {
    pub v_q: VectorizedQ,
    pub q: CMatrix,
    /// Number of completed update steps.
    pub iterations: usize,
    /// `‖v̄_Q - 0‖` tested before the first step.
    pub initial_deviation: f64,
    /// `‖v̄_Q - ṽ_Q‖₂` after each step; these are the values compared to τ.
    pub deviation_trace: Vec<f64>,
    /// `Σ |T2 v - V2|²` over the sample points.
    pub residual_h2: f64,
    /// `Σ |vᵀ K v - V3|²` over the sample points.
    pub residual_h3: f64,
    pub converged: bool,
}

impl QuadraticFitResult {
    pub fn final_deviation(&self) -> f64 {
        self.deviation_trace.last().copied().unwrap_or(self.initial_deviation)
    }
}

/// Cached per-frequency quantities of the reduced linear model.
struct PointCache {
    g1: CVector,
    j2: CVector,
    j3: CVector,
    lu2: Factored,
}

fn point_cache(model: &QuadraticSystem, s: C64) -> Result<PointCache> {
    Ok(PointCache {
        g1: model.eval_g1(s)?,
        j2: model.eval_j1(s * 2.0)?,
        j3: model.eval_j1(s * 3.0)?,
        lu2: model.factor(s * 2.0)?,
    })
}

/// `N x r³` matrix with row `ℓ` equal to `G1ᵀ ⊗ G1ᵀ ⊗ J1(2 s_ℓ)`; depends on the
/// linear part of `model` only.
pub fn build_t2(model: &QuadraticSystem, points: &[C64]) -> Result<CMatrix> {
    let rows: Vec<CVector> = points
        .par_iter()
        .map(|&s| {
            let g1 = model.eval_g1(s)?;
            let j2 = model.eval_j1(s * 2.0)?;
            Ok(kron_vec(&kron_vec(&g1, &g1), &j2))
        })
        .collect::<Result<_>>()?;
    Ok(stack_rows(&rows, model.n().pow(3)))
}

fn stack_rows(rows: &[CVector], width: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows.len(), width);
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).copy_from(&r.transpose());
    }
    m
}

/// Dense `r³ x r³` matrix `K(s)`.
pub fn build_k(model: &QuadraticSystem, s: C64) -> Result<CMatrix> {
    let r = model.n();
    let g1 = model.eval_g1(s)?;
    let j3 = model.eval_j1(s * 3.0)?;
    let lu2 = model.factor(s * 2.0)?;
    let mut phi2 = CMatrix::zeros(r, r);
    for k in 0..r {
        let mut e = CVector::zeros(r);
        e[k] = C64::new(1.0, 0.0);
        phi2.set_column(k, &lu2.solve(&e)?);
    }
    let gg = kron_vec(&g1, &g1);
    let gg = CMatrix::from_column_slice(gg.len(), 1, gg.as_slice());
    let left = kron(&gg, &phi2.transpose());
    let g1t = CMatrix::from_row_slice(1, r, g1.as_slice());
    let j3t = CMatrix::from_row_slice(1, r, j3.as_slice());
    Ok(kron(&kron(&left, &g1t), &j3t) * C64::new(2.0, 0.0))
}

/// Source of the linearized third-harmonic rows `v̄ᵀ K(s_ℓ)`.
pub trait ThirdHarmonicRows: Sync {
    /// Number of sample points.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Matrix whose row `ℓ` is `v̄ᵀ K(s_ℓ)`.
    fn rows(&self, vbar: &VectorizedQ) -> Result<CMatrix>;
}

/// Materialized `K(s_ℓ)` matrices.
pub struct DenseK(pub Vec<CMatrix>);

impl ThirdHarmonicRows for DenseK {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn rows(&self, vbar: &VectorizedQ) -> Result<CMatrix> {
        let width = vbar.v.len();
        let rows: Vec<CVector> = self
            .0
            .iter()
            .map(|k| {
                if k.shape() != (width, width) {
                    return Err(Error::Dimension(format!("K is {:?}, v̄ has length {width}", k.shape())));
                }
                Ok(k.transpose() * &vbar.v)
            })
            .collect::<Result<_>>()?;
        Ok(stack_rows(&rows, width))
    }
}

/// `v̄ᵀ K(s)` through the Kronecker structure, never forming `K`:
/// `v̄ᵀ K = 2 · G2(v̄)ᵀ ⊗ G1ᵀ ⊗ J1(3s)` with `G2(v̄) = Φ(2s) Q̄ (G1 ⊗ G1)`.
pub struct FactoredK {
    cache: Vec<PointCache>,
    r: usize,
}

impl FactoredK {
    pub fn new(model: &QuadraticSystem, points: &[C64]) -> Result<Self> {
        let cache = points.par_iter().map(|&s| point_cache(model, s)).collect::<Result<Vec<_>>>()?;
        Ok(Self { cache, r: model.n() })
    }
}

impl ThirdHarmonicRows for FactoredK {
    fn len(&self) -> usize {
        self.cache.len()
    }
    fn rows(&self, vbar: &VectorizedQ) -> Result<CMatrix> {
        if vbar.r != self.r {
            return Err(Error::Dimension(format!("v̄ has order {}, model has {}", vbar.r, self.r)));
        }
        let qbar = reshape_vq(vbar);
        let two = C64::new(2.0, 0.0);
        let rows: Vec<CVector> = self
            .cache
            .par_iter()
            .map(|pc| {
                let g2 = pc.lu2.solve(&(&qbar * kron_vec(&pc.g1, &pc.g1)))?;
                Ok(kron_vec(&kron_vec(&g2, &pc.g1), &pc.j3) * two)
            })
            .collect::<Result<_>>()?;
        Ok(stack_rows(&rows, self.r.pow(3)))
    }
}

impl FactoredK {
    /// T2 from the same cache.
    pub fn t2(&self) -> CMatrix {
        let rows: Vec<CVector> = self.cache.iter().map(|pc| kron_vec(&kron_vec(&pc.g1, &pc.g1), &pc.j2)).collect();
        stack_rows(&rows, self.r.pow(3))
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// One-step estimate `v_Q⁽²⁾ = T2† V2`.
pub fn solve_one_step_h2(t2: &CMatrix, v2: &CVector, epsilon: f64, mode: LsMode) -> Result<VectorizedQ> {
    check_len("V2", v2.len(), t2.nrows())?;
    if v2.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(VectorizedQ::zeros(cube_root(t2.ncols()).unwrap_or(0)));
    }
    VectorizedQ::from_vector(ls_solve(t2, v2, epsilon, mode)?)
}

/// Linearized third-harmonic estimate `v_Q⁽³⁾ = T3† V3` with row `ℓ` of `T3`
/// equal to `(v_Q⁽²⁾)ᵀ K(s_ℓ)`.
pub fn solve_one_step_h3(
    ks: &dyn ThirdHarmonicRows,
    vq2: &VectorizedQ,
    v3: &CVector,
    epsilon: f64,
    mode: LsMode,
) -> Result<VectorizedQ> {
    check_len("V3", v3.len(), ks.len())?;
    let t3 = ks.rows(vq2)?;
    let v3_zero = v3.iter().all(|z| *z == C64::new(0.0, 0.0));
    if t3.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        if v3_zero {
            return Ok(VectorizedQ::zeros(vq2.r));
        }
        return Err(Error::DegenerateLinearization);
    }
    if v3_zero {
        return Ok(VectorizedQ::zeros(vq2.r));
    }
    VectorizedQ::from_vector(ls_solve(&t3, v3, epsilon, mode)?)
}

fn vstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn vcat(a: &CVector, b: &CVector) -> CVector {
    CVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Coupled fixed-point iteration over the second- and third-harmonic data.
///
/// Starts from `v̄ = T2† V2`, `ṽ = 0`; while `‖v̄ - ṽ‖ > τ` it sets `v̄ ← ṽ`
/// (from the second step on), builds `T̄3` from `v̄` and solves the stacked
/// problem `[T2; T̄3] ṽ ≈ [V2; V3]`. When `max_iter` is reached the iterate
/// with the smallest deviation is returned with `converged = false`.
pub fn run_algorithm1(
    t2: &CMatrix,
    ks: &dyn ThirdHarmonicRows,
    v2: &CVector,
    v3: &CVector,
    config: &SolverConfig,
    mode: LsMode,
) -> Result<QuadraticFitResult> {
    config.validate()?;
    let n = t2.nrows();
    check_len("V2", v2.len(), n)?;
    check_len("V3", v3.len(), n)?;
    check_len("K list", ks.len(), n)?;
    let r = cube_root(t2.ncols()).ok_or_else(|| Error::Dimension(format!("T2 has {} columns, not a cube", t2.ncols())))?;

    let mut vbar = solve_one_step_h2(t2, v2, config.epsilon, mode)?;
    let mut vtilde = VectorizedQ::zeros(r);
    let initial_deviation = (&vbar.v - &vtilde.v).norm();
    let rhs = vcat(v2, v3);

    let mut deviation = initial_deviation;
    let mut trace = Vec::new();
    let mut q = 0usize;
    let mut best: Option<(f64, VectorizedQ)> = None;
    let mut converged = true;
    while deviation > config.tau {
        if q >= config.max_iter {
            converged = false;
            break;
        }
        if q >= 1 {
            vbar = vtilde.clone();
        }
        let t3 = ks.rows(&vbar)?;
        let stacked = vstack(t2, &t3);
        vtilde = VectorizedQ::from_vector(ls_solve(&stacked, &rhs, config.epsilon, mode)?)?;
        q += 1;
        deviation = (&vbar.v - &vtilde.v).norm();
        trace.push(deviation);
        log::debug!("step {q}: deviation {deviation:e}");
        if best.as_ref().is_none_or(|(d, _)| deviation < *d) {
            best = Some((deviation, vtilde.clone()));
        }
    }

    let v_final = if !converged {
        best.map(|(_, v)| v).unwrap_or(vtilde)
    } else if q == 0 {
        vbar
    } else {
        vtilde
    };
    let (residual_h2, residual_h3) = residuals(t2, ks, v2, v3, &v_final)?;
    Ok(QuadraticFitResult {
        q: reshape_vq(&v_final),
        v_q: v_final,
        iterations: q,
        initial_deviation,
        deviation_trace: trace,
        residual_h2,
        residual_h3,
        converged,
    })
}

/// Sum-of-squares residuals of both harmonic fits at `v`.
pub fn residuals(t2: &CMatrix, ks: &dyn ThirdHarmonicRows, v2: &CVector, v3: &CVector, v: &VectorizedQ) -> Result<(f64, f64)> {
    let r2 = (t2 * &v.v - v2).norm_squared();
    let r3 = (ks.rows(v)? * &v.v - v3).norm_squared();
    Ok((r2, r3))
}

/// Symmetric part of the learned operator, as a new fit result view.
pub fn symmetrized(result: &QuadraticFitResult) -> Result<(CMatrix, VectorizedQ)> {
    let q = symmetrize_q(&result.q);
    let v = vectorize_q(&q)?;
    Ok((q, v))
}

/// `q,deviation`, with `q` counting completed steps from 1.
pub fn write_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "q,deviation")?;
    for (i, d) in trace.iter().enumerate() {
        writeln!(f, "{},{}", i + 1, d)?;
    }
    Ok(())
}

/// Real-valued copy of a vector that is known to be real.
pub fn real_vector(v: &CVector) -> DVector<f64> {
    v.map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, J};
    use nalgebra::DMatrix;

    fn scalar_model() -> QuadraticSystem {
        QuadraticSystem::from_real(
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::from_element(1, 1, -1.0),
            &DMatrix::zeros(1, 1),
            &[1.0],
            &[1.0],
        )
        .unwrap()
    }

    #[test]
    fn vectorize_is_column_major() {
        let q = CMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0].map(|x| c(x, 0.0)));
        let v = vectorize_q(&q).unwrap();
        let expected = [1.0, 5.0, 2.0, 6.0, 3.0, 7.0, 4.0, 8.0];
        assert!(v.as_vector().iter().zip(expected).all(|(a, b)| a.re == b));
        assert_eq!(reshape_vq(&v), q);
        let one = vectorize_q(&CMatrix::from_element(1, 1, c(0.25, 0.0))).unwrap();
        assert_eq!(one.as_vector()[0], c(0.25, 0.0));
    }

    #[test]
    fn bad_lengths_rejected() {
        assert!(VectorizedQ::from_vector(CVector::zeros(7)).is_err());
        assert!(vectorize_q(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn t2_scalar_row() {
        let t2 = build_t2(&scalar_model(), &[J]).unwrap();
        // (1/(1+j))² (1/(1+2j)) = -0.2 - 0.1j
        assert!((t2[(0, 0)] - c(-0.2, -0.1)).norm() < 1e-15);
    }

    #[test]
    fn k_scalar_at_zero() {
        let k = build_k(&scalar_model(), c(0.0, 0.0)).unwrap();
        assert_eq!(k.shape(), (1, 1));
        assert!((k[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        let v = CVector::from_element(1, c(0.5, 0.0));
        let h3 = (v.transpose() * &k * &v)[(0, 0)];
        assert!((h3 - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_data_gives_zero_estimates() {
        let model = scalar_model();
        let pts = [J * 0.5, J, J * 2.0];
        let t2 = build_t2(&model, &pts).unwrap();
        let z = CVector::zeros(3);
        let v = solve_one_step_h2(&t2, &z, 0.0, LsMode::RealSplit).unwrap();
        assert_eq!(v, VectorizedQ::zeros(1));
        let ks = FactoredK::new(&model, &pts).unwrap();
        let v3 = solve_one_step_h3(&ks, &VectorizedQ::zeros(1), &z, 0.0, LsMode::RealSplit).unwrap();
        assert_eq!(v3, VectorizedQ::zeros(1));
    }

    #[test]
    fn degenerate_linearization() {
        let model = scalar_model();
        let pts = [J];
        let ks = FactoredK::new(&model, &pts).unwrap();
        let v3 = CVector::from_element(1, c(1.0, 0.0));
        assert!(matches!(
            solve_one_step_h3(&ks, &VectorizedQ::zeros(1), &v3, 0.0, LsMode::Complex),
            Err(Error::DegenerateLinearization)
        ));
    }

    #[test]
    fn zero_operator_converges_immediately() {
        let model = scalar_model();
        let pts: Vec<C64> = [0.3, 1.0, 3.0].iter().map(|&w| J * w).collect();
        let t2 = build_t2(&model, &pts).unwrap();
        let ks = FactoredK::new(&model, &pts).unwrap();
        let z = CVector::zeros(3);
        let res = run_algorithm1(&t2, &ks, &z, &z, &SolverConfig::default(), LsMode::RealSplit).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 1);
        assert!(res.v_q.as_vector().iter().all(|x| *x == c(0.0, 0.0)));
    }

    #[test]
    fn dense_and_factored_rows_agree() {
        let q = DMatrix::from_row_slice(2, 4, &[0.3, 0.1, 0.1, -0.2, 0.05, 0.4, 0.4, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, -1.0, -0.7]);
        let sys = QuadraticSystem::from_real(&DMatrix::identity(2, 2), &a, &q, &[1.0, 0.5], &[1.0, -1.0]).unwrap();
        let pts: Vec<C64> = [0.2, 0.9, 2.5].iter().map(|&w| J * w).collect();
        let dense = DenseK(pts.iter().map(|&s| build_k(&sys, s).unwrap()).collect());
        let fact = FactoredK::new(&sys, &pts).unwrap();
        let v = vectorize_q(sys.q()).unwrap();
        let d = dense.rows(&v).unwrap();
        let f = fact.rows(&v).unwrap();
        assert!((&d - &f).norm() <= 1e-13 * d.norm());
        assert!((fact.t2() - build_t2(&sys, &pts).unwrap()).norm() == 0.0);
    }

    #[test]
    fn solver_config_validation() {
        assert!(SolverConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { epsilon: 1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iter: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
