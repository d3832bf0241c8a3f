//! Loewner-framework fit of the linear part.
//!
//! First-transfer-function samples are split into right `(λ_i, w_i)` and left
//! `(μ_j, v_j)` data, assembled into the Loewner pencil `(𝕃, 𝕃s)`, optionally
//! transformed to real arithmetic, truncated by SVD and projected to an
//! E-normalized state-space model `(Ã, B̃, C̃)`.

use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_imag, svd, CMatrix, CVector, C64};
use crate::system::QuadraticSystem;

/// Relative tolerance for recognizing a conjugate pair of values.
const CONJ_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationData {
    right: Vec<(C64, C64)>,
    left: Vec<(C64, C64)>,
}

impl InterpolationData {
    /// Right data `(λ_i, w_i)` and left data `(μ_j, v_j)`, both of length `k`.
    ///
    /// Duplicate points within one side are rejected. Overlap between the two
    /// sides is reported when the pencil is built.
    pub fn new(right: Vec<(C64, C64)>, left: Vec<(C64, C64)>) -> Result<Self> {
        if right.len() != left.len() {
            return Err(Error::Dimension(format!(
                "right data has {} points, left data has {}",
                right.len(),
                left.len()
            )));
        }
        if right.is_empty() {
            return Err(Error::InvalidArgument("empty interpolation data".into()));
        }
        for side in [&right, &left] {
            for (i, (p, _)) in side.iter().enumerate() {
                if side[..i].iter().any(|(q, _)| q == p) {
                    return Err(Error::DuplicatePoint(format!("{p}")));
                }
            }
        }
        Ok(Self { right, left })
    }

    pub fn right(&self) -> &[(C64, C64)] {
        &self.right
    }
    pub fn left(&self) -> &[(C64, C64)] {
        &self.left
    }
    pub fn k(&self) -> usize {
        self.right.len()
    }
}

/// How conjugate groups are distributed between the right and left sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    /// Group 1 → right, group 2 → left, group 3 → right, ...
    #[default]
    Interleaved,
    /// First half of the groups (in input order) → right, second half → left.
    Halves,
}

/// Splits samples into conjugate groups (a real point, or a point followed by
/// its conjugate) and distributes the groups between the two sides. When the
/// group count is odd the last group is dropped and returned separately.
pub fn partition_samples(
    points: &[C64],
    values: &[C64],
    strategy: Partition,
) -> Result<(InterpolationData, Vec<(C64, C64)>)> {
    if points.len() != values.len() {
        return Err(Error::Dimension(format!("{} points but {} values", points.len(), values.len())));
    }
    for (i, p) in points.iter().enumerate() {
        if points[..i].contains(p) {
            return Err(Error::DuplicatePoint(format!("{p}")));
        }
    }
    let mut used = vec![false; points.len()];
    let mut groups: Vec<Vec<(C64, C64)>> = Vec::new();
    for i in 0..points.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut group = vec![(points[i], values[i])];
        if points[i].im != 0.0 {
            let partner = (i + 1..points.len()).find(|&j| !used[j] && points[j] == points[i].conj());
            if let Some(j) = partner {
                used[j] = true;
                group.push((points[j], values[j]));
            }
        }
        groups.push(group);
    }

    let mut dropped = Vec::new();
    if groups.len() % 2 == 1 {
        let last = groups.pop().expect("odd count is nonzero");
        warn!("odd number of sample groups; dropping the last ({} sample(s) at {})", last.len(), last[0].0);
        dropped = last;
    }
    let half = groups.len() / 2;
    let mut right = Vec::new();
    let mut left = Vec::new();
    for (g, group) in groups.into_iter().enumerate() {
        let to_right = match strategy {
            Partition::Interleaved => g % 2 == 0,
            Partition::Halves => g < half,
        };
        if to_right {
            right.extend(group);
        } else {
            left.extend(group);
        }
    }
    if right.len() != left.len() {
        return Err(Error::InvalidArgument(format!(
            "partition is unbalanced ({} right vs {} left); mix of real and complex points",
            right.len(),
            left.len()
        )));
    }
    Ok((InterpolationData::new(right, left)?, dropped))
}

/// Conjugate-closed samples `(±jω, H, conj H)` of a real system, in the order
/// `jω_1, -jω_1, jω_2, -jω_2, ...`.
pub fn conjugate_closed_samples(omegas: &[f64], values: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let mut pts = Vec::with_capacity(2 * omegas.len());
    let mut vals = Vec::with_capacity(2 * omegas.len());
    for (&w, &h) in omegas.iter().zip(values) {
        pts.push(C64::new(0.0, w));
        pts.push(C64::new(0.0, -w));
        vals.push(h);
        vals.push(h.conj());
    }
    (pts, vals)
}

#[derive(Clone, Debug)]
pub struct LoewnerPencil {
    /// Loewner matrix 𝕃.
    pub l: CMatrix,
    /// Shifted Loewner matrix 𝕃s.
    pub ls: CMatrix,
    /// Left values 𝕍 (column).
    pub v: CVector,
    /// Right values 𝕎 (stored as a column, used as a row).
    pub w: CVector,
    pub data: InterpolationData,
    /// Set once the pencil has been mapped to real arithmetic.
    pub realified: bool,
}

pub fn build_pencil(data: &InterpolationData) -> Result<LoewnerPencil> {
    let k = data.k();
    let mut l = CMatrix::zeros(k, k);
    let mut ls = CMatrix::zeros(k, k);
    for (i, &(mu, vi)) in data.left.iter().enumerate() {
        for (j, &(lam, wj)) in data.right.iter().enumerate() {
            let den = mu - lam;
            if den == C64::new(0.0, 0.0) {
                return Err(Error::ZeroDenominator { i, j });
            }
            l[(i, j)] = (vi - wj) / den;
            ls[(i, j)] = (mu * vi - lam * wj) / den;
        }
    }
    Ok(LoewnerPencil {
        l,
        ls,
        v: CVector::from_iterator(k, data.left.iter().map(|p| p.1)),
        w: CVector::from_iterator(k, data.right.iter().map(|p| p.1)),
        data: data.clone(),
        realified: false,
    })
}

/// Block-unitary transform that maps every adjacent pair `(z, z̄)` to
/// `(√2 Re z, √2 Im z)`; real points map to themselves.
pub fn realification_transform(side: &[(C64, C64)]) -> Result<CMatrix> {
    let k = side.len();
    let mut p = CMatrix::zeros(k, k);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut i = 0;
    while i < k {
        let (z, hz) = side[i];
        if z.im == 0.0 {
            if hz.im.abs() > CONJ_RTOL * hz.norm().max(f64::MIN_POSITIVE) {
                return Err(Error::NotConjugateClosed(format!("complex value {hz} at real point {z}")));
            }
            p[(i, i)] = C64::new(1.0, 0.0);
            i += 1;
            continue;
        }
        if i + 1 >= k || side[i + 1].0 != z.conj() {
            return Err(Error::NotConjugateClosed(format!("point {z} is not followed by its conjugate")));
        }
        let hz2 = side[i + 1].1;
        if (hz2 - hz.conj()).norm() > CONJ_RTOL * hz.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotConjugateClosed(format!("values at {z} and its conjugate are not conjugate")));
        }
        p[(i, i)] = C64::new(h, 0.0);
        p[(i, i + 1)] = C64::new(h, 0.0);
        p[(i + 1, i)] = C64::new(0.0, -h);
        p[(i + 1, i + 1)] = C64::new(0.0, h);
        i += 2;
    }
    Ok(p)
}

/// Maps a conjugate-closed pencil to an equivalent real one.
pub fn realify_pencil(p: &LoewnerPencil) -> Result<LoewnerPencil> {
    let pl = realification_transform(&p.data.left)?;
    let pr = realification_transform(&p.data.right)?;
    let prh = pr.adjoint();
    let l = &pl * &p.l * &prh;
    let ls = &pl * &p.ls * &prh;
    let v = &pl * &p.v;
    let w = (p.w.transpose() * &prh).transpose();

    let drop_imag = |m: CMatrix, what: &str| -> Result<CMatrix> {
        let scale = max_abs(&m).max(f64::MIN_POSITIVE);
        let im = max_imag(&m);
        if im > 1e-12 * scale {
            return Err(Error::NotConjugateClosed(format!("{what} keeps imaginary part {im:e} after transform")));
        }
        Ok(m.map(|z| C64::new(z.re, 0.0)))
    };
    Ok(LoewnerPencil {
        l: drop_imag(l, "L")?,
        ls: drop_imag(ls, "Ls")?,
        v: drop_imag(CMatrix::from_column_slice(v.len(), 1, v.as_slice()), "V")?.column(0).into_owned(),
        w: drop_imag(CMatrix::from_column_slice(w.len(), 1, w.as_slice()), "W")?.column(0).into_owned(),
        data: p.data.clone(),
        realified: true,
    })
}

fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn vstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// `(U, σ, V)` of a pencil block, computed in real arithmetic when possible.
fn svd_full(m: &CMatrix, real: bool) -> (CMatrix, Vec<f64>, CMatrix) {
    if real {
        let svd = svd(&m.map(|z| z.re), true, true);
        let u = svd.u.expect("u requested").map(|x| C64::new(x, 0.0));
        let v = svd.v_t.expect("v_t requested").transpose().map(|x| C64::new(x, 0.0));
        (u, svd.singular_values.iter().copied().collect(), v)
    } else {
        let svd = svd(m, true, true);
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v_t requested").adjoint();
        (u, svd.singular_values.iter().copied().collect(), v)
    }
}

/// Singular values of `[𝕃, 𝕃s]` and the order `r` = number of normalized
/// values `σ_i / σ_1 ≥ threshold`.
pub fn svd_order_select(p: &LoewnerPencil, threshold: f64) -> Result<(usize, Vec<f64>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1]")));
    }
    let m = hstack(&p.l, &p.ls);
    let sigma = if p.realified {
        crate::linalg::singular_values(&m.map(|z| z.re))
    } else {
        crate::linalg::singular_values(&m)
    };
    let s1 = sigma.first().copied().unwrap_or(0.0);
    if !(s1 > 0.0) {
        return Err(Error::ZeroPencil);
    }
    let r = sigma.iter().filter(|&&s| s / s1 >= threshold).count();
    Ok((r, sigma))
}

/// E-normalized reduced linear model `(Ã, B̃, C̃)` with identity descriptor.
#[derive(Clone, Debug)]
pub struct ReducedLinearModel {
    pub a: CMatrix,
    pub b: CVector,
    /// Output row, stored as a column.
    pub c: CVector,
    /// Singular values from the truncation step (empty when not from data).
    pub singular_values: Vec<f64>,
}

impl ReducedLinearModel {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.a.iter().chain(self.b.iter()).chain(self.c.iter()).all(|z| z.im == 0.0)
    }

    /// As a quadratic system with `E = I` and `Q = 0`.
    pub fn to_system(&self) -> Result<QuadraticSystem> {
        let r = self.order();
        QuadraticSystem::new(CMatrix::identity(r, r), self.a.clone(), CMatrix::zeros(r, r * r), self.b.clone(), self.c.clone())
    }

    /// Linear part of a known system, E-normalized.
    pub fn from_system(sys: &QuadraticSystem) -> Result<Self> {
        let lu = sys.e().clone().lu();
        let a = lu.solve(sys.a()).ok_or(Error::SingularDescriptor)?;
        let b = lu.solve(sys.b()).ok_or(Error::SingularDescriptor)?;
        Ok(Self { a, b, c: sys.c().clone(), singular_values: Vec::new() })
    }

    pub fn eval_h1(&self, s: C64) -> Result<C64> {
        self.to_system()?.eval_h1(s)
    }
}

/// Projects the pencil onto the leading `r` singular directions and
/// normalizes the descriptor:
/// `Ê = -X*𝕃Y, Â = -X*𝕃sY, B̂ = X*𝕍, Ĉ = 𝕎Y`, then `Ã = Ê⁻¹Â, B̃ = Ê⁻¹B̂, C̃ = Ĉ`.
pub fn project_and_normalize(p: &LoewnerPencil, r: usize) -> Result<ReducedLinearModel> {
    let k = p.data.k();
    if r == 0 || r > k {
        return Err(Error::InvalidArgument(format!("order {r} outside 1..={k}")));
    }
    let (x, sigma, _) = svd_full(&hstack(&p.l, &p.ls), p.realified);
    let (_, _, y) = svd_full(&vstack(&p.l, &p.ls), p.realified);
    let xr = x.columns(0, r).into_owned();
    let yr = y.columns(0, r).into_owned();
    let xh = xr.adjoint();

    let e_hat = -(&xh * &p.l * &yr);
    let a_hat = -(&xh * &p.ls * &yr);
    let b_hat = &xh * &p.v;
    let c_hat = (p.w.transpose() * &yr).transpose();

    let lu = e_hat.clone().lu();
    let u = lu.u();
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for i in 0..r {
        dmin = dmin.min(u[(i, i)].norm());
        dmax = dmax.max(u[(i, i)].norm());
    }
    if !(dmax > 0.0) || dmin <= 1e-13 * dmax {
        return Err(Error::SingularE(r));
    }
    let a = lu.solve(&a_hat).ok_or(Error::SingularE(r))?;
    let b = lu.solve(&b_hat).ok_or(Error::SingularE(r))?;
    let mut model = ReducedLinearModel { a, b, c: c_hat, singular_values: sigma };
    if p.realified {
        model.a = model.a.map(|z| C64::new(z.re, 0.0));
        model.b = model.b.map(|z| C64::new(z.re, 0.0));
        model.c = model.c.map(|z| C64::new(z.re, 0.0));
    }
    Ok(model)
}

/// [`project_and_normalize`] that lowers `r` by one on a singular projected
/// descriptor, at most twice.
pub fn project_with_retry(p: &LoewnerPencil, r: usize) -> Result<ReducedLinearModel> {
    let mut order = r;
    let mut attempts = 0;
    loop {
        match project_and_normalize(p, order) {
            Err(Error::SingularE(_)) if attempts < 2 && order > 1 => {
                warn!("projected descriptor singular at r = {order}; retrying with r = {}", order - 1);
                order -= 1;
                attempts += 1;
            }
            other => return other,
        }
    }
}

/// `index,sigma,sigma_normalized`, 1-based index.
pub fn write_singular_values_csv(path: &Path, sigma: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "index,sigma,sigma_normalized")?;
    let s1 = sigma.first().copied().unwrap_or(1.0);
    for (i, s) in sigma.iter().enumerate() {
        writeln!(f, "{},{},{}", i + 1, s, s / s1)?;
    }
    Ok(())
}

/// Real part of a complex matrix, for callers that know the model is real.
pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}
