//! Fixed-step time integration of quadratic systems and output-error metrics.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::system::QuadraticSystem;

/// States with a component above this magnitude abort the simulation.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Uniformly sampled signal `values[k] = y(t0 + k dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<C64>,
}

impl TimeSignal {
    pub fn new(t0: f64, dt: f64, values: Vec<C64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidArgument("a time signal needs at least two samples".into()));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    /// `t,re_y,im_y`, or `t,re_y` when every sample is real.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let real = self.is_real();
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{}", if real { "t,re_y" } else { "t,re_y,im_y" })?;
        for (k, y) in self.values.iter().enumerate() {
            if real {
                writeln!(f, "{},{}", self.time(k), y.re)?;
            } else {
                writeln!(f, "{},{},{}", self.time(k), y.re, y.im)?;
            }
        }
        f.flush()?;
        Ok(())
    }
}

/// Classical RK4 stepper for `E x' = A x + Q(x⊗x) + B u`.
pub struct Rk4<'a> {
    sys: &'a QuadraticSystem,
    e_lu: Option<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> Rk4<'a> {
    /// Factorizes `E` once; identity descriptors skip the solve entirely.
    pub fn new(sys: &'a QuadraticSystem) -> Self {
        let e_lu = (!sys.e_is_identity()).then(|| sys.e().clone().lu());
        Self { sys, e_lu }
    }

    fn f(&self, x: &CVector, u: C64) -> CVector {
        let rhs = self.sys.rhs_unscaled(x, u);
        match &self.e_lu {
            None => rhs,
            // E was checked invertible at construction
            Some(lu) => lu.solve(&rhs).expect("E is invertible"),
        }
    }

    /// One step from `t` to `t + dt`.
    pub fn step(&self, x: &CVector, t: f64, dt: f64, input: &dyn Fn(f64) -> C64) -> CVector {
        let half = C64::new(0.5 * dt, 0.0);
        let full = C64::new(dt, 0.0);
        let u0 = input(t);
        let um = input(t + 0.5 * dt);
        let u1 = input(t + dt);
        let k1 = self.f(x, u0);
        let k2 = self.f(&(x + &k1 * half), um);
        let k3 = self.f(&(x + &k2 * half), um);
        let k4 = self.f(&(x + &k3 * full), u1);
        x + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
    }

    /// Runs `steps` steps from `x0` at `t0`, calling `observe(k, t_k, x_k)` for
    /// every grid point including the initial one.
    pub fn run(
        &self,
        x0: &CVector,
        t0: f64,
        dt: f64,
        steps: usize,
        input: &dyn Fn(f64) -> C64,
        mut observe: impl FnMut(usize, f64, &CVector),
    ) -> Result<CVector> {
        if x0.len() != self.sys.n() {
            return Err(Error::Dimension(format!("initial state has length {}, system has n = {}", x0.len(), self.sys.n())));
        }
        let mut x = x0.clone();
        observe(0, t0, &x);
        for k in 0..steps {
            let t = t0 + k as f64 * dt;
            x = self.step(&x, t, dt, input);
            let tn = t0 + (k + 1) as f64 * dt;
            if x.iter().any(|z| !(z.norm() <= OVERFLOW_GUARD)) {
                return Err(Error::UnstableSimulation(tn));
            }
            observe(k + 1, tn, &x);
        }
        Ok(x)
    }
}

/// Integrates over `t_span = (t0, t1)` with fixed step `dt` and returns the
/// output `y = C x` on the grid. `t1 - t0` is rounded to a whole number of
/// steps.
pub fn integrate(
    sys: &QuadraticSystem,
    input: &dyn Fn(f64) -> C64,
    x0: &CVector,
    t_span: (f64, f64),
    dt: f64,
) -> Result<TimeSignal> {
    let (t0, t1) = t_span;
    if !(dt > 0.0) || !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("invalid time grid t = [{t0}, {t1}], dt = {dt}")));
    }
    let steps = ((t1 - t0) / dt).round() as usize;
    if steps == 0 {
        return Err(Error::InvalidArgument("time span shorter than one step".into()));
    }
    let mut ys = Vec::with_capacity(steps + 1);
    let c = sys.c().clone();
    Rk4::new(sys).run(x0, t0, dt, steps, input, |_, _, x| ys.push(c.dot(x)))?;
    TimeSignal::new(t0, dt, ys)
}

/// `u(t) = cos(t) e^{-0.1 t}`.
pub fn validation_input(t: f64) -> f64 {
    t.cos() * (-0.1 * t).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputError {
    pub pointwise: Vec<f64>,
    /// `sqrt(dt Σ |e_k|²)`.
    pub l2: f64,
    pub linf: f64,
}

pub fn output_error(y_ref: &TimeSignal, y_hat: &TimeSignal) -> Result<OutputError> {
    let same_grid = y_ref.len() == y_hat.len()
        && (y_ref.t0 - y_hat.t0).abs() <= 1e-12 * y_ref.t0.abs().max(1.0)
        && (y_ref.dt - y_hat.dt).abs() <= 1e-12 * y_ref.dt;
    if !same_grid {
        return Err(Error::Dimension(format!(
            "time grids differ: ({}, {}, {}) vs ({}, {}, {})",
            y_ref.t0,
            y_ref.dt,
            y_ref.len(),
            y_hat.t0,
            y_hat.dt,
            y_hat.len()
        )));
    }
    let pointwise: Vec<f64> = y_ref.values.iter().zip(&y_hat.values).map(|(a, b)| (a - b).norm()).collect();
    let l2 = (y_ref.dt * pointwise.iter().map(|e| e * e).sum::<f64>()).sqrt();
    let linf = pointwise.iter().copied().fold(0.0, f64::max);
    Ok(OutputError { pointwise, l2, linf })
}
