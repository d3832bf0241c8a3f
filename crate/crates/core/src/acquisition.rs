//! Harmonic data acquisition: closed-form sampling, simulated probing,
//! noise corruption and the benchmark systems.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{HarmonicDataset, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::simulation::Rk4;
use crate::system::QuadraticSystem;

/// Relative change in per-period output energy tolerated at the end of the
/// warm-up.
pub const STEADY_STATE_RTOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub alpha: f64,
    pub periods_transient: usize,
    pub periods_capture: usize,
    pub steps_per_period: usize,
    pub harmonics: usize,
    /// Minimum warm-up duration in seconds; raises `periods_transient` at high
    /// frequencies where a fixed number of periods is too short to settle.
    pub settle_time: f64,
    /// Upper bound on the integration step; raises `steps_per_period` at low
    /// frequencies.
    pub max_step: Option<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            periods_transient: 20,
            periods_capture: 4,
            steps_per_period: 128,
            harmonics: 3,
            settle_time: 0.0,
            max_step: None,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("probe alpha must be positive, got {}", self.alpha)));
        }
        if self.harmonics == 0 {
            return Err(Error::Config("probe harmonics must be at least 1".into()));
        }
        if self.periods_transient == 0 || self.periods_capture == 0 {
            return Err(Error::Config("probe needs at least one warm-up and one capture period".into()));
        }
        if self.steps_per_period < 16 * self.harmonics {
            return Err(Error::Config(format!(
                "steps_per_period = {} is below 16 * harmonics = {}",
                self.steps_per_period,
                16 * self.harmonics
            )));
        }
        if !(self.settle_time >= 0.0 && self.settle_time.is_finite()) {
            return Err(Error::Config("settle_time must be finite and non-negative".into()));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config("max_step must be positive".into()));
            }
        }
        Ok(())
    }

    /// Warm-up periods and steps per period actually used at `omega`.
    pub fn schedule(&self, omega: f64) -> (usize, usize) {
        let period = 2.0 * PI / omega;
        let warm = self.periods_transient.max((self.settle_time / period).ceil() as usize);
        let steps = match self.max_step {
            Some(h) => self.steps_per_period.max((period / h).ceil() as usize),
            None => self.steps_per_period,
        };
        (warm, steps)
    }
}

/// Gaussian corruption at a given signal-to-noise ratio. An infinite
/// `snr_db` disables the noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

/// `N` logarithmically spaced frequencies in `[a, b]`, endpoints exact.
pub fn log_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a > 0.0) || !(b > a) || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("log grid needs 0 < a < b, got a = {a}, b = {b}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("log grid needs at least two points, got {n}")));
    }
    let (la, lb) = (a.log10(), b.log10());
    let mut out: Vec<f64> = (0..n).map(|k| 10f64.powf(la + (lb - la) * k as f64 / (n - 1) as f64)).collect();
    out[0] = a;
    out[n - 1] = b;
    Ok(out)
}

/// Closed-form samples of the requested levels at `jω` for each `ω`.
pub fn sample_direct(sys: &QuadraticSystem, omegas: &[f64], levels: &[usize]) -> Result<HarmonicDataset> {
    for &m in levels {
        if !(1..=3).contains(&m) {
            return Err(Error::InvalidArgument(format!("transfer function level {m} not in 1..=3")));
        }
    }
    let rows = omegas.par_iter().map(|&w| sys.eval_all(C64::new(0.0, w))).collect::<Result<Vec<_>>>()?;
    let mut out: [Option<Vec<C64>>; 3] = Default::default();
    for &m in levels {
        out[m - 1] = Some(rows.iter().map(|h| h[m - 1]).collect());
    }
    HarmonicDataset::new(omegas.to_vec(), out, Provenance::Direct)
}

/// Estimates `H_1(jω), ..., H_M(jω)` from the steady-state response to
/// `u(t) = α e^{jωt}` started at rest, with `M = cfg.harmonics`.
pub fn probe_harmonics(sys: &QuadraticSystem, omega: f64, cfg: &ProbeConfig) -> Result<Vec<C64>> {
    cfg.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("probe frequency must be positive, got {omega}")));
    }
    let (warm, spp) = cfg.schedule(omega);
    let period = 2.0 * PI / omega;
    let dt = period / spp as f64;
    let total = warm + cfg.periods_capture;
    let alpha = cfg.alpha;
    let input = move |t: f64| C64::from_polar(alpha, omega * t);

    // output samples of the last warm-up period and the capture window
    let keep_from = (warm - 1) * spp;
    let mut ys: Vec<C64> = Vec::with_capacity((cfg.periods_capture + 1) * spp);
    let c = sys.c().clone();
    Rk4::new(sys).run(&CVector::zeros(sys.n()), 0.0, dt, total * spp - 1, &input, |k, _, x| {
        if k >= keep_from {
            ys.push(c.dot(x));
        }
    })?;

    let energy = |chunk: &[C64]| chunk.iter().map(|y| y.norm_sqr()).sum::<f64>();
    let last = energy(&ys[ys.len() - spp..]);
    let prev = energy(&ys[ys.len() - 2 * spp..ys.len() - spp]);
    let change = (last - prev).abs() / last.max(f64::MIN_POSITIVE);
    if change > STEADY_STATE_RTOL {
        return Err(Error::NonConvergedTransient { omega, change });
    }

    let capture = &ys[spp..];
    let t_start = (warm * spp) as f64 * dt;
    let count = capture.len() as f64;
    Ok((1..=cfg.harmonics)
        .map(|m| {
            let z: C64 = capture
                .iter()
                .enumerate()
                .map(|(k, y)| y * C64::from_polar(1.0, -(m as f64) * omega * (t_start + k as f64 * dt)))
                .sum::<C64>()
                / count;
            z / alpha.powi(m as i32)
        })
        .collect())
}

/// Probes every grid frequency in parallel. The dataset holds the levels
/// `1..=min(harmonics, 3)`.
pub fn probe_dataset(sys: &QuadraticSystem, omegas: &[f64], cfg: &ProbeConfig) -> Result<HarmonicDataset> {
    cfg.validate()?;
    let rows = omegas
        .par_iter()
        .enumerate()
        .map(|(index, &omega)| {
            probe_harmonics(sys, omega, cfg).map_err(|e| Error::Acquisition { index, omega, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut levels: [Option<Vec<C64>>; 3] = Default::default();
    for (m, level) in levels.iter_mut().enumerate().take(cfg.harmonics.min(3)) {
        *level = Some(rows.iter().map(|r| r[m]).collect());
    }
    HarmonicDataset::new(omegas.to_vec(), levels, Provenance::Probed)
}

/// Adds complex Gaussian noise to every present level. Each level gets a
/// common standard deviation chosen so that the aggregate signal-to-noise
/// energy ratio equals `snr_db` in expectation. Levels are processed in
/// order from one seeded stream.
pub fn add_noise(ds: &HarmonicDataset, spec: &NoiseSpec) -> HarmonicDataset {
    if spec.snr_db.is_infinite() && spec.snr_db > 0.0 {
        return ds.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = ds.clone();
    for level in out.levels.iter_mut().flatten() {
        let mean_power = level.iter().map(|z| z.norm_sqr()).sum::<f64>() / level.len().max(1) as f64;
        // real and imaginary parts each carry half the noise power
        let sd = (mean_power / 10f64.powf(spec.snr_db / 10.0) / 2.0).sqrt();
        for z in level.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += C64::new(sd * re, sd * im);
        }
    }
    out.provenance = Provenance::Noisy;
    out
}

/// Two-state benchmark with an oscillatory linear part.
pub fn make_toy_system() -> QuadraticSystem {
    let e = DMatrix::identity(2, 2);
    let a = DMatrix::from_row_slice(2, 2, &[-0.03, -2.0, 2.0, -0.05]);
    let q = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0]);
    QuadraticSystem::from_real(&e, &a, &q, &[1.0, 1.0], &[1.0, 0.0])
        .and_then(|s| s.with_symmetric(true))
        .expect("toy system is well formed")
}

/// Viscous Burgers equation on `(0, 1)` discretized by central differences on
/// `n` interior nodes. The input drives the left boundary value, the right
/// boundary is held at zero and the output is the spatial mean.
pub fn make_burgers_system(n: usize, viscosity: f64, boundary_gain: f64) -> Result<QuadraticSystem> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("Burgers discretization needs n >= 3, got {n}")));
    }
    if !(viscosity > 0.0 && viscosity.is_finite()) || !boundary_gain.is_finite() {
        return Err(Error::InvalidArgument("viscosity must be positive and the gain finite".into()));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let diff = viscosity / (h * h);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = -2.0 * diff;
        if i > 0 {
            a[(i, i - 1)] = diff;
        }
        if i + 1 < n {
            a[(i, i + 1)] = diff;
        }
    }
    // -v_i (v_{i+1} - v_{i-1}) / (2h), split evenly over the (i, k) and (k, i) columns
    let half = -1.0 / (4.0 * h);
    let mut q = DMatrix::zeros(n, n * n);
    for i in 0..n {
        if i + 1 < n {
            q[(i, i * n + i + 1)] += half;
            q[(i, (i + 1) * n + i)] += half;
        }
        if i > 0 {
            q[(i, i * n + i - 1)] -= half;
            q[(i, (i - 1) * n + i)] -= half;
        }
    }
    let mut b = vec![0.0; n];
    b[0] = boundary_gain * diff;
    let c = vec![1.0 / n as f64; n];
    QuadraticSystem::from_real(&DMatrix::identity(n, n), &a, &q, &b, &c)?.with_symmetric(true)
}
