//! End-to-end experiments: data generation, learning, validation and
//! reporting, with every artifact written to one run directory.
//!
//! Run directory layout:
//!
//! | file | written by |
//! |---|---|
//! | `config.resolved.json` | every command |
//! | `dataset.csv`, `dataset.meta.json`, `reference_system.json` | generate |
//! | `harmonic_errors.csv` | generate (probe mode) |
//! | `model.json`, `linear_model.json`, `singular_values.csv`, `trace.csv`, `learn_summary.json` | learn |
//! | `dense_errors.csv`, `fit_triples.csv`, `traj_*.csv`, `traj_errors.csv`, `validate_summary.json` | validate |
//! | `report.json` | report |

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{self, NoiseSpec, ProbeConfig};
use crate::dataset::{HarmonicDataset, Provenance};
use crate::error::{Error, Result};
use crate::inference::{self, FactoredK, LsMode, QuadraticFitResult, SolverConfig, VectorizedQ};
use crate::io::{read_system, write_system};
use crate::linalg::{norm2, CVector, C64};
use crate::loewner::{self, Partition, ReducedLinearModel};
use crate::simulation::{self, OutputError, TimeSignal};
use crate::system::QuadraticSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSource {
    Toy,
    Burgers { n: usize, viscosity: f64, boundary_gain: f64 },
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionMode {
    #[default]
    Direct,
    Probe,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub mode: AcquisitionMode,
    /// Used only in probe mode.
    pub probe: ProbeConfig,
}

/// Where the linear part of the learned model comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSource {
    /// Loewner fit of the first-harmonic samples.
    #[default]
    Data,
    /// Linear part of the reference system, kept in its own coordinates.
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoewnerConfig {
    /// Relative singular-value threshold for order selection.
    pub threshold: Option<f64>,
    /// Fixed order; overrides the threshold.
    pub order: Option<usize>,
    pub partition: Partition,
    pub linear_source: LinearSource,
}

impl Default for LoewnerConfig {
    fn default() -> Self {
        Self { threshold: Some(1e-3), order: None, partition: Partition::Interleaved, linear_source: LinearSource::Data }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationInput {
    /// `cos(t) e^{-0.1 t}`.
    #[default]
    CosDecay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub input: ValidationInput,
    /// Scale applied to the validation input.
    pub amplitude: f64,
    pub t_end: f64,
    pub dt: f64,
    pub dense_points: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { input: ValidationInput::CosDecay, amplitude: 1.0, t_end: 15.0, dt: 1e-3, dense_points: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSource,
    pub grid: GridConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub loewner: LoewnerConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    /// Stop after the second-harmonic least-squares estimate.
    #[serde(default)]
    pub one_step: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates a config file. Relative system-file paths are
    /// resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let SystemSource::File { path: p } = &mut cfg.system {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let SystemSource::Burgers { n, viscosity, boundary_gain } = self.system {
            if n < 3 || !(viscosity > 0.0) || !boundary_gain.is_finite() {
                return Err(Error::Config("burgers needs n >= 3, viscosity > 0 and a finite gain".into()));
            }
        }
        let g = self.grid;
        if !(g.a > 0.0) || !(g.b > g.a) || !g.b.is_finite() || g.n < 2 {
            return Err(Error::Config(format!("grid needs 0 < a < b and n >= 2, got {g:?}")));
        }
        if self.acquisition.mode == AcquisitionMode::Probe {
            self.acquisition.probe.validate()?;
        }
        if let Some(noise) = &self.noise {
            if noise.snr_db.is_nan() {
                return Err(Error::Config("noise snr_db is NaN".into()));
            }
        }
        match (self.loewner.threshold, self.loewner.order) {
            (_, Some(0)) => return Err(Error::Config("loewner order must be positive".into())),
            (Some(t), None) if !(t > 0.0 && t <= 1.0) => {
                return Err(Error::Config(format!("loewner threshold {t} outside (0, 1]")))
            }
            (None, None) => return Err(Error::Config("loewner needs a threshold or an order".into())),
            _ => {}
        }
        self.solver.validate()?;
        let v = &self.validation;
        if !(v.dt > 0.0) || !(v.t_end > v.dt) || v.dense_points < 2 || !v.amplitude.is_finite() {
            return Err(Error::Config(
                "validation needs dt > 0, t_end > dt, a finite amplitude and at least two dense points".into(),
            ));
        }
        Ok(())
    }

    pub fn reference_system(&self) -> Result<QuadraticSystem> {
        match &self.system {
            SystemSource::Toy => Ok(acquisition::make_toy_system()),
            SystemSource::Burgers { n, viscosity, boundary_gain } => {
                acquisition::make_burgers_system(*n, *viscosity, *boundary_gain)
            }
            SystemSource::File { path } => read_system(path),
        }
    }

    pub fn omegas(&self) -> Result<Vec<f64>> {
        acquisition::log_grid(self.grid.a, self.grid.b, self.grid.n)
    }

    pub fn dense_omegas(&self) -> Result<Vec<f64>> {
        acquisition::log_grid(self.grid.a, self.grid.b, self.validation.dense_points)
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("config.resolved.json"), self)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format { path: path.display().to_string(), msg: e.to_string() })
}

/// Samples all three levels with the configured acquisition and noise.
pub fn generate_dataset(cfg: &ExperimentConfig, reference: &QuadraticSystem) -> Result<HarmonicDataset> {
    let omegas = cfg.omegas()?;
    let ds = match cfg.acquisition.mode {
        AcquisitionMode::Direct => acquisition::sample_direct(reference, &omegas, &[1, 2, 3])?,
        AcquisitionMode::Probe => {
            let probe = ProbeConfig { harmonics: cfg.acquisition.probe.harmonics.max(3), ..cfg.acquisition.probe.clone() };
            acquisition::probe_dataset(reference, &omegas, &probe)?
        }
    };
    Ok(match &cfg.noise {
        Some(spec) => acquisition::add_noise(&ds, spec),
        None => ds,
    })
}

/// Loewner fit of the first-harmonic samples: the reduced linear model and
/// the singular values of the pencil.
pub fn fit_linear(ds: &HarmonicDataset, cfg: &LoewnerConfig) -> Result<(ReducedLinearModel, Vec<f64>)> {
    let (pts, vals) = loewner::conjugate_closed_samples(&ds.omegas, ds.level(1)?);
    let (data, _) = loewner::partition_samples(&pts, &vals, cfg.partition)?;
    let pencil = loewner::realify_pencil(&loewner::build_pencil(&data)?)?;
    let (r, sigma) = match (cfg.order, cfg.threshold) {
        (Some(r), _) => (r, loewner::svd_order_select(&pencil, 1.0)?.1),
        (None, Some(t)) => loewner::svd_order_select(&pencil, t)?,
        (None, None) => return Err(Error::Config("loewner needs a threshold or an order".into())),
    };
    let mut model = loewner::project_with_retry(&pencil, r)?;
    model.singular_values = sigma.clone();
    Ok((model, sigma))
}

#[derive(Clone, Debug)]
pub struct LearnOutcome {
    pub linear: ReducedLinearModel,
    pub singular_values: Vec<f64>,
    /// Second-harmonic least-squares estimate.
    pub one_step: VectorizedQ,
    /// Coupled-iteration result; `None` in one-step mode.
    pub fit: Option<QuadraticFitResult>,
    /// Linear model completed with the learned quadratic operator.
    pub model: QuadraticSystem,
}

impl LearnOutcome {
    pub fn order(&self) -> usize {
        self.linear.order()
    }

    pub fn converged(&self) -> bool {
        self.fit.as_ref().is_none_or(|f| f.converged)
    }
}

/// Settings for [`learn`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearnOptions {
    pub loewner: LoewnerConfig,
    pub solver: SolverConfig,
    pub one_step: bool,
}

impl ExperimentConfig {
    pub fn learn_options(&self) -> LearnOptions {
        LearnOptions { loewner: self.loewner.clone(), solver: self.solver, one_step: self.one_step }
    }
}

/// Fits the linear part, then the quadratic operator.
pub fn learn(ds: &HarmonicDataset, cfg: &LearnOptions, reference: Option<&QuadraticSystem>) -> Result<LearnOutcome> {
    cfg.solver.validate()?;
    let (data_linear, sigma) = fit_linear(ds, &cfg.loewner)?;
    let linear = match cfg.loewner.linear_source {
        LinearSource::Data => data_linear,
        LinearSource::Reference => {
            let sys = reference.ok_or_else(|| Error::Config("linear_source = reference needs a reference system".into()))?;
            let mut m = ReducedLinearModel::from_system(sys)?;
            m.singular_values = sigma.clone();
            m
        }
    };
    let lin_sys = linear.to_system()?;
    let mode = if linear.is_real() { LsMode::RealSplit } else { LsMode::Complex };
    let points = ds.points();
    let rows = FactoredK::new(&lin_sys, &points)?;
    let t2 = rows.t2();
    let v2 = ds.level_vector(2)?;
    let one_step = inference::solve_one_step_h2(&t2, &v2, cfg.solver.epsilon, mode)?;
    let (fit, vq) = if cfg.one_step {
        (None, one_step.clone())
    } else {
        let v3 = ds.level_vector(3)?;
        let fit = inference::run_algorithm1(&t2, &rows, &v2, &v3, &cfg.solver, mode)?;
        let v = fit.v_q.clone();
        (Some(fit), v)
    };
    let model = lin_sys.with_q(inference::reshape_vq(&vq))?;
    Ok(LearnOutcome { linear, singular_values: sigma, one_step, fit, model })
}

/// `R²` of a least-squares line through `(q, log10 deviation)`; `None` for
/// fewer than three positive values.
pub fn log_linear_r2(trace: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        trace.iter().enumerate().filter(|(_, d)| **d > 0.0).map(|(i, d)| (i as f64, d.log10())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return Some(1.0);
    }
    let slope = sxy / sxx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Some(1.0 - ss_res / syy)
}

/// `|H_m^ref(jω) - H_m^model(jω)|` for `m = 1, 2, 3` at every `ω`.
pub fn dense_grid_errors(reference: &QuadraticSystem, model: &QuadraticSystem, omegas: &[f64]) -> Result<Vec<[f64; 3]>> {
    omegas
        .par_iter()
        .map(|&w| {
            let s = C64::new(0.0, w);
            let (h, g) = (reference.eval_all(s)?, model.eval_all(s)?);
            Ok([(h[0] - g[0]).norm(), (h[1] - g[1]).norm(), (h[2] - g[2]).norm()])
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TimeComparison {
    pub reference: TimeSignal,
    pub linear: TimeSignal,
    pub quadratic: TimeSignal,
    pub err_linear: OutputError,
    pub err_quadratic: OutputError,
}

/// Zero-state responses of the reference and both reduced models to the
/// validation input.
pub fn time_domain_comparison(
    reference: &QuadraticSystem,
    linear: &QuadraticSystem,
    quadratic: &QuadraticSystem,
    cfg: &ValidationConfig,
) -> Result<TimeComparison> {
    let amp = cfg.amplitude;
    let input = match cfg.input {
        ValidationInput::CosDecay => move |t: f64| C64::new(amp * simulation::validation_input(t), 0.0),
    };
    let span = (0.0, cfg.t_end);
    let run = |sys: &QuadraticSystem| simulation::integrate(sys, &input, &CVector::zeros(sys.n()), span, cfg.dt);
    let (y_ref, (y_lin, y_quad)) = rayon::join(|| run(reference), || rayon::join(|| run(linear), || run(quadratic)));
    let (y_ref, y_lin, y_quad) = (y_ref?, y_lin?, y_quad?);
    let err_linear = simulation::output_error(&y_ref, &y_lin)?;
    let err_quadratic = simulation::output_error(&y_ref, &y_quad)?;
    Ok(TimeComparison { reference: y_ref, linear: y_lin, quadratic: y_quad, err_linear, err_quadratic })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub provenance: Provenance,
    pub mode: AcquisitionMode,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnSummary {
    pub order: usize,
    pub one_step: bool,
    pub linear_source: LinearSource,
    pub iterations: usize,
    pub converged: bool,
    pub initial_deviation: Option<f64>,
    pub final_deviation: Option<f64>,
    pub deviation_log_r2: Option<f64>,
    pub residual_h2: f64,
    pub residual_h3: Option<f64>,
    /// `‖Q_learned - Q_ref‖₂`, only when the model shares the reference
    /// coordinates.
    pub q_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateSummary {
    pub dense_points: usize,
    pub max_error_h1: f64,
    pub max_error_h2: f64,
    pub max_error_h3: f64,
    pub l2_error_linear: f64,
    pub linf_error_linear: f64,
    pub l2_error_quadratic: f64,
    pub linf_error_quadratic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub learn: LearnSummary,
    pub validate: ValidateSummary,
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4e}"));
        let l = &self.learn;
        let v = &self.validate;
        writeln!(f, "order r                 {}", l.order)?;
        writeln!(f, "mode                    {}", if l.one_step { "one-step" } else { "coupled iteration" })?;
        writeln!(f, "iterations              {} ({})", l.iterations, if l.converged { "converged" } else { "not converged" })?;
        writeln!(f, "final deviation         {}", opt(l.final_deviation))?;
        writeln!(f, "deviation log-fit R^2   {}", l.deviation_log_r2.map_or("n/a".into(), |x| format!("{x:.4}")))?;
        writeln!(f, "residual H2            {:.4e}", l.residual_h2)?;
        writeln!(f, "residual H3            {}", opt(l.residual_h3))?;
        if let Some(q) = l.q_error {
            writeln!(f, "||Q - Q_ref||_2         {q:.4e}")?;
        }
        writeln!(f, "max |dH1| on {} pts    {:.4e}", v.dense_points, v.max_error_h1)?;
        writeln!(f, "max |dH2|               {:.4e}", v.max_error_h2)?;
        writeln!(f, "max |dH3|               {:.4e}", v.max_error_h3)?;
        writeln!(f, "time L2 error linear    {:.4e}", v.l2_error_linear)?;
        write!(f, "time L2 error quadratic {:.4e}", v.l2_error_quadratic)
    }
}

fn prepare_dir(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    cfg.write_resolved(out)
}

/// Writes `dataset.csv` and its metadata.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<DatasetMeta> {
    cfg.validate()?;
    prepare_dir(cfg, out)?;
    let reference = cfg.reference_system()?;
    let ds = generate_dataset(cfg, &reference)?;
    ds.write_csv(&out.join("dataset.csv"))?;
    write_system(&out.join("reference_system.json"), &reference)?;
    if cfg.acquisition.mode == AcquisitionMode::Probe {
        let direct = acquisition::sample_direct(&reference, &ds.omegas, &[1, 2, 3])?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("harmonic_errors.csv"))?);
        writeln!(f, "omega,rel_err_H1,rel_err_H2,rel_err_H3")?;
        for (i, w) in ds.omegas.iter().enumerate() {
            write!(f, "{w}")?;
            for m in 1..=3 {
                let exact = direct.level(m)?[i];
                write!(f, ",{}", (ds.level(m)?[i] - exact).norm() / exact.norm())?;
            }
            writeln!(f)?;
        }
        f.flush()?;
    }
    let meta = DatasetMeta {
        provenance: ds.provenance,
        mode: cfg.acquisition.mode,
        snr_db: cfg.noise.map(|n| n.snr_db).filter(|s| s.is_finite()),
        seed: cfg.noise.map(|n| n.seed),
        points: ds.len(),
    };
    write_json(&out.join("dataset.meta.json"), &meta)?;
    Ok(meta)
}

fn load_dataset(out: &Path) -> Result<HarmonicDataset> {
    let meta: DatasetMeta = read_json(&out.join("dataset.meta.json"))?;
    HarmonicDataset::read_csv(&out.join("dataset.csv"), meta.provenance)
}

/// Learns from `dataset.csv` in `out`. A non-converged iteration still writes
/// the best iterate; the summary reports `converged = false`.
pub fn cmd_learn(cfg: &ExperimentConfig, out: &Path) -> Result<LearnSummary> {
    cfg.validate()?;
    prepare_dir(cfg, out)?;
    let ds = load_dataset(out)?;
    let reference = cfg.reference_system()?;
    let outcome = learn(&ds, &cfg.learn_options(), Some(&reference))?;

    write_system(&out.join("model.json"), &outcome.model)?;
    write_system(&out.join("linear_model.json"), &outcome.linear.to_system()?)?;
    loewner::write_singular_values_csv(&out.join("singular_values.csv"), &outcome.singular_values)?;
    let trace = outcome.fit.as_ref().map(|f| f.deviation_trace.clone()).unwrap_or_default();
    inference::write_trace_csv(&out.join("trace.csv"), &trace)?;

    let q_error = (cfg.loewner.linear_source == LinearSource::Reference && reference.e_is_identity())
        .then(|| norm2(&(outcome.model.q() - reference.q())));
    let rows = FactoredK::new(&outcome.linear.to_system()?, &ds.points())?;
    let v2 = ds.level_vector(2)?;
    let residual_h2 = (rows.t2() * outcome.one_step.as_vector() - &v2).norm_squared();
    let summary = match &outcome.fit {
        Some(fit) => LearnSummary {
            order: outcome.order(),
            one_step: false,
            linear_source: cfg.loewner.linear_source,
            iterations: fit.iterations,
            converged: fit.converged,
            initial_deviation: Some(fit.initial_deviation),
            final_deviation: Some(fit.final_deviation()),
            deviation_log_r2: log_linear_r2(&fit.deviation_trace),
            residual_h2: fit.residual_h2,
            residual_h3: Some(fit.residual_h3),
            q_error,
        },
        None => LearnSummary {
            order: outcome.order(),
            one_step: true,
            linear_source: cfg.loewner.linear_source,
            iterations: 0,
            converged: true,
            initial_deviation: None,
            final_deviation: None,
            deviation_log_r2: None,
            residual_h2,
            residual_h3: None,
            q_error,
        },
    };
    write_json(&out.join("learn_summary.json"), &summary)?;
    Ok(summary)
}

/// Compares the learned models in `out` against the reference system.
pub fn cmd_validate(cfg: &ExperimentConfig, out: &Path) -> Result<ValidateSummary> {
    cfg.validate()?;
    prepare_dir(cfg, out)?;
    let reference = cfg.reference_system()?;
    let model = read_system(&out.join("model.json"))?;
    let linear = read_system(&out.join("linear_model.json"))?;

    let dense = cfg.dense_omegas()?;
    let errors = dense_grid_errors(&reference, &model, &dense)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("dense_errors.csv"))?);
    writeln!(f, "omega,err_H1,err_H2,err_H3")?;
    for (w, e) in dense.iter().zip(&errors) {
        writeln!(f, "{w},{},{},{}", e[0], e[1], e[2])?;
    }
    f.flush()?;

    let ds = load_dataset(out)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("fit_triples.csv"))?);
    writeln!(f, "omega,m,re_true,im_true,re_data,im_data,re_fit,im_fit")?;
    let evals = ds
        .omegas
        .par_iter()
        .map(|&w| Ok((reference.eval_all(C64::new(0.0, w))?, model.eval_all(C64::new(0.0, w))?)))
        .collect::<Result<Vec<_>>>()?;
    for m in 1..=3 {
        let Ok(data) = ds.level(m) else { continue };
        for ((w, d), (t, h)) in ds.omegas.iter().zip(data).zip(&evals) {
            let (t, h) = (t[m - 1], h[m - 1]);
            writeln!(f, "{w},{m},{},{},{},{},{},{}", t.re, t.im, d.re, d.im, h.re, h.im)?;
        }
    }
    f.flush()?;

    let cmp = time_domain_comparison(&reference, &linear, &model, &cfg.validation)?;
    cmp.reference.write_csv(&out.join("traj_reference.csv"))?;
    cmp.linear.write_csv(&out.join("traj_linear.csv"))?;
    cmp.quadratic.write_csv(&out.join("traj_quadratic.csv"))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("traj_errors.csv"))?);
    writeln!(f, "t,err_linear,err_quadratic")?;
    for (k, (a, b)) in cmp.err_linear.pointwise.iter().zip(&cmp.err_quadratic.pointwise).enumerate() {
        writeln!(f, "{},{a},{b}", cmp.reference.time(k))?;
    }
    f.flush()?;

    let col_max = |m: usize| errors.iter().map(|e| e[m]).fold(0.0, f64::max);
    let summary = ValidateSummary {
        dense_points: dense.len(),
        max_error_h1: col_max(0),
        max_error_h2: col_max(1),
        max_error_h3: col_max(2),
        l2_error_linear: cmp.err_linear.l2,
        linf_error_linear: cmp.err_linear.linf,
        l2_error_quadratic: cmp.err_quadratic.l2,
        linf_error_quadratic: cmp.err_quadratic.linf,
    };
    write_json(&out.join("validate_summary.json"), &summary)?;
    Ok(summary)
}

pub const REPORT_INPUTS: [&str; 5] =
    ["dataset.csv", "model.json", "linear_model.json", "learn_summary.json", "validate_summary.json"];

/// Collects the summaries of a finished run into `report.json`.
pub fn cmd_report(out: &Path) -> Result<Report> {
    let missing: Vec<String> =
        REPORT_INPUTS.iter().filter(|f| !out.join(f).is_file()).map(|f| f.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let report = Report { learn: read_json(&out.join("learn_summary.json"))?, validate: read_json(&out.join("validate_summary.json"))? };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> ExperimentConfig {
        ExperimentConfig {
            system: SystemSource::Toy,
            grid: GridConfig { a: 10f64.powf(-0.5), b: 5.0, n: 40 },
            acquisition: AcquisitionConfig::default(),
            noise: None,
            loewner: LoewnerConfig { threshold: Some(1e-8), ..Default::default() },
            solver: SolverConfig { tau: 1e-12, ..Default::default() },
            validation: ValidationConfig { t_end: 5.0, dt: 1e-2, dense_points: 50, ..Default::default() },
            one_step: false,
            output: None,
        }
    }

    #[test]
    fn r2_of_geometric_trace_is_one() {
        let trace: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).collect();
        assert!((log_linear_r2(&trace).unwrap() - 1.0).abs() < 1e-12);
        assert!(log_linear_r2(&[1.0, 0.1]).is_none());
    }

    #[test]
    fn self_validation_has_zero_error() {
        let toy = acquisition::make_toy_system();
        let errs = dense_grid_errors(&toy, &toy, &[0.5, 1.0, 2.0]).unwrap();
        assert!(errs.iter().flatten().all(|e| *e == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = toy_config();
        assert!(cfg.validate().is_ok());
        cfg.loewner = LoewnerConfig { threshold: None, order: None, ..Default::default() };
        assert!(cfg.validate().is_err());
        let mut cfg = toy_config();
        cfg.grid.b = cfg.grid.a;
        assert!(cfg.validate().is_err());
        let text = r#"{"system":{"kind":"toy"},"grid":{"a":1,"b":2,"n":3},"bogus":1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }

    #[test]
    fn toy_learn_from_data_fits_all_harmonics() {
        let cfg = toy_config();
        let toy = cfg.reference_system().unwrap();
        let ds = generate_dataset(&cfg, &toy).unwrap();
        let outcome = learn(&ds, &cfg.learn_options(), None).unwrap();
        assert_eq!(outcome.order(), 2);
        assert!(outcome.converged());
        let errs = dense_grid_errors(&toy, &outcome.model, &[0.4, 1.3, 4.0]).unwrap();
        assert!(errs.iter().flatten().all(|e| *e < 1e-6), "{errs:?}");
    }

    #[test]
    fn report_lists_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        match cmd_report(dir.path()) {
            Err(Error::MissingArtifacts(m)) => assert_eq!(m.len(), REPORT_INPUTS.len()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
