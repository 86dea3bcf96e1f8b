//! Experiment drivers: configuration, the end-to-end pipeline, parameter
//! sweeps, rate studies and CSV emission.
//!
//! Every CSV starts with a `# config_hash=<sha256>` comment identifying the
//! configuration that produced it, and is written to a temporary file that
//! is renamed into place only once complete.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fem::{AnalyticFunction, EvaluationMatrix, NodalField, Operators};
use crate::inversion::{
    adapt, apriori_gamma, reconstruct, AdaptiveConfig, AdaptiveOutcome, AdaptiveRun, AdaptiveStep, AdmissibleBox,
    Armijo, InversionConfig, IterateDiag, Problem, Reconstruction, StepInit, Termination, GAMMA_FLOOR,
};
use crate::mesh::{generate_points, Mesh, PointKind};
use crate::observation::{discrete_seminorm, observe, GroundTruth, NoiseKind, ObservationSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "ex_gamma_sweep")]
    GammaSweep,
    #[serde(rename = "ex_adaptive")]
    Adaptive,
    #[serde(rename = "ex_rate_1d")]
    Rate1d,
    #[serde(rename = "ex_rate_2d")]
    Rate2d,
    #[serde(rename = "custom")]
    Custom,
}

/// How the regularization parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GammaMode {
    Fixed {
        value: f64,
    },
    /// From the noise level and `‖q†‖_{H¹}` of the reference potential.
    Apriori,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub c_dec: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Fixed first trial step; the curvature model step when absent.
    pub s_init: Option<f64>,
    pub restart_period: usize,
    pub solver_tol: f64,
    /// Linear-solver iteration cap; `max(1000, 10 × unknowns)` when absent.
    pub solver_max_iter: Option<usize>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let c = InversionConfig::default();
        Self {
            max_iter: c.max_iter,
            grad_tol: c.grad_tol,
            c_dec: c.armijo.decrease,
            shrink: c.armijo.shrink,
            max_backtracks: c.armijo.max_backtracks,
            s_init: None,
            restart_period: c.restart_period,
            solver_tol: crate::sparse::DEFAULT_TOL,
            solver_max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub gammas: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            gammas: (6..=12).map(|e| 10f64.powi(-e)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSettings {
    /// Points per side; `n = k^dim`.
    pub k_list: Vec<usize>,
    /// `M = round(γ^{−1/4} / h_scale)`.
    pub h_scale: f64,
    pub m_min: usize,
    pub m_max: usize,
}

impl Default for RateSettings {
    fn default() -> Self {
        Self {
            k_list: vec![51, 101, 151, 201],
            h_scale: 5.0,
            m_min: 8,
            m_max: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSettings {
    /// `n^{−3/4}` when absent.
    pub gamma0: Option<f64>,
    pub max_outer: usize,
    pub rel_tol: f64,
    pub warm_start: bool,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self {
            gamma0: None,
            max_outer: 15,
            rel_tol: 1e-3,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dim: usize,
    /// Inversion mesh subdivisions per side.
    #[serde(rename = "M")]
    pub m: usize,
    /// Reference mesh subdivisions per side.
    #[serde(rename = "M_fine")]
    pub m_fine: usize,
    pub points: PointKind,
    /// Points per side.
    pub k: usize,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub gamma: GammaMode,
    pub c0: f64,
    pub c1: f64,
    pub q_true: String,
    pub f: String,
    pub seed: u64,
    pub optimizer: OptimizerSettings,
    pub sweep: SweepSettings,
    pub rate: RateSettings,
    pub adaptive: AdaptiveSettings,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Custom,
            dim: 2,
            m: 24,
            m_fine: 200,
            points: PointKind::Uniform,
            k: 201,
            sigma: 0.05,
            noise: NoiseKind::Gaussian,
            gamma: GammaMode::Apriori,
            c0: 1.0,
            c1: 5.0,
            q_true: "ex1_q".into(),
            f: "const1".into(),
            seed: 0,
            optimizer: OptimizerSettings::default(),
            sweep: SweepSettings::default(),
            rate: RateSettings::default(),
            adaptive: AdaptiveSettings::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// SHA-256 of the canonical serialization, output location excluded.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output: None,
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1..=2).contains(&self.dim) {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if self.m == 0 {
            return bad("M must be positive".into());
        }
        if self.m_fine < 4 * self.m {
            return bad(format!(
                "M_fine = {} must be at least 4 M = {}",
                self.m_fine,
                4 * self.m
            ));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if let GammaMode::Fixed { value } = self.gamma {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("fixed gamma must be positive, got {value}"));
            }
        }
        for id in [&self.q_true, &self.f] {
            if !AnalyticFunction::from_id(id)?.supports_dim(self.dim) {
                return bad(format!("function `{id}` is not defined in dimension {}", self.dim));
            }
        }
        self.inversion_config(1.0)?.validate()?;
        if !positive(self.optimizer.solver_tol) {
            return bad(format!(
                "solver_tol must be positive, got {}",
                self.optimizer.solver_tol
            ));
        }
        if self.experiment == ExperimentKind::GammaSweep && self.sweep.gammas.len() < 2 {
            return bad("a sweep needs at least two gamma values".into());
        }
        if self.sweep.gammas.iter().any(|&g| !positive(g)) {
            return bad("sweep gammas must be positive".into());
        }
        let r = &self.rate;
        if r.k_list.windows(2).any(|w| w[0] >= w[1]) || r.k_list.iter().any(|&k| k < 2) {
            return bad("rate.k_list must be strictly increasing with entries ≥ 2".into());
        }
        let rate = matches!(self.experiment, ExperimentKind::Rate1d | ExperimentKind::Rate2d);
        if !positive(r.h_scale) || r.m_min == 0 || r.m_min > r.m_max || (rate && self.m_fine < 4 * r.m_max) {
            return bad("rate mesh settings need 0 < m_min ≤ m_max ≤ M_fine / 4 and h_scale > 0".into());
        }
        if let Some(g) = self.adaptive.gamma0 {
            if !positive(g) {
                return bad(format!("adaptive.gamma0 must be positive, got {g}"));
            }
        }
        if self.adaptive.max_outer == 0 {
            return bad("adaptive.max_outer must be positive".into());
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<AdmissibleBox> {
        AdmissibleBox::new(self.c0, self.c1)
    }

    pub fn inversion_config(&self, gamma: f64) -> Result<InversionConfig> {
        let o = &self.optimizer;
        Ok(InversionConfig {
            gamma,
            bounds: self.bounds()?,
            max_iter: o.max_iter,
            grad_tol: o.grad_tol,
            armijo: Armijo {
                decrease: o.c_dec,
                shrink: o.shrink,
                max_backtracks: o.max_backtracks,
            },
            step_init: o.s_init.map_or(StepInit::Curvature, StepInit::Fixed),
            restart_period: o.restart_period,
            initial: None,
        })
    }

    pub fn num_points(&self) -> usize {
        self.k.pow(self.dim as u32)
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        GroundTruth::from_ids(self.dim, &self.q_true, &self.f, self.m_fine)
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

/// `e_q = ‖q† − q*‖_{L²} / ‖q†‖_{L²}` (both in the inversion space) and
/// `e_u = ‖u† − Pᵀu_h(q*)‖_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub e_q: f64,
    pub e_u: f64,
}

pub fn error_metrics(
    ops: &Operators,
    q_true: &[f64],
    q: &[f64],
    u_exact: &[f64],
    u_pred: &[f64],
) -> Result<ErrorMetrics> {
    if q_true.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q_true.len(),
            found: q.len(),
        });
    }
    if u_exact.len() != u_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: u_exact.len(),
            found: u_pred.len(),
        });
    }
    let diff: Vec<f64> = q_true.iter().zip(q).map(|(a, b)| a - b).collect();
    let e_q = ops.l2_norm(&diff)? / ops.l2_norm(q_true)?;
    let res: Vec<f64> = u_exact.iter().zip(u_pred).map(|(a, b)| a - b).collect();
    Ok(ErrorMetrics {
        e_q,
        e_u: discrete_seminorm(&res)?,
    })
}

/// One inverse problem: data, inversion mesh and the quantities needed to
/// score a reconstruction.
#[derive(Debug, Clone)]
pub struct Instance {
    pub observations: ObservationSet,
    pub ops: Operators,
    pub eval: EvaluationMatrix,
    pub source: NodalField,
    /// `q†` interpolated onto the inversion mesh.
    pub truth: NodalField,
    /// `‖q†‖_{H¹}` on the reference mesh.
    pub q_h1_norm: f64,
    /// Absolute noise standard deviation.
    pub noise_std: f64,
}

impl Instance {
    pub fn new(config: &ExperimentConfig, gt: &GroundTruth, divisions: usize, k: usize, seed: u64) -> Result<Self> {
        let points = generate_points(config.dim, config.points, k, seed)?;
        let observations = observe(gt, &points, config.sigma, config.noise, seed)?;
        let mut ops = Operators::new(Mesh::structured(config.dim, divisions)?);
        ops.tol = config.optimizer.solver_tol;
        if let Some(cap) = config.optimizer.solver_max_iter {
            ops.max_iter = cap;
        }
        let eval = EvaluationMatrix::new(ops.mesh(), &points)?;
        let source = ops.interpolate(AnalyticFunction::from_id(&config.f)?)?;
        let truth = ops.interpolate(AnalyticFunction::from_id(&config.q_true)?)?;
        Ok(Self {
            noise_std: observations.noise_std,
            observations,
            ops,
            eval,
            source,
            truth,
            q_h1_norm: gt.q_h1_norm()?,
        })
    }

    pub fn num_points(&self) -> usize {
        self.observations.len()
    }

    pub fn problem(&self, gamma: f64) -> Result<Problem<'_>> {
        Problem::new(&self.ops, &self.eval, &self.observations.values, &self.source, gamma)
    }

    pub fn apriori_gamma(&self) -> f64 {
        let g = apriori_gamma(self.ops.mesh().dim(), self.noise_std, self.num_points(), self.q_h1_norm);
        g.max(GAMMA_FLOOR)
    }

    pub fn metrics(&self, rec: &Reconstruction) -> Result<ErrorMetrics> {
        let predicted = self.eval.evaluate(&rec.state)?;
        error_metrics(
            &self.ops,
            self.truth.values(),
            &rec.q,
            &self.observations.exact,
            &predicted,
        )
    }

    pub fn reconstruct(&self, config: &ExperimentConfig, gamma: f64) -> Result<Reconstruction> {
        reconstruct(&self.problem(gamma)?, &config.inversion_config(gamma)?)
    }

    pub fn adapt(&self, config: &ExperimentConfig) -> Result<AdaptiveRun> {
        let s = &config.adaptive;
        let mut adaptive = AdaptiveConfig::for_points(self.num_points());
        adaptive.gamma0 = s.gamma0.unwrap_or(adaptive.gamma0);
        adaptive.max_outer = s.max_outer;
        adaptive.rel_tol = s.rel_tol;
        adaptive.warm_start = s.warm_start;
        adapt(
            &self.problem(adaptive.gamma0)?,
            &config.inversion_config(adaptive.gamma0)?,
            &adaptive,
            Some(self.truth.values()),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub metrics: ErrorMetrics,
    pub gamma: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<IterateDiag>,
    /// Adaptive runs only.
    pub trace: Vec<AdaptiveStep>,
    pub reconstruction: Reconstruction,
    pub wall_time: Duration,
}

/// Ground truth → observations → inversion → metrics, for the configured
/// `γ` mode.
pub fn run(config: &ExperimentConfig) -> Result<(ExperimentReport, Instance)> {
    config.validate()?;
    let start = Instant::now();
    let gt = config.ground_truth().map_err(|e| e.at("ground truth"))?;
    let instance = Instance::new(config, &gt, config.m, config.k, config.seed).map_err(|e| e.at("observations"))?;
    let (rec, gamma, trace) = match config.gamma {
        GammaMode::Fixed { value } => (
            instance
                .reconstruct(config, value)
                .map_err(|e| e.at("reconstruction"))?,
            value,
            Vec::new(),
        ),
        GammaMode::Apriori => {
            let g = instance.apriori_gamma();
            (
                instance.reconstruct(config, g).map_err(|e| e.at("reconstruction"))?,
                g,
                Vec::new(),
            )
        }
        GammaMode::Adaptive => {
            let run = instance.adapt(config).map_err(|e| e.at("adaptive loop"))?;
            if let AdaptiveOutcome::Failed(msg) = &run.outcome {
                return Err(Error::Aborted(msg.clone()).at("adaptive loop"));
            }
            let gamma = run.final_gamma().expect("a successful run has a trace");
            let rec = run.reconstruction.expect("a successful run has a reconstruction");
            (rec, gamma, run.trace)
        }
    };
    let report = ExperimentReport {
        metrics: instance.metrics(&rec).map_err(|e| e.at("metrics"))?,
        gamma,
        iterations: rec.iterations(),
        termination: rec.termination,
        history: rec.history.clone(),
        trace,
        reconstruction: rec,
        wall_time: start.elapsed(),
    };
    Ok((report, instance))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub e_q: f64,
    pub e_u: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Successful rows in input order.
    pub rows: Vec<SweepRow>,
    /// `γ` values whose reconstruction failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

impl SweepResult {
    pub fn argmin_e_q(&self) -> Option<f64> {
        argmin(&self.rows, |r| r.e_q)
    }

    pub fn argmin_e_u(&self) -> Option<f64> {
        argmin(&self.rows, |r| r.e_u)
    }
}

fn argmin(rows: &[SweepRow], key: impl Fn(&SweepRow) -> f64) -> Option<f64> {
    rows.iter().min_by(|a, b| key(a).total_cmp(&key(b))).map(|r| r.gamma)
}

/// One reconstruction per `γ` on a shared observation set.
pub fn gamma_sweep(config: &ExperimentConfig, gammas: &[f64]) -> Result<SweepResult> {
    config.validate()?;
    if gammas.len() < 2 {
        return Err(Error::Config("a sweep needs at least two gamma values".into()));
    }
    let gt = config.ground_truth()?;
    let instance = Instance::new(config, &gt, config.m, config.k, config.seed)?;
    let outcomes: Vec<Result<SweepRow>> = gammas
        .par_iter()
        .map(|&gamma| {
            let rec = instance.reconstruct(config, gamma)?;
            let m = instance.metrics(&rec)?;
            Ok(SweepRow {
                gamma,
                e_q: m.e_q,
                e_u: m.e_u,
            })
        })
        .collect();
    let mut result = SweepResult {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (gamma, outcome) in gammas.iter().zip(outcomes) {
        match outcome {
            Ok(row) => result.rows.push(row),
            Err(e) => result.failures.push((*gamma, e.to_string())),
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub e_q: f64,
    pub e_u: f64,
}

/// Mesh size coupled to the parameter through `h ∼ γ^{1/4}`.
pub fn rate_divisions(gamma: f64, settings: &RateSettings) -> usize {
    let m = (gamma.powf(-0.25) / settings.h_scale).round();
    (m as usize).clamp(settings.m_min, settings.m_max)
}

/// For each `k` in `k_list`: a priori `γ`, coupled mesh, full pipeline.
/// Row `i` draws points and noise from `seed + i`.
pub fn rate_study(config: &ExperimentConfig, k_list: &[usize]) -> Result<Vec<RateRow>> {
    config.validate()?;
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("k_list must be strictly increasing".into()));
    }
    let gt = config.ground_truth()?;
    let q_h1 = gt.q_h1_norm()?;
    let noise_std = config.sigma * gt.sup_norm;
    k_list
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let n = k.pow(config.dim as u32);
            let gamma = apriori_gamma(config.dim, noise_std, n, q_h1).max(GAMMA_FLOOR);
            let m = rate_divisions(gamma, &config.rate);
            let instance = Instance::new(config, &gt, m, k, config.seed + i as u64)?;
            let rec = instance.reconstruct(config, gamma)?;
            let metrics = instance.metrics(&rec)?;
            Ok(RateRow {
                n,
                gamma,
                m,
                e_q: metrics.e_q,
                e_u: metrics.e_u,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub gamma: f64,
    pub misfit: f64,
    pub q_h1: f64,
    pub e_q: Option<f64>,
}

impl From<&AdaptiveStep> for TraceRow {
    fn from(s: &AdaptiveStep) -> Self {
        Self {
            k: s.k,
            gamma: s.gamma,
            misfit: s.misfit,
            q_h1: s.q_h1,
            e_q: s.e_q,
        }
    }
}

pub const SWEEP_HEADER: &[&str] = &["gamma", "e_q", "e_u"];
pub const RATE_HEADER: &[&str] = &["n", "gamma", "M", "e_q", "e_u"];
pub const TRACE_HEADER: &[&str] = &["k", "gamma", "misfit", "q_h1", "e_q"];
pub const ITERATIONS_HEADER: &[&str] = &["k", "J", "misfit", "penalty", "grad_norm", "step", "beta"];
pub const REPORT_HEADER: &[&str] = &["e_q", "e_u", "gamma", "iterations", "termination"];

/// Serializes `rows` as CSV under a hash comment and a fixed header, then
/// atomically moves the file into place.
pub fn write_csv<T: Serialize>(path: &Path, hash: &str, header: &[&str], rows: &[T]) -> Result<()> {
    let mut buf = format!("# config_hash={hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

/// Parses a file produced by [`write_csv`]; returns the hash and the rows.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(String, Vec<T>)> {
    let text = fs::read_to_string(path)?;
    let hash = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .unwrap_or_default()
        .to_string();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((hash, rows))
}

/// `x,y` pairs for one plotted series.
pub fn write_series<X: Display, Y: Display>(
    path: &Path,
    hash: &str,
    points: impl IntoIterator<Item = (X, Y)>,
) -> Result<()> {
    let mut text = format!("# config_hash={hash}\nx,y\n");
    for (x, y) in points {
        text.push_str(&format!("{x},{y}\n"));
    }
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ReportRow {
    e_q: f64,
    e_u: f64,
    gamma: f64,
    iterations: usize,
    termination: Termination,
}

/// Writes `report.csv`, `iterations.csv`, `q.csv` and, for adaptive runs,
/// `gamma_trace.csv`.
pub fn emit_report(dir: &Path, config: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    let hash = config.hash();
    let row = ReportRow {
        e_q: report.metrics.e_q,
        e_u: report.metrics.e_u,
        gamma: report.gamma,
        iterations: report.iterations,
        termination: report.termination,
    };
    write_csv(&dir.join("report.csv"), &hash, REPORT_HEADER, &[row])?;
    write_csv(&dir.join("iterations.csv"), &hash, ITERATIONS_HEADER, &report.history)?;
    let q: Vec<(usize, f64)> = report.reconstruction.q.iter().copied().enumerate().collect();
    write_csv(&dir.join("q.csv"), &hash, &["node_id", "value"], &q)?;
    if !report.trace.is_empty() {
        emit_trace(dir, config, &report.trace)?;
    }
    Ok(())
}

pub fn emit_trace(dir: &Path, config: &ExperimentConfig, trace: &[AdaptiveStep]) -> Result<()> {
    let hash = config.hash();
    let rows: Vec<TraceRow> = trace.iter().map(TraceRow::from).collect();
    write_csv(&dir.join("gamma_trace.csv"), &hash, TRACE_HEADER, &rows)?;
    write_series(
        &dir.join("plot_gamma_trace.csv"),
        &hash,
        rows.iter().map(|r| (r.k, r.gamma)),
    )
}

pub fn emit_sweep(dir: &Path, config: &ExperimentConfig, sweep: &SweepResult) -> Result<()> {
    let hash = config.hash();
    write_csv(&dir.join("sweep.csv"), &hash, SWEEP_HEADER, &sweep.rows)?;
    write_series(
        &dir.join("plot_sweep_e_q.csv"),
        &hash,
        sweep.rows.iter().map(|r| (r.gamma, r.e_q)),
    )?;
    write_series(
        &dir.join("plot_sweep_e_u.csv"),
        &hash,
        sweep.rows.iter().map(|r| (r.gamma, r.e_u)),
    )
}

pub fn emit_rate(dir: &Path, config: &ExperimentConfig, rows: &[RateRow]) -> Result<()> {
    let hash = config.hash();
    write_csv(&dir.join("rate.csv"), &hash, RATE_HEADER, rows)?;
    write_series(&dir.join("plot_rate_e_q.csv"), &hash, rows.iter().map(|r| (r.n, r.e_q)))?;
    write_series(&dir.join("plot_rate_e_u.csv"), &hash, rows.iter().map(|r| (r.n, r.e_u)))
}
