//! Regularized output least squares for the potential.
//!
//! The discrete functional is
//!
//! ```text
//!     J(q) = ‖P ᵀu_h(q) − m‖²_n + γ ‖q‖²_{H¹},    A(q) u_h = b,
//!     A(q) = K + M[q]
//! ```
//!
//! and is minimized over `c0 ≤ q ≤ c1` by a projected Fletcher–Reeves
//! method on H¹-smoothed gradients. Differentiating the state equation gives
//! `A δu = −M[δq] u`, so with the adjoint `A v = (2/n) P (Pᵀu − m)` the exact
//! derivative with respect to the nodal coefficients is
//!
//! ```text
//!     ∂J/∂q_k = −∫ u_h v_h φ_k + 2γ ((K + M) q)_k.
//! ```

use serde::{Deserialize, Serialize};

use crate::fem::{EvaluationMatrix, NodalField, Operators, Space};
use crate::observation::discrete_seminorm;
use crate::sparse::{dot, CsrMatrix};
use crate::{Error, Result};

/// Lower bound substituted for degenerate regularization parameters.
pub const GAMMA_FLOOR: f64 = 1e-16;

/// Nodal bounds `c0 ≤ q ≤ c1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleBox {
    pub lower: f64,
    pub upper: f64,
}

impl AdmissibleBox {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower >= 0.0 && lower < upper && upper.is_finite()) {
            return Err(Error::Config(format!("invalid admissible box [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter().all(|v| (self.lower..=self.upper).contains(v))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

impl Default for AdmissibleBox {
    fn default() -> Self {
        Self { lower: 1.0, upper: 5.0 }
    }
}

/// Nodal clamp to the box.
pub fn project_box(q: &[f64], bounds: &AdmissibleBox) -> Vec<f64> {
    q.iter().map(|v| v.clamp(bounds.lower, bounds.upper)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Armijo {
    /// Sufficient-decrease constant in `(0, 1)`.
    pub decrease: f64,
    /// Backtracking factor in `(0, 1)`.
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            decrease: 1e-4,
            shrink: 0.5,
            max_backtracks: 40,
        }
    }
}

/// First trial step of the line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum StepInit {
    /// Minimizer of the second-order model of `J` along the search direction.
    Curvature,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig {
    pub gamma: f64,
    pub bounds: AdmissibleBox,
    pub max_iter: usize,
    /// Stop once the projected smoothed gradient has shrunk by this factor.
    pub grad_tol: f64,
    pub armijo: Armijo,
    pub step_init: StepInit,
    pub restart_period: usize,
    /// Initial iterate; the box midpoint when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-8,
            bounds: AdmissibleBox::default(),
            max_iter: 500,
            grad_tol: 1e-6,
            armijo: Armijo::default(),
            step_init: StepInit::Curvature,
            restart_period: 20,
            initial: None,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        AdmissibleBox::new(self.bounds.lower, self.bounds.upper)?;
        let a = &self.armijo;
        if !(a.decrease > 0.0 && a.decrease < 1.0 && a.shrink > 0.0 && a.shrink < 1.0) {
            return Err(Error::Config(format!("invalid line search constants {a:?}")));
        }
        if let StepInit::Fixed(s) = self.step_init {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("initial step must be positive, got {s}")));
            }
        }
        if self.restart_period == 0 {
            return Err(Error::Config("restart period must be at least 1".into()));
        }
        Ok(())
    }
}

/// The three pieces of `J = misfit² + γ penalty²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub value: f64,
    /// `‖Pᵀu_h(q) − m‖_n`
    pub misfit: f64,
    /// `‖q‖_{H¹}`
    pub penalty: f64,
}

/// Diagnostics of one accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateDiag {
    pub k: usize,
    #[serde(rename = "J")]
    pub objective: f64,
    pub misfit: f64,
    pub penalty: f64,
    /// L² norm of the projected smoothed gradient.
    pub grad_norm: f64,
    /// Step that produced this iterate (0 for the initial one).
    pub step: f64,
    pub beta: f64,
}

/// Everything computed at one potential: objective, gradient, states.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: Objective,
    pub gradient: Vec<f64>,
    /// Forward state over all nodes.
    pub state: Vec<f64>,
    /// Adjoint state over all nodes.
    pub adjoint: Vec<f64>,
    operator: CsrMatrix,
}

/// A fixed inverse problem instance: mesh operators, sampling operator,
/// data, source and regularization parameter.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    ops: &'a Operators,
    eval: &'a EvaluationMatrix,
    data: &'a [f64],
    load: Vec<f64>,
    gamma: f64,
}

impl<'a> Problem<'a> {
    pub fn new(
        ops: &'a Operators,
        eval: &'a EvaluationMatrix,
        data: &'a [f64],
        f: &NodalField,
        gamma: f64,
    ) -> Result<Self> {
        if eval.num_nodes() != ops.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: ops.num_nodes(),
                found: eval.num_nodes(),
            });
        }
        if data.len() != eval.num_points() {
            return Err(Error::DimensionMismatch {
                expected: eval.num_points(),
                found: data.len(),
            });
        }
        Ok(Self {
            ops,
            eval,
            data,
            load: ops.load(f)?,
            gamma,
        })
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ops(&self) -> &Operators {
        self.ops
    }

    pub fn num_points(&self) -> usize {
        self.data.len()
    }

    /// Forward state for `q`, optionally warm-started.
    pub fn state(&self, q: &[f64], guess: Option<&[f64]>) -> Result<(CsrMatrix, Vec<f64>)> {
        let a = self.ops.state_matrix(q)?;
        let (u, _) = self.ops.solve_interior(&a, &self.load, guess)?;
        Ok((a, u.into_values()))
    }

    fn objective_at_state(&self, q: &[f64], u: &[f64]) -> Result<(Objective, Vec<f64>)> {
        let residual: Vec<f64> = self
            .eval
            .evaluate(u)?
            .iter()
            .zip(self.data)
            .map(|(p, m)| p - m)
            .collect();
        let misfit = discrete_seminorm(&residual)?;
        let penalty = self.ops.h1_norm(q)?;
        Ok((
            Objective {
                value: misfit * misfit + self.gamma * penalty * penalty,
                misfit,
                penalty,
            },
            residual,
        ))
    }

    pub fn objective(&self, q: &[f64]) -> Result<Objective> {
        self.objective_from(q, None).map(|(o, _)| o)
    }

    /// Objective and forward state, optionally warm-started.
    pub fn objective_from(&self, q: &[f64], guess: Option<&[f64]>) -> Result<(Objective, Vec<f64>)> {
        let (_, u) = self.state(q, guess)?;
        let (obj, _) = self.objective_at_state(q, &u)?;
        Ok((obj, u))
    }

    /// Derivative of the objective with respect to the nodal coefficients.
    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(q, None)?.gradient)
    }

    pub fn evaluate(&self, q: &[f64], guess: Option<&[f64]>) -> Result<Evaluation> {
        let (a, u) = self.state(q, guess)?;
        let (objective, residual) = self.objective_at_state(q, &u)?;
        let scale = 2.0 / residual.len() as f64;
        let weights: Vec<f64> = residual.iter().map(|r| scale * r).collect();
        let rhs = self.ops.restrict(&self.eval.scatter(&weights)?);
        let (v, _) = self.ops.solve_interior(&a, &rhs, None)?;
        let v = v.into_values();
        let w = self.ops.triple_products(&u, &v)?;
        let hq = self.ops.h1_matrix().spmv(q)?;
        let gradient = w.iter().zip(&hq).map(|(w, h)| -w + 2.0 * self.gamma * h).collect();
        Ok(Evaluation {
            objective,
            gradient,
            state: u,
            adjoint: v,
            operator: a,
        })
    }

    /// Second directional derivative of `J` along `d` at the evaluated point.
    ///
    /// With `A δu = −M[d] u` the exact value is
    /// `(2/n)‖Pᵀδu‖² − 2 vᵀ M[d] δu + 2γ dᵀ(K+M)d`. The Gauss–Newton part
    /// (dropping the middle term) is returned when the exact value is not
    /// positive.
    pub fn curvature(&self, at: &Evaluation, d: &[f64]) -> Result<f64> {
        let md = self.ops.weighted_mass(Space::Interior, d)?;
        let rhs: Vec<f64> = md
            .spmv(&self.ops.restrict(&at.state))?
            .into_iter()
            .map(|x| -x)
            .collect();
        let (du, _) = self.ops.solve_interior(&at.operator, &rhs, None)?;
        let du_int = self.ops.restrict(du.values());
        let pdu = self.eval.evaluate(du.values())?;
        let gauss_newton = 2.0 * dot(&pdu, &pdu) / pdu.len() as f64;
        let second = -2.0 * dot(&self.ops.restrict(&at.adjoint), &md.spmv(&du_int)?);
        let reg = 2.0 * self.gamma * self.ops.h1_matrix().quadratic_form(d)?;
        let exact = gauss_newton + second + reg;
        Ok(if exact > 0.0 { exact } else { gauss_newton + reg })
    }
}

/// H¹ Riesz representative of `−grad`: solves `(K + M) g = −grad` with
/// natural (zero Neumann) boundary conditions.
pub fn smooth_gradient(ops: &Operators, grad: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
    ops.solve_neumann(&rhs)
}

/// Conjugate-gradient memory carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CgState {
    pub g_prev: Vec<f64>,
    pub d_prev: Vec<f64>,
    /// `‖g_prev‖²_{L²}`
    pub g_prev_norm2: f64,
    /// Iterations since the last steepest-descent step.
    pub since_restart: usize,
}

/// Fletcher–Reeves direction `d = g + β d_prev`, `β = ‖g‖²/‖g_prev‖²`.
///
/// `β = 0` without history, on zero previous gradient, every
/// `restart_period` iterations, and whenever `d` would not be a descent
/// direction for `grad`.
pub fn cg_direction(
    state: Option<&CgState>,
    g_new: &[f64],
    g_new_norm2: f64,
    grad: &[f64],
    restart_period: usize,
) -> (Vec<f64>, f64) {
    let Some(prev) = state else {
        return (g_new.to_vec(), 0.0);
    };
    if prev.g_prev_norm2 <= 0.0 || prev.since_restart + 1 >= restart_period {
        return (g_new.to_vec(), 0.0);
    }
    let beta = g_new_norm2 / prev.g_prev_norm2;
    let d: Vec<f64> = g_new.iter().zip(&prev.d_prev).map(|(g, d)| g + beta * d).collect();
    if dot(&d, grad) >= 0.0 {
        return (g_new.to_vec(), 0.0);
    }
    (d, beta)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineSearch<T> {
    Accepted {
        step: f64,
        q: Vec<f64>,
        value: f64,
        extra: T,
    },
    /// No step satisfied the decrease test.
    Stagnated,
}

/// Projected backtracking Armijo search along `d`.
///
/// A trial `q⁺ = P_A(q + s d)` is accepted when
/// `J(q⁺) ≤ J0 + c ⟨∇J, q⁺ − q⟩` and `J(q⁺) < J0`.
#[allow(clippy::too_many_arguments)]
pub fn line_search<T>(
    mut objective: impl FnMut(&[f64]) -> Result<(f64, T)>,
    q: &[f64],
    d: &[f64],
    j0: f64,
    grad: &[f64],
    bounds: &AdmissibleBox,
    s_init: f64,
    armijo: &Armijo,
) -> Result<LineSearch<T>> {
    if d.iter().all(|&v| v == 0.0) || !(s_init > 0.0 && s_init.is_finite()) {
        return Ok(LineSearch::Stagnated);
    }
    let mut step = s_init;
    for _ in 0..=armijo.max_backtracks {
        let trial: Vec<f64> = q
            .iter()
            .zip(d)
            .map(|(qi, di)| (qi + step * di).clamp(bounds.lower, bounds.upper))
            .collect();
        let predicted: f64 = grad.iter().zip(&trial).zip(q).map(|((g, t), q)| g * (t - q)).sum();
        if predicted < 0.0 {
            let (value, extra) = objective(&trial)?;
            if value <= j0 + armijo.decrease * predicted && value < j0 {
                return Ok(LineSearch::Accepted {
                    step,
                    q: trial,
                    value,
                    extra,
                });
            }
        }
        step *= armijo.shrink;
    }
    Ok(LineSearch::Stagnated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Stagnated,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub q: Vec<f64>,
    pub objective: Objective,
    pub history: Vec<IterateDiag>,
    pub termination: Termination,
    /// Forward state at `q` over all nodes.
    pub state: Vec<f64>,
}

impl Reconstruction {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |d| d.k)
    }
}

/// Projected nonlinear conjugate gradient minimization of `J`.
pub fn reconstruct(problem: &Problem<'_>, config: &InversionConfig) -> Result<Reconstruction> {
    reconstruct_observed(problem, config, |_, _| {})
}

/// [`reconstruct`], calling `observe` with every accepted iterate
/// (including the initial one).
pub fn reconstruct_observed(
    problem: &Problem<'_>,
    config: &InversionConfig,
    mut observe: impl FnMut(&IterateDiag, &[f64]),
) -> Result<Reconstruction> {
    config.validate()?;
    let ops = problem.ops();
    let bounds = &config.bounds;
    let q0 = match &config.initial {
        Some(q) if q.len() == ops.num_nodes() => q.clone(),
        Some(q) => {
            return Err(Error::DimensionMismatch {
                expected: ops.num_nodes(),
                found: q.len(),
            })
        }
        None => vec![bounds.midpoint(); ops.num_nodes()],
    };
    let mut q = project_box(&q0, bounds);
    let mut current = problem.evaluate(&q, None)?;
    let mut g = smooth_gradient(ops, &current.gradient)?;
    let projected_norm = |q: &[f64], g: &[f64]| -> Result<f64> {
        let moved: Vec<f64> = q
            .iter()
            .zip(g)
            .map(|(qi, gi)| (qi + gi).clamp(bounds.lower, bounds.upper) - qi)
            .collect();
        ops.l2_norm(&moved)
    };
    let mut pg = projected_norm(&q, &g)?;
    let pg0 = pg;

    let mut history = vec![diag(0, &current.objective, pg, 0.0, 0.0)];
    observe(&history[0], &q);
    let mut cg: Option<CgState> = None;
    let mut termination = Termination::MaxIterations;

    for k in 1..=config.max_iter {
        if pg <= config.grad_tol * pg0 {
            termination = Termination::Converged;
            break;
        }
        let g_norm2 = ops.mass(Space::Full).quadratic_form(&g)?;
        let (mut d, mut beta) = cg_direction(cg.as_ref(), &g, g_norm2, &current.gradient, config.restart_period);

        let mut outcome = search(problem, config, &q, &d, &current)?;
        if matches!(outcome, LineSearch::Stagnated) && beta != 0.0 {
            d = g.clone();
            beta = 0.0;
            outcome = search(problem, config, &q, &d, &current)?;
        }
        let LineSearch::Accepted {
            step,
            q: next,
            extra: u_next,
            ..
        } = outcome
        else {
            termination = Termination::Stagnated;
            break;
        };

        cg = Some(CgState {
            g_prev: g,
            d_prev: d,
            g_prev_norm2: g_norm2,
            since_restart: match &cg {
                Some(s) if beta != 0.0 => s.since_restart + 1,
                _ => 0,
            },
        });
        q = next;
        current = problem.evaluate(&q, Some(&u_next))?;
        g = smooth_gradient(ops, &current.gradient)?;
        pg = projected_norm(&q, &g)?;
        history.push(diag(k, &current.objective, pg, step, beta));
        observe(&history[k], &q);
    }

    Ok(Reconstruction {
        q,
        objective: current.objective,
        history,
        termination,
        state: current.state,
    })
}

fn search(
    problem: &Problem<'_>,
    config: &InversionConfig,
    q: &[f64],
    d: &[f64],
    at: &Evaluation,
) -> Result<LineSearch<Vec<f64>>> {
    let slope = dot(&at.gradient, d);
    if slope >= 0.0 {
        return Ok(LineSearch::Stagnated);
    }
    let s_init = match config.step_init {
        StepInit::Fixed(s) => s,
        StepInit::Curvature => {
            let curv = problem.curvature(at, d)?;
            if curv > 0.0 {
                -slope / curv
            } else {
                1.0
            }
        }
    };
    line_search(
        |trial| {
            let (obj, u) = problem.objective_from(trial, Some(&at.state))?;
            Ok((obj.value, u))
        },
        q,
        d,
        at.objective.value,
        &at.gradient,
        &config.bounds,
        s_init,
        &config.armijo,
    )
}

fn diag(k: usize, obj: &Objective, grad_norm: f64, step: f64, beta: f64) -> IterateDiag {
    IterateDiag {
        k,
        objective: obj.value,
        misfit: obj.misfit,
        penalty: obj.penalty,
        grad_norm,
        step,
        beta,
    }
}

fn gamma_exponent(dim: usize) -> f64 {
    0.5 + dim as f64 / 12.0
}

fn gamma_rule(dim: usize, n: usize, level: f64, q_h1_norm: f64) -> f64 {
    let t = level / (n as f64).sqrt();
    if t == 0.0 {
        return 0.0;
    }
    (t / (q_h1_norm + t)).powf(1.0 / gamma_exponent(dim))
}

/// A priori parameter `γ^{1/2 + d/12} = σ n^{−1/2} / (‖q†‖_{H¹} + σ n^{−1/2})`,
/// where `sigma` is the absolute noise standard deviation.
///
/// Returns 0 for noiseless data; callers substitute [`GAMMA_FLOOR`].
pub fn apriori_gamma(dim: usize, sigma: f64, n: usize, q_h1_norm: f64) -> f64 {
    gamma_rule(dim, n, sigma, q_h1_norm)
}

/// Adaptive update: the a priori rule with `σ` replaced by the achieved
/// misfit and `‖q†‖_{H¹}` by the reconstruction's norm. Floored at
/// [`GAMMA_FLOOR`].
pub fn update_gamma(dim: usize, n: usize, misfit: f64, q_h1_norm: f64) -> f64 {
    let g = gamma_rule(dim, n, misfit, q_h1_norm);
    if g.is_finite() {
        g.max(GAMMA_FLOOR)
    } else {
        GAMMA_FLOOR
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub gamma0: f64,
    pub max_outer: usize,
    /// Stop when `|γ_{k+1} − γ_k| ≤ rel_tol γ_k`.
    pub rel_tol: f64,
    /// Start each inner solve from the previous reconstruction.
    pub warm_start: bool,
}

impl AdaptiveConfig {
    /// `γ0 = n^{−3/4}`, 15 outer iterations.
    pub fn for_points(n: usize) -> Self {
        Self {
            gamma0: (n as f64).powf(-0.75),
            max_outer: 15,
            rel_tol: 1e-3,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStep {
    pub k: usize,
    pub gamma: f64,
    pub misfit: f64,
    pub q_h1: f64,
    /// Relative L² error when the true potential is known.
    pub e_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdaptiveOutcome {
    Converged,
    MaxOuterIterations,
    /// An inner solve failed; the trace holds the completed steps.
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub trace: Vec<AdaptiveStep>,
    /// Update computed from the last reconstruction.
    pub gamma_next: f64,
    pub outcome: AdaptiveOutcome,
    /// Reconstruction at the last traced `γ`.
    pub reconstruction: Option<Reconstruction>,
}

impl AdaptiveRun {
    pub fn final_gamma(&self) -> Option<f64> {
        self.trace.last().map(|s| s.gamma)
    }
}

/// Self-consistent iteration for the regularization parameter.
///
/// `truth` is `q†` on the inversion mesh, used only for the error column.
pub fn adapt(
    problem: &Problem<'_>,
    config: &InversionConfig,
    adaptive: &AdaptiveConfig,
    truth: Option<&[f64]>,
) -> Result<AdaptiveRun> {
    if !(adaptive.gamma0.is_finite() && adaptive.gamma0 > 0.0) {
        return Err(Error::Config(format!(
            "gamma0 must be positive, got {}",
            adaptive.gamma0
        )));
    }
    let ops = problem.ops();
    let dim = ops.mesh().dim();
    let n = problem.num_points();
    let truth_norm = truth.map(|t| ops.l2_norm(t)).transpose()?;

    let mut gamma = adaptive.gamma0;
    let mut inner = config.clone();
    let mut run = AdaptiveRun {
        trace: Vec::new(),
        gamma_next: gamma,
        outcome: AdaptiveOutcome::MaxOuterIterations,
        reconstruction: None,
    };
    for k in 0..adaptive.max_outer {
        inner.gamma = gamma;
        let rec = match reconstruct(&problem.with_gamma(gamma), &inner) {
            Ok(rec) => rec,
            Err(e) => {
                run.outcome = AdaptiveOutcome::Failed(e.to_string());
                return Ok(run);
            }
        };
        let e_q = match (truth, truth_norm) {
            (Some(t), Some(norm)) => {
                let diff: Vec<f64> = t.iter().zip(&rec.q).map(|(a, b)| a - b).collect();
                Some(ops.l2_norm(&diff)? / norm)
            }
            _ => None,
        };
        let next = update_gamma(dim, n, rec.objective.misfit, rec.objective.penalty);
        run.trace.push(AdaptiveStep {
            k,
            gamma,
            misfit: rec.objective.misfit,
            q_h1: rec.objective.penalty,
            e_q,
        });
        run.gamma_next = next;
        if adaptive.warm_start {
            inner.initial = Some(rec.q.clone());
        }
        run.reconstruction = Some(rec);
        if (next - gamma).abs() <= adaptive.rel_tol * gamma {
            run.outcome = AdaptiveOutcome::Converged;
            return Ok(run);
        }
        gamma = next;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_points, Mesh, PointKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_projection() {
        let b = AdmissibleBox::new(1.0, 5.0).unwrap();
        let q = vec![1.0, 2.5, 5.0];
        assert_eq!(project_box(&q, &b), q);
        assert_eq!(project_box(&[10.0; 4], &b), vec![5.0; 4]);
        let wild = vec![-3.0, 0.5, 7.0, 4.9];
        let once = project_box(&wild, &b);
        assert_eq!(project_box(&once, &b), once);
        assert!(b.contains(&once));
        assert!(AdmissibleBox::new(2.0, 1.0).is_err());
        assert!(AdmissibleBox::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn cg_direction_rules() {
        let grad = vec![-1.0, -2.0];
        let g = vec![1.0, 2.0];
        let (d, beta) = cg_direction(None, &g, 5.0, &grad, 20);
        assert_eq!((d, beta), (g.clone(), 0.0));

        let state = CgState {
            g_prev: g.clone(),
            d_prev: vec![0.5, 0.5],
            g_prev_norm2: 5.0,
            since_restart: 0,
        };
        let (d, beta) = cg_direction(Some(&state), &g, 5.0, &grad, 20);
        assert_eq!(beta, 1.0);
        assert_eq!(d, vec![1.5, 2.5]);

        let scaled: Vec<f64> = g.iter().map(|v| 3.0 * v).collect();
        let (_, beta) = cg_direction(Some(&state), &scaled, 45.0, &grad, 20);
        assert_abs_diff_eq!(beta, 9.0);

        // periodic restart
        let old = CgState {
            since_restart: 19,
            ..state.clone()
        };
        assert_eq!(cg_direction(Some(&old), &g, 5.0, &grad, 20).1, 0.0);
        // zero history
        let zero = CgState {
            g_prev_norm2: 0.0,
            ..state.clone()
        };
        assert_eq!(cg_direction(Some(&zero), &g, 5.0, &grad, 20).1, 0.0);
        // non-descent
        let bad = CgState {
            d_prev: vec![-10.0, -10.0],
            ..state
        };
        assert_eq!(cg_direction(Some(&bad), &g, 5.0, &grad, 20), (g, 0.0));
    }

    #[test]
    fn line_search_zero_direction() {
        let out = line_search(
            |_| Ok((0.0, ())),
            &[1.0],
            &[0.0],
            1.0,
            &[1.0],
            &AdmissibleBox::default(),
            1.0,
            &Armijo::default(),
        )
        .unwrap();
        assert_eq!(out, LineSearch::Stagnated);
    }

    #[test]
    fn line_search_one_node_quadratic() {
        // J(q) = a (q − q*)², minimizer inside the box
        let (a, target) = (3.0, 2.2);
        let j = |q: &[f64]| a * (q[0] - target).powi(2);
        let q0 = [4.0];
        let grad = [2.0 * a * (q0[0] - target)];
        let d = [-grad[0]];
        let bounds = AdmissibleBox::new(0.0, 10.0).unwrap();

        // exact model step
        let s_model = 1.0 / (2.0 * a);
        let LineSearch::Accepted { q, step, .. } = line_search(
            |q| Ok((j(q), ())),
            &q0,
            &d,
            j(&q0),
            &grad,
            &bounds,
            s_model,
            &Armijo::default(),
        )
        .unwrap() else {
            panic!("search failed")
        };
        assert_eq!(step, s_model);
        assert_abs_diff_eq!(q[0], target, epsilon = 1e-12);

        // doubled trial: one backtrack lands on the minimizer
        let mut calls = 0;
        let LineSearch::Accepted { q, .. } = line_search(
            |q| {
                calls += 1;
                Ok((j(q), ()))
            },
            &q0,
            &d,
            j(&q0),
            &grad,
            &bounds,
            2.0 * s_model,
            &Armijo::default(),
        )
        .unwrap() else {
            panic!("search failed")
        };
        assert_eq!(calls, 2);
        assert_abs_diff_eq!(q[0], target, epsilon = 1e-12);
    }

    #[test]
    fn line_search_respects_box() {
        let j = |q: &[f64]| (q[0] - 10.0).powi(2);
        let LineSearch::Accepted { q, .. } = line_search(
            |q| Ok((j(q), ())),
            &[3.0],
            &[14.0],
            j(&[3.0]),
            &[-14.0],
            &AdmissibleBox::default(),
            1.0,
            &Armijo::default(),
        )
        .unwrap() else {
            panic!("search failed")
        };
        assert_eq!(q, vec![5.0]);
    }

    #[test]
    fn gamma_rules() {
        assert_eq!(apriori_gamma(2, 0.0, 100, 3.0), 0.0);
        assert_eq!(update_gamma(2, 100, 0.0, 3.0), GAMMA_FLOOR);
        // exponents 3/2 (d = 2) and 12/7 (d = 1)
        let t: f64 = 0.01 / 10.0;
        assert_abs_diff_eq!(
            apriori_gamma(2, 0.01, 100, 2.0),
            (t / (2.0 + t)).powf(1.5),
            epsilon = 1e-20
        );
        assert_abs_diff_eq!(
            apriori_gamma(1, 0.01, 100, 2.0),
            (t / (2.0 + t)).powf(12.0 / 7.0),
            epsilon = 1e-20
        );
        // identical arguments, identical formula
        assert_eq!(apriori_gamma(2, 0.003, 40401, 3.4), update_gamma(2, 40401, 0.003, 3.4));
        // monotone in the misfit
        let mut last = 0.0;
        for m in [1e-4, 1e-3, 1e-2, 1e-1] {
            let g = update_gamma(2, 10_000, m, 3.0);
            assert!(g > last);
            last = g;
        }
    }

    fn small_problem(dim: usize, m: usize, k: usize) -> (Operators, EvaluationMatrix, Vec<f64>, NodalField) {
        let mesh = Mesh::structured(dim, m).unwrap();
        let ops = Operators::new(mesh.clone());
        let pts = generate_points(dim, PointKind::Uniform, k, 0).unwrap();
        let eval = EvaluationMatrix::new(&mesh, &pts).unwrap();
        let f = NodalField::constant(&mesh, 1.0);
        let q_true: Vec<f64> = (0..mesh.num_nodes())
            .map(|i| 3.0 + 0.5 * (mesh.node(i)[0] * 3.0).sin())
            .collect();
        let u = ops
            .solve_forward(&NodalField::new(&mesh, Space::Full, q_true).unwrap(), &f)
            .unwrap();
        let data = eval.evaluate(u.values()).unwrap();
        (ops, eval, data, f)
    }

    #[test]
    fn objective_pieces() {
        let (ops, eval, data, f) = small_problem(2, 6, 9);
        let problem = Problem::new(&ops, &eval, &data, &f, 0.0).unwrap();
        let q: Vec<f64> = (0..ops.num_nodes())
            .map(|i| 3.0 + 0.5 * (ops.mesh().node(i)[0] * 3.0).sin())
            .collect();
        assert!(problem.objective(&q).unwrap().value < 1e-24);

        let p1 = problem.with_gamma(1.0);
        let zero = vec![0.0; ops.num_nodes()];
        let obj = p1.objective(&zero).unwrap();
        assert_eq!(obj.penalty, 0.0);
        assert_abs_diff_eq!(obj.value, obj.misfit * obj.misfit, epsilon = 1e-18);
    }

    #[test]
    fn gradient_without_misfit_is_regularization_only() {
        let (ops, eval, data, f) = small_problem(2, 6, 9);
        let q: Vec<f64> = (0..ops.num_nodes())
            .map(|i| 3.0 + 0.5 * (ops.mesh().node(i)[0] * 3.0).sin())
            .collect();
        let problem = Problem::new(&ops, &eval, &data, &f, 0.0).unwrap();
        assert!(problem.gradient(&q).unwrap().iter().all(|g| g.abs() < 1e-14));
        let gamma = 1e-3;
        let g = problem.with_gamma(gamma).gradient(&q).unwrap();
        let expect = ops.h1_matrix().spmv(&q).unwrap();
        for (a, b) in g.iter().zip(&expect) {
            assert_abs_diff_eq!(*a, 2.0 * gamma * b, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_inverts_h1_matrix() {
        let ops = Operators::new(Mesh::structured(2, 7).unwrap());
        assert!(smooth_gradient(&ops, &vec![0.0; ops.num_nodes()])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let w: Vec<f64> = (0..ops.num_nodes()).map(|i| (i as f64 * 0.37).sin()).collect();
        let g_in = ops.h1_matrix().spmv(&w).unwrap();
        let g = smooth_gradient(&ops, &g_in).unwrap();
        for (a, b) in g.iter().zip(&w) {
            assert_abs_diff_eq!(*a, -b, epsilon = 1e-10);
        }
        assert!(-dot(&g, &g_in) > 0.0);
    }

    #[test]
    fn zero_iterations_returns_initial_iterate() {
        let (ops, eval, data, f) = small_problem(1, 16, 33);
        let problem = Problem::new(&ops, &eval, &data, &f, 1e-6).unwrap();
        let config = InversionConfig {
            max_iter: 0,
            ..InversionConfig::default()
        };
        let rec = reconstruct(&problem, &config).unwrap();
        assert_eq!(rec.q, vec![3.0; ops.num_nodes()]);
        assert_eq!(rec.history.len(), 1);
        assert_eq!(rec.history[0].k, 0);
        assert_eq!(rec.termination, Termination::MaxIterations);
        assert_abs_diff_eq!(rec.history[0].objective, problem.objective(&rec.q).unwrap().value);
    }

    #[test]
    fn reconstruction_decreases_objective_and_stays_feasible() {
        let (ops, eval, data, f) = small_problem(1, 32, 65);
        let problem = Problem::new(&ops, &eval, &data, &f, 1e-9).unwrap();
        let config = InversionConfig {
            max_iter: 100,
            bounds: AdmissibleBox::new(3.3, 3.5).unwrap(),
            ..InversionConfig::default()
        };
        let rec = reconstruct(&problem, &config).unwrap();
        assert!(rec.history.windows(2).all(|w| w[1].objective < w[0].objective));
        assert!(config.bounds.contains(&rec.q));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (ops, eval, data, f) = small_problem(1, 8, 9);
        let problem = Problem::new(&ops, &eval, &data, &f, 1e-6).unwrap();
        let bad = InversionConfig {
            armijo: Armijo {
                shrink: 1.5,
                ..Armijo::default()
            },
            ..InversionConfig::default()
        };
        assert!(matches!(reconstruct(&problem, &bad), Err(Error::Config(_))));
        assert!(Problem::new(&ops, &eval, &data[1..], &f, 1e-6).is_err());
    }
}
