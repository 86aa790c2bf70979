//! Normalized steepest descent with Barzilai-Borwein step lengths, and the
//! monolithic and Gauss-Seidel partitioned identification drivers.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::objective::Composition;
use crate::problem::{Controls, Problem, SolveCounters};
use crate::solver::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    SteepestBb,
    /// Heavy-ball momentum on top of the BB step.
    MomentumBb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbVariant {
    /// `sᵀs / sᵀy`.
    #[default]
    Bb1,
    /// `sᵀy / yᵀy`.
    Bb2,
}

/// Stopping threshold on the cost.
/// Norm in which step lengths are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepNorm {
    /// `‖·‖₂ / √n`, independent of the number of entries.
    #[default]
    Rms,
    /// Plain `‖·‖₂`.
    L2,
}

impl StepNorm {
    pub fn of(&self, v: &[f64]) -> f64 {
        match self {
            StepNorm::Rms if !v.is_empty() => norm(v) / (v.len() as f64).sqrt(),
            _ => norm(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Factor of the initial cost.
    Relative(f64),
    Absolute(f64),
}

impl Target {
    pub fn resolve(&self, j0: f64) -> f64 {
        match *self {
            Target::Relative(f) => f * j0,
            Target::Absolute(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub bb_variant: BbVariant,
    /// Upper bound on the control-space step length.
    pub max_step: f64,
    pub step_norm: StepNorm,
    pub max_iters: usize,
    pub target: Target,
    /// Velocity decay of [`Algorithm::MomentumBb`].
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::SteepestBb,
            bb_variant: BbVariant::Bb1,
            max_step: 0.1,
            step_norm: StepNorm::Rms,
            max_iters: 2000,
            target: Target::Relative(1e-6),
            momentum: 0.5,
        }
    }
}

/// Stopping rule of one inexact inner solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerConfig {
    /// Stop once the cost has dropped by this fraction of its first value.
    pub reduction: f64,
    pub max_iters: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            reduction: 0.2,
            max_iters: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    /// Relaxation factor in (0, 2); 1 applies the inner result unchanged.
    pub beta: f64,
    /// Temperature subproblem.
    pub inner_a: InnerConfig,
    /// Young's modulus subproblem.
    pub inner_b: InnerConfig,
    /// Budget on the total number of inner iterations.
    pub max_total_iters: usize,
    /// No new coupling iteration starts within this many iterations of the budget.
    pub budget_margin: usize,
    pub target: Target,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            inner_a: InnerConfig::default(),
            inner_b: InnerConfig::default(),
            max_total_iters: 4000,
            budget_margin: 10,
            target: Target::Relative(1e-6),
        }
    }
}

/// BB step length from the last control change `s` and gradient change `y`.
/// `None` when the secant curvature is not positive and finite.
pub fn bb_length(s: &[f64], y: &[f64], variant: BbVariant) -> Option<f64> {
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let sy = dot(s, y);
    let v = match variant {
        BbVariant::Bb1 => dot(s, s) / sy,
        BbVariant::Bb2 => sy / dot(y, y),
    };
    (v.is_finite() && v > 0.0).then_some(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// Control update.
    pub delta: Vec<f64>,
    /// Length of `delta` in the configured norm.
    pub length: f64,
    /// Zero gradient: nothing to do.
    pub stationary: bool,
}

/// Update along `−g/‖g‖` with length `min(γ_BB·‖g‖, γ_max)`, lengths in
/// the configured norm. Without a usable history the length is `γ_max`.
pub fn descent_step(g: &[f64], history: Option<(&[f64], &[f64])>, cfg: &OptimizerConfig) -> Step {
    let gn = cfg.step_norm.of(g);
    if gn == 0.0 || !gn.is_finite() {
        return Step {
            delta: vec![0.0; g.len()],
            length: 0.0,
            stationary: true,
        };
    }
    let length = history
        .and_then(|(s, y)| bb_length(s, y, cfg.bb_variant))
        .map_or(cfg.max_step, |b| (b * gn).min(cfg.max_step));
    Step {
        delta: g.iter().map(|v| -length * v / gn).collect(),
        length,
        stationary: false,
    }
}

/// Per-field step history and momentum.
#[derive(Debug, Clone, Default)]
pub struct FieldStepper {
    prev: Option<(Vec<f64>, Vec<f64>)>,
    velocity: Vec<f64>,
}

impl FieldStepper {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Computes the update at `x` with gradient `g` and remembers both.
    pub fn step(&mut self, x: &[f64], g: &[f64], cfg: &OptimizerConfig) -> Step {
        let hist = self.prev.as_ref().map(|(px, pg)| {
            let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            (s, y)
        });
        let mut step = descent_step(g, hist.as_ref().map(|(s, y)| (s.as_slice(), y.as_slice())), cfg);
        self.prev = Some((x.to_vec(), g.to_vec()));
        if cfg.algorithm == Algorithm::MomentumBb {
            if step.stationary {
                self.velocity.clear();
                return step;
            }
            if self.velocity.len() != x.len() {
                self.velocity = vec![0.0; x.len()];
            }
            for (v, d) in self.velocity.iter_mut().zip(&step.delta) {
                *v = cfg.momentum * *v + d;
            }
            let vn = cfg.step_norm.of(&self.velocity);
            if vn > cfg.max_step {
                self.velocity.iter_mut().for_each(|v| *v *= cfg.max_step / vn);
            }
            step.delta = self.velocity.clone();
            step.length = cfg.step_norm.of(&step.delta);
        }
        step
    }
}

fn apply(x: &mut [f64], step: &Step) {
    x.iter_mut().zip(&step.delta).for_each(|(a, d)| *a += d);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subproblem {
    Monolithic,
    /// Temperature update.
    A,
    /// Young's modulus update.
    B,
}

impl fmt::Display for Subproblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subproblem::Monolithic => "M",
            Subproblem::A => "A",
            Subproblem::B => "B",
        })
    }
}

/// One optimization iteration. Costs are those of the state the step was
/// computed at. `j` is the driven cost: the composition value for
/// monolithic rows and `J_D + J_T` for partitioned rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub iter: usize,
    pub subproblem: Subproblem,
    pub j: f64,
    pub j_disp: f64,
    pub j_temp: f64,
    pub step_e: f64,
    pub step_t: f64,
}

/// Iteration counts of one inner solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerRun {
    pub coupling: usize,
    pub subproblem: Subproblem,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<Row>,
    pub inner: Vec<InnerRun>,
    pub coupling_iterations: usize,
    /// Final controls, after the last update.
    pub controls: Controls,
    pub youngs: Vec<f64>,
    pub delta_t: Vec<f64>,
    pub converged: bool,
    pub counters: SolveCounters,
    /// Set when a solve failed; the record holds everything before it.
    pub failure: Option<String>,
}

impl RunRecord {
    fn new(controls: Controls) -> Self {
        Self {
            rows: Vec::new(),
            inner: Vec::new(),
            coupling_iterations: 0,
            controls,
            youngs: Vec::new(),
            delta_t: Vec::new(),
            converged: false,
            counters: SolveCounters::default(),
            failure: None,
        }
    }

    fn finish(mut self, problem: &Problem) -> Self {
        let (e, t) = problem.physical(&self.controls);
        self.youngs = e;
        self.delta_t = t;
        self.counters = problem.counters();
        self
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    /// Writes `iter,subproblem,J,J_D,J_T,step_E,step_T`.
    pub fn write_convergence_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "subproblem", "J", "J_D", "J_T", "step_E", "step_T"])?;
        for r in &self.rows {
            out.write_record([
                r.iter.to_string(),
                r.subproblem.to_string(),
                format!("{:e}", r.j),
                format!("{:e}", r.j_disp),
                format!("{:e}", r.j_temp),
                format!("{:e}", r.step_e),
                format!("{:e}", r.step_t),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Joint update of every identified field per iteration. Each iteration
/// evaluates the current state, updates, and then stops if that state met
/// the target.
pub fn run_monolithic(
    problem: &mut Problem,
    start: Controls,
    cfg: &OptimizerConfig,
    composition: Composition,
) -> RunRecord {
    let mut rec = RunRecord::new(start);
    let mut step_e = FieldStepper::default();
    let mut step_t = FieldStepper::default();
    let mut j_target = None;
    for iter in 0..cfg.max_iters {
        let ev = match problem.evaluate(&rec.controls, composition) {
            Ok(ev) => ev,
            Err(e) => {
                rec.failure = Some(e.to_string());
                break;
            }
        };
        let j = composition.value(&ev.cost);
        let target = *j_target.get_or_insert(cfg.target.resolve(j));
        let se = step_e.step(&rec.controls.s_e, &ev.grad_e, cfg);
        apply(&mut rec.controls.s_e, &se);
        let mut st_len = 0.0;
        if problem.identifies_temperature() {
            let st = step_t.step(&rec.controls.s_t, &ev.grad_t, cfg);
            apply(&mut rec.controls.s_t, &st);
            st_len = st.length;
        }
        rec.rows.push(Row {
            iter,
            subproblem: Subproblem::Monolithic,
            j,
            j_disp: ev.cost.j_disp,
            j_temp: ev.cost.j_temp,
            step_e: se.length,
            step_t: st_len,
        });
        if j <= target {
            rec.converged = true;
            break;
        }
    }
    rec.finish(problem)
}

enum InnerExit {
    Done,
    Converged,
    Failed,
}

#[allow(clippy::too_many_arguments)]
fn inner_solve(
    problem: &mut Problem,
    rec: &mut RunRecord,
    which: Subproblem,
    inner: &InnerConfig,
    cfg: &OptimizerConfig,
    j_target: &mut Option<f64>,
    outer: &Target,
) -> InnerExit {
    let composition = match which {
        Subproblem::A => Composition::Full,
        _ => Composition::DisplacementOnly,
    };
    let mut stepper = FieldStepper::default();
    let mut first = None;
    let mut exit = InnerExit::Done;
    let mut its = 0;
    while its < inner.max_iters {
        let ev = match problem.evaluate(&rec.controls, composition) {
            Ok(ev) => ev,
            Err(e) => {
                rec.failure = Some(e.to_string());
                exit = InnerExit::Failed;
                break;
            }
        };
        its += 1;
        let j_sub = composition.value(&ev.cost);
        let j_first = *first.get_or_insert(j_sub);
        let target = *j_target.get_or_insert(outer.resolve(ev.cost.j_total));
        let (x, g) = match which {
            Subproblem::A => (&mut rec.controls.s_t, &ev.grad_t),
            _ => (&mut rec.controls.s_e, &ev.grad_e),
        };
        let step = stepper.step(x, g, cfg);
        apply(x, &step);
        let (step_e, step_t) = match which {
            Subproblem::A => (0.0, step.length),
            _ => (step.length, 0.0),
        };
        rec.rows.push(Row {
            iter: rec.rows.len(),
            subproblem: which,
            j: ev.cost.j_total,
            j_disp: ev.cost.j_disp,
            j_temp: ev.cost.j_temp,
            step_e,
            step_t,
        });
        if ev.cost.j_total <= target {
            exit = InnerExit::Converged;
            break;
        }
        if j_sub <= (1.0 - inner.reduction) * j_first {
            break;
        }
    }
    rec.inner.push(InnerRun {
        coupling: rec.coupling_iterations,
        subproblem: which,
        iterations: its,
    });
    exit
}

/// `x ← before + β·(x − before)`; `β = 1` leaves `x` untouched.
pub fn relax(x: &mut [f64], before: &[f64], beta: f64) {
    if beta == 1.0 {
        return;
    }
    for (a, b) in x.iter_mut().zip(before) {
        *a = b + beta * (*a - b);
    }
}

/// Gauss-Seidel coupling of an inexact temperature solve (`J_D + J_T`)
/// and an inexact Young's modulus solve (`J_D`), each with fresh BB
/// history. Requires a problem that identifies temperature.
pub fn run_partitioned(
    problem: &mut Problem,
    start: Controls,
    coupling: &CouplingConfig,
    cfg: &OptimizerConfig,
) -> Result<RunRecord> {
    if !problem.identifies_temperature() {
        return Err(crate::error::invalid("the partitioned driver needs an identified temperature field"));
    }
    if !(coupling.beta > 0.0 && coupling.beta < 2.0) {
        return Err(crate::error::invalid(format!("beta must be in (0, 2), got {}", coupling.beta)));
    }
    let mut rec = RunRecord::new(start);
    let mut j_target = None;
    let stop_at = coupling.max_total_iters.saturating_sub(coupling.budget_margin);
    'outer: while rec.rows.len() < stop_at.max(1) {
        rec.coupling_iterations += 1;
        for (which, inner) in [(Subproblem::A, &coupling.inner_a), (Subproblem::B, &coupling.inner_b)] {
            let before = match which {
                Subproblem::A => rec.controls.s_t.clone(),
                _ => rec.controls.s_e.clone(),
            };
            let exit = inner_solve(problem, &mut rec, which, inner, cfg, &mut j_target, &coupling.target);
            let x = match which {
                Subproblem::A => &mut rec.controls.s_t,
                _ => &mut rec.controls.s_e,
            };
            relax(x, &before, coupling.beta);
            match exit {
                InnerExit::Done => {}
                InnerExit::Converged => {
                    rec.converged = true;
                    break 'outer;
                }
                InnerExit::Failed => break 'outer,
            }
        }
    }
    Ok(rec.finish(problem))
}

/// End-of-run digest.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub final_j: f64,
    pub final_j_disp: f64,
    pub final_j_temp: f64,
    pub iterations: usize,
    pub coupling_iterations: usize,
    /// `"J_D"` or `"J_T"`, whichever is larger at exit.
    pub dominant: &'static str,
}

/// `None` for a run without iterations.
pub fn stationarity_report(rec: &RunRecord) -> Option<StationarityReport> {
    let last = rec.rows.last()?;
    Some(StationarityReport {
        final_j: last.j,
        final_j_disp: last.j_disp,
        final_j_temp: last.j_temp,
        iterations: rec.rows.len(),
        coupling_iterations: rec.coupling_iterations,
        dominant: if last.j_disp >= last.j_temp { "J_D" } else { "J_T" },
    })
}
