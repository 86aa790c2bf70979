//! Identification problem in control space: controls go through the filter
//! chain to physical fields, then cost and adjoint gradients are pulled back.

use crate::adjoint::{evaluate, fd_check, pick_probes, FdReport, Gradient};
use crate::error::{invalid, Result};
use crate::fem::{solve_primal, Model};
use crate::filter::FieldMap;
use crate::objective::{Composition, CostBreakdown, Objective};

/// How the temperature field enters a problem.
#[derive(Debug, Clone)]
pub enum Temperature {
    /// Identified through its own control field.
    Identify(FieldMap),
    /// Held at a given nodal field.
    Fixed(Vec<f64>),
}

/// Unbounded control fields. `s_t` is empty when temperature is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Controls {
    pub s_e: Vec<f64>,
    pub s_t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveCounters {
    pub primal: usize,
    pub adjoint: usize,
}

/// Cost and control-space gradients at one control state.
#[derive(Debug, Clone)]
pub struct ControlEvaluation {
    pub cost: CostBreakdown,
    pub grad_e: Vec<f64>,
    pub grad_t: Vec<f64>,
    pub physical: Gradient,
}

#[derive(Debug, Clone)]
pub struct Problem {
    model: Model,
    objective: Objective,
    youngs_map: FieldMap,
    temperature: Temperature,
    counters: SolveCounters,
}

impl Problem {
    pub fn new(mut model: Model, objective: Objective, youngs_map: FieldMap, temperature: Temperature) -> Result<Self> {
        if youngs_map.filter.len() != model.mesh().element_count() {
            return Err(invalid("Young's modulus filter does not match the element count"));
        }
        match &temperature {
            Temperature::Identify(m) if m.filter.len() != model.mesh().node_count() => {
                return Err(invalid("temperature filter does not match the node count"));
            }
            Temperature::Fixed(dt) => model.set_delta_t(dt.clone())?,
            _ => {}
        }
        Ok(Self {
            model,
            objective,
            youngs_map,
            temperature,
            counters: SolveCounters::default(),
        })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn youngs_map(&self) -> &FieldMap {
        &self.youngs_map
    }

    pub fn temperature(&self) -> &Temperature {
        &self.temperature
    }

    pub fn identifies_temperature(&self) -> bool {
        matches!(self.temperature, Temperature::Identify(_))
    }

    pub fn counters(&self) -> SolveCounters {
        self.counters
    }

    /// Uniform controls reproducing uniform physical start values. The
    /// temperature value is ignored when temperature is fixed.
    pub fn initial_controls(&self, youngs: f64, delta_t: f64) -> Controls {
        Controls {
            s_e: self.youngs_map.initial_controls(youngs),
            s_t: match &self.temperature {
                Temperature::Identify(m) => m.initial_controls(delta_t),
                Temperature::Fixed(_) => Vec::new(),
            },
        }
    }

    /// Physical `(E, ΔT)` for a control state.
    pub fn physical(&self, c: &Controls) -> (Vec<f64>, Vec<f64>) {
        let e = self.youngs_map.to_physical(&c.s_e);
        let t = match &self.temperature {
            Temperature::Identify(m) => m.to_physical(&c.s_t),
            Temperature::Fixed(dt) => dt.clone(),
        };
        (e, t)
    }

    fn apply(&mut self, c: &Controls) -> Result<()> {
        let (e, t) = self.physical(c);
        self.model.set_youngs(e)?;
        if self.identifies_temperature() {
            self.model.set_delta_t(t)?;
        }
        Ok(())
    }

    /// One primal and one adjoint solve.
    pub fn evaluate(&mut self, c: &Controls, composition: Composition) -> Result<ControlEvaluation> {
        self.apply(c)?;
        self.counters.primal += 1;
        self.counters.adjoint += 1;
        let ev = evaluate(&self.model, &self.objective, composition)?;
        let grad_e = self.youngs_map.chain_gradient(&c.s_e, &ev.gradient.d_e);
        let grad_t = match &self.temperature {
            Temperature::Identify(m) => m.chain_gradient(&c.s_t, &ev.gradient.d_t),
            Temperature::Fixed(_) => Vec::new(),
        };
        Ok(ControlEvaluation {
            cost: ev.cost,
            grad_e,
            grad_t,
            physical: ev.gradient,
        })
    }

    /// Cost only, one primal solve.
    pub fn cost(&mut self, c: &Controls) -> Result<CostBreakdown> {
        self.apply(c)?;
        self.counters.primal += 1;
        let p = solve_primal(&self.model)?;
        Ok(self.objective.cost(&p.u, self.model.delta_t()))
    }

    /// Central-difference check of both control gradients at `c` with
    /// absolute step `h`. The temperature report is `None` when
    /// temperature is fixed. Probes do not touch the solve counters.
    pub fn fd_check_controls(
        &self,
        c: &Controls,
        composition: Composition,
        h: f64,
        probes: usize,
        seed: u64,
    ) -> Result<(FdReport, Option<FdReport>)> {
        let mut trial = self.clone();
        let ev = trial.evaluate(c, composition)?;
        let mut cost = |c: &Controls| -> Result<f64> { Ok(composition.value(&trial.cost(c)?)) };
        let mut probe_c = c.clone();
        let idx = pick_probes(c.s_e.len(), probes, seed);
        let youngs = fd_check(&c.s_e, &ev.grad_e, &idx, |_, _| h, |x| {
            probe_c.s_e.copy_from_slice(x);
            cost(&probe_c)
        })?;
        probe_c.s_e.copy_from_slice(&c.s_e);
        let temperature = if self.identifies_temperature() {
            let idx = pick_probes(c.s_t.len(), probes, seed.wrapping_add(1));
            Some(fd_check(&c.s_t, &ev.grad_t, &idx, |_, _| h, |x| {
                probe_c.s_t.copy_from_slice(x);
                cost(&probe_c)
            })?)
        } else {
            None
        };
        Ok((youngs, temperature))
    }
}
