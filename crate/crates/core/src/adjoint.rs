//! Adjoint gradients of the sensor cost with respect to the elemental
//! Young's modulus and the nodal temperature fields.
//!
//! One adjoint solve `K·ũ = −∂J/∂u` on the primal factorization gives
//!
//! - `dJ/dE_e = ũ_eᵀ·(K_e/E_e·u_e − f_ΔT,e/E_e)`
//! - `dJ/dΔT_p = ∂J/∂ΔT_p − ũᵀ·∂f_ΔT/∂ΔT_p`

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::fem::{solve_primal, Model, PrimalSolution};
use crate::objective::{Composition, CostBreakdown, Objective};
use crate::solver::{norm, FactoredStiffness};

/// Relative residual bound every adjoint solution must satisfy.
pub const ADJOINT_RTOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub u_tilde: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Per element, `dJ/dE`.
    pub d_e: Vec<f64>,
    /// Per node, `dJ/dΔT`.
    pub d_t: Vec<f64>,
}

/// `−∂J/∂u`. Only `J_D` depends on `u`, so this is the same for every
/// composition.
pub fn adjoint_rhs(objective: &Objective, u: &[f64]) -> Vec<f64> {
    objective.d_disp_du(u).into_iter().map(|v| -v).collect()
}

/// Solves `Kᵀ·ũ = rhs` reusing the primal factorization.
pub fn solve_adjoint(stiffness: &FactoredStiffness, rhs: Vec<f64>) -> Result<AdjointSolution> {
    let u_tilde = stiffness.solve(&rhs)?;
    let dofs = stiffness.dofs();
    let rr = dofs.reduce(&rhs);
    let kx = stiffness.apply_reduced(&dofs.reduce(&u_tilde));
    let res: Vec<f64> = kx.iter().zip(&rr).map(|(a, b)| a - b).collect();
    let bound = ADJOINT_RTOL * (norm(&rr) + 1.0);
    if !(norm(&res) <= bound) {
        return Err(Error::Solver(format!("adjoint residual {:e} exceeds {bound:e}", norm(&res))));
    }
    Ok(AdjointSolution { u_tilde, rhs })
}

pub fn grad_e(model: &Model, primal: &PrimalSolution, adjoint: &AdjointSolution) -> Vec<f64> {
    let st = model.structure();
    let alpha = st.material().alpha;
    let tris = st.mesh().triangles();
    (0..tris.len())
        .map(|e| {
            let dofs = st.element_dofs(e);
            let k = st.unit_stiffness(e);
            let g = st.unit_thermal(e);
            let [a, b, c] = tris[e];
            let mean = (model.delta_t()[a] + model.delta_t()[b] + model.delta_t()[c]) / 3.0;
            let mut acc = 0.0;
            for i in 0..6 {
                let ut = adjoint.u_tilde[dofs[i]];
                if ut == 0.0 {
                    continue;
                }
                let ku: f64 = (0..6).map(|j| k[i][j] * primal.u[dofs[j]]).sum();
                acc += ut * (ku - alpha * mean * g[i]);
            }
            acc
        })
        .collect()
}

/// Total temperature gradient; the explicit `J_T` term is included only for
/// [`Composition::Full`].
pub fn grad_t(model: &Model, adjoint: &AdjointSolution, objective: &Objective, composition: Composition) -> Vec<f64> {
    let st = model.structure();
    let alpha = st.material().alpha;
    let mut d = match composition {
        Composition::Full => objective.d_temp_ddt(model.delta_t()),
        Composition::DisplacementOnly => vec![0.0; st.mesh().node_count()],
    };
    for (e, tri) in st.mesh().triangles().iter().enumerate() {
        let dofs = st.element_dofs(e);
        let g = st.unit_thermal(e);
        let ug: f64 = (0..6).map(|i| adjoint.u_tilde[dofs[i]] * g[i]).sum();
        let share = model.youngs()[e] * alpha * ug / 3.0;
        for &n in tri {
            d[n] -= share;
        }
    }
    d
}

/// Everything one cost-and-gradient evaluation produces.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub primal: PrimalSolution,
    pub cost: CostBreakdown,
    pub gradient: Gradient,
}

/// Primal solve, cost, one adjoint solve and both gradients.
pub fn evaluate(model: &Model, objective: &Objective, composition: Composition) -> Result<Evaluation> {
    let primal = solve_primal(model)?;
    let cost = objective.cost(&primal.u, model.delta_t());
    let adjoint = solve_adjoint(&primal.stiffness, adjoint_rhs(objective, &primal.u))?;
    let gradient = Gradient {
        d_e: grad_e(model, &primal, &adjoint),
        d_t: grad_t(model, &adjoint, objective, composition),
    };
    Ok(Evaluation {
        primal,
        cost,
        gradient,
    })
}

/// `|a − b| / max(|a|, |b|, 1e-12)`.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdProbe {
    pub index: usize,
    pub step: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub probes: Vec<FdProbe>,
}

impl FdReport {
    pub fn max_deviation(&self) -> f64 {
        self.probes.iter().fold(0.0, |m, p| m.max(p.deviation))
    }
}

/// `count` distinct indices below `n`, reproducible for a given seed.
pub fn pick_probes(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, count.min(n)).into_vec();
    idx.sort_unstable();
    idx
}

/// Central-difference check of `grad` at `x` on the given entries.
/// `step(i, x_i)` chooses the perturbation of entry `i`.
pub fn fd_check<F, H>(x: &[f64], grad: &[f64], probes: &[usize], mut step: H, mut cost: F) -> Result<FdReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
    H: FnMut(usize, f64) -> f64,
{
    if x.len() != grad.len() {
        return Err(invalid("gradient and parameter lengths differ"));
    }
    let mut xp = x.to_vec();
    let mut out = Vec::with_capacity(probes.len());
    for &i in probes {
        let h = step(i, x[i]);
        xp[i] = x[i] + h;
        let jp = cost(&xp)?;
        xp[i] = x[i] - h;
        let jm = cost(&xp)?;
        xp[i] = x[i];
        let numeric = (jp - jm) / (2.0 * h);
        out.push(FdProbe {
            index: i,
            step: h,
            analytic: grad[i],
            numeric,
            deviation: relative_deviation(grad[i], numeric),
        });
    }
    Ok(FdReport { probes: out })
}

/// Which physical field a check perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Youngs,
    DeltaT,
}

/// FD check of the physical-field gradient: `E` with relative step
/// `h·E_e`, `ΔT` with absolute step `h` °C.
pub fn fd_check_physical(
    model: &Model,
    objective: &Objective,
    composition: Composition,
    field: Field,
    h: f64,
    probes: usize,
    seed: u64,
) -> Result<FdReport> {
    let ev = evaluate(model, objective, composition)?;
    let mut trial = model.clone();
    let eval = |trial: &Model| -> Result<f64> {
        let p = solve_primal(trial)?;
        Ok(composition.value(&objective.cost(&p.u, trial.delta_t())))
    };
    match field {
        Field::Youngs => {
            let x = model.youngs().to_vec();
            let idx = pick_probes(x.len(), probes, seed);
            fd_check(&x, &ev.gradient.d_e, &idx, |_, v| h * v, |xp| {
                trial.set_youngs_unchecked(xp.to_vec());
                eval(&trial)
            })
        }
        Field::DeltaT => {
            let x = model.delta_t().to_vec();
            let idx = pick_probes(x.len(), probes, seed);
            fd_check(&x, &ev.gradient.d_t, &idx, |_, _| h, |xp| {
                trial.set_delta_t_unchecked(xp.to_vec());
                eval(&trial)
            })
        }
    }
}
