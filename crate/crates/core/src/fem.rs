//! Linear thermo-elastic plane-stress analysis with constant-strain triangles.
//!
//! The residual is `R = K(E)·u − f_ext − f_ΔT(E, ΔT)`. Both the element
//! stiffness and the element thermal load are linear in the element's
//! Young's modulus, so a [`Structure`] caches them per unit modulus and the
//! adjoint gradients can use the exact partials.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::mesh::{signed_area, Mesh, Point, MIN_TRIANGLE_AREA};
use crate::solver::{norm, DofMap, FactoredStiffness, StiffnessSystem};

/// Relative residual bound every primal solution must satisfy.
pub const PRIMAL_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Plate thickness, m.
    pub thickness: f64,
    /// Poisson's ratio.
    pub poisson: f64,
    /// Thermal expansion coefficient, 1/°C.
    pub alpha: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.thickness.is_finite() && self.thickness > 0.0) {
            return Err(invalid(format!("thickness must be > 0, got {}", self.thickness)));
        }
        if !(0.0..0.5).contains(&self.poisson) {
            return Err(invalid(format!("poisson must be in [0, 0.5), got {}", self.poisson)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Closed interval for a physical field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(invalid(format!("bounds need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Plane-stress constitutive matrix divided by E.
fn unit_elasticity(poisson: f64) -> [[f64; 3]; 3] {
    let c = 1.0 / (1.0 - poisson * poisson);
    [
        [c, c * poisson, 0.0],
        [c * poisson, c, 0.0],
        [0.0, 0.0, c * 0.5 * (1.0 - poisson)],
    ]
}

/// Strain-displacement matrix of a CST and its area.
fn strain_displacement(tri: &[Point; 3]) -> Result<([[f64; 6]; 3], f64)> {
    let [p1, p2, p3] = *tri;
    let area = signed_area(p1, p2, p3);
    if area <= MIN_TRIANGLE_AREA {
        return Err(Error::Mesh(format!("degenerate or clockwise triangle (area {area:e})")));
    }
    let b = [p2[1] - p3[1], p3[1] - p1[1], p1[1] - p2[1]];
    let c = [p3[0] - p2[0], p1[0] - p3[0], p2[0] - p1[0]];
    let s = 1.0 / (2.0 * area);
    let mut bm = [[0.0; 6]; 3];
    for i in 0..3 {
        bm[0][2 * i] = b[i] * s;
        bm[1][2 * i + 1] = c[i] * s;
        bm[2][2 * i] = c[i] * s;
        bm[2][2 * i + 1] = b[i] * s;
    }
    Ok((bm, area))
}

/// Per-unit-modulus element quantities.
#[derive(Debug, Clone)]
struct CstElement {
    b: [[f64; 6]; 3],
    /// `K_e / E_e`.
    unit_stiffness: [[f64; 6]; 6],
    /// `f_ΔT,e / (E_e · α · ΔT̄_e)`.
    unit_thermal: [f64; 6],
}

impl CstElement {
    fn new(tri: &[Point; 3], poisson: f64, thickness: f64) -> Result<Self> {
        let (b, area) = strain_displacement(tri)?;
        let d = unit_elasticity(poisson);
        let vol = area * thickness;
        let mut db = [[0.0; 6]; 3];
        for i in 0..3 {
            for j in 0..6 {
                db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
            }
        }
        let mut k = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                k[i][j] = vol * (0..3).map(|m| b[m][i] * db[m][j]).sum::<f64>();
            }
        }
        // symmetrize against roundoff in the triple product
        for i in 0..6 {
            for j in 0..i {
                let v = 0.5 * (k[i][j] + k[j][i]);
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        let d_eps = [d[0][0] + d[0][1], d[1][0] + d[1][1], 0.0];
        let mut g = [0.0; 6];
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = vol * (0..3).map(|m| b[m][j] * d_eps[m]).sum::<f64>();
        }
        Ok(Self {
            b,
            unit_stiffness: k,
            unit_thermal: g,
        })
    }
}

/// 6x6 plane-stress CST stiffness.
pub fn element_stiffness(tri: &[Point; 3], youngs: f64, poisson: f64, thickness: f64) -> Result<[[f64; 6]; 6]> {
    let mut k = CstElement::new(tri, poisson, thickness)?.unit_stiffness;
    k.iter_mut().flatten().for_each(|v| *v *= youngs);
    Ok(k)
}

/// Equivalent nodal force of the thermal strain `α·ΔT̄·[1, 1, 0]`, with `ΔT̄`
/// the average of the corner values.
pub fn element_thermal_load(
    tri: &[Point; 3],
    youngs: f64,
    poisson: f64,
    alpha: f64,
    thickness: f64,
    corner_dt: [f64; 3],
) -> Result<[f64; 6]> {
    let el = CstElement::new(tri, poisson, thickness)?;
    let mean = (corner_dt[0] + corner_dt[1] + corner_dt[2]) / 3.0;
    Ok(el.unit_thermal.map(|g| g * youngs * alpha * mean))
}

/// Which displacement components a support or sensor acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Components {
    X,
    Y,
    #[default]
    Both,
}

impl Components {
    pub fn includes(&self, comp: usize) -> bool {
        match self {
            Components::X => comp == 0,
            Components::Y => comp == 1,
            Components::Both => comp < 2,
        }
    }
}

/// Mesh, material, supports and mechanical loads: everything fixed during
/// identification. Element data and the sparse pattern are precomputed.
#[derive(Debug)]
pub struct Structure {
    mesh: Mesh,
    material: Material,
    dirichlet: BTreeSet<usize>,
    f_ext: Vec<f64>,
    elements: Vec<CstElement>,
    element_dofs: Vec<[usize; 6]>,
    system: StiffnessSystem,
}

impl Structure {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn dirichlet(&self) -> &BTreeSet<usize> {
        &self.dirichlet
    }

    pub fn f_ext(&self) -> &[f64] {
        &self.f_ext
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.mesh.node_count()
    }

    pub fn system(&self) -> &StiffnessSystem {
        &self.system
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 6] {
        self.element_dofs[e]
    }

    pub fn unit_stiffness(&self, e: usize) -> &[[f64; 6]; 6] {
        &self.elements[e].unit_stiffness
    }

    pub fn unit_thermal(&self, e: usize) -> &[f64; 6] {
        &self.elements[e].unit_thermal
    }

    fn mean_dt(&self, e: usize, delta_t: &[f64]) -> f64 {
        let [a, b, c] = self.mesh.triangles()[e];
        (delta_t[a] + delta_t[b] + delta_t[c]) / 3.0
    }

    /// Global thermal load vector `f_ΔT`.
    pub fn thermal_load(&self, youngs: &[f64], delta_t: &[f64]) -> Vec<f64> {
        let alpha = self.material.alpha;
        let mut f = vec![0.0; self.n_dofs()];
        for e in 0..self.elements.len() {
            let scale = youngs[e] * alpha * self.mean_dt(e, delta_t);
            for (a, &g) in self.element_dofs[e].iter().enumerate() {
                f[g] += scale * self.elements[e].unit_thermal[a];
            }
        }
        f
    }

    /// Assembled reduced stiffness for the given moduli.
    pub fn assemble_stiffness(&self, youngs: &[f64]) -> sprs::CsMat<f64> {
        let blocks: Vec<[[f64; 6]; 6]> = self
            .elements
            .iter()
            .zip(youngs)
            .map(|(el, &e)| el.unit_stiffness.map(|row| row.map(|v| v * e)))
            .collect();
        self.system.assemble(blocks.iter())
    }

    /// Element stress `[σxx, σyy, τxy]` for a displacement field.
    pub fn element_stress(&self, e: usize, youngs: f64, u: &[f64], delta_t: &[f64]) -> [f64; 3] {
        let el = &self.elements[e];
        let ue = self.element_dofs[e].map(|g| u[g]);
        let mut eps = [0.0; 3];
        for (i, ei) in eps.iter_mut().enumerate() {
            *ei = (0..6).map(|j| el.b[i][j] * ue[j]).sum();
        }
        let th = self.material.alpha * self.mean_dt(e, delta_t);
        eps[0] -= th;
        eps[1] -= th;
        let d = unit_elasticity(self.material.poisson);
        let mut s = [0.0; 3];
        for (i, si) in s.iter_mut().enumerate() {
            *si = youngs * (0..3).map(|k| d[i][k] * eps[k]).sum::<f64>();
        }
        s
    }
}

/// Builds a [`Structure`] from a mesh, supports and loads.
#[derive(Debug, Clone)]
pub struct StructureBuilder {
    mesh: Mesh,
    material: Material,
    dirichlet: BTreeSet<usize>,
    f_ext: Vec<f64>,
}

impl StructureBuilder {
    pub fn new(mesh: Mesh, material: Material) -> Self {
        let n = 2 * mesh.node_count();
        Self {
            mesh,
            material,
            dirichlet: BTreeSet::new(),
            f_ext: vec![0.0; n],
        }
    }

    pub fn fix_node(mut self, node: usize, comps: Components) -> Self {
        for c in 0..2 {
            if comps.includes(c) {
                self.dirichlet.insert(2 * node + c);
            }
        }
        self
    }

    /// Fixes every node of a boundary tag to zero displacement.
    pub fn fix_tag(mut self, tag: &str, comps: Components) -> Result<Self> {
        let ids = self
            .mesh
            .tag(tag)
            .ok_or_else(|| invalid(format!("unknown boundary tag `{tag}`")))?
            .to_vec();
        for i in ids {
            self = self.fix_node(i, comps);
        }
        Ok(self)
    }

    pub fn point_load(mut self, node: usize, force: [f64; 2]) -> Self {
        self.f_ext[2 * node] += force[0];
        self.f_ext[2 * node + 1] += force[1];
        self
    }

    /// Distributed line load (N/m) on the boundary edges of a tag, lumped
    /// half-and-half onto each edge's end nodes.
    pub fn line_load(mut self, tag: &str, q: [f64; 2]) -> Result<Self> {
        let edges = self.mesh.tag_edges(tag)?;
        if edges.is_empty() {
            return Err(invalid(format!("tag `{tag}` has no boundary edges")));
        }
        for [a, b] in edges {
            let (pa, pb) = (self.mesh.nodes()[a], self.mesh.nodes()[b]);
            let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            for n in [a, b] {
                self.f_ext[2 * n] += 0.5 * len * q[0];
                self.f_ext[2 * n + 1] += 0.5 * len * q[1];
            }
        }
        Ok(self)
    }

    pub fn build(self) -> Result<Structure> {
        self.material.validate()?;
        if self.dirichlet.len() < 3 {
            return Err(invalid(format!(
                "at least 3 constrained dofs are needed, got {}",
                self.dirichlet.len()
            )));
        }
        let elements = (0..self.mesh.element_count())
            .map(|e| CstElement::new(&self.mesh.triangle_coords(e), self.material.poisson, self.material.thickness))
            .collect::<Result<Vec<_>>>()?;
        let element_dofs: Vec<[usize; 6]> = self
            .mesh
            .triangles()
            .iter()
            .map(|&[a, b, c]| [2 * a, 2 * a + 1, 2 * b, 2 * b + 1, 2 * c, 2 * c + 1])
            .collect();
        let dofs = DofMap::new(2 * self.mesh.node_count(), &self.dirichlet);
        let system = StiffnessSystem::new(&element_dofs, dofs)?;
        Ok(Structure {
            mesh: self.mesh,
            material: self.material,
            dirichlet: self.dirichlet,
            f_ext: self.f_ext,
            elements,
            element_dofs,
            system,
        })
    }
}

/// A structure together with the two identifiable fields.
#[derive(Debug, Clone)]
pub struct Model {
    structure: Arc<Structure>,
    youngs: Vec<f64>,
    youngs_bounds: Bounds,
    delta_t: Vec<f64>,
    delta_t_bounds: Bounds,
}

impl Model {
    /// Uniform fields; fails if the values fall outside their bounds.
    pub fn new(
        structure: Arc<Structure>,
        youngs: f64,
        youngs_bounds: Bounds,
        delta_t: f64,
        delta_t_bounds: Bounds,
    ) -> Result<Self> {
        let ne = structure.mesh().element_count();
        let nn = structure.mesh().node_count();
        let mut m = Self {
            structure,
            youngs: vec![youngs; ne],
            youngs_bounds,
            delta_t: vec![delta_t; nn],
            delta_t_bounds,
        };
        m.set_youngs(vec![youngs; ne])?;
        m.set_delta_t(vec![delta_t; nn])?;
        Ok(m)
    }

    pub fn structure(&self) -> &Arc<Structure> {
        &self.structure
    }

    pub fn mesh(&self) -> &Mesh {
        self.structure.mesh()
    }

    pub fn youngs(&self) -> &[f64] {
        &self.youngs
    }

    pub fn delta_t(&self) -> &[f64] {
        &self.delta_t
    }

    pub fn youngs_bounds(&self) -> Bounds {
        self.youngs_bounds
    }

    pub fn delta_t_bounds(&self) -> Bounds {
        self.delta_t_bounds
    }

    pub fn set_youngs(&mut self, youngs: Vec<f64>) -> Result<()> {
        if youngs.len() != self.structure.mesh().element_count() {
            return Err(invalid(format!(
                "youngs field has {} entries for {} elements",
                youngs.len(),
                self.structure.mesh().element_count()
            )));
        }
        if let Some((e, v)) = youngs
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && self.youngs_bounds.contains(**v)))
        {
            return Err(invalid(format!(
                "E[{e}] = {v} outside bounds [{}, {}]",
                self.youngs_bounds.lo, self.youngs_bounds.hi
            )));
        }
        self.youngs = youngs;
        Ok(())
    }

    pub fn set_delta_t(&mut self, delta_t: Vec<f64>) -> Result<()> {
        if delta_t.len() != self.structure.mesh().node_count() {
            return Err(invalid(format!(
                "delta_t field has {} entries for {} nodes",
                delta_t.len(),
                self.structure.mesh().node_count()
            )));
        }
        if let Some((p, v)) = delta_t
            .iter()
            .enumerate()
            .find(|(_, v)| !self.delta_t_bounds.contains(**v))
        {
            return Err(invalid(format!(
                "ΔT[{p}] = {v} outside bounds [{}, {}]",
                self.delta_t_bounds.lo, self.delta_t_bounds.hi
            )));
        }
        self.delta_t = delta_t;
        Ok(())
    }

    /// Replaces a field without a bounds check; used by finite-difference
    /// probes that may step across a bound.
    pub(crate) fn set_youngs_unchecked(&mut self, youngs: Vec<f64>) {
        debug_assert_eq!(youngs.len(), self.youngs.len());
        self.youngs = youngs;
    }

    pub(crate) fn set_delta_t_unchecked(&mut self, delta_t: Vec<f64>) {
        debug_assert_eq!(delta_t.len(), self.delta_t.len());
        self.delta_t = delta_t;
    }

    /// Global thermal load for the current fields.
    pub fn thermal_load(&self) -> Vec<f64> {
        self.structure.thermal_load(&self.youngs, &self.delta_t)
    }
}

/// Displacements plus the factorization reused by the adjoint solve.
#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub u: Vec<f64>,
    pub f_thermal: Vec<f64>,
    pub stiffness: FactoredStiffness,
}

impl PrimalSolution {
    /// `‖K·u − f_ext − f_ΔT‖` over the free dofs.
    pub fn residual_norm(&self, f_ext: &[f64]) -> f64 {
        let dofs = self.stiffness.dofs();
        let ku = self.stiffness.apply_reduced(&dofs.reduce(&self.u));
        let f: Vec<f64> = f_ext.iter().zip(&self.f_thermal).map(|(a, b)| a + b).collect();
        let fr = dofs.reduce(&f);
        let r: Vec<f64> = ku.iter().zip(&fr).map(|(a, b)| a - b).collect();
        norm(&r)
    }
}

/// Assembles `K`, `f_ext` and `f_ΔT` and solves `K·u = f_ext + f_ΔT`.
pub fn solve_primal(model: &Model) -> Result<PrimalSolution> {
    let st = model.structure();
    let k = st.assemble_stiffness(model.youngs());
    let stiffness = st.system().factor(k)?;
    let f_thermal = model.thermal_load();
    let rhs: Vec<f64> = st.f_ext().iter().zip(&f_thermal).map(|(a, b)| a + b).collect();
    let u = stiffness.solve(&rhs)?;
    let sol = PrimalSolution {
        u,
        f_thermal,
        stiffness,
    };
    let dofs = sol.stiffness.dofs();
    let bound = PRIMAL_RTOL * (norm(&dofs.reduce(st.f_ext())) + norm(&dofs.reduce(&sol.f_thermal)) + 1.0);
    let res = sol.residual_norm(st.f_ext());
    if !(res <= bound) {
        return Err(Error::Solver(format!("primal residual {res:e} exceeds {bound:e}")));
    }
    Ok(sol)
}
