//! Scenario configuration, end-to-end runs and artifact export.
//!
//! A run builds the structure, synthesizes measurements from a damaged and
//! heated target model, picks the temperature treatment of the scenario,
//! runs the configured driver and compares the result with the target.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::baseline::{constant_field, knn_interpolate, InterpolationConfig};
use crate::error::{invalid, Error, Result};
use crate::fem::{Bounds, Components, Material, Model, Structure, StructureBuilder};
use crate::filter::{build_kernel, ChainOrder, FieldMap};
use crate::mesh::{generate_plate_with_hole, generate_rect_grid, load_mesh, save_mesh, Mesh, PlateWithHole, Point};
use crate::metrics::ErrorReport;
use crate::objective::{Composition, Objective};
use crate::optimize::{run_monolithic, run_partitioned, stationarity_report, CouplingConfig, OptimizerConfig, RunRecord};
use crate::problem::{Problem, Temperature};
use crate::sensors::{builtin_layout, synthesize_measurements, Measurements, Noise, SensorSet};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    PlateWithHole {
        #[serde(default = "plate_lx")]
        lx: f64,
        #[serde(default = "plate_ly")]
        ly: f64,
        #[serde(default = "plate_center")]
        hole_center: Point,
        #[serde(default = "plate_hole")]
        hole_diameter: f64,
        #[serde(default = "plate_elems")]
        target_elems: usize,
    },
    Rect {
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
    },
    File {
        path: PathBuf,
    },
}

fn plate_lx() -> f64 {
    PlateWithHole::default().lx
}
fn plate_ly() -> f64 {
    PlateWithHole::default().ly
}
fn plate_center() -> Point {
    PlateWithHole::default().hole_center
}
fn plate_hole() -> f64 {
    PlateWithHole::default().hole_diameter
}
fn plate_elems() -> usize {
    PlateWithHole::default().target_elems
}

impl MeshSpec {
    pub fn build(&self, base: &Path) -> Result<Mesh> {
        match self {
            MeshSpec::PlateWithHole {
                lx,
                ly,
                hole_center,
                hole_diameter,
                target_elems,
            } => generate_plate_with_hole(&PlateWithHole {
                lx: *lx,
                ly: *ly,
                hole_center: *hole_center,
                hole_diameter: *hole_diameter,
                target_elems: *target_elems,
            }),
            MeshSpec::Rect { nx, ny, lx, ly } => generate_rect_grid(*nx, *ny, *lx, *ly),
            MeshSpec::File { path } => load_mesh(&fs::read_to_string(base.join(path))?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Pristine Young's modulus, Pa.
    pub youngs: f64,
    pub poisson: f64,
    pub alpha: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentsConfig {
    X,
    Y,
    #[default]
    Both,
}

impl From<ComponentsConfig> for Components {
    fn from(c: ComponentsConfig) -> Self {
        match c {
            ComponentsConfig::X => Components::X,
            ComponentsConfig::Y => Components::Y,
            ComponentsConfig::Both => Components::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportConfig {
    pub tag: String,
    #[serde(default)]
    pub components: ComponentsConfig,
}

/// Distributed load in N/m on a tagged boundary.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub tag: String,
    pub q: [f64; 2],
}

/// Closed-form or tabulated nodal temperature change.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThermalField {
    /// Linear in x between the left and right ends of the mesh.
    Linear { left: f64, right: f64 },
    /// `min + (max − min)·exp(−(x − center)² / width)`.
    Gaussian { min: f64, max: f64, center: f64, width: f64 },
    /// CSV with columns `node,value`.
    File { path: PathBuf },
}

/// Evaluates a closed-form field; `x_range` is the mesh extent in x.
pub fn target_field_eval(spec: &ThermalField, points: &[Point], x_range: (f64, f64)) -> Result<Vec<f64>> {
    match *spec {
        ThermalField::Linear { left, right } => {
            let (x0, x1) = x_range;
            if !(x1 > x0) {
                return Err(invalid("linear field needs a positive x extent"));
            }
            Ok(points.iter().map(|p| left + (right - left) * (p[0] - x0) / (x1 - x0)).collect())
        }
        ThermalField::Gaussian { min, max, center, width } => {
            if !(width > 0.0) {
                return Err(invalid("gaussian width must be > 0"));
            }
            Ok(points
                .iter()
                .map(|p| min + (max - min) * (-(p[0] - center).powi(2) / width).exp())
                .collect())
        }
        ThermalField::File { .. } => Err(invalid("tabulated fields are read with `load_field`")),
    }
}

fn load_field(path: &Path, n: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = vec![f64::NAN; n];
    for rec in rdr.deserialize() {
        let (node, value): (usize, f64) = rec?;
        *out.get_mut(node)
            .ok_or_else(|| invalid(format!("{}: node {node} out of range", path.display())))? = value;
    }
    if let Some(i) = out.iter().position(|v| v.is_nan()) {
        return Err(invalid(format!("{}: node {i} has no value", path.display())));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Young's modulus inside the damage boxes.
    pub damaged_youngs: f64,
    /// `[x_min, x_max, y_min, y_max]`; an element is damaged when its
    /// centroid lies inside a box.
    #[serde(default)]
    pub damage_boxes: Vec<[f64; 4]>,
    pub thermal: ThermalField,
}

/// Built-in layout name or explicit coordinates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Layout {
    Named(String),
    Points(Vec<Point>),
}

impl Layout {
    pub fn points(&self) -> Result<Vec<Point>> {
        match self {
            Layout::Named(n) => builtin_layout(n),
            Layout::Points(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub displacement_std: f64,
    pub temperature_std: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub displacement: Layout,
    pub temperature: Layout,
    #[serde(default)]
    pub components: ComponentsConfig,
    /// `Ω₁`.
    #[serde(default = "one")]
    pub response_disp: f64,
    /// `Ω₂`.
    #[serde(default = "one")]
    pub response_temp: f64,
    #[serde(default)]
    pub noise: NoiseConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub youngs: f64,
    pub delta_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub youngs: [f64; 2],
    pub delta_t: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub youngs_radius: f64,
    pub delta_t_radius: f64,
    #[serde(default)]
    pub chain: ChainOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolationSettings {
    pub k: usize,
    pub tie_epsilon: f64,
}

impl Default for InterpolationSettings {
    fn default() -> Self {
        let d = InterpolationConfig::default();
        Self {
            k: d.k,
            tie_epsilon: d.tie_epsilon,
        }
    }
}

/// Temperature treatment and driver.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioKind {
    /// ΔT ≡ 0, identify E from displacements.
    IgnoreTemp,
    /// ΔT ≡ value, identify E from displacements.
    ConstantTemp { value: f64 },
    /// ΔT interpolated from the temperature sensors, identify E.
    InterpolateTemp,
    /// Joint identification, both fields updated every iteration.
    IdentifyMonolithic,
    /// Alternating identification of ΔT and E.
    IdentifyPartitioned,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::IgnoreTemp => "ignore_temp",
            ScenarioKind::ConstantTemp { .. } => "constant_temp",
            ScenarioKind::InterpolateTemp => "interpolate_temp",
            ScenarioKind::IdentifyMonolithic => "identify_monolithic",
            ScenarioKind::IdentifyPartitioned => "identify_partitioned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub mesh: MeshSpec,
    pub material: MaterialConfig,
    pub supports: Vec<SupportConfig>,
    #[serde(default)]
    pub loads: Vec<LoadConfig>,
    pub target: TargetConfig,
    pub sensors: SensorConfig,
    pub initial: InitialConfig,
    pub bounds: BoundsConfig,
    pub filter: FilterConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub interpolation: InterpolationSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let path = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "<root>".into());
            Error::Config { path, message }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<()> {
        let cfg_err = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if self.supports.is_empty() {
            return Err(cfg_err("supports", "at least one support is required".into()));
        }
        let check_bounds = |name: &str, b: [f64; 2]| -> Result<Bounds> {
            Bounds::new(b[0], b[1]).map_err(|e| cfg_err(name, e.to_string()))
        };
        let eb = check_bounds("bounds.youngs", self.bounds.youngs)?;
        let tb = check_bounds("bounds.delta_t", self.bounds.delta_t)?;
        if !eb.contains(self.initial.youngs) {
            return Err(cfg_err("initial.youngs", "outside bounds.youngs".into()));
        }
        if !tb.contains(self.initial.delta_t) {
            return Err(cfg_err("initial.delta_t", "outside bounds.delta_t".into()));
        }
        if !(self.filter.youngs_radius > 0.0) {
            return Err(cfg_err("filter.youngs_radius", "must be > 0".into()));
        }
        if !(self.filter.delta_t_radius > 0.0) {
            return Err(cfg_err("filter.delta_t_radius", "must be > 0".into()));
        }
        if !(self.optimizer.max_step > 0.0) {
            return Err(cfg_err("optimizer.max_step", "must be > 0".into()));
        }
        if self.optimizer.max_iters == 0 {
            return Err(cfg_err("optimizer.max_iters", "must be >= 1".into()));
        }
        if !(self.coupling.beta > 0.0 && self.coupling.beta < 2.0) {
            return Err(cfg_err("coupling.beta", "must be in (0, 2)".into()));
        }
        if self.interpolation.k == 0 {
            return Err(cfg_err("interpolation.k", "must be >= 1".into()));
        }
        for (name, f) in [("mesh.path", mesh_file(&self.mesh)), ("target.thermal.path", thermal_file(&self.target.thermal))] {
            if let Some(p) = f {
                let full = self.base_dir.join(p);
                if !full.exists() {
                    return Err(cfg_err(name, format!("{} does not exist", full.display())));
                }
            }
        }
        Ok(())
    }
}

fn mesh_file(m: &MeshSpec) -> Option<&Path> {
    match m {
        MeshSpec::File { path } => Some(path),
        _ => None,
    }
}

fn thermal_file(t: &ThermalField) -> Option<&Path> {
    match t {
        ThermalField::File { path } => Some(path),
        _ => None,
    }
}

/// Everything fixed before the optimizer starts.
#[derive(Debug, Clone)]
pub struct Setup {
    pub structure: Arc<Structure>,
    pub target: Model,
    pub initial: Model,
    pub sensors: SensorSet,
    pub measurements: Measurements,
    pub temperature_points: Vec<Point>,
}

impl Setup {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let mesh = cfg.mesh.build(&cfg.base_dir)?;
        let mat = Material {
            thickness: cfg.material.thickness,
            poisson: cfg.material.poisson,
            alpha: cfg.material.alpha,
        };
        let mut b = StructureBuilder::new(mesh, mat);
        for s in &cfg.supports {
            b = b.fix_tag(&s.tag, s.components.into())?;
        }
        for l in &cfg.loads {
            b = b.line_load(&l.tag, l.q)?;
        }
        let structure = Arc::new(b.build()?);
        let mesh = structure.mesh();
        let eb = Bounds::new(cfg.bounds.youngs[0], cfg.bounds.youngs[1])?;
        let tb = Bounds::new(cfg.bounds.delta_t[0], cfg.bounds.delta_t[1])?;

        let youngs_t: Vec<f64> = mesh
            .centroids()
            .iter()
            .map(|c| {
                let hit = cfg
                    .target
                    .damage_boxes
                    .iter()
                    .any(|b| c[0] >= b[0] && c[0] <= b[1] && c[1] >= b[2] && c[1] <= b[3]);
                if hit {
                    cfg.target.damaged_youngs
                } else {
                    cfg.material.youngs
                }
            })
            .collect();
        let dt_t = match &cfg.target.thermal {
            ThermalField::File { path } => load_field(&cfg.base_dir.join(path), mesh.node_count())?,
            spec => target_field_eval(spec, mesh.nodes(), x_range(mesh))?,
        };
        let mut target = Model::new(structure.clone(), cfg.initial.youngs, eb, cfg.initial.delta_t, tb)?;
        target.set_youngs(youngs_t)?;
        target.set_delta_t(dt_t)?;
        let initial = Model::new(structure.clone(), cfg.initial.youngs, eb, cfg.initial.delta_t, tb)?;

        let comps: Components = cfg.sensors.components.into();
        let disp: Vec<(Point, Components)> = cfg.sensors.displacement.points()?.into_iter().map(|p| (p, comps)).collect();
        let temperature_points = cfg.sensors.temperature.points()?;
        let sensors = SensorSet::new(mesh, &disp, &temperature_points)?;
        let noise = Noise {
            displacement_std: cfg.sensors.noise.displacement_std,
            temperature_std: cfg.sensors.noise.temperature_std,
            seed: cfg.seed,
        };
        let measurements = synthesize_measurements(&target, &sensors, noise)?;
        Ok(Self {
            structure,
            target,
            initial,
            sensors,
            measurements,
            temperature_points,
        })
    }
}

fn x_range(mesh: &Mesh) -> (f64, f64) {
    mesh.nodes()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])))
}

/// Result of one scenario.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub scenario: ScenarioKind,
    pub record: RunRecord,
    pub report: ErrorReport,
    /// Temperature field the run started from (the fixed field for
    /// scenarios that do not identify ΔT).
    pub initial_delta_t: Vec<f64>,
    pub setup: Setup,
}

/// Builds the problem for `cfg` on an existing setup.
pub fn build_problem(cfg: &ScenarioConfig, setup: &Setup) -> Result<(Problem, Composition)> {
    let mesh = setup.structure.mesh();
    let eb = setup.initial.youngs_bounds();
    let tb = setup.initial.delta_t_bounds();
    let youngs_map = FieldMap::new(build_kernel(&mesh.centroids(), cfg.filter.youngs_radius)?, eb, cfg.filter.chain);
    let n = mesh.node_count();
    let (temperature, composition) = match cfg.scenario {
        ScenarioKind::IgnoreTemp => (Temperature::Fixed(constant_field(0.0, n)), Composition::DisplacementOnly),
        ScenarioKind::ConstantTemp { value } => (Temperature::Fixed(constant_field(value, n)), Composition::DisplacementOnly),
        ScenarioKind::InterpolateTemp => {
            let icfg = InterpolationConfig {
                k: cfg.interpolation.k,
                tie_epsilon: cfg.interpolation.tie_epsilon,
            };
            let f = knn_interpolate(&setup.temperature_points, &setup.measurements.temperature, mesh.nodes(), icfg)?;
            (Temperature::Fixed(f), Composition::DisplacementOnly)
        }
        ScenarioKind::IdentifyMonolithic | ScenarioKind::IdentifyPartitioned => {
            let tmap = FieldMap::new(build_kernel(mesh.nodes(), cfg.filter.delta_t_radius)?, tb, cfg.filter.chain);
            (Temperature::Identify(tmap), Composition::Full)
        }
    };
    let objective = Objective::new(
        setup.sensors.clone(),
        setup.measurements.clone(),
        cfg.sensors.response_disp,
        cfg.sensors.response_temp,
    )?;
    let problem = Problem::new(setup.initial.clone(), objective, youngs_map, temperature)?;
    Ok((problem, composition))
}

/// Runs a scenario in memory.
pub fn run(cfg: &ScenarioConfig) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    let (mut problem, composition) = build_problem(cfg, &setup)?;
    let start = problem.initial_controls(cfg.initial.youngs, cfg.initial.delta_t);
    let (_, initial_delta_t) = problem.physical(&start);
    let record = match cfg.scenario {
        ScenarioKind::IdentifyPartitioned => run_partitioned(&mut problem, start, &cfg.coupling, &cfg.optimizer)?,
        _ => run_monolithic(&mut problem, start, &cfg.optimizer, composition),
    };
    let n = setup.structure.mesh().node_count();
    let report = ErrorReport::new(
        &record.youngs,
        &record.delta_t,
        setup.initial.youngs(),
        &vec![cfg.initial.delta_t; n],
        setup.target.youngs(),
        setup.target.delta_t(),
    )?;
    Ok(Outcome {
        scenario: cfg.scenario,
        record,
        report,
        initial_delta_t,
        setup,
    })
}

/// Runs a scenario and writes its artifacts to `out`. A solver failure
/// still writes what exists plus `error.txt` and is returned as an error.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<Outcome> {
    fs::create_dir_all(out)?;
    let outcome = match run(cfg) {
        Ok(o) => o,
        Err(e) => {
            fs::write(out.join("error.txt"), format!("{e}\n"))?;
            return Err(e);
        }
    };
    write_artifacts(&outcome, out)?;
    if let Some(msg) = &outcome.record.failure {
        fs::write(out.join("error.txt"), format!("{msg}\n"))?;
        return Err(Error::Solver(msg.clone()));
    }
    Ok(outcome)
}

/// `field,entity_id,x,y,value` rows for both fields.
pub fn write_fields<W: Write>(w: W, mesh: &Mesh, youngs: &[f64], delta_t: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["field", "entity_id", "x", "y", "value"])?;
    for (e, c) in mesh.centroids().iter().enumerate() {
        out.write_record(["E".into(), e.to_string(), c[0].to_string(), c[1].to_string(), format!("{:e}", youngs[e])])?;
    }
    for (i, p) in mesh.nodes().iter().enumerate() {
        out.write_record(["dT".into(), i.to_string(), p[0].to_string(), p[1].to_string(), format!("{:e}", delta_t[i])])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_artifacts(o: &Outcome, out: &Path) -> Result<()> {
    let mesh = o.setup.structure.mesh();
    fs::write(out.join("mesh.txt"), save_mesh(mesh))?;
    write_fields(
        fs::File::create(out.join("target_fields.csv"))?,
        mesh,
        o.setup.target.youngs(),
        o.setup.target.delta_t(),
    )?;
    write_fields(
        fs::File::create(out.join("initial_fields.csv"))?,
        mesh,
        o.setup.initial.youngs(),
        &o.initial_delta_t,
    )?;
    write_fields(
        fs::File::create(out.join("identified_fields.csv"))?,
        mesh,
        &o.record.youngs,
        &o.record.delta_t,
    )?;
    o.record.write_convergence_csv(fs::File::create(out.join("convergence.csv"))?)?;
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record(["metric", "value"])?;
    for (k, v) in summary_rows(o) {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_rows(o: &Outcome) -> Vec<(String, String)> {
    let r = &o.report;
    let mut rows = vec![
        ("scenario".to_string(), o.scenario.name().to_string()),
        ("elements".into(), o.setup.structure.mesh().element_count().to_string()),
        ("nodes".into(), o.setup.structure.mesh().node_count().to_string()),
        ("iterations".into(), o.record.iterations().to_string()),
        ("coupling_iterations".into(), o.record.coupling_iterations.to_string()),
        ("primal_solves".into(), o.record.counters.primal.to_string()),
        ("adjoint_solves".into(), o.record.counters.adjoint.to_string()),
        ("converged".into(), o.record.converged.to_string()),
    ];
    if let Some(first) = o.record.rows.first() {
        rows.push(("J_initial".into(), format!("{:e}", first.j)));
    }
    if let Some(s) = stationarity_report(&o.record) {
        rows.push(("J_final".into(), format!("{:e}", s.final_j)));
        rows.push(("J_D_final".into(), format!("{:e}", s.final_j_disp)));
        rows.push(("J_T_final".into(), format!("{:e}", s.final_j_temp)));
        rows.push(("dominant_term".into(), s.dominant.into()));
    }
    rows.extend([
        ("eps_E_initial".into(), format!("{:e}", r.eps_e0)),
        ("eps_E".into(), format!("{:e}", r.eps_e)),
        ("delta_eps_E_pct".into(), format!("{:.4}", r.delta_e)),
        ("eps_T_initial".into(), format!("{:e}", r.eps_t0)),
        ("eps_T".into(), format!("{:e}", r.eps_t)),
        ("delta_eps_T_pct".into(), format!("{:.4}", r.delta_t)),
    ]);
    rows
}
