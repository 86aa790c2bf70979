#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub mod props;

use thermo_ident::scenario::{ScenarioConfig, ScenarioKind};

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn plate(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&configs_dir().join(format!("plate_{name}.toml"))).unwrap()
}

/// A 4 m × 2 m cantilever strip, clamped left, pulled right, one damaged
/// square and a linear temperature field.
pub const SMALL: &str = r#"
[scenario]
kind = "identify_monolithic"

[mesh]
kind = "rect"
nx = 4
ny = 2
lx = 4.0
ly = 2.0

[material]
youngs = 2e11
poisson = 0.3
alpha = 1e-5
thickness = 0.1

[[supports]]
tag = "left"
components = "both"

[[loads]]
tag = "right"
q = [1e7, 2e6]

[target]
damaged_youngs = 8e10
damage_boxes = [[1.0, 2.0, 0.0, 1.0]]
thermal = { kind = "linear", left = 30.0, right = 10.0 }

[sensors]
displacement = [[2.0, 0.0], [4.0, 0.0], [4.0, 2.0], [2.0, 2.0]]
temperature = [[1.0, 1.0], [3.0, 1.0], [2.0, 0.5]]

[initial]
youngs = 1.9e11
delta_t = 20.0

[bounds]
youngs = [2e9, 2e11]
delta_t = [-10.0, 40.0]

[filter]
youngs_radius = 1.5
delta_t_radius = 2.0
"#;

pub fn small() -> ScenarioConfig {
    ScenarioConfig::from_toml(SMALL, Path::new(".")).unwrap()
}

pub fn small_with(kind: ScenarioKind) -> ScenarioConfig {
    let mut c = small();
    c.scenario = kind;
    c
}
