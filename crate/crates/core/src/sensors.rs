//! Sensor layouts, barycentric sampling, max-value normalization and
//! synthetic measurements.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::fem::{solve_primal, Components, Model};
use crate::mesh::{Mesh, Point};

/// Barycentric tolerance used when locating a point.
const LOCATE_TOL: f64 = 1e-9;

/// Interpolation stencil of a point inside one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub element: usize,
    pub nodes: [usize; 3],
    pub weights: [f64; 3],
}

impl Stencil {
    /// Finds the triangle containing `p`. Points on shared edges go to the
    /// triangle with the largest minimum barycentric weight, lowest index first.
    pub fn locate(mesh: &Mesh, p: Point) -> Result<Self> {
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for e in 0..mesh.element_count() {
            let w = barycentric(&mesh.triangle_coords(e), p);
            let m = w[0].min(w[1]).min(w[2]);
            if m >= -LOCATE_TOL && best.is_none_or(|(bm, _, _)| m > bm) {
                best = Some((m, e, w));
            }
        }
        let (_, element, mut w) = best.ok_or(Error::SensorOutsideMesh { x: p[0], y: p[1] })?;
        w.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        Ok(Self {
            element,
            nodes: mesh.triangles()[element],
            weights: w,
        })
    }

    /// Interpolates a nodal scalar field.
    pub fn scalar(&self, field: &[f64]) -> f64 {
        (0..3).map(|i| self.weights[i] * field[self.nodes[i]]).sum()
    }

    /// Interpolates the displacement vector from a 2-dof-per-node field.
    pub fn vector(&self, u: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += self.weights[i] * u[2 * self.nodes[i]];
            out[1] += self.weights[i] * u[2 * self.nodes[i] + 1];
        }
        out
    }
}

fn barycentric(tri: &[Point; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = *tri;
    let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
    let l1 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / det;
    let l2 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / det;
    [l1, l2, 1.0 - l1 - l2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSensor {
    pub point: Point,
    pub stencil: Stencil,
    pub components: Components,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSensor {
    pub point: Point,
    pub stencil: Stencil,
}

/// Located displacement and temperature sensors on one mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorSet {
    pub displacement: Vec<DisplacementSensor>,
    pub temperature: Vec<TemperatureSensor>,
}

impl SensorSet {
    pub fn new(mesh: &Mesh, displacement: &[(Point, Components)], temperature: &[Point]) -> Result<Self> {
        let displacement = displacement
            .iter()
            .map(|&(point, components)| {
                Ok(DisplacementSensor {
                    point,
                    stencil: Stencil::locate(mesh, point)?,
                    components,
                })
            })
            .collect::<Result<_>>()?;
        let temperature = temperature
            .iter()
            .map(|&point| {
                Ok(TemperatureSensor {
                    point,
                    stencil: Stencil::locate(mesh, point)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            displacement,
            temperature,
        })
    }

    pub fn sample_displacements(&self, u: &[f64]) -> Vec<[f64; 2]> {
        self.displacement.iter().map(|s| s.stencil.vector(u)).collect()
    }

    pub fn sample_temperatures(&self, delta_t: &[f64]) -> Vec<f64> {
        self.temperature.iter().map(|s| s.stencil.scalar(delta_t)).collect()
    }
}

/// Recorded sensor values.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    /// Per displacement sensor; unmeasured components are carried but ignored.
    pub displacement: Vec<[f64; 2]>,
    pub temperature: Vec<f64>,
}

/// Max-value normalization weights `(ω_j, ω_p)`, each equal across its
/// channel. An empty channel gets weight 0.
pub fn max_value_weights(sensors: &SensorSet, meas: &Measurements) -> Result<(f64, f64)> {
    let mut umax: f64 = 0.0;
    for (s, m) in sensors.displacement.iter().zip(&meas.displacement) {
        for c in 0..2 {
            if s.components.includes(c) {
                umax = umax.max(m[c].abs());
            }
        }
    }
    let tmax = meas.temperature.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let w_disp = if sensors.displacement.is_empty() {
        0.0
    } else if umax > 0.0 {
        1.0 / (umax * umax)
    } else {
        return Err(Error::ZeroMeasurements("displacement"));
    };
    let w_temp = if sensors.temperature.is_empty() {
        0.0
    } else if tmax > 0.0 {
        1.0 / (tmax * tmax)
    } else {
        return Err(Error::ZeroMeasurements("temperature"));
    };
    Ok((w_disp, w_temp))
}

/// Optional additive white noise on synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Noise {
    /// Standard deviation of displacement noise, m.
    pub displacement_std: f64,
    /// Standard deviation of temperature noise, °C.
    pub temperature_std: f64,
    pub seed: u64,
}

/// Solves the target model and records its response at the sensors.
pub fn synthesize_measurements(target: &Model, sensors: &SensorSet, noise: Noise) -> Result<Measurements> {
    let sol = solve_primal(target)?;
    let mut meas = Measurements {
        displacement: sensors.sample_displacements(&sol.u),
        temperature: sensors.sample_temperatures(target.delta_t()),
    };
    if noise.displacement_std > 0.0 || noise.temperature_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let nd = Normal::new(0.0, noise.displacement_std).map_err(|e| invalid(e.to_string()))?;
        let nt = Normal::new(0.0, noise.temperature_std).map_err(|e| invalid(e.to_string()))?;
        for v in meas.displacement.iter_mut().flatten() {
            *v += nd.sample(&mut rng);
        }
        for v in &mut meas.temperature {
            *v += nt.sample(&mut rng);
        }
    }
    Ok(meas)
}

pub const LAYOUT_NAMES: [&str; 3] = ["plate_disp14", "plate_temp6", "plate_temp16"];

/// Default sensor coordinates for the 60 m × 30 m plate.
pub fn builtin_layout(name: &str) -> Result<Vec<Point>> {
    let grid = |xs: &[f64], ys: &[f64]| -> Vec<Point> {
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect()
    };
    match name {
        "plate_disp14" => {
            // 5 × 3 grid without the station that falls next to the hole
            let mut pts = grid(&[12.0, 24.0, 36.0, 48.0, 60.0], &[0.0, 15.0, 30.0]);
            pts.retain(|p| *p != [36.0, 15.0]);
            Ok(pts)
        }
        "plate_temp6" => Ok(grid(&[10.0, 28.0, 50.0], &[5.0, 25.0])),
        "plate_temp16" => Ok(grid(&[0.0, 20.0, 40.0, 60.0], &[0.0, 10.0, 20.0, 30.0])),
        other => Err(invalid(format!(
            "unknown sensor layout `{other}`; valid layouts: {}",
            LAYOUT_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect_grid;

    fn grid() -> Mesh {
        generate_rect_grid(4, 2, 4.0, 2.0).unwrap()
    }

    #[test]
    fn node_sensor_returns_node_value() {
        let mesh = grid();
        let field: Vec<f64> = (0..mesh.node_count()).map(|i| i as f64 * 1.5).collect();
        for (i, &p) in mesh.nodes().iter().enumerate() {
            let s = Stencil::locate(&mesh, p).unwrap();
            assert_eq!(s.scalar(&field), field[i]);
        }
    }

    #[test]
    fn linear_field_reproduced() {
        let mesh = grid();
        let field: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        for p in [[0.3, 0.7], [2.5, 1.9], [3.99, 0.01], [1.0, 1.0]] {
            let s = Stencil::locate(&mesh, p).unwrap();
            assert!((s.scalar(&field) - p[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn centroid_sample_is_mean() {
        let mesh = grid();
        let field: Vec<f64> = (0..mesh.node_count()).map(|i| (i * i) as f64).collect();
        let c = mesh.centroid(3);
        let s = Stencil::locate(&mesh, c).unwrap();
        assert_eq!(s.element, 3);
        let [a, b, d] = mesh.triangles()[3];
        assert!((s.scalar(&field) - (field[a] + field[b] + field[d]) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn outside_point_rejected() {
        let mesh = grid();
        assert!(matches!(
            Stencil::locate(&mesh, [5.0, 1.0]),
            Err(Error::SensorOutsideMesh { .. })
        ));
    }

    fn set(nd: usize, nt: usize) -> SensorSet {
        let mesh = grid();
        let d: Vec<_> = mesh.nodes()[..nd].iter().map(|&p| (p, Components::Both)).collect();
        SensorSet::new(&mesh, &d, &mesh.nodes()[..nt]).unwrap()
    }

    #[test]
    fn max_value_weight_examples() {
        let s = set(2, 3);
        let m = Measurements {
            displacement: vec![[0.01, -0.03], [0.002, 0.0]],
            temperature: vec![10.0, 30.0, 22.0],
        };
        let (wd, wt) = max_value_weights(&s, &m).unwrap();
        assert!((wd - 1.0 / 0.0009).abs() < 1e-9);
        assert!((wt - 1.0 / 900.0).abs() < 1e-15);
    }

    #[test]
    fn zero_channel_cannot_be_normalized() {
        let s = set(1, 1);
        let m = Measurements {
            displacement: vec![[0.0, 0.0]],
            temperature: vec![5.0],
        };
        assert!(matches!(max_value_weights(&s, &m), Err(Error::ZeroMeasurements("displacement"))));
    }

    #[test]
    fn unmeasured_component_ignored_by_weights() {
        let mesh = grid();
        let s = SensorSet::new(&mesh, &[(mesh.nodes()[1], Components::X)], &[]).unwrap();
        let m = Measurements {
            displacement: vec![[0.5, 100.0]],
            temperature: vec![],
        };
        let (wd, wt) = max_value_weights(&s, &m).unwrap();
        assert_eq!(wd, 4.0);
        assert_eq!(wt, 0.0);
    }

    #[test]
    fn layouts() {
        assert_eq!(builtin_layout("plate_disp14").unwrap().len(), 14);
        assert_eq!(builtin_layout("plate_temp16").unwrap().len(), 16);
        let t6 = builtin_layout("plate_temp6").unwrap();
        assert_eq!(t6.len(), 6);
        assert_eq!(t6.iter().filter(|p| (p[0] - 30.0).abs() < 5.0).count(), 2);
        let err = builtin_layout("foo").unwrap_err().to_string();
        assert!(LAYOUT_NAMES.iter().all(|n| err.contains(n)));
    }
}
