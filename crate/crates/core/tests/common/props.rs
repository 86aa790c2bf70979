//! Property suites shared by the `properties` and `acceptance` targets.

use std::path::Path;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use thermo_ident::baseline::{knn_interpolate, InterpolationConfig};
use thermo_ident::fem::solve_primal;
use thermo_ident::filter::build_kernel;
use thermo_ident::mesh::Point;
use thermo_ident::metrics::{pct_change, rel_l2};
use thermo_ident::objective::Objective;
use thermo_ident::optimize::OptimizerConfig;
use thermo_ident::scenario::{run, run_scenario, ScenarioConfig, ScenarioKind, Setup};
use thermo_ident::sensors::Measurements;

pub type Suite = fn() -> Result<(), String>;

pub const SUITES: [(&str, Suite); 7] = [
    ("filter row-stochasticity/duality", filter),
    ("kNN convex hull/exactness", knn),
    ("metric homogeneity", metrics),
    ("cost non-negativity/zero-iff-match", cost),
    ("K symmetry", stiffness),
    ("sensor scale invariance/sampling linearity", sensors),
    ("determinism", determinism),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn check<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&s, f).map_err(|e| e.to_string())
}

fn points(n: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..10.0f64, 0.0..10.0f64).prop_map(|(x, y)| [x, y]), n)
}

fn nonzero(mag: f64) -> impl Strategy<Value = f64> {
    prop_oneof![-mag..-1.0 / mag, 1.0 / mag..mag]
}

pub fn filter() -> Result<(), String> {
    check(256, (points(12), 0.5..8.0f64), |(sites, r)| {
        let a = build_kernel(&sites, r).unwrap();
        for row in a.matrix().outer_iterator() {
            let s: f64 = row.iter().map(|(_, v)| *v).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|(_, v)| *v >= 0.0));
        }
        prop_assert!(a.forward(&[3.5; 12]).iter().all(|v| (v - 3.5).abs() < 1e-12));
        Ok(())
    })?;
    let vecs = prop::collection::vec(-5.0..5.0f64, 10);
    check(256, (points(10), 0.5..8.0f64, vecs.clone(), vecs), |(sites, r, x, y)| {
        let a = build_kernel(&sites, r).unwrap();
        let lhs: f64 = a.forward(&x).iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(a.backward(&y)).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        Ok(())
    })
}

pub fn knn() -> Result<(), String> {
    let values = prop::collection::vec(-20.0..40.0f64, 6);
    check(256, (points(6), values, points(20), 1usize..=6), |(sensors, values, queries, k)| {
        let cfg = InterpolationConfig { k, ..Default::default() };
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = knn_interpolate(&sensors, &values, &queries, cfg).unwrap();
        prop_assert!(out.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        Ok(())
    })?;
    check(256, prop::collection::vec(-20.0..40.0f64, 5), |values| {
        let sensors: Vec<Point> = (0..5).map(|i| [i as f64 * 1.7, (i * i) as f64 * 0.3]).collect();
        let out = knn_interpolate(&sensors, &values, &sensors, InterpolationConfig::default()).unwrap();
        prop_assert_eq!(out, values);
        Ok(())
    })?;
    check(256, (-20.0..40.0f64, points(10), points(5)), |(c, queries, sensors)| {
        let out = knn_interpolate(&sensors, &[c; 5], &queries, InterpolationConfig::default()).unwrap();
        prop_assert!(out.iter().all(|v| (v - c).abs() <= 1e-12 * (1.0 + c.abs())));
        Ok(())
    })
}

pub fn metrics() -> Result<(), String> {
    let f = prop::collection::vec(-10.0..10.0f64, 8);
    let t = prop::collection::vec(1.0..10.0f64, 8);
    check(256, (f, t, nonzero(1e3)), |(f, t, c)| {
        let a = rel_l2(&f, &t).unwrap();
        let fs: Vec<f64> = f.iter().map(|v| c * v).collect();
        let ts: Vec<f64> = t.iter().map(|v| c * v).collect();
        let b = rel_l2(&fs, &ts).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        Ok(())
    })?;
    check(256, (0.0..5.0f64, 0.01..5.0f64, 1e-3..1e3f64), |(e, r, c)| {
        let a = pct_change(e, r).unwrap();
        let b = pct_change(c * e, c * r).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        Ok(())
    })
}

fn small_setup() -> Setup {
    Setup::new(&super::small()).unwrap()
}

fn youngs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e10..2e11f64, n)
}

pub fn cost() -> Result<(), String> {
    let s = small_setup();
    let obj = Objective::new(s.sensors.clone(), s.measurements.clone(), 1.0, 1.0).unwrap();
    let exact = solve_primal(&s.target).unwrap();
    if obj.cost(&exact.u, s.target.delta_t()).j_total != 0.0 {
        return Err("cost at the target state is not zero".into());
    }
    check(64, (youngs(16), prop::collection::vec(-10.0..40.0f64, 15)), |(e, dt)| {
        let mut m = s.target.clone();
        m.set_youngs(e).unwrap();
        m.set_delta_t(dt).unwrap();
        let p = solve_primal(&m).unwrap();
        let c = obj.cost(&p.u, m.delta_t());
        prop_assert!(c.j_disp >= 0.0 && c.j_temp >= 0.0);
        let sampled = Measurements {
            displacement: s.sensors.sample_displacements(&p.u),
            temperature: s.sensors.sample_temperatures(m.delta_t()),
        };
        prop_assert_eq!(c.j_total == 0.0, sampled == s.measurements);
        Ok(())
    })
}

pub fn stiffness() -> Result<(), String> {
    let s = small_setup();
    check(64, youngs(16), |e| {
        let k = s.structure.assemble_stiffness(&e).to_dense();
        let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..k.nrows() {
            for j in 0..i {
                prop_assert!((k[[i, j]] - k[[j, i]]).abs() <= 1e-14 * scale);
            }
        }
        Ok(())
    })
}

pub fn sensors() -> Result<(), String> {
    let s = small_setup();
    let u0 = solve_primal(&s.target).unwrap().u;
    check(64, (nonzero(1e4), -5.0..5.0f64), |(c, shift)| {
        let u: Vec<f64> = u0.iter().map(|v| v * (1.0 + 0.1 * shift)).collect();
        let dt: Vec<f64> = s.target.delta_t().iter().map(|v| v + shift).collect();
        let base = Objective::new(s.sensors.clone(), s.measurements.clone(), 1.0, 1.0).unwrap().cost(&u, &dt);
        let scaled_meas = Measurements {
            displacement: s.measurements.displacement.iter().map(|d| [c * d[0], c * d[1]]).collect(),
            temperature: s.measurements.temperature.iter().map(|t| c * t).collect(),
        };
        let obj = Objective::new(s.sensors.clone(), scaled_meas, 1.0, 1.0).unwrap();
        let us: Vec<f64> = u.iter().map(|v| c * v).collect();
        let dts: Vec<f64> = dt.iter().map(|v| c * v).collect();
        let scaled = obj.cost(&us, &dts);
        prop_assert!((scaled.j_disp - base.j_disp).abs() <= 1e-12 * base.j_disp.max(1e-300));
        prop_assert!((scaled.j_temp - base.j_temp).abs() <= 1e-12 * base.j_temp.max(1e-300));
        Ok(())
    })?;
    let field = prop::collection::vec(-1.0..1.0f64, 30);
    check(64, (field.clone(), field, -3.0..3.0f64, -3.0..3.0f64), |(a, b, x, y)| {
        let mix: Vec<f64> = a.iter().zip(&b).map(|(p, q)| x * p + y * q).collect();
        let (da, db, dm) = (
            s.sensors.sample_displacements(&a),
            s.sensors.sample_displacements(&b),
            s.sensors.sample_displacements(&mix),
        );
        for i in 0..dm.len() {
            for c in 0..2 {
                prop_assert!((dm[i][c] - (x * da[i][c] + y * db[i][c])).abs() < 1e-12);
            }
        }
        let (ta, tb, tm) = (
            s.sensors.sample_temperatures(&a[..15]),
            s.sensors.sample_temperatures(&b[..15]),
            s.sensors.sample_temperatures(&mix[..15]),
        );
        for i in 0..tm.len() {
            prop_assert!((tm[i] - (x * ta[i] + y * tb[i])).abs() < 1e-12);
        }
        Ok(())
    })
}

pub fn determinism() -> Result<(), String> {
    let a = ScenarioConfig::from_toml(super::SMALL, Path::new(".")).unwrap();
    let b = ScenarioConfig::from_toml(super::SMALL, Path::new(".")).unwrap();
    if a != b {
        return Err("config parse differs between calls".into());
    }
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    for kind in [ScenarioKind::InterpolateTemp, ScenarioKind::IdentifyMonolithic, ScenarioKind::IdentifyPartitioned] {
        let mut cfg = super::small_with(kind);
        cfg.optimizer = OptimizerConfig {
            max_iters: 150,
            ..Default::default()
        };
        cfg.coupling.max_total_iters = 150;
        let x = run(&cfg).unwrap();
        let y = run(&cfg).unwrap();
        if x.record.rows != y.record.rows
            || bits(&x.record.youngs) != bits(&y.record.youngs)
            || bits(&x.record.delta_t) != bits(&y.record.delta_t)
        {
            return Err(format!("{} rerun differs", kind.name()));
        }
    }
    let mut cfg = super::small_with(ScenarioKind::IdentifyPartitioned);
    cfg.coupling.max_total_iters = 100;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_scenario(&cfg, d.path()).map_err(|e| e.to_string())?;
    }
    for f in ["mesh.txt", "target_fields.csv", "initial_fields.csv", "identified_fields.csv", "convergence.csv", "summary.csv"] {
        if std::fs::read(dirs[0].path().join(f)).unwrap() != std::fs::read(dirs[1].path().join(f)).unwrap() {
            return Err(format!("{f} differs between reruns"));
        }
    }
    Ok(())
}
