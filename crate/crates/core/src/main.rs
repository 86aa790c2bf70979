use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use thermo_ident::adjoint::FdReport;
use thermo_ident::mesh::{load_mesh, save_mesh, Mesh};
use thermo_ident::scenario::{build_problem, run_scenario, ScenarioConfig, ScenarioKind, Setup};
use thermo_ident::Error;

#[derive(Parser)]
#[command(name = "thermo-ident", version, about = "Joint damage and temperature identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario of a config and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `output_dir` of the config, then `runs/<scenario>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Noise seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Scenario override; `constant-temp` uses the initial temperature.
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
    },
    /// Compare adjoint gradients with central differences at the start point.
    Fdcheck {
        config: PathBuf,
        /// Absolute steps in control space; each probe keeps its best agreement.
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
        step: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        probes: usize,
        /// Largest accepted relative deviation.
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Build the mesh of a config and write it in the text format.
    Gen {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print statistics of a mesh file.
    Info { mesh: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    IgnoreTemp,
    ConstantTemp,
    InterpolateTemp,
    IdentifyMonolithic,
    IdentifyPartitioned,
}

impl ScenarioArg {
    fn kind(self, cfg: &ScenarioConfig) -> ScenarioKind {
        match self {
            ScenarioArg::IgnoreTemp => ScenarioKind::IgnoreTemp,
            ScenarioArg::ConstantTemp => ScenarioKind::ConstantTemp {
                value: cfg.initial.delta_t,
            },
            ScenarioArg::InterpolateTemp => ScenarioKind::InterpolateTemp,
            ScenarioArg::IdentifyMonolithic => ScenarioKind::IdentifyMonolithic,
            ScenarioArg::IdentifyPartitioned => ScenarioKind::IdentifyPartitioned,
        }
    }
}

enum Failure {
    Error(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::Mesh(_)
        | Error::SensorOutsideMesh { .. }
        | Error::ZeroMeasurements(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            config,
            out,
            seed,
            scenario,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = scenario {
                cfg.scenario = s.kind(&cfg);
            }
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| Path::new("runs").join(cfg.scenario.name()));
            info!("running {} into {}", cfg.scenario.name(), out.display());
            let o = run_scenario(&cfg, &out)?;
            let r = &o.report;
            println!(
                "{}: {} iterations, eps_E {:.4e} ({:+.2}%), eps_T {:.4e} ({:+.2}%)",
                cfg.scenario.name(),
                o.record.iterations(),
                r.eps_e,
                r.delta_e,
                r.eps_t,
                r.delta_t
            );
            Ok(())
        }
        Command::Fdcheck {
            config,
            step,
            probes,
            tolerance,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let setup = Setup::new(&cfg)?;
            let (problem, composition) = build_problem(&cfg, &setup)?;
            let c = problem.initial_controls(cfg.initial.youngs, cfg.initial.delta_t);
            let mut best: [Option<FdReport>; 2] = [None, None];
            for &h in &step {
                let (e, t) = problem.fd_check_controls(&c, composition, h, probes, cfg.seed)?;
                for (slot, rep) in best.iter_mut().zip([Some(e), t]) {
                    let Some(rep) = rep else { continue };
                    match slot {
                        None => *slot = Some(rep),
                        Some(b) => {
                            for (bp, p) in b.probes.iter_mut().zip(rep.probes) {
                                if p.deviation < bp.deviation {
                                    *bp = p;
                                }
                            }
                        }
                    }
                }
            }
            let mut worst = 0.0f64;
            for (name, rep) in ["E", "dT"].into_iter().zip(&best) {
                let Some(rep) = rep else { continue };
                for p in &rep.probes {
                    println!(
                        "{name:>2} {:6} step {:.0e} adjoint {:+.10e} fd {:+.10e} dev {:.3e}",
                        p.index, p.step, p.analytic, p.numeric, p.deviation
                    );
                }
                worst = worst.max(rep.max_deviation());
            }
            println!("max relative deviation {worst:.3e}");
            if worst > tolerance {
                return Err(Failure::Check(format!("deviation {worst:.3e} exceeds {tolerance:.1e}")));
            }
            Ok(())
        }
        Command::Mesh { command } => match command {
            MeshCommand::Gen { config, out } => {
                let cfg = ScenarioConfig::load(&config)?;
                let mesh = cfg.mesh.build(&cfg.base_dir)?;
                let text = save_mesh(&mesh);
                match out {
                    Some(p) => fs::write(p, text).map_err(Error::from)?,
                    None => print!("{text}"),
                }
                Ok(())
            }
            MeshCommand::Info { mesh } => {
                let text = fs::read_to_string(&mesh).map_err(Error::from)?;
                print_info(&load_mesh(&text)?);
                Ok(())
            }
        },
    }
}

fn print_info(mesh: &Mesh) {
    let areas: Vec<f64> = (0..mesh.element_count()).map(|e| mesh.area(e)).collect();
    let min = areas.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = areas.iter().cloned().fold(0.0, f64::max);
    println!("nodes     {}", mesh.node_count());
    println!("elements  {}", mesh.element_count());
    println!("area      {:.6}", mesh.total_area());
    println!("elem area {min:.6} .. {max:.6}");
    for (name, nodes) in mesh.tags() {
        println!("tag {name}: {} nodes", nodes.len());
    }
}
