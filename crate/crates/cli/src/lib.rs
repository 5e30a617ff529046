//! Command-line entry points for `paractl`.
//!
//! Exit codes: 0 on success, 1 on any error, 2 when a simulation ends in a brake.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use paractl::actuator::{self, standard_masses};
use paractl::config::{self, parse_config, RobotConfig};
use paractl::controller::predicted_modal_response;
use paractl::distribution;
use paractl::dynamics;
use paractl::kinematics;
use paractl::plant::{run_closed_loop, tracking_metrics};
use paractl::trajectory::{parse_pose, Trajectory};
use paractl::{ActuatorVector, Tangent};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BRAKE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "paractl", version, about = "Parallel-actuator controller harness")]
struct Cli {
    /// Seed for measurement noise.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the closed loop and write a CSV trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// `.json` segments or `.csv` samples; holds the home pose if omitted.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured duration (s).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Print Jacobian, mass matrix, modes and predicted poles at a pose.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
    },
    /// Static-hold feasibility over a grid of the configured workspace box.
    Workspace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-loop stability over the standard load-mass sweep.
    TuneCheck {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Run with `argv` (including the program name), writing to stdout/stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_command_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_command`] with explicit output streams.
pub fn run_command_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = config::load_config(&config)?;
            writeln!(
                out,
                "{}: ok ({} actuators, {})",
                config.display(),
                cfg.actuators.len(),
                cfg.manifold
            )?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            config,
            trajectory,
            out: path,
            duration,
        } => simulate(&config, trajectory.as_deref(), &path, duration, cli.seed, out),
        Command::Analyze { config, pose } => analyze(&config, &pose, out),
        Command::Workspace { config, grid, out: path } => workspace(&config, &grid, &path, out),
        Command::TuneCheck { config } => tune_check(&config, out),
    }
}

fn read_config(path: &Path) -> anyhow::Result<RobotConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_config(&text)?)
}

fn simulate(
    config: &Path,
    trajectory: Option<&Path>,
    out_path: &Path,
    duration: Option<f64>,
    seed: u64,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let cfg = config::load_config(config)?;
    let mut robot = cfg.build()?;
    robot.sim.seed = seed;
    if let Some(d) = duration {
        robot.sim.duration = d;
        robot.sim.substeps()?;
    }
    let manifold = robot.model.geometry.manifold();
    let reference = match trajectory {
        Some(p) => Trajectory::load(p, manifold)?,
        None => Trajectory::hold(robot.home.clone()),
    };
    let controller = robot.controller()?;
    let trace = run_closed_loop(&controller, &reference, &robot.sim)?;
    trace.write_file(out_path)?;
    let metrics = tracking_metrics(&trace)?;
    writeln!(
        out,
        "{} rows written to {}; max error {:.6e}, rms error {:.6e}, brake events {}",
        trace.rows.len(),
        out_path.display(),
        metrics.max_error,
        metrics.rms_error,
        metrics.brake_events
    )?;
    if metrics.brake_events > 0 {
        let t = trace.rows.iter().find(|r| r.brake).map_or(f64::NAN, |r| r.t);
        writeln!(out, "brake at t = {t}")?;
        return Ok(EXIT_BRAKE);
    }
    Ok(EXIT_OK)
}

fn parse_numbers(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}")))
        .collect()
}

fn write_matrix(out: &mut dyn Write, name: &str, m: &DMatrix<f64>) -> std::io::Result<()> {
    writeln!(out, "{name} ({}x{}):", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.7}")).collect();
        writeln!(out, "  {}", cells.join(" "))?;
    }
    Ok(())
}

fn analyze(config: &Path, pose: &str, out: &mut dyn Write) -> anyhow::Result<i32> {
    let robot = config::load_config(config)?.build()?;
    let model = &robot.model;
    let pose = parse_pose(model.geometry.manifold(), &parse_numbers(pose)?, "pose")?;
    let lambda = kinematics::jacobian(&model.geometry, &pose)?;
    let mass = dynamics::mass_matrix(model, &pose)?;
    let modes = dynamics::modal_decomposition(model, &pose)?;
    let preds = predicted_modal_response(model, &robot.gains, &pose)?;

    writeln!(out, "pose: {pose}")?;
    write_matrix(out, "Lambda", &lambda)?;
    write_matrix(out, "M", &mass)?;
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.7}")).collect::<Vec<_>>().join(", ");
    writeln!(out, "N eigenvalues: {}", list(&modes.eigenvalues))?;
    writeln!(out, "modal masses: {}", list(&modes.modal_masses))?;
    for (i, p) in preds.iter().enumerate() {
        let poles: Vec<String> = p
            .poles
            .iter()
            .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
            .collect();
        writeln!(out, "mode {}: mass {:.7}, poles {}", i + 1, p.modal_mass, poles.join(", "))?;
    }
    Ok(EXIT_OK)
}

fn workspace(config: &Path, grid: &str, out_path: &Path, out: &mut dyn Write) -> anyhow::Result<i32> {
    let cfg = config::load_config(config)?;
    let robot = cfg.build()?;
    let model = &robot.model;
    let ws = cfg
        .workspace
        .as_ref()
        .ok_or_else(|| anyhow!("config has no workspace bounds"))?;
    let counts: Vec<usize> = grid
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad grid size {s:?}")))
        .collect::<anyhow::Result<_>>()?;
    let dim = model.dim();
    let axes = dim.min(2);
    if counts.len() != axes || counts.contains(&0) {
        bail!("--grid needs {axes} positive counts");
    }
    let home = robot.home.clone();
    let base = home.chart_coordinates();
    let coord = |axis: usize, k: usize| {
        if counts[axis] == 1 {
            0.5 * (ws.min[axis] + ws.max[axis])
        } else {
            ws.min[axis] + (ws.max[axis] - ws.min[axis]) * k as f64 / (counts[axis] - 1) as f64
        }
    };

    let mut w = std::io::BufWriter::new(
        std::fs::File::create(out_path).with_context(|| format!("creating {}", out_path.display()))?,
    );
    let names: Vec<String> = (1..=axes).map(|i| format!("coord_{i}")).collect();
    writeln!(w, "{},feasible", names.join(","))?;
    let mut feasible_count = 0;
    let total: usize = counts.iter().product();
    for idx in 0..total {
        let ks = [idx % counts[0], if axes > 1 { idx / counts[0] } else { 0 }];
        let mut offset = Tangent::zeros(dim);
        for a in 0..axes {
            offset[a] = coord(a, ks[a]) - base[a];
        }
        let pose = home.retract(&offset);
        let feasible = static_hold_feasible(&robot, &pose);
        feasible_count += usize::from(feasible);
        let cells: Vec<String> = (0..axes).map(|a| format!("{:.8e}", coord(a, ks[a]))).collect();
        writeln!(w, "{},{}", cells.join(","), u8::from(feasible))?;
    }
    w.flush()?;
    writeln!(out, "{feasible_count} of {total} grid poses can hold still")?;
    Ok(EXIT_OK)
}

/// Whether gravity can be balanced at rest with all constraints met.
fn static_hold_feasible(robot: &config::Robot, pose: &paractl::Pose) -> bool {
    let model = &robot.model;
    let n = model.n();
    let run = || -> paractl::Result<bool> {
        let lambda = kinematics::jacobian(&model.geometry, pose)?;
        let tau = dynamics::bias_force(model, pose, &Tangent::zeros(model.dim()))?;
        distribution::wrench_feasible(
            &lambda,
            &tau,
            &ActuatorVector::zeros(n),
            &ActuatorVector::zeros(n),
            &robot.constraints,
        )
    };
    run().unwrap_or(false)
}

fn tune_check(config: &Path, out: &mut dyn Write) -> anyhow::Result<i32> {
    let cfg = read_config(config)?;
    let gains = cfg.gains()?;
    let model = cfg.actuator_model();
    let report = actuator::stability_check(&gains, &model, &standard_masses(cfg.actuator_params.m0))?;
    for e in &report.entries {
        writeln!(
            out,
            "m = {:>10}: max real part {:+.6e} {}",
            if e.mass.is_infinite() { "inf".to_string() } else { format!("{:.4}", e.mass) },
            e.max_real,
            if e.stable { "stable" } else { "UNSTABLE" }
        )?;
    }
    if report.passed() {
        writeln!(out, "stable for every load mass")?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "unstable")?;
        Ok(EXIT_ERROR)
    }
}
