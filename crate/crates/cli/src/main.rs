//! Batch front end: `run` executes a configured simulation, `verify`
//! replays the library's invariant suite, `oracle1d` emits optimal 1D
//! crack profiles, `presets` lists the built-in benchmarks.

use clap::{Parser, Subcommand};
use pf4_core::{config, oracle1d, output, solver, verify, Error};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pf4",
    about = "Quasi-static phase-field cohesive-zone fracture solver on spline meshes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a JSON config or a named preset.
    Run {
        /// Path to a JSON run configuration.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Name of a built-in preset (see `pf4 presets`).
        #[arg(long)]
        preset: Option<String>,
        /// Output directory (overrides the config's `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dot-path config overrides, e.g. `material.l0=5.0`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the built-in verification suite and report pass/fail lines.
    Verify,
    /// Emit an optimal 1D crack profile and its regularized length.
    Oracle1d {
        /// Density order: `second` or `fourth`.
        #[arg(long, default_value = "fourth")]
        order: String,
        /// Geometric-function parameter (0 = brittle, 2 = cohesive).
        #[arg(long, default_value_t = 2.0)]
        chi: f64,
        /// Length scale in mm.
        #[arg(long, default_value_t = 1.0)]
        l0: f64,
        /// Write the profile CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in benchmark presets.
    Presets {
        /// Print the full JSON of one preset.
        #[arg(long)]
        emit: Option<String>,
    },
}

fn init_threads() {
    if let Ok(v) = std::env::var("PF4_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("warning: ignoring non-numeric PF4_THREADS = {v}");
        }
    }
}

/// Exit codes: 0 success, 1 user error, 2 solver failure.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Refinement(_) | Error::Io(_) => 1,
        Error::Solver(_) | Error::Geometry(_) => 2,
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            config,
            preset,
            out,
            overrides,
        } => cmd_run(config, preset, out, overrides),
        Command::Verify => Ok(cmd_verify()),
        Command::Oracle1d {
            order,
            chi,
            l0,
            out,
        } => cmd_oracle(&order, chi, l0, out.as_deref()),
        Command::Presets { emit } => cmd_presets(emit.as_deref()),
    }
}

fn cmd_run(
    config_path: Option<PathBuf>,
    preset: Option<String>,
    out: Option<PathBuf>,
    overrides: Vec<String>,
) -> Result<ExitCode, Error> {
    let text = match (&config_path, &preset) {
        (Some(path), None) => std::fs::read_to_string(path)?,
        (None, Some(name)) => config::serialize_config(&config::preset(name)?),
        _ => {
            return Err(Error::Config(
                "exactly one of --config or --preset is required".into(),
            ))
        }
    };
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
    for pair in &overrides {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            Error::Config(format!("override `{pair}` is not of the form key=value"))
        })?;
        config::apply_override(&mut doc, key.trim(), value.trim())?;
    }
    let (cfg, warnings) = config::parse_config(&doc.to_string())?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(
        out_dir.join("resolved_config.json"),
        config::serialize_config(&cfg),
    )?;

    println!("building mesh for `{}` ...", cfg.name);
    let setup = cfg.build_setup()?;
    println!(
        "mesh: {} elements, {} control points, {} dofs",
        setup.mesh.elements.len(),
        setup.mesh.n_cp,
        setup.mesh.n_dof()
    );

    let mut curve_writer = output::CurveWriter::create(&out_dir.join("curve.csv"))?;
    let sample = cfg.output.sample_per_element;
    let interval = cfg.output.snapshot_interval;

    // initial snapshot: the pristine state
    let state0 = solver::SimState::new(&setup.mesh, &setup.mat);
    let snap0 = output::build_snapshot(&setup.mesh, &state0.u, &state0.phi, 0, sample)?;
    output::write_vtk(&snap0, &out_dir.join("snapshot_000000.vtk"))?;

    let mut observer_error: Option<Error> = None;
    let (curve, final_state) = solver::run_simulation(&setup, |row, state| {
        if observer_error.is_some() {
            return;
        }
        let result = (|| -> Result<(), Error> {
            curve_writer.append(row)?;
            println!(
                "step {:4}  u = {:.6} mm  R = {:+.4e} N  iters = {:2}  [{}]",
                row.step, row.applied_mm, row.reaction_n, row.iters, row.status
            );
            if interval > 0 && row.step % interval == 0 {
                let snap =
                    output::build_snapshot(&setup.mesh, &state.u, &state.phi, row.step, sample)?;
                output::write_vtk(
                    &snap,
                    &out_dir.join(format!("snapshot_{:06}.vtk", row.step)),
                )?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            observer_error = Some(e);
        }
    })?;
    if let Some(e) = observer_error {
        return Err(e);
    }

    // final snapshot regardless of the interval
    if !curve.rows.is_empty() {
        let last_step = curve.rows.last().unwrap().step;
        let snap =
            output::build_snapshot(&setup.mesh, &final_state.u, &final_state.phi, last_step, sample)?;
        output::write_vtk(&snap, &out_dir.join(format!("snapshot_{last_step:06}.vtk")))?;
    }

    let failed = curve
        .rows
        .last()
        .is_some_and(|r| r.status == solver::StepStatus::Failed);
    if failed {
        eprintln!("run stopped early: step increment exhausted its halvings");
        return Ok(ExitCode::from(2));
    }
    println!("done: {} steps recorded in {}", curve.rows.len(), out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify() -> ExitCode {
    let results = verify::run_all();
    let mut all_ok = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} — {}", r.name, r.detail);
        all_ok &= r.passed;
    }
    if all_ok {
        println!("all {} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_oracle(order: &str, chi: f64, l0: f64, out: Option<&Path>) -> Result<ExitCode, Error> {
    let profile = match order {
        "second" => oracle1d::profile_second_order(l0, chi)?,
        "fourth" => oracle1d::profile_fourth_order(l0, chi)?,
        other => {
            return Err(Error::Config(format!(
                "unknown order `{other}` (use `second` or `fourth`)"
            )))
        }
    };
    let mut csv = String::from("x_mm,phi,dphi,d2phi\n");
    for i in 0..profile.x.len() {
        csv.push_str(&format!(
            "{:.10e},{:.10e},{:.10e},{:.10e}\n",
            profile.x[i], profile.phi[i], profile.dphi[i], profile.d2phi[i]
        ));
    }
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    println!("gamma = {:.10}", profile.gamma);
    let check = oracle1d::gamma_integral(&profile);
    if check.under_resolved {
        eprintln!("warning: profile grid resolves l0 with fewer than 40 points");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_presets(emit: Option<&str>) -> Result<ExitCode, Error> {
    match emit {
        Some(name) => {
            let cfg = config::preset(name)?;
            println!("{}", config::serialize_config(&cfg));
        }
        None => {
            for p in config::presets() {
                println!("{:32} {}", p.name, p.description);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
