//! `ctns`: run, validate and study the stochastic chemotaxis-Navier-Stokes simulator.
//!
//! Exit codes: 0 success, 1 invariant breach in strict mode, 2 configuration
//! error, 3 numerical divergence or step-size failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ctns_core::config::{parse_config, Resolved, RunConfig};
use ctns_core::diagnostics::{lambda_constants, validate_coefficients, ConditionMode};
use ctns_core::error::Error;
use ctns_core::experiments::{
    calibrate_entropy_weight, ensemble_run, galerkin_sweep, member_seed, refinement_study, twin_run, EnsembleSpec,
    ExperimentKind, Manifest,
};
use ctns_core::io::{emit_timeseries, write_snapshot, TimeseriesRecord};
use ctns_core::stepper::run;

/// Default root for relative `output.dir` values.
const OUTPUT_ROOT_VAR: &str = "CTNS_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "ctns", version, about = "Stochastic chemotaxis-Navier-Stokes simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    H,
    A,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: time series, snapshots and a summary under output.dir.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the coupling functions against the structural conditions.
    Validate {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "h")]
        mode: Mode,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Independent-path ensemble with entropy statistics.
    Ensemble {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Coupled Galerkin truncation sweep over experiment.m_list.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Twin runs with an experiment.delta0 velocity perturbation.
    Twin {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time-step refinement over experiment.dt_list.
    Refine {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate table for an output directory.
    Report {
        dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 1,
        Error::StepSize { .. } | Error::Divergence { .. } => 3,
        _ => 2,
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<(RunConfig, Resolved), Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let resolved = cfg.resolve()?;
    Ok((cfg, resolved))
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    let dir = PathBuf::from(&cfg.output.dir);
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}

fn prepare_dir(cfg: &RunConfig) -> Result<PathBuf, Error> {
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_canonical())?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn entropy_weight(cfg: &RunConfig, r: &Resolved) -> Result<f64, Error> {
    if cfg.experiment.k > 0.0 {
        Ok(cfg.experiment.k)
    } else {
        calibrate_entropy_weight(&r.stepper, &r.initial)
    }
}

fn cmd_run(path: &Path, seed: Option<u64>) -> Result<(), Error> {
    let (cfg, r) = load(path, seed)?;
    let dir = prepare_dir(&cfg)?;
    let lambdas = match lambda_constants(&r.stepper.coefficients) {
        Ok(l) => Some(l),
        Err(e) => {
            eprintln!("warning: {e}; entropy column reports int n ln n only");
            None
        }
    };
    let k = if lambdas.is_some() { entropy_weight(&cfg, &r)? } else { 0.0 };
    let noise = &r.stepper.noise;
    let path = if noise.is_silent() {
        None
    } else {
        Some(ctns_core::noise::wiener_path(noise, r.stepper.horizon, r.stepper.dt)?)
    };
    let start = Instant::now();
    let traj = run(&r.stepper, &r.initial, path.as_ref(), &mut [])?;
    let records = traj
        .samples
        .iter()
        .map(|s| TimeseriesRecord::of(s, &r.stepper.coefficients, k, lambdas.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    emit_timeseries(fs::File::create(dir.join("timeseries.ndjson"))?, &records)?;
    let stride = cfg.output.snapshot_stride;
    let last = traj.samples.len() - 1;
    for (i, s) in traj.samples.iter().enumerate() {
        if i == last || (stride > 0 && i % stride == 0) {
            write_snapshot(dir.join(format!("snapshot_{:06}.bin", s.step)), s)?;
        }
    }
    let summary = json!({
        "kind": "run",
        "steps": traj.final_state().step,
        "t_final": traj.final_state().t,
        "entropy_weight": k,
        "lambdas": lambdas,
        "monitor": traj.monitor,
        "accumulators": traj.final_state().acc,
        "wall_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    let m = &traj.monitor;
    println!("run complete: t = {}, steps = {}", traj.final_state().t, traj.final_state().step);
    println!(
        "mass drift {:.3e}, min n {:.3e}, c overshoot {:.3e}, min c {:.3e}",
        m.max_mass_drift_rel, m.min_n, m.max_c_overshoot, m.min_c
    );
    for b in &m.breaches {
        println!("breach: {b}");
    }
    println!("output: {}", dir.display());
    Ok(())
}

fn cmd_validate(path: &Path, mode: Mode, seed: Option<u64>) -> Result<(), Error> {
    let (_, r) = load(path, seed)?;
    let mode = match mode {
        Mode::H => ConditionMode::H,
        Mode::A => ConditionMode::A,
    };
    let report = validate_coefficients(&r.stepper.coefficients, mode);
    println!("conditions ({:?}):", mode);
    for c in &report.checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        match c.first_violation {
            Some(at) => println!("  {status}  {}  ({} points, first at c = {at:.6})", c.name, c.violations),
            None => println!("  {status}  {}", c.name),
        }
    }
    if let Some(l) = &report.lambdas {
        println!("lambda0 = {:.6e}, lambda1 = {:.6e}", l.lambda0, l.lambda1);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("{}", if report.passed { "all conditions hold" } else { "some conditions fail" });
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn finish_manifest(dir: &Path, mut manifest: Manifest, files: &[&str], start: Instant) -> Result<(), Error> {
    manifest.files = files.iter().map(|f| f.to_string()).collect();
    manifest.timings_ms.push(start.elapsed().as_secs_f64() * 1e3);
    write_json(&dir.join("manifest.json"), &manifest)
}

fn cmd_ensemble(path: &Path, seed: Option<u64>) -> Result<(), Error> {
    let (cfg, r) = load(path, seed)?;
    let dir = prepare_dir(&cfg)?;
    let start = Instant::now();
    let e = &cfg.experiment;
    let spec = EnsembleSpec {
        members: e.members,
        master_seed: e.master_seed,
        k: entropy_weight(&cfg, &r)?,
        c: e.c,
    };
    let report = ensemble_run(&r.stepper, &r.initial, &spec)?;
    for m in &report.members {
        let sub = dir.join(format!("member_{:04}", m.index));
        fs::create_dir_all(&sub)?;
        write_json(&sub.join("summary.json"), m)?;
    }
    let records: Vec<_> = report
        .times
        .iter()
        .zip(&report.mean_residual)
        .map(|(t, r)| json!({ "t": t, "mean_residual": r }))
        .collect();
    emit_timeseries(fs::File::create(dir.join("residual.ndjson"))?, &records)?;
    write_json(&dir.join("report.json"), &report)?;
    let mut manifest = Manifest::new(ExperimentKind::Ensemble, e.master_seed, serde_json::to_value(&cfg)?);
    manifest.member_seeds = (0..e.members as u64).map(|i| member_seed(e.master_seed, i)).collect();
    finish_manifest(&dir, manifest, &["config.toml", "report.json", "residual.ndjson", "member_*/summary.json"], start)?;
    print_report(&dir)
}

fn cmd_sweep(path: &Path, seed: Option<u64>) -> Result<(), Error> {
    let (cfg, r) = load(path, seed)?;
    let dir = prepare_dir(&cfg)?;
    let start = Instant::now();
    let s = member_seed(cfg.experiment.master_seed, 0);
    let table = galerkin_sweep(&r.stepper, &r.initial, &cfg.experiment.m_list, s)?;
    emit_timeseries(fs::File::create(dir.join("cauchy.ndjson"))?, &table.rows)?;
    write_json(&dir.join("report.json"), &table)?;
    let mut manifest = Manifest::new(ExperimentKind::GalerkinSweep, cfg.experiment.master_seed, serde_json::to_value(&cfg)?);
    manifest.member_seeds = vec![s];
    finish_manifest(&dir, manifest, &["config.toml", "report.json", "cauchy.ndjson"], start)?;
    print_report(&dir)
}

fn cmd_twin(path: &Path, seed: Option<u64>) -> Result<(), Error> {
    let (cfg, r) = load(path, seed)?;
    let dir = prepare_dir(&cfg)?;
    let start = Instant::now();
    let s = member_seed(cfg.experiment.master_seed, 0);
    let report = twin_run(&r.stepper, &r.initial, cfg.experiment.delta0, s)?;
    let st = &report.stability;
    let records: Vec<_> = (0..st.times.len())
        .map(|i| {
            json!({
                "t": st.times[i],
                "lambda": st.lambda[i],
                "xi": st.xi[i],
                "xi_integral": st.xi_integral[i],
                "gronwall_margin": st.gronwall_margin[i],
            })
        })
        .collect();
    emit_timeseries(fs::File::create(dir.join("stability.ndjson"))?, &records)?;
    write_json(&dir.join("report.json"), &report)?;
    let mut manifest = Manifest::new(ExperimentKind::TwinRun, cfg.experiment.master_seed, serde_json::to_value(&cfg)?);
    manifest.member_seeds = vec![s];
    finish_manifest(&dir, manifest, &["config.toml", "report.json", "stability.ndjson"], start)?;
    print_report(&dir)
}

fn cmd_refine(path: &Path, seed: Option<u64>) -> Result<(), Error> {
    let (cfg, r) = load(path, seed)?;
    let dir = prepare_dir(&cfg)?;
    let start = Instant::now();
    let e = &cfg.experiment;
    let report = refinement_study(&r.stepper, &r.initial, &e.dt_list, e.reference_dt, e.paths, e.master_seed)?;
    write_json(&dir.join("report.json"), &report)?;
    let mut manifest = Manifest::new(ExperimentKind::Refinement, e.master_seed, serde_json::to_value(&cfg)?);
    manifest.member_seeds = (0..report.paths as u64).map(|i| member_seed(e.master_seed, i)).collect();
    finish_manifest(&dir, manifest, &["config.toml", "report.json"], start)?;
    print_report(&dir)
}

fn read_json(path: &Path) -> Result<serde_json::Value, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("report", format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn num(v: &serde_json::Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.6e}"),
        None => "null".into(),
    }
}

/// Prints the aggregate table for `dir` and writes `aggregate.json` beside it.
fn print_report(dir: &Path) -> Result<(), Error> {
    let manifest_path = dir.join("manifest.json");
    let aggregate = if manifest_path.exists() {
        let manifest = read_json(&manifest_path)?;
        let report = read_json(&dir.join("report.json"))?;
        let kind = manifest["kind"].as_str().unwrap_or("unknown").to_string();
        println!("{kind} (master seed {})", manifest["master_seed"]);
        match kind.as_str() {
            "ensemble" => {
                println!("{:<20} {:>14} {:>14} {:>14} {:>14}", "quantity", "mean", "min", "max", "q95");
                for key in ["sup_entropy", "sup_kinetic", "enstrophy_integral"] {
                    let s = &report[key];
                    println!(
                        "{key:<20} {:>14} {:>14} {:>14} {:>14}",
                        num(&s["mean"]),
                        num(&s["min"]),
                        num(&s["max"]),
                        num(&s["q95"])
                    );
                }
                println!(
                    "survivors {} / {}, D0 {}, ratio {}, max mean residual {}",
                    report["survivors"],
                    report["members"].as_array().map_or(0, |m| m.len()),
                    num(&report["d0"]),
                    num(&report["ratio"]),
                    num(&report["max_mean_residual"])
                );
                json!({
                    "kind": kind,
                    "survivors": report["survivors"],
                    "sup_entropy": report["sup_entropy"],
                    "sup_kinetic": report["sup_kinetic"],
                    "enstrophy_integral": report["enstrophy_integral"],
                    "d0": report["d0"],
                    "ratio": report["ratio"],
                    "max_mean_residual": report["max_mean_residual"],
                })
            }
            "galerkin_sweep" => {
                println!("{:>6} {:>6} {:>14} {:>14} {:>14}", "m", "m'", "d_n", "d_c", "d_u");
                for row in report["rows"].as_array().into_iter().flatten() {
                    println!(
                        "{:>6} {:>6} {:>14} {:>14} {:>14}",
                        row["m_coarse"],
                        row["m_fine"],
                        num(&row["d_n"]),
                        num(&row["d_c"]),
                        num(&row["d_u"])
                    );
                }
                json!({ "kind": kind, "rows": report["rows"] })
            }
            "twin_run" => {
                let margins = report["stability"]["gronwall_margin"].as_array().cloned().unwrap_or_default();
                let max = margins.iter().filter_map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
                println!(
                    "delta0 {}, fitted C {}, least-squares C {}, max margin {max:.6e}",
                    num(&report["delta0"]),
                    num(&report["fitted_constant"]),
                    num(&report["least_squares_constant"])
                );
                json!({
                    "kind": kind,
                    "delta0": report["delta0"],
                    "fitted_constant": report["fitted_constant"],
                    "least_squares_constant": report["least_squares_constant"],
                    "max_margin": max,
                })
            }
            _ => {
                println!("{:>12} {:>14}", "dt", "error");
                let dts = report["dts"].as_array().cloned().unwrap_or_default();
                let errs = report["errors"].as_array().cloned().unwrap_or_default();
                for (d, e) in dts.iter().zip(&errs) {
                    println!("{:>12} {:>14}", num(d), num(e));
                }
                println!(
                    "slope {}, R^2 {}, inconclusive {}",
                    num(&report["slope"]),
                    num(&report["r_squared"]),
                    report["inconclusive"]
                );
                json!({
                    "kind": kind,
                    "slope": report["slope"],
                    "r_squared": report["r_squared"],
                    "inconclusive": report["inconclusive"],
                })
            }
        }
    } else {
        let summary = read_json(&dir.join("summary.json"))?;
        let m = &summary["monitor"];
        println!("run (t = {}, steps = {})", summary["t_final"], summary["steps"]);
        for key in ["max_mass_drift_rel", "min_n", "min_c", "max_c_overshoot", "max_divergence"] {
            println!("{key:<20} {:>14}", num(&m[key]));
        }
        json!({ "kind": "run", "monitor": m })
    };
    write_json(&dir.join("aggregate.json"), &aggregate)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, seed } => cmd_run(&config, seed),
        Command::Validate { config, mode, seed } => cmd_validate(&config, mode, seed),
        Command::Ensemble { spec, seed } => cmd_ensemble(&spec, seed),
        Command::Sweep { spec, seed } => cmd_sweep(&spec, seed),
        Command::Twin { spec, seed } => cmd_twin(&spec, seed),
        Command::Refine { spec, seed } => cmd_refine(&spec, seed),
        Command::Report { dir, seed: _ } => print_report(&dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
