//! Batch drivers: each target writes one or more CSV files, `summary.json`
//! and `manifest.json` into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use memwit::classical::classical_validity_boundary;
use memwit::linalg;
use memwit::meq::{self, MemoryQubitModel};
use memwit::operator::DensityMatrix;
use memwit::trajectory::{self, DampFlipScheme, MAX_JUMP_BIN};
use memwit::witness::{best_time_pair, parameter_scan, revival_dominance, Verdict, DEFAULT_DECISION_TOL};
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Thermal damping margin over p2 with both thresholds.
    Fig2,
    /// Zero-temperature memory-qubit damping: (t, C, C♯).
    Nmad,
    /// Thermal memory qubit: (t, C, C♯, γ−, γ+).
    Thermal,
    /// Rates rederived from the jump scheme against the closed forms.
    Meq13,
    /// Trajectory ensemble against the exact average map.
    Traj,
}

#[derive(clap::Args, Debug)]
pub struct ReproArgs {
    #[arg(value_enum)]
    target: Target,
    /// Output directory; nothing is written outside it.
    #[arg(long, default_value = "memwit-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of trajectories (traj).
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Grid points (defaults: fig2 200, nmad 1000, thermal 600, meq13 100, traj 50).
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    p1: f64,
    /// Inverse temperature (defaults: fig2 0.51, thermal 3.66).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma0: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Time step of the jump scheme, in units of 1/κ (traj).
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Final time (defaults: nmad 10, thermal 12, meq13 5, traj 5), in units of 1/κ for meq13 and traj.
    #[arg(long)]
    t_max: Option<f64>,
}

/// Record of one reproduction run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub target: Target,
    pub params: Value,
    pub seed: u64,
    pub version: &'static str,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<V: Serialize>(&mut self, name: &str, v: &V) -> CliResult<()> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn run(a: &ReproArgs) -> CliResult<()> {
    let start = Instant::now();
    let mut out = Outputs::new(&a.out)?;
    let (params, summary) = match a.target {
        Target::Fig2 => fig2(a, &mut out)?,
        Target::Nmad => nmad(a, &mut out)?,
        Target::Thermal => thermal(a, &mut out)?,
        Target::Meq13 => meq13(a, &mut out)?,
        Target::Traj => traj(a, &mut out)?,
    };
    out.json("summary.json", &summary)?;
    let mut outputs = out.files.clone();
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        command_line: std::env::args().collect(),
        target: a.target,
        params,
        seed: a.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    out.json("manifest.json", &manifest)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct ScanRow {
    p2: f64,
    c_assist_first: f64,
    c_form_second: f64,
    margin: f64,
    certified: bool,
}

fn fig2(a: &ReproArgs, out: &mut Outputs) -> CliResult<(Value, Value)> {
    let beta = a.beta.unwrap_or(0.51);
    let n = a.points.unwrap_or(200).max(2);
    let grid: Vec<f64> = (0..n).map(|k| a.p1 * k as f64 / (n - 1) as f64).collect();
    let scan = parameter_scan(a.p1, beta, &grid)?;
    let rows: Vec<ScanRow> = scan
        .points
        .iter()
        .map(|p| ScanRow {
            p2: p.p2,
            c_assist_first: p.report.c_assist_first,
            c_form_second: p.report.c_form_second,
            margin: p.report.margin,
            certified: p.report.verdict == Verdict::QuantumMemoryCertified,
        })
        .collect();
    out.csv("margin.csv", &rows)?;
    let boundary = classical_validity_boundary(a.p1, beta, 1e-4);
    let summary = json!({
        "p1": a.p1,
        "beta": beta,
        "witness_thresholds": scan.crossings,
        "classical_cp_boundary": boundary.as_ref().ok(),
        "classical_cp_boundary_error": boundary.as_ref().err().map(|e| e.to_string()),
        "argmax_p2": scan.argmax().map(|p| p.p2),
    });
    Ok((json!({ "p1": a.p1, "beta": beta, "points": n }), summary))
}

#[derive(Serialize)]
struct ChoiRow {
    t: f64,
    concurrence: f64,
    assistance: f64,
}

fn nmad(a: &ReproArgs, out: &mut Outputs) -> CliResult<(Value, Value)> {
    let n = a.points.unwrap_or(1000).max(3);
    let t_max = a.t_max.unwrap_or(10.0);
    let fam = meq::nmad_propagator(a.gamma0, a.alpha, &meq::uniform_grid(t_max, n))?;
    let series = meq::choi_series(&fam)?;
    let rows: Vec<ChoiRow> = series.iter().map(|p| ChoiRow { t: p.t, concurrence: p.concurrence, assistance: p.assistance }).collect();
    out.csv("choi.csv", &rows)?;
    let gap = series.iter().map(|p| (p.assistance - p.concurrence).abs()).fold(0.0, f64::max);
    let best = best_time_pair(&series, DEFAULT_DECISION_TOL);
    let summary = json!({
        "max_abs_assistance_minus_concurrence": gap,
        "equal_within_1e-9": gap < 1e-9,
        "best_pair": best,
    });
    Ok((json!({ "gamma0": a.gamma0, "alpha": a.alpha, "t_max": t_max, "points": n }), summary))
}

#[derive(Serialize)]
struct ThermalRow {
    t: f64,
    concurrence: f64,
    assistance: f64,
    gamma_minus: f64,
    gamma_plus: f64,
}

fn thermal(a: &ReproArgs, out: &mut Outputs) -> CliResult<(Value, Value)> {
    let beta = a.beta.unwrap_or(3.66);
    let n = a.points.unwrap_or(600).max(3);
    let t_max = a.t_max.unwrap_or(12.0);
    let red = meq::thermal_embedding_reduce(a.gamma0, a.alpha, beta, &meq::uniform_grid(t_max, n))?;
    let series = meq::choi_series(&red.family)?;
    let rows: Vec<ThermalRow> = series
        .iter()
        .enumerate()
        .map(|(i, p)| ThermalRow {
            t: p.t,
            concurrence: p.concurrence,
            assistance: p.assistance,
            gamma_minus: red.gamma_minus[i] / 2.0,
            gamma_plus: red.gamma_plus[i] / 2.0,
        })
        .collect();
    out.csv("thermal.csv", &rows)?;
    let model = MemoryQubitModel::new(a.gamma0, a.alpha, beta)?;
    let summary = json!({
        "revival_check": revival_dominance(&series),
        "best_pair": best_time_pair(&series, DEFAULT_DECISION_TOL),
        "sign_changes_gamma_minus": red.sign_changes[0],
        "sign_changes_gamma_plus": red.sign_changes[1],
        "pole_times": red.confirmed_poles(&model, 1e-4),
        "skipped_grid_points": red.skipped.len(),
    });
    Ok((json!({ "gamma0": a.gamma0, "alpha": a.alpha, "beta": beta, "t_max": t_max, "points": n }), summary))
}

#[derive(Serialize)]
struct RateRow {
    t: f64,
    gamma1_extracted: f64,
    gamma1_formula: f64,
    gamma2_extracted: f64,
    gamma2_formula: f64,
}

fn meq13(a: &ReproArgs, out: &mut Outputs) -> CliResult<(Value, Value)> {
    let n = a.points.unwrap_or(100).max(2);
    let t_max = a.t_max.unwrap_or(5.0) / a.kappa;
    let t_min = 0.05 / a.kappa;
    let grid: Vec<f64> = (0..n).map(|k| t_min + (t_max - t_min) * k as f64 / (n - 1) as f64).collect();
    let scheme = DampFlipScheme::new(a.kappa)?;
    let gens = trajectory::derive_master_equation(&scheme, &grid, 2000)?;
    let rows: Vec<RateRow> = gens
        .iter()
        .map(|g| RateRow {
            t: g.time,
            gamma1_extracted: g.rate_along(&linalg::sigma_minus()) / 2.0,
            gamma1_formula: meq::damp_flip_gamma1(g.time, a.kappa),
            gamma2_extracted: g.rate_along(&linalg::sigma_z()) / 2.0,
            gamma2_formula: meq::damp_flip_gamma2(g.time, a.kappa),
        })
        .collect();
    out.csv("rates.csv", &rows)?;
    let worst = rows
        .iter()
        .map(|r| (r.gamma1_extracted - r.gamma1_formula).abs().max((r.gamma2_extracted - r.gamma2_formula).abs()))
        .fold(0.0, f64::max);
    let summary = json!({ "max_abs_rate_deviation": worst, "within_1e-4": worst < 1e-4 });
    Ok((json!({ "kappa": a.kappa, "t_max": t_max, "points": n }), summary))
}

#[derive(Serialize)]
struct TrajRow {
    t: f64,
    bloch_x: f64,
    bloch_y: f64,
    bloch_z: f64,
    exact_x: f64,
    exact_y: f64,
    exact_z: f64,
    std_err_x: f64,
    std_err_y: f64,
    std_err_z: f64,
}

#[derive(Serialize)]
struct HistRow {
    /// Number of jumps; the last bin collects all larger counts.
    jumps: usize,
    trajectories: usize,
}

fn traj(a: &ReproArgs, out: &mut Outputs) -> CliResult<(Value, Value)> {
    let scheme = DampFlipScheme::new(a.kappa)?;
    let dt = a.dt / a.kappa;
    let t_max = a.t_max.unwrap_or(5.0) / a.kappa;
    let points = a.points.unwrap_or(trajectory::DEFAULT_RECORD_POINTS);
    let rho0 = DensityMatrix::basis(2, 1);
    let res = trajectory::simulate_ensemble_with(&scheme.jump_scheme(), &rho0, dt, t_max, a.n, a.seed, points)?;
    let mut rows = Vec::with_capacity(res.times.len());
    let mut worst: f64 = 0.0;
    for (i, &t) in res.times.iter().enumerate() {
        let e = trajectory::exact_map(&scheme, t, 2000)?.apply_state(&rho0)?.bloch()?;
        let (m, s) = (res.mean_bloch[i], res.std_err[i]);
        let d = res.trace_distance_to(i, e);
        let se = res.distance_std_err(i);
        if d > 0.0 {
            worst = worst.max(d / se);
        }
        rows.push(TrajRow {
            t,
            bloch_x: m[0],
            bloch_y: m[1],
            bloch_z: m[2],
            exact_x: e[0],
            exact_y: e[1],
            exact_z: e[2],
            std_err_x: s[0],
            std_err_y: s[1],
            std_err_z: s[2],
        });
    }
    out.csv("trajectories.csv", &rows)?;
    let hist: Vec<HistRow> = res.jump_histogram.iter().enumerate().map(|(j, &c)| HistRow { jumps: j, trajectories: c }).collect();
    out.csv("jump_histogram.csv", &hist)?;
    let summary = json!({
        "n_traj": res.n_traj,
        "seed": res.seed,
        "worst_distance_in_std_err": worst,
        "within_3_std_err": worst <= 3.0,
        "left_initial_memory": res.left_initial_memory,
        "max_jump_bin": MAX_JUMP_BIN,
    });
    Ok((json!({ "kappa": a.kappa, "dt": dt, "t_max": t_max, "n": a.n, "points": points }), summary))
}
