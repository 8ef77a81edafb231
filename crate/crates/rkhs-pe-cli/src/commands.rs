//! Subcommand implementations. Each command resolves the config, runs the
//! corresponding pipeline from the library crate, and emits artifacts plus a
//! manifest into the output directory. All writes are completed-then-renamed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rkhs_pe::dynamics::{
    estimate_period, extract_limit_set, farthest_point_sample, fish_invariant, integrate,
    Trajectory, VectorField,
};
use rkhs_pe::estimator::{
    function_error_field, run_estimator, EstimatorConfig, GammaGain, GridSpec, PlantSpec,
};
use rkhs_pe::kernels::Kernel;
use rkhs_pe::persistence::{pe_scan, visitation_scan, IndexingSet, PeOptions};

use crate::config::{
    matrix_from_rows, vector, AlphaInit, AlphaInitName, CenterConfig, ExperimentConfig,
    SystemConfig,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad usage, unparseable or inconsistent configuration, missing files.
    Config(String),
    /// The numerics failed: divergence, singular factorization, no
    /// convergence in a special-function or eigenvalue routine.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<rkhs_pe::Error> for CliError {
    fn from(e: rkhs_pe::Error) -> Self {
        use rkhs_pe::Error::*;
        match e {
            Divergence { .. } | Singular(_) | NoConvergence(_) | NonFinite(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

pub type CmdResult = Result<i32, CliError>;

#[derive(Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, excluding the header line.
    pub rows: usize,
}

#[derive(Serialize, Deserialize)]
pub struct RunManifest {
    pub package: String,
    pub version: String,
    pub command: String,
    pub created_unix: u64,
    pub seed: u64,
    /// Config with the center strategy resolved to the explicit points used.
    pub config: ExperimentConfig,
    pub files: Vec<FileEntry>,
    pub summary: Value,
}

/// Artifact sink: buffers file metadata, writes each file atomically.
struct Artifacts {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8], data_rows: usize) -> Result<(), CliError> {
        write_atomic(&self.dir, name, bytes)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            rows: data_rows,
        });
        Ok(())
    }

    fn finish(
        self,
        command: &str,
        seed: u64,
        config: ExperimentConfig,
        summary: Value,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            config,
            files: self.files,
            summary,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.dir, "manifest.json", text.as_bytes())
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn build_kernel(cfg: &ExperimentConfig) -> Result<Kernel, CliError> {
    match cfg.kernel.family.as_str() {
        "matern" => Ok(Kernel::matern(cfg.kernel.nu, cfg.kernel.lengthscale)?),
        "gaussian" => Ok(Kernel::gaussian(cfg.kernel.lengthscale)?),
        other => Err(CliError::Config(format!(
            "kernel.family: unknown family {other:?} (expected \"matern\" or \"gaussian\")"
        ))),
    }
}

fn explicit_centers(points: &[Vec<f64>]) -> Result<Vec<DVector<f64>>, CliError> {
    if points.is_empty() {
        return Err(CliError::Config("centers.points: empty list".into()));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(CliError::Config(
            "centers.points: points must be nonempty and share one dimension".into(),
        ));
    }
    Ok(points.iter().map(|p| vector(p)).collect())
}

fn circle_points(count: usize, radius: f64) -> Result<Vec<DVector<f64>>, CliError> {
    if count == 0 {
        return Err(CliError::Config("centers.count: must be positive".into()));
    }
    if !(radius > 0.0) {
        return Err(CliError::Config(format!(
            "centers.radius: must be positive, got {radius}"
        )));
    }
    Ok((0..count)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            vector(&[radius * th.cos(), radius * th.sin()])
        })
        .collect())
}

/// Resolve the configured center strategy, sampling the trajectory tail when
/// the strategy calls for it.
fn resolve_centers(
    cfg: &ExperimentConfig,
    traj: Option<&Trajectory>,
) -> Result<Vec<DVector<f64>>, CliError> {
    match &cfg.centers {
        CenterConfig::Explicit { points } => explicit_centers(points),
        CenterConfig::UniformCircle { count, radius } => circle_points(*count, *radius),
        CenterConfig::LimitSetThinned { spacing } => {
            let traj = traj.ok_or_else(|| {
                CliError::Config("centers.strategy: limit-set-thinned needs a trajectory".into())
            })?;
            let est = extract_limit_set(traj, cfg.transient_cutoff(), *spacing)?;
            Ok(est.points().to_vec())
        }
        CenterConfig::LimitSetFps { count } => {
            let traj = traj.ok_or_else(|| {
                CliError::Config("centers.strategy: limit-set-fps needs a trajectory".into())
            })?;
            Ok(farthest_point_sample(traj, cfg.transient_cutoff(), *count)?)
        }
    }
}

/// The simulated open-loop system. For `span` the unknown is built from the
/// configured explicit centers, so the center strategy must be explicit.
fn build_vector_field(cfg: &ExperimentConfig, kernel: &Kernel) -> Result<VectorField, CliError> {
    match &cfg.system {
        SystemConfig::Hopf => Ok(VectorField::hopf()),
        SystemConfig::Fish { lambda } => Ok(VectorField::fish(*lambda)),
        SystemConfig::Custom { m, c } => {
            let m = matrix_from_rows(m, "system.m").map_err(CliError::Config)?;
            Ok(VectorField::affine(m, vector(c))?)
        }
        SystemConfig::Span { alpha, gain } => {
            let (omega, alpha, gain) = span_parts(cfg, kernel, alpha, *gain)?;
            let d = omega.dim();
            Ok(VectorField::new("span", d, move |x| {
                let phi = omega.regressor(x).expect("regressor on finite state");
                let mut out = x * -gain;
                out[d - 1] += phi.dot(&alpha);
                out
            }))
        }
    }
}

fn span_parts(
    cfg: &ExperimentConfig,
    kernel: &Kernel,
    alpha: &[f64],
    gain: f64,
) -> Result<(IndexingSet, DVector<f64>, f64), CliError> {
    let points = match &cfg.centers {
        CenterConfig::Explicit { points } => explicit_centers(points)?,
        _ => {
            return Err(CliError::Config(
                "system.kind=span requires centers.strategy=explicit".into(),
            ))
        }
    };
    if alpha.len() != points.len() {
        return Err(CliError::Config(format!(
            "system.alpha: {} coefficients for {} centers",
            alpha.len(),
            points.len()
        )));
    }
    if !(gain > 0.0) {
        return Err(CliError::Config(format!(
            "system.gain: must be positive, got {gain}"
        )));
    }
    Ok((IndexingSet::new(kernel.clone(), points)?, vector(alpha), gain))
}

/// Estimator-facing plant for `estimate`: A from the config, B the last unit
/// column, unknown f per system.
fn build_plant(
    cfg: &ExperimentConfig,
    kernel: &Kernel,
    dim: usize,
) -> Result<PlantSpec, CliError> {
    let a = match &cfg.estimator.a {
        Some(rows) => {
            let m = matrix_from_rows(rows, "estimator.a").map_err(CliError::Config)?;
            if m.nrows() != dim || m.ncols() != dim {
                return Err(CliError::Config(format!(
                    "estimator.a: expected {dim}×{dim}, got {}×{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            m
        }
        None => {
            if !(cfg.estimator.a_gain > 0.0) {
                return Err(CliError::Config(format!(
                    "estimator.a_gain: must be positive, got {}",
                    cfg.estimator.a_gain
                )));
            }
            DMatrix::identity(dim, dim) * -cfg.estimator.a_gain
        }
    };
    let mut b = DVector::zeros(dim);
    b[dim - 1] = 1.0;

    match &cfg.system {
        SystemConfig::Hopf => Ok(PlantSpec::from_hopf(a)?),
        SystemConfig::Fish { lambda } => Ok(PlantSpec::from_fish(*lambda, a)?),
        SystemConfig::Custom { m, c } => {
            let m = matrix_from_rows(m, "system.m").map_err(CliError::Config)?;
            if m.nrows() != dim {
                return Err(CliError::Config(format!(
                    "system.m: expected {dim}×{dim}, got {}×{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let c = vector(c);
            // affine system: nothing unknown, f ≡ 0
            Ok(PlantSpec::new(a, b, |_x: &DVector<f64>| 0.0)?
                .with_known_part(move |x: &DVector<f64>| &m * x + &c))
        }
        SystemConfig::Span { alpha, gain } => {
            let (omega, alpha, gain) = span_parts(cfg, kernel, alpha, *gain)?;
            let plant = PlantSpec::new(a, b, move |x: &DVector<f64>| {
                omega.regressor(x).expect("regressor on finite state").dot(&alpha)
            })?;
            Ok(plant.with_known_part(move |x: &DVector<f64>| x * -gain))
        }
    }
}

/// Ground-truth scalar for contour fields, per system selector.
fn truth_fn(
    system: &SystemConfig,
    kernel: &Kernel,
    cfg: &ExperimentConfig,
) -> Result<Box<dyn Fn(&DVector<f64>) -> f64>, CliError> {
    match system {
        SystemConfig::Hopf => Ok(Box::new(|p: &DVector<f64>| {
            -p[0] + p[1] * (1.0 - p[0] * p[0] - p[1] * p[1])
        })),
        SystemConfig::Fish { lambda } => {
            let l = *lambda;
            Ok(Box::new(move |p: &DVector<f64>| {
                2.0 * p[0] - 3.0 * p[0] * p[0]
                    + l * p[1] * (p[0].powi(3) - p[0] * p[0] + p[1] * p[1])
            }))
        }
        SystemConfig::Custom { .. } => Ok(Box::new(|_| 0.0)),
        SystemConfig::Span { alpha, gain } => {
            let (omega, alpha, _) = span_parts(cfg, kernel, alpha, *gain)?;
            Ok(Box::new(move |p: &DVector<f64>| {
                omega.regressor(p).expect("regressor on grid point").dot(&alpha)
            }))
        }
    }
}

fn validate_common(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
        return Err(CliError::Config(format!(
            "horizon: must be positive and finite, got {}",
            cfg.horizon
        )));
    }
    if !(cfg.step > 0.0) || !cfg.step.is_finite() {
        return Err(CliError::Config(format!(
            "step: must be positive and finite, got {}",
            cfg.step
        )));
    }
    if cfg.store_every == 0 {
        return Err(CliError::Config("store_every: must be at least 1".into()));
    }
    Ok(())
}

/// Config copy with the centers pinned to the points actually used, so a run
/// directory is self-describing (contour re-reads it).
fn resolved_config(cfg: &ExperimentConfig, centers: &[DVector<f64>]) -> ExperimentConfig {
    let mut out = cfg.clone();
    out.centers = CenterConfig::Explicit {
        points: centers
            .iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
    };
    out
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, seed: u64) -> CmdResult {
    validate_common(cfg)?;
    let kernel = build_kernel(cfg)?;
    let vf = build_vector_field(cfg, &kernel)?;
    let traj = integrate(&vf, &vector(&cfg.x0), cfg.horizon, cfg.step)?;

    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;

    let mut summary = json!({
        "rows": traj.len(),
        "final_time": traj.final_time(),
        "final_state": traj.final_state().iter().copied().collect::<Vec<f64>>(),
    });
    if let SystemConfig::Fish { .. } = cfg.system {
        let h0 = fish_invariant(&traj.state_vector(0));
        let drift = (0..traj.len())
            .map(|i| (fish_invariant(&traj.state_vector(i)) - h0).abs())
            .fold(0.0, f64::max);
        summary["first_integral_drift"] = json!(drift);
    }

    let mut art = Artifacts::new(out)?;
    art.write("trajectory.csv", &csv, traj.len())?;
    art.finish("simulate", seed, cfg.clone(), summary)?;
    Ok(0)
}

pub fn cmd_estimate(cfg: &ExperimentConfig, out: &Path, seed: u64) -> CmdResult {
    validate_common(cfg)?;
    let kernel = build_kernel(cfg)?;
    let vf = build_vector_field(cfg, &kernel)?;
    let open = integrate(&vf, &vector(&cfg.x0), cfg.horizon, cfg.step)?;
    let centers = resolve_centers(cfg, Some(&open))?;
    let omega = IndexingSet::new(kernel.clone(), centers.clone())?;
    let n = omega.n();
    let dim = omega.dim();
    if cfg.x0.len() != dim {
        return Err(CliError::Config(format!(
            "x0: length {} does not match center dimension {dim}",
            cfg.x0.len()
        )));
    }

    let plant = build_plant(cfg, &kernel, dim)?;
    let gamma = match cfg.estimator.gamma_realization.as_str() {
        "identity" => GammaGain::Identity {
            gamma: cfg.estimator.gamma,
        },
        "gram" => GammaGain::Gram {
            gamma: cfg.estimator.gamma,
        },
        other => {
            return Err(CliError::Config(format!(
                "estimator.gamma_realization: unknown realization {other:?}"
            )))
        }
    };
    if !(cfg.estimator.q_gain > 0.0) {
        return Err(CliError::Config(format!(
            "estimator.q_gain: must be positive, got {}",
            cfg.estimator.q_gain
        )));
    }
    let est_cfg = EstimatorConfig {
        q: DMatrix::identity(dim, dim) * cfg.estimator.q_gain,
        gamma,
        omega: omega.clone(),
    };

    let xhat0 = match &cfg.estimator.xhat0 {
        Some(v) => {
            if v.len() != dim {
                return Err(CliError::Config(format!(
                    "estimator.xhat0: length {} does not match dimension {dim}",
                    v.len()
                )));
            }
            vector(v)
        }
        None => vector(&cfg.x0),
    };
    let alphahat0 = match &cfg.estimator.alphahat0 {
        AlphaInit::Named(AlphaInitName::Zero) => DVector::zeros(n),
        AlphaInit::Named(AlphaInitName::AlphaStar) => {
            let fvals =
                DVector::from_iterator(n, omega.centers().iter().map(|c| plant.truth(c)));
            rkhs_pe::linalg::solve_spd(&omega.gram().jittered(), &fvals)?
        }
        AlphaInit::Values(v) => {
            if v.len() != n {
                return Err(CliError::Config(format!(
                    "estimator.alphahat0: {} values for {n} centers",
                    v.len()
                )));
            }
            vector(v)
        }
    };

    let run = run_estimator(
        &plant,
        &est_cfg,
        &vector(&cfg.x0),
        &xhat0,
        &alphahat0,
        cfg.horizon,
        cfg.step,
        cfg.store_every,
    )?;

    let mut hist_csv = Vec::new();
    run.write_csv(&mut hist_csv)?;

    let g = cfg.grid;
    let grid = GridSpec {
        x_min: g.x_min,
        x_max: g.x_max,
        y_min: g.y_min,
        y_max: g.y_max,
        nx: g.nx,
        ny: g.ny,
    };
    let field = run.error_field(&grid)?;
    let baseline = function_error_field(
        &omega,
        &DVector::zeros(n),
        |p| plant.truth(p),
        &grid,
    )?;
    let mut field_csv = Vec::new();
    field.write_csv(&mut field_csv)?;

    // sup over the limit-set neighborhood: grid points within ε of a center
    let eps = cfg.pe.epsilon;
    let near = |p: &DVector<f64>| centers.iter().any(|c| (p - c).norm() <= eps);
    let mut sup_err = 0.0f64;
    let mut sup_base = 0.0f64;
    for (i, p) in field.points.iter().enumerate() {
        if near(p) {
            sup_err = sup_err.max(field.values[i]);
            sup_base = sup_base.max(baseline.values[i]);
        }
    }
    let reduction = if sup_err > 0.0 {
        Some(sup_base / sup_err)
    } else {
        None
    };

    let summary = json!({
        "n_centers": n,
        "rows": run.len(),
        "xtilde_final": run.xtilde_norm(run.len() - 1),
        "sup_error": sup_err,
        "sup_error_baseline": sup_base,
        "reduction": reduction,
        "neighborhood_epsilon": eps,
    });

    let mut art = Artifacts::new(out)?;
    art.write("estimate.csv", &hist_csv, run.len())?;
    art.write("error_field.csv", &field_csv, field.values.len())?;
    art.finish("estimate", seed, resolved_config(cfg, &centers), summary)?;
    Ok(0)
}

pub fn cmd_pe_check(cfg: &ExperimentConfig, out: &Path, seed: u64) -> CmdResult {
    validate_common(cfg)?;
    let kernel = build_kernel(cfg)?;
    let vf = build_vector_field(cfg, &kernel)?;
    let traj = integrate(&vf, &vector(&cfg.x0), cfg.horizon, cfg.step)?;
    let centers = resolve_centers(cfg, Some(&traj))?;
    let omega = IndexingSet::new(kernel.clone(), centers.clone())?;

    let t_start = cfg.pe.t_start.unwrap_or_else(|| cfg.transient_cutoff());
    let delta = match cfg.pe.delta {
        Some(d) => d,
        // for recurrent orbits one period is the natural window length
        None => estimate_period(&traj, t_start)?,
    };
    let stride = cfg.pe.stride.unwrap_or(delta / 2.0);
    let opts = PeOptions {
        start: t_start,
        delta,
        stride,
        threshold: cfg.pe.threshold,
        visitation_epsilon: cfg.pe.epsilon,
    };
    let report = pe_scan(&traj, &omega, &opts)?;

    let mut windows_csv = Vec::new();
    report.write_csv(&mut windows_csv)?;

    let mut summary = json!({
        "gamma1": report.gamma1,
        "gamma2": report.gamma2,
        "t_start": report.start,
        "delta": report.delta,
        "stride": report.stride,
        "threshold": report.threshold,
        "windows": report.windows.len(),
        "verdict": report.verdict,
        "n_centers": omega.n(),
    });

    let mut art = Artifacts::new(out)?;
    art.write("pe_windows.csv", &windows_csv, report.windows.len())?;

    // the singleton excitation bound has content only for a single center
    if omega.n() == 1 {
        let vis = visitation_scan(
            &traj,
            &centers[0],
            cfg.pe.epsilon,
            &kernel,
            t_start,
            delta,
            stride,
        )?;
        let mut vis_csv = Vec::new();
        writeln!(vis_csv, "t_start,mu")?;
        for &(t, mu) in &vis.windows {
            writeln!(vis_csv, "{t:.16e},{mu:.16e}")?;
        }
        let rows = vis.windows.len();
        art.write("visitation.csv", &vis_csv, rows)?;
        summary["visitation"] = json!({
            "epsilon": vis.epsilon,
            "gamma_eps": vis.gamma_eps,
            "kernel_floor": vis.kernel_floor,
            "lower_bound": vis.lower_bound,
        });
    }

    print!("{}", report.summary());
    let verdict = report.verdict;
    art.finish("pe-check", seed, resolved_config(cfg, &centers), summary)?;
    Ok(if verdict { 0 } else { 2 })
}

pub fn cmd_contour(cfg: &ExperimentConfig, out: &Path, seed: u64) -> CmdResult {
    let section = cfg.contour.clone().unwrap_or_default();

    // source of kernel/centers/coefficients: a previous run, or this config
    let (src_cfg, coeffs) = match &section.run_dir {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            let manifest_text = fs::read_to_string(dir.join("manifest.json")).map_err(|e| {
                CliError::Config(format!("contour.run_dir: cannot read manifest.json: {e}"))
            })?;
            let manifest: RunManifest = serde_json::from_str(&manifest_text).map_err(|e| {
                CliError::Config(format!("contour.run_dir: corrupt manifest.json: {e}"))
            })?;
            let coeffs = read_final_coefficients(&dir.join("estimate.csv"))?;
            (manifest.config, Some(coeffs))
        }
        None => (cfg.clone(), None),
    };

    let kernel = build_kernel(&src_cfg)?;
    let centers = match &src_cfg.centers {
        CenterConfig::Explicit { points } => explicit_centers(points)?,
        _ => {
            return Err(CliError::Config(
                "contour: centers must be explicit (or come from a run directory)".into(),
            ))
        }
    };
    let omega = IndexingSet::new(kernel.clone(), centers.clone())?;
    let coeffs = match coeffs {
        Some(v) => {
            if v.len() != omega.n() {
                return Err(CliError::Config(format!(
                    "contour.run_dir: {} coefficients for {} centers",
                    v.len(),
                    omega.n()
                )));
            }
            v
        }
        None => DVector::zeros(omega.n()),
    };

    let truth: Box<dyn Fn(&DVector<f64>) -> f64> = match section.truth.as_str() {
        "system" => truth_fn(&src_cfg.system, &kernel, &src_cfg)?,
        "zero" => Box::new(|_| 0.0),
        other => {
            return Err(CliError::Config(format!(
                "contour.truth: unknown selector {other:?} (expected \"system\" or \"zero\")"
            )))
        }
    };

    let g = cfg.grid;
    let grid = GridSpec {
        x_min: g.x_min,
        x_max: g.x_max,
        y_min: g.y_min,
        y_max: g.y_max,
        nx: g.nx,
        ny: g.ny,
    };
    let field = function_error_field(&omega, &coeffs, |p| truth(p), &grid)?;
    let mut csv = Vec::new();
    field.write_csv(&mut csv)?;

    let summary = json!({
        "rows": field.values.len(),
        "sup_error": field.sup(),
        "truth": section.truth,
    });

    // record what was actually used: kernel/centers/system from the source
    // run (if any), the grid and contour section from this invocation
    let mut recorded = resolved_config(&src_cfg, &centers);
    recorded.grid = cfg.grid;
    recorded.contour = cfg.contour.clone();

    let mut art = Artifacts::new(out)?;
    art.write("contour.csv", &csv, field.values.len())?;
    art.finish("contour", seed, recorded, summary)?;
    Ok(0)
}

/// Last row of an estimate history: the alphahat* columns.
fn read_final_coefficients(path: &Path) -> Result<DVector<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("contour.run_dir: cannot read estimate.csv: {e}")))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("estimate.csv: empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let alpha_idx: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with("alphahat"))
        .map(|(i, _)| i)
        .collect();
    if alpha_idx.is_empty() {
        return Err(CliError::Config(
            "estimate.csv: no alphahat columns in header".into(),
        ));
    }
    let last = lines
        .last()
        .ok_or_else(|| CliError::Config("estimate.csv: no data rows".into()))?;
    let fields: Vec<&str> = last.split(',').collect();
    let mut out = DVector::zeros(alpha_idx.len());
    for (j, &i) in alpha_idx.iter().enumerate() {
        out[j] = fields
            .get(i)
            .ok_or_else(|| CliError::Config("estimate.csv: short final row".into()))?
            .parse()
            .map_err(|e| CliError::Config(format!("estimate.csv: bad number: {e}")))?;
    }
    Ok(out)
}
