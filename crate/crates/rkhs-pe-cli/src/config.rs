//! Experiment configuration: one JSON document drives all subcommands.
//! Every field has a default except the system selector, so a minimal config
//! is `{"system": {"kind": "hopf"}}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// Initial state of the simulated plant.
    #[serde(default = "default_x0")]
    pub x0: Vec<f64>,
    /// Simulation horizon T.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Integrator step h.
    #[serde(default = "default_step")]
    pub step: f64,
    /// Keep every k-th sample in emitted histories.
    #[serde(default = "default_store_every")]
    pub store_every: usize,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub centers: CenterConfig,
    /// Samples with t below this are treated as transient; defaults to T/2.
    #[serde(default)]
    pub transient_cutoff: Option<f64>,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub pe: PeSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub contour: Option<ContourSection>,
}

impl ExperimentConfig {
    pub fn transient_cutoff(&self) -> f64 {
        self.transient_cutoff.unwrap_or(self.horizon / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    /// Planar oscillator with the unit circle as attracting limit cycle.
    Hopf,
    /// Homoclinic-loop system; λ = 0 conserves the first integral.
    Fish {
        #[serde(default)]
        lambda: f64,
    },
    /// Affine system ẋ = Mx + c (simulation and PE checks only).
    Custom { m: Vec<Vec<f64>>, c: Vec<f64> },
    /// ẋ = −gain·x + B Φᵀ(x)·alpha with Φ from the configured (explicit)
    /// centers: a plant whose uncertainty is exactly in the span.
    Span {
        alpha: Vec<f64>,
        #[serde(default = "default_span_gain")]
        gain: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_lengthscale")]
    pub lengthscale: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: default_family(),
            nu: default_nu(),
            lengthscale: default_lengthscale(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CenterConfig {
    /// Greedy thinning of the trajectory tail at the given spacing.
    LimitSetThinned { spacing: f64 },
    /// Farthest-point sampling of the tail to an exact count.
    LimitSetFps { count: usize },
    /// Fixed list of points.
    Explicit { points: Vec<Vec<f64>> },
    /// n points uniformly spaced on a circle of the given radius.
    UniformCircle {
        count: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
}

impl Default for CenterConfig {
    fn default() -> Self {
        CenterConfig::LimitSetThinned { spacing: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// Full A matrix; wins over `a_gain` when present.
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    /// A = −a_gain·I when no matrix is given.
    #[serde(default = "default_gain")]
    pub a_gain: f64,
    /// Q = q_gain·I.
    #[serde(default = "default_gain")]
    pub q_gain: f64,
    /// Scalar learning gain γ.
    #[serde(default = "default_gain")]
    pub gamma: f64,
    /// "identity" (Γ = γI) or "gram" (Γ = γK_Ω).
    #[serde(default = "default_gamma_realization")]
    pub gamma_realization: String,
    /// Defaults to x0.
    #[serde(default)]
    pub xhat0: Option<Vec<f64>>,
    #[serde(default)]
    pub alphahat0: AlphaInit,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            a: None,
            a_gain: 1.0,
            q_gain: 1.0,
            gamma: 1.0,
            gamma_realization: default_gamma_realization(),
            xhat0: None,
            alphahat0: AlphaInit::default(),
        }
    }
}

/// Initial coefficient vector: zeros, the projection coefficients α*, or an
/// explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaInit {
    Named(AlphaInitName),
    Values(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaInitName {
    Zero,
    AlphaStar,
}

impl Default for AlphaInit {
    fn default() -> Self {
        AlphaInit::Named(AlphaInitName::Zero)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeSection {
    /// First window start; defaults to the transient cutoff.
    #[serde(default)]
    pub t_start: Option<f64>,
    /// Window length; defaults to the estimated orbit period.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Defaults to delta/2.
    #[serde(default)]
    pub stride: Option<f64>,
    /// Relative verdict floor on γ₁/γ₂.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Visitation ball radius.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for PeSection {
    fn default() -> Self {
        PeSection {
            t_start: None,
            delta: None,
            stride: None,
            threshold: default_threshold(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_grid_min")]
    pub x_min: f64,
    #[serde(default = "default_grid_max")]
    pub x_max: f64,
    #[serde(default = "default_grid_min")]
    pub y_min: f64,
    #[serde(default = "default_grid_max")]
    pub y_max: f64,
    #[serde(default = "default_grid_n")]
    pub nx: usize,
    #[serde(default = "default_grid_n")]
    pub ny: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            x_min: default_grid_min(),
            x_max: default_grid_max(),
            y_min: default_grid_min(),
            y_max: default_grid_max(),
            nx: default_grid_n(),
            ny: default_grid_n(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSection {
    /// Directory of a previous `estimate` run; its manifest supplies kernel,
    /// centers, and final coefficients. Without it, coefficients are zero
    /// and centers must be explicit in this config.
    #[serde(default)]
    pub run_dir: Option<String>,
    /// "system" (the configured plant uncertainty) or "zero".
    #[serde(default = "default_truth")]
    pub truth: String,
}

impl Default for ContourSection {
    fn default() -> Self {
        ContourSection {
            run_dir: None,
            truth: default_truth(),
        }
    }
}

fn default_x0() -> Vec<f64> {
    vec![0.1, 0.0]
}
fn default_horizon() -> f64 {
    200.0
}
fn default_step() -> f64 {
    1e-3
}
fn default_store_every() -> usize {
    100
}
fn default_family() -> String {
    "matern".into()
}
fn default_nu() -> f64 {
    1.5
}
fn default_lengthscale() -> f64 {
    0.5
}
fn default_radius() -> f64 {
    1.0
}
fn default_gain() -> f64 {
    1.0
}
fn default_span_gain() -> f64 {
    1.0
}
fn default_gamma_realization() -> String {
    "identity".into()
}
fn default_threshold() -> f64 {
    1e-8
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_grid_min() -> f64 {
    -1.5
}
fn default_grid_max() -> f64 {
    1.5
}
fn default_grid_n() -> usize {
    200
}
fn default_truth() -> String {
    "system".into()
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, String> {
    let nr = rows.len();
    if nr == 0 {
        return Err(format!("{what}: matrix must be nonempty"));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(format!("{what}: ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
