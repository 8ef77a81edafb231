//! Persistence-of-excitation diagnostics over sampled orbits.
//!
//! For a center set Ω with Gram matrix K_Ω, a function f = Σ α_j 𝔎(c_j,·) has
//! subspace norm ‖f‖² = αᵀK_Ωα, and its energy along an orbit window is
//! ∫|f(x(τ))|²dτ = αᵀGα with G_ij = ∫𝔎(c_i,x(τ))𝔎(c_j,x(τ))dτ. The sharp
//! per-window excitation constants are therefore the extreme eigenvalues of
//! the pencil (G, K_Ω); sliding the window yields the global pair (γ₁, γ₂).

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::kernels::{GramMatrix, Kernel};
use crate::linalg;

/// Relative verdict floor: excitation is accepted when γ₁ > threshold · γ₂.
/// An absolute floor would be meaningless across kernel/scale choices; the
/// on-orbit and off-orbit regimes separate by many orders of magnitude in
/// this ratio.
pub const DEFAULT_PE_THRESHOLD: f64 = 1e-8;

/// Default ball radius for the per-window visitation column.
pub const DEFAULT_VISITATION_EPSILON: f64 = 0.1;

/// A finite center set Ω together with its kernel and Gram matrix; the
/// computational handle for the subspace spanned by the kernel sections at Ω.
#[derive(Clone, Debug)]
pub struct IndexingSet {
    kernel: Kernel,
    gram: GramMatrix,
}

impl IndexingSet {
    /// Requires pairwise-distinct centers: coincident centers make the
    /// subspace coordinates ill-defined, not merely ill-conditioned.
    pub fn new(kernel: Kernel, centers: Vec<DVector<f64>>) -> Result<Self> {
        let gram = kernel.gram(&centers)?;
        if gram.has_coincident_centers() {
            return Err(Error::InvalidParameter {
                name: "centers",
                reason: "coincident centers in the indexing set".into(),
            });
        }
        Ok(IndexingSet { kernel, gram })
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        self.gram.centers()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn n(&self) -> usize {
        self.gram.n()
    }

    pub fn dim(&self) -> usize {
        self.gram.centers()[0].len()
    }

    /// Regressor vector Φ(x) = (𝔎(c₁,x), …, 𝔎(c_n,x)).
    pub fn regressor(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.n());
        self.regressor_into(x.as_slice(), &mut out)?;
        Ok(out)
    }

    /// Regressor written into a caller-owned buffer (hot-loop variant).
    pub fn regressor_into(&self, x: &[f64], out: &mut DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "regressor point dimension",
                expected: self.dim(),
                got: x.len(),
            });
        }
        if out.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "regressor output length",
                expected: self.n(),
                got: out.len(),
            });
        }
        for (j, c) in self.centers().iter().enumerate() {
            let mut d2 = 0.0;
            for (a, b) in c.iter().zip(x) {
                d2 += (a - b) * (a - b);
            }
            out[j] = self.kernel.eval_radial(d2.sqrt())?;
        }
        Ok(())
    }
}

/// Trapezoid node weights over the sample window [i0, i1].
fn trapezoid_weights(times: &[f64], i0: usize, i1: usize) -> Vec<f64> {
    let mut w = vec![0.0; i1 - i0 + 1];
    for k in i0..i1 {
        let half = 0.5 * (times[k + 1] - times[k]);
        w[k - i0] += half;
        w[k + 1 - i0] += half;
    }
    w
}

/// Indices of the trajectory samples nearest to t and t + Δ, after checking
/// the window sits inside the trajectory span (up to roundoff slack).
fn window_indices(traj: &Trajectory, t: f64, delta: f64) -> Result<(usize, usize)> {
    if !(delta > 0.0) || !delta.is_finite() || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("need finite t and Δ > 0, got t={t}, Δ={delta}"),
        });
    }
    let (t0, t1) = (traj.initial_time(), traj.final_time());
    let slack = 1e-9 * (1.0 + t1.abs());
    if t < t0 - slack || t + delta > t1 + slack {
        return Err(Error::WindowOutOfRange {
            start: t,
            end: t + delta,
            t0,
            t1,
        });
    }
    let i0 = nearest_index(traj.times(), t);
    let i1 = nearest_index(traj.times(), t + delta);
    if i1 <= i0 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("window [{t}, {}] spans fewer than two samples", t + delta),
        });
    }
    Ok((i0, i1))
}

fn nearest_index(times: &[f64], target: f64) -> usize {
    let hi = times.partition_point(|&x| x < target);
    if hi == 0 {
        return 0;
    }
    if hi >= times.len() {
        return times.len() - 1;
    }
    if (times[hi] - target).abs() < (target - times[hi - 1]).abs() {
        hi
    } else {
        hi - 1
    }
}

/// G_ij = ∫_t^{t+Δ} 𝔎(c_i, x(τ)) 𝔎(c_j, x(τ)) dτ by trapezoidal quadrature
/// on the trajectory grid.
pub fn pe_window_integral(
    traj: &Trajectory,
    omega: &IndexingSet,
    t: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let (i0, i1) = window_indices(traj, t, delta)?;
    if traj.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            context: "trajectory vs center dimension",
            expected: omega.dim(),
            got: traj.dim(),
        });
    }
    let n = omega.n();
    let weights = trapezoid_weights(traj.times(), i0, i1);
    let mut g = DMatrix::zeros(n, n);
    let mut phi = DVector::zeros(n);
    for (k, &w) in (i0..=i1).zip(weights.iter()) {
        omega.regressor_into(traj.state(k), &mut phi)?;
        for i in 0..n {
            let wi = w * phi[i];
            for j in i..n {
                g[(i, j)] += wi * phi[j];
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            g[(j, i)] = g[(i, j)];
        }
    }
    Ok(g)
}

/// Sharp per-window excitation constants: extreme eigenvalues of the pencil
/// (G, K_Ω), the min/max of αᵀGα over αᵀK_Ωα = 1.
pub fn pe_bounds(g: &DMatrix<f64>, gram: &GramMatrix) -> Result<(f64, f64)> {
    linalg::pencil_extremes(g, &gram.jittered())
}

/// Window schedule plus verdict parameters for a PE scan.
#[derive(Clone, Debug)]
pub struct PeOptions {
    /// First window start (the T of "for all t ≥ T").
    pub start: f64,
    /// Window length Δ.
    pub delta: f64,
    /// Start-to-start spacing of consecutive windows.
    pub stride: f64,
    /// Relative verdict floor on γ₁/γ₂.
    pub threshold: f64,
    /// Ball radius for the reported per-window visitation measure (time spent
    /// within this distance of the nearest center).
    pub visitation_epsilon: f64,
}

impl PeOptions {
    /// Defaults: stride Δ/2 (overlapping windows tighten the discrete
    /// approximation of "for all t"), relative threshold 10⁻⁸, visitation
    /// radius 0.1.
    pub fn new(start: f64, delta: f64) -> Self {
        PeOptions {
            start,
            delta,
            stride: delta / 2.0,
            threshold: DEFAULT_PE_THRESHOLD,
            visitation_epsilon: DEFAULT_VISITATION_EPSILON,
        }
    }
}

/// One window of a PE scan.
#[derive(Clone, Copy, Debug)]
pub struct PeWindow {
    pub t_start: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Time within `visitation_epsilon` of the nearest center.
    pub mu_visitation: f64,
}

/// Scan outcome: per-window extremes and the global (γ₁, γ₂) pair.
#[derive(Clone, Debug)]
pub struct PeReport {
    pub windows: Vec<PeWindow>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub start: f64,
    pub delta: f64,
    pub stride: f64,
    pub threshold: f64,
    pub visitation_epsilon: f64,
    /// γ₁ > threshold·γ₂.
    pub verdict: bool,
}

impl PeReport {
    /// CSV export: `t_start,lambda_min,lambda_max,mu_visitation`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_start,lambda_min,lambda_max,mu_visitation")?;
        for win in &self.windows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                win.t_start, win.lambda_min, win.lambda_max, win.mu_visitation
            )?;
        }
        Ok(())
    }

    /// Human/machine-readable summary block.
    pub fn summary(&self) -> String {
        format!(
            "pe verdict: {}\ngamma1: {:.6e}\ngamma2: {:.6e}\nT: {:.6}\ndelta: {:.6}\nstride: {:.6}\nwindows: {}\nthreshold (relative): {:.1e}\n",
            if self.verdict { "true" } else { "false" },
            self.gamma1,
            self.gamma2,
            self.start,
            self.delta,
            self.stride,
            self.windows.len(),
            self.threshold
        )
    }
}

/// Slide windows [t, t+Δ] from `start` while they fit, collecting per-window
/// pencil extremes; γ₁/γ₂ are the global inf/sup and the verdict compares
/// them against the relative threshold.
pub fn pe_scan(traj: &Trajectory, omega: &IndexingSet, opts: &PeOptions) -> Result<PeReport> {
    if !(opts.stride > 0.0) {
        return Err(Error::InvalidParameter {
            name: "stride",
            reason: format!("stride must be positive, got {}", opts.stride),
        });
    }
    let t1 = traj.final_time();
    let slack = 1e-9 * (1.0 + t1.abs());
    let mut starts = Vec::new();
    let mut t = opts.start;
    while t + opts.delta <= t1 + slack {
        starts.push(t);
        t += opts.stride;
    }
    if starts.is_empty() {
        return Err(Error::WindowOutOfRange {
            start: opts.start,
            end: opts.start + opts.delta,
            t0: traj.initial_time(),
            t1,
        });
    }

    let mut windows = Vec::with_capacity(starts.len());
    let mut gamma1 = f64::INFINITY;
    let mut gamma2 = f64::NEG_INFINITY;
    for &ts in &starts {
        let g = pe_window_integral(traj, omega, ts, opts.delta)?;
        let (lo, hi) = pe_bounds(&g, omega.gram())?;
        let mu = window_ball_measure(traj, omega.centers(), opts.visitation_epsilon, ts, opts.delta)?;
        gamma1 = gamma1.min(lo);
        gamma2 = gamma2.max(hi);
        windows.push(PeWindow {
            t_start: ts,
            lambda_min: lo,
            lambda_max: hi,
            mu_visitation: mu,
        });
    }
    Ok(PeReport {
        windows,
        gamma1,
        gamma2,
        start: opts.start,
        delta: opts.delta,
        stride: opts.stride,
        threshold: opts.threshold,
        visitation_epsilon: opts.visitation_epsilon,
        verdict: gamma1 > opts.threshold * gamma2,
    })
}

/// Time spent within ε of any of the given points over [t, t+Δ], by
/// trapezoidal quadrature on the indicator.
fn window_ball_measure(
    traj: &Trajectory,
    points: &[DVector<f64>],
    eps: f64,
    t: f64,
    delta: f64,
) -> Result<f64> {
    let (i0, i1) = window_indices(traj, t, delta)?;
    let weights = trapezoid_weights(traj.times(), i0, i1);
    let mut mu = 0.0;
    for (k, &w) in (i0..=i1).zip(weights.iter()) {
        let s = traj.state(k);
        let inside = points.iter().any(|p| {
            let mut d2 = 0.0;
            for (a, b) in p.iter().zip(s) {
                d2 += (a - b) * (a - b);
            }
            d2.sqrt() <= eps
        });
        if inside {
            mu += w;
        }
    }
    Ok(mu)
}

/// Per-window visitation measures of the ball B_ε(x∞), the quantitative
/// hypothesis of the singleton excitation bound.
#[derive(Clone, Debug)]
pub struct VisitationReport {
    pub epsilon: f64,
    /// (window start, μ(I_{t,ε})) pairs.
    pub windows: Vec<(f64, f64)>,
    /// Infimum of the per-window measures.
    pub gamma_eps: f64,
    /// 𝔎_ε = min over 0 ≤ ξ ≤ ε of 𝔎²(ξ).
    pub kernel_floor: f64,
    /// γ_ε·𝔎_ε, the guaranteed lower bound for the singleton window energy
    /// G₁₁; compare against a PE scan's γ₁ for Ω = {x∞}.
    pub lower_bound: f64,
}

/// Measure the time each window spends inside B_ε(x∞) and form the singleton
/// excitation lower bound γ_ε·𝔎_ε.
pub fn visitation_scan(
    traj: &Trajectory,
    x_inf: &DVector<f64>,
    eps: f64,
    kernel: &Kernel,
    start: f64,
    delta: f64,
    stride: f64,
) -> Result<VisitationReport> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("radius must be positive and finite, got {eps}"),
        });
    }
    if !(stride > 0.0) {
        return Err(Error::InvalidParameter {
            name: "stride",
            reason: format!("stride must be positive, got {stride}"),
        });
    }
    let t1 = traj.final_time();
    let slack = 1e-9 * (1.0 + t1.abs());
    let point = std::slice::from_ref(x_inf);
    let mut windows = Vec::new();
    let mut t = start;
    while t + delta <= t1 + slack {
        let mu = window_ball_measure(traj, point, eps, t, delta)?;
        windows.push((t, mu));
        t += stride;
    }
    if windows.is_empty() {
        return Err(Error::WindowOutOfRange {
            start,
            end: start + delta,
            t0: traj.initial_time(),
            t1,
        });
    }
    let gamma_eps = windows.iter().map(|&(_, mu)| mu).fold(f64::INFINITY, f64::min);
    // profile is monotone for the built-in families, but scan a grid so the
    // floor is honest for arbitrary radial profiles
    let mut kernel_floor = f64::INFINITY;
    for i in 0..=64 {
        let xi = eps * i as f64 / 64.0;
        let v = kernel.eval_radial(xi)?;
        kernel_floor = kernel_floor.min(v * v);
    }
    Ok(VisitationReport {
        epsilon: eps,
        gamma_eps,
        kernel_floor,
        lower_bound: gamma_eps * kernel_floor,
        windows,
    })
}

/// Discrete density surrogate: does every center have some trajectory sample
/// within ε? All-true is necessary for excitation of the center set.
pub fn density_check(traj: &Trajectory, omega: &IndexingSet, eps: f64) -> Result<Vec<bool>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("radius must be positive and finite, got {eps}"),
        });
    }
    min_distances(traj, omega, 0).map(|d| d.iter().map(|&x| x <= eps).collect())
}

/// Limit-set surrogate: is every center within ε of a *tail* sample
/// (t ≥ t_cut), i.e. visited at arbitrarily late times?
pub fn limit_set_membership(
    traj: &Trajectory,
    omega: &IndexingSet,
    eps: f64,
    t_cut: f64,
) -> Result<Vec<bool>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("radius must be positive and finite, got {eps}"),
        });
    }
    let start = traj.first_index_at(t_cut)?;
    min_distances(traj, omega, start).map(|d| d.iter().map(|&x| x <= eps).collect())
}

/// Per-center minimum distance to trajectory samples with index ≥ start.
fn min_distances(traj: &Trajectory, omega: &IndexingSet, start: usize) -> Result<Vec<f64>> {
    if traj.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            context: "trajectory vs center dimension",
            expected: omega.dim(),
            got: traj.dim(),
        });
    }
    let mut best = vec![f64::INFINITY; omega.n()];
    for k in start..traj.len() {
        let s = traj.state(k);
        for (j, c) in omega.centers().iter().enumerate() {
            let mut d2 = 0.0;
            for (a, b) in c.iter().zip(s) {
                d2 += (a - b) * (a - b);
            }
            let d = d2.sqrt();
            if d < best[j] {
                best[j] = d;
            }
        }
    }
    Ok(best)
}
