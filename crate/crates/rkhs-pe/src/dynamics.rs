//! ODE semiflows, fixed-step integration, and limit-set extraction.
//!
//! Trajectories are the discrete surrogate of the positive orbit Γ⁺(x₀); the
//! tail of a long trajectory stands in for the positive limit set ω⁺(x₀).

use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// State norm beyond which integration aborts. The homoclinic example has
/// unbounded trajectories outside its loop region, so a guard is mandatory.
pub const BLOWUP_NORM: f64 = 1e6;

type RhsFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// A (possibly decomposed) autonomous vector field ẋ = g₀(x) + g(x).
///
/// The decomposition mirrors the estimation setting: g₀ is the a-priori known
/// part of the dynamics and g the unknown part to be learned. Fields built
/// with [`VectorField::new`] carry no decomposition.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    dim: usize,
    rhs: RhsFn,
    split: Option<(RhsFn, RhsFn)>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("decomposed", &self.split.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        rhs: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        VectorField {
            name: name.into(),
            dim,
            rhs: Arc::new(rhs),
            split: None,
        }
    }

    /// Build from a known/unknown split; the full right-hand side is the sum.
    pub fn with_decomposition(
        name: impl Into<String>,
        dim: usize,
        g0: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        g: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        let g0: RhsFn = Arc::new(g0);
        let g: RhsFn = Arc::new(g);
        let (g0c, gc) = (g0.clone(), g.clone());
        VectorField {
            name: name.into(),
            dim,
            rhs: Arc::new(move |x| g0c(x) + gc(x)),
            split: Some((g0, g)),
        }
    }

    /// Planar oscillator with a supercritical limit cycle on the unit circle:
    /// ẋ₁ = x₂ + x₁(1 − ‖x‖²), ẋ₂ = −x₁ + x₂(1 − ‖x‖²).
    /// Known part {x₂ + x₁(1 − ‖x‖²), 0}, unknown part {0, −x₁ + x₂(1 − ‖x‖²)}.
    pub fn hopf() -> Self {
        Self::with_decomposition(
            "hopf",
            2,
            |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                DVector::from_column_slice(&[x[1] + x[0] * (1.0 - r2), 0.0])
            },
            |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                DVector::from_column_slice(&[0.0, -x[0] + x[1] * (1.0 - r2)])
            },
        )
    }

    /// Planar system with a homoclinic loop ("fish"):
    /// ẋ₁ = 2x₂, ẋ₂ = 2x₁ − 3x₁² + λx₂(x₁³ − x₁² + x₂²).
    /// At λ = 0 the energy H(x) = x₁³ − x₁² + x₂² is conserved.
    /// Known part {2x₂, 0}, unknown part {0, ẋ₂}.
    pub fn fish(lambda: f64) -> Self {
        Self::with_decomposition(
            "fish",
            2,
            |x| DVector::from_column_slice(&[2.0 * x[1], 0.0]),
            move |x| {
                let h = x[0] * x[0] * x[0] - x[0] * x[0] + x[1] * x[1];
                DVector::from_column_slice(&[0.0, 2.0 * x[0] - 3.0 * x[0] * x[0] + lambda * x[1] * h])
            },
        )
    }

    /// Affine field ẋ = Mx + c, the "custom" escape hatch for user systems.
    pub fn affine(m: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let d = m.nrows();
        if m.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "affine system matrix must be square",
                expected: d,
                got: m.ncols(),
            });
        }
        if c.len() != d {
            return Err(Error::DimensionMismatch {
                context: "affine offset vs system matrix",
                expected: d,
                got: c.len(),
            });
        }
        if m.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine system coefficients"));
        }
        Ok(Self::new("affine", d, move |x| &m * x + &c))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Full right-hand side.
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.rhs)(x)
    }

    /// Known part g₀ of the decomposition, if one was provided.
    pub fn known_part(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.split.as_ref().map(|(g0, _)| g0(x))
    }

    /// Unknown part g of the decomposition, if one was provided.
    pub fn unknown_part(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.split.as_ref().map(|(_, g)| g(x))
    }
}

/// ẋ₁ = x₂ + x₁(1 − ‖x‖²), ẋ₂ = −x₁ + x₂(1 − ‖x‖²).
pub fn hopf_rhs(x: &DVector<f64>) -> DVector<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    DVector::from_column_slice(&[x[1] + x[0] * (1.0 - r2), -x[0] + x[1] * (1.0 - r2)])
}

/// ẋ₁ = 2x₂, ẋ₂ = 2x₁ − 3x₁² + λx₂(x₁³ − x₁² + x₂²).
pub fn fish_rhs(x: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let h = fish_invariant(x);
    DVector::from_column_slice(&[2.0 * x[1], 2.0 * x[0] - 3.0 * x[0] * x[0] + lambda * x[1] * h])
}

/// H(x) = x₁³ − x₁² + x₂², conserved by the fish system at λ = 0.
pub fn fish_invariant(x: &DVector<f64>) -> f64 {
    x[0] * x[0] * x[0] - x[0] * x[0] + x[1] * x[1]
}

/// A sampled orbit: strictly increasing times with states stored row-major.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    data: Vec<f64>, // len() == times.len() * dim
    dim: usize,
    step: f64,
}

impl Trajectory {
    /// Build from explicit samples (used for analytic test trajectories and
    /// for re-importing exported CSVs). Times must be strictly increasing and
    /// everything finite.
    pub fn from_samples(times: Vec<f64>, states: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyInput("trajectory samples"));
        }
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch {
                context: "trajectory times vs states",
                expected: times.len(),
                got: states.len(),
            });
        }
        let dim = states[0].len();
        if dim == 0 {
            return Err(Error::EmptyInput("trajectory state dimension"));
        }
        let mut data = Vec::with_capacity(times.len() * dim);
        for (k, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "trajectory state dimension",
                    expected: dim,
                    got: s.len(),
                });
            }
            if !times[k].is_finite() || s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("trajectory sample"));
            }
            if k > 0 && times[k] <= times[k - 1] {
                return Err(Error::InvalidParameter {
                    name: "times",
                    reason: format!("not strictly increasing at index {k}"),
                });
            }
            data.extend_from_slice(s.as_slice());
        }
        let step = if times.len() > 1 {
            (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
        } else {
            0.0
        };
        Ok(Trajectory {
            times,
            data,
            dim,
            step,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nominal grid spacing (exact for integrator output).
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn initial_time(&self) -> f64 {
        self.times[0]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Borrowed state at sample `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Owned copy of the state at sample `i`.
    pub fn state_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.state(i))
    }

    pub fn final_state(&self) -> DVector<f64> {
        self.state_vector(self.len() - 1)
    }

    /// Index of the first sample with t ≥ t_cut (with a grid-roundoff slack).
    pub fn first_index_at(&self, t_cut: f64) -> Result<usize> {
        let slack = 1e-9 * self.step.max(1.0);
        match self.times.iter().position(|&t| t >= t_cut - slack) {
            Some(i) => Ok(i),
            None => Err(Error::EmptyTail { t_cut }),
        }
    }

    /// CSV export: header `t,x1,...,xd`, 17 significant digits throughout.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for j in 1..=self.dim {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{:.16e}", self.times[i])?;
            for v in self.state(i) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Classical fixed-step fourth-order Runge–Kutta over [0, T].
///
/// The step count is round(T/h), so the final time lands within h of T; the
/// grid is t_k = k·h exactly, keeping repeated runs bit-identical.
pub fn integrate(vf: &VectorField, x0: &DVector<f64>, t_final: f64, h: f64) -> Result<Trajectory> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_final",
            reason: format!("horizon must be positive and finite, got {t_final}"),
        });
    }
    if !(h > 0.0) || h > t_final {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("step must satisfy 0 < h ≤ T, got {h}"),
        });
    }
    if x0.len() != vf.dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state vs vector field",
            expected: vf.dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }

    let steps = (t_final / h).round().max(1.0) as usize;
    let dim = vf.dim();
    let mut times = Vec::with_capacity(steps + 1);
    let mut data = Vec::with_capacity((steps + 1) * dim);

    let mut x = x0.clone();
    times.push(0.0);
    data.extend_from_slice(x.as_slice());

    for k in 0..steps {
        let k1 = vf.eval(&x);
        let k2 = vf.eval(&(&x + &k1 * (h / 2.0)));
        let k3 = vf.eval(&(&x + &k2 * (h / 2.0)));
        let k4 = vf.eval(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);

        let t = (k + 1) as f64 * h;
        let norm = x.norm();
        if !norm.is_finite() || norm > BLOWUP_NORM {
            return Err(Error::Divergence { t, norm });
        }
        times.push(t);
        data.extend_from_slice(x.as_slice());
    }

    Ok(Trajectory {
        times,
        data,
        dim,
        step: h,
    })
}

/// Finite stand-in for the positive limit set: thinned tail samples.
#[derive(Clone, Debug)]
pub struct LimitSetEstimate {
    points: Vec<DVector<f64>>,
    times: Vec<f64>,
    t_cut: f64,
    requested_spacing: f64,
    min_retained_spacing: f64,
}

impl LimitSetEstimate {
    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    /// Trajectory times at which the retained points were sampled.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_cut(&self) -> f64 {
        self.t_cut
    }

    pub fn requested_spacing(&self) -> f64 {
        self.requested_spacing
    }

    /// Smallest pairwise distance among retained points; infinite for a
    /// single point. Never below the requested spacing, by construction.
    pub fn min_retained_spacing(&self) -> f64 {
        self.min_retained_spacing
    }
}

/// Thin the trajectory tail (t ≥ t_cut) so every retained point keeps
/// distance ≥ δ_s from all previously retained points.
///
/// Greedy in sample order, hence deterministic; on a limit cycle one lap
/// already blankets the orbit, and later laps add nothing, so the output size
/// is about (orbit perimeter)/δ_s.
pub fn extract_limit_set(traj: &Trajectory, t_cut: f64, delta_s: f64) -> Result<LimitSetEstimate> {
    if !(delta_s > 0.0) || !delta_s.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta_s",
            reason: format!("spacing must be positive and finite, got {delta_s}"),
        });
    }
    if t_cut >= traj.final_time() {
        return Err(Error::InvalidParameter {
            name: "t_cut",
            reason: format!(
                "cutoff {t_cut} must precede the final time {}",
                traj.final_time()
            ),
        });
    }
    let start = traj.first_index_at(t_cut)?;

    let mut kept: Vec<usize> = vec![start];
    for i in (start + 1)..traj.len() {
        let s = traj.state(i);
        let far_from_all = kept
            .iter()
            .all(|&j| slice_distance(s, traj.state(j)) >= delta_s);
        if far_from_all {
            kept.push(i);
        }
    }

    let points: Vec<DVector<f64>> = kept.iter().map(|&i| traj.state_vector(i)).collect();
    let times: Vec<f64> = kept.iter().map(|&i| traj.time(i)).collect();
    let mut min_spacing = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            min_spacing = min_spacing.min((&points[i] - &points[j]).norm());
        }
    }
    Ok(LimitSetEstimate {
        points,
        times,
        t_cut,
        requested_spacing: delta_s,
        min_retained_spacing: min_spacing,
    })
}

/// Pick exactly `count` tail samples by farthest-point sampling: start at the
/// first tail sample, then repeatedly add the sample farthest from everything
/// already chosen. Gives near-uniform coverage of the orbit with an exact
/// budget, which the spacing-driven thinning cannot.
pub fn farthest_point_sample(
    traj: &Trajectory,
    t_cut: f64,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "requested zero centers".into(),
        });
    }
    let start = traj.first_index_at(t_cut)?;
    let tail: Vec<usize> = (start..traj.len()).collect();
    if tail.len() < count {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: format!("requested {count} centers from {} tail samples", tail.len()),
        });
    }

    let mut chosen: Vec<usize> = vec![tail[0]];
    // distance from each tail sample to the nearest chosen point
    let mut dist: Vec<f64> = tail
        .iter()
        .map(|&i| slice_distance(traj.state(i), traj.state(tail[0])))
        .collect();
    while chosen.len() < count {
        let (best_pos, best_d) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bd), (i, &d)| {
                if d > bd {
                    (i, d)
                } else {
                    (bi, bd)
                }
            });
        if best_d <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "count",
                reason: format!(
                    "tail contains only {} distinct points, {count} centers requested",
                    chosen.len()
                ),
            });
        }
        let new_idx = tail[best_pos];
        chosen.push(new_idx);
        for (pos, &i) in tail.iter().enumerate() {
            let d = slice_distance(traj.state(i), traj.state(new_idx));
            if d < dist[pos] {
                dist[pos] = d;
            }
        }
    }
    Ok(chosen.iter().map(|&i| traj.state_vector(i)).collect())
}

/// Estimate the orbit period from tail recurrence: track the distance from
/// the first tail sample, wait until the orbit has moved at least half its
/// apparent diameter away, and locate the first deep return. The returned
/// time is refined by a parabolic fit through the discrete minimum.
pub fn estimate_period(traj: &Trajectory, t_cut: f64) -> Result<f64> {
    let start = traj.first_index_at(t_cut)?;
    let n = traj.len();
    if n - start < 8 {
        return Err(Error::EmptyTail { t_cut });
    }
    let reference = traj.state(start).to_vec();
    let dist: Vec<f64> = (start..n)
        .map(|i| slice_distance(traj.state(i), &reference))
        .collect();
    let diameter = dist.iter().fold(0.0f64, |m, &d| m.max(d));
    if diameter <= 0.0 {
        return Err(Error::NoConvergence(
            "period estimation (stationary trajectory tail)",
        ));
    }

    let away = match dist.iter().position(|&d| d >= 0.5 * diameter) {
        Some(i) => i,
        None => {
            return Err(Error::NoConvergence(
                "period estimation (orbit never leaves the reference neighborhood)",
            ))
        }
    };
    let back = match dist[away..].iter().position(|&d| d <= 0.25 * diameter) {
        Some(i) => away + i,
        None => {
            return Err(Error::NoConvergence(
                "period estimation (orbit never returns to the reference)",
            ))
        }
    };
    // argmin over the contiguous deep-return segment
    let mut m = back;
    let mut i = back;
    while i < dist.len() && dist[i] <= 0.25 * diameter {
        if dist[i] < dist[m] {
            m = i;
        }
        i += 1;
    }

    let mut t_min = traj.time(start + m);
    if m > 0 && m + 1 < dist.len() {
        let (dm, d0, dp) = (dist[m - 1], dist[m], dist[m + 1]);
        let denom = dm - 2.0 * d0 + dp;
        if denom > 0.0 {
            let offset = 0.5 * (dm - dp) / denom;
            let h_local = traj.time(start + m + 1) - traj.time(start + m);
            t_min += offset.clamp(-1.0, 1.0) * h_local;
        }
    }
    let period = t_min - traj.time(start);
    if period <= 0.0 {
        return Err(Error::NoConvergence("period estimation (degenerate return)"));
    }
    Ok(period)
}

fn slice_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
