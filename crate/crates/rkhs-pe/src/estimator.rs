//! Adaptive estimator for plants with a matched uncertainty in a kernel
//! subspace: ẋ = g₀(x) + Bf(x) with f unknown. The estimator integrates
//!
//!   ẋ̂ = Ax̂ + (g₀(x) − Ax) + BΦᵀ(x)α̂,
//!   α̂̇ = Γ⁻¹Φ(x)BᵀP(x − x̂),
//!
//! coupled to the plant on a shared RK4 grid, where Φ is the regressor of an
//! indexing set, P solves PA + AᵀP = −Q, and Γ is a positive definite gain.
//! Subtracting gives error dynamics x̃̇ = Ax̃ + B(f(x) − Φᵀ(x)α̂) independent
//! of g₀; with the sign convention above V = x̃ᵀPx̃ + α̃ᵀΓα̃ is non-increasing
//! whenever f lies in the span of the regressors.

use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg;
use crate::persistence::IndexingSet;

pub use crate::linalg::lyapunov_solve;

/// Norm guard shared with the open-loop integrator.
const BLOWUP_NORM: f64 = 1e6;

type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Ground-truth plant ẋ = g₀(x) + Bf(x). The scalar f is the unknown the
/// estimator learns; it is consulted only by the simulated plant and by
/// error reporting. When no known part g₀ is supplied the plant is the
/// matched linear structure ẋ = Ax + Bf(x).
#[derive(Clone)]
pub struct PlantSpec {
    a: DMatrix<f64>,
    b: DVector<f64>,
    f: ScalarFn,
    g0: Option<VectorFn>,
}

impl std::fmt::Debug for PlantSpec {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("PlantSpec")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("g0", &self.g0.as_ref().map(|_| "fn"))
            .finish_non_exhaustive()
    }
}

impl PlantSpec {
    /// `a` must be Hurwitz (it is the estimator's error-decay matrix), `b`
    /// the d×1 input column.
    pub fn new<F>(a: DMatrix<f64>, b: DVector<f64>, f: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                context: "plant matrix must be square",
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "input column vs state dimension",
                expected: a.nrows(),
                got: b.len(),
            });
        }
        linalg::require_hurwitz(&a)?;
        Ok(PlantSpec {
            a,
            b,
            f: Arc::new(f),
            g0: None,
        })
    }

    /// Replace the known part of the plant drift (defaults to Ax). The
    /// estimator feeds g₀(x) − Ax forward, so the error dynamics keep the
    /// matched form for any g₀.
    pub fn with_known_part<G>(mut self, g0: G) -> Self
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.g0 = Some(Arc::new(g0));
        self
    }

    /// Oscillator with a circular attractor: known part (x₂ + x₁(1−r²), 0),
    /// unknown second-row scalar f(x) = −x₁ + x₂(1−r²), r² = x₁² + x₂².
    pub fn from_hopf(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != 2 {
            return Err(Error::DimensionMismatch {
                context: "hopf plant dimension",
                expected: 2,
                got: a.nrows(),
            });
        }
        let plant = PlantSpec::new(a, DVector::from_column_slice(&[0.0, 1.0]), |x: &DVector<f64>| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            -x[0] + x[1] * (1.0 - r2)
        })?;
        Ok(plant.with_known_part(|x: &DVector<f64>| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            DVector::from_column_slice(&[x[1] + x[0] * (1.0 - r2), 0.0])
        }))
    }

    /// Homoclinic ("fish") system: known part (2x₂, 0), unknown second-row
    /// scalar f(x) = 2x₁ − 3x₁² + λx₂(x₁³ − x₁² + x₂²).
    pub fn from_fish(lambda: f64, a: DMatrix<f64>) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be finite, got {lambda}"),
            });
        }
        if a.nrows() != 2 {
            return Err(Error::DimensionMismatch {
                context: "fish plant dimension",
                expected: 2,
                got: a.nrows(),
            });
        }
        let plant = PlantSpec::new(a, DVector::from_column_slice(&[0.0, 1.0]), move |x: &DVector<f64>| {
            2.0 * x[0] - 3.0 * x[0] * x[0]
                + lambda * x[1] * (x[0].powi(3) - x[0] * x[0] + x[1] * x[1])
        })?;
        Ok(plant.with_known_part(|x: &DVector<f64>| DVector::from_column_slice(&[2.0 * x[1], 0.0])))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Ground-truth unknown, for reporting only.
    pub fn truth(&self, x: &DVector<f64>) -> f64 {
        (self.f)(x)
    }

    /// Full plant right-hand side g₀(x) + Bf(x).
    pub fn rhs(&self, x: &DVector<f64>) -> DVector<f64> {
        let fx = (self.f)(x);
        match &self.g0 {
            Some(g0) => g0(x) + &self.b * fx,
            None => &self.a * x + &self.b * fx,
        }
    }
}

/// Coefficient-space realization of the learning-gain operator Γ.
#[derive(Clone, Debug)]
pub enum GammaGain {
    /// Γ = γI.
    Identity { gamma: f64 },
    /// Γ = γK_Ω (the subspace metric itself, scaled): weighs coefficient
    /// error by the native norm rather than the Euclidean one.
    Gram { gamma: f64 },
    /// Arbitrary symmetric positive definite matrix.
    Explicit(DMatrix<f64>),
}

impl GammaGain {
    fn realize(&self, omega: &IndexingSet) -> Result<DMatrix<f64>> {
        let n = omega.n();
        match self {
            GammaGain::Identity { gamma } => {
                require_positive_gain(*gamma)?;
                Ok(DMatrix::identity(n, n) * *gamma)
            }
            GammaGain::Gram { gamma } => {
                require_positive_gain(*gamma)?;
                Ok(omega.gram().jittered() * *gamma)
            }
            GammaGain::Explicit(m) => {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        context: "explicit gain vs center count",
                        expected: n,
                        got: m.nrows(),
                    });
                }
                if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                    return Err(Error::InvalidParameter {
                        name: "gamma",
                        reason: "explicit gain must be symmetric".into(),
                    });
                }
                Ok(m.clone())
            }
        }
    }
}

fn require_positive_gain(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("gain must be positive and finite, got {gamma}"),
        });
    }
    Ok(())
}

/// Estimator parameters: Lyapunov right-hand side Q, learning gain Γ, and
/// the indexing set whose kernel sections span the hypothesis space.
#[derive(Clone, Debug)]
pub struct EstimatorConfig {
    pub q: DMatrix<f64>,
    pub gamma: GammaGain,
    pub omega: IndexingSet,
}

impl EstimatorConfig {
    /// Defaults Q = I, Γ = I.
    pub fn new(dim: usize, omega: IndexingSet) -> Self {
        EstimatorConfig {
            q: DMatrix::identity(dim, dim),
            gamma: GammaGain::Identity { gamma: 1.0 },
            omega,
        }
    }
}

/// Completed estimator run: plant state, estimator state, and coefficient
/// histories on one shared grid, plus the frozen problem data (P, Γ, α*).
pub struct EstimatorRun {
    times: Vec<f64>,
    x: Vec<f64>,
    xhat: Vec<f64>,
    alphahat: Vec<f64>,
    dim: usize,
    n: usize,
    p: DMatrix<f64>,
    gamma: DMatrix<f64>,
    alpha_star: DVector<f64>,
    omega: IndexingSet,
    truth: ScalarFn,
}

impl std::fmt::Debug for EstimatorRun {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("EstimatorRun")
            .field("len", &self.len())
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl EstimatorRun {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_centers(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn omega(&self) -> &IndexingSet {
        &self.omega
    }

    /// Lyapunov matrix P used inside the learning law.
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Realized gain matrix Γ.
    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// K-orthogonal projection coefficients of the truth onto the span,
    /// from K_Ω α* = (f(c_j))_j.
    pub fn alpha_star(&self) -> &DVector<f64> {
        &self.alpha_star
    }

    pub fn x_at(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn xhat_at(&self, i: usize) -> &[f64] {
        &self.xhat[i * self.dim..(i + 1) * self.dim]
    }

    pub fn alphahat_at(&self, i: usize) -> &[f64] {
        &self.alphahat[i * self.n..(i + 1) * self.n]
    }

    /// State estimation error x̃(tᵢ) = x(tᵢ) − x̂(tᵢ).
    pub fn xtilde(&self, i: usize) -> DVector<f64> {
        let x = self.x_at(i);
        let xh = self.xhat_at(i);
        DVector::from_iterator(self.dim, x.iter().zip(xh).map(|(a, b)| a - b))
    }

    pub fn xtilde_norm(&self, i: usize) -> f64 {
        self.xtilde(i).norm()
    }

    /// Function estimate f̂(tᵢ, p) = Φᵀ(p) α̂(tᵢ).
    pub fn fhat_at(&self, i: usize, point: &DVector<f64>) -> Result<f64> {
        let phi = self.omega.regressor(point)?;
        let ah = self.alphahat_at(i);
        Ok(phi.iter().zip(ah).map(|(a, b)| a * b).sum())
    }

    /// Projection residual e(tᵢ) = f(x(tᵢ)) − Φᵀ(x(tᵢ))α*: the part of the
    /// uncertainty outside the span, evaluated along the orbit.
    pub fn projection_residual(&self, i: usize) -> Result<f64> {
        let x = DVector::from_column_slice(self.x_at(i));
        let phi = self.omega.regressor(&x)?;
        Ok((self.truth)(&x) - phi.dot(&self.alpha_star))
    }

    /// V(tᵢ) = x̃ᵀPx̃ + α̃ᵀΓα̃ with α̃ = α* − α̂.
    pub fn lyapunov_value(&self, i: usize) -> f64 {
        let xt = self.xtilde(i);
        let ah = DVector::from_column_slice(self.alphahat_at(i));
        let at = &self.alpha_star - ah;
        (xt.transpose() * &self.p * &xt)[(0, 0)] + (at.transpose() * &self.gamma * &at)[(0, 0)]
    }

    /// Error field of the final estimate against `truth` on a grid.
    pub fn error_field(&self, grid: &GridSpec) -> Result<ErrorField> {
        let last = DVector::from_column_slice(self.alphahat_at(self.len() - 1));
        let truth = Arc::clone(&self.truth);
        function_error_field(&self.omega, &last, move |p| truth(p), grid)
    }

    /// CSV export: `t,x1..xd,xhat1..xhatd,alphahat1..alphahatn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for j in 1..=self.dim {
            write!(w, ",x{j}")?;
        }
        for j in 1..=self.dim {
            write!(w, ",xhat{j}")?;
        }
        for j in 1..=self.n {
            write!(w, ",alphahat{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{:.16e}", self.times[i])?;
            for v in self.x_at(i) {
                write!(w, ",{v:.16e}")?;
            }
            for v in self.xhat_at(i) {
                write!(w, ",{v:.16e}")?;
            }
            for v in self.alphahat_at(i) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrate plant and estimator together with classical RK4, storing every
/// `store_every`-th step (and always the final one).
#[allow(clippy::too_many_arguments)]
pub fn run_estimator(
    plant: &PlantSpec,
    cfg: &EstimatorConfig,
    x0: &DVector<f64>,
    xhat0: &DVector<f64>,
    alphahat0: &DVector<f64>,
    t_final: f64,
    h: f64,
    store_every: usize,
) -> Result<EstimatorRun> {
    let d = plant.dim();
    let n = cfg.omega.n();
    if cfg.omega.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "centers vs plant dimension",
            expected: d,
            got: cfg.omega.dim(),
        });
    }
    for (v, name) in [(x0, "x0"), (xhat0, "xhat0")] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                context: "initial state dimension",
                expected: d,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(match name {
                "x0" => "initial plant state",
                _ => "initial estimator state",
            }));
        }
    }
    if alphahat0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial coefficients vs center count",
            expected: n,
            got: alphahat0.len(),
        });
    }
    if !(h > 0.0) || !h.is_finite() || !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("need 0 < h ≤ T finite, got h={h}, T={t_final}"),
        });
    }
    if store_every == 0 {
        return Err(Error::InvalidParameter {
            name: "store_every",
            reason: "must be at least 1".into(),
        });
    }

    let p = linalg::lyapunov_solve(&plant.a, &cfg.q)?;
    let gamma = cfg.gamma.realize(&cfg.omega)?;
    let gamma_chol: Option<Cholesky<f64, Dyn>> = match &cfg.gamma {
        GammaGain::Identity { .. } => None,
        _ => Some(
            Cholesky::new(gamma.clone())
                .ok_or(Error::Singular("learning gain is not positive definite"))?,
        ),
    };
    let inv_gamma_scalar = match &cfg.gamma {
        GammaGain::Identity { gamma } => 1.0 / gamma,
        _ => 1.0,
    };
    // α* from the jittered Gram: projection target and V-reference
    let fvals = DVector::from_iterator(n, cfg.omega.centers().iter().map(|c| plant.truth(c)));
    let alpha_star = linalg::solve_spd(&cfg.omega.gram().jittered(), &fvals)?;
    // BᵀPx̃ = (Pb)ᵀx̃ by symmetry of P
    let pb = &p * &plant.b;

    let steps = ((t_final / h).round() as usize).max(1);
    let m = 2 * d + n;
    let mut y = DVector::zeros(m);
    y.rows_mut(0, d).copy_from(x0);
    y.rows_mut(d, d).copy_from(xhat0);
    y.rows_mut(2 * d, n).copy_from(alphahat0);

    let mut k1 = DVector::zeros(m);
    let mut k2 = DVector::zeros(m);
    let mut k3 = DVector::zeros(m);
    let mut k4 = DVector::zeros(m);
    let mut stage = DVector::zeros(m);
    let mut xbuf = DVector::zeros(d);
    let mut phi = DVector::zeros(n);
    let mut gsolve = DVector::zeros(n);

    let stored = steps / store_every + 2;
    let mut times = Vec::with_capacity(stored);
    let mut xs: Vec<f64> = Vec::with_capacity(stored * d);
    let mut xhats: Vec<f64> = Vec::with_capacity(stored * d);
    let mut ahats: Vec<f64> = Vec::with_capacity(stored * n);
    let mut store = |t: f64, y: &DVector<f64>| {
        times.push(t);
        xs.extend_from_slice(&y.as_slice()[0..d]);
        xhats.extend_from_slice(&y.as_slice()[d..2 * d]);
        ahats.extend_from_slice(&y.as_slice()[2 * d..]);
    };
    store(0.0, &y);

    let mut deriv = |y: &DVector<f64>, out: &mut DVector<f64>| -> Result<()> {
        xbuf.copy_from(&y.rows(0, d));
        let fx = plant.truth(&xbuf);
        cfg.omega.regressor_into(xbuf.as_slice(), &mut phi)?;
        let ahat = y.rows(2 * d, n);
        let fhat: f64 = phi.dot(&ahat);

        // plant: g₀(x) + B f(x); estimator: Ax̂ + (g₀(x) − Ax) + B f̂
        match &plant.g0 {
            Some(g0) => {
                let known = g0(&xbuf);
                let xh = y.rows(d, d);
                for i in 0..d {
                    let ax_err: f64 = (0..d).map(|j| plant.a[(i, j)] * (xh[j] - xbuf[j])).sum();
                    out[i] = known[i] + plant.b[i] * fx;
                    out[d + i] = ax_err + known[i] + plant.b[i] * fhat;
                }
            }
            None => {
                let xh = y.rows(d, d);
                for i in 0..d {
                    let ax: f64 = (0..d).map(|j| plant.a[(i, j)] * xbuf[j]).sum();
                    let axh: f64 = (0..d).map(|j| plant.a[(i, j)] * xh[j]).sum();
                    out[i] = ax + plant.b[i] * fx;
                    out[d + i] = axh + plant.b[i] * fhat;
                }
            }
        }

        // learning law: Γ⁻¹ Φ(x) (Pb)ᵀx̃
        let mut s = 0.0;
        for i in 0..d {
            s += pb[i] * (y[i] - y[d + i]);
        }
        match &gamma_chol {
            None => {
                for j in 0..n {
                    out[2 * d + j] = inv_gamma_scalar * s * phi[j];
                }
            }
            Some(chol) => {
                gsolve.copy_from(&phi);
                chol.solve_mut(&mut gsolve);
                for j in 0..n {
                    out[2 * d + j] = s * gsolve[j];
                }
            }
        }
        Ok(())
    };

    for k in 0..steps {
        deriv(&y, &mut k1)?;
        stage.copy_from(&y);
        stage.axpy(h / 2.0, &k1, 1.0);
        deriv(&stage, &mut k2)?;
        stage.copy_from(&y);
        stage.axpy(h / 2.0, &k2, 1.0);
        deriv(&stage, &mut k3)?;
        stage.copy_from(&y);
        stage.axpy(h, &k3, 1.0);
        deriv(&stage, &mut k4)?;
        for i in 0..m {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = (k + 1) as f64 * h;
        let norm = y.norm();
        if !norm.is_finite() || norm > BLOWUP_NORM {
            return Err(Error::Divergence { t: t_next, norm });
        }
        if (k + 1) % store_every == 0 || k + 1 == steps {
            store(t_next, &y);
        }
    }

    Ok(EstimatorRun {
        times,
        x: xs,
        xhat: xhats,
        alphahat: ahats,
        dim: d,
        n,
        p,
        gamma,
        alpha_star,
        omega: cfg.omega.clone(),
        truth: Arc::clone(&plant.f),
    })
}

/// Rectangular evaluation grid for planar error fields, traversed row-major
/// with the first coordinate fastest.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<DVector<f64>>> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "need at least one point per axis".into(),
            });
        }
        for (lo, hi) in [(self.x_min, self.x_max), (self.y_min, self.y_max)] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidParameter {
                    name: "grid",
                    reason: format!("bad axis range [{lo}, {hi}]"),
                });
            }
        }
        let step = |lo: f64, hi: f64, k: usize, n: usize| {
            if n == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            let py = step(self.y_min, self.y_max, iy, self.ny);
            for ix in 0..self.nx {
                pts.push(DVector::from_column_slice(&[
                    step(self.x_min, self.x_max, ix, self.nx),
                    py,
                ]));
            }
        }
        Ok(pts)
    }
}

/// |truth − f̂| sampled on a planar grid.
#[derive(Clone, Debug)]
pub struct ErrorField {
    pub grid: GridSpec,
    pub points: Vec<DVector<f64>>,
    pub values: Vec<f64>,
}

impl ErrorField {
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a: f64, &b| a.max(b))
    }

    /// CSV export: `px,py,err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "px,py,err")?;
        for (p, v) in self.points.iter().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
        }
        Ok(())
    }
}

/// |truth(p) − Φᵀ(p)·coeffs| over the grid; the coefficients are typically a
/// run's final α̂ (or α* for the best-in-span reference).
pub fn function_error_field<F>(
    omega: &IndexingSet,
    coeffs: &DVector<f64>,
    truth: F,
    grid: &GridSpec,
) -> Result<ErrorField>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if omega.dim() != 2 {
        return Err(Error::DimensionMismatch {
            context: "error field needs planar centers",
            expected: 2,
            got: omega.dim(),
        });
    }
    if coeffs.len() != omega.n() {
        return Err(Error::DimensionMismatch {
            context: "coefficients vs center count",
            expected: omega.n(),
            got: coeffs.len(),
        });
    }
    let points = grid.points()?;
    let mut values = Vec::with_capacity(points.len());
    for p in &points {
        let phi = omega.regressor(p)?;
        values.push((truth(p) - phi.dot(coeffs)).abs());
    }
    Ok(ErrorField {
        grid: *grid,
        points,
        values,
    })
}

/// Classical persistence-of-excitation window matrix ∫ Φ(x(τ))Φᵀ(x(τ)) dτ by
/// trapezoidal quadrature. Coincides with the subspace window integral of the
/// persistence module (cross-checked in tests); kept as an independent
/// implementation because this is the form classical adaptive-control
/// conditions are stated in.
pub fn classical_pe_matrix(
    traj: &crate::dynamics::Trajectory,
    omega: &IndexingSet,
    t: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    if traj.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            context: "trajectory vs center dimension",
            expected: omega.dim(),
            got: traj.dim(),
        });
    }
    let times = traj.times();
    let (t0, t1) = (traj.initial_time(), traj.final_time());
    let slack = 1e-9 * (1.0 + t1.abs());
    if !(delta > 0.0) || t < t0 - slack || t + delta > t1 + slack {
        return Err(Error::WindowOutOfRange {
            start: t,
            end: t + delta,
            t0,
            t1,
        });
    }
    let locate = |target: f64| {
        let hi = times.partition_point(|&x| x < target);
        if hi == 0 {
            0
        } else if hi >= times.len() {
            times.len() - 1
        } else if (times[hi] - target).abs() < (target - times[hi - 1]).abs() {
            hi
        } else {
            hi - 1
        }
    };
    let (i0, i1) = (locate(t), locate(t + delta));
    if i1 <= i0 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("window [{t}, {}] spans fewer than two samples", t + delta),
        });
    }
    let n = omega.n();
    let mut g = DMatrix::zeros(n, n);
    let mut prev = omega.regressor(&traj.state_vector(i0))?;
    for k in i0..i1 {
        let next = omega.regressor(&traj.state_vector(k + 1))?;
        let w = 0.5 * (times[k + 1] - times[k]);
        g.ger(w, &prev, &prev, 1.0);
        g.ger(w, &next, &next, 1.0);
        prev = next;
    }
    Ok(g)
}
