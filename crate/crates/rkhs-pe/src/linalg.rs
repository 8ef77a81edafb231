//! Dense linear-algebra kernels shared by the estimator and the PE scans.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest real part among the eigenvalues of a square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re))
}

/// Error unless every eigenvalue of `a` has negative real part.
pub fn require_hurwitz(a: &DMatrix<f64>) -> Result<()> {
    let margin = spectral_abscissa(a);
    if margin >= 0.0 {
        Err(Error::NotHurwitz { real_part: margin })
    } else {
        Ok(())
    }
}

fn require_symmetric_positive_definite(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * m.norm().max(1.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("matrix is not symmetric (asymmetry {asym:.3e})"),
        });
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig <= 0.0 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("matrix is not positive definite (min eigenvalue {min_eig:.3e})"),
        });
    }
    Ok(())
}

/// Solve PA + AᵀP = −Q for symmetric positive definite P.
///
/// The d² unknowns are handled directly: vec(AᵀP + PA) = (I⊗Aᵀ + Aᵀ⊗I)vec(P),
/// and the Kronecker operator is LU-factorized. Fine for the small state
/// dimensions this library works at; d = 8 means a 64×64 solve.
pub fn lyapunov_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "Lyapunov system matrix must be square",
            expected: d,
            got: a.ncols(),
        });
    }
    if q.nrows() != d || q.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "Lyapunov Q must match A",
            expected: d,
            got: q.nrows(),
        });
    }
    require_symmetric_positive_definite(q, "Q")?;
    require_hurwitz(a)?;

    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(d, d);
    // column-major vec: vec(AᵀP) = (I⊗Aᵀ)vec(P), vec(PA) = (Aᵀ⊗I)vec(P)
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(d * d, q.iter().map(|v| -v));
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Lyapunov operator factorization"))?;
    let p = DMatrix::from_iterator(d, d, sol.iter().copied());
    // the exact solution is symmetric; remove the solver's asymmetry noise
    Ok((&p + p.transpose()) * 0.5)
}

/// Extreme generalized eigenvalues of the symmetric-definite pencil (G, K).
///
/// K must be positive definite (callers add Gram jitter beforehand). The
/// pencil is reduced with K = LLᵀ to the ordinary symmetric problem
/// L⁻¹ G L⁻ᵀ, whose spectrum is the pencil's.
pub fn pencil_extremes(g: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = k.nrows();
    if g.nrows() != n || g.ncols() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "pencil matrices must be square and matched",
            expected: n,
            got: g.nrows(),
        });
    }
    let chol = k
        .clone()
        .cholesky()
        .ok_or(Error::Singular("Gram factorization (coincident centers?)"))?;
    let l = chol.l();
    let m1 = l
        .solve_lower_triangular(g)
        .ok_or(Error::Singular("triangular solve in pencil reduction"))?;
    let m2 = l
        .solve_lower_triangular(&m1.transpose())
        .ok_or(Error::Singular("triangular solve in pencil reduction"))?;
    let sym = (&m2 + m2.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok((eig.min(), eig.max()))
}

/// Solve Mx = b for symmetric positive definite M (plus caller-chosen
/// diagonal shift already applied).
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::Singular("SPD factorization"))?;
    Ok(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn lyapunov_identity_case() {
        // A = −I, Q = 2I: −P − P = −2I ⇒ P = I
        let a = DMatrix::from_diagonal(&dvector![-1.0, -1.0]);
        let q = DMatrix::from_diagonal(&dvector![2.0, 2.0]);
        let p = lyapunov_solve(&a, &q).unwrap();
        assert!((p - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn lyapunov_diagonal_case() {
        // scalar channels: 2 a_i p_i = −1 ⇒ p_i = 1/(2|a_i|)
        let a = DMatrix::from_diagonal(&dvector![-1.0, -2.0]);
        let q = DMatrix::<f64>::identity(2, 2);
        let p = lyapunov_solve(&a, &q).unwrap();
        let want = DMatrix::from_diagonal(&dvector![0.5, 0.25]);
        assert!((p - want).norm() < 1e-12);
    }

    #[test]
    fn lyapunov_residual_random_stable() {
        // fixed stable system, d = 4
        let m = dmatrix![
            0.2, -0.7, 0.1, 0.4;
            0.5, 0.1, -0.3, 0.2;
            -0.2, 0.3, 0.0, -0.6;
            0.1, -0.1, 0.5, 0.3
        ];
        let shift = spectral_abscissa(&(&m + m.transpose())) * 0.5 + 0.5;
        let a = m - DMatrix::identity(4, 4) * shift;
        let q = {
            let n = dmatrix![
                1.0, 0.2, 0.0, -0.3;
                0.2, 1.5, 0.1, 0.0;
                0.0, 0.1, 0.8, 0.2;
                -0.3, 0.0, 0.2, 1.1
            ];
            &n * n.transpose() + DMatrix::identity(4, 4) * 0.1
        };
        let p = lyapunov_solve(&a, &q).unwrap();
        let residual = (&p * &a + a.transpose() * &p + &q).norm();
        assert!(residual < 1e-10 * q.norm(), "residual {residual:e}");
        assert!(p.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn lyapunov_rejects_non_hurwitz() {
        let a = DMatrix::<f64>::identity(2, 2);
        let q = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            lyapunov_solve(&a, &q),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn lyapunov_rejects_indefinite_q() {
        let a = DMatrix::from_diagonal(&dvector![-1.0, -1.0]);
        let q = DMatrix::from_diagonal(&dvector![1.0, -1.0]);
        assert!(lyapunov_solve(&a, &q).is_err());
    }

    #[test]
    fn pencil_identity() {
        let k = dmatrix![1.0, 0.3; 0.3, 1.0];
        let (lo, hi) = pencil_extremes(&k, &k).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pencil_zero_numerator() {
        let k = dmatrix![1.0, 0.3; 0.3, 1.0];
        let g = DMatrix::<f64>::zeros(2, 2);
        let (lo, hi) = pencil_extremes(&g, &k).unwrap();
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 0.0);
    }

    #[test]
    fn pencil_diagonal_oracle() {
        let g = DMatrix::from_diagonal(&dvector![0.37, 2.9]);
        let k = DMatrix::<f64>::identity(2, 2);
        let (lo, hi) = pencil_extremes(&g, &k).unwrap();
        assert!((lo - 0.37).abs() < 1e-12);
        assert!((hi - 2.9).abs() < 1e-12);
    }

    #[test]
    fn pencil_rejects_indefinite_k() {
        let g = DMatrix::<f64>::identity(2, 2);
        let k = dmatrix![1.0, 2.0; 2.0, 1.0]; // eigenvalues 3, −1
        assert!(pencil_extremes(&g, &k).is_err());
    }

    #[test]
    fn solve_spd_roundtrip() {
        let m = dmatrix![4.0, 1.0; 1.0, 3.0];
        let b = dvector![1.0, 2.0];
        let x = solve_spd(&m, &b).unwrap();
        assert!((m * x - b).norm() < 1e-12);
    }
}
