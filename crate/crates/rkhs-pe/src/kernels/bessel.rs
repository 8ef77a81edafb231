//! Modified Bessel function of the second kind, K_ν(x), for real order.
//!
//! This is the only special function the Matérn family needs. The evaluation
//! strategy is the classical one: Temme's series for small argument
//! (Temme, J. Comput. Phys. 19, 324 (1975)), Steed's continued fraction for
//! large argument (Thompson & Barnett, J. Comput. Phys. 64, 490 (1986)), and
//! the stable forward recurrence in the order to reach ν from its fractional
//! part. Forward recurrence is growth-directed for K, so it does not lose
//! accuracy the way it would for I.

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;

/// Euler–Mascheroni constant.
const EULER: f64 = 0.577_215_664_901_532_9;

/// Lanczos coefficients, g = 7, 9-term fit; ~15 significant digits on z > 0.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for z > 0.
pub fn ln_gamma(z: f64) -> f64 {
    use std::f64::consts::PI;
    if z < 0.5 {
        // reflection keeps the Lanczos sum on its accurate half-line
        (PI / (PI * z).sin()).ln() - ln_gamma(1.0 - z)
    } else {
        let z = z - 1.0;
        let mut x = LANCZOS[0];
        for (i, c) in LANCZOS[1..].iter().enumerate() {
            x += c / (z + i as f64 + 1.0);
        }
        let t = z + 7.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
    }
}

/// Γ(1 + v) − 1 for |v| ≤ 0.5, without the cancellation of `gamma(1+v) - 1`.
fn tgamma1pm1(v: f64) -> f64 {
    f64::exp_m1(ln_gamma(1.0 + v))
}

/// Curvature of (Γ(1+v) − Γ(1−v))/(2v) at v = 0: ζ(3)/3 + γπ²/12 + γ³/6.
const GAMMA1_CURV: f64 = 1.202_056_903_159_594_3 / 3.0
    + EULER * std::f64::consts::PI * std::f64::consts::PI / 12.0
    + EULER * EULER * EULER / 6.0;

/// K_v(x) and K_{v+1}(x) by Temme's series; requires |v| ≤ 0.5 and x ≤ 2.
fn temme_k_series(v: f64, x: f64) -> Result<(f64, f64)> {
    use std::f64::consts::PI;
    debug_assert!(v.abs() <= 0.5 && x > 0.0 && x <= 2.0);

    let gp = tgamma1pm1(v);
    let gm = tgamma1pm1(-v);

    let a = (x / 2.0).ln();
    let b = (v * a).exp();
    let sigma = -a * v;
    let c = if v.abs() < f64::EPSILON {
        1.0
    } else {
        (PI * v).sin() / (PI * v)
    };
    let d = if sigma.abs() < f64::EPSILON {
        1.0
    } else {
        sigma.sinh() / sigma
    };
    // gamma1 = (Γ(1+v) − Γ(1−v))/(2v) · c; the direct quotient loses ~|log v|
    // digits as v → 0, so switch to the series with its v² term there.
    let gamma1 = if v.abs() < 1e-4 {
        -(EULER + v * v * GAMMA1_CURV) * c
    } else {
        (0.5 / v) * (gp - gm) * c
    };
    let gamma2 = (2.0 + gp + gm) * c / 2.0;

    let mut p = (gp + 1.0) / (2.0 * b);
    let mut q = (gm + 1.0) * b / 2.0;
    let mut f = (sigma.cosh() * gamma1 - d * a * gamma2) / c;
    let mut h = p;
    let mut coef = 1.0;
    let mut sum = coef * f;
    let mut sum1 = coef * h;

    for k in 1..MAX_ITER {
        let kf = k as f64;
        f = (kf * f + p + q) / (kf * kf - v * v);
        p /= kf - v;
        q /= kf + v;
        h = p - kf * f;
        coef *= x * x / (4.0 * kf);
        sum += coef * f;
        sum1 += coef * h;
        if (coef * f).abs() < sum.abs() * f64::EPSILON {
            return Ok((sum, 2.0 * sum1 / x));
        }
    }
    Err(Error::NoConvergence("Temme series for K_nu"))
}

/// K_v(x) and K_{v+1}(x) by Steed's continued fraction; |v| ≤ 0.5, x > 1.
fn cf2_k(v: f64, x: f64) -> Result<(f64, f64)> {
    use std::f64::consts::PI;
    debug_assert!(v.abs() <= 0.5 && x > 1.0);

    let mut a = v * v - 0.25;
    let mut b = 2.0 * (x + 1.0);
    let mut d = 1.0 / b;
    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = -a;
    let mut c = -a;
    let mut s = 1.0 + q * delta;

    for k in 2..MAX_ITER {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = 1.0 / (a * d + b);
        delta *= b * d - 1.0;
        f += delta;

        let t = (prev - (b - 2.0) * cur) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;

        if (q * delta).abs() < s.abs() * f64::EPSILON / 2.0 {
            let kv = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
            let kv1 = kv * (0.5 + v + x + (v * v - 0.25) * f) / x;
            return Ok((kv, kv1));
        }
    }
    Err(Error::NoConvergence("continued fraction for K_nu"))
}

/// K_ν(x) for real ν (any sign; K_{−ν} = K_ν) and x > 0.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !nu.is_finite() || !x.is_finite() {
        return Err(Error::NonFinite("bessel_k argument"));
    }
    if x <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: format!("K_nu requires x > 0, got {x}"),
        });
    }
    let nu = nu.abs();
    let n = nu.round();
    let u = nu - n; // |u| ≤ 0.5
    let n = n as usize;

    let (ku, ku1) = if x <= 2.0 {
        temme_k_series(u, x)?
    } else {
        cf2_k(u, x)?
    };

    // K_{w+1} = (2w/x) K_w + K_{w−1}, w = u+1, …, u+n−1
    let mut prev = ku;
    let mut cur = ku1;
    for k in 1..=n {
        let next = 2.0 * (u + k as f64) * cur / x + prev;
        prev = cur;
        cur = next;
    }
    if !prev.is_finite() {
        return Err(Error::NonFinite("bessel_k result (order too large for argument)"));
    }
    Ok(prev)
}
