//! Special functions needed by the kernel and the closed-form constants.
//!
//! Everything here works on real arguments only. Accuracy is near machine
//! precision over the ranges the crate uses.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln |Γ(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// `Γ(x)` with the correct sign for negative non-integer `x`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        ln_gamma(x).exp()
    }
}

/// Generalized binomial coefficient `a choose k`.
pub fn binomial(a: f64, k: usize) -> f64 {
    let mut out = 1.0;
    for j in 0..k {
        out *= (a - j as f64) / (j + 1) as f64;
    }
    out
}

/// Riemann zeta for real `s != 1`.
pub fn zeta(s: f64) -> f64 {
    if s == 0.0 {
        return -0.5;
    }
    if s < 0.5 {
        if s == s.round() && s.rem_euclid(2.0) == 0.0 {
            return 0.0;
        }
        let reflected = 2f64.powf(s) * PI.powf(s - 1.0) * (0.5 * PI * s).sin();
        return reflected * gamma(1.0 - s) * zeta(1.0 - s);
    }
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s);
    }
    borwein_zeta(s)
}

/// Borwein's accelerated alternating series, valid for `s > 0`.
fn borwein_zeta(s: f64) -> f64 {
    const N: usize = 40;
    let n = N as f64;
    let mut d = [0.0; N + 1];
    let mut term = 1.0;
    let mut acc = 1.0;
    d[0] = acc;
    for (i, slot) in d.iter_mut().enumerate().skip(1) {
        let fi = i as f64;
        term *= 4.0 * (n + fi - 1.0) * (n - fi + 1.0) / ((2.0 * fi - 1.0) * (2.0 * fi));
        acc += term;
        *slot = acc;
    }
    let dn = d[N];
    let mut sum = 0.0;
    for (k, dk) in d.iter().take(N).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (dk - dn) / ((k + 1) as f64).powf(s);
    }
    -sum / (dn * (1.0 - 2f64.powf(1.0 - s)))
}

/// Hurwitz zeta at shift one half, `ζ(s, 1/2) = (2^s - 1) ζ(s)`.
pub fn zeta_half(s: f64) -> f64 {
    (2f64.powf(s) - 1.0) * zeta(s)
}

/// Modified Bessel function of the second kind, `K_ν(z)` for `z > 0`.
///
/// Trapezoidal rule on `∫_0^∞ exp(-z cosh t) cosh(ν t) dt`, which converges
/// geometrically because the integrand is entire and decays double
/// exponentially.
pub fn bessel_k(nu: f64, z: f64) -> f64 {
    debug_assert!(z > 0.0);
    let nu = nu.abs();
    let step = if z < 0.5 { 0.02 } else { 0.05 };
    let f = |t: f64| {
        let c = -z * t.cosh();
        0.5 * ((c + nu * t).exp() + (c - nu * t).exp())
    };
    let mut sum = 0.5 * f(0.0);
    let mut t = step;
    loop {
        let v = f(t);
        sum += v;
        // Past the peak and negligible.
        if z * t.sinh() > nu && v < 1e-18 * sum {
            break;
        }
        t += step;
    }
    sum * step
}
