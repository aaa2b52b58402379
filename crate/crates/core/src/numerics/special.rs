use std::f64::consts::PI;

use crate::error::{domain, Result};

// Below this the recurrence shifts the argument up before applying the
// asymptotic series.
const STIRLING_MIN: f64 = 10.0;

// B_{2k} / (2k (2k-1)) for k = 1..8.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Natural logarithm of the Gamma function for positive real arguments.
///
/// Uses the Stirling series with Bernoulli corrections for `x >= 10` and the
/// upward recurrence `ln Γ(x) = ln Γ(x + k) - ln(x (x+1) ... (x+k-1))` below.
/// The relative error is below `1e-13` on `[1e-3, 1e6]` away from the zeros
/// at `x = 1` and `x = 2`, where the absolute error is of order `1e-15`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(domain(format!("log_gamma requires finite x > 0, got {x}")));
    }
    if x == 1.0 || x == 2.0 {
        return Ok(0.0);
    }
    if x.fract() == 0.0 && x <= 23.0 {
        // (x - 1)! is exact in f64 up to 22!.
        let fact: f64 = (2..x as u64).map(|k| k as f64).product();
        return Ok(fact.ln());
    }
    if x >= STIRLING_MIN {
        return Ok(stirling(x));
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < STIRLING_MIN {
        prod *= z;
        z += 1.0;
    }
    Ok(stirling(z) - prod.ln())
}

fn stirling(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for &c in STIRLING_COEFFS.iter().rev() {
        series = series * inv2 + c;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series * inv
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    // n + 1 >= 1 is always in the domain.
    log_gamma(n as f64 + 1.0).expect("positive argument")
}
