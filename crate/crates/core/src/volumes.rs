//! Closed-form volumes: dimensions, the Weyl constant `c_n`, Euclidean balls,
//! operator-norm (`p = ∞`) balls via Selberg's integral, and ℓ_p balls.
//!
//! Every function returns a natural logarithm.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::{ln_factorial, log_gamma};

/// The field parameter: real (1), complex (2) or quaternionic (4) entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Beta {
    Real,
    Complex,
    Quaternion,
}

impl Beta {
    pub const ALL: [Beta; 3] = [Beta::Real, Beta::Complex, Beta::Quaternion];

    pub fn value(self) -> f64 {
        match self {
            Beta::Real => 1.0,
            Beta::Complex => 2.0,
            Beta::Quaternion => 4.0,
        }
    }

    pub fn from_value(beta: f64) -> Result<Self> {
        match beta {
            b if b == 1.0 => Ok(Beta::Real),
            b if b == 2.0 => Ok(Beta::Complex),
            b if b == 4.0 => Ok(Beta::Quaternion),
            b => Err(domain(format!(
                "matrix volumes need beta in {{1, 2, 4}}, got {b}"
            ))),
        }
    }

    fn as_u64(self) -> u64 {
        self.value() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixClassParams {
    pub n: usize,
    pub beta: Beta,
    pub self_adjoint: bool,
}

impl MatrixClassParams {
    pub fn self_adjoint(n: usize, beta: Beta) -> Self {
        MatrixClassParams {
            n,
            beta,
            self_adjoint: true,
        }
    }

    /// Real dimension of the matrix space.
    pub fn dim(&self) -> u64 {
        let n = self.n as u64;
        let b = self.beta.as_u64();
        if self.self_adjoint {
            b * n * (n.saturating_sub(1)) / 2 + n
        } else {
            b * n * n
        }
    }
}

/// `d_n = β n (n-1) / 2 + n` for self-adjoint matrices, `β n²` otherwise.
pub fn dim(params: &MatrixClassParams) -> u64 {
    params.dim()
}

/// Self-adjoint dimension for arbitrary real `β`, used in volume formulas.
pub(crate) fn dim_sa(n: usize, beta: f64) -> f64 {
    let n = n as f64;
    beta * n * (n - 1.0) / 2.0 + n
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(domain("matrix size n must be at least 1"));
    }
    Ok(())
}

/// `ln c_n` for the Weyl integration constant
///
/// ```text
/// c_n = (1/n!) (Γ(β/2) / (2π)^(β/2))^n  Π_{k=1}^n (2π)^(βk/2) / Γ(βk/2).
/// ```
///
/// Any `β > 0` is accepted.
pub fn log_c_n(n: usize, beta: f64) -> Result<f64> {
    check_n(n)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    let ln_2pi = (2.0 * PI).ln();
    let half = 0.5 * beta;
    let mut s = -ln_factorial(n as u64) + n as f64 * (log_gamma(half)? - half * ln_2pi);
    for k in 1..=n {
        let bk = half * k as f64;
        s += bk * ln_2pi - log_gamma(bk)?;
    }
    Ok(s)
}

/// Volume of the Euclidean unit ball in `R^dim`.
pub fn log_vol_euclidean(dim: u64) -> Result<f64> {
    if dim == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    let h = 0.5 * dim as f64;
    Ok(h * PI.ln() - log_gamma(1.0 + h)?)
}

/// Operator-norm ball of all `n x n` matrices over the field:
/// `π^(βn²/2) Π_{j<n} Γ(1 + jβ/2) / Π_{j=n}^{2n-1} Γ(1 + jβ/2)`.
pub fn log_vol_inf_full(n: usize, beta: Beta) -> Result<f64> {
    check_n(n)?;
    let b = beta.value();
    let mut s = 0.5 * b * (n * n) as f64 * PI.ln();
    for j in 0..n {
        s += log_gamma(1.0 + j as f64 * b / 2.0)?;
    }
    for j in n..2 * n {
        s -= log_gamma(1.0 + j as f64 * b / 2.0)?;
    }
    Ok(s)
}

/// `ln ∫_{[-1,1]^n} Π_{i<j} |x_i - x_j|^(2γ) dx` from Selberg's formula with
/// exponents `α = β = 1`, rescaled from `[0,1]^n`.
pub fn selberg_cube_integral(n: usize, gamma: f64) -> Result<f64> {
    check_n(n)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(format!("Selberg exponent gamma must be positive, got {gamma}")));
    }
    let nf = n as f64;
    let lg1g = log_gamma(1.0 + gamma)?;
    let mut s = 0.0;
    for j in 0..n {
        let jf = j as f64;
        s += 2.0 * log_gamma(1.0 + jf * gamma)? + log_gamma(1.0 + (jf + 1.0) * gamma)?
            - log_gamma(2.0 + (nf + jf - 1.0) * gamma)?
            - lg1g;
    }
    Ok(s + (nf + gamma * nf * (nf - 1.0)) * 2f64.ln())
}

/// Self-adjoint operator-norm ball: `ln c_n + ln ∫_{[-1,1]^n} |Δ|^β`.
pub fn log_vol_inf_sa(n: usize, beta: Beta) -> Result<f64> {
    let b = beta.value();
    Ok(log_c_n(n, b)? + selberg_cube_integral(n, 0.5 * b)?)
}

/// Comparison of the Selberg route with the product formula
///
/// ```text
/// 2^(d_n) (2π)^(βn(n-1)/4) Π_{j=0}^{n-1} Γ(1+jβ/2)² Γ((j+1)β/2) / (Γ(2+(n+j-1)β/2) Γ(jβ/2))
/// ```
///
/// read literally. Its `j = 0` factor contains `1/Γ(0)`, so the ratio
/// `Γ(β/2)/Γ(0)` is replaced by the constant that reproduces the exact value at
/// `n = 1`; whatever remains is reported as `discrepancy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfinityBallAudit {
    pub n: usize,
    pub beta: f64,
    pub selberg_route: f64,
    pub product_formula: f64,
    /// Log of the constant substituted for the `j = 0` ratio.
    pub log_reconciliation: f64,
    /// `product_formula - selberg_route`.
    pub discrepancy: f64,
}

fn product_formula_without_j0_ratio(n: usize, beta: f64) -> Result<f64> {
    let g = 0.5 * beta;
    let nf = n as f64;
    let mut s = dim_sa(n, beta) * 2f64.ln() + beta * nf * (nf - 1.0) / 4.0 * (2.0 * PI).ln();
    for j in 0..n {
        let jf = j as f64;
        s += 2.0 * log_gamma(1.0 + jf * g)? - log_gamma(2.0 + (nf + jf - 1.0) * g)?;
        if j >= 1 {
            s += log_gamma((jf + 1.0) * g)? - log_gamma(jf * g)?;
        }
    }
    Ok(s)
}

pub fn audit_inf_sa(n: usize, beta: Beta) -> Result<InfinityBallAudit> {
    let b = beta.value();
    let log_reconciliation = log_vol_inf_sa(1, beta)? - product_formula_without_j0_ratio(1, b)?;
    let selberg_route = log_vol_inf_sa(n, beta)?;
    let product_formula = product_formula_without_j0_ratio(n, b)? + log_reconciliation;
    Ok(InfinityBallAudit {
        n,
        beta: b,
        selberg_route,
        product_formula,
        log_reconciliation,
        discrepancy: product_formula - selberg_route,
    })
}

/// Unit ball of `ℓ_p^n`: `2^n Γ(1 + 1/p)^n / Γ(1 + n/p)`.
pub fn log_vol_lp_ball(n: usize, p: f64) -> Result<f64> {
    check_n(n)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(domain(format!("l_p ball needs finite p >= 1, got {p}")));
    }
    let nf = n as f64;
    Ok(nf * 2f64.ln() + nf * log_gamma(1.0 + 1.0 / p)? - log_gamma(1.0 + nf / p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadratureSpec};

    #[test]
    fn dimensions() {
        assert_eq!(dim(&MatrixClassParams::self_adjoint(1, Beta::Real)), 1);
        assert_eq!(dim(&MatrixClassParams::self_adjoint(3, Beta::Complex)), 9);
        let full = MatrixClassParams {
            n: 3,
            beta: Beta::Real,
            self_adjoint: false,
        };
        assert_eq!(dim(&full), 9);
        assert_eq!(dim(&MatrixClassParams::self_adjoint(4, Beta::Quaternion)), 28);
        assert!(Beta::from_value(3.0).is_err());
    }

    #[test]
    fn c_n_small_cases() {
        for b in [0.5, 1.0, 2.0, 4.0, 7.3] {
            assert!(log_c_n(1, b).unwrap().abs() < 1e-14);
        }
        // n = 2, β = 1 by the literal product:
        // (1/2) (Γ(1/2)/sqrt(2π))² (2π)^(1/2)/Γ(1/2) (2π)/Γ(1)
        let g = PI.sqrt();
        let direct = 0.5 * (g / (2.0 * PI).sqrt()).powi(2) * (2.0 * PI).sqrt() / g * (2.0 * PI);
        assert!((log_c_n(2, 1.0).unwrap() - direct.ln()).abs() < 1e-14);
        assert!(log_c_n(0, 1.0).is_err());
        assert!(log_c_n(2, 0.0).is_err());
    }

    #[test]
    fn c_n_recurrence() {
        let ln_2pi = (2.0 * PI).ln();
        for b in [1.0, 2.0, 4.0] {
            for n in 1..30usize {
                let step = log_c_n(n + 1, b).unwrap() - log_c_n(n, b).unwrap();
                let n1 = (n + 1) as f64;
                let want = -n1.ln() + log_gamma(b / 2.0).unwrap() - b / 2.0 * ln_2pi
                    + b * n1 / 2.0 * ln_2pi
                    - log_gamma(b * n1 / 2.0).unwrap();
                assert!((step - want).abs() < 1e-10, "n={n} b={b}");
            }
        }
    }

    #[test]
    fn euclidean_examples() {
        assert!((log_vol_euclidean(1).unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!((log_vol_euclidean(2).unwrap() - PI.ln()).abs() < 1e-14);
        assert!((log_vol_euclidean(3).unwrap() - (4.0 * PI / 3.0).ln()).abs() < 1e-14);
        assert!(log_vol_euclidean(0).is_err());
    }

    #[test]
    fn inf_full_small_cases() {
        assert!((log_vol_inf_full(1, Beta::Real).unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!((log_vol_inf_full(1, Beta::Complex).unwrap() - PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn selberg_examples() {
        for g in [0.5, 1.0, 2.0] {
            assert!((selberg_cube_integral(1, g).unwrap() - 2f64.ln()).abs() < 1e-14);
        }
        assert!((selberg_cube_integral(2, 1.0).unwrap() - (8.0f64 / 3.0).ln()).abs() < 1e-14);
        // ∬ |x - y| over [-1,1]² = 8/3 as well: inner ∫|x-y|dy = x² + 1.
        let inner = |x: f64| x * x + 1.0;
        let q = integrate(inner, -1.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((selberg_cube_integral(2, 0.5).unwrap() - q.ln()).abs() < 1e-12);
    }

    #[test]
    fn selberg_three_points_by_quadrature() {
        // ∫_{[-1,1]^3} Π (x_i - x_j)² dx with the innermost integral done in
        // closed form: it is a polynomial in z.
        let spec = QuadratureSpec::default().with_tolerances(1e-13, 1e-12);
        let val = integrate(
            |x| {
                integrate(
                    |y| {
                        let a = (x - y) * (x - y);
                        // ∫_{-1}^1 (z-x)²(z-y)² dz
                        let s = x + y;
                        let p = x * y;
                        // (z² - s z + p)² = z⁴ - 2s z³ + (s² + 2p) z² - 2sp z + p²
                        let iz = 2.0 / 5.0 + (s * s + 2.0 * p) * 2.0 / 3.0 + 2.0 * p * p;
                        a * iz
                    },
                    -1.0,
                    1.0,
                    &spec,
                )
                .unwrap()
            },
            -1.0,
            1.0,
            &spec,
        )
        .unwrap();
        assert!((selberg_cube_integral(3, 1.0).unwrap() - val.ln()).abs() < 1e-10);
    }

    #[test]
    fn inf_sa_one_by_one() {
        for b in Beta::ALL {
            assert_eq!(log_vol_inf_sa(1, b).unwrap(), 2f64.ln());
        }
    }

    #[test]
    fn product_formula_audit() {
        for b in Beta::ALL {
            let a1 = audit_inf_sa(1, b).unwrap();
            assert!(a1.discrepancy.abs() < 1e-14);
            assert!(a1.log_reconciliation.abs() < 1e-14);
            // Beyond n = 1 the leftover is the telescoped Γ(nβ/2)/Γ(β/2).
            for n in 2..8 {
                let a = audit_inf_sa(n, b).unwrap();
                let g = b.value() / 2.0;
                let want = log_gamma(n as f64 * g).unwrap() - log_gamma(g).unwrap();
                assert!((a.discrepancy - want).abs() < 1e-10, "n={n} {b:?}");
            }
        }
    }

    #[test]
    fn infinity_ball_contains_euclidean_ball() {
        for b in Beta::ALL {
            for n in 1..40 {
                let d = dim(&MatrixClassParams::self_adjoint(n, b));
                let diff = log_vol_inf_sa(n, b).unwrap() - log_vol_euclidean(d).unwrap();
                assert!(diff >= -1e-12, "n={n} {b:?}: {diff}");
            }
        }
    }

    #[test]
    fn finite_for_large_n() {
        for b in Beta::ALL {
            let n = 512;
            assert!(log_vol_inf_sa(n, b).unwrap().is_finite());
            assert!(log_vol_inf_full(n, b).unwrap().is_finite());
            assert!(log_c_n(n, b.value()).unwrap().is_finite());
            let d = dim(&MatrixClassParams::self_adjoint(n, b));
            assert!(log_vol_euclidean(d).unwrap().is_finite());
        }
    }

    #[test]
    fn lp_ball_examples() {
        for n in 1..10usize {
            let cross = n as f64 * 2f64.ln() - ln_factorial(n as u64);
            assert!((log_vol_lp_ball(n, 1.0).unwrap() - cross).abs() < 1e-13);
            let e = log_vol_euclidean(n as u64).unwrap();
            assert!((log_vol_lp_ball(n, 2.0).unwrap() - e).abs() < 1e-13);
        }
        // Area of |x|^4 + |y|^4 <= 1: 4 ∫_0^1 (1 - x^4)^(1/4) dx.
        let spec = QuadratureSpec::default()
            .with_singularity(crate::numerics::Singularity::InverseSqrtRight);
        let q = integrate(|x| 4.0 * (1.0 - x.powi(4)).max(0.0).powf(0.25), 0.0, 1.0, &spec).unwrap();
        assert!((log_vol_lp_ball(2, 4.0).unwrap() - q.ln()).abs() < 1e-8);
        assert!(log_vol_lp_ball(2, 0.5).is_err());
        assert!(log_vol_lp_ball(2, f64::INFINITY).is_err());
    }
}
