//! Large-n expansions of `ln vol`, `ln Z` and `ln c_n`, evaluated term by
//! term, plus residual diagnostics against exact values.
//!
//! The unknown constants that the expansions only assert to exist are never
//! filled in. [`ExpansionValue::has_unknown_constant`] flags them and
//! [`residual_series`] estimates them from the tail of a residual sequence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::log_gamma;
use crate::ullman::{energy_minimum_reference, log_constant_a, UllmanConstants};
use crate::volumes::Beta;

/// Threshold on `|r(n)|/n` at the end of the grid for an o(n) verdict.
pub const DEFAULT_O_N_THRESHOLD: f64 = 0.05;
/// Threshold on the last successive difference for an o(1) verdict.
pub const DEFAULT_O_1_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    N2LogN,
    N2,
    NLogN,
    N,
    LogN,
    Const,
}

impl Order {
    pub const ALL: [Order; 6] = [
        Order::N2LogN,
        Order::N2,
        Order::NLogN,
        Order::N,
        Order::LogN,
        Order::Const,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Order::N2LogN => "n2logn",
            Order::N2 => "n2",
            Order::NLogN => "nlogn",
            Order::N => "n",
            Order::LogN => "logn",
            Order::Const => "const",
        }
    }

    /// The order's gauge function at `n`.
    pub fn eval(self, n: f64) -> f64 {
        match self {
            Order::N2LogN => n * n * n.ln(),
            Order::N2 => n * n,
            Order::NLogN => n * n.ln(),
            Order::N => n,
            Order::LogN => n.ln(),
            Order::Const => 1.0,
        }
    }
}

impl std::str::FromStr for Order {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Order::ALL
            .into_iter()
            .find(|o| o.label() == s)
            .ok_or_else(|| domain(format!("unknown order label '{s}'")))
    }
}

/// Evaluated terms of an expansion, keyed by order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionValue {
    pub terms: BTreeMap<Order, f64>,
    pub partial_sum: f64,
    pub has_unknown_constant: bool,
}

impl ExpansionValue {
    fn from_coefficients(n: usize, coefficients: &[(Order, f64)], has_unknown_constant: bool) -> Self {
        let nf = n as f64;
        let mut terms = BTreeMap::new();
        for &(order, c) in coefficients {
            *terms.entry(order).or_insert(0.0) += c * order.eval(nf);
        }
        let partial_sum = terms.values().sum();
        ExpansionValue {
            terms,
            partial_sum,
            has_unknown_constant,
        }
    }

    pub fn term(&self, order: Order) -> f64 {
        self.terms.get(&order).copied().unwrap_or(0.0)
    }
}

/// `C(β) = (1 - β/2) ln(β/2) - (β/2) ln 2π + β/2 + ln Γ(β/2)`.
pub fn c_beta(beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    let h = beta / 2.0;
    Ok((1.0 - h) * h.ln() - h * (2.0 * PI).ln() + h + log_gamma(h)?)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(domain("expansions are evaluated for n >= 2"));
    }
    Ok(())
}

fn check_three_halves(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.5) {
        return Err(domain(format!(
            "this expansion holds for finite p >= 3/2, got {p}"
        )));
    }
    Ok(())
}

fn check_constants(p: f64, constants: &UllmanConstants) -> Result<()> {
    if constants.p != p {
        return Err(domain(format!(
            "Ullman constants were computed for p = {}, not {p}",
            constants.p
        )));
    }
    Ok(())
}

/// Leading terms of `ln vol` of the self-adjoint Schatten ball through
/// order `n`, for `p >= 3/2`.
pub fn expansion_logvol_main1(
    n: usize,
    p: f64,
    beta: Beta,
    constants: &UllmanConstants,
) -> Result<ExpansionValue> {
    check_n(n)?;
    check_three_halves(p)?;
    check_constants(p, constants)?;
    let b = beta.value();
    let h = b / 2.0;
    let s = 0.5 + 1.0 / p;
    let ln_a = constants.a_p.ln();
    Ok(ExpansionValue::from_coefficients(
        n,
        &[
            (Order::N2LogN, -h * s),
            (Order::N2, h * (0.5 * (4.0 * PI / b).ln() + 0.75 + ln_a)),
            (Order::NLogN, -(1.0 - h) * s),
            (
                Order::N,
                (1.0 - h)
                    * (0.5 * (4.0 / (b * PI)).ln() + 0.5 + 0.5 / p + ln_a + constants.entropy),
            ),
        ],
        true,
    ))
}

/// `ln vol` of the complex (`β = 2`) ball through order `ln n`; the
/// constant is unknown.
pub fn expansion_logvol_main2(n: usize, p: f64) -> Result<ExpansionValue> {
    check_n(n)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(domain(format!("p must be finite and >= 1, got {p}")));
    }
    let s = 0.5 + 1.0 / p;
    Ok(ExpansionValue::from_coefficients(
        n,
        &[
            (Order::N2LogN, -s),
            (Order::N2, 0.5 * (2.0 * PI).ln() + 0.75 + log_constant_a(p)?),
            (Order::LogN, -1.0),
        ],
        true,
    ))
}

/// `ln Z_{n,p,β}` through order `n` for `β > 0`, `p >= 3/2`.
///
/// The energy minimum `I_p = ln 2 + 3/(2p)` enters in closed form; the
/// entropy comes from quadrature.
pub fn expansion_log_z_ls(
    n: usize,
    p: f64,
    beta: f64,
    constants: &UllmanConstants,
) -> Result<ExpansionValue> {
    check_n(n)?;
    check_three_halves(p)?;
    check_constants(p, constants)?;
    let h = beta / 2.0;
    let c = c_beta(beta)?;
    Ok(ExpansionValue::from_coefficients(
        n,
        &[
            (Order::N2, -h * energy_minimum_reference(p)),
            (Order::NLogN, h),
            (Order::N, -c + (1.0 - h) * constants.entropy),
        ],
        true,
    ))
}

/// `ln Z_{n,p,2}` through order `ln n`; the constant is unknown.
pub fn expansion_log_z_ckm(n: usize, p: f64) -> Result<ExpansionValue> {
    check_n(n)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(domain(format!("p must be finite and >= 1, got {p}")));
    }
    Ok(ExpansionValue::from_coefficients(
        n,
        &[
            (Order::N2, -energy_minimum_reference(p)),
            (Order::NLogN, 1.0),
            (Order::N, (2.0 * PI).ln() - 1.0),
            (Order::LogN, 5.0 / 12.0),
        ],
        true,
    ))
}

/// `ln c_n` through order `ln n`; the constant is unknown.
pub fn expansion_log_cn(n: usize, beta: Beta) -> Result<ExpansionValue> {
    check_n(n)?;
    let b = beta.value();
    let h = b / 2.0;
    Ok(ExpansionValue::from_coefficients(
        n,
        &[
            (Order::N2LogN, -b / 4.0),
            (Order::N2, h * (0.5 * (4.0 * PI / b).ln() + 0.75)),
            (Order::NLogN, -0.5 * (1.0 + h)),
            (
                Order::N,
                0.5 * (1.0 - h) * b.ln() - 0.5 * (1.0 + h) * (PI.ln() - 1.0) - 2f64.ln()
                    + log_gamma(h)?,
            ),
            (Order::LogN, -(3.0 + h + 2.0 / b) / 12.0),
        ],
        true,
    ))
}

/// Trend verdict over the tail half of a residual grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    /// `true` when the tracked quantity strictly decreases over the tail.
    pub decreasing: bool,
    /// Tracked quantity at the end of the grid.
    pub final_value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Tail-average estimate of an unknown additive constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub estimate: f64,
    /// Width `max - min` of the residuals averaged.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub n_grid: Vec<usize>,
    pub exact: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// `exact - partial_sum`.
    pub residuals: Vec<f64>,
    /// Residuals divided by the first omitted order's gauge function.
    pub normalized: Vec<f64>,
    pub first_omitted_order: Order,
    /// For an o(1) remainder, `r(n_{k+1}) - r(n_k)`; empty otherwise.
    pub differences: Vec<f64>,
    pub verdict: TrendVerdict,
    /// For an o(1) remainder, the limit constant estimated from the tail.
    pub constant: Option<ConstantEstimate>,
}

impl ResidualSeries {
    /// The quantity whose decay the verdict tracks: `|normalized|` for
    /// growing omitted orders, `|differences|` when the omitted order is a
    /// constant.
    pub fn tracked(&self) -> Vec<f64> {
        if self.first_omitted_order == Order::Const {
            self.differences.iter().map(|d| d.abs()).collect()
        } else {
            self.normalized.iter().map(|r| r.abs()).collect()
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.verdict = trend_verdict(&self.tracked(), threshold);
        self
    }
}

fn trend_verdict(tracked: &[f64], threshold: f64) -> TrendVerdict {
    let start = (tracked.len().saturating_sub(1)) / 2;
    let tail = &tracked[start..];
    let decreasing = tail.windows(2).all(|w| w[1] < w[0] * (1.0 - 1e-9));
    let final_value = tail.last().copied().unwrap_or(f64::NAN);
    TrendVerdict {
        decreasing,
        final_value,
        threshold,
        pass: decreasing && final_value < threshold,
    }
}

/// Residuals of `expansion` against `exact` on the grid of `exact`'s keys.
///
/// `first_omitted_order` is the order of the remainder: `N` for an o(n)
/// claim, `Const` for a claim "constant + o(1)" with the constant unknown.
pub fn residual_series<F>(
    exact: &BTreeMap<usize, f64>,
    mut expansion: F,
    first_omitted_order: Order,
) -> Result<ResidualSeries>
where
    F: FnMut(usize) -> Result<ExpansionValue>,
{
    if exact.is_empty() {
        return Err(domain("residual series needs a non-empty grid"));
    }
    let n_grid: Vec<usize> = exact.keys().copied().collect();
    let exact_values: Vec<f64> = exact.values().copied().collect();
    let partial_sums = n_grid
        .iter()
        .map(|&n| expansion(n).map(|e| e.partial_sum))
        .collect::<Result<Vec<f64>>>()?;
    let residuals: Vec<f64> = exact_values
        .iter()
        .zip(&partial_sums)
        .map(|(e, s)| e - s)
        .collect();
    let normalized: Vec<f64> = n_grid
        .iter()
        .zip(&residuals)
        .map(|(&n, r)| r / first_omitted_order.eval(n as f64))
        .collect();
    if normalized.iter().any(|v| !v.is_finite()) {
        return Err(domain("normalized residuals are not finite"));
    }
    let (differences, constant, threshold) = if first_omitted_order == Order::Const {
        let diffs: Vec<f64> = residuals.windows(2).map(|w| w[1] - w[0]).collect();
        let tail = &residuals[residuals.len() / 2..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (
            diffs,
            Some(ConstantEstimate {
                estimate: mean,
                spread: hi - lo,
            }),
            DEFAULT_O_1_THRESHOLD,
        )
    } else {
        (Vec::new(), None, DEFAULT_O_N_THRESHOLD)
    };
    let mut series = ResidualSeries {
        n_grid,
        exact: exact_values,
        partial_sums,
        residuals,
        normalized,
        first_omitted_order,
        differences,
        verdict: TrendVerdict {
            decreasing: false,
            final_value: f64::NAN,
            threshold,
            pass: false,
        },
        constant,
    };
    series = series.with_threshold(threshold);
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ullman::constant_a;

    fn fake_constants(p: f64, entropy: f64) -> UllmanConstants {
        UllmanConstants {
            p,
            v_p: 0.0,
            alpha_p: 0.0,
            alpha_p_quadrature: 0.0,
            a_p: constant_a(p).unwrap(),
            entropy,
            log_energy: 0.0,
            i_p: 0.0,
        }
    }

    #[test]
    fn c_beta_values() {
        assert!((c_beta(2.0).unwrap() - (1.0 - (2.0 * PI).ln())).abs() < 1e-15);
        let want = 0.5 * 0.5f64.ln() - 0.5 * (2.0 * PI).ln() + 0.5 + 0.5 * PI.ln();
        assert!((c_beta(1.0).unwrap() - want).abs() < 1e-14);
        assert!(c_beta(0.0).is_err());
    }

    #[test]
    fn main1_complex_case_drops_lower_terms() {
        let c = fake_constants(3.0, 0.4);
        let v = expansion_logvol_main1(100, 3.0, Beta::Complex, &c).unwrap();
        assert_eq!(v.term(Order::NLogN), 0.0);
        assert_eq!(v.term(Order::N), 0.0);
        let w = expansion_logvol_main2(100, 3.0).unwrap();
        assert_eq!(v.term(Order::N2LogN), w.term(Order::N2LogN));
        assert!((v.term(Order::N2) - w.term(Order::N2)).abs() <= 1e-12 * w.term(Order::N2).abs());
    }

    #[test]
    fn main1_real_n2_coefficient() {
        let c = fake_constants(2.0, PI.ln() - 0.5);
        let v = expansion_logvol_main1(100, 2.0, Beta::Real, &c).unwrap();
        let want = 0.5 * (0.5 * (4.0 * PI).ln() + 0.75 - 0.25);
        assert!((v.term(Order::N2) / 1e4 - want).abs() < 1e-14);
        assert!(expansion_logvol_main1(100, 1.2, Beta::Real, &fake_constants(1.2, 0.0)).is_err());
    }

    #[test]
    fn ls_and_ckm_agree_at_complex_beta() {
        for p in [1.5, 2.0, 3.0, 7.5] {
            let c = fake_constants(p, 0.3);
            for n in [10, 100, 1000] {
                let ls = expansion_log_z_ls(n, p, 2.0, &c).unwrap();
                let ckm = expansion_log_z_ckm(n, p).unwrap();
                for o in [Order::N2, Order::NLogN, Order::N] {
                    assert!((ls.term(o) - ckm.term(o)).abs() <= 1e-12 * (1.0 + ckm.term(o).abs()));
                }
                let diff = ckm.partial_sum - ls.partial_sum;
                assert!((diff - 5.0 / 12.0 * (n as f64).ln()).abs() < 1e-12 * (n * n) as f64);
            }
        }
    }

    #[test]
    fn log_n_coefficients() {
        let n = 1000usize;
        let ln = (n as f64).ln();
        assert!((expansion_log_cn(n, Beta::Complex).unwrap().term(Order::LogN) + 5.0 / 12.0 * ln).abs() < 1e-13);
        assert!((expansion_log_z_ckm(n, 2.0).unwrap().term(Order::LogN) - 5.0 / 12.0 * ln).abs() < 1e-13);
        assert!((expansion_logvol_main2(n, 2.0).unwrap().term(Order::LogN) + ln).abs() < 1e-13);
    }

    #[test]
    fn partial_sums_are_finite() {
        let c = fake_constants(2.0, 0.64);
        for n in [2, 10, 1000, 10_000] {
            for b in Beta::ALL {
                assert!(expansion_logvol_main1(n, 2.0, b, &c).unwrap().partial_sum.is_finite());
                assert!(expansion_log_cn(n, b).unwrap().partial_sum.is_finite());
                assert!(expansion_log_z_ls(n, 2.0, b.value(), &c).unwrap().partial_sum.is_finite());
            }
            assert!(expansion_logvol_main2(n, 2.0).unwrap().partial_sum.is_finite());
            assert!(expansion_log_z_ckm(n, 2.0).unwrap().partial_sum.is_finite());
        }
    }

    #[test]
    fn partial_sum_is_term_sum() {
        let v = expansion_log_cn(37, Beta::Quaternion).unwrap();
        assert_eq!(v.partial_sum, v.terms.values().sum::<f64>());
        assert!(v.has_unknown_constant);
    }

    fn synthetic(grid: &[usize], extra: impl Fn(f64) -> f64) -> BTreeMap<usize, f64> {
        grid.iter()
            .map(|&n| {
                let e = expansion_log_z_ckm(n, 2.0).unwrap().partial_sum;
                (n, e + extra(n as f64))
            })
            .collect()
    }

    #[test]
    fn residuals_vanish_for_exact_expansion() {
        let exact = synthetic(&[50, 100, 200], |_| 0.0);
        let s = residual_series(&exact, |n| expansion_log_z_ckm(n, 2.0), Order::N).unwrap();
        assert!(s.residuals.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn logarithmic_excess_is_o_n() {
        let grid = [100, 200, 400, 800, 1600, 3200];
        let exact = synthetic(&grid, |n| 7.0 * n.ln());
        let s = residual_series(&exact, |n| expansion_log_z_ckm(n, 2.0), Order::N).unwrap();
        assert!(s.verdict.pass, "{:?}", s.verdict);
    }

    #[test]
    fn linear_excess_is_not_o_n() {
        let grid = [50, 100, 200, 400];
        let exact = synthetic(&grid, |n| 0.01 * n);
        let s = residual_series(&exact, |n| expansion_log_z_ckm(n, 2.0), Order::N).unwrap();
        assert!(!s.verdict.pass);
    }

    #[test]
    fn constant_plus_decay_is_detected() {
        let grid = [50, 100, 200, 400];
        let exact = synthetic(&grid, |n| 1.25 + 0.3 / n);
        let s = residual_series(&exact, |n| expansion_log_z_ckm(n, 2.0), Order::Const).unwrap();
        assert!(s.verdict.pass);
        let c = s.constant.unwrap();
        assert!((c.estimate - 1.25).abs() < 0.01 && c.spread < 0.01);
    }

    #[test]
    fn order_labels_round_trip() {
        for o in Order::ALL {
            assert_eq!(o.label().parse::<Order>().unwrap(), o);
            assert_eq!(serde_json::to_string(&o).unwrap(), format!("\"{}\"", o.label()));
        }
    }
}
