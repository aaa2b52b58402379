//! Self-check suite behind `schatten validate`.
//!
//! Every check records what it measured, the reference and the tolerance.
//! The report contains no timings, so two runs with the same configuration
//! serialize to identical bytes regardless of the worker count.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    empirical_kolmogorov_distance, energy, gradient, minimize, minimize_with, MinimizeOptions,
    ParticleConfig,
};
use crate::error::Result;
use crate::expansion::{
    c_beta, expansion_log_cn, expansion_log_z_ckm, expansion_log_z_ls, expansion_logvol_main1,
    expansion_logvol_main2, residual_series, Order,
};
use crate::numerics::{integrate, QuadratureSpec, RandomStream, Singularity};
use crate::partition::{
    log_selberg_cube_mc, log_vol_sa_via_lp_mc, log_vol_sa_via_z, log_z_gaussian_exact,
    log_z_importance, log_z_importance_with, log_z_quadrature, EnsembleParams, Proposal,
};
use crate::ullman::{
    constant_a, constant_v, moment_by_quadrature, regularity_report, total_mass, UllmanDistribution,
};
use crate::volumes::{
    dim_sa, log_c_n, log_vol_euclidean, log_vol_inf_sa, selberg_cube_integral, Beta,
    MatrixClassParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Deterministic checks only.
    Fast,
    /// Adds the Monte Carlo cross-checks.
    Full,
}

/// Deliberate corruption used to confirm the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Scale `v_p` by `1 + 1e-3` wherever a check reads it.
    TamperVp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub level: Level,
    pub seed: u64,
    pub samples: usize,
    pub fault: Option<Fault>,
}

impl ValidationConfig {
    pub fn new(level: Level, seed: u64) -> Self {
        ValidationConfig {
            level,
            seed,
            samples: 1_000_000,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub all_pass: bool,
    pub checks: usize,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub rows: Vec<CheckResult>,
    pub verdicts: Verdicts,
}

struct Suite {
    config: ValidationConfig,
    rows: Vec<CheckResult>,
}

impl Suite {
    fn v(&self, p: f64) -> Result<f64> {
        let v = constant_v(p)?;
        Ok(match self.config.fault {
            Some(Fault::TamperVp) => v * (1.0 + 1e-3),
            None => v,
        })
    }

    fn stream(&self, id: u64) -> RandomStream {
        RandomStream::new(self.config.seed, id)
    }

    /// `|measured - reference| <= tolerance`.
    fn close(&mut self, name: impl Into<String>, measured: Result<f64>, reference: f64, tolerance: f64) {
        self.push(name.into(), measured, reference, tolerance, |m| (m - reference).abs() <= tolerance, String::new());
    }

    /// `measured <= bound`.
    fn below(&mut self, name: impl Into<String>, measured: Result<f64>, bound: f64) {
        self.push(name.into(), measured, bound, bound, |m| m <= bound, String::new());
    }

    fn flag(&mut self, name: impl Into<String>, ok: Result<bool>, detail: String) {
        let measured = ok.map(|b| if b { 1.0 } else { 0.0 });
        self.push(name.into(), measured, 1.0, 0.0, |m| m == 1.0, detail);
    }

    fn push(
        &mut self,
        name: String,
        measured: Result<f64>,
        reference: f64,
        tolerance: f64,
        ok: impl Fn(f64) -> bool,
        detail: String,
    ) {
        let row = match measured {
            Ok(m) => CheckResult {
                name,
                pass: m.is_finite() && ok(m),
                measured: m,
                reference,
                tolerance,
                detail,
            },
            Err(e) => CheckResult {
                name,
                pass: false,
                measured: f64::NAN,
                reference,
                tolerance,
                detail: e.to_string(),
            },
        };
        self.rows.push(row);
    }
}

pub fn run_validation(config: &ValidationConfig) -> ValidationReport {
    let mut suite = Suite {
        config: config.clone(),
        rows: Vec::new(),
    };
    constants_checks(&mut suite);
    ullman_checks(&mut suite);
    regularity_checks(&mut suite);
    master_identity_checks(&mut suite);
    selberg_checks(&mut suite);
    z_expansion_checks(&mut suite);
    volume_expansion_checks(&mut suite);
    cn_expansion_checks(&mut suite);
    equilibrium_checks(&mut suite);
    if config.level == Level::Full {
        route_agreement_checks(&mut suite);
        selberg_mc_checks(&mut suite);
    }
    let failed: Vec<String> = suite
        .rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.clone())
        .collect();
    ValidationReport {
        config: config.clone(),
        verdicts: Verdicts {
            all_pass: failed.is_empty(),
            checks: suite.rows.len(),
            failed,
        },
        rows: suite.rows,
    }
}

const ULLMAN_PS: [f64; 4] = [1.5, 2.0, 3.0, 4.5];
const GRID: [usize; 4] = [50, 100, 200, 400];

fn constants_checks(s: &mut Suite) {
    s.close("constants.a_p=2", constant_a(2.0), (-0.25f64).exp(), 1e-12);
    s.close("constants.a_p=inf", constant_a(f64::INFINITY), 0.5, 1e-12);
    s.close("constants.c_beta=2", c_beta(2.0), 1.0 - (2.0 * PI).ln(), 1e-12);
    let sum = (|| {
        let ckm_n = expansion_log_z_ckm(2, 2.0)?.term(Order::N) / 2.0;
        Ok(c_beta(2.0)? + ckm_n)
    })();
    s.close("constants.c_beta=2+ckm_order_n", sum, 0.0, 1e-12);
}

fn ullman_checks(s: &mut Suite) {
    for p in ULLMAN_PS {
        s.close(format!("ullman.total_mass.p={p}"), total_mass(p), 1.0, 1e-9);
        let v = s.v(p);
        let moment = v.and_then(|v| Ok(moment_by_quadrature(p)? * p * v));
        s.close(format!("ullman.moment_identity.p={p}"), moment, 1.0, 1e-8);
        let energy = UllmanDistribution::new(p).and_then(|d| d.log_energy());
        s.close(
            format!("ullman.log_energy.p={p}"),
            energy,
            2f64.ln() + 0.5 / p,
            1e-5,
        );
    }
    let ent = UllmanDistribution::new(2.0).and_then(|d| d.entropy());
    s.close("ullman.entropy.p=2", ent, PI.ln() - 0.5, 1e-6);
}

fn regularity_checks(s: &mut Suite) {
    for p in [1.5, 2.0, 3.0] {
        let band = regularity_report(p).map(|r| r.boundary_ratio_max / r.boundary_ratio_min);
        s.below(format!("regularity.boundary_band.p={p}"), band, 10.0);
    }
    for p in [1.5, 1.8] {
        let h = regularity_report(p).map(|r| r.holder_exponent_at_0);
        s.close(format!("regularity.holder_at_0.p={p}"), h, (p - 1.0).min(1.0), 0.05);
    }
}

fn master_identity_checks(s: &mut Suite) {
    for b in Beta::ALL {
        for n in 1..=5 {
            let bv = b.value();
            let measured = (|| {
                let params = EnsembleParams::new(n, 2.0, bv)?;
                log_vol_sa_via_z(&params, log_z_gaussian_exact(n, bv)?)
            })();
            let d = MatrixClassParams::self_adjoint(n, b).dim();
            let reference = log_vol_euclidean(d).unwrap_or(f64::NAN);
            s.close(format!("master_identity.n={n}.beta={bv}"), measured, reference, 1e-8);
        }
    }
}

/// `∫_{-1}^1 ∫_{-1}^1 |x - y|^(2γ) dy dx` by nested quadrature, split at the diagonal.
pub fn selberg_two_point_quadrature(gamma: f64) -> Result<f64> {
    let inner = QuadratureSpec::default()
        .with_tolerances(1e-14, 1e-12)
        .with_singularity(Singularity::Both);
    let outer = QuadratureSpec::default().with_tolerances(1e-13, 1e-11);
    let mut err = None;
    let v = integrate(
        |x| {
            let left = integrate(|y| (x - y).abs().powf(2.0 * gamma), -1.0, x, &inner);
            let right = integrate(|y| (y - x).abs().powf(2.0 * gamma), x, 1.0, &inner);
            match (left, right) {
                (Ok(a), Ok(b)) => a + b,
                (Err(e), _) | (_, Err(e)) => {
                    err = Some(e);
                    0.0
                }
            }
        },
        -1.0,
        1.0,
        &outer,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v.ln()),
    }
}

fn selberg_checks(s: &mut Suite) {
    for g in [0.5, 1.0] {
        let q = selberg_two_point_quadrature(g);
        let closed = selberg_cube_integral(2, g).unwrap_or(f64::NAN);
        s.close(format!("selberg.quadrature.n=2.gamma={g}"), q, closed, 1e-6);
    }
    for b in Beta::ALL {
        let v = log_vol_inf_sa(1, b);
        let ok = v.map(|v| v == 2f64.ln());
        s.flag(format!("selberg.inf_ball_n=1.beta={}", b.value()), ok, "exact ln 2".into());
    }
}

fn trend(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1].abs() < w[0].abs())
}

fn z_expansion_checks(s: &mut Suite) {
    let constants = UllmanDistribution::new(2.0).and_then(|d| d.constants());
    for b in [1.0, 2.0, 4.0] {
        let series = constants.clone().and_then(|c| {
            let exact = GRID
                .iter()
                .map(|&n| Ok((n, log_z_gaussian_exact(n, b)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            residual_series(&exact, |n| expansion_log_z_ls(n, 2.0, b, &c), Order::N)
        });
        let detail = series
            .as_ref()
            .map(|r| format!("{:?}", r.normalized))
            .unwrap_or_default();
        s.flag(
            format!("expansion.z_ls.decreasing.beta={b}"),
            series.as_ref().map(|r| trend(&r.normalized)).map_err(Clone::clone),
            detail,
        );
        s.below(
            format!("expansion.z_ls.final.beta={b}"),
            series.map(|r| r.normalized.last().unwrap().abs()),
            0.05,
        );
    }
    let diff = (|| {
        let r = |n| Ok::<f64, crate::Error>(log_z_gaussian_exact(n, 2.0)? - expansion_log_z_ckm(n, 2.0)?.partial_sum);
        Ok((r(400)? - r(200)?).abs())
    })();
    s.below("expansion.z_ckm.stability", diff, 1e-2);
}

fn volume_expansion_checks(s: &mut Suite) {
    let constants = UllmanDistribution::new(2.0).and_then(|d| d.constants());
    for b in Beta::ALL {
        let bv = b.value();
        let series = constants.clone().and_then(|c| {
            let exact = GRID
                .iter()
                .map(|&n| Ok((n, log_vol_euclidean(MatrixClassParams::self_adjoint(n, b).dim())?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            residual_series(&exact, |n| expansion_logvol_main1(n, 2.0, b, &c), Order::N)
        });
        s.below(
            format!("expansion.vol_main1.final.beta={bv}"),
            series.map(|r| r.normalized.last().unwrap().abs()),
            0.05,
        );
    }
    let main2 = (|| {
        let exact = (50..=400)
            .step_by(50)
            .map(|n| Ok((n, log_vol_euclidean(MatrixClassParams::self_adjoint(n, Beta::Complex).dim())?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        residual_series(&exact, |n| expansion_logvol_main2(n, 2.0), Order::Const)
    })();
    s.flag(
        "expansion.vol_main2.differences_shrink",
        main2.as_ref().map(|r| trend(&r.differences)).map_err(Clone::clone),
        String::new(),
    );
    s.below(
        "expansion.vol_main2.final_difference",
        main2.map(|r| r.differences.last().unwrap().abs()),
        1e-2,
    );
}

fn cn_expansion_checks(s: &mut Suite) {
    for b in Beta::ALL {
        let bv = b.value();
        let r = |n| -> Result<f64> { Ok(log_c_n(n, bv)? - expansion_log_cn(n, b)?.partial_sum) };
        let diff = (|| Ok((r(400)? - r(399)?).abs()))();
        s.below(format!("expansion.cn.successive_difference.beta={bv}"), diff, 1e-3);
    }
}

fn equilibrium_checks(s: &mut Suite) {
    let a = 0.5 / 2f64.sqrt();
    let pair = minimize(2, 2.0, 1e-12, 100_000).map(|r| {
        let x = r.config.points();
        (x[0] + a).abs().max((x[1] - a).abs())
    });
    s.below("equilibrium.pair_minimizer", pair, 1e-8);

    let polish = MinimizeOptions::new(1e-9, 100_000).with_newton_polish(true);
    for p in [2.0, 3.0] {
        let dists = (|| {
            let dist = UllmanDistribution::new(p)?;
            [25, 50, 100, 200]
                .iter()
                .map(|&n| {
                    let r = minimize_with(n, p, &polish)?;
                    empirical_kolmogorov_distance(r.config.points(), &dist)
                })
                .collect::<Result<Vec<f64>>>()
        })();
        let detail = dists.as_ref().map(|d| format!("{d:?}")).unwrap_or_default();
        s.flag(
            format!("equilibrium.kolmogorov_decreasing.p={p}"),
            dists.as_ref().map(|d| trend(d)).map_err(Clone::clone),
            detail,
        );
        s.below(format!("equilibrium.kolmogorov_n=200.p={p}"), dists.map(|d| d[3]), 0.02);
    }

    let mut rng = s.stream(1000).rng();
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for k in 0..20 {
        let p = [1.5, 2.0, 3.0][k % 3];
        let n = rng.random_range(2..10);
        let mut xs = vec![rng.random_range(-1.5..0.0)];
        for _ in 1..n {
            xs.push(xs.last().unwrap() + rng.random_range(0.05..0.6));
        }
        match fd_gradient_error(&xs, p) {
            Ok(e) => worst = worst.max(e),
            Err(e) => failure = Some(e),
        }
    }
    s.below(
        "equilibrium.gradient_fd",
        failure.map_or(Ok(worst), Err),
        1e-6,
    );
}

/// Largest `|g_i - fd_i| / (1 + |g|_inf)` over coordinates.
fn fd_gradient_error(xs: &[f64], p: f64) -> Result<f64> {
    let g = gradient(&ParticleConfig::new(xs.to_vec(), p)?)?;
    let scale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..xs.len() {
        let mut up = xs.to_vec();
        let mut dn = xs.to_vec();
        up[i] += h;
        dn[i] -= h;
        let fd = (energy(&ParticleConfig::new(up, p)?)? - energy(&ParticleConfig::new(dn, p)?)?) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / scale);
    }
    Ok(worst)
}

fn route_agreement_checks(s: &mut Suite) {
    let samples = s.config.samples;
    for (k, (n, p, b)) in [(2, 1.5, 2.0), (3, 3.0, 1.0), (4, 2.0, 4.0)].into_iter().enumerate() {
        let k = k as u64;
        let outcome = (|| {
            let params = EnsembleParams::new(n, p, b)?;
            let lp = log_vol_sa_via_lp_mc(&params, samples, &s.stream(10 + k))?;
            let z = log_z_importance_with(&params, samples, &s.stream(20 + k), Proposal::Widened)?;
            // The Z route reads v_p in its Gamma factor.
            let tamper = s.v(p)? / constant_v(p)?;
            let dp = dim_sa(n, b) / p;
            let via_z = log_vol_sa_via_z(&params, z.log_value)? + dp * tamper.ln();
            let se = lp.std_error_log.hypot(z.std_error_log);
            Ok(((lp.log_value - via_z).abs() / se, format!("lp={} z={} se={se}", lp.log_value, via_z)))
        })();
        let detail = outcome.as_ref().map(|o| o.1.clone()).unwrap_or_default();
        s.push(
            format!("routes.lp_vs_z.n={n}.p={p}.beta={b}"),
            outcome.map(|o| o.0),
            0.0,
            3.0,
            |m| m <= 3.0,
            detail,
        );
    }
    let quad = (|| {
        let params = EnsembleParams::new(2, 3.0, 1.0)?;
        let q = log_z_quadrature(&params)?;
        let mc = log_z_importance(&params, samples, &s.stream(30))?;
        Ok((mc.log_value - q).abs() / mc.std_error_log)
    })();
    s.below("routes.importance_vs_quadrature.n=2.p=3.beta=1", quad, 3.0);
}

fn selberg_mc_checks(s: &mut Suite) {
    let samples = s.config.samples;
    for n in [3usize, 4] {
        let outcome = (|| {
            let mc = log_selberg_cube_mc(n, 0.5, samples, &s.stream(40 + n as u64))?;
            Ok((mc.log_value - selberg_cube_integral(n, 0.5)?).abs() / mc.std_error_log)
        })();
        s.below(format!("selberg.cube_mc.n={n}.gamma=0.5"), outcome, 3.0);
    }
}
