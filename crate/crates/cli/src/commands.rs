use std::collections::BTreeMap;
use std::f64::consts::PI;

use schatten_core::equilibrium::{empirical_kolmogorov_distance, minimize_with, MinimizeOptions};
use schatten_core::expansion::{
    expansion_log_cn, expansion_log_z_ckm, expansion_log_z_ls, expansion_logvol_main1,
    expansion_logvol_main2, residual_series,
};
use schatten_core::partition::{
    log_vol_sa_via_lp_mc, log_vol_sa_via_z, log_z_gaussian_exact, log_z_importance_with,
    log_z_quadrature, Proposal,
};
use schatten_core::validation::{run_validation, Fault, Level, ValidationConfig};
use schatten_core::volumes::{log_c_n, log_vol_euclidean, log_vol_inf_sa};
use schatten_core::{
    Beta, EnsembleParams, ExpansionValue, MatrixClassParams, Order, RandomStream, UllmanDistribution,
};
use serde_json::json;

use crate::output::{Cell, Table};
use crate::{Command, Common, Failure, FaultArg, LevelArg, ProposalArg, Target};

type Outcome = Result<Table, Failure>;

pub fn run(command: &Command, common: &Common) -> Outcome {
    match command {
        Command::Constants => constants(common),
        Command::Density { points } => density(common, *points),
        Command::Volume { proposal } => volume(common, (*proposal).into()),
        Command::Partition { proposal } => partition(common, (*proposal).into()),
        Command::Equilibrium {
            tol,
            max_iter,
            newton,
        } => equilibrium(common, *tol, *max_iter, *newton),
        Command::Expansion { target } => expansion(common, *target),
        Command::Validate { level, fault } => validate(common, *level, *fault),
    }
}

impl From<ProposalArg> for Proposal {
    fn from(p: ProposalArg) -> Self {
        match p {
            ProposalArg::GeneralizedGaussian => Proposal::GeneralizedGaussian,
            ProposalArg::Widened => Proposal::Widened,
            ProposalArg::UllmanMixture => Proposal::UllmanMixture,
        }
    }
}

/// A Schatten exponent: a number `>= 1` or `inf`.
pub fn parse_p(s: &str) -> Result<f64, Failure> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    let p: f64 = t
        .parse()
        .map_err(|_| Failure::Usage(format!("cannot parse p = '{s}' (expected a number >= 1 or 'inf')")))?;
    if !(p >= 1.0) || p.is_nan() {
        return Err(Failure::Usage(format!(
            "p = {s} is outside the domain: Schatten p-norms are norms only for p >= 1"
        )));
    }
    Ok(p)
}

fn parse_p_list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',').map(parse_p).collect()
}

fn single_p(common: &Common) -> Result<f64, Failure> {
    let ps = parse_p_list(&common.p)?;
    match ps.as_slice() {
        [p] => Ok(*p),
        _ => Err(Failure::Usage("this command takes a single --p".into())),
    }
}

fn finite_p(common: &Common, what: &str) -> Result<f64, Failure> {
    let p = single_p(common)?;
    if p.is_infinite() {
        return Err(Failure::Usage(format!("{what} needs a finite p")));
    }
    Ok(p)
}

/// `start:stop:step` (inclusive) or a comma list; strictly increasing.
pub fn parse_grid(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("cannot parse grid '{s}' (use start:stop:step or a comma list)"));
    let grid: Vec<usize> = if s.contains(':') {
        let parts: Vec<usize> = s
            .split(':')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if step == 0 {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 2 {
        return Err(Failure::Usage(format!(
            "grid '{s}' must be non-empty, strictly increasing and start at n >= 2"
        )));
    }
    Ok(grid)
}

fn constants(common: &Common) -> Outcome {
    let mut table = Table::new(&[
        "p",
        "v_p",
        "alpha_p",
        "A_p",
        "entropy",
        "log_energy",
        "I_p",
        "I_p_reference",
        "defect",
    ]);
    let mut worst: f64 = 0.0;
    for p in parse_p_list(&common.p)? {
        let reference = 2f64.ln() + 1.5 / p;
        if p.is_infinite() {
            // Arcsine law: v_p -> 0, entropy ln(π/2), log-energy ln 2.
            table.push(vec![
                "inf".into(),
                0.0.into(),
                0.0.into(),
                0.5.into(),
                (PI / 2.0).ln().into(),
                2f64.ln().into(),
                2f64.ln().into(),
                reference.into(),
                0.0.into(),
            ]);
            continue;
        }
        let dist = UllmanDistribution::new(p)?;
        let k = dist.constants()?;
        worst = worst.max((k.i_p - reference).abs());
        table.push(vec![
            p.into(),
            k.v_p.into(),
            k.alpha_p.into(),
            k.a_p.into(),
            k.entropy.into(),
            k.log_energy.into(),
            k.i_p.into(),
            reference.into(),
            dist.normalization_defect().into(),
        ]);
    }
    table.verdicts = json!({ "max_abs_I_p_minus_reference": worst });
    Ok(table)
}

fn density(common: &Common, points: usize) -> Outcome {
    if points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let p = single_p(common)?;
    let mut table = Table::new(&["x", "density", "cdf"]);
    let xs = (0..points).map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64);
    if p.is_infinite() {
        for x in xs {
            let f = 1.0 / (PI * (1.0 - x * x).sqrt());
            let cdf = 0.5 + x.clamp(-1.0, 1.0).asin() / PI;
            table.push(vec![x.into(), f.into(), cdf.into()]);
        }
    } else {
        let dist = UllmanDistribution::new(p)?;
        for x in xs {
            table.push(vec![x.into(), dist.density(x)?.into(), dist.cdf(x).into()]);
        }
        table.verdicts = json!({ "normalization_defect": dist.normalization_defect() });
    }
    Ok(table)
}

fn volume(common: &Common, proposal: Proposal) -> Outcome {
    let p = single_p(common)?;
    let n = common.n;
    let beta = Beta::from_value(common.beta)?;
    let dim = MatrixClassParams::self_adjoint(n, beta).dim();
    let method = common.method.clone().unwrap_or_else(|| {
        if p == 2.0 || p.is_infinite() { "exact" } else { "mc-lp" }.to_string()
    });
    let stream = RandomStream::new(common.seed, 0);
    let (log_volume, std_error, ess) = match method.as_str() {
        "exact" => {
            let v = if p == 2.0 {
                log_vol_euclidean(dim)?
            } else if p.is_infinite() {
                log_vol_inf_sa(n, beta)?
            } else {
                return Err(Failure::Usage(format!(
                    "exact volumes are unknown for p = {p}; closed forms exist only for p = 2 and p = inf \
                     (use --method mc-lp, mc-z or quadrature)"
                )));
            };
            (v, 0.0, None)
        }
        "mc-lp" => {
            let p = finite_p(common, "mc-lp")?;
            let params = EnsembleParams::new(n, p, beta.value())?;
            let est = log_vol_sa_via_lp_mc(&params, common.samples, &stream)?;
            (est.log_value, est.std_error_log, Some(est.effective_sample_size))
        }
        "mc-z" => {
            let p = finite_p(common, "mc-z")?;
            let params = EnsembleParams::new(n, p, beta.value())?;
            let est = log_z_importance_with(&params, common.samples, &stream, proposal)?;
            (
                log_vol_sa_via_z(&params, est.log_value)?,
                est.std_error_log,
                Some(est.effective_sample_size),
            )
        }
        "quadrature" => {
            let p = finite_p(common, "quadrature")?;
            let params = EnsembleParams::new(n, p, beta.value())?;
            (log_vol_sa_via_z(&params, log_z_quadrature(&params)?)?, 0.0, None)
        }
        other => {
            return Err(Failure::Usage(format!(
                "unknown volume method '{other}' (exact, mc-lp, mc-z, quadrature)"
            )))
        }
    };
    let mut table = Table::new(&[
        "n",
        "p",
        "beta",
        "dim",
        "method",
        "log_volume",
        "std_error",
        "effective_sample_size",
    ]);
    table.push(vec![
        n.into(),
        p_cell(p),
        beta.value().into(),
        dim.into(),
        method.into(),
        log_volume.into(),
        std_error.into(),
        ess.into(),
    ]);
    Ok(table)
}

fn p_cell(p: f64) -> Cell {
    if p.is_infinite() {
        "inf".into()
    } else {
        p.into()
    }
}

fn partition(common: &Common, proposal: Proposal) -> Outcome {
    let p = finite_p(common, "the partition function")?;
    let params = EnsembleParams::new(common.n, p, common.beta)?;
    let method = common.method.clone().unwrap_or_else(|| {
        if p == 2.0 { "exact" } else if common.n <= 3 { "quadrature" } else { "mc" }.to_string()
    });
    let stream = RandomStream::new(common.seed, 0);
    let (log_z, std_error, ess) = match method.as_str() {
        "exact" if p == 2.0 => (log_z_gaussian_exact(common.n, common.beta)?, 0.0, None),
        "exact" => {
            return Err(Failure::Usage(format!(
                "no closed form for the partition function at p = {p}; only p = 2 is exact"
            )))
        }
        "quadrature" => (log_z_quadrature(&params)?, 0.0, None),
        "mc" => {
            let est = log_z_importance_with(&params, common.samples, &stream, proposal)?;
            (est.log_value, est.std_error_log, Some(est.effective_sample_size))
        }
        other => {
            return Err(Failure::Usage(format!(
                "unknown partition method '{other}' (exact, quadrature, mc)"
            )))
        }
    };
    let mut table = Table::new(&[
        "n",
        "p",
        "beta",
        "method",
        "log_z",
        "std_error",
        "effective_sample_size",
    ]);
    table.push(vec![
        common.n.into(),
        p.into(),
        common.beta.into(),
        method.into(),
        log_z.into(),
        std_error.into(),
        ess.into(),
    ]);
    Ok(table)
}

fn equilibrium(common: &Common, tol: f64, max_iter: usize, newton: bool) -> Outcome {
    let p = finite_p(common, "the optimizer")?;
    let opts = MinimizeOptions::new(tol, max_iter).with_newton_polish(newton);
    let result = minimize_with(common.n, p, &opts)?;
    let dist = UllmanDistribution::new(p)?;
    let points = result.config.points();
    let kolmogorov = empirical_kolmogorov_distance(points, &dist)?;
    let nf = points.len() as f64;
    let mut table = Table::new(&["index", "x", "cdf_empirical", "cdf_ullman"]);
    for (i, &x) in points.iter().enumerate() {
        table.push(vec![
            (i + 1).into(),
            x.into(),
            ((i as f64 + 0.5) / nf).into(),
            dist.cdf(x).into(),
        ]);
    }
    table.verdicts = json!({
        "energy": result.energy,
        "gradient_inf_norm": result.gradient_inf_norm,
        "iterations": result.iterations,
        "converged": result.converged,
        "kolmogorov_distance": kolmogorov,
    });
    Ok(table)
}

struct ExpansionPlan {
    evaluate: Box<dyn Fn(usize) -> schatten_core::Result<ExpansionValue>>,
    reference: Option<Box<dyn Fn(usize) -> schatten_core::Result<f64>>>,
    first_omitted: Order,
}

fn expansion_plan(common: &Common, target: Target) -> Result<ExpansionPlan, Failure> {
    let p = finite_p(common, "expansions")?;
    let b = common.beta;
    let exact_p2 = p == 2.0;
    Ok(match target {
        Target::VolMain1 => {
            if p < 1.5 {
                return Err(Failure::Usage(format!(
                    "vol-main1 holds only for p >= 3/2, got p = {p}"
                )));
            }
            let beta = Beta::from_value(b)?;
            let constants = UllmanDistribution::new(p)?.constants()?;
            ExpansionPlan {
                evaluate: Box::new(move |n| expansion_logvol_main1(n, p, beta, &constants)),
                reference: exact_p2.then(|| -> Box<dyn Fn(usize) -> schatten_core::Result<f64>> {
                    Box::new(move |n| log_vol_euclidean(MatrixClassParams::self_adjoint(n, beta).dim()))
                }),
                first_omitted: Order::N,
            }
        }
        Target::VolMain2 => {
            if b != 2.0 {
                return Err(Failure::Usage("vol-main2 is the complex case; use --beta 2".into()));
            }
            ExpansionPlan {
                evaluate: Box::new(move |n| expansion_logvol_main2(n, p)),
                reference: exact_p2.then(|| -> Box<dyn Fn(usize) -> schatten_core::Result<f64>> {
                    Box::new(|n| log_vol_euclidean(MatrixClassParams::self_adjoint(n, Beta::Complex).dim()))
                }),
                first_omitted: Order::Const,
            }
        }
        Target::ZLs => {
            if p < 1.5 {
                return Err(Failure::Usage(format!("z-ls holds only for p >= 3/2, got p = {p}")));
            }
            let constants = UllmanDistribution::new(p)?.constants()?;
            ExpansionPlan {
                evaluate: Box::new(move |n| expansion_log_z_ls(n, p, b, &constants)),
                reference: exact_p2.then(|| -> Box<dyn Fn(usize) -> schatten_core::Result<f64>> {
                    Box::new(move |n| log_z_gaussian_exact(n, b))
                }),
                first_omitted: Order::N,
            }
        }
        Target::ZCkm => {
            if b != 2.0 {
                return Err(Failure::Usage("z-ckm is the complex case; use --beta 2".into()));
            }
            ExpansionPlan {
                evaluate: Box::new(move |n| expansion_log_z_ckm(n, p)),
                reference: exact_p2.then(|| -> Box<dyn Fn(usize) -> schatten_core::Result<f64>> {
                    Box::new(|n| log_z_gaussian_exact(n, 2.0))
                }),
                first_omitted: Order::Const,
            }
        }
        Target::Cn => {
            let beta = Beta::from_value(b)?;
            ExpansionPlan {
                evaluate: Box::new(move |n| expansion_log_cn(n, beta)),
                reference: Some(Box::new(move |n| log_c_n(n, beta.value()))),
                first_omitted: Order::Const,
            }
        }
    })
}

fn expansion(common: &Common, target: Target) -> Outcome {
    let grid = parse_grid(&common.grid)?;
    let plan = expansion_plan(common, target)?;
    let mut table = Table::new(&[
        "n",
        "term_n2logn",
        "term_n2",
        "term_nlogn",
        "term_n",
        "term_logn",
        "term_const",
        "partial_sum",
        "reference",
        "residual",
        "normalized",
        "difference",
    ]);
    let series = match &plan.reference {
        Some(reference) => {
            let exact = grid
                .iter()
                .map(|&n| Ok((n, reference(n)?)))
                .collect::<schatten_core::Result<BTreeMap<usize, f64>>>()?;
            Some(residual_series(&exact, &plan.evaluate, plan.first_omitted)?)
        }
        None => None,
    };
    for (k, &n) in grid.iter().enumerate() {
        let value = (plan.evaluate)(n)?;
        let mut row: Vec<Cell> = vec![n.into()];
        row.extend(Order::ALL.iter().map(|&o| Cell::from(value.terms.get(&o).copied())));
        row.push(value.partial_sum.into());
        match &series {
            Some(s) => {
                row.push(s.exact[k].into());
                row.push(s.residuals[k].into());
                row.push(s.normalized[k].into());
                row.push(if k > 0 && !s.differences.is_empty() {
                    s.differences[k - 1].into()
                } else {
                    Cell::Empty
                });
            }
            None => row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]),
        }
        table.push(row);
    }
    // Trailing row: the verdict label in the n column and the final value of
    // the tracked quantity under its own column.
    let mut verdict_row: Vec<Cell> = vec![Cell::Empty; 12];
    let tracked_col = if plan.first_omitted == Order::Const { 11 } else { 10 };
    match &series {
        Some(s) => {
            verdict_row[0] = if s.verdict.pass { "verdict:pass" } else { "verdict:fail" }.into();
            verdict_row[tracked_col] = s.verdict.final_value.into();
            table.verdicts = json!({
                "first_omitted_order": plan.first_omitted.label(),
                "tracked": if tracked_col == 11 { "difference" } else { "normalized" },
                "decreasing": s.verdict.decreasing,
                "final_value": s.verdict.final_value,
                "threshold": s.verdict.threshold,
                "pass": s.verdict.pass,
                "constant_estimate": s.constant.map(|c| c.estimate),
                "constant_spread": s.constant.map(|c| c.spread),
                "note": "thresholds are empirical calibrations; a finite grid cannot certify an o(.) rate",
            });
        }
        None => {
            verdict_row[0] = "verdict:unavailable".into();
            table.verdicts = json!({
                "first_omitted_order": plan.first_omitted.label(),
                "pass": null,
                "note": "no exact reference for this p; residuals are not computed",
            });
        }
    }
    table.push(verdict_row);
    Ok(table)
}

fn validate(common: &Common, level: LevelArg, fault: Option<FaultArg>) -> Outcome {
    let mut config = ValidationConfig::new(
        match level {
            LevelArg::Fast => Level::Fast,
            LevelArg::Full => Level::Full,
        },
        common.seed,
    );
    config.samples = common.samples;
    config.fault = fault.map(|FaultArg::TamperVp| Fault::TamperVp);
    let report = run_validation(&config);
    let mut table = Table::new(&["name", "pass", "measured", "reference", "tolerance", "detail"]);
    for r in &report.rows {
        table.push(vec![
            r.name.clone().into(),
            r.pass.into(),
            r.measured.into(),
            r.reference.into(),
            r.tolerance.into(),
            r.detail.clone().into(),
        ]);
    }
    table.verdicts = serde_json::to_value(&report.verdicts).expect("verdicts serialize");
    if report.verdicts.all_pass {
        Ok(table)
    } else {
        let msg = format!("failing checks: {}", report.verdicts.failed.join(", "));
        Err(Failure::Failed(msg, Some(table)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("50:200:50").unwrap(), vec![50, 100, 150, 200]);
        assert_eq!(parse_grid("5, 7,11").unwrap(), vec![5, 7, 11]);
        assert!(parse_grid("5,5").is_err());
        assert!(parse_grid("1:10:0").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn p_syntax() {
        assert_eq!(parse_p("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_p("2.5").unwrap(), 2.5);
        assert!(matches!(parse_p("0.5"), Err(Failure::Usage(_))));
        assert!(matches!(parse_p("x"), Err(Failure::Usage(_))));
        assert!(matches!(parse_p("nan"), Err(Failure::Usage(_))));
    }
}
