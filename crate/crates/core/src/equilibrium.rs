//! Discrete log-gas: minimizing
//!
//! ```text
//! E(x) = -Σ_{i<j} ln|x_i - x_j| + (n/2) v_p Σ_i |x_i|^p
//! ```
//!
//! over ordered configurations. The minimizers (weighted Fekete points) have
//! empirical measures converging to the Ullman distribution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::ullman::{constant_v, UllmanDistribution};

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Relative energy change treated as rounding noise by the line search.
const FLAT: f64 = 1e-13;

/// Strictly increasing particle positions for exponent `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    points: Vec<f64>,
    p: f64,
}

impl ParticleConfig {
    pub fn new(points: Vec<f64>, p: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(domain("a particle configuration needs at least 2 points"));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(domain(format!("exponent must be finite and >= 1, got {p}")));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(domain("particle positions must be finite"));
        }
        if !is_strictly_increasing(&points) {
            return Err(domain("particle positions must be strictly increasing"));
        }
        Ok(ParticleConfig { points, p })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub config: ParticleConfig,
    pub energy: f64,
    pub gradient_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after each accepted step, starting with the initial point.
    /// Non-increasing up to rounding of `E`.
    #[serde(skip)]
    pub energy_history: Vec<f64>,
}

fn is_strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

/// `E` for raw positions with confinement coefficient `c = (n/2) v_p`;
/// `+inf` for unordered or coincident points.
fn energy_raw(xs: &[f64], p: f64, c: f64) -> f64 {
    if !is_strictly_increasing(xs) {
        return f64::INFINITY;
    }
    let mut e = 0.0;
    for (i, &xi) in xs.iter().enumerate() {
        for &xj in &xs[i + 1..] {
            e -= (xj - xi).ln();
        }
        e += c * xi.abs().powf(p);
    }
    e
}

fn gradient_raw(xs: &[f64], p: f64, c: f64, g: &mut [f64]) {
    g.fill(0.0);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let inv = 1.0 / (xs[i] - xs[j]);
            g[i] -= inv;
            g[j] += inv;
        }
        let x = xs[i];
        g[i] += c * p * x.abs().powf(p - 1.0) * x.signum();
    }
}

fn confinement_coefficient(n: usize, p: f64) -> Result<f64> {
    Ok(0.5 * n as f64 * constant_v(p)?)
}

/// Energy of a configuration.
pub fn energy(config: &ParticleConfig) -> Result<f64> {
    let c = confinement_coefficient(config.n(), config.p)?;
    Ok(energy_raw(&config.points, config.p, c))
}

/// `∂E/∂x_i = -Σ_{j≠i} 1/(x_i - x_j) + (n/2) v_p p |x_i|^(p-1) sign(x_i)`.
pub fn gradient(config: &ParticleConfig) -> Result<Vec<f64>> {
    if config.p <= 1.0 {
        return Err(domain("the gradient needs p > 1"));
    }
    let c = confinement_coefficient(config.n(), config.p)?;
    let mut g = vec![0.0; config.n()];
    gradient_raw(&config.points, config.p, c, &mut g);
    Ok(g)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Finish with damped Newton steps on the explicit Hessian.
    pub newton_polish: bool,
}

impl MinimizeOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        MinimizeOptions {
            tol,
            max_iter,
            newton_polish: false,
        }
    }

    pub fn with_newton_polish(mut self, on: bool) -> Self {
        self.newton_polish = on;
        self
    }
}

/// Gradient descent with Armijo backtracking from the Ullman quantiles at
/// `(i - 1/2)/n`.
pub fn minimize(n: usize, p: f64, tol: f64, max_iter: usize) -> Result<OptimizeResult> {
    minimize_with(n, p, &MinimizeOptions::new(tol, max_iter))
}

pub fn minimize_with(n: usize, p: f64, opts: &MinimizeOptions) -> Result<OptimizeResult> {
    if n < 2 {
        return Err(domain("minimization needs n >= 2"));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(domain(format!("minimization needs finite p > 1, got {p}")));
    }
    if !(opts.tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    let dist = UllmanDistribution::new(p)?;
    let mut x = (0..n)
        .map(|i| dist.quantile((i as f64 + 0.5) / n as f64))
        .collect::<Result<Vec<f64>>>()?;
    // Quantiles at mirrored levels agree up to rounding; make the start
    // exactly symmetric so the minimizer is too.
    for i in 0..n / 2 {
        let m = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -m;
        x[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }

    let c = confinement_coefficient(n, p)?;
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut e = energy_raw(&x, p, c);
    gradient_raw(&x, p, c, &mut g);
    let mut history = vec![e];
    let mut iterations = 0;
    let max_step = 1.0 / n as f64;
    let mut step = max_step;
    let gd_target = if opts.newton_polish {
        opts.tol.sqrt().max(opts.tol)
    } else {
        opts.tol
    };

    while inf_norm(&g) > gd_target && iterations < opts.max_iter {
        let dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let t0 = (2.0 * step).min(max_step);
        let Some((t, et)) = line_search(&x, e, &g, &dir, t0, p, c, &mut trial) else {
            break;
        };
        std::mem::swap(&mut x, &mut trial);
        e = et;
        step = t;
        iterations += 1;
        gradient_raw(&x, p, c, &mut g);
        history.push(e);
    }

    if opts.newton_polish {
        while inf_norm(&g) > opts.tol && iterations < opts.max_iter {
            let Some(dir) = newton_direction(&x, p, c, &g) else {
                break;
            };
            let Some((_, et)) = line_search(&x, e, &g, dir.as_slice(), 1.0, p, c, &mut trial) else {
                break;
            };
            std::mem::swap(&mut x, &mut trial);
            e = et;
            iterations += 1;
            gradient_raw(&x, p, c, &mut g);
            history.push(e);
        }
    }

    let gradient_inf_norm = inf_norm(&g);
    Ok(OptimizeResult {
        config: ParticleConfig { points: x, p },
        energy: e,
        gradient_inf_norm,
        iterations,
        converged: gradient_inf_norm <= opts.tol,
        energy_history: history,
    })
}

/// Backtracking along `dir` from step `t0`; the accepted point is left in
/// `trial`. Returns the step and the new energy.
#[allow(clippy::too_many_arguments)]
fn line_search(
    x: &[f64],
    e: f64,
    g: &[f64],
    dir: &[f64],
    t0: f64,
    p: f64,
    c: f64,
    trial: &mut [f64],
) -> Option<(f64, f64)> {
    let slope: f64 = dir.iter().zip(g).map(|(d, gi)| d * gi).sum();
    if !(slope < 0.0) {
        return None;
    }
    let g_norm = norm2(g);
    let mut gt = vec![0.0; x.len()];
    let mut t = t0;
    for _ in 0..MAX_BACKTRACKS {
        for ((y, xi), di) in trial.iter_mut().zip(x).zip(dir) {
            *y = xi + t * di;
        }
        let et = energy_raw(trial, p, c);
        // `et < e` guards against the Armijo margin rounding away.
        if et <= e + ARMIJO * t * slope && et < e {
            return Some((t, et));
        }
        // Close to the minimizer the predicted decrease is below the
        // rounding level of E; accept flat steps that shrink the gradient.
        if et.is_finite() && (et - e).abs() <= FLAT * e.abs().max(1.0) {
            gradient_raw(trial, p, c, &mut gt);
            if norm2(&gt) < g_norm {
                return Some((t, et));
            }
        }
        t *= BACKTRACK;
    }
    None
}

/// Hessian of `E`: diagonal `(n/2) v_p p (p-1) |x_i|^(p-2) + Σ_{j≠i} (x_i - x_j)^-2`,
/// off-diagonal `-(x_i - x_j)^-2`.
pub fn hessian(config: &ParticleConfig) -> Result<DMatrix<f64>> {
    let c = confinement_coefficient(config.n(), config.p)?;
    Ok(hessian_raw(&config.points, config.p, c))
}

fn hessian_raw(xs: &[f64], p: f64, c: f64) -> DMatrix<f64> {
    let n = xs.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = xs[i] - xs[j];
            let k = 1.0 / (d * d);
            h[(i, j)] = -k;
            h[(j, i)] = -k;
            h[(i, i)] += k;
            h[(j, j)] += k;
        }
        // |x|^(p-2) blows up at 0 for p < 2; the pairwise part keeps the
        // matrix positive definite, so cap the confinement curvature.
        let ax = xs[i].abs().max(1e-12);
        h[(i, i)] += c * p * (p - 1.0) * ax.powf(p - 2.0).min(1e12);
    }
    h
}

fn newton_direction(xs: &[f64], p: f64, c: f64, g: &[f64]) -> Option<DVector<f64>> {
    let h = hessian_raw(xs, p, c);
    let rhs = -DVector::from_column_slice(g);
    h.cholesky().map(|ch| ch.solve(&rhs))
}

/// `sup_x |F_emp(x) - F(x)|` for sorted `points`, evaluated at the jumps.
pub fn empirical_kolmogorov_distance(points: &[f64], dist: &UllmanDistribution) -> Result<f64> {
    if points.is_empty() {
        return Err(domain("empirical distribution needs at least one point"));
    }
    if !points.windows(2).all(|w| w[0] <= w[1]) {
        return Err(domain("points must be sorted"));
    }
    let n = points.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in points.iter().enumerate() {
        let f = dist.cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A2: f64 = 0.353_553_390_593_273_76; // 1/(2√2)

    fn pair(a: f64, t: f64) -> ParticleConfig {
        ParticleConfig::new(vec![-a + t, a + t], 2.0).unwrap()
    }

    #[test]
    fn pair_energy_closed_form() {
        for a in [0.1, A2, 0.7] {
            let e = energy(&pair(a, 0.0)).unwrap();
            let want = -(2.0 * a).ln() + 4.0 * a * a;
            assert!((e - want).abs() < 1e-14);
        }
        let g = gradient(&pair(A2, 0.0)).unwrap();
        assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10, "{g:?}");
    }

    #[test]
    fn translation_raises_energy() {
        let e0 = energy(&pair(0.3, 0.0)).unwrap();
        for t in [-0.2, 0.05, 1.0] {
            assert!(energy(&pair(0.3, t)).unwrap() > e0);
        }
    }

    #[test]
    fn reflection_symmetry() {
        let xs = vec![-0.9, -0.1, 0.2, 0.75];
        let ys: Vec<f64> = xs.iter().rev().map(|x| -x).collect();
        for p in [1.5, 2.0, 3.3] {
            let a = energy(&ParticleConfig::new(xs.clone(), p).unwrap()).unwrap();
            let b = energy(&ParticleConfig::new(ys.clone(), p).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(ParticleConfig::new(vec![0.0, 0.0], 2.0).is_err());
        assert!(ParticleConfig::new(vec![1.0, 0.0], 2.0).is_err());
        assert!(ParticleConfig::new(vec![0.0], 2.0).is_err());
        assert!(gradient(&ParticleConfig::new(vec![0.0, 1.0], 1.0).unwrap()).is_err());
        assert_eq!(energy_raw(&[0.0, 0.0], 2.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let cfg = ParticleConfig::new(vec![-0.8, -0.3, 0.1, 0.6, 0.9], 3.0).unwrap();
        let h = hessian(&cfg).unwrap();
        let hstep = 1e-6;
        for j in 0..cfg.n() {
            let mut up = cfg.points().to_vec();
            let mut dn = cfg.points().to_vec();
            up[j] += hstep;
            dn[j] -= hstep;
            let gu = gradient(&ParticleConfig::new(up, 3.0).unwrap()).unwrap();
            let gd = gradient(&ParticleConfig::new(dn, 3.0).unwrap()).unwrap();
            for i in 0..cfg.n() {
                let fd = (gu[i] - gd[i]) / (2.0 * hstep);
                assert!((fd - h[(i, j)]).abs() < 1e-5 * (1.0 + h[(i, j)].abs()));
            }
        }
    }

    #[test]
    fn two_particles() {
        let r = minimize(2, 2.0, 1e-10, 10_000).unwrap();
        assert!(r.converged);
        assert!((r.config.points()[0] + A2).abs() < 1e-8);
        assert!((r.config.points()[1] - A2).abs() < 1e-8);
    }

    #[test]
    fn three_particles_symmetric() {
        let r = minimize(3, 2.0, 1e-10, 10_000).unwrap();
        assert!(r.converged, "{}", r.gradient_inf_norm);
        let x = r.config.points();
        assert!(x[1].abs() < 1e-12);
        assert!((x[0] + x[2]).abs() < 1e-12);
    }

    #[test]
    fn energy_history_is_monotone() {
        let r = minimize(30, 3.0, 1e-8, 50_000).unwrap();
        assert!(r.converged);
        assert!(r
            .energy_history
            .windows(2)
            .all(|w| w[1] <= w[0] + FLAT * w[0].abs().max(1.0)));
    }

    #[test]
    fn newton_polish_agrees_with_descent() {
        let gd = minimize(20, 2.5, 1e-9, 100_000).unwrap();
        let nt = minimize_with(20, 2.5, &MinimizeOptions::new(1e-11, 1000).with_newton_polish(true))
            .unwrap();
        assert!(gd.converged && nt.converged);
        assert!(nt.iterations < gd.iterations);
        for (a, b) in gd.config.points().iter().zip(nt.config.points()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn semicircle_fifty() {
        let r = minimize(50, 2.0, 1e-8, 100_000).unwrap();
        assert!(r.converged);
        let dist = UllmanDistribution::new(2.0).unwrap();
        let d = empirical_kolmogorov_distance(r.config.points(), &dist).unwrap();
        assert!(d <= 0.05, "{d}");
    }

    #[test]
    fn kolmogorov_examples() {
        let dist = UllmanDistribution::new(2.0).unwrap();
        assert!((empirical_kolmogorov_distance(&[0.0], &dist).unwrap() - 0.5).abs() < 1e-12);
        let n = 40;
        let q: Vec<f64> = (0..n)
            .map(|i| dist.quantile((i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        let d = empirical_kolmogorov_distance(&q, &dist).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-9, "{d}");
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            gaps in proptest::collection::vec(0.05f64..0.6, 2..9),
            start in -1.5f64..0.0,
            p in prop_oneof![Just(1.5), Just(2.0), Just(3.0)],
        ) {
            let mut xs = vec![start];
            for gap in &gaps {
                xs.push(xs.last().unwrap() + gap);
            }
            let cfg = ParticleConfig::new(xs.clone(), p).unwrap();
            let g = gradient(&cfg).unwrap();
            let h = 1e-6;
            let scale = 1.0 + inf_norm(&g);
            for i in 0..xs.len() {
                let mut up = xs.clone();
                let mut dn = xs.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (energy(&ParticleConfig::new(up, p).unwrap()).unwrap()
                    - energy(&ParticleConfig::new(dn, p).unwrap()).unwrap())
                    / (2.0 * h);
                prop_assert!((g[i] - fd).abs() <= 1e-6 * scale, "i={} g={} fd={}", i, g[i], fd);
            }
        }
    }
}
