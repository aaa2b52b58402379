//! Partition functions of the β-ensemble with potential `V(x) = v_p |x|^p`,
//!
//! ```text
//! Z_{n,p,β} = ∫_{R^n} Π_{i<j} |x_i - x_j|^β  exp(-(β/2) n v_p Σ |x_i|^p) dx,
//! ```
//!
//! and the two ways of turning them into volumes of self-adjoint Schatten
//! balls: directly over the ℓ_p ball, or through `Z` and a Gamma factor.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{integrate_with_offsets, log_gamma, QuadratureSpec, RandomStream, Singularity};
use crate::ullman::{constant_v, open_unit, UllmanDistribution};
use crate::volumes::{dim_sa, log_c_n, log_vol_lp_ball, Beta};

/// Samples per Monte Carlo chunk. Each chunk owns one substream, and chunk
/// results are reduced in index order, so estimates do not depend on the
/// number of worker threads.
pub const MC_CHUNK: usize = 1 << 14;

/// Importance sampling refuses to report estimates below this effective
/// sample size.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

/// Beyond this many particles the Vandermonde weights are too heavy-tailed
/// for plain importance sampling to be trusted.
pub const ADVISORY_MAX_N: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub p: f64,
    pub beta: f64,
}

impl EnsembleParams {
    pub fn new(n: usize, p: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("ensemble size n must be at least 1"));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(domain(format!("ensemble exponent must be finite and >= 1, got {p}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(domain(format!("inverse temperature must be positive, got {beta}")));
        }
        Ok(EnsembleParams { n, p, beta })
    }

    /// Coefficient `a = (β/2) n v_p` of `Σ|x_i|^p` in the exponent.
    pub fn confinement(&self) -> Result<f64> {
        Ok(0.5 * self.beta * self.n as f64 * constant_v(self.p)?)
    }

    /// The matrix field, for volume-level operations.
    pub fn matrix_beta(&self) -> Result<Beta> {
        Beta::from_value(self.beta)
    }

    /// `ln ∫_R exp(-a |x|^p) dx = ln(2 Γ(1 + 1/p)) - (1/p) ln a`.
    pub fn log_single_normalizer(&self) -> Result<f64> {
        let a = self.confinement()?;
        Ok((2.0f64).ln() + log_gamma(1.0 + 1.0 / self.p)? - a.ln() / self.p)
    }
}

/// A Monte Carlo estimate of a logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub log_value: f64,
    /// Delta-method standard error of `log_value`; zero only when every
    /// weight is identical.
    pub std_error_log: f64,
    pub sample_count: u64,
    pub seed: u64,
    pub effective_sample_size: f64,
}

/// `ln Z_{n,2,β}` from Mehta's integral.
///
/// Substituting `x = y / sqrt(2βn)` turns `exp(-βn Σx²)` into `exp(-Σy²/2)`,
/// so
///
/// ```text
/// Z = (2βn)^(-n/2 - βn(n-1)/4) (2π)^(n/2) Π_{j=1}^n Γ(1 + jβ/2) / Γ(1 + β/2).
/// ```
pub fn log_z_gaussian_exact(n: usize, beta: f64) -> Result<f64> {
    EnsembleParams::new(n, 2.0, beta)?;
    let nf = n as f64;
    let mut s = -(beta * nf * (nf - 1.0) / 4.0 + nf / 2.0) * (2.0 * beta * nf).ln()
        + nf / 2.0 * (2.0 * PI).ln();
    let base = log_gamma(1.0 + beta / 2.0)?;
    for j in 1..=n {
        s += log_gamma(1.0 + j as f64 * beta / 2.0)? - base;
    }
    Ok(s)
}

/// Truncation radius beyond which the confinement factor is below `1e-14`
/// relative to the Vandermonde growth.
fn truncation_radius(params: &EnsembleParams) -> Result<f64> {
    const EPS: f64 = 1e-14;
    let nf = params.n as f64;
    let v = constant_v(params.p)?;
    let r = (2.0 * ((1.0 / EPS).ln() + nf * nf.ln()) / (params.beta * nf * v)).powf(1.0 / params.p);
    Ok(r.max(2.0))
}

/// Sum of integrals over `[lo, hi]` split at the interior breakpoints, each
/// piece using the `u²` substitution at its left end.
fn integrate_pieces<F>(mut f: F, lo: f64, hi: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut pts: Vec<f64> = std::iter::once(lo)
        .chain(breaks.iter().copied().filter(|&b| b > lo && b < hi))
        .chain(std::iter::once(hi))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        if w[1] > w[0] {
            total += integrate_with_offsets(|pt| f(pt.x), w[0], w[1], spec)?.value;
        }
    }
    Ok(total)
}

/// `ln Z_{n,p,β}` for `n ≤ 3` by nested adaptive quadrature over the ordered
/// region `x_1 < ... < x_n` (times `n!`), truncated at the radius where the
/// confinement factor drops below `1e-14`.
pub fn log_z_quadrature(params: &EnsembleParams) -> Result<f64> {
    let EnsembleParams { n, p, beta } = *params;
    if n > 3 {
        return Err(domain(format!("deterministic quadrature supports n <= 3, got {n}")));
    }
    let a = params.confinement()?;
    let r = truncation_radius(params)?;
    let weight = |x: f64| (-a * x.abs().powf(p)).exp();
    let level = |rel: f64| {
        QuadratureSpec::default()
            .with_tolerances(1e-300, rel)
            .with_singularity(Singularity::InverseSqrtLeft)
    };
    let plain = QuadratureSpec::default().with_tolerances(1e-300, 1e-9);
    let value = match n {
        1 => integrate_pieces(|x| Ok(weight(x)), -r, r, &[0.0], &plain)?,
        2 => {
            let inner = level(1e-11);
            let outer = plain;
            2.0 * integrate_pieces(
                |x| {
                    let wx = weight(x);
                    integrate_pieces(|y| Ok((y - x).powf(beta) * weight(y)), x, r, &[0.0], &inner)
                        .map(|v| v * wx)
                },
                -r,
                r,
                &[0.0],
                &outer,
            )?
        }
        3 => {
            let inner = level(1e-11);
            let middle = level(1e-10);
            let outer = plain;
            6.0 * integrate_pieces(
                |x| {
                    let wx = weight(x);
                    integrate_pieces(
                        |y| {
                            let wxy = (y - x).powf(beta) * weight(y);
                            integrate_pieces(
                                |z| Ok(((z - x) * (z - y)).powf(beta) * weight(z)),
                                y,
                                r,
                                &[0.0],
                                &inner,
                            )
                            .map(|v| v * wxy)
                        },
                        x,
                        r,
                        &[0.0],
                        &middle,
                    )
                    .map(|v| v * wx)
                },
                -r,
                r,
                &[0.0],
                &outer,
            )?
        }
        _ => unreachable!("n checked above"),
    };
    Ok(value.ln())
}

/// `β Σ_{i<j} ln|x_i - x_j|`.
pub fn log_vandermonde(xs: &[f64], beta: f64) -> f64 {
    let mut s = 0.0;
    for (i, &xi) in xs.iter().enumerate() {
        // Multiply short runs before taking the log; |x_i - x_j| stays far
        // from both ends of the f64 range for the n this is used with.
        let mut prod = 1.0;
        for (k, &xj) in xs[i + 1..].iter().enumerate() {
            prod *= (xi - xj).abs();
            if k % 8 == 7 {
                s += prod.ln();
                prod = 1.0;
            }
        }
        s += prod.ln();
    }
    beta * s
}

#[derive(Debug, Clone, Copy)]
struct WeightSums {
    max: f64,
    s1: f64,
    s2: f64,
    count: u64,
}

impl WeightSums {
    const EMPTY: WeightSums = WeightSums {
        max: f64::NEG_INFINITY,
        s1: 0.0,
        s2: 0.0,
        count: 0,
    };

    fn push(&mut self, w: f64) {
        if w > self.max {
            let r = (self.max - w).exp();
            self.s1 *= r;
            self.s2 *= r * r;
            self.max = w;
        }
        let e = (w - self.max).exp();
        self.s1 += e;
        self.s2 += e * e;
        self.count += 1;
    }

    fn merge(self, other: WeightSums) -> WeightSums {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let max = self.max.max(other.max);
        let ra = (self.max - max).exp();
        let rb = (other.max - max).exp();
        WeightSums {
            max,
            s1: self.s1 * ra + other.s1 * rb,
            s2: self.s2 * ra * ra + other.s2 * rb * rb,
            count: self.count + other.count,
        }
    }

    fn estimate(&self, offset: f64, seed: u64) -> Result<McEstimate> {
        let n = self.count as f64;
        let mean = self.s1 / n;
        let second = self.s2 / n;
        let var = (second - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        let est = McEstimate {
            log_value: offset + self.max + mean.ln(),
            std_error_log: var.sqrt() / (mean * n.sqrt()),
            sample_count: self.count,
            seed,
            effective_sample_size: self.s1 * self.s1 / self.s2,
        };
        if !est.log_value.is_finite() || est.effective_sample_size < MIN_EFFECTIVE_SAMPLES {
            return Err(Error::UnreliableEstimate(Box::new(est)));
        }
        Ok(est)
    }
}

/// Log-mean of `exp(log_weight)` over `samples` draws, chunked for
/// deterministic parallel reduction.
fn mc_log_mean<F>(samples: usize, dim: usize, stream: &RandomStream, log_weight: F) -> WeightSums
where
    F: Fn(&mut rand_chacha::ChaCha12Rng, &mut [f64]) -> f64 + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<WeightSums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut rng = stream.substream(c as u64).rng();
            let mut buf = vec![0.0; dim];
            let mut acc = WeightSums::EMPTY;
            for _ in 0..len {
                acc.push(log_weight(&mut rng, &mut buf));
            }
            acc
        })
        .collect();
    partial.into_iter().fold(WeightSums::EMPTY, WeightSums::merge)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(domain("Monte Carlo needs at least 2 samples"));
    }
    Ok(())
}

/// Proposal used by [`log_z_importance_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    /// Independent coordinates with density `∝ exp(-a |x|^p)`, matching the
    /// confinement term exactly so weights are pure Vandermonde factors.
    #[default]
    GeneralizedGaussian,
    /// Independent coordinates with density `∝ exp(-a' |x|^p)`, where
    /// `a' = a n / (n + βn(n-1)/2)` makes `E[Σ|x_i|^p]` agree with the
    /// ensemble. The Vandermonde factor pushes particles apart, so the
    /// unwidened proposal undersamples exactly where the weights are largest.
    Widened,
    /// Equal mixture of the generalized Gaussian with i.i.d. Ullman draws.
    /// The generalized Gaussian half keeps the tails outside `[-1, 1]`
    /// covered.
    UllmanMixture,
}

impl Proposal {
    pub fn label(self) -> &'static str {
        match self {
            Proposal::GeneralizedGaussian => "generalized-gaussian",
            Proposal::Widened => "widened",
            Proposal::UllmanMixture => "ullman-mixture",
        }
    }
}

impl std::str::FromStr for Proposal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Proposal::GeneralizedGaussian, Proposal::Widened, Proposal::UllmanMixture]
            .into_iter()
            .find(|q| q.label() == s)
            .ok_or_else(|| domain(format!("unknown proposal '{s}'")))
    }
}

/// `ln Z` by importance sampling with the default proposal.
pub fn log_z_importance(
    params: &EnsembleParams,
    samples: usize,
    stream: &RandomStream,
) -> Result<McEstimate> {
    log_z_importance_with(params, samples, stream, Proposal::GeneralizedGaussian)
}

pub fn log_z_importance_with(
    params: &EnsembleParams,
    samples: usize,
    stream: &RandomStream,
    proposal: Proposal,
) -> Result<McEstimate> {
    check_samples(samples)?;
    let EnsembleParams { n, p, beta } = *params;
    let a = params.confinement()?;
    let nf = n as f64;
    let a_q = match proposal {
        Proposal::Widened => a * nf / (nf + beta * nf * (nf - 1.0) / 2.0),
        _ => a,
    };
    let log_norm_q = 2f64.ln() + log_gamma(1.0 + 1.0 / p)? - a_q.ln() / p;
    let radial = Gamma::new(1.0 / p, 1.0).map_err(|e| domain(e.to_string()))?;
    let draw_gg = move |rng: &mut rand_chacha::ChaCha12Rng| {
        let r = (radial.sample(rng) / a_q).powf(1.0 / p);
        if rng.random::<bool>() {
            r
        } else {
            -r
        }
    };
    let sums = match proposal {
        Proposal::GeneralizedGaussian => mc_log_mean(samples, n, stream, |rng, xs| {
            for x in xs.iter_mut() {
                *x = draw_gg(rng);
            }
            log_vandermonde(xs, beta)
        }),
        Proposal::Widened => mc_log_mean(samples, n, stream, |rng, xs| {
            let mut s = 0.0;
            for x in xs.iter_mut() {
                *x = draw_gg(rng);
                s += x.abs().powf(p);
            }
            log_vandermonde(xs, beta) - (a - a_q) * s
        }),
        Proposal::UllmanMixture => {
            let ullman = UllmanDistribution::new(p)?;
            let gg_density = |x: f64| (-a * x.abs().powf(p) - log_norm_q).exp();
            mc_log_mean(samples, n, stream, |rng, xs| {
                let mut log_q = 0.0;
                let mut log_target = 0.0;
                for x in xs.iter_mut() {
                    *x = if rng.random::<bool>() {
                        draw_gg(rng)
                    } else {
                        ullman.quantile(open_unit(rng)).expect("u in (0, 1)")
                    };
                    log_q += (0.5 * gg_density(*x) + 0.5 * ullman.sampling_density(*x)).ln();
                    log_target -= a * x.abs().powf(p);
                }
                log_vandermonde(xs, beta) + log_target - log_q
            })
        }
    };
    let offset = match proposal {
        Proposal::GeneralizedGaussian | Proposal::Widened => nf * log_norm_q,
        Proposal::UllmanMixture => 0.0,
    };
    sums.estimate(offset, stream.seed)
}

/// One exactly uniform point of the unit ℓ_p ball in `R^n`.
///
/// With `Y_i` i.i.d. of density `∝ exp(-|y|^p)` and `W ~ Exp(1)` independent,
/// `Y / (Σ|Y_i|^p + W)^(1/p)` is uniform on the ball.
pub fn sample_lp_ball<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    let radial = Gamma::new(1.0 / p, 1.0).map_err(|e| domain(e.to_string()))?;
    fill_lp_ball(&mut out, p, &radial, rng);
    Ok(out)
}

fn fill_lp_ball<R: Rng + ?Sized>(xs: &mut [f64], p: f64, radial: &Gamma<f64>, rng: &mut R) {
    let mut total = 0.0;
    for x in xs.iter_mut() {
        let g: f64 = radial.sample(rng);
        total += g;
        let r = g.powf(1.0 / p);
        *x = if rng.random::<bool>() { r } else { -r };
    }
    let w: f64 = Exp1.sample(rng);
    let scale = (total + w).powf(-1.0 / p);
    for x in xs.iter_mut() {
        *x *= scale;
    }
}

fn check_volume_params(params: &EnsembleParams) -> Result<Beta> {
    params.matrix_beta()
}

/// `ln vol` of the self-adjoint Schatten ball as
/// `c_n ∫_{B_p^n} Π|x_i - x_j|^β dx`, the integral estimated with uniform
/// samples from the ℓ_p ball.
pub fn log_vol_sa_via_lp_mc(
    params: &EnsembleParams,
    samples: usize,
    stream: &RandomStream,
) -> Result<McEstimate> {
    check_volume_params(params)?;
    check_samples(samples)?;
    let EnsembleParams { n, p, beta } = *params;
    let offset = log_c_n(n, beta)? + log_vol_lp_ball(n, p)?;
    let radial = Gamma::new(1.0 / p, 1.0).map_err(|e| domain(e.to_string()))?;
    let sums = mc_log_mean(samples, n, stream, |rng, xs| {
        fill_lp_ball(xs, p, &radial, rng);
        log_vandermonde(xs, beta)
    });
    sums.estimate(offset, stream.seed)
}

/// `ln vol = ln c_n - ln Γ(1 + d_n/p) + (d_n/p) ln(nβ v_p / 2) + ln Z`.
pub fn log_vol_sa_via_z(params: &EnsembleParams, log_z: f64) -> Result<f64> {
    check_volume_params(params)?;
    let EnsembleParams { n, p, beta } = *params;
    let dp = dim_sa(n, beta) / p;
    let v = constant_v(p)?;
    Ok(log_c_n(n, beta)? - log_gamma(1.0 + dp)? + dp * (n as f64 * beta * v / 2.0).ln() + log_z)
}

/// `ln ∫_{[-1,1]^n} Π|x_i - x_j|^(2γ) dx` from uniform samples on the cube.
pub fn log_selberg_cube_mc(
    n: usize,
    gamma: f64,
    samples: usize,
    stream: &RandomStream,
) -> Result<McEstimate> {
    if n == 0 || !(gamma > 0.0) {
        return Err(domain("Selberg Monte Carlo needs n >= 1 and gamma > 0"));
    }
    check_samples(samples)?;
    let sums = mc_log_mean(samples, n, stream, |rng, xs| {
        for x in xs.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        log_vandermonde(xs, 2.0 * gamma)
    });
    sums.estimate(n as f64 * 2f64.ln(), stream.seed)
}
