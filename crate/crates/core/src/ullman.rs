//! The Ullman distribution `μ_p`: the equilibrium measure of the potential
//! `v_p |x|^p` on the real line.
//!
//! Its density is
//!
//! ```text
//! f_p(x) = (p/π) ∫_{|x|}^1 t^(p-1) / sqrt(t² - x²) dt,    |x| ≤ 1,
//! ```
//!
//! which reduces to the semicircle law `(2/π) sqrt(1 - x²)` at `p = 2`. All
//! quantities here (CDF, moments, entropy, logarithmic energy) are computed by
//! singularity-aware quadrature; closed forms appear only in the tests.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::{integrate_with_offsets, log_gamma, QuadratureSpec, RandomStream, Singularity};

/// Number of Chebyshev cells on `[0, 1]` in the CDF table.
pub const CDF_CELLS: usize = 4096;

const SAMPLE_CHUNK: usize = 1 << 16;

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(domain(format!("Ullman exponent must be finite and >= 1, got {p}")));
    }
    Ok(())
}

fn density_spec() -> QuadratureSpec {
    QuadratureSpec::default()
        .with_tolerances(1e-14, 1e-12)
        .with_singularity(Singularity::InverseSqrtLeft)
}

/// `f_p(x)`, evaluated by quadrature with the `t = |x| + u²` substitution.
///
/// Returns `0` outside `[-1, 1]`, `p / (π (p - 1))` at the origin for `p > 1`
/// and `+inf` at the origin for `p = 1`, where the density has a logarithmic
/// pole.
pub fn density(p: f64, x: f64) -> Result<f64> {
    check_p(p)?;
    if !x.is_finite() {
        return Err(domain("density needs a finite abscissa"));
    }
    let x = x.abs();
    if x >= 1.0 {
        return Ok(0.0);
    }
    if x == 0.0 {
        return Ok(if p == 1.0 {
            f64::INFINITY
        } else {
            p / (PI * (p - 1.0))
        });
    }
    let r = integrate_with_offsets(
        |pt| Ok(pt.x.powf(p - 1.0) / (pt.from_a * (pt.x + x)).sqrt()),
        x,
        1.0,
        &density_spec(),
    )?;
    Ok(p / PI * r.value)
}

/// `f_p(x)` through the angular representation
/// `(p/π) |x|^(p-1) ∫_0^{arccos|x|} cos(α)^(-p) dα`.
///
/// Shares no code path with [`density`] beyond the quadrature engine, so the
/// two serve as mutual checks.
pub fn density_arccos_form(p: f64, x: f64) -> Result<f64> {
    check_p(p)?;
    let ax = x.abs();
    if !(ax > 0.0 && ax < 1.0) {
        return Err(domain(format!("arccos form needs 0 < |x| < 1, got {x}")));
    }
    let spec = QuadratureSpec::default().with_tolerances(1e-14, 1e-12);
    let r = integrate_with_offsets(|pt| Ok(pt.x.cos().powf(-p)), 0.0, ax.acos(), &spec)?;
    Ok(p / PI * ax.powf(p - 1.0) * r.value)
}

/// `f_p'(x) = ((p-1)/x) f_p(x) - (p/π) / (x sqrt(1 - x²))` for `x > 0`,
/// extended as an odd function. At `x = 0` only `p >= 2` is accepted (the
/// derivative vanishes there).
pub fn density_derivative(p: f64, x: f64) -> Result<f64> {
    check_p(p)?;
    if p <= 1.0 {
        return Err(domain("density_derivative needs p > 1"));
    }
    if !x.is_finite() || x.abs() >= 1.0 {
        return Err(domain(format!("density_derivative needs |x| < 1, got {x}")));
    }
    if x == 0.0 {
        return if p >= 2.0 {
            Ok(0.0)
        } else {
            Err(domain("f_p is not differentiable at 0 for p < 2"))
        };
    }
    let ax = x.abs();
    let d = (p - 1.0) / ax * density(p, ax)? - p / PI / (ax * (1.0 - ax * ax).sqrt());
    Ok(if x < 0.0 { -d } else { d })
}

/// `v_p = sqrt(π) Γ(p/2) / Γ((p+1)/2)`, the potential scale placing the
/// equilibrium support on `[-1, 1]`.
pub fn constant_v(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok((0.5 * PI.ln() + log_gamma(0.5 * p)? - log_gamma(0.5 * (p + 1.0))?).exp())
}

/// `α_p = ∫ |x|^p dμ_p = 1 / (p v_p)`.
pub fn constant_alpha(p: f64) -> Result<f64> {
    Ok(1.0 / (p * constant_v(p)?))
}

/// `A(p) = (1/2) (p v_p / sqrt(e))^(1/p)`, with `A(∞) = 1/2`.
pub fn constant_a(p: f64) -> Result<f64> {
    if p == f64::INFINITY {
        return Ok(0.5);
    }
    Ok(log_constant_a(p)?.exp())
}

/// `ln A(p)`.
pub fn log_constant_a(p: f64) -> Result<f64> {
    if p == f64::INFINITY {
        return Ok(-(2f64.ln()));
    }
    check_p(p)?;
    let ln_v = 0.5 * PI.ln() + log_gamma(0.5 * p)? - log_gamma(0.5 * (p + 1.0))?;
    Ok(-(2f64.ln()) + (p.ln() + ln_v - 0.5) / p)
}

/// `2 ∫_0^1 g(x, f_p(x)) dx`, with the substitution at both ends to absorb
/// the `sqrt(1 - x)` edge and the cusp at 0 for `p < 2`.
fn symmetric_integral<G>(p: f64, spec: &QuadratureSpec, mut g: G) -> Result<f64>
where
    G: FnMut(f64, f64) -> f64,
{
    let r = integrate_with_offsets(
        |pt| {
            let f = density(p, pt.x)?;
            Ok(g(pt.x, f))
        },
        0.0,
        1.0,
        &spec.with_singularity(Singularity::Both),
    )?;
    Ok(2.0 * r.value)
}

fn outer_spec() -> QuadratureSpec {
    QuadratureSpec::default().with_tolerances(1e-13, 1e-11)
}

/// `∫ f_p`, which should be 1.
pub fn total_mass(p: f64) -> Result<f64> {
    check_p(p)?;
    symmetric_integral(p, &outer_spec(), |_, f| f)
}

/// `∫ |x|^p f_p(x) dx` by quadrature, the independent route to `α_p`.
pub fn moment_by_quadrature(p: f64) -> Result<f64> {
    check_p(p)?;
    symmetric_integral(p, &outer_spec(), |x, f| x.powf(p) * f)
}

/// The constants attached to `μ_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UllmanConstants {
    pub p: f64,
    pub v_p: f64,
    /// `1 / (p v_p)`.
    pub alpha_p: f64,
    /// `∫ |x|^p dμ_p` by quadrature.
    pub alpha_p_quadrature: f64,
    pub a_p: f64,
    pub entropy: f64,
    pub log_energy: f64,
    /// `log_energy + v_p α_p`, the minimal value of the energy functional.
    pub i_p: f64,
}

/// Diagnostics for the edge behaviour `f_p ≍ sqrt(1 - |x|)` and the
/// regularity at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub p: f64,
    pub boundary_ratio_min: f64,
    pub boundary_ratio_max: f64,
    /// Slope of `ln |f_p(h) - f_p(0)|` against `ln h` on `h ∈ [1e-6, 1e-2]`;
    /// NaN for `p = 1` where `f_p(0)` is infinite.
    pub holder_exponent_at_0: f64,
}

/// `f_p(x) / sqrt(1 - |x|)` on a geometric grid of `1 - |x| ∈ [1e-8, 0.5]`
/// plus a log-log fit of the local Hölder exponent at 0.
pub fn regularity_report(p: f64) -> Result<RegularityReport> {
    check_p(p)?;
    const EDGE_POINTS: usize = 64;
    let (lo, hi) = (1e-8f64.ln(), 0.5f64.ln());
    let mut rmin = f64::INFINITY;
    let mut rmax = 0.0f64;
    for k in 0..EDGE_POINTS {
        let gap = (lo + (hi - lo) * k as f64 / (EDGE_POINTS - 1) as f64).exp();
        let ratio = density(p, 1.0 - gap)? / gap.sqrt();
        rmin = rmin.min(ratio);
        rmax = rmax.max(ratio);
    }

    let holder = if p == 1.0 {
        f64::NAN
    } else {
        const HOLDER_POINTS: usize = 25;
        let f0 = density(p, 0.0)?;
        let (lo, hi) = (1e-6f64.ln(), 1e-2f64.ln());
        let mut xs = Vec::with_capacity(HOLDER_POINTS);
        let mut ys = Vec::with_capacity(HOLDER_POINTS);
        for k in 0..HOLDER_POINTS {
            let lh = lo + (hi - lo) * k as f64 / (HOLDER_POINTS - 1) as f64;
            let diff = (density(p, lh.exp())? - f0).abs();
            xs.push(lh);
            ys.push(diff.ln());
        }
        least_squares_slope(&xs, &ys)
    };
    Ok(RegularityReport {
        p,
        boundary_ratio_min: rmin,
        boundary_ratio_max: rmax,
        holder_exponent_at_0: holder,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `∫_0^x f_p` for `x ∈ [0, 1]`, via Fubini:
/// `x^p / 2 + (p/π) ∫_x^1 t^(p-1) arcsin(x/t) dt`.
fn half_cdf_direct(p: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(0.5);
    }
    let r = integrate_with_offsets(
        // arcsin(x/t) = atan2(x, sqrt((t - x)(t + x))), exact near t = x
        |pt| Ok(pt.x.powf(p - 1.0) * x.atan2((pt.from_a * (pt.x + x)).sqrt())),
        x,
        1.0,
        &density_spec(),
    )?;
    Ok(0.5 * x.powf(p) + p / PI * r.value)
}

/// `μ_p` with a precomputed CDF table for fast evaluation and sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UllmanDistribution {
    p: f64,
    /// Chebyshev nodes on `[0, 1]`, increasing.
    nodes: Vec<f64>,
    /// `F(node) - 1/2`.
    half_cdf: Vec<f64>,
    /// Per-cell Hermite slopes after monotonicity limiting.
    slopes: Vec<(f64, f64)>,
    normalization_defect: f64,
}

impl UllmanDistribution {
    pub fn new(p: f64) -> Result<Self> {
        check_p(p)?;
        let n = CDF_CELLS;
        let nodes: Vec<f64> = (0..=n)
            .map(|k| 0.5 * (1.0 - (PI * k as f64 / n as f64).cos()))
            .collect();
        let half_cdf = nodes
            .iter()
            .map(|&x| half_cdf_direct(p, x))
            .collect::<Result<Vec<_>>>()?;
        let dens = nodes
            .iter()
            .map(|&x| density(p, x))
            .collect::<Result<Vec<_>>>()?;
        let slopes = (0..n)
            .map(|k| {
                let h = nodes[k + 1] - nodes[k];
                let secant = (half_cdf[k + 1] - half_cdf[k]) / h;
                limit_slopes(dens[k], dens[k + 1], secant)
            })
            .collect();
        let normalization_defect = (total_mass(p)? - 1.0).abs();
        Ok(UllmanDistribution {
            p,
            nodes,
            half_cdf,
            slopes,
            normalization_defect,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `|∫ f_p - 1|` as measured during construction.
    pub fn normalization_defect(&self) -> f64 {
        self.normalization_defect
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        density(self.p, x)
    }

    /// The `(x, F(x))` table on `[-1, 1]`, mirrored from the half table.
    pub fn cdf_grid(&self) -> Vec<(f64, f64)> {
        let neg = self
            .nodes
            .iter()
            .zip(&self.half_cdf)
            .rev()
            .map(|(&x, &g)| (-x, 0.5 - g));
        let pos = self
            .nodes
            .iter()
            .zip(&self.half_cdf)
            .skip(1)
            .map(|(&x, &g)| (x, 0.5 + g));
        neg.chain(pos).collect()
    }

    fn cell_of(&self, x: f64) -> usize {
        // nodes[k] <= x < nodes[k+1]
        match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => k.min(CDF_CELLS - 1),
            Err(k) => k.saturating_sub(1).min(CDF_CELLS - 1),
        }
    }

    /// `G(x) = F(x) - 1/2` and `G'(x)` for `x ∈ [0, 1]`.
    fn half_eval(&self, x: f64) -> (f64, f64) {
        let k = self.cell_of(x);
        if k == 0 {
            // The first cell is below 2e-7; evaluate it directly so the
            // logarithmic pole at p = 1 costs nothing in accuracy.
            let g = half_cdf_direct(self.p, x).unwrap_or(0.0);
            let d = density(self.p, x).unwrap_or(0.0);
            return (g, d);
        }
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (d0, d1) = self.slopes[k];
        let (g0, g1) = (self.half_cdf[k], self.half_cdf[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let g = (2.0 * t3 - 3.0 * t2 + 1.0) * g0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * g1
            + (t3 - t2) * h * d1;
        let dg = ((6.0 * t2 - 6.0 * t) * g0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
            + (-6.0 * t2 + 6.0 * t) * g1
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        (g, dg)
    }

    /// `F(x) = μ_p((-∞, x])`, clamped to `[0, 1]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let (g, _) = self.half_eval(x.abs());
        (0.5 + g.copysign(x)).clamp(0.0, 1.0)
    }

    /// Density of the distribution actually produced by [`Self::sample`],
    /// i.e. the derivative of the interpolated CDF.
    pub fn sampling_density(&self, x: f64) -> f64 {
        if !(x.abs() < 1.0) {
            return 0.0;
        }
        self.half_eval(x.abs()).1
    }

    /// Inverse of [`Self::cdf`] on `(0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(domain(format!("quantile needs u in (0, 1), got {u}")));
        }
        let target = (u - 0.5).abs();
        if target == 0.0 {
            return Ok(0.0);
        }
        let x = self.invert_half(target);
        Ok(if u < 0.5 { -x } else { x })
    }

    fn invert_half(&self, target: f64) -> f64 {
        // Cell by bisection on the table, then safeguarded Newton inside it.
        let k = match self.half_cdf.binary_search_by(|v| v.total_cmp(&target)) {
            Ok(k) => return self.nodes[k],
            Err(k) => k.saturating_sub(1).min(CDF_CELLS - 1),
        };
        let (mut lo, mut hi) = (self.nodes[k], self.nodes[k + 1]);
        let mut x = lo
            + (hi - lo) * (target - self.half_cdf[k]) / (self.half_cdf[k + 1] - self.half_cdf[k]);
        for _ in 0..100 {
            let (g, dg) = self.half_eval(x);
            let r = g - target;
            if r == 0.0 {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - r / dg;
            let next = if dg > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) || hi - lo <= f64::EPSILON * hi {
                x = next;
                break;
            }
            x = next;
        }
        x
    }

    /// `count` independent draws by inversion, deterministic for a given
    /// stream regardless of thread count.
    pub fn sample(&self, count: usize, stream: &RandomStream) -> Vec<f64> {
        let chunks = count.div_ceil(SAMPLE_CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = SAMPLE_CHUNK.min(count - c * SAMPLE_CHUNK);
                let mut rng = stream.substream(c as u64).rng();
                (0..len)
                    .map(|_| {
                        let u = open_unit(&mut rng);
                        self.quantile(u).expect("u in (0, 1)")
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
            .concat()
    }

    /// Differential entropy `-∫ f_p ln f_p`.
    pub fn entropy(&self) -> Result<f64> {
        let p = self.p;
        let spec = QuadratureSpec::default().with_tolerances(1e-12, 1e-10);
        symmetric_integral(p, &spec, |_, f| if f > 0.0 { -f * f.ln() } else { 0.0 })
    }

    /// Logarithmic energy `-∬ ln|x - y| dμ_p(x) dμ_p(y)` by iterated
    /// quadrature. The inner integral is split at `y = x` so the logarithmic
    /// singularity sits at a substituted endpoint on both sides.
    pub fn log_energy(&self) -> Result<f64> {
        let p = self.p;
        let inner_spec = QuadratureSpec::default()
            .with_tolerances(1e-11, 1e-10)
            .with_singularity(Singularity::Both);
        let outer_spec = QuadratureSpec::default().with_tolerances(1e-9, 1e-8);
        let potential = |x: f64| -> Result<f64> {
            let left = integrate_with_offsets(
                |pt| Ok(pt.from_b.ln() * density(p, pt.x)?),
                -1.0,
                x,
                &inner_spec,
            )?;
            let right = integrate_with_offsets(
                |pt| Ok(pt.from_a.ln() * density(p, pt.x)?),
                x,
                1.0,
                &inner_spec,
            )?;
            Ok(left.value + right.value)
        };
        let r = integrate_with_offsets(
            |pt| Ok(density(p, pt.x)? * potential(pt.x)?),
            0.0,
            1.0,
            &outer_spec.with_singularity(Singularity::Both),
        )?;
        Ok(-2.0 * r.value)
    }

    pub fn constants(&self) -> Result<UllmanConstants> {
        let p = self.p;
        let v_p = constant_v(p)?;
        let alpha_p = 1.0 / (p * v_p);
        let log_energy = self.log_energy()?;
        Ok(UllmanConstants {
            p,
            v_p,
            alpha_p,
            alpha_p_quadrature: moment_by_quadrature(p)?,
            a_p: constant_a(p)?,
            entropy: self.entropy()?,
            log_energy,
            i_p: log_energy + v_p * alpha_p,
        })
    }
}

pub(crate) fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Fritsch-Carlson limiting of Hermite slopes so each cell stays monotone.
fn limit_slopes(d0: f64, d1: f64, secant: f64) -> (f64, f64) {
    if secant <= 0.0 {
        return (0.0, 0.0);
    }
    let a = if d0.is_finite() { d0 / secant } else { 3.0 };
    let b = if d1.is_finite() { d1 / secant } else { 3.0 };
    let r2 = a * a + b * b;
    if r2 > 9.0 {
        let tau = 3.0 / r2.sqrt();
        (tau * a * secant, tau * b * secant)
    } else {
        (a * secant, b * secant)
    }
}

/// `I_p(μ_p) = ln 2 + 3/(2p)`, the limit of `(2/(β n²)) ln Z`.
pub fn energy_minimum_reference(p: f64) -> f64 {
    2f64.ln() + 1.5 / p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn semicircle(x: f64) -> f64 {
        2.0 / PI * (1.0 - x * x).max(0.0).sqrt()
    }

    fn semicircle_cdf(x: f64) -> f64 {
        0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / PI
    }

    #[test]
    fn density_examples() {
        assert!((density(2.0, 0.0).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(density(3.0, 1.0).unwrap(), 0.0);
        assert_eq!(density(3.0, -1.5).unwrap(), 0.0);
        assert!((density(2.0, 0.5).unwrap() - semicircle(0.5)).abs() < 1e-12);
        assert_eq!(density(1.0, 0.0).unwrap(), f64::INFINITY);
        assert!(density(0.5, 0.1).is_err());
        assert!(density(2.0, f64::NAN).is_err());
    }

    #[test]
    fn density_is_even_exactly() {
        for x in [0.1, 0.37, 0.9, 0.999] {
            assert_eq!(density(3.3, x).unwrap(), density(3.3, -x).unwrap());
        }
    }

    #[test]
    fn semicircle_on_fine_grid() {
        let mut worst = 0.0f64;
        for k in 0..=1000 {
            let x = -1.0 + 2.0 * k as f64 / 1000.0;
            worst = worst.max((density(2.0, x).unwrap() - semicircle(x)).abs());
        }
        assert!(worst <= 1e-9, "worst = {worst:e}");
    }

    #[test]
    fn p_equal_one_has_closed_form() {
        // f_1(x) = acosh(1/|x|) / π
        for x in [1e-6, 0.01, 0.3, 0.8, 0.999] {
            let want = (1.0f64 / x).acosh() / PI;
            assert!((density(1.0, x).unwrap() - want).abs() < 1e-11);
        }
    }

    #[test]
    fn arccos_form_agrees() {
        assert!((density_arccos_form(2.0, 0.5).unwrap() - semicircle(0.5)).abs() < 1e-12);
        assert_eq!(
            density_arccos_form(2.0, -0.5).unwrap(),
            density_arccos_form(2.0, 0.5).unwrap()
        );
        for p in [1.5, 3.0, 4.5, 8.0] {
            for x in [1e-3, 0.2, 0.5, 0.9, 0.9999] {
                let a = density_arccos_form(p, x).unwrap();
                let b = density(p, x).unwrap();
                assert!((a - b).abs() <= 1e-8, "p={p} x={x}: {a} vs {b}");
            }
        }
        assert!(density_arccos_form(2.0, 0.0).is_err());
        assert!(density_arccos_form(2.0, 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let want = -(2.0 / PI) * 0.5 / 0.75f64.sqrt();
        assert!((density_derivative(2.0, 0.5).unwrap() - want).abs() < 1e-10);
        assert!((density_derivative(2.0, -0.5).unwrap() + want).abs() < 1e-10);
        assert_eq!(density_derivative(3.0, 0.0).unwrap(), 0.0);
        assert!(density_derivative(1.5, 0.0).is_err());
        assert!(density_derivative(2.0, 1.0).is_err());
        assert!(density_derivative(1.0, 0.5).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for p in [1.5, 2.0, 3.0] {
            for _ in 0..20 {
                let mut x: f64 = rng.random_range(0.02..0.97);
                if rng.random::<bool>() {
                    x = -x;
                }
                let fd = (density(p, x + h).unwrap() - density(p, x - h).unwrap()) / (2.0 * h);
                let d = density_derivative(p, x).unwrap();
                assert!((d - fd).abs() <= 1e-4 * d.abs(), "p={p} x={x}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn normalization() {
        for p in [1.0, 1.5, 2.0, 3.0, 4.5, 8.0] {
            let m = total_mass(p).unwrap();
            assert!((m - 1.0).abs() <= 1e-9, "p={p}: mass {m}");
        }
    }

    #[test]
    fn closed_form_constants() {
        assert!((constant_v(2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((constant_alpha(2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((constant_a(2.0).unwrap() - (-0.25f64).exp()).abs() < 1e-14);
        assert_eq!(constant_a(f64::INFINITY).unwrap(), 0.5);
        assert!(constant_v(0.9).is_err());
        // v_1 = sqrt(π) Γ(1/2) / Γ(1) = π
        assert!((constant_v(1.0).unwrap() - PI).abs() < 1e-14);
    }

    #[test]
    fn a_is_decreasing() {
        let ps = [1.0, 1.5, 2.0, 3.0, 6.0, 12.0, f64::INFINITY];
        let vals: Vec<f64> = ps.iter().map(|&p| constant_a(p).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0], "{vals:?}");
        }
    }

    #[test]
    fn moment_identity() {
        for p in [1.0, 1.5, 2.0, 3.0, 4.5] {
            let q = moment_by_quadrature(p).unwrap();
            let a = constant_alpha(p).unwrap();
            assert!((q - a).abs() <= 1e-8, "p={p}: {q} vs {a}");
        }
    }

    #[test]
    fn cdf_examples_and_grid() {
        let d = UllmanDistribution::new(2.0).unwrap();
        assert_eq!(d.cdf(-1.0), 0.0);
        assert_eq!(d.cdf(-3.0), 0.0);
        assert_eq!(d.cdf(1.0), 1.0);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-15);
        let mut worst = 0.0f64;
        for k in 1..2000 {
            let x = -1.0 + k as f64 / 1000.0;
            worst = worst.max((d.cdf(x) - semicircle_cdf(x)).abs());
        }
        assert!(worst <= 1e-8, "worst cdf error {worst:e}");
        let grid = d.cdf_grid();
        assert_eq!(grid.len(), 2 * CDF_CELLS + 1);
        assert_eq!(grid[0], (-1.0, 0.0));
        assert_eq!(*grid.last().unwrap(), (1.0, 1.0));
        assert!(grid.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        assert!(d.normalization_defect() <= 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1.0, 1.5, 2.0, 4.5] {
            let d = UllmanDistribution::new(p).unwrap();
            assert_eq!(d.quantile(0.5).unwrap(), 0.0);
            for u in [1e-9, 1e-4, 0.01, 0.2, 0.4999, 0.5001, 0.75, 0.99, 1.0 - 1e-9] {
                let x = d.quantile(u).unwrap();
                assert!((d.cdf(x) - u).abs() <= 1e-8, "p={p} u={u}");
            }
            assert!(d.quantile(0.0).is_err());
            assert!(d.quantile(1.0).is_err());
        }
    }

    #[test]
    fn entropy_of_semicircle() {
        let d = UllmanDistribution::new(2.0).unwrap();
        let e = d.entropy().unwrap();
        assert!((e - (PI.ln() - 0.5)).abs() <= 1e-6, "{e}");
        assert!((e - 0.644_729).abs() < 1e-6);
    }

    #[test]
    fn log_energy_semicircle() {
        let d = UllmanDistribution::new(2.0).unwrap();
        let e = d.log_energy().unwrap();
        assert!((e - (2f64.ln() + 0.25)).abs() <= 1e-5, "{e}");
    }

    #[test]
    fn regularity_semicircle() {
        // f_2(x)/sqrt(1-x) = (2/π) sqrt(1+x) ∈ [(2/π) sqrt(1.5), (2/π) sqrt(2)]
        let r = regularity_report(2.0).unwrap();
        let lo = 2.0 / PI * 1.5f64.sqrt();
        let hi = 2.0 / PI * 2f64.sqrt();
        assert!((r.boundary_ratio_min - lo).abs() < 1e-6);
        assert!((r.boundary_ratio_max - hi).abs() < 1e-6);
        assert!((r.holder_exponent_at_0 - 2.0).abs() < 0.05);
    }

    #[test]
    fn regularity_holder_below_two() {
        let r = regularity_report(1.5).unwrap();
        assert!((r.holder_exponent_at_0 - 0.5).abs() <= 0.05, "{r:?}");
        let r = regularity_report(3.0).unwrap();
        assert!(r.boundary_ratio_max / r.boundary_ratio_min <= 10.0);
        assert!(regularity_report(1.0).unwrap().holder_exponent_at_0.is_nan());
    }
}
