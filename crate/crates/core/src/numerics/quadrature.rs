#![allow(clippy::excessive_precision)]
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

// 15-point Kronrod extension of the 7-point Gauss-Legendre rule. Abscissae in
// decreasing order; the odd entries are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_PANELS: usize = 1 << 17;

/// Which endpoints carry an `(x - a)^(-1/2)` or `(b - x)^(-1/2)` type
/// singularity.
///
/// A singular endpoint is removed by the substitution `x = a + u²` (resp.
/// `x = b - u²`). The same map also smooths `sqrt`-type behaviour, so it is the
/// right choice for densities vanishing like `sqrt(1 - |x|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Singularity {
    #[default]
    None,
    InverseSqrtLeft,
    InverseSqrtRight,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of bisections applied to any single panel.
    pub max_depth: u32,
    pub endpoint_singularity: Singularity,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_depth: 40,
            endpoint_singularity: Singularity::None,
        }
    }
}

impl QuadratureSpec {
    pub fn with_singularity(mut self, s: Singularity) -> Self {
        self.endpoint_singularity = s;
        self
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(domain("quadrature tolerances must be strictly positive"));
        }
        if self.max_depth < 1 {
            return Err(domain("quadrature max_depth must be at least 1"));
        }
        Ok(())
    }
}

/// An evaluation point together with its exact distances to both interval
/// endpoints.
///
/// Near a substituted endpoint `x - a` cannot be recovered from `x` without
/// cancellation; integrands with `sqrt(x - a)` factors should use `from_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abscissa {
    pub x: f64,
    pub from_a: f64,
    pub from_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_bound: f64,
    pub evaluations: usize,
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    adaptive(|p: Abscissa| Ok(f(p.x)), a, b, spec).map(|r| r.value)
}

/// Like [`integrate`], but the integrand sees endpoint distances and may fail.
/// Errors from the integrand abort the integration and are returned as-is.
pub fn integrate_with_offsets<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(Abscissa) -> Result<f64>,
{
    adaptive(f, a, b, spec)
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Plain,
    /// x = a + u², u in [0, sqrt(b - a)]
    Left { a: f64, b: f64 },
    /// x = b - u², u in [0, sqrt(b - a)]
    Right { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    seg: usize,
    depth: u32,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

struct Mapped<'s, F> {
    f: F,
    a: f64,
    b: f64,
    segments: &'s [Segment],
    evaluations: usize,
}

impl<F> Mapped<'_, F>
where
    F: FnMut(Abscissa) -> Result<f64>,
{
    fn eval(&mut self, seg: usize, u: f64) -> Result<f64> {
        self.evaluations += 1;
        let v = match self.segments[seg] {
            Segment::Plain => (self.f)(Abscissa {
                x: u,
                from_a: u - self.a,
                from_b: self.b - u,
            })?,
            Segment::Left { a, b } => {
                let d = u * u;
                let p = Abscissa {
                    x: a + d,
                    from_a: (a - self.a) + d,
                    from_b: ((b - a) - d).max(0.0) + (self.b - b),
                };
                2.0 * u * (self.f)(p)?
            }
            Segment::Right { a, b } => {
                let d = u * u;
                let p = Abscissa {
                    x: b - d,
                    from_a: ((b - a) - d).max(0.0) + (a - self.a),
                    from_b: (self.b - b) + d,
                };
                2.0 * u * (self.f)(p)?
            }
        };
        Ok(v)
    }

    fn kronrod(&mut self, seg: usize, lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let fc = self.eval(seg, center)?;
        let mut res_k = WGK[7] * fc;
        let mut res_g = WG[3] * fc;
        let mut res_abs = res_k.abs();
        let mut fv1 = [0.0; 7];
        let mut fv2 = [0.0; 7];
        for j in 0..7 {
            let dx = half * XGK[j];
            let f1 = self.eval(seg, center - dx)?;
            let f2 = self.eval(seg, center + dx)?;
            fv1[j] = f1;
            fv2[j] = f2;
            res_k += WGK[j] * (f1 + f2);
            res_abs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                res_g += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * res_k;
        let mut res_asc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
        }
        let value = res_k * half;
        let res_abs = res_abs * half.abs();
        let res_asc = res_asc * half.abs();
        let mut err = ((res_k - res_g) * half).abs();
        if res_asc != 0.0 && err != 0.0 {
            err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
        }
        if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * res_abs);
        }
        if !value.is_finite() {
            return Err(domain("integrand produced a non-finite value"));
        }
        Ok((value, err, res_abs))
    }
}

fn adaptive<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: FnMut(Abscissa) -> Result<f64>,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(domain(format!("integration needs finite a < b, got [{a}, {b}]")));
    }
    let mut segments = Vec::with_capacity(2);
    let mut ranges = Vec::with_capacity(2);
    match spec.endpoint_singularity {
        Singularity::None => {
            segments.push(Segment::Plain);
            ranges.push((a, b));
        }
        Singularity::InverseSqrtLeft => {
            segments.push(Segment::Left { a, b });
            ranges.push((0.0, (b - a).sqrt()));
        }
        Singularity::InverseSqrtRight => {
            segments.push(Segment::Right { a, b });
            ranges.push((0.0, (b - a).sqrt()));
        }
        Singularity::Both => {
            let m = 0.5 * (a + b);
            segments.push(Segment::Left { a, b: m });
            ranges.push((0.0, (m - a).sqrt()));
            segments.push(Segment::Right { a: m, b });
            ranges.push((0.0, (b - m).sqrt()));
        }
    }

    let mut mapped = Mapped {
        f,
        a,
        b,
        segments: &segments,
        evaluations: 0,
    };
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (seg, &(lo, hi)) in ranges.iter().enumerate() {
        let (value, err, _) = mapped.kronrod(seg, lo, hi)?;
        total += value;
        total_err += err;
        heap.push(Panel {
            lo,
            hi,
            seg,
            depth: 0,
            value,
            err,
        });
    }

    loop {
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::ToleranceNotMet {
                estimate: total,
                error_bound: total_err,
            });
        };
        if worst.depth >= spec.max_depth || heap.len() + frozen.len() >= MAX_PANELS {
            frozen.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let (v1, e1, _) = mapped.kronrod(worst.seg, worst.lo, mid)?;
        let (v2, e2, _) = mapped.kronrod(worst.seg, mid, worst.hi)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        for (lo, hi, value, err) in [(worst.lo, mid, v1, e1), (mid, worst.hi, v2, e2)] {
            heap.push(Panel {
                lo,
                hi,
                seg: worst.seg,
                depth: worst.depth + 1,
                value,
                err,
            });
        }
    }

    // Re-sum to shed the drift of the incremental updates.
    let value = heap.iter().chain(frozen.iter()).map(|p| p.value).sum();
    let error_bound = heap.iter().chain(frozen.iter()).map(|p| p.err).sum();
    Ok(QuadratureResult {
        value,
        error_bound,
        evaluations: mapped.evaluations,
    })
}
