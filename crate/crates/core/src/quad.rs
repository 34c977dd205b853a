//! Adaptive quadrature for `∫ e^{iλφ(t)} a(t) dt`.
//!
//! The engine is a globally adaptive 7-point Gauss / 15-point Kronrod scheme.
//! Besides the usual error-driven bisection, a panel is also split whenever
//! the scaled phase `λφ` varies by more than `2π·q/4` across it, so that no
//! single panel is asked to resolve more oscillations than the rule can.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of nodes of the base (Kronrod) rule.
pub const RULE_ORDER: usize = 15;

// Kronrod abscissae, descending; odd indices are the 7-point Gauss abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
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

/// Tolerances and limits of the adaptive engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Hard cap on the number of live panels.
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_depth: 40,
            max_panels: 200_000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParams("quadrature tolerances must be > 0".into()));
        }
        if self.max_depth < 1 || self.max_panels < 1 {
            return Err(Error::InvalidParams("max_depth and max_panels must be >= 1".into()));
        }
        Ok(())
    }

    /// Phase variation allowed on a single panel, in radians.
    pub fn max_panel_phase(&self) -> f64 {
        2.0 * PI * (RULE_ORDER as f64 / 4.0)
    }
}

/// Outcome of one adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
    pub panels: usize,
    /// False when the tolerance was not met within the depth / panel limits;
    /// `value` is then the best available estimate.
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    depth: u32,
    /// Phase variation exceeds the rule capacity.
    under_resolved: bool,
}

impl Panel {
    fn priority(&self) -> f64 {
        if self.under_resolved {
            f64::INFINITY
        } else {
            self.error
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
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
        // Ties broken by position so the refinement order is reproducible.
        self.priority()
            .total_cmp(&other.priority())
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Applies the G7/K15 pair on `[a, b]`.
fn gk15<F, P>(f: &F, scaled_phase: &P, a: f64, b: f64, depth: u32, max_phase: f64) -> Result<Panel>
where
    F: Fn(f64) -> Complex64,
    P: Fn(f64) -> Option<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut nodes = [0.0f64; RULE_ORDER];
    let mut vals = [Complex64::new(0.0, 0.0); RULE_ORDER];
    // Layout: nodes ascending in t.
    for j in 0..7 {
        nodes[j] = center - half * XGK[j];
        nodes[RULE_ORDER - 1 - j] = center + half * XGK[j];
    }
    nodes[7] = center;
    for (t, v) in nodes.iter().zip(vals.iter_mut()) {
        let fx = f(*t);
        if !(fx.re.is_finite() && fx.im.is_finite()) {
            return Err(Error::NonFinite { t: *t });
        }
        *v = fx;
    }

    let weight = |i: usize| WGK[if i < 8 { i } else { RULE_ORDER - 1 - i }];
    let mut kronrod = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    for (i, v) in vals.iter().enumerate() {
        kronrod += v * weight(i);
        abs_sum += v.norm() * weight(i);
    }
    let mut gauss = vals[7] * WG[3];
    for (g, j) in [1usize, 3, 5].into_iter().enumerate() {
        gauss += (vals[j] + vals[RULE_ORDER - 1 - j]) * WG[g];
    }
    let mean = kronrod * 0.5;
    let mut asc = 0.0;
    for (i, v) in vals.iter().enumerate() {
        asc += (v - mean).norm() * weight(i);
    }

    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).norm();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }

    let mut variation = 0.0;
    let mut prev: Option<f64> = None;
    for t in nodes {
        if let Some(ph) = scaled_phase(t) {
            if let Some(p) = prev {
                variation += (ph - p).abs();
            }
            prev = Some(ph);
        }
    }

    Ok(Panel {
        a,
        b,
        value,
        error: err,
        depth,
        under_resolved: variation > max_phase,
    })
}

/// Generic adaptive driver. `scaled_phase` returns `λφ(t)` when the integrand
/// carries an explicit oscillatory factor, used only for panel splitting.
fn adaptive<F, P>(f: F, scaled_phase: P, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
    P: Fn(f64) -> Option<f64>,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration limits must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
            panels: 0,
            converged: true,
        });
    }
    let max_phase = spec.max_panel_phase();

    let root = gk15(&f, &scaled_phase, a, b, 0, max_phase)?;
    let mut evaluations = RULE_ORDER;
    let mut total = root.value;
    let mut total_err = root.error;
    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut finished: Vec<Panel> = Vec::new();
    let mut finished_err = 0.0;
    let mut converged = true;

    loop {
        let Some(top) = heap.peek().copied() else {
            break;
        };
        let tol = spec.abs_tol.max(spec.rel_tol * total.norm());
        if !top.under_resolved && total_err <= tol {
            break;
        }
        heap.pop();
        if top.depth >= spec.max_depth || heap.len() + finished.len() + 2 > spec.max_panels {
            converged = false;
            finished_err += top.error;
            finished.push(top);
            if finished_err > tol {
                break;
            }
            continue;
        }
        let mid = 0.5 * (top.a + top.b);
        let left = gk15(&f, &scaled_phase, top.a, mid, top.depth + 1, max_phase)?;
        let right = gk15(&f, &scaled_phase, mid, top.b, top.depth + 1, max_phase)?;
        evaluations += 2 * RULE_ORDER;
        total += left.value + right.value - top.value;
        total_err += left.error + right.error - top.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum in a fixed order to avoid accumulated cancellation drift.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(finished);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().fold(Complex64::new(0.0, 0.0), |acc, p| acc + p.value);
    let error: f64 = panels.iter().map(|p| p.error).sum();
    let tol = spec.abs_tol.max(spec.rel_tol * value.norm());
    if error > tol || panels.iter().any(|p| p.under_resolved) {
        converged = false;
    }
    Ok(QuadResult {
        value,
        error,
        evaluations,
        panels: panels.len(),
        converged,
    })
}

/// Computes `∫_a^b e^{iλ·phase(t)} amplitude(t) dt`.
pub fn integrate_oscillatory<P, A>(
    phase: P,
    amplitude: A,
    a: f64,
    b: f64,
    lambda: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult>
where
    P: Fn(f64) -> f64,
    A: Fn(f64) -> Complex64,
{
    if !lambda.is_finite() {
        return Err(Error::Domain("lambda must be finite".into()));
    }
    if lambda == 0.0 {
        return adaptive(amplitude, |_| None, a, b, spec);
    }
    adaptive(
        |t| amplitude(t) * Complex64::cis(lambda * phase(t)),
        |t| Some(lambda * phase(t)),
        a,
        b,
        spec,
    )
}

/// Non-oscillatory adaptive integral of a complex function.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
{
    adaptive(f, |_| None, a, b, spec)
}

/// Adaptive integral of a general complex integrand that oscillates at no
/// more than `rate` radians per unit length; panels are pre-split to respect
/// the rule capacity at that rate.
pub fn integrate_with_rate<F>(f: F, a: f64, b: f64, rate: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
{
    let rate = rate.abs();
    adaptive(f, |t| Some(rate * t), a, b, spec)
}

/// Computes `∫_0^∞ e^{2πist} s^{α-1} envelope(s) ds` for an envelope supported
/// in `[0, support]`.
///
/// For `0 < Re α < 1` the leading panel `[0, min(1, support)]` is mapped by
/// `s = u^{1/Re α}`, which turns the endpoint singularity into the bounded
/// factor `u^{i Im α / Re α} / Re α`.
pub fn fourier_halfline<E>(
    alpha: Complex64,
    envelope: E,
    support: f64,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult>
where
    E: Fn(f64) -> f64,
{
    let a = alpha.re;
    if !(a > 0.0) {
        return Err(Error::Domain(format!("Re alpha must be > 0, got {a}")));
    }
    if !(support > 0.0 && support.is_finite()) {
        return Err(Error::Domain("envelope support must be positive and finite".into()));
    }
    let freq = 2.0 * PI * t;
    let power = |s: f64| -> Complex64 {
        // s^{α-1} for s > 0
        let ln = s.ln();
        Complex64::from_polar((ln * (alpha.re - 1.0)).exp(), ln * alpha.im)
    };

    if a >= 1.0 {
        return integrate_oscillatory(|s| s, |s| power(s) * envelope(s), 0.0, support, freq, spec);
    }

    let split = support.min(1.0);
    let u_max = split.powf(a);
    let beta = alpha.im / a;
    let inv_a = 1.0 / a;
    let head = integrate_oscillatory(
        |u: f64| u.powf(inv_a),
        |u: f64| {
            let s = u.powf(inv_a);
            Complex64::from_polar(inv_a, beta * u.ln()) * envelope(s)
        },
        0.0,
        u_max,
        freq,
        spec,
    )?;
    if split >= support {
        return Ok(head);
    }
    let tail = integrate_oscillatory(|s| s, |s| power(s) * envelope(s), split, support, freq, spec)?;
    Ok(QuadResult {
        value: head.value + tail.value,
        error: head.error + tail.error,
        evaluations: head.evaluations + tail.evaluations,
        panels: head.panels + tail.panels,
        converged: head.converged && tail.converged,
    })
}
