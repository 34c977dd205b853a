//! Phase family `S(x, y, t) = x^m t^k + y^n t^l`, smooth cutoffs and the
//! predicted decay exponents.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer power by repeated squaring.
///
/// Kept explicit (rather than `powi`) so that every evaluation of the phase
/// performs the same sequence of multiplications on every platform.
#[inline]
pub fn ipow(mut base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        exp >>= 1;
        if exp > 0 {
            base *= base;
        }
    }
    acc
}

/// Exponent quadruple `(m, n, k, l)` of the phase `x^m t^k + y^n t^l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseParams {
    pub m: u32,
    pub n: u32,
    pub k: u32,
    pub l: u32,
}

impl PhaseParams {
    /// Validates positivity and the normalization `k > l`.
    pub fn new(m: u32, n: u32, k: u32, l: u32) -> Result<Self> {
        for (name, v) in [("m", m), ("n", n), ("k", k), ("l", l)] {
            if v == 0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 1")));
            }
        }
        if k <= l {
            return Err(Error::Normalization { k, l });
        }
        Ok(Self { m, n, k, l })
    }

    /// Same as [`PhaseParams::new`] but without the `k > l` check.
    ///
    /// Useful for the phase itself, which is well defined for any exponents.
    pub fn unnormalized(m: u32, n: u32, k: u32, l: u32) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 || l == 0 {
            return Err(Error::InvalidParams("exponents must be >= 1".into()));
        }
        Ok(Self { m, n, k, l })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.m, self.n, self.k, self.l).map(|_| ())
    }

    /// Lebesgue exponent `p = 2k + 2` of the target space.
    pub fn p(&self) -> u32 {
        2 * self.k + 2
    }

    /// `max{n, l}`.
    pub fn n_eff(&self) -> u32 {
        self.n.max(self.l)
    }

    /// Predicted decay exponent as an exact rational.
    pub fn delta_pred_exact(&self) -> Ratio<i64> {
        let m = i64::from(self.m);
        let ne = i64::from(self.n_eff());
        let k = i64::from(self.k);
        Ratio::new(1, 2 * (k + 1)) * (Ratio::new(1, m) + Ratio::new(1, ne))
    }

    pub fn delta_pred(&self) -> f64 {
        ratio_to_f64(self.delta_pred_exact())
    }

    /// Whether the witness exponent matches the predicted one (`l <= n`).
    pub fn is_sharp(&self) -> bool {
        self.l <= self.n
    }

    /// Exponent `1/m + 1/max{n,l}` of the `L^2` endpoint of the analytic family.
    pub fn l2_endpoint_exponent(&self) -> f64 {
        let r = Ratio::new(1, i64::from(self.m)) + Ratio::new(1, i64::from(self.n_eff()));
        ratio_to_f64(r)
    }

    /// Evaluates `x^m t^k + y^n t^l`.
    #[inline]
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        ipow(x, self.m) * ipow(t, self.k) + ipow(y, self.n) * ipow(t, self.l)
    }
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Free-function form of [`PhaseParams::eval`].
pub fn eval_phase(params: &PhaseParams, x: f64, y: f64, t: f64) -> f64 {
    params.eval(x, y, t)
}

/// Returns `(p, delta)` with `p = 2k + 2` and the predicted decay exponent.
pub fn predicted_exponent(params: &PhaseParams) -> Result<(u32, f64)> {
    params.validate()?;
    Ok((params.p(), params.delta_pred()))
}

/// Exponent of the witness lower bound, `(1/p)(1/m + 1/n)`.
pub fn lower_bound_exponent(params: &PhaseParams, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParams(format!("p must be >= 1, got {p}")));
    }
    Ok((1.0 / f64::from(params.m) + 1.0 / f64::from(params.n)) / p)
}

/// `exp(-1/x)` for `x > 0`, zero otherwise.
#[inline]
fn flat_exp(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// C-infinity step falling from 1 at `inner` to 0 at `outer`.
#[inline]
fn smooth_step_down(r: f64, inner: f64, outer: f64) -> f64 {
    if r <= inner {
        return 1.0;
    }
    if r >= outer {
        return 0.0;
    }
    let tau = (r - inner) / (outer - inner);
    let a = flat_exp(1.0 - tau);
    let b = flat_exp(tau);
    a / (a + b)
}

/// How the cutoffs are realized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffProfile {
    /// Smooth radial bump.
    Smooth,
    /// `psi` frozen to 1 everywhere (test mode for translation structure).
    Frozen,
}

/// Radial bump `psi` on R^3 and the one-dimensional cutoff `zeta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub zeta_plateau: f64,
    pub zeta_support: f64,
    pub profile: CutoffProfile,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self {
            inner_radius: 0.5,
            outer_radius: 1.0,
            zeta_plateau: 1.0,
            zeta_support: 2.0,
            profile: CutoffProfile::Smooth,
        }
    }
}

impl CutoffSpec {
    pub fn frozen() -> Self {
        Self {
            profile: CutoffProfile::Frozen,
            ..Self::default()
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.profile == CutoffProfile::Frozen
    }

    /// Radial profile of `psi` as a function of `r = |(x,y,t)|`.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        match self.profile {
            CutoffProfile::Frozen => 1.0,
            CutoffProfile::Smooth => smooth_step_down(r, self.inner_radius, self.outer_radius),
        }
    }

    #[inline]
    pub fn psi(&self, x: f64, y: f64, t: f64) -> f64 {
        self.radial((x * x + y * y + t * t).sqrt())
    }

    #[inline]
    pub fn zeta(&self, s: f64) -> f64 {
        smooth_step_down(s.abs(), self.zeta_plateau, self.zeta_support)
    }

    /// Half-length of the `t`-interval on which `psi(x, y, .)` can be nonzero,
    /// or `None` when `(x, y)` is outside the support. Frozen cutoffs return
    /// `f64::INFINITY`.
    pub fn t_extent(&self, x: f64, y: f64) -> Option<f64> {
        if self.is_frozen() {
            return Some(f64::INFINITY);
        }
        let rem = self.outer_radius * self.outer_radius - x * x - y * y;
        (rem > 0.0).then(|| rem.sqrt())
    }
}

/// Free-function form of [`CutoffSpec::psi`].
pub fn eval_cutoff(spec: &CutoffSpec, x: f64, y: f64, t: f64) -> f64 {
    spec.psi(x, y, t)
}
