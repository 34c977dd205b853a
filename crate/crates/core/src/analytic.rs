//! The analytic family used to interpolate between the `L^2` and `L^∞`
//! endpoints: the density `δ_α`, its Fourier transform, the kernel `K^α` and
//! numerical checks at `Re α = 1`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::{fit_exponent, DecayFitResult};
use crate::error::{Error, Result};
use crate::operator::{GridSpec, Operator};
use crate::phase::{ipow, CutoffSpec, PhaseParams};
use crate::quad::{fourier_halfline, QuadResult, QuadratureSpec};

// Lanczos approximation, g = 7, 9 coefficients.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// Lanczos sum for `Re z >= 1/2`.
fn lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * ((z + 0.5) * t.ln() - t).exp() * x
}

/// `Γ(z)` for complex `z`, with reflection below `Re z = 1/2`.
pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::Pole(z.re));
    }
    if z.re < 0.5 {
        let s = (PI * z).sin();
        return Ok(PI / (s * lanczos(1.0 - z)));
    }
    Ok(lanczos(z))
}

/// `1/Γ(z)`, entire; zero at the poles of `Γ`.
pub fn recip_gamma(z: Complex64) -> Complex64 {
    if is_pole(z) {
        return Complex64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        return (PI * z).sin() * lanczos(1.0 - z) / PI;
    }
    1.0 / lanczos(z)
}

/// Interpolation parameter `α` together with `e^{α²}/Γ(α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaParam {
    pub alpha: Complex64,
    pub prefactor: Complex64,
}

impl AlphaParam {
    pub fn new(alpha: Complex64) -> Self {
        Self {
            alpha,
            prefactor: (alpha * alpha).exp() * recip_gamma(alpha),
        }
    }

    pub fn real(a: f64) -> Self {
        Self::new(Complex64::new(a, 0.0))
    }

    /// Whether `Re α` lies in the interpolation strip `[-1/k, 1]`.
    pub fn in_strip(&self, k: u32) -> bool {
        (-1.0 / f64::from(k)..=1.0).contains(&self.alpha.re)
    }

    fn require_direct(&self) -> Result<()> {
        if self.alpha.re > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "Re alpha = {} <= 0: only the analytic continuation is defined there",
                self.alpha.re
            )))
        }
    }
}

/// `δ_α(s) = e^{α²}/Γ(α) · s^{α-1} ζ²(s)` for `s > 0`, zero otherwise.
pub fn delta_alpha_density(alpha: &AlphaParam, s: f64, cutoff: &CutoffSpec) -> Result<Complex64> {
    alpha.require_direct()?;
    if s <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let z = cutoff.zeta(s);
    let pow = ((alpha.alpha - 1.0) * s.ln()).exp();
    Ok(alpha.prefactor * pow * (z * z))
}

/// `δ̂_α(t) = e^{α²}/Γ(α) ∫_0^∞ e^{2πist} s^{α-1} ζ²(s) ds`.
pub fn delta_alpha_fourier(
    alpha: &AlphaParam,
    t: f64,
    cutoff: &CutoffSpec,
    quad: &QuadratureSpec,
) -> Result<QuadResult> {
    alpha.require_direct()?;
    let env = |s: f64| {
        let z = cutoff.zeta(s);
        z * z
    };
    let mut r = fourier_halfline(alpha.alpha, env, cutoff.zeta_support, t, quad)?;
    r.value *= alpha.prefactor;
    r.error *= alpha.prefactor.norm();
    Ok(r)
}

/// `K^α = K · δ̂_α(λ(x^m - u^m)/(2π))`.
pub fn kernel_k_alpha(op: &Operator, alpha: &AlphaParam, x: f64, y: f64, u: f64, v: f64) -> Result<QuadResult> {
    let k = op.kernel(x, y, u, v)?;
    let arg = op.lambda * (ipow(x, op.params.m) - ipow(u, op.params.m)) / (2.0 * PI);
    let d = delta_alpha_fourier(alpha, arg, &op.cutoff, &op.quad)?;
    Ok(QuadResult {
        value: k.value * d.value,
        error: k.error * d.value.norm() + d.error * k.value.norm(),
        evaluations: k.evaluations + d.evaluations,
        panels: k.panels + d.panels,
        converged: k.converged && d.converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweepRow {
    pub t: f64,
    pub value: Complex64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub alpha: Complex64,
    pub rows: Vec<DeltaSweepRow>,
    pub fit: DecayFitResult,
}

impl DeltaSweep {
    /// Writes `t,re,im,modulus` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "re", "im", "modulus"])?;
        for r in &self.rows {
            w.serialize((r.t, r.value.re, r.value.im, r.value.norm()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `δ̂_α` at each `t`, plus the log-log fit of `|δ̂_α(t)|`.
pub fn delta_alpha_sweep(
    alpha: &AlphaParam,
    ts: &[f64],
    cutoff: &CutoffSpec,
    quad: &QuadratureSpec,
) -> Result<DeltaSweep> {
    let rows: Vec<DeltaSweepRow> = ts
        .par_iter()
        .map(|&t| {
            delta_alpha_fourier(alpha, t, cutoff, quad).map(|r| DeltaSweepRow {
                t,
                value: r.value,
                converged: r.converged,
            })
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.value.norm())).collect();
    let fit = fit_exponent(&pts)?;
    Ok(DeltaSweep {
        alpha: alpha.alpha,
        rows,
        fit,
    })
}

/// Outcome of a power iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator given
/// by its action, via power iteration with Rayleigh quotients.
pub fn dominant_eigenvalue<F>(apply: F, dim: usize, max_iter: usize, tol: f64, seed: u64) -> PowerResult
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = |w: &[Complex64]| w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let n0 = norm(&v);
    v.iter_mut().for_each(|c| *c /= n0);
    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let w = apply(&v);
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let nw = norm(&w);
        if nw == 0.0 {
            return PowerResult {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        v = w.into_iter().map(|c| c / nw).collect();
        let delta = (rayleigh - estimate).abs();
        estimate = rayleigh;
        if delta <= tol * rayleigh.abs() {
            return PowerResult {
                value: estimate,
                iterations: it,
                converged: true,
            };
        }
    }
    PowerResult {
        value: estimate,
        iterations: max_iter,
        converged: false,
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(v).fold(Complex64::new(0.0, 0.0), |a, (m, x)| a + m * x))
            .collect()
    }

    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|c| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (r, x) in v.iter().enumerate() {
                    acc += self.data[r * n + c].conj() * x;
                }
                acc
            })
            .collect()
    }

    /// Spectral norm via power iteration on `M* M`.
    pub fn operator_norm(&self, max_iter: usize, tol: f64, seed: u64) -> PowerResult {
        let r = dominant_eigenvalue(|v| self.apply_adjoint(&self.apply(v)), self.n, max_iter, tol, seed);
        PowerResult {
            value: r.value.max(0.0).sqrt(),
            ..r
        }
    }
}

/// Grid on `window` times the box `λ^{-1/m} × λ^{-1/max(n,l)}`, clipped to
/// the cutoff support.
pub fn endpoint_grid(params: &PhaseParams, lambda: f64, cells: usize, window: f64) -> Result<GridSpec> {
    let (wx, wy) = if lambda <= 1.0 {
        (1.0, 1.0)
    } else {
        (
            (window * lambda.powf(-1.0 / f64::from(params.m))).min(1.0),
            (window * lambda.powf(-1.0 / f64::from(params.n_eff()))).min(1.0),
        )
    };
    GridSpec::new((-wx, wx), (-wy, wy), (-1.0, 1.0), cells, cells, 2)
}

/// Assembles `h_x h_y K^α(x_i; u_j)` on a grid.
pub fn assemble_k_alpha(op: &Operator, alpha: &AlphaParam, grid: &GridSpec) -> Result<(DenseMatrix, bool)> {
    let n = grid.len();
    if n > 4096 {
        return Err(Error::InvalidParams(format!("dense assembly limited to 4096 nodes, got {n}")));
    }
    // δ̂_α depends only on the pair of x-indices.
    let nx = grid.nx;
    let m = op.params.m;
    let deltas: Vec<QuadResult> = (0..nx * nx)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / nx, idx % nx);
            let arg = op.lambda * (ipow(grid.x(i), m) - ipow(grid.x(j), m)) / (2.0 * PI);
            delta_alpha_fourier(alpha, arg, &op.cutoff, &op.quad)
        })
        .collect::<Result<_>>()?;
    let ny = grid.ny;
    let upper: Vec<Vec<(Complex64, bool)>> = (0..n)
        .into_par_iter()
        .map(|row| {
            let (x, y) = grid.point(row);
            (row..n)
                .map(|col| {
                    let (u, v) = grid.point(col);
                    op.kernel(x, y, u, v).map(|k| (k.value, k.converged))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let area = grid.cell_area();
    let mut mat = DenseMatrix::zeros(n);
    let mut ok = deltas.iter().all(|d| d.converged);
    for (row, cols) in upper.iter().enumerate() {
        for (off, &(k, conv)) in cols.iter().enumerate() {
            let col = row + off;
            ok &= conv;
            let (ir, ic) = (row / ny, col / ny);
            mat.data[row * n + col] = k * deltas[ir * nx + ic].value * area;
            if col != row {
                mat.data[col * n + row] = k.conj() * deltas[ic * nx + ir].value * area;
            }
        }
    }
    Ok((mat, ok))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub cells: usize,
    pub window: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            cells: 48,
            window: 2.0,
            max_iter: 500,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointRow {
    pub lambda: f64,
    pub norm: f64,
    pub power_iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2EndpointReport {
    pub alpha: Complex64,
    /// `1/m + 1/max{n,l}`.
    pub target_exponent: f64,
    pub rows: Vec<EndpointRow>,
    pub fit: DecayFitResult,
    pub deviation: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Sweeps λ, estimating `‖T_K^α‖_{L^2 → L^2}` on the λ-scaled window and
/// fitting its decay exponent.
pub fn l2_endpoint_check(
    params: &PhaseParams,
    lambdas: &[f64],
    alpha: &AlphaParam,
    config: &EndpointConfig,
    cutoff: &CutoffSpec,
    quad: &QuadratureSpec,
) -> Result<L2EndpointReport> {
    params.validate()?;
    alpha.require_direct()?;
    if config.cells * config.cells > 4096 {
        return Err(Error::InvalidParams("grid too large for dense assembly (N_x N_y <= 4096)".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let op = Operator::new(*params, lambda).with_cutoff(*cutoff).with_quad(*quad);
        let grid = endpoint_grid(params, lambda, config.cells, config.window)?;
        let (mat, ok) = assemble_k_alpha(&op, alpha, &grid)?;
        let pr = mat.operator_norm(config.max_iter, config.tol, config.seed);
        rows.push(EndpointRow {
            lambda,
            norm: pr.value,
            power_iterations: pr.iterations,
            converged: pr.converged && ok,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.norm)).collect();
    let fit = fit_exponent(&pts)?;
    let target = params.l2_endpoint_exponent();
    let deviation = (-fit.slope - target).abs();
    let threshold = 0.1 * target;
    Ok(L2EndpointReport {
        alpha: alpha.alpha,
        target_exponent: target,
        rows,
        fit,
        deviation,
        threshold,
        passed: deviation <= threshold,
    })
}
