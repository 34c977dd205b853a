//! Discretized action of `T_λ`, its adjoint, the kernel `K` of `T_λ T_λ*`
//! and the kernel operator `T_K` on grid-sampled functions.
//!
//! Integrals in `t` are computed with the adaptive engine of [`crate::quad`];
//! integrals over `(u, v)` are midpoint Riemann sums over the grid cells.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use parking_lot::RwLock;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{ipow, CutoffSpec, PhaseParams};
use crate::quad::{integrate, integrate_oscillatory, integrate_with_rate, QuadResult, QuadratureSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Cell-centered uniform grid on `[x_lo, x_hi] × [y_lo, y_hi]` together with
/// a `t`-range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl GridSpec {
    /// Symmetric square grid `[-half, half]^2` with `t ∈ [-half, half]`.
    pub fn square(half: f64, n: usize, nt: usize) -> Result<Self> {
        Self::new((-half, half), (-half, half), (-half, half), n, n, nt)
    }

    /// Default grid for norm experiments: `[-1.25, 1.25]^2`.
    pub fn default_for(n: usize, nt: usize) -> Result<Self> {
        Self::square(1.25, n, nt)
    }

    pub fn new(
        x: (f64, f64),
        y: (f64, f64),
        t: (f64, f64),
        nx: usize,
        ny: usize,
        nt: usize,
    ) -> Result<Self> {
        let g = Self {
            x_lo: x.0,
            x_hi: x.1,
            y_lo: y.0,
            y_hi: y.1,
            t_lo: t.0,
            t_hi: t.1,
            nx,
            ny,
            nt,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || self.nt < 2 {
            return Err(Error::InvalidParams("grid counts must be >= 2".into()));
        }
        let ok = [(self.x_lo, self.x_hi), (self.y_lo, self.y_hi), (self.t_lo, self.t_hi)]
            .iter()
            .all(|&(lo, hi)| lo.is_finite() && hi.is_finite() && lo < hi);
        if !ok {
            return Err(Error::InvalidParams("grid ranges must be finite with lo < hi".into()));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        (self.y_hi - self.y_lo) / self.ny as f64
    }
    pub fn ht(&self) -> f64 {
        (self.t_hi - self.t_lo) / self.nt as f64
    }
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.hx()
    }
    pub fn y(&self, j: usize) -> f64 {
        self.y_lo + (j as f64 + 0.5) * self.hy()
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Flat index → `(i, j)`; `j` runs fastest.
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx / self.ny, idx % self.ny)
    }
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.x(i), self.y(j))
    }
    pub fn line_layout(&self) -> LineLayout {
        LineLayout {
            t_lo: self.t_lo,
            t_hi: self.t_hi,
            n: self.nt,
        }
    }
}

/// Cell-centered nodes on `[t_lo, t_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineLayout {
    pub t_lo: f64,
    pub t_hi: f64,
    pub n: usize,
}

impl LineLayout {
    pub fn h(&self) -> f64 {
        (self.t_hi - self.t_lo) / self.n as f64
    }
    pub fn t(&self, i: usize) -> f64 {
        self.t_lo + (i as f64 + 0.5) * self.h()
    }
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.t(i))
    }
}

/// A grid resolution guard that did not hold. Non-fatal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionWarning {
    pub axis: String,
    /// `λ · h · sup|∂ phase|`, required to be at most 1/4.
    pub phase_step: f64,
}

impl fmt::Display for ResolutionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "under-resolved {} axis: phase step per cell {:.3} > 0.25",
            self.axis, self.phase_step
        )
    }
}

/// Complex samples on the nodes of a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    /// Nodes whose quadrature did not meet tolerance.
    pub failed: Vec<bool>,
    pub warnings: Vec<ResolutionWarning>,
}

impl SampledField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_values(grid, vec![ZERO; grid.len()]).expect("length matches")
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParams(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Degenerate("field contains non-finite values".into()));
        }
        Ok(Self {
            grid,
            failed: vec![false; values.len()],
            values,
            warnings: Vec::new(),
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(grid: GridSpec, f: F) -> Result<Self> {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                f(x, y)
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn all_converged(&self) -> bool {
        !self.failed.iter().any(|&f| f)
    }

    /// `Σ a · conj(b) · h_x h_y`.
    pub fn inner(&self, other: &SampledField) -> Complex64 {
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(ZERO, |acc, (a, b)| acc + a * b.conj());
        s * self.grid.cell_area()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Writes `i,j,x,y,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "x", "y", "re", "im"])?;
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j) = self.grid.ij(idx);
            let (x, y) = self.grid.point(idx);
            w.serialize((i, j, x, y, v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Complex samples on a [`LineLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledLine {
    pub layout: LineLayout,
    pub values: Vec<Complex64>,
    pub warnings: Vec<ResolutionWarning>,
}

impl SampledLine {
    pub fn from_values(layout: LineLayout, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != layout.n {
            return Err(Error::InvalidParams(format!(
                "line has {} values, layout has {} nodes",
                values.len(),
                layout.n
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Degenerate("line contains non-finite values".into()));
        }
        Ok(Self {
            layout,
            values,
            warnings: Vec::new(),
        })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(layout: LineLayout, f: F) -> Result<Self> {
        Self::from_values(layout, layout.nodes().map(f).collect())
    }

    pub fn inner(&self, other: &SampledLine) -> Complex64 {
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(ZERO, |acc, (a, b)| acc + a * b.conj());
        s * self.layout.h()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.layout.h()
    }

    /// Catmull-Rom cubic through the nodes; constant beyond the outer nodes
    /// and zero outside `[t_lo, t_hi]`.
    pub fn interpolate(&self, t: f64) -> Complex64 {
        let l = &self.layout;
        if t < l.t_lo || t > l.t_hi {
            return ZERO;
        }
        let n = self.values.len();
        let pos = (t - l.t_lo) / l.h() - 0.5;
        if pos <= 0.0 {
            return self.values[0];
        }
        if pos >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let i = pos.floor() as usize;
        let s = pos - i as f64;
        let at = |k: isize| self.values[k.clamp(0, n as isize - 1) as usize];
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let s2 = s * s;
        let s3 = s2 * s;
        (p1 * 2.0
            + (p2 - p0) * s
            + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * s2
            + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * s3)
            * 0.5
    }
}

/// Input function of `t` for [`Operator::apply_t`].
#[derive(Clone, Copy)]
pub enum LineInput<'a> {
    /// Indicator of `[lo, hi]`, handled exactly by clipping the interval.
    Indicator { lo: f64, hi: f64 },
    Function(&'a (dyn Fn(f64) -> Complex64 + Sync)),
    Sampled(&'a SampledLine),
}

impl LineInput<'_> {
    fn eval(&self, t: f64) -> Complex64 {
        match self {
            LineInput::Indicator { lo, hi } => {
                if (*lo..=*hi).contains(&t) {
                    Complex64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            }
            LineInput::Function(f) => f(t),
            LineInput::Sampled(s) => s.interpolate(t),
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            LineInput::Indicator { lo, hi } => (*lo, *hi),
            LineInput::Function(_) => (f64::NEG_INFINITY, f64::INFINITY),
            LineInput::Sampled(s) => (s.layout.t_lo, s.layout.t_hi),
        }
    }
}

/// `T_λ` for fixed exponents, cutoff and frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    pub params: PhaseParams,
    pub lambda: f64,
    pub cutoff: CutoffSpec,
    pub quad: QuadratureSpec,
    /// Range of the `t` integrals; must cover the cutoff support.
    pub t_range: (f64, f64),
}

impl Operator {
    pub fn new(params: PhaseParams, lambda: f64) -> Self {
        Self {
            params,
            lambda,
            cutoff: CutoffSpec::default(),
            quad: QuadratureSpec::default(),
            t_range: (-1.25, 1.25),
        }
    }

    pub fn with_cutoff(mut self, cutoff: CutoffSpec) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_quad(mut self, quad: QuadratureSpec) -> Self {
        self.quad = quad;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// `t`-interval of the integrand at `(x, y)` intersected with `range`.
    fn t_interval(&self, x: f64, y: f64, range: (f64, f64)) -> Option<(f64, f64)> {
        let ext = self.cutoff.t_extent(x, y)?;
        let lo = range.0.max(self.t_range.0).max(-ext);
        let hi = range.1.min(self.t_range.1).min(ext);
        (lo < hi).then_some((lo, hi))
    }

    /// `T_λ f` at a single point.
    pub fn apply_t_at(&self, f: &LineInput<'_>, x: f64, y: f64) -> Result<QuadResult> {
        let Some((a, b)) = self.t_interval(x, y, f.support()) else {
            return Ok(zero_result());
        };
        let params = self.params;
        let cutoff = self.cutoff;
        integrate_oscillatory(
            |t| params.eval(x, y, t),
            |t| f.eval(t) * cutoff.psi(x, y, t),
            a,
            b,
            self.lambda,
            &self.quad,
        )
    }

    /// Samples `T_λ f` on the grid nodes.
    pub fn apply_t(&self, f: &LineInput<'_>, grid: &GridSpec) -> Result<SampledField> {
        grid.validate()?;
        let results: Vec<QuadResult> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (x, y) = grid.point(idx);
                self.apply_t_at(f, x, y)
            })
            .collect::<Result<_>>()?;
        Ok(SampledField {
            grid: *grid,
            values: results.iter().map(|r| r.value).collect(),
            failed: results.iter().map(|r| !r.converged).collect(),
            warnings: Vec::new(),
        })
    }

    /// Checks `λ·h·sup|∂ phase| ≤ 1/4` along both grid axes over `t`-values
    /// up to `t_max` in modulus.
    pub fn resolution_warnings(&self, grid: &GridSpec, t_max: f64) -> Vec<ResolutionWarning> {
        let p = &self.params;
        let xmax = grid.x_lo.abs().max(grid.x_hi.abs());
        let ymax = grid.y_lo.abs().max(grid.y_hi.abs());
        let dx = f64::from(p.m) * ipow(xmax, p.m - 1) * ipow(t_max, p.k);
        let dy = f64::from(p.n) * ipow(ymax, p.n - 1) * ipow(t_max, p.l);
        let mut out = Vec::new();
        for (axis, h, d) in [("x", grid.hx(), dx), ("y", grid.hy(), dy)] {
            let step = self.lambda.abs() * h * d;
            if step > 0.25 {
                out.push(ResolutionWarning {
                    axis: axis.into(),
                    phase_step: step,
                });
            }
        }
        out
    }

    fn t_sup(&self, layout_extent: f64) -> f64 {
        let t = layout_extent.min(self.t_range.0.abs().max(self.t_range.1.abs()));
        if self.cutoff.is_frozen() {
            t
        } else {
            t.min(self.cutoff.outer_radius)
        }
    }

    /// `T_λ* g(t)` as a midpoint sum over the grid cells of `g`.
    pub fn adjoint_at(&self, g: &SampledField, t: f64) -> Complex64 {
        let grid = &g.grid;
        let mut acc = ZERO;
        for (idx, gv) in g.values.iter().enumerate() {
            if *gv == ZERO {
                continue;
            }
            let (u, v) = grid.point(idx);
            let psi = self.cutoff.psi(u, v, t);
            if psi == 0.0 {
                continue;
            }
            let phase = -self.lambda * self.params.eval(u, v, t);
            acc += Complex64::cis(phase) * (psi * gv);
        }
        acc * grid.cell_area()
    }

    /// Samples `T_λ* g` on a line layout.
    pub fn apply_t_star(&self, g: &SampledField, layout: &LineLayout) -> Result<SampledLine> {
        if g.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Degenerate("non-finite input field".into()));
        }
        let values: Vec<Complex64> = (0..layout.n)
            .into_par_iter()
            .map(|i| self.adjoint_at(g, layout.t(i)))
            .collect();
        let extent = layout.t_lo.abs().max(layout.t_hi.abs());
        Ok(SampledLine {
            layout: *layout,
            values,
            warnings: self.resolution_warnings(&g.grid, self.t_sup(extent)),
        })
    }

    /// `∫ |T_λ* g(t)|^2 dt` with the `t`-integral done adaptively.
    pub fn adjoint_norm_sq(&self, g: &SampledField) -> Result<QuadResult> {
        let (lo, hi) = if self.cutoff.is_frozen() {
            self.t_range
        } else {
            let r = self.cutoff.outer_radius;
            (self.t_range.0.max(-r), self.t_range.1.min(r))
        };
        // |T*g|^2 carries differences of phases, hence up to twice the rate.
        let params = self.params;
        let (xm, ym) = (
            g.grid.x_lo.abs().max(g.grid.x_hi.abs()),
            g.grid.y_lo.abs().max(g.grid.y_hi.abs()),
        );
        let tm = lo.abs().max(hi.abs());
        let rate = 2.0
            * self.lambda
            * (ipow(xm, params.m) * f64::from(params.k) * ipow(tm, params.k - 1)
                + ipow(ym, params.n) * f64::from(params.l) * ipow(tm, params.l - 1));
        integrate_with_rate(
            |t| Complex64::new(self.adjoint_at(g, t).norm_sqr(), 0.0),
            lo,
            hi,
            rate,
            &self.quad,
        )
    }

    /// `K(x,y;u,v) = ∫ e^{iλ[(x^m-u^m)t^k + (y^n-v^n)t^l]} ψ(u,v,t) ψ(x,y,t) dt`.
    pub fn kernel(&self, x: f64, y: f64, u: f64, v: f64) -> Result<QuadResult> {
        let p = self.params;
        let (Some(e1), Some(e2)) = (self.cutoff.t_extent(x, y), self.cutoff.t_extent(u, v)) else {
            return Ok(zero_result());
        };
        let ext = e1.min(e2);
        let lo = self.t_range.0.max(-ext);
        let hi = self.t_range.1.min(ext);
        if lo >= hi {
            return Ok(zero_result());
        }
        let a = ipow(x, p.m) - ipow(u, p.m);
        let b = ipow(y, p.n) - ipow(v, p.n);
        let cutoff = self.cutoff;
        let amp = |t: f64| Complex64::new(cutoff.psi(u, v, t) * cutoff.psi(x, y, t), 0.0);
        if a == 0.0 && b == 0.0 {
            return integrate(amp, lo, hi, &self.quad);
        }
        integrate_oscillatory(
            |t| a * ipow(t, p.k) + b * ipow(t, p.l),
            amp,
            lo,
            hi,
            self.lambda,
            &self.quad,
        )
    }

    pub fn kernel_cache(&self, grid: &GridSpec) -> KernelCache {
        KernelCache {
            op: *self,
            grid: *grid,
            map: RwLock::new(HashMap::new()),
        }
    }

    /// `T_K g(x, y) = Σ_{(u,v)} K(x,y;u,v) g(u,v) h_u h_v`.
    pub fn apply_tk(&self, g: &SampledField, cache: &KernelCache) -> Result<SampledField> {
        cache.check(self, &g.grid)?;
        let grid = g.grid;
        let area = grid.cell_area();
        let rows: Vec<(Complex64, bool)> = (0..grid.len())
            .into_par_iter()
            .map(|row| -> Result<(Complex64, bool)> {
                let mut acc = ZERO;
                let mut ok = true;
                for (col, gv) in g.values.iter().enumerate() {
                    if *gv == ZERO {
                        continue;
                    }
                    let (k, conv) = cache.get(row, col)?;
                    ok &= conv;
                    acc += k * gv;
                }
                Ok((acc * area, ok))
            })
            .collect::<Result<_>>()?;
        let extent = self.t_range.0.abs().max(self.t_range.1.abs());
        Ok(SampledField {
            grid,
            values: rows.iter().map(|r| r.0).collect(),
            failed: rows.iter().map(|r| !r.1).collect(),
            warnings: self.resolution_warnings(&grid, self.t_sup(extent)),
        })
    }
}

fn zero_result() -> QuadResult {
    QuadResult {
        value: ZERO,
        error: 0.0,
        evaluations: 0,
        panels: 0,
        converged: true,
    }
}

/// Kernel values `K(x_row; u_col)` for one `(λ, grid)` pair.
///
/// `K(x; u) = conj(K(u; x))` for real cutoffs, so only pairs with
/// `row <= col` are stored. Reads are concurrent, inserts exclusive.
pub struct KernelCache {
    op: Operator,
    grid: GridSpec,
    map: RwLock<HashMap<(usize, usize), (Complex64, bool)>>,
}

impl KernelCache {
    fn check(&self, op: &Operator, grid: &GridSpec) -> Result<()> {
        if self.op != *op || self.grid != *grid {
            return Err(Error::InvalidParams(
                "kernel cache was built for a different operator or grid".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(K(x_row; u_col), converged)`.
    pub fn get(&self, row: usize, col: usize) -> Result<(Complex64, bool)> {
        let (key, flip) = if row <= col {
            ((row, col), false)
        } else {
            ((col, row), true)
        };
        let cached = self.map.read().get(&key).copied();
        let (k, ok) = match cached {
            Some(v) => v,
            None => {
                let (x, y) = self.grid.point(key.0);
                let (u, v) = self.grid.point(key.1);
                let r = self.op.kernel(x, y, u, v)?;
                let val = (r.value, r.converged);
                self.map.write().insert(key, val);
                val
            }
        };
        Ok((if flip { k.conj() } else { k }, ok))
    }
}
