//! Grid `L^p` norms and two lower-bound estimators of `‖T_λ‖_{L^2 → L^p}`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{GridSpec, LineInput, LineLayout, Operator, ResolutionWarning, SampledField};
use crate::phase::PhaseParams;

/// Which estimator produced a [`NormEstimate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    LowerWitness,
    AscentStationary,
}

impl EstimateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateKind::LowerWitness => "lower_witness",
            EstimateKind::AscentStationary => "ascent_stationary",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    pub iterations: usize,
    /// Relative objective increase of the last step (ascent) or zero.
    pub residual: f64,
    pub converged: bool,
    /// Objective after each ascent step, starting with the initial point.
    pub history: Vec<f64>,
    pub warnings: Vec<ResolutionWarning>,
}

/// `(Σ |v|^p h_x h_y)^{1/p}`, or the max modulus for `p = ∞`.
///
/// # Panics
/// If `p < 1` or `p` is NaN.
pub fn lp_norm(field: &SampledField, p: f64) -> f64 {
    weighted_lp(&field.values, field.grid.cell_area(), p)
}

pub(crate) fn weighted_lp(values: &[Complex64], weight: f64, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm requires p >= 1, got {p}");
    let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    let s: f64 = values.iter().map(|v| (v.norm() / max).powf(p)).sum();
    max * (s * weight).powf(1.0 / p)
}

/// Half-widths `(W_x, W_y)` of the box `|x| ≤ λ^{-1/m}, |y| ≤ λ^{-1/n}`,
/// clipped to the cutoff support.
pub fn witness_box(params: &PhaseParams, lambda: f64) -> (f64, f64) {
    if lambda <= 1.0 {
        return (1.0, 1.0);
    }
    (
        lambda.powf(-1.0 / f64::from(params.m)).min(1.0),
        lambda.powf(-1.0 / f64::from(params.n)).min(1.0),
    )
}

/// Cell-centered grid on `window` times the witness box, `cells` per axis.
pub fn witness_grid(params: &PhaseParams, lambda: f64, cells: usize, window: f64) -> Result<GridSpec> {
    if !(window >= 1.0) {
        return Err(Error::InvalidParams("witness window must be >= 1 box".into()));
    }
    let (bx, by) = witness_box(params, lambda);
    let (wx, wy) = ((window * bx).min(1.0), (window * by).min(1.0));
    GridSpec::new((-wx, wx), (-wy, wy), (-1.0, 1.0), cells, cells, 2)
}

/// `‖T_λ χ_[0,1]‖_{L^p(grid)} / ‖χ_[0,1]‖_{L^2}`.
///
/// The grid must cover the witness box with at least 8 cells per axis
/// inside it.
pub fn witness_ratio(op: &Operator, p: f64, grid: &GridSpec) -> Result<NormEstimate> {
    let (bx, by) = witness_box(&op.params, op.lambda.abs());
    let covers = grid.x_lo <= -bx && grid.x_hi >= bx && grid.y_lo <= -by && grid.y_hi >= by;
    if !covers {
        return Err(Error::Resolution(format!(
            "grid does not cover the witness box [{bx:.3e}, {by:.3e}]"
        )));
    }
    let (cx, cy) = (2.0 * bx / grid.hx(), 2.0 * by / grid.hy());
    if cx < 8.0 - 1e-9 || cy < 8.0 - 1e-9 {
        return Err(Error::Resolution(format!(
            "witness box resolved by {cx:.1} x {cy:.1} cells, need 8 per axis"
        )));
    }
    let field = op.apply_t(&LineInput::Indicator { lo: 0.0, hi: 1.0 }, grid)?;
    Ok(NormEstimate {
        // ‖χ_[0,1]‖_2 = 1
        value: lp_norm(&field, p),
        kind: EstimateKind::LowerWitness,
        iterations: 0,
        residual: 0.0,
        converged: field.all_converged(),
        history: Vec::new(),
        warnings: field.warnings,
    })
}

/// `T_λ` discretized by the midpoint rule in every variable, as an explicit
/// `(grid nodes) × (t nodes)` matrix. Its adjoint with respect to the
/// weighted inner products is exact, which the ascent relies on.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub grid: GridSpec,
    pub layout: LineLayout,
    /// Row-major entries `e^{iλS(x,y,t)} ψ(x,y,t)`.
    entries: Vec<Complex64>,
}

impl DiscreteOperator {
    pub fn assemble(op: &Operator, grid: &GridSpec, layout: &LineLayout) -> Result<Self> {
        grid.validate()?;
        if layout.n < 2 {
            return Err(Error::InvalidParams("line layout needs >= 2 nodes".into()));
        }
        let nt = layout.n;
        let entries: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|row| {
                let (x, y) = grid.point(row);
                (0..nt).map(move |c| {
                    let t = layout.t(c);
                    Complex64::cis(op.lambda * op.params.eval(x, y, t)) * op.cutoff.psi(x, y, t)
                })
            })
            .collect();
        Ok(Self {
            grid: *grid,
            layout: *layout,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.layout.n
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols() + col]
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let h = self.layout.h();
        let nt = self.cols();
        self.entries
            .par_chunks(nt)
            .map(|row| row.iter().zip(f).fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b) * h)
            .collect()
    }

    pub fn apply_adjoint(&self, g: &[Complex64]) -> Vec<Complex64> {
        let w = self.grid.cell_area();
        let nt = self.cols();
        (0..nt)
            .into_par_iter()
            .map(|c| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (r, gv) in g.iter().enumerate() {
                    acc += self.entries[r * nt + c].conj() * gv;
                }
                acc * w
            })
            .collect()
    }

    fn line_norm(&self, f: &[Complex64]) -> f64 {
        (f.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.layout.h()).sqrt()
    }

    /// `‖A f‖_{L^p(grid)} / ‖f‖_{L^2(line)}`.
    pub fn ratio(&self, f: &[Complex64], p: f64) -> f64 {
        weighted_lp(&self.apply(f), self.grid.cell_area(), p) / self.line_norm(f)
    }
}

/// Settings of [`ascent_norm`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub p: u32,
    pub max_iter: usize,
    /// Stop once the relative objective increase falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            p: 2,
            max_iter: 2000,
            tol: 1e-12,
            seed: 0,
        }
    }
}

const MAX_RESTARTS: u64 = 3;
/// Allowed decrease of the objective between consecutive ascent steps.
pub const MONOTONE_SLACK: f64 = 1e-12;

fn random_start(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Normalized ascent on `F(f) = ‖T f‖_p` over `‖f‖_2 = 1`:
/// `f ← T*(|Tf|^{p-2} Tf)` followed by renormalization.
///
/// For even `p` the objective is convex and each step maximizes its
/// linearization over the unit sphere, so the objective sequence is
/// nondecreasing; a violation beyond [`MONOTONE_SLACK`] is reported as an
/// error rather than silently accepted.
pub fn ascent_norm(
    operator: &DiscreteOperator,
    config: &AscentConfig,
    start: Option<&[Complex64]>,
) -> Result<NormEstimate> {
    if config.p < 2 || config.p % 2 != 0 {
        return Err(Error::InvalidParams(format!("ascent requires even p >= 2, got {}", config.p)));
    }
    if let Some(s) = start {
        if s.len() != operator.cols() {
            return Err(Error::InvalidParams("start vector has the wrong length".into()));
        }
    }
    let p = f64::from(config.p);
    let pw = (config.p - 2) as i32;
    let mut restart = 0u64;

    'restart: loop {
        let mut f: Vec<Complex64> = match (start, restart) {
            (Some(s), 0) => s.to_vec(),
            _ => random_start(operator.cols(), config.seed.wrapping_add(restart)),
        };
        let mut tf;
        {
            let nrm = operator.line_norm(&f);
            if !(nrm > 0.0) {
                restart += 1;
                if restart > MAX_RESTARTS {
                    return Err(Error::Degenerate("zero start vector".into()));
                }
                continue 'restart;
            }
            f.iter_mut().for_each(|v| *v /= nrm);
            tf = operator.apply(&f);
        }
        let mut objective = weighted_lp(&tf, operator.grid.cell_area(), p);
        if !(objective > f64::MIN_POSITIVE) {
            restart += 1;
            if restart > MAX_RESTARTS {
                return Err(Error::Degenerate("T f vanished for every start".into()));
            }
            continue 'restart;
        }
        let mut history = vec![objective];
        let mut residual = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < config.max_iter {
            let weighted: Vec<Complex64> = tf.iter().map(|v| v * v.norm().powi(pw)).collect();
            let mut next = operator.apply_adjoint(&weighted);
            let nrm = operator.line_norm(&next);
            if !(nrm > 0.0) {
                break;
            }
            next.iter_mut().for_each(|v| *v /= nrm);
            let next_tf = operator.apply(&next);
            let next_obj = weighted_lp(&next_tf, operator.grid.cell_area(), p);
            iterations += 1;
            if next_obj < objective - MONOTONE_SLACK * objective.max(1.0) {
                return Err(Error::NotMonotone {
                    iteration: iterations,
                    before: objective,
                    after: next_obj,
                });
            }
            residual = (next_obj - objective) / objective;
            history.push(next_obj);
            tf = next_tf;
            objective = next_obj.max(objective);
            if residual < config.tol {
                converged = true;
                break;
            }
        }
        return Ok(NormEstimate {
            value: objective,
            kind: EstimateKind::AscentStationary,
            iterations,
            residual: residual.max(0.0),
            converged,
            history,
            warnings: Vec::new(),
        });
    }
}

/// Convenience wrapper: assemble the discretized operator and run the ascent.
pub fn ascent_norm_for(
    op: &Operator,
    grid: &GridSpec,
    layout: &LineLayout,
    config: &AscentConfig,
) -> Result<NormEstimate> {
    let d = DiscreteOperator::assemble(op, grid, layout)?;
    let mut est = ascent_norm(&d, config, None)?;
    est.warnings = op.resolution_warnings(grid, layout.t_lo.abs().max(layout.t_hi.abs()).min(1.0));
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::SampledField;

    fn params() -> PhaseParams {
        PhaseParams::new(1, 2, 2, 1).unwrap()
    }

    #[test]
    fn lp_norm_basics() {
        let grid = GridSpec::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), 7, 5, 2).unwrap();
        assert_eq!(lp_norm(&SampledField::zeros(grid), 3.0), 0.0);
        let ones = SampledField::from_fn(grid, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        for p in [1.0, 2.0, 6.0, 7.5] {
            assert!((lp_norm(&ones, p) - 1.0).abs() < 1e-14);
        }
        assert_eq!(lp_norm(&ones, f64::INFINITY), 1.0);
    }

    #[test]
    fn lp_norm_matches_direct_sum() {
        let grid = GridSpec::default_for(9, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<Complex64> = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let field = SampledField::from_values(grid, values.clone()).unwrap();
        let direct = (values.iter().map(|v| v.re * v.re + v.im * v.im).sum::<f64>() * grid.cell_area()).sqrt();
        assert!((lp_norm(&field, 2.0) - direct).abs() <= 1e-13 * direct);
        let c = Complex64::new(-0.3, 1.7);
        let scaled = field.scale(c);
        for p in [1.0, 2.0, 6.0] {
            let a = lp_norm(&scaled, p);
            let b = c.norm() * lp_norm(&field, p);
            assert!((a - b).abs() <= 1e-13 * b);
        }
    }

    #[test]
    #[should_panic]
    fn lp_norm_rejects_small_p() {
        let grid = GridSpec::default_for(2, 2).unwrap();
        lp_norm(&SampledField::zeros(grid), 0.5);
    }

    #[test]
    fn witness_at_zero_frequency() {
        let op = Operator::new(params(), 0.0);
        let grid = witness_grid(&params(), 0.0, 24, 2.0).unwrap();
        let est = witness_ratio(&op, 6.0, &grid).unwrap();
        assert!(est.value > 0.0 && est.value.is_finite());
        assert!(est.converged);
    }

    #[test]
    fn witness_requires_box_resolution() {
        let op = Operator::new(params(), 256.0);
        let grid = GridSpec::default_for(16, 2).unwrap();
        assert!(matches!(witness_ratio(&op, 6.0, &grid), Err(Error::Resolution(_))));
        let tiny = GridSpec::square(1e-4, 16, 2).unwrap();
        assert!(matches!(witness_ratio(&op, 6.0, &tiny), Err(Error::Resolution(_))));
    }

    #[test]
    fn witness_self_convergence() {
        let p = params();
        let op = Operator::new(p, 256.0);
        let coarse = witness_ratio(&op, 6.0, &witness_grid(&p, 256.0, 32, 2.0).unwrap()).unwrap();
        let fine = witness_ratio(&op, 6.0, &witness_grid(&p, 256.0, 64, 2.0).unwrap()).unwrap();
        assert!((coarse.value - fine.value).abs() < 0.01 * fine.value);
    }

    #[test]
    fn witness_invariant_under_frequency_sign() {
        let p = params();
        let grid = witness_grid(&p, 100.0, 16, 2.0).unwrap();
        let a = witness_ratio(&Operator::new(p, 100.0), 6.0, &grid).unwrap();
        let b = witness_ratio(&Operator::new(p, -100.0), 6.0, &grid).unwrap();
        assert!((a.value - b.value).abs() <= 1e-12 * a.value);
    }

    #[test]
    fn ascent_rejects_odd_p() {
        let op = Operator::new(params(), 1.0);
        let grid = GridSpec::default_for(3, 4).unwrap();
        let d = DiscreteOperator::assemble(&op, &grid, &grid.line_layout()).unwrap();
        let cfg = AscentConfig { p: 3, ..AscentConfig::default() };
        assert!(ascent_norm(&d, &cfg, None).is_err());
    }

    #[test]
    fn ascent_restarts_from_zero_start() {
        let op = Operator::new(params(), 3.0);
        let grid = GridSpec::default_for(4, 8).unwrap();
        let d = DiscreteOperator::assemble(&op, &grid, &grid.line_layout()).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); d.cols()];
        let est = ascent_norm(&d, &AscentConfig::default(), Some(&zero)).unwrap();
        assert!(est.value > 0.0);
    }

    #[test]
    fn ascent_discrete_adjoint_is_exact() {
        let op = Operator::new(params(), 7.0);
        let grid = GridSpec::default_for(5, 9).unwrap();
        let d = DiscreteOperator::assemble(&op, &grid, &grid.line_layout()).unwrap();
        let f = random_start(d.cols(), 4);
        let g = random_start(d.rows(), 5);
        let lhs: Complex64 = d.apply(&f).iter().zip(&g).map(|(a, b)| a * b.conj()).sum::<Complex64>() * grid.cell_area();
        let rhs: Complex64 = f.iter().zip(&d.apply_adjoint(&g)).map(|(a, b)| a * b.conj()).sum::<Complex64>() * d.layout.h();
        assert!((lhs - rhs).norm() < 1e-13 * lhs.norm().max(1.0));
    }

    #[test]
    fn ascent_first_objective_is_the_witness_formula() {
        let p = params();
        let lambda = 20.0;
        let op = Operator::new(p, lambda);
        let grid = witness_grid(&p, lambda, 16, 2.0).unwrap();
        let layout = LineLayout { t_lo: -1.0, t_hi: 1.0, n: 4000 };
        let d = DiscreteOperator::assemble(&op, &grid, &layout).unwrap();
        let chi: Vec<Complex64> = layout
            .nodes()
            .map(|t| Complex64::new(if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let cfg = AscentConfig { p: 6, max_iter: 30, tol: 1e-10, seed: 1 };
        let est = ascent_norm(&d, &cfg, Some(&chi)).unwrap();
        assert!((est.history[0] - d.ratio(&chi, 6.0)).abs() <= 1e-14 * est.history[0]);
        let w = witness_ratio(&op, 6.0, &grid).unwrap();
        assert!((est.history[0] - w.value).abs() < 2e-3 * w.value);
        assert!(est.value >= w.value * (1.0 - 2e-3));
        for pair in est.history.windows(2) {
            assert!(pair[1] >= pair[0] - MONOTONE_SLACK * pair[0].max(1.0));
        }
    }
}
