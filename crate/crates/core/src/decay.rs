//! λ-sweeps, log-log exponent fits, comparison with the predicted exponents
//! and the van der Corput kernel-bound check.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{ascent_norm_for, witness_grid, witness_ratio, AscentConfig, NormEstimate};
use crate::operator::{GridSpec, LineLayout, Operator};
use crate::phase::{ipow, lower_bound_exponent, CutoffSpec, PhaseParams};
use crate::quad::QuadratureSpec;

/// Geometric schedule `min, …, max` with `count` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self {
            min: 64.0,
            max: 16384.0,
            count: 9,
        }
    }
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.min >= 1.0) {
            return Err(Error::InvalidParams(format!("lambda_min must be >= 1, got {}", self.min)));
        }
        if !(self.max > self.min) || !self.max.is_finite() {
            return Err(Error::InvalidParams("lambda_max must exceed lambda_min".into()));
        }
        if self.count < 4 {
            return Err(Error::InvalidParams("need at least 4 lambda values".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let ratio = (self.max / self.min).ln() / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min * (ratio * i as f64).exp()
                }
            })
            .collect()
    }
}

/// Norm estimator used by a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// `T_λ χ_[0,1]` on `window` times the λ-box, `cells` per axis.
    Witness { cells: usize, window: f64 },
    /// Ascent on the discretized operator over the default grid.
    Ascent {
        cells: usize,
        nt: usize,
        max_iter: usize,
        tol: f64,
    },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Witness {
            cells: 48,
            window: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySweepConfig {
    pub params: PhaseParams,
    pub p: f64,
    pub schedule: LambdaSchedule,
    pub estimator: Estimator,
    pub cutoff: CutoffSpec,
    pub quad: QuadratureSpec,
    pub seed: u64,
}

impl DecaySweepConfig {
    pub fn new(params: PhaseParams) -> Self {
        Self {
            params,
            p: f64::from(params.p()),
            schedule: LambdaSchedule::default(),
            estimator: Estimator::default(),
            cutoff: CutoffSpec::default(),
            quad: QuadratureSpec::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        self.quad.validate()?;
        if !(self.p >= 1.0) {
            return Err(Error::InvalidParams("p must be >= 1".into()));
        }
        if let Estimator::Ascent { .. } = self.estimator {
            if self.p.fract() != 0.0 || (self.p as u64) % 2 != 0 {
                return Err(Error::InvalidParams("ascent estimator requires even integer p".into()));
            }
        }
        Ok(())
    }

    /// Estimate at a single λ.
    pub fn estimate(&self, lambda: f64) -> Result<NormEstimate> {
        let op = Operator::new(self.params, lambda)
            .with_cutoff(self.cutoff)
            .with_quad(self.quad);
        match self.estimator {
            Estimator::Witness { cells, window } => {
                let grid = witness_grid(&self.params, lambda, cells, window)?;
                witness_ratio(&op, self.p, &grid)
            }
            Estimator::Ascent {
                cells,
                nt,
                max_iter,
                tol,
            } => {
                let grid = GridSpec::default_for(cells, nt)?;
                let layout = LineLayout {
                    t_lo: -1.0,
                    t_hi: 1.0,
                    n: nt,
                };
                let cfg = AscentConfig {
                    p: self.p as u32,
                    max_iter,
                    tol,
                    seed: self.seed,
                };
                ascent_norm_for(&op, &grid, &layout, &cfg)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub estimate: Option<NormEstimate>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.estimate.as_ref().is_some_and(|e| e.converged && e.value > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }

    /// `(λ, value)` for rows that produced a positive estimate.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.estimate.as_ref().map(|e| (r.lambda, e.value)))
            .filter(|&(_, v)| v > 0.0)
            .collect()
    }

    /// `lambda,estimate,kind,converged` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "estimate", "kind", "converged"])?;
        for r in &self.rows {
            match &r.estimate {
                Some(e) => w.serialize((r.lambda, e.value, e.kind.as_str(), e.converged))?,
                None => w.serialize((r.lambda, f64::NAN, "failed", false))?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates `estimator` at every λ, in parallel, keeping the input order.
/// Fails only if more than a third of the points fail.
pub fn run_sweep_with<F>(lambdas: &[f64], estimator: F) -> Result<SweepTable>
where
    F: Fn(f64) -> Result<NormEstimate> + Sync,
{
    let rows: Vec<SweepRow> = lambdas
        .par_iter()
        .map(|&lambda| match estimator(lambda) {
            Ok(e) => SweepRow {
                lambda,
                estimate: Some(e),
                error: None,
            },
            Err(err) => SweepRow {
                lambda,
                estimate: None,
                error: Some(err.to_string()),
            },
        })
        .collect();
    let table = SweepTable { rows };
    let failed = table.failures();
    if 3 * failed > lambdas.len() {
        return Err(Error::SweepFailed {
            failed,
            total: lambdas.len(),
        });
    }
    Ok(table)
}

pub fn run_sweep(config: &DecaySweepConfig) -> Result<SweepTable> {
    config.validate()?;
    run_sweep_with(&config.schedule.values(), |lambda| config.estimate(lambda))
}

/// Least-squares line through `(ln λ, ln N(λ))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

impl DecayFitResult {
    pub fn predict(&self, lambda: f64) -> f64 {
        (self.intercept + self.slope * lambda.ln()).exp()
    }
}

pub fn fit_exponent(points: &[(f64, f64)]) -> Result<DecayFitResult> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("need >= 3 points, got {}", points.len())));
    }
    if let Some(&(l, v)) = points.iter().find(|&&(l, v)| !(l > 0.0 && v > 0.0)) {
        return Err(Error::Degenerate(format!("non-positive value {v} at lambda {l}")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all lambda values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(DecayFitResult {
        slope,
        intercept,
        r_squared,
        points: points.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Empirical exponent versus the predicted and witness exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub delta_pred: f64,
    pub delta_low: f64,
    pub empirical_delta: f64,
    pub sharp: bool,
    pub tol_slope: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Default slope tolerance `0.02 (1 + δ_pred)`.
pub fn default_tol_slope(params: &PhaseParams) -> f64 {
    0.02 * (1.0 + params.delta_pred())
}

pub fn compare_with_theory(
    fit: &DecayFitResult,
    params: &PhaseParams,
    p: f64,
    tol_slope: f64,
) -> Result<TheoryReport> {
    let delta_pred = params.delta_pred();
    let delta_low = lower_bound_exponent(params, p)?;
    let emp = -fit.slope;
    let sharp = params.is_sharp() && p == f64::from(params.p());
    let mut checks = Vec::new();
    if sharp {
        let dev = (emp - delta_pred).abs();
        checks.push(Check {
            name: "sharp_equality".into(),
            passed: dev <= tol_slope,
            detail: format!("|{emp:.5} - {delta_pred:.5}| = {dev:.5} <= {tol_slope:.5}"),
        });
    } else {
        // A lower bound cannot decay more slowly than the upper bound allows,
        // and the witness certifies no more decay than its own exponent.
        checks.push(Check {
            name: "not_slower_than_upper_bound".into(),
            passed: emp >= delta_pred - tol_slope,
            detail: format!("{emp:.5} >= {delta_pred:.5} - {tol_slope:.5}"),
        });
        checks.push(Check {
            name: "witness_exponent_bound".into(),
            passed: emp <= delta_low + tol_slope,
            detail: format!("{emp:.5} <= {delta_low:.5} + {tol_slope:.5}"),
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(TheoryReport {
        delta_pred,
        delta_low,
        empirical_delta: emp,
        sharp,
        tol_slope,
        checks,
        passed,
    })
}

/// Machine-readable summary of a decay sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub delta_pred: f64,
    pub delta_low: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub sharp: bool,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub failed_points: usize,
}

impl DecayReport {
    pub fn new(fit: &DecayFitResult, theory: &TheoryReport, table: &SweepTable) -> Self {
        Self {
            delta_pred: theory.delta_pred,
            delta_low: theory.delta_low,
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r_squared,
            sharp: theory.sharp,
            pass: theory.passed,
            checks: theory.checks.clone(),
            failed_points: table.failures(),
        }
    }
}

/// Statistics of `R = |K| (1 + λ|x^m - u^m|)^{1/k}` at one λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdcStats {
    pub lambda: f64,
    pub max: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    pub samples: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdcReport {
    pub per_lambda: Vec<VdcStats>,
    /// `max_R(λ_max) / max_R(λ_min)`.
    pub growth: f64,
    pub passed: bool,
}

/// Allowed growth of `max R` across the λ list.
pub const VDC_GROWTH_LIMIT: f64 = 2.0;

/// Uniform sample of the disc of radius `r`.
fn sample_disc(rng: &mut ChaCha8Rng, r: f64) -> (f64, f64) {
    let rho = r * rng.gen::<f64>().sqrt();
    let th = std::f64::consts::TAU * rng.gen::<f64>();
    (rho * th.cos(), rho * th.sin())
}

/// Random `(x, y, u, v)` with both points inside the cutoff support.
pub fn vdc_tuples(samples: usize, seed: u64, cutoff: &CutoffSpec) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let (x, y) = sample_disc(&mut rng, cutoff.outer_radius);
            let (u, v) = sample_disc(&mut rng, cutoff.outer_radius);
            [x, y, u, v]
        })
        .collect()
}

/// `R` for one tuple, or `None` if the kernel quadrature failed.
pub fn vdc_ratio(op: &Operator, tuple: [f64; 4]) -> Option<f64> {
    let [x, y, u, v] = tuple;
    let k = op.kernel(x, y, u, v).ok().filter(|r| r.converged)?;
    let p = op.params;
    let gap = (ipow(x, p.m) - ipow(u, p.m)).abs();
    Some(k.value.norm() * (1.0 + op.lambda.abs() * gap).powf(1.0 / f64::from(p.k)))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

pub fn vdc_check(
    params: &PhaseParams,
    lambdas: &[f64],
    samples: usize,
    seed: u64,
    cutoff: &CutoffSpec,
    quad: &QuadratureSpec,
) -> Result<VdcReport> {
    params.validate()?;
    if lambdas.len() < 2 || samples == 0 {
        return Err(Error::InvalidParams("need >= 2 lambdas and >= 1 sample".into()));
    }
    let tuples = vdc_tuples(samples, seed, cutoff);
    let mut sorted_lambdas = lambdas.to_vec();
    sorted_lambdas.sort_by(f64::total_cmp);
    let per_lambda: Vec<VdcStats> = sorted_lambdas
        .iter()
        .map(|&lambda| {
            let op = Operator::new(*params, lambda).with_cutoff(*cutoff).with_quad(*quad);
            let rs: Vec<Option<f64>> = tuples.par_iter().map(|&t| vdc_ratio(&op, t)).collect();
            let mut ok: Vec<f64> = rs.iter().flatten().copied().collect();
            ok.sort_by(f64::total_cmp);
            VdcStats {
                lambda,
                max: ok.last().copied().unwrap_or(f64::NAN),
                median: quantile(&ok, 0.5),
                q90: quantile(&ok, 0.9),
                q99: quantile(&ok, 0.99),
                samples: ok.len(),
                failures: rs.len() - ok.len(),
            }
        })
        .collect();
    let first = per_lambda.first().map(|s| s.max).unwrap_or(f64::NAN);
    let last = per_lambda.last().map(|s| s.max).unwrap_or(f64::NAN);
    let growth = last / first;
    Ok(VdcReport {
        per_lambda,
        growth,
        passed: growth <= VDC_GROWTH_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::EstimateKind;

    fn fake(value: f64) -> NormEstimate {
        NormEstimate {
            value,
            kind: EstimateKind::LowerWitness,
            iterations: 0,
            residual: 0.0,
            converged: true,
            history: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn schedule_is_geometric() {
        let s = LambdaSchedule::default();
        let v = s.values();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], 64.0);
        assert_eq!(v[8], 16384.0);
        for (i, l) in v.iter().enumerate() {
            assert!((l / 2f64.powi(6 + i as i32) - 1.0).abs() < 1e-12);
        }
        assert!(LambdaSchedule { min: 0.5, max: 2.0, count: 5 }.validate().is_err());
        assert!(LambdaSchedule { min: 4.0, max: 2.0, count: 5 }.validate().is_err());
        assert!(LambdaSchedule { min: 1.0, max: 2.0, count: 3 }.validate().is_err());
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0, 2.0, 5.0, 10.0, 100.0].iter().map(|&l: &f64| (l, 3.0 * l.powf(-0.5))).collect();
        let fit = fit_exponent(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data_gives_zero_slope() {
        let pts: Vec<_> = [1.0, 2.0, 4.0, 8.0].iter().map(|&l| (l, 0.7)).collect();
        let fit = fit_exponent(&pts).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<_> = (0..9)
            .map(|i| {
                let l = 2f64.powi(6 + i);
                (l, l.powf(-0.25) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let fit = fit_exponent(&pts).unwrap();
        assert!((fit.slope + 0.25).abs() <= 0.01);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn sweep_with_constant_estimator() {
        let lambdas = LambdaSchedule { min: 2.0, max: 64.0, count: 6 }.values();
        let table = run_sweep_with(&lambdas, |_| Ok(fake(1.5))).unwrap();
        assert_eq!(table.rows.len(), 6);
        let fit = fit_exponent(&table.points()).unwrap();
        assert!(fit.slope.abs() < 1e-14);
    }

    #[test]
    fn sweep_fails_past_one_third() {
        let lambdas = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ok = run_sweep_with(&lambdas, |l| {
            if l <= 2.0 {
                Err(Error::Degenerate("x".into()))
            } else {
                Ok(fake(1.0))
            }
        });
        assert_eq!(ok.unwrap().failures(), 2);
        let bad = run_sweep_with(&lambdas, |l| {
            if l <= 3.0 {
                Err(Error::Degenerate("x".into()))
            } else {
                Ok(fake(1.0))
            }
        });
        assert!(matches!(bad, Err(Error::SweepFailed { failed: 3, total: 6 })));
    }

    #[test]
    fn witness_sweep_shape_and_determinism() {
        let params = PhaseParams::new(1, 2, 2, 1).unwrap();
        let mut cfg = DecaySweepConfig::new(params);
        cfg.schedule = LambdaSchedule { min: 16.0, max: 128.0, count: 4 };
        cfg.estimator = Estimator::Witness { cells: 16, window: 2.0 };
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows.iter().all(|r| r.ok() && r.estimate.as_ref().unwrap().value.is_finite()));
        let b = run_sweep(&cfg).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert!(String::from_utf8(ba).unwrap().starts_with("lambda,estimate,kind,converged\n"));
    }

    #[test]
    fn theory_comparison_cases() {
        let params = PhaseParams::new(1, 2, 2, 1).unwrap();
        let fit = DecayFitResult { slope: -0.252, intercept: 0.0, r_squared: 1.0, points: vec![] };
        let r = compare_with_theory(&fit, &params, 6.0, 0.02).unwrap();
        assert!(r.sharp && r.passed);

        let fit = DecayFitResult { slope: -0.25, intercept: 0.0, r_squared: 1.0, points: vec![] };
        let r = compare_with_theory(&fit, &params, 6.0, 0.0).unwrap();
        assert!(r.passed);

        let ns = PhaseParams::new(1, 1, 3, 2).unwrap();
        let fit = DecayFitResult { slope: -0.24, intercept: 0.0, r_squared: 1.0, points: vec![] };
        let r = compare_with_theory(&fit, &ns, 8.0, 0.02).unwrap();
        assert!(!r.sharp);
        assert_eq!(r.delta_pred, 0.1875);
        assert_eq!(r.delta_low, 0.25);
        assert!(r.checks.iter().all(|c| c.name != "sharp_equality"));
        assert_eq!(r.checks.len(), 2);
    }

    #[test]
    fn vdc_diagonal_tuple_is_frequency_independent() {
        let params = PhaseParams::new(1, 2, 2, 1).unwrap();
        let t = [0.3, -0.2, 0.3, -0.2];
        let a = vdc_ratio(&Operator::new(params, 10.0), t).unwrap();
        let b = vdc_ratio(&Operator::new(params, 1e4), t).unwrap();
        assert!((a - b).abs() < 1e-12);
        // λ = 0: R = |K| bounded by ∫ψψ dt
        let op0 = Operator::new(params, 0.0);
        let t2 = [0.3, -0.2, -0.1, 0.4];
        let r0 = vdc_ratio(&op0, t2).unwrap();
        let c = CutoffSpec::default();
        let bound = crate::quad::integrate(
            |s| num_complex::Complex64::new(c.psi(0.3, -0.2, s) * c.psi(-0.1, 0.4, s), 0.0),
            -1.0,
            1.0,
            &QuadratureSpec::default(),
        )
        .unwrap()
        .value
        .re;
        assert!(r0 <= bound + 1e-12);
    }

    #[test]
    fn vdc_swap_symmetry() {
        let params = PhaseParams::new(1, 2, 2, 1).unwrap();
        let op = Operator::new(params, 500.0);
        for t in vdc_tuples(10, 4, &CutoffSpec::default()) {
            let a = vdc_ratio(&op, t).unwrap();
            let b = vdc_ratio(&op, [t[2], t[3], t[0], t[1]]).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }
}
