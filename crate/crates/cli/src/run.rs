use osc_core::analytic::{delta_alpha_sweep, l2_endpoint_check, AlphaParam, EndpointConfig};
use osc_core::decay::{
    compare_with_theory, fit_exponent, run_sweep, DecayReport, DecaySweepConfig, Estimator, LambdaSchedule,
    SweepRow, SweepTable,
};
use osc_core::operator::Operator;
use osc_core::phase::CutoffSpec;
use osc_core::quad::integrate_oscillatory;
use osc_core::{Complex64, Error};
use serde_json::{json, Value};

use crate::config::{Command, EstimatorKind, Resolved};
use crate::svg::{Line, LogLogPlot};

/// Everything a command produces.
pub struct Artifacts {
    pub csv: Vec<u8>,
    pub result: Value,
    pub plot: Option<LogLogPlot>,
}

pub fn execute(cfg: &Resolved) -> Result<Artifacts, Error> {
    match cfg.command {
        Command::Integrate => integrate(cfg),
        Command::Kernel => kernel(cfg),
        Command::Norm => norm(cfg),
        Command::DecaySweep => decay_sweep(cfg),
        Command::VdcCheck => vdc(cfg),
        Command::DeltaAlpha => delta_alpha(cfg),
        Command::EndpointL2 => endpoint(cfg),
    }
}

fn operator(cfg: &Resolved, lambda: f64) -> Operator {
    Operator::new(cfg.params, lambda).with_quad(cfg.quad())
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>, Error>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), Error>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn integrate(cfg: &Resolved) -> Result<Artifacts, Error> {
    let (x, y, lambda) = (cfg.x(), cfg.y(), cfg.lambda());
    let params = cfg.params;
    let r = integrate_oscillatory(
        |t| params.eval(x, y, t),
        |_| Complex64::new(1.0, 0.0),
        cfg.a(),
        cfg.b(),
        lambda,
        &cfg.quad(),
    )?;
    let csv = csv_bytes(&["lambda", "re", "im", "error", "evaluations", "converged"], |w| {
        w.serialize((lambda, r.value.re, r.value.im, r.error, r.evaluations, r.converged))?;
        Ok(())
    })?;
    Ok(Artifacts {
        csv,
        result: json!({
            "value": {"re": r.value.re, "im": r.value.im},
            "error": r.error,
            "evaluations": r.evaluations,
            "panels": r.panels,
            "converged": r.converged,
        }),
        plot: None,
    })
}

fn kernel(cfg: &Resolved) -> Result<Artifacts, Error> {
    let (x, y, u, v, lambda) = (cfg.x(), cfg.y(), cfg.u(), cfg.v(), cfg.lambda());
    let r = operator(cfg, lambda).kernel(x, y, u, v)?;
    let csv = csv_bytes(&["x", "y", "u", "v", "lambda", "re", "im", "error", "converged"], |w| {
        w.serialize((x, y, u, v, lambda, r.value.re, r.value.im, r.error, r.converged))?;
        Ok(())
    })?;
    Ok(Artifacts {
        csv,
        result: json!({
            "value": {"re": r.value.re, "im": r.value.im},
            "modulus": r.value.norm(),
            "error": r.error,
            "converged": r.converged,
        }),
        plot: None,
    })
}

fn sweep_config(cfg: &Resolved) -> DecaySweepConfig {
    let estimator = match cfg.estimator() {
        EstimatorKind::Witness => Estimator::Witness {
            cells: cfg.grid(),
            window: cfg.window(),
        },
        EstimatorKind::Ascent => Estimator::Ascent {
            cells: cfg.grid(),
            nt: cfg.nt(),
            max_iter: cfg.max_iter(),
            tol: cfg.iter_tol(),
        },
    };
    DecaySweepConfig {
        params: cfg.params,
        p: cfg.p(),
        schedule: LambdaSchedule {
            min: cfg.lambda_min(),
            max: cfg.lambda_max(),
            count: cfg.num_lambdas(),
        },
        estimator,
        cutoff: CutoffSpec::default(),
        quad: cfg.quad(),
        seed: cfg.seed(),
    }
}

fn norm(cfg: &Resolved) -> Result<Artifacts, Error> {
    let sweep = sweep_config(cfg);
    sweep.params.validate()?;
    let lambda = cfg.lambda();
    let estimate = sweep.estimate(lambda)?;
    let table = SweepTable {
        rows: vec![SweepRow {
            lambda,
            estimate: Some(estimate.clone()),
            error: None,
        }],
    };
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    Ok(Artifacts {
        csv,
        result: json!({ "lambda": lambda, "estimate": estimate }),
        plot: None,
    })
}

/// Line of the given slope through the centroid of `points` in log-log.
fn line_through(points: &[(f64, f64)], slope: f64) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    my - slope * mx
}

fn decay_sweep(cfg: &Resolved) -> Result<Artifacts, Error> {
    let sweep = sweep_config(cfg);
    let table = run_sweep(&sweep)?;
    let points = table.points();
    let fit = fit_exponent(&points)?;
    let theory = compare_with_theory(&fit, &cfg.params, cfg.p(), cfg.tol_slope())?;
    let report = DecayReport::new(&fit, &theory, &table);
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let plot = LogLogPlot {
        title: format!(
            "(m,n,k,l) = ({},{},{},{}), p = {}",
            cfg.params.m, cfg.params.n, cfg.params.k, cfg.params.l, cfg.p()
        ),
        x_label: "lambda".into(),
        y_label: "norm estimate".into(),
        lines: vec![
            Line {
                label: format!("fit, slope {:.4}", fit.slope),
                slope: fit.slope,
                intercept: fit.intercept,
                dashed: false,
                color: "#222222",
            },
            Line {
                label: format!("theory, slope {:.4}", -theory.delta_pred),
                slope: -theory.delta_pred,
                intercept: line_through(&points, -theory.delta_pred),
                dashed: true,
                color: "#c0392b",
            },
        ],
        points,
    };
    Ok(Artifacts {
        csv,
        result: json!({ "report": report, "theory": theory, "fit": fit, "rows": table.rows }),
        plot: Some(plot),
    })
}

fn vdc(cfg: &Resolved) -> Result<Artifacts, Error> {
    let report = osc_core::decay::vdc_check(
        &cfg.params,
        &cfg.lambdas(),
        cfg.samples(),
        cfg.seed(),
        &CutoffSpec::default(),
        &cfg.quad(),
    )?;
    let csv = csv_bytes(&["lambda", "max", "median", "q90", "q99", "samples", "failures"], |w| {
        for s in &report.per_lambda {
            w.serialize((s.lambda, s.max, s.median, s.q90, s.q99, s.samples, s.failures))?;
        }
        Ok(())
    })?;
    let points: Vec<(f64, f64)> = report.per_lambda.iter().map(|s| (s.lambda, s.max)).collect();
    let first = points.first().map(|p| p.1).unwrap_or(1.0);
    let plot = LogLogPlot {
        title: "max R = |K| (1 + lambda |x^m - u^m|)^(1/k)".into(),
        x_label: "lambda".into(),
        y_label: "max R".into(),
        lines: vec![Line {
            label: "growth limit".into(),
            slope: 0.0,
            intercept: (osc_core::decay::VDC_GROWTH_LIMIT * first).ln(),
            dashed: true,
            color: "#c0392b",
        }],
        points,
    };
    Ok(Artifacts {
        csv,
        result: serde_json::to_value(&report)?,
        plot: Some(plot),
    })
}

fn alpha(cfg: &Resolved) -> AlphaParam {
    AlphaParam::new(Complex64::new(cfg.alpha_re(), cfg.alpha_im()))
}

fn delta_alpha(cfg: &Resolved) -> Result<Artifacts, Error> {
    let a = alpha(cfg);
    let sweep = delta_alpha_sweep(&a, &cfg.ts(), &CutoffSpec::default(), &cfg.quad())?;
    let mut csv = Vec::new();
    sweep.write_csv(&mut csv)?;
    let points: Vec<(f64, f64)> = sweep.rows.iter().map(|r| (r.t, r.value.norm())).collect();
    let target = -a.alpha.re;
    let plot = LogLogPlot {
        title: format!("|delta_alpha^(t)|, alpha = {}", a.alpha),
        x_label: "t".into(),
        y_label: "modulus".into(),
        lines: vec![
            Line {
                label: format!("fit, slope {:.4}", sweep.fit.slope),
                slope: sweep.fit.slope,
                intercept: sweep.fit.intercept,
                dashed: false,
                color: "#222222",
            },
            Line {
                label: format!("theory, slope {target:.4}"),
                slope: target,
                intercept: line_through(&points, target),
                dashed: true,
                color: "#c0392b",
            },
        ],
        points,
    };
    Ok(Artifacts {
        csv,
        result: json!({
            "alpha": a.alpha,
            "prefactor": a.prefactor,
            "fit": sweep.fit,
            "target_slope": target,
            "deviation": (sweep.fit.slope - target).abs(),
            "all_converged": sweep.rows.iter().all(|r| r.converged),
        }),
        plot: Some(plot),
    })
}

fn endpoint(cfg: &Resolved) -> Result<Artifacts, Error> {
    let config = EndpointConfig {
        cells: cfg.grid(),
        window: cfg.window(),
        max_iter: cfg.max_iter(),
        tol: cfg.iter_tol(),
        seed: cfg.seed(),
    };
    let report = l2_endpoint_check(
        &cfg.params,
        &cfg.lambdas(),
        &alpha(cfg),
        &config,
        &CutoffSpec::default(),
        &cfg.quad(),
    )?;
    let csv = csv_bytes(&["lambda", "norm", "power_iterations", "converged"], |w| {
        for r in &report.rows {
            w.serialize((r.lambda, r.norm, r.power_iterations, r.converged))?;
        }
        Ok(())
    })?;
    let points: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.lambda, r.norm)).collect();
    let target = -report.target_exponent;
    let plot = LogLogPlot {
        title: "L2 norm of the Re alpha = 1 operator".into(),
        x_label: "lambda".into(),
        y_label: "operator norm".into(),
        lines: vec![
            Line {
                label: format!("fit, slope {:.4}", report.fit.slope),
                slope: report.fit.slope,
                intercept: report.fit.intercept,
                dashed: false,
                color: "#222222",
            },
            Line {
                label: format!("theory, slope {target:.4}"),
                slope: target,
                intercept: line_through(&points, target),
                dashed: true,
                color: "#c0392b",
            },
        ],
        points,
    };
    Ok(Artifacts {
        csv,
        result: serde_json::to_value(&report)?,
        plot: Some(plot),
    })
}
