use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use osc_core::phase::PhaseParams;
use osc_core::quad::QuadratureSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Integrate,
    Kernel,
    Norm,
    DecaySweep,
    VdcCheck,
    DeltaAlpha,
    EndpointL2,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Integrate => "integrate",
            Command::Kernel => "kernel",
            Command::Norm => "norm",
            Command::DecaySweep => "decay-sweep",
            Command::VdcCheck => "vdc-check",
            Command::DeltaAlpha => "delta-alpha",
            Command::EndpointL2 => "endpoint-l2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Witness,
    Ascent,
}

/// Every setting, each optional. Used both for config files and for flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[arg(skip)]
    pub command: Option<Command>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub l: Option<u32>,
    /// Target Lebesgue exponent (defaults to 2k + 2).
    #[arg(long)]
    pub p: Option<f64>,
    /// Single λ for integrate, kernel and norm.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub num_lambdas: Option<usize>,
    /// Cells per axis of the (x, y) grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Nodes on the t-line (ascent estimator).
    #[arg(long)]
    pub nt: Option<usize>,
    /// Witness and endpoint window, in units of the λ-box.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    #[arg(long)]
    pub tol_slope: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long)]
    pub max_panels: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub iter_tol: Option<f64>,
    /// Random tuples per λ (vdc-check).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_im: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub num_t: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<f64>,
    /// Integration interval for `integrate`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    /// Reads a TOML file, or JSON if the extension is `.json`. A JSON file
    /// may be a full report, in which case its `config` field is used.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let value = match value.get("config") {
                Some(c) if value.get("command").is_some() => c.clone(),
                _ => value,
            };
            Ok(serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?)
        } else {
            Ok(toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?)
        }
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &Settings) {
        overlay!(self, other; command, m, n, k, l, p, lambda, lambda_min, lambda_max, num_lambdas,
            grid, nt, window, estimator, tol_slope, seed, jobs, out, abs_tol, rel_tol, max_depth,
            max_panels, max_iter, iter_tol, samples, alpha_re, alpha_im, t_min, t_max, num_t,
            x, y, u, v, a, b);
    }

    /// Fills every unset field with its default and checks the result.
    pub fn resolve(&self) -> anyhow::Result<Resolved> {
        let Some(command) = self.command else {
            bail!("no command given (pass one on the command line or set `command` in the config)");
        };
        let m = self.m.unwrap_or(1);
        let n = self.n.unwrap_or(2);
        let k = self.k.unwrap_or(2);
        let l = self.l.unwrap_or(1);
        let params = PhaseParams::new(m, n, k, l)?;
        let (lmin_default, lmax_default, count_default) = match command {
            Command::EndpointL2 => (16.0, 512.0, 6),
            Command::VdcCheck => (100.0, 10_000.0, 3),
            _ => (64.0, 16_384.0, 9),
        };
        let grid_default = match command {
            Command::Norm if self.estimator == Some(EstimatorKind::Ascent) => 8,
            Command::DecaySweep if self.estimator == Some(EstimatorKind::Ascent) => 8,
            _ => 48,
        };
        let s = Settings {
            command: Some(command),
            m: Some(m),
            n: Some(n),
            k: Some(k),
            l: Some(l),
            p: Some(self.p.unwrap_or(f64::from(params.p()))),
            lambda: Some(self.lambda.unwrap_or(100.0)),
            lambda_min: Some(self.lambda_min.unwrap_or(lmin_default)),
            lambda_max: Some(self.lambda_max.unwrap_or(lmax_default)),
            num_lambdas: Some(self.num_lambdas.unwrap_or(count_default)),
            grid: Some(self.grid.unwrap_or(grid_default)),
            nt: Some(self.nt.unwrap_or(32)),
            window: Some(self.window.unwrap_or(2.0)),
            estimator: Some(self.estimator.unwrap_or(EstimatorKind::Witness)),
            tol_slope: Some(self.tol_slope.unwrap_or(osc_core::decay::default_tol_slope(&params))),
            seed: Some(self.seed.unwrap_or(0)),
            jobs: Some(self.jobs.unwrap_or(0)),
            out: Some(self.out.clone().unwrap_or_else(|| PathBuf::from("out"))),
            abs_tol: Some(self.abs_tol.unwrap_or(QuadratureSpec::default().abs_tol)),
            rel_tol: Some(self.rel_tol.unwrap_or(QuadratureSpec::default().rel_tol)),
            max_depth: Some(self.max_depth.unwrap_or(QuadratureSpec::default().max_depth)),
            max_panels: Some(self.max_panels.unwrap_or(QuadratureSpec::default().max_panels)),
            max_iter: Some(self.max_iter.unwrap_or(2000)),
            iter_tol: Some(self.iter_tol.unwrap_or(1e-12)),
            samples: Some(self.samples.unwrap_or(200)),
            alpha_re: Some(self.alpha_re.unwrap_or(1.0)),
            alpha_im: Some(self.alpha_im.unwrap_or(0.0)),
            t_min: Some(self.t_min.unwrap_or(2.0)),
            t_max: Some(self.t_max.unwrap_or(1024.0)),
            num_t: Some(self.num_t.unwrap_or(10)),
            x: Some(self.x.unwrap_or(1.0)),
            y: Some(self.y.unwrap_or(1.0)),
            u: Some(self.u.unwrap_or(0.0)),
            v: Some(self.v.unwrap_or(0.0)),
            a: Some(self.a.unwrap_or(0.0)),
            b: Some(self.b.unwrap_or(1.0)),
        };
        let r = Resolved { command, params, settings: s };
        r.check()?;
        Ok(r)
    }
}

/// Fully resolved settings.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub command: Command,
    pub params: PhaseParams,
    pub settings: Settings,
}

macro_rules! getter {
    ($($f:ident: $t:ty),*) => {
        $( pub fn $f(&self) -> $t { self.settings.$f.clone().expect("resolved") } )*
    };
}

impl Resolved {
    getter!(p: f64, lambda: f64, lambda_min: f64, lambda_max: f64, num_lambdas: usize, grid: usize,
        nt: usize, window: f64, estimator: EstimatorKind, tol_slope: f64, seed: u64, jobs: usize,
        max_iter: usize, iter_tol: f64, samples: usize, alpha_re: f64, alpha_im: f64,
        t_min: f64, t_max: f64, num_t: usize, x: f64, y: f64, u: f64, v: f64, a: f64, b: f64);

    pub fn quad(&self) -> QuadratureSpec {
        let s = &self.settings;
        QuadratureSpec {
            abs_tol: s.abs_tol.expect("resolved"),
            rel_tol: s.rel_tol.expect("resolved"),
            max_depth: s.max_depth.expect("resolved"),
            max_panels: s.max_panels.expect("resolved"),
        }
    }

    fn check(&self) -> anyhow::Result<()> {
        self.quad().validate()?;
        if !(self.p() >= 1.0) {
            bail!("p must be >= 1, got {}", self.p());
        }
        if !(self.lambda() >= 0.0 && self.lambda().is_finite()) {
            bail!("lambda must be finite and >= 0");
        }
        if !(self.lambda_min() >= 1.0) {
            bail!("lambda_min must be >= 1, got {}", self.lambda_min());
        }
        if !(self.lambda_max() > self.lambda_min()) {
            bail!("lambda_max must exceed lambda_min");
        }
        if self.num_lambdas() < 2 || self.grid() < 2 || self.nt() < 2 || self.num_t() < 2 {
            bail!("counts (num_lambdas, grid, nt, num_t) must be >= 2");
        }
        if !(self.window() > 0.0) {
            bail!("window must be positive");
        }
        if !(self.t_min() > 0.0 && self.t_max() > self.t_min()) {
            bail!("need 0 < t_min < t_max");
        }
        if !(self.b() > self.a()) {
            bail!("integration interval needs a < b");
        }
        if self.samples() == 0 {
            bail!("samples must be >= 1");
        }
        Ok(())
    }

    /// Geometric sequence `lambda_min … lambda_max`.
    pub fn lambdas(&self) -> Vec<f64> {
        geometric(self.lambda_min(), self.lambda_max(), self.num_lambdas())
    }

    pub fn ts(&self) -> Vec<f64> {
        geometric(self.t_min(), self.t_max(), self.num_t())
    }
}

pub fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo * (r * i as f64).exp() })
        .collect()
}
