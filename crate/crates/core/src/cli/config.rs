//! TOML run configuration.
//!
//! ```toml
//! [system]
//! n = 1
//! params = ["a", "b"]
//!
//! [system.a0]
//! base = [[0.0]]
//! coeffs = [[[1.0]], [[0.0]]]
//!
//! [[system.delayed]]
//! delay = [1, 10]
//! base = [[0.0]]
//! coeffs = [[[0.0]], [[1.0]]]
//!
//! [discretization]
//! m = 2
//! samples_per_smallest_delay = 1
//! window = 2          # optional
//! dt = [1, 100]       # optional, overrides samples_per_smallest_delay
//!
//! [solver]
//! tol = 1e-6
//! max_iter = 2000
//! form = "paper"
//!
//! [solver.box]
//! lower = [-1.0, -1.0]
//! upper = [1.0, 1.0]
//!
//! [oracle]            # optional
//! enabled = true
//! simulate = true
//! roots = true
//! dt = [1, 200]       # optional
//! horizon = 5.0       # optional
//! theta = [0.0, -1.0] # optional evaluation point for `simulate`
//! scan_re = [-5.0, 2.0]
//! scan_im = [0.0, 125.0]
//! scan_grid = [80, 160]
//!
//! [sweep]             # optional
//! params = [0, 1]
//! ranges = [[-2.0, 2.0], [-2.0, 2.0]]
//! counts = [21, 21]
//! ```
//!
//! [`emit_config`] writes the canonical form: every defaulted field filled in,
//! fixed key order. Loading canonical text and emitting it again is the identity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::GapForm;
use crate::model::{rational, AffineMatrix, DdeSystem, Rational};
use crate::oracle::{OracleOptions, ScanBox};
use crate::sdp::{AnalyzeOptions, ParamBox, SolverOptions};
use crate::stencil::Stencil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub base: Vec<Vec<f64>>,
    #[serde(default)]
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedSpec {
    pub delay: [i64; 2],
    pub base: Vec<Vec<f64>>,
    #[serde(default)]
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n: usize,
    #[serde(default)]
    pub params: Vec<String>,
    pub a0: MatrixSpec,
    pub delayed: Vec<DelayedSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_samples")]
    pub samples_per_smallest_delay: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<[i64; 2]>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            m: default_m(),
            samples_per_smallest_delay: default_samples(),
            window: None,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_form")]
    pub form: String,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub param_box: Option<BoxSpec>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            form: default_form(),
            param_box: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "yes")]
    pub simulate: bool,
    #[serde(default = "yes")]
    pub roots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_re: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_im: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_grid: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub params: [usize; 2],
    pub ranges: [[f64; 2]; 2],
    pub counts: [usize; 2],
}

/// Raw configuration as written; see [`RunConfig`] for the validated form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_m() -> usize {
    2
}
fn default_samples() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    2000
}
fn default_form() -> String {
    "paper".into()
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub params: [usize; 2],
    pub ranges: [[f64; 2]; 2],
    pub counts: [usize; 2],
}

impl SweepPlan {
    /// Grid values along axis `k`; a single point sits at the range start.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        let [lo, hi] = self.ranges[k];
        let n = self.counts[k];
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|i| (lo * (n - 1 - i) as f64 + hi * i as f64) / (n - 1) as f64)
            .collect()
    }
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: ConfigFile,
    pub param_names: Vec<String>,
    pub system: DdeSystem,
    pub stencil: Stencil,
    pub analyze: AnalyzeOptions,
    pub param_box: ParamBox,
    pub oracle: Option<OracleOptions>,
    pub theta_eval: Option<Vec<f64>>,
    pub sweep: Option<SweepPlan>,
}

impl RunConfig {
    pub fn form(&self) -> GapForm {
        self.analyze.form
    }

    pub fn set_form(&mut self, form: GapForm) {
        self.analyze.form = form;
        self.raw.solver.form = form.as_str().to_string();
    }

    /// Oracle settings used by the commands that always consult the oracles.
    pub fn oracle_or_default(&self) -> OracleOptions {
        self.oracle.clone().unwrap_or_default()
    }
}

pub fn load_config(text: &str) -> Result<RunConfig> {
    let raw: ConfigFile = toml::from_str(text).map_err(|e| {
        let loc = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            }
            None => "document".into(),
        };
        Error::config(loc, e.message().to_string())
    })?;
    validate(raw)
}

pub fn emit_config(cfg: &RunConfig) -> String {
    emit_raw(&cfg.raw)
}

pub fn emit_raw(raw: &ConfigFile) -> String {
    toml::to_string(raw).expect("config serializes")
}

fn matrix(field: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(field, format!("expected a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn affine(field: &str, base: &[Vec<f64>], coeffs: &[Vec<Vec<f64>>], n: usize, p: usize) -> Result<AffineMatrix> {
    let base = matrix(&format!("{field}.base"), base, n)?;
    let coeffs = if coeffs.is_empty() {
        vec![DMatrix::zeros(n, n); p]
    } else if coeffs.len() != p {
        return Err(Error::config(
            format!("{field}.coeffs"),
            format!("expected {p} coefficient matrices, got {}", coeffs.len()),
        ));
    } else {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| matrix(&format!("{field}.coeffs[{i}]"), c, n))
            .collect::<Result<Vec<_>>>()?
    };
    AffineMatrix::new(base, coeffs)
}

fn exact(field: &str, pair: [i64; 2]) -> Result<Rational> {
    if pair[1] == 0 {
        return Err(Error::config(field, "zero denominator"));
    }
    let r = rational(pair[0], pair[1])?;
    if *r.numer() <= 0 {
        return Err(Error::config(field, "must be > 0"));
    }
    Ok(r)
}

fn validate(raw: ConfigFile) -> Result<RunConfig> {
    let sys = &raw.system;
    let n = sys.n;
    if n == 0 {
        return Err(Error::config("system.n", "must be >= 1"));
    }
    let p = sys.params.len();
    let a0 = affine("system.a0", &sys.a0.base, &sys.a0.coeffs, n, p)?;
    if sys.delayed.is_empty() {
        return Err(Error::config("system.delayed", "at least one delayed term is required"));
    }
    let delayed = sys
        .delayed
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let field = format!("system.delayed[{i}]");
            let tau = exact(&format!("{field}.delay"), d.delay)?;
            Ok((tau, affine(&field, &d.base, &d.coeffs, n, p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let system = DdeSystem::new(a0, delayed)?;

    let disc = &raw.discretization;
    let stencil = Stencil::current_point(disc.m).map_err(|e| Error::config("discretization.m", e.to_string()))?;
    if disc.samples_per_smallest_delay == 0 {
        return Err(Error::config("discretization.samples_per_smallest_delay", "must be >= 1"));
    }
    let dt = disc
        .dt
        .map(|pair| exact("discretization.dt", pair))
        .transpose()?;

    let solver = &raw.solver;
    let form: GapForm = solver
        .form
        .parse()
        .map_err(|e: Error| Error::config("solver.form", e.to_string()))?;
    if !(solver.tol > 0.0) {
        return Err(Error::config("solver.tol", "must be > 0"));
    }
    if solver.max_iter == 0 {
        return Err(Error::config("solver.max_iter", "must be >= 1"));
    }
    let bx = solver
        .param_box
        .as_ref()
        .ok_or_else(|| Error::config("solver.box", "missing parameter box"))?;
    if bx.lower.len() != p || bx.upper.len() != p {
        return Err(Error::config(
            "solver.box",
            format!("bounds must have length {p} (one per parameter)"),
        ));
    }
    let param_box = ParamBox::new(bx.lower.clone(), bx.upper.clone())
        .map_err(|e| Error::config("solver.box", e.to_string()))?;

    let (oracle, theta_eval) = match &raw.oracle {
        None => (None, None),
        Some(o) => {
            let scan = match (o.scan_re, o.scan_im, o.scan_grid) {
                (None, None, None) => None,
                (re, im, grid) => {
                    let default = ScanBox::default_for(&system);
                    let re = re.map(|[a, b]| (a, b)).unwrap_or(default.re);
                    let im = im.map(|[a, b]| (a, b)).unwrap_or(default.im);
                    let grid = grid.map(|[a, b]| (a, b)).unwrap_or(default.grid);
                    if !(re.0 < re.1) || !(im.0 < im.1) {
                        return Err(Error::config("oracle.scan_re", "ranges must be increasing"));
                    }
                    if grid.0 < 20 || grid.1 < 20 {
                        return Err(Error::config("oracle.scan_grid", "grid must be at least 20x20"));
                    }
                    Some(ScanBox { re, im, grid })
                }
            };
            if let Some(h) = o.horizon {
                if !(h > 0.0) {
                    return Err(Error::config("oracle.horizon", "must be > 0"));
                }
            }
            if let Some(t) = &o.theta {
                if t.len() != p {
                    return Err(Error::config("oracle.theta", format!("expected {p} values")));
                }
            }
            let opts = OracleOptions {
                dt: o.dt.map(|pair| exact("oracle.dt", pair)).transpose()?,
                horizon: o.horizon,
                scan,
                simulate: o.simulate,
                roots: o.roots,
            };
            (o.enabled.then_some(opts), o.theta.clone())
        }
    };

    let sweep = match &raw.sweep {
        None => None,
        Some(s) => {
            if s.params.iter().any(|&i| i >= p) || s.params[0] == s.params[1] {
                return Err(Error::config(
                    "sweep.params",
                    format!("need two distinct indices below {p}"),
                ));
            }
            if s.counts.contains(&0) {
                return Err(Error::config("sweep.counts", "must be >= 1"));
            }
            if s.ranges.iter().flatten().any(|v| !v.is_finite()) || s.ranges.iter().any(|r| r[0] > r[1]) {
                return Err(Error::config("sweep.ranges", "need finite [low, high] with low <= high"));
            }
            Some(SweepPlan {
                params: s.params,
                ranges: s.ranges,
                counts: s.counts,
            })
        }
    };

    let analyze = AnalyzeOptions {
        samples_per_smallest_delay: disc.samples_per_smallest_delay,
        dt,
        window: disc.window,
        form,
        solver: SolverOptions {
            tol: solver.tol,
            max_iter: solver.max_iter,
        },
        oracle: oracle.clone(),
    };

    let param_names = raw.system.params.clone();
    Ok(RunConfig {
        raw,
        param_names,
        system,
        stencil,
        analyze,
        param_box,
        oracle,
        theta_eval,
        sweep,
    })
}
