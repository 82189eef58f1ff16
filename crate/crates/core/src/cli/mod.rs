//! Command implementations behind the `dde-stab` binary.
//!
//! Every command reads a TOML config (see [`config`]), prints a human-readable
//! summary, and may write files into the output directory. Exit codes:
//! 0 success or stabilizable, 1 negative verdict, 2 usage or config error,
//! 3 numerical failure.

pub mod config;
pub mod sweep;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::disc::Discretization;
use crate::error::{Error, Result};
use crate::lmi::{classify_by_theorem, gram_gap, GapForm};
use crate::model::rational_to_f64;
use crate::oracle::simulate;
use crate::sdp::{analyze, discretize, StabilityCase, StabilityVerdict};
use crate::verify::{run_suite, Target};

pub use config::{emit_config, load_config, RunConfig};
pub use sweep::{run_sweep, to_csv, to_svg, CellVerdict, SweepCell, SweepResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Weights,
    Discretize,
    Classify,
    Analyze,
    Sweep,
    Simulate,
    Verify,
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "weights" => Command::Weights,
            "discretize" => Command::Discretize,
            "classify" => Command::Classify,
            "analyze" => Command::Analyze,
            "sweep" => Command::Sweep,
            "simulate" => Command::Simulate,
            "verify" => Command::Verify,
            other => return Err(Error::InvalidArgument(format!("unknown command `{other}`"))),
        })
    }
}

/// Parsed command line.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub form: Option<GapForm>,
}

/// Exit code for an error: 3 for failures of the numerics, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SingularSystem(_)
        | Error::StepSingular(_)
        | Error::LemmaViolation(_)
        | Error::Asymmetric(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Runs one command, writing the summary to `out` and errors to `err`.
pub fn run(inv: &Invocation, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = std::fs::read_to_string(&inv.config)
        .map_err(|e| Error::config("--config", format!("{}: {e}", inv.config.display())))
        .and_then(|text| load_config(&text))
        .and_then(|mut cfg| {
            if let Some(form) = inv.form {
                cfg.set_form(form);
            }
            dispatch(inv, &cfg)
        });
    match result {
        Ok(o) => {
            let _ = out.write_all(o.text.as_bytes());
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Text and exit code of a finished command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub text: String,
}

fn dispatch(inv: &Invocation, cfg: &RunConfig) -> Result<Outcome> {
    match inv.command {
        Command::Weights => cmd_weights(cfg),
        Command::Discretize => cmd_discretize(cfg),
        Command::Classify => cmd_classify(cfg),
        Command::Analyze => cmd_analyze(cfg, &inv.out),
        Command::Sweep => cmd_sweep(cfg, &inv.out),
        Command::Simulate => cmd_simulate(cfg, &inv.out, inv.seed),
        Command::Verify => cmd_verify(cfg, &inv.out, inv.seed),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        let _ = writeln!(s, "  {}", fmt_vec(&row));
    }
    s
}

pub fn cmd_weights(cfg: &RunConfig) -> Result<Outcome> {
    let st = &cfg.stencil;
    let mut t = String::new();
    let _ = writeln!(t, "stencil m = {} ({:?})", st.len(), st.kind());
    let offsets: Vec<f64> = st.offsets().iter().map(|&o| o as f64).collect();
    let _ = writeln!(t, "offsets  {}", fmt_vec(&offsets));
    let _ = writeln!(t, "weights  {}", fmt_vec(st.weights()));
    let _ = writeln!(t, "moments  {}", fmt_vec(&st.moments()));
    let _ = writeln!(t, "reduced-gap class: {}", classify_by_theorem(st.weights())?.as_str());
    Ok(Outcome {
        code: EXIT_OK,
        text: t,
    })
}

pub fn cmd_discretize(cfg: &RunConfig) -> Result<Outcome> {
    let d: Discretization = discretize(&cfg.system, &cfg.stencil, &cfg.analyze)?;
    let mut t = String::new();
    let _ = writeln!(t, "dt = {} ({})", d.dt_exact(), d.dt());
    let _ = writeln!(t, "window L = {}, lags = {:?}, size = {}", d.window(), d.lags(), d.size());
    let _ = write!(t, "D =\n{}", fmt_matrix(d.d()));
    let _ = write!(t, "D_r =\n{}", fmt_matrix(d.dr()));
    let _ = write!(t, "B base =\n{}", fmt_matrix(d.b().base()));
    for (p, c) in d.b().coeffs().iter().enumerate() {
        let _ = write!(t, "B coeff {} =\n{}", name(cfg, p), fmt_matrix(c));
    }
    let _ = write!(t, "A base =\n{}", fmt_matrix(d.a().base()));
    for (p, c) in d.a().coeffs().iter().enumerate() {
        let _ = write!(t, "A coeff {} =\n{}", name(cfg, p), fmt_matrix(c));
    }
    Ok(Outcome {
        code: EXIT_OK,
        text: t,
    })
}

fn name(cfg: &RunConfig, p: usize) -> String {
    cfg.param_names.get(p).cloned().unwrap_or_else(|| format!("p{p}"))
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<Outcome> {
    let d = discretize(&cfg.system, &cfg.stencil, &cfg.analyze)?;
    let g = gram_gap(&d, cfg.form());
    let mut t = String::new();
    let _ = writeln!(t, "form: {}", g.form.as_str());
    let _ = writeln!(t, "window L = {}, dt = {}", d.window(), d.dt());
    let _ = writeln!(t, "class of Q: {}", g.class.as_str());
    let _ = writeln!(t, "eigenvalues of Q: {}", fmt_vec(g.eigenvalues.as_slice()));
    let _ = writeln!(t, "null space dimension: {}", g.null_basis.ncols());
    if cfg.form() == GapForm::Paper && d.window() % (cfg.stencil.len() - 1) == 0 {
        let th = classify_by_theorem(cfg.stencil.weights())?;
        let _ = writeln!(t, "reduced-gap class: {}", th.as_str());
    }
    Ok(Outcome {
        code: EXIT_OK,
        text: t,
    })
}

#[derive(Serialize)]
struct AnalyzeRecord {
    case: String,
    stabilizable: bool,
    full_class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem_class: Option<String>,
    dt: f64,
    window: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tstar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finite_dt_check: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleRecord>,
}

#[derive(Serialize)]
struct OracleRecord {
    rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    decay_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rightmost_real: Option<f64>,
    oracles_agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline_agrees: Option<bool>,
}

fn record(v: &StabilityVerdict, tol: f64) -> AnalyzeRecord {
    AnalyzeRecord {
        case: v.case.as_str().into(),
        stabilizable: v.stabilizable(tol),
        full_class: v.full_class.as_str().into(),
        theorem_class: v.theorem_class.map(|c| c.as_str().into()),
        dt: v.dt,
        window: v.window,
        tstar: v.tstar,
        theta_star: v.theta_star.clone(),
        upper_bound: v.upper_bound,
        certified: v.certified,
        finite_dt_check: v.finite_dt_check,
        oracle: v.oracle.as_ref().map(|o| OracleRecord {
            rho: o.rho,
            decay_ratio: o.decay_ratio,
            rightmost_real: o.rightmost_real,
            oracles_agree: o.oracles_agree,
            pipeline_agrees: o.pipeline_agrees,
        }),
    }
}

/// Runs the case analysis and writes `analyze.toml`.
pub fn cmd_analyze(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let v = analyze(&cfg.system, &cfg.stencil, &cfg.param_box, &cfg.analyze)?;
    let tol = cfg.analyze.solver.tol;
    let ok = v.stabilizable(tol);
    let mut t = String::new();
    let _ = writeln!(t, "case: {}", v.case.as_str());
    let _ = writeln!(t, "constant term: {}", v.full_class.as_str());
    if let Some(agree) = v.theorem_agrees() {
        let _ = writeln!(t, "reduced-gap class agrees: {agree}");
    }
    let _ = writeln!(t, "dt = {}, window L = {}", v.dt, v.window);
    if v.case == StabilityCase::Projected {
        let theta = v.theta_star.as_deref().unwrap_or(&[]);
        let named: Vec<String> = theta
            .iter()
            .enumerate()
            .map(|(i, x)| format!("{} = {x}", name(cfg, i)))
            .collect();
        let _ = writeln!(t, "theta* = ({})", named.join(", "));
        let _ = writeln!(
            t,
            "t* = {} (upper bound {}, certified {})",
            v.tstar.unwrap_or(f64::NAN),
            v.upper_bound.unwrap_or(f64::NAN),
            v.certified.unwrap_or(false)
        );
        let _ = writeln!(t, "full matrix PD at working dt: {}", v.finite_dt_check.unwrap_or(false));
    }
    if let Some(o) = &v.oracle {
        let _ = writeln!(
            t,
            "oracles: rho = {}, decay ratio = {:?}, rightmost real part = {:?}, agree = {}",
            o.rho, o.decay_ratio, o.rightmost_real, o.oracles_agree
        );
    }
    let _ = writeln!(t, "verdict: {}", if ok { "stabilizable" } else { "not stabilizable" });
    let body = toml::to_string(&record(&v, tol)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let path = write_file(out_dir, "analyze.toml", &body)?;
    let _ = writeln!(t, "wrote {}", path.display());
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_NEGATIVE },
        text: t,
    })
}

/// Writes `sweep.csv` and `sweep.svg`.
pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let res = run_sweep(cfg)?;
    let csv = write_file(out_dir, "sweep.csv", &to_csv(&res))?;
    let svg = write_file(out_dir, "sweep.svg", &to_svg(&res))?;
    let count = |v: CellVerdict| res.cells.iter().filter(|c| c.verdict == v).count();
    let disagree = res.cells.iter().filter(|c| !c.agree).count();
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{} cells ({} x {}), case {}",
        res.cells.len(),
        res.axes[0].len(),
        res.axes[1].len(),
        res.case.as_str()
    );
    let _ = writeln!(
        t,
        "stable {}, unstable {}, boundary {}, oracle disagreements {}",
        count(CellVerdict::Stable),
        count(CellVerdict::Unstable),
        count(CellVerdict::Boundary),
        disagree
    );
    let _ = writeln!(t, "wrote {}\nwrote {}", csv.display(), svg.display());
    Ok(Outcome {
        code: EXIT_OK,
        text: t,
    })
}

/// Simulates from a seeded random constant history at `oracle.theta` (or the
/// box center) and writes `simulate.csv`. Exit 1 when the trajectory grows.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path, seed: u64) -> Result<Outcome> {
    let opts = cfg.oracle_or_default();
    let theta = cfg.theta_eval.clone().unwrap_or_else(|| cfg.param_box.center());
    let dt = opts.dt.unwrap_or(cfg.system.min_delay() / 20);
    let horizon = opts
        .horizon
        .unwrap_or(50.0 * rational_to_f64(&cfg.system.max_delay()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.system.dim();
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let sim = simulate(&cfg.system, &theta, &|_| x0.clone(), dt, horizon)?;

    let mut csv = String::from("t");
    for i in 0..n {
        let _ = write!(csv, ",x{i}");
    }
    csv.push('\n');
    for (t, x) in sim.times.iter().zip(&sim.states) {
        let _ = write!(csv, "{t}");
        for v in x.iter() {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    let path = write_file(out_dir, "simulate.csv", &csv)?;
    let mut t = String::new();
    let _ = writeln!(t, "theta = {}", fmt_vec(&theta));
    let _ = writeln!(t, "dt = {dt}, horizon = {horizon}, steps = {}", sim.states.len() - 1);
    let _ = writeln!(t, "decay ratio = {} ({})", sim.decay_ratio, if sim.decays { "decays" } else { "grows" });
    let _ = writeln!(t, "wrote {}", path.display());
    Ok(Outcome {
        code: if sim.decays { EXIT_OK } else { EXIT_NEGATIVE },
        text: t,
    })
}

/// Runs the property suite and writes `verify.txt`.
pub fn cmd_verify(cfg: &RunConfig, out_dir: &Path, seed: u64) -> Result<Outcome> {
    let target = Target {
        system: &cfg.system,
        stencil: &cfg.stencil,
        param_box: &cfg.param_box,
        options: &cfg.analyze,
    };
    let report = run_suite(seed, Some(&target))?;
    let table = report.to_table();
    let path = write_file(out_dir, "verify.txt", &table)?;
    Ok(Outcome {
        code: if report.all_passed() { EXIT_OK } else { EXIT_NEGATIVE },
        text: format!("{table}wrote {}\n", path.display()),
    })
}
