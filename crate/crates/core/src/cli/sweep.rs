//! Two-parameter stability chart: per-cell verdicts, CSV and SVG output.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::lmi::expand_lmi;
use crate::oracle::{cross_check, OracleOptions};
use crate::sdp::{discretize, projected_value, StabilityCase};

const MARGINAL_RHO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellVerdict {
    Stable,
    Unstable,
    /// `|projected value| ≤ tol`.
    Boundary,
}

impl CellVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            CellVerdict::Stable => "stable",
            CellVerdict::Unstable => "unstable",
            CellVerdict::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub p1: f64,
    pub p2: f64,
    /// `λ_min(Vᵀ E(θ) V)`; absent when the constant term decides alone.
    pub projected_value: Option<f64>,
    pub verdict: CellVerdict,
    pub rho: f64,
    /// Away from the boundary: every oracle matches the verdict. On the
    /// boundary: the spectral radius is within `1e-6` of 1.
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub names: [String; 2],
    pub axes: [Vec<f64>; 2],
    pub case: StabilityCase,
    /// Row-major: index `i * axes[1].len() + j`.
    pub cells: Vec<SweepCell>,
}

/// Evaluates every grid cell; the swept parameters take grid values and the
/// rest sit at the box center.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let plan = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "missing sweep block"))?;
    let disc = discretize(&cfg.system, &cfg.stencil, &cfg.analyze)?;
    let lmi = expand_lmi(&disc, cfg.analyze.form)?;
    let case = match lmi.gap.class {
        crate::lmi::Definiteness::PositiveDefinite => StabilityCase::AllThetaStable,
        crate::lmi::Definiteness::Indefinite => StabilityCase::AllThetaUnstable,
        crate::lmi::Definiteness::PsdSingular => StabilityCase::Projected,
    };
    let oracle = cfg.oracle.clone().unwrap_or(OracleOptions {
        simulate: false,
        roots: false,
        ..OracleOptions::default()
    });
    let tol = cfg.analyze.solver.tol;
    let axes = [plan.axis(0), plan.axis(1)];
    let center = cfg.param_box.center();
    let n2 = axes[1].len();

    let cells = (0..axes[0].len() * n2)
        .into_par_iter()
        .map(|idx| {
            let (p1, p2) = (axes[0][idx / n2], axes[1][idx % n2]);
            let mut theta = center.clone();
            theta[plan.params[0]] = p1;
            theta[plan.params[1]] = p2;
            let (value, verdict) = match case {
                StabilityCase::AllThetaStable => (None, CellVerdict::Stable),
                StabilityCase::AllThetaUnstable => (None, CellVerdict::Unstable),
                StabilityCase::Projected => {
                    let g = projected_value(&lmi, &theta)?;
                    let v = if g > tol {
                        CellVerdict::Stable
                    } else if g < -tol {
                        CellVerdict::Unstable
                    } else {
                        CellVerdict::Boundary
                    };
                    (Some(g), v)
                }
            };
            let pipeline = match verdict {
                CellVerdict::Stable => Some(true),
                CellVerdict::Unstable => Some(false),
                CellVerdict::Boundary => None,
            };
            let report = cross_check(&cfg.system, &theta, pipeline, &oracle)?;
            Ok(SweepCell {
                p1,
                p2,
                projected_value: value,
                verdict,
                rho: report.rho,
                agree: report
                    .pipeline_agrees
                    .unwrap_or((report.rho - 1.0).abs() <= MARGINAL_RHO),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let name = |i: usize| {
        cfg.param_names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("p{i}"))
    };
    Ok(SweepResult {
        names: [name(plan.params[0]), name(plan.params[1])],
        axes,
        case,
        cells,
    })
}

/// Header `p1,p2,projected_value,verdict,rho,agree`; numbers in shortest
/// round-trip form; an absent projected value is an empty field.
pub fn to_csv(res: &SweepResult) -> String {
    let mut out = String::from("p1,p2,projected_value,verdict,rho,agree\n");
    for c in &res.cells {
        let g = c.projected_value.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.p1,
            c.p2,
            g,
            c.verdict.as_str(),
            c.rho,
            c.agree
        );
    }
    out
}

/// Heat map of the verdicts; cells where the oracles disagree get a black outline.
pub fn to_svg(res: &SweepResult) -> String {
    const CELL: usize = 24;
    const MARGIN: usize = 60;
    let (nx, ny) = (res.axes[0].len(), res.axes[1].len());
    let (w, h) = (nx * CELL + 2 * MARGIN, ny * CELL + 2 * MARGIN);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    for (idx, c) in res.cells.iter().enumerate() {
        let (i, j) = (idx / ny, idx % ny);
        let x = MARGIN + i * CELL;
        let y = MARGIN + (ny - 1 - j) * CELL;
        let fill = match c.verdict {
            CellVerdict::Stable => "#4caf50",
            CellVerdict::Unstable => "#e53935",
            CellVerdict::Boundary => "#bdbdbd",
        };
        let stroke = if c.agree {
            "stroke=\"white\" stroke-width=\"1\""
        } else {
            "stroke=\"black\" stroke-width=\"3\""
        };
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" {stroke}/>"
        );
    }
    let axis = |v: &[f64]| (v.first().copied().unwrap_or(0.0), v.last().copied().unwrap_or(0.0));
    let (x0, x1) = axis(&res.axes[0]);
    let (y0, y1) = axis(&res.axes[1]);
    let bottom = MARGIN + ny * CELL;
    let right = MARGIN + nx * CELL;
    let _ = writeln!(s, "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"12\">{x0}</text>", bottom + 16);
    let _ = writeln!(
        s,
        "<text x=\"{right}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{x1}</text>",
        bottom + 16
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        (MARGIN + right) / 2,
        bottom + 36,
        escape(&res.names[0])
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{bottom}\" font-size=\"12\" text-anchor=\"end\">{y0}</text>",
        MARGIN - 6
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{y1}</text>",
        MARGIN - 6,
        MARGIN + 12
    );
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>",
        (MARGIN + bottom) / 2,
        (MARGIN + bottom) / 2,
        escape(&res.names[1])
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
