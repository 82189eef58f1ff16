//! Case analysis and stabilizing-parameter synthesis.
//!
//! With `Q` positive semidefinite and singular, the discretized system is
//! stabilizable for small `δt` when `Vᵀ E(θ) V ≻ 0` on the null space `V` of
//! `Q`. The best margin over a parameter box,
//!
//! ```text
//! t* = max_{θ ∈ box} g(θ),   g(θ) = λ_min(Vᵀ E(θ) V),
//! ```
//!
//! is a concave program because `E` is affine in `θ`. It is solved by
//! projected supergradient ascent (golden-section search when `θ` is
//! scalar). Optimality is certified with dual bounds: for any density
//! matrix `Z ⪰ 0, tr Z = 1`,
//! `g(θ) ≤ ⟨Z, P₀⟩ + Σ_p θ_p ⟨Z, P_p⟩ ≤ ⟨Z, P₀⟩ + Σ_p max(l_p⟨Z,P_p⟩, u_p⟨Z,P_p⟩)`.

use nalgebra::{DMatrix, DVector};

use crate::disc::Discretization;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::lmi::{classify_by_theorem, expand_lmi, Definiteness, GapForm, LmiSystem};
use crate::model::{DdeSystem, Rational};
use crate::oracle::{cross_check, OracleOptions, OracleReport};
use crate::stencil::Stencil;

/// Axis-aligned parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::Unbounded("box bounds must be finite".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InvalidArgument(format!(
                "box lower[{i}] = {} exceeds upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *l <= *t && *t <= *u)
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (t, (l, u)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *t = t.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub theta: Vec<f64>,
    /// `g(θ*)`.
    pub tstar: f64,
    /// Best dual upper bound on `max_box g`.
    pub upper_bound: f64,
    /// `upper_bound - tstar ≤ tol`.
    pub certified: bool,
    pub iterations: usize,
}

/// `θ ↦ Vᵀ E(θ) V` as an explicit affine family `P₀ + Σ θ_p P_p`.
struct Projected {
    p0: DMatrix<f64>,
    p: Vec<DMatrix<f64>>,
}

struct Point {
    value: f64,
    vector: DVector<f64>,
    supergradient: Vec<f64>,
}

impl Projected {
    fn new(lmi: &LmiSystem) -> Result<Self> {
        if lmi.gap.null_basis.ncols() == 0 {
            return Err(Error::WrongCase(format!(
                "constant term is {}, projection needs a nontrivial null space",
                lmi.gap.class.as_str()
            )));
        }
        let aff = lmi.projected_affine();
        Ok(Self {
            p0: aff.base().clone(),
            p: aff.coeffs().to_vec(),
        })
    }

    fn matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut out = self.p0.clone();
        for (t, c) in theta.iter().zip(&self.p) {
            out += c * *t;
        }
        out
    }

    /// `g(θ)`, the first unit eigenvector of the minimal eigenvalue, and the
    /// supergradient `(vᵀ P_p v)_p`.
    fn eval(&self, theta: &[f64]) -> Point {
        let e = sym_eigen(&self.matrix(theta));
        let vector = e.vectors.column(0).into_owned();
        let supergradient = self.p.iter().map(|c| vector.dot(&(c * &vector))).collect();
        Point {
            value: e.values[0],
            vector,
            supergradient,
        }
    }

    fn dual_bound(&self, z: &DMatrix<f64>, pbox: &ParamBox) -> f64 {
        let inner = |a: &DMatrix<f64>| a.component_mul(z).sum();
        let mut bound = inner(&self.p0);
        for (c, (l, u)) in self.p.iter().zip(pbox.lower.iter().zip(&pbox.upper)) {
            let s = inner(c);
            bound += (l * s).max(u * s);
        }
        bound
    }
}

/// `λ_min(Vᵀ E(θ) V)`.
pub fn projected_value(lmi: &LmiSystem, theta: &[f64]) -> Result<f64> {
    let proj = Projected::new(lmi)?;
    if theta.len() != proj.p.len() {
        return Err(Error::Dimension(format!(
            "theta has length {}, expected {}",
            theta.len(),
            proj.p.len()
        )));
    }
    Ok(proj.eval(theta).value)
}

/// Maximizes `λ_min(Vᵀ E(θ) V)` over `pbox`, starting from its center.
pub fn synthesize_theta(lmi: &LmiSystem, pbox: &ParamBox, opts: &SolverOptions) -> Result<Synthesis> {
    let proj = Projected::new(lmi)?;
    if pbox.dim() != proj.p.len() {
        return Err(Error::Dimension(format!(
            "box has {} parameters, system has {}",
            pbox.dim(),
            proj.p.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be > 0".into()));
    }
    match proj.p.len() {
        0 => {
            let pt = proj.eval(&[]);
            Ok(Synthesis {
                theta: vec![],
                tstar: pt.value,
                upper_bound: pt.value,
                certified: true,
                iterations: 0,
            })
        }
        1 => Ok(golden_section(&proj, pbox, opts)),
        _ => Ok(supergradient_ascent(&proj, pbox, opts)),
    }
}

fn supergradient_ascent(proj: &Projected, pbox: &ParamBox, opts: &SolverOptions) -> Synthesis {
    let center = pbox.center();
    let half: Vec<f64> = pbox
        .lower
        .iter()
        .zip(&pbox.upper)
        .map(|(l, u)| 0.5 * (u - l))
        .collect();
    let dim = half.len();
    let size = proj.p0.nrows();
    let to_theta = |z: &[f64]| -> Vec<f64> {
        (0..dim).map(|i| center[i] + half[i] * z[i]).collect()
    };

    // normalized coordinates z ∈ [-1, 1]^P
    let mut z = vec![0.0; dim];
    let mut best_theta = center.clone();
    let mut best = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut z_avg = DMatrix::zeros(size, size);
    let mut weight = 0.0;
    let radius = (dim as f64).sqrt();
    let mut iterations = 0;

    for k in 0..opts.max_iter {
        iterations = k + 1;
        let theta = to_theta(&z);
        let pt = proj.eval(&theta);
        if pt.value > best {
            best = pt.value;
            best_theta = theta.clone();
        }
        let vvt = &pt.vector * pt.vector.transpose();
        upper = upper.min(proj.dual_bound(&vvt, pbox));

        let grad: Vec<f64> = pt
            .supergradient
            .iter()
            .zip(&half)
            .map(|(s, h)| s * h)
            .collect();
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        let polyak = if gnorm2 > 0.0 { (upper - pt.value).max(0.0) / gnorm2 } else { 0.0 };
        let diminishing = if gnorm2 > 0.0 {
            radius / (gnorm2.sqrt() * ((k + 1) as f64).sqrt())
        } else {
            0.0
        };
        let step = if polyak.is_finite() && polyak > 0.0 { polyak } else { diminishing };

        z_avg += vvt * step.max(1e-300);
        weight += step.max(1e-300);
        upper = upper.min(proj.dual_bound(&(&z_avg / weight), pbox));

        if upper - best <= opts.tol || gnorm2 == 0.0 {
            break;
        }
        for i in 0..dim {
            z[i] = (z[i] + step * grad[i]).clamp(-1.0, 1.0);
        }
    }
    Synthesis {
        certified: upper - best <= opts.tol,
        theta: best_theta,
        tstar: best,
        upper_bound: upper,
        iterations,
    }
}

/// One-parameter case: golden-section search on the concave `g`, certified
/// with the supporting lines at the final bracket and the dual bound.
fn golden_section(proj: &Projected, pbox: &ParamBox, opts: &SolverOptions) -> Synthesis {
    let (lo0, hi0) = (pbox.lower[0], pbox.upper[0]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let g = |x: f64| proj.eval(&[x]).value;
    let (mut lo, mut hi) = (lo0, hi0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    let mut iterations = 2;
    let mut best = (g(0.5 * (lo0 + hi0)), 0.5 * (lo0 + hi0));
    for x in [lo0, hi0] {
        let v = g(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    let mut upper = f64::INFINITY;
    while iterations < opts.max_iter {
        for (v, x) in [(g1, x1), (g2, x2)] {
            if v > best.0 {
                best = (v, x);
            }
        }
        upper = upper.min(line_bound(proj, pbox, lo, hi));
        if upper - best.0 <= opts.tol || hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
        }
        iterations += 1;
    }
    let pt = proj.eval(&[best.1]);
    let vvt = &pt.vector * pt.vector.transpose();
    upper = upper.min(proj.dual_bound(&vvt, pbox));
    Synthesis {
        theta: vec![best.1],
        tstar: best.0,
        upper_bound: upper,
        certified: upper - best.0 <= opts.tol,
        iterations,
    }
}

/// Max over the box of the lower envelope of the supporting lines at `a` and `b`.
fn line_bound(proj: &Projected, pbox: &ParamBox, a: f64, b: f64) -> f64 {
    let pa = proj.eval(&[a]);
    let pb = proj.eval(&[b]);
    let (sa, sb) = (pa.supergradient[0], pb.supergradient[0]);
    let la = |x: f64| pa.value + sa * (x - a);
    let lb = |x: f64| pb.value + sb * (x - b);
    let env = |x: f64| la(x).min(lb(x));
    let (l, u) = (pbox.lower[0], pbox.upper[0]);
    let mut best = env(l).max(env(u));
    if sa != sb {
        let x = (pb.value - pa.value + sa * a - sb * b) / (sa - sb);
        if (l..=u).contains(&x) {
            best = best.max(env(x));
        }
    }
    best
}

/// Largest `δt = δt₀ / 2^k` (`k ≤ max_halvings`) at which the full matrix
/// `Q + δt E(θ) + δt² F(θ)` is positive definite.
pub fn find_pd_step(lmi: &LmiSystem, theta: &[f64], dt0: f64, max_halvings: usize) -> Result<Option<f64>> {
    let mut dt = dt0;
    for _ in 0..=max_halvings {
        if full_matrix_pd(lmi, theta, dt)? {
            return Ok(Some(dt));
        }
        dt *= 0.5;
    }
    Ok(None)
}

pub fn full_matrix_pd(lmi: &LmiSystem, theta: &[f64], dt: f64) -> Result<bool> {
    let e = sym_eigen(&lmi.full_matrix(theta, dt)?);
    Ok(e.min() > 1e-12 * e.abs_max().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityCase {
    /// `Q ≻ 0`: stable for every θ at small δt.
    AllThetaStable,
    /// `Q` has a negative eigenvalue: unstable for every θ.
    AllThetaUnstable,
    /// `Q ⪰ 0` singular: decided by the projected program.
    Projected,
}

impl StabilityCase {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityCase::AllThetaStable => "all-theta-stable",
            StabilityCase::AllThetaUnstable => "all-theta-unstable",
            StabilityCase::Projected => "projected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub samples_per_smallest_delay: usize,
    /// Explicit step; overrides `samples_per_smallest_delay`.
    pub dt: Option<Rational>,
    pub window: Option<usize>,
    pub form: GapForm,
    pub solver: SolverOptions,
    pub oracle: Option<OracleOptions>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            samples_per_smallest_delay: 1,
            dt: None,
            window: None,
            form: GapForm::Paper,
            solver: SolverOptions::default(),
            oracle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub case: StabilityCase,
    /// Class of the full `Q` by eigendecomposition.
    pub full_class: Definiteness,
    /// Class from the reduced `(m-1)×(m-1)` gap, when it applies (paper form).
    pub theorem_class: Option<Definiteness>,
    pub dt: f64,
    pub window: usize,
    pub tstar: Option<f64>,
    pub theta_star: Option<Vec<f64>>,
    pub upper_bound: Option<f64>,
    pub certified: Option<bool>,
    /// `Q + δt E(θ*) + δt² F(θ*) ≻ 0` at the working step.
    pub finite_dt_check: Option<bool>,
    pub oracle: Option<OracleReport>,
}

impl StabilityVerdict {
    /// Stable for every θ, or a θ with margin `t* > tol` was found.
    pub fn stabilizable(&self, tol: f64) -> bool {
        match self.case {
            StabilityCase::AllThetaStable => true,
            StabilityCase::AllThetaUnstable => false,
            StabilityCase::Projected => self.tstar.is_some_and(|t| t > tol),
        }
    }

    pub fn theorem_agrees(&self) -> Option<bool> {
        self.theorem_class.map(|c| c == self.full_class)
    }
}

pub fn discretize(sys: &DdeSystem, st: &Stencil, opts: &AnalyzeOptions) -> Result<Discretization> {
    match opts.dt {
        Some(dt) => Discretization::with_step(sys, st, dt, opts.window),
        None if opts.window.is_some() => {
            let step = crate::disc::choose_step(sys, opts.samples_per_smallest_delay, st)?;
            Discretization::with_step(sys, st, step.dt, opts.window)
        }
        None => Discretization::new(sys, st, opts.samples_per_smallest_delay),
    }
}

/// Runs the case analysis. The reduced-gap class is used when it applies and
/// matches the full eigendecomposition; otherwise the full class decides.
pub fn analyze(
    sys: &DdeSystem,
    st: &Stencil,
    pbox: &ParamBox,
    opts: &AnalyzeOptions,
) -> Result<StabilityVerdict> {
    if pbox.dim() != sys.params() {
        return Err(Error::Dimension(format!(
            "box has {} parameters, system has {}",
            pbox.dim(),
            sys.params()
        )));
    }
    let disc = discretize(sys, st, opts)?;
    let lmi = expand_lmi(&disc, opts.form)?;
    let full_class = lmi.gap.class;
    let theorem_class = (opts.form == GapForm::Paper && disc.window() % (st.len() - 1) == 0)
        .then(|| classify_by_theorem(st.weights()))
        .transpose()?;

    let mut verdict = StabilityVerdict {
        case: match full_class {
            Definiteness::PositiveDefinite => StabilityCase::AllThetaStable,
            Definiteness::Indefinite => StabilityCase::AllThetaUnstable,
            Definiteness::PsdSingular => StabilityCase::Projected,
        },
        full_class,
        theorem_class,
        dt: disc.dt(),
        window: disc.window(),
        tstar: None,
        theta_star: None,
        upper_bound: None,
        certified: None,
        finite_dt_check: None,
        oracle: None,
    };

    if verdict.case == StabilityCase::Projected {
        let syn = synthesize_theta(&lmi, pbox, &opts.solver)?;
        verdict.finite_dt_check = Some(full_matrix_pd(&lmi, &syn.theta, disc.dt())?);
        verdict.tstar = Some(syn.tstar);
        verdict.upper_bound = Some(syn.upper_bound);
        verdict.certified = Some(syn.certified);
        verdict.theta_star = Some(syn.theta);
    }

    if let Some(oracle_opts) = &opts.oracle {
        let theta = verdict.theta_star.clone().unwrap_or_else(|| pbox.center());
        let stable = verdict.stabilizable(opts.solver.tol);
        verdict.oracle = Some(cross_check(sys, &theta, Some(stable), oracle_opts)?);
    }
    Ok(verdict)
}
