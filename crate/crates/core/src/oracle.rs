//! Independent stability checks used to cross-examine the LMI verdicts.
//!
//! Three oracles, each answering "is the system stable at this θ?":
//!
//! * [`spectral_radius`] of the block transition matrix (two-point stencil),
//! * [`simulate`]: step-by-step implicit integration from a constant history,
//! * [`rightmost_root_scan`]: grid search plus Newton refinement on the
//!   characteristic function [`char_eval`].
//!
//! The first two share the implicit backward rule and so agree by
//! construction up to horizon effects; the root scan does not depend on any
//! discretization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::disc::Discretization;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::model::{rational_to_f64, DdeSystem, Rational};
use crate::stencil::Stencil;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusMethod {
    /// Eigenvalues of the real Schur form (Hessenberg reduction + shifted QR).
    Schur,
    /// QR did not converge; value is a Gelfand-formula estimate and
    /// `upper_bound = ‖M^k‖₂^{1/k} ≥ ρ`.
    PowerFallback { upper_bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    pub value: f64,
    pub method: RadiusMethod,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<SpectralRadius> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    if m.is_empty() {
        return Ok(SpectralRadius {
            value: 0.0,
            method: RadiusMethod::Schur,
        });
    }
    let max_iter = 200 * m.nrows().max(10);
    if let Some(schur) = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        let value = schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        return Ok(SpectralRadius {
            value,
            method: RadiusMethod::Schur,
        });
    }
    Ok(power_estimate(m))
}

/// `ρ ≈ ‖M^k‖₂^{1/k}` with `k = 2^j`, normalizing between squarings.
fn power_estimate(m: &DMatrix<f64>) -> SpectralRadius {
    let mut p = m.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    let mut est = spectral_norm(m);
    for _ in 0..10 {
        let nrm = spectral_norm(&p);
        if nrm == 0.0 {
            return SpectralRadius {
                value: 0.0,
                method: RadiusMethod::PowerFallback { upper_bound: 0.0 },
            };
        }
        est = ((nrm.ln() + log_scale) / k).exp();
        p /= nrm;
        log_scale += nrm.ln();
        p = &p * &p;
        log_scale *= 2.0;
        k *= 2.0;
    }
    SpectralRadius {
        value: est,
        method: RadiusMethod::PowerFallback { upper_bound: est },
    }
}

/// Trajectory of the implicit step-by-step integrator.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// RMS norm over the last max-delay window divided by the one over the first.
    pub decay_ratio: f64,
    pub decays: bool,
}

/// Integrates `x_k = x_{k-1} + δt (A_0 x_k + Σ A_i x_{k-r_i})` from `t = 0`
/// to `horizon`, with `x(t) = history(t)` for `t ≤ 0`.
pub fn simulate(
    sys: &DdeSystem,
    theta: &[f64],
    history: &dyn Fn(f64) -> DVector<f64>,
    dt_sim: Rational,
    horizon: f64,
) -> Result<Simulation> {
    let max_delay = rational_to_f64(&sys.max_delay());
    if !(horizon >= 10.0 * max_delay) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} must be at least 10 x max delay ({max_delay})"
        )));
    }
    if *dt_sim.numer() <= 0 {
        return Err(Error::InvalidArgument("simulation step must be > 0".into()));
    }
    let lags = sys
        .delayed()
        .iter()
        .map(|t| {
            let q = t.tau / dt_sim;
            if q.is_integer() {
                Ok(*q.numer() as usize)
            } else {
                Err(Error::StepResolution(format!(
                    "simulation step {dt_sim} does not divide delay {}",
                    t.tau
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let dt = rational_to_f64(&dt_sim);
    let n = sys.dim();
    let a0 = sys.a0().eval(theta)?;
    let ai = sys
        .delayed()
        .iter()
        .map(|t| t.matrix.eval(theta))
        .collect::<Result<Vec<_>>>()?;

    let lhs = DMatrix::identity(n, n) - &a0 * dt;
    let lu = lhs.lu();
    if !lu.is_invertible() {
        return Err(Error::StepSingular(1));
    }

    let window = *lags.iter().max().expect("K >= 1");
    let steps = (horizon / dt).ceil() as usize;
    // buffer index = k + window, k from -window to steps
    let mut xs: Vec<DVector<f64>> = (0..=window)
        .map(|i| {
            let k = i as f64 - window as f64;
            let x = history(k * dt);
            assert_eq!(x.len(), n, "history must return vectors of the state dimension");
            x
        })
        .collect();
    for k in 1..=steps {
        let idx = k + window;
        let mut rhs = xs[idx - 1].clone();
        for (a, &r) in ai.iter().zip(&lags) {
            rhs += a * &xs[idx - r] * dt;
        }
        let x = lu.solve(&rhs).ok_or(Error::StepSingular(k))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepSingular(k));
        }
        xs.push(x);
    }
    let states: Vec<DVector<f64>> = xs.split_off(window);
    let times: Vec<f64> = (0..states.len()).map(|k| k as f64 * dt).collect();

    let rms = |w: &[DVector<f64>]| (w.iter().map(|x| x.norm_squared()).sum::<f64>() / w.len() as f64).sqrt();
    let first = rms(&states[..window.min(states.len())]);
    let last = rms(&states[states.len().saturating_sub(window)..]);
    if first == 0.0 {
        return Err(Error::InvalidArgument("history is identically zero".into()));
    }
    let decay_ratio = last / first;
    Ok(Simulation {
        dt,
        times,
        states,
        decay_ratio,
        decays: decay_ratio < 1.0,
    })
}

/// `det(-λI + A_0(θ) + Σ_i A_i(θ) e^{-τ_i λ})`.
pub fn char_eval(sys: &DdeSystem, theta: &[f64], lambda: Complex64) -> Result<Complex64> {
    let n = sys.dim();
    let mut m: DMatrix<Complex64> = sys.a0().eval(theta)?.map(|v| Complex64::new(v, 0.0));
    for i in 0..n {
        m[(i, i)] -= lambda;
    }
    for term in sys.delayed() {
        let factor = (-lambda * rational_to_f64(&term.tau)).exp();
        let a = term.matrix.eval(theta)?;
        m.zip_apply(&a, |z, v| *z += factor * v);
    }
    Ok(if n == 1 { m[(0, 0)] } else { m.lu().determinant() })
}

/// Search window of [`rightmost_root_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
    /// Grid points along the real and imaginary axes.
    pub grid: (usize, usize),
}

impl ScanBox {
    /// `Re ∈ [-5, 2]`, `Im ∈ [0, 4π/τ_min]`.
    pub fn default_for(sys: &DdeSystem) -> Self {
        let tau_min = rational_to_f64(&sys.min_delay());
        Self {
            re: (-5.0, 2.0),
            im: (0.0, 4.0 * std::f64::consts::PI / tau_min),
            grid: (80, 160),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RootScan {
    /// Largest real part among refined roots, or of the best grid point when
    /// nothing converged. A heuristic lower bound of the true rightmost real part.
    pub rightmost_real: f64,
    pub refined: bool,
    pub roots: Vec<Complex64>,
}

pub fn rightmost_root_scan(sys: &DdeSystem, theta: &[f64], scan: &ScanBox) -> Result<RootScan> {
    let (nr, ni) = scan.grid;
    if nr < 20 || ni < 20 {
        return Err(Error::InvalidArgument(format!("scan grid {nr}x{ni} must be at least 20x20")));
    }
    if !(scan.re.0 < scan.re.1 && scan.im.0 < scan.im.1) {
        return Err(Error::InvalidArgument("empty scan box".into()));
    }
    let at = |i: usize, j: usize| {
        Complex64::new(
            scan.re.0 + (scan.re.1 - scan.re.0) * i as f64 / (nr - 1) as f64,
            scan.im.0 + (scan.im.1 - scan.im.0) * j as f64 / (ni - 1) as f64,
        )
    };
    let mut modulus = vec![0.0; nr * ni];
    for i in 0..nr {
        for j in 0..ni {
            modulus[i * ni + j] = char_eval(sys, theta, at(i, j))?.norm();
        }
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..nr {
        for j in 0..ni {
            let v = modulus[i * ni + j];
            let is_min = (i.saturating_sub(1)..=(i + 1).min(nr - 1))
                .flat_map(|a| (j.saturating_sub(1)..=(j + 1).min(ni - 1)).map(move |b| (a, b)))
                .all(|(a, b)| modulus[a * ni + b] >= v);
            if is_min {
                candidates.push((v, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let width = scan.re.1 - scan.re.0;
    let mut roots: Vec<Complex64> = Vec::new();
    for &(_, i, j) in candidates.iter().take(48) {
        if let Some(z) = newton(sys, theta, at(i, j))? {
            let inside = z.re >= scan.re.0 - 0.1 * width && z.re <= scan.re.1 + 0.1 * width;
            let z = Complex64::new(z.re, z.im.abs());
            if inside && !roots.iter().any(|r| (r - z).norm() < 1e-6 * (1.0 + z.norm())) {
                roots.push(z);
            }
        }
    }
    if roots.is_empty() {
        let (_, i, j) = candidates[0];
        return Ok(RootScan {
            rightmost_real: at(i, j).re,
            refined: false,
            roots,
        });
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(RootScan {
        rightmost_real: roots[0].re,
        refined: true,
        roots,
    })
}

fn newton(sys: &DdeSystem, theta: &[f64], start: Complex64) -> Result<Option<Complex64>> {
    let mut z = start;
    for _ in 0..60 {
        let f = char_eval(sys, theta, z)?;
        let h = 1e-6 * z.norm().max(1.0);
        let df = (char_eval(sys, theta, z + h)? - char_eval(sys, theta, z - h)?) / (2.0 * h);
        if df.norm() == 0.0 || !df.is_finite() {
            return Ok(None);
        }
        let step = f / df;
        z -= step;
        if !z.is_finite() || z.norm() > 1e6 {
            return Ok(None);
        }
        if step.norm() <= 1e-12 * z.norm().max(1.0) {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

/// Configuration of [`cross_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Step for the spectral-radius and simulation oracles; default `τ_min/20`.
    pub dt: Option<Rational>,
    /// Simulation horizon; default 50 × max delay.
    pub horizon: Option<f64>,
    /// Root scan window; default [`ScanBox::default_for`].
    pub scan: Option<ScanBox>,
    pub simulate: bool,
    pub roots: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            dt: None,
            horizon: None,
            scan: None,
            simulate: true,
            roots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rho: f64,
    pub rho_method: RadiusMethod,
    pub sim_decays: Option<bool>,
    pub decay_ratio: Option<f64>,
    pub rightmost_real: Option<f64>,
    pub roots_refined: Option<bool>,
    /// All enabled oracles give the same verdict.
    pub oracles_agree: bool,
    /// The oracles' common verdict matches the pipeline's, when one was given.
    pub pipeline_agrees: Option<bool>,
}

impl OracleReport {
    /// Verdict of the spectral-radius oracle.
    pub fn rho_stable(&self) -> bool {
        self.rho < 1.0
    }
}

pub fn cross_check(
    sys: &DdeSystem,
    theta: &[f64],
    pipeline_stable: Option<bool>,
    opts: &OracleOptions,
) -> Result<OracleReport> {
    let dt = match opts.dt {
        Some(dt) => dt,
        None => sys.min_delay() / 20,
    };
    let st = Stencil::current_point(2)?;
    let disc = Discretization::with_step(sys, &st, dt, None)?;
    let rad = spectral_radius(&disc.transition_matrix(theta)?)?;
    let mut verdicts = vec![rad.value < 1.0];

    let (sim_decays, decay_ratio) = if opts.simulate {
        let horizon = opts
            .horizon
            .unwrap_or(50.0 * rational_to_f64(&sys.max_delay()));
        let n = sys.dim();
        let sim = simulate(sys, theta, &|_| DVector::from_element(n, 1.0), dt, horizon)?;
        verdicts.push(sim.decays);
        (Some(sim.decays), Some(sim.decay_ratio))
    } else {
        (None, None)
    };

    let (rightmost_real, roots_refined) = if opts.roots {
        let scan = opts.scan.unwrap_or_else(|| ScanBox::default_for(sys));
        let r = rightmost_root_scan(sys, theta, &scan)?;
        verdicts.push(r.rightmost_real < 0.0);
        (Some(r.rightmost_real), Some(r.refined))
    } else {
        (None, None)
    };

    let oracles_agree = verdicts.iter().all(|&v| v == verdicts[0]);
    let pipeline_agrees = pipeline_stable.map(|p| verdicts.iter().all(|&v| v == p));
    Ok(OracleReport {
        rho: rad.value,
        rho_method: rad.method,
        sim_decays,
        decay_ratio,
        rightmost_real,
        roots_refined,
        oracles_agree,
        pipeline_agrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffineMatrix;

    fn scalar(a: f64, b: f64, tau: Rational) -> DdeSystem {
        let c = |v: f64| AffineMatrix::constant(DMatrix::from_element(1, 1, v), 0);
        DdeSystem::new(c(a), vec![(tau, c(b))]).unwrap()
    }

    #[test]
    fn radius_of_nilpotent_shift() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert!(spectral_radius(&m).unwrap().value < 1e-12);
    }

    #[test]
    fn radius_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.9]));
        assert!((spectral_radius(&m).unwrap().value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn radius_of_rotation_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -0.7, 0.7, 0.0]);
        assert!((spectral_radius(&m).unwrap().value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn power_estimate_bounds_radius() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 10.0, 0.0, 0.4]);
        let p = power_estimate(&m);
        assert!(p.value >= 0.5 - 1e-12);
        assert!((p.value - 0.5).abs() < 0.05);
    }

    #[test]
    fn simulate_pure_decay() {
        let sys = scalar(-1.0, 0.0, Rational::new(1, 1));
        let s = simulate(&sys, &[], &|_| DVector::from_element(1, 1.0), Rational::new(1, 100), 10.0)
            .unwrap();
        assert!(s.decays);
        assert!(s.decay_ratio < (-5.0f64).exp());
    }

    #[test]
    fn simulate_growth() {
        let sys = scalar(1.0, 0.0, Rational::new(1, 1));
        let s = simulate(&sys, &[], &|_| DVector::from_element(1, 1.0), Rational::new(1, 100), 10.0)
            .unwrap();
        assert!(!s.decays);
    }

    #[test]
    fn simulate_rejects_short_horizon_and_bad_step() {
        let sys = scalar(-1.0, 0.0, Rational::new(1, 1));
        let h = |_: f64| DVector::from_element(1, 1.0);
        assert!(simulate(&sys, &[], &h, Rational::new(1, 10), 5.0).is_err());
        assert!(matches!(
            simulate(&sys, &[], &h, Rational::new(1, 3) * Rational::new(2, 1), 20.0),
            Err(Error::StepResolution(_))
        ));
    }

    #[test]
    fn simulate_singular_step() {
        let sys = scalar(10.0, 0.0, Rational::new(1, 1));
        let h = |_: f64| DVector::from_element(1, 1.0);
        assert!(matches!(
            simulate(&sys, &[], &h, Rational::new(1, 10), 20.0),
            Err(Error::StepSingular(_))
        ));
    }

    #[test]
    fn char_eval_roots() {
        let sys = scalar(-1.0, 0.0, Rational::new(1, 1));
        assert!(char_eval(&sys, &[], Complex64::new(-1.0, 0.0)).unwrap().norm() < 1e-15);
        let sys = scalar(0.0, -1.0, Rational::new(1, 1));
        assert!((char_eval(&sys, &[], Complex64::new(0.0, 0.0)).unwrap() - (-1.0)).norm() < 1e-15);
        let sys = scalar(1.0, -1.0, Rational::new(1, 1));
        assert!(char_eval(&sys, &[], Complex64::new(0.0, 0.0)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn char_eval_matrix_case() {
        // diagonal system decouples: det = Π (-λ + a_i + b_i e^{-λτ})
        let a0 = AffineMatrix::constant(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5])), 0);
        let a1 = AffineMatrix::constant(DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -2.0])), 0);
        let sys = DdeSystem::new(a0, vec![(Rational::new(1, 2), a1)]).unwrap();
        let l = Complex64::new(0.2, 1.3);
        let e = (-l * 0.5).exp();
        let expect = (-l - 1.0 + 0.3 * e) * (-l + 0.5 - 2.0 * e);
        assert!((char_eval(&sys, &[], l).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn scan_single_real_root() {
        let sys = scalar(-1.0, 0.0, Rational::new(1, 1));
        let r = rightmost_root_scan(&sys, &[], &ScanBox::default_for(&sys)).unwrap();
        assert!(r.refined);
        assert!((r.rightmost_real + 1.0).abs() < 1e-6);
    }

    #[test]
    fn scan_classical_delay_thresholds() {
        // x' = b x(t-1): stable iff 0 < -b < π/2
        let stable = scalar(0.0, -1.0, Rational::new(1, 1));
        let r = rightmost_root_scan(&stable, &[], &ScanBox::default_for(&stable)).unwrap();
        assert!(r.refined && r.rightmost_real < 0.0, "{r:?}");
        let unstable = scalar(0.0, -2.0, Rational::new(1, 1));
        let r = rightmost_root_scan(&unstable, &[], &ScanBox::default_for(&unstable)).unwrap();
        assert!(r.refined && r.rightmost_real > 0.0, "{r:?}");
    }

    #[test]
    fn scan_rejects_coarse_grid() {
        let sys = scalar(-1.0, 0.0, Rational::new(1, 1));
        let mut scan = ScanBox::default_for(&sys);
        scan.grid = (10, 40);
        assert!(rightmost_root_scan(&sys, &[], &scan).is_err());
    }
}
