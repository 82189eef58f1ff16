//! Block discretization of a DDE into a linear recurrence over sample windows.
//!
//! For each state component `c` the window holds `L` samples
//! `x_c(t), x_c(t-δt), …, x_c(t-(L-1)δt)`; the stacked vector `u(t)` has
//! length `nL` (component-major). Row `j` (0-based) of component `c` is the
//! discretized equation at time `t - jδt`:
//!
//! ```text
//! (1/δt) Σ_i w_i x_c(t - (j+s_i)δt) = Σ_d A_0[c,d] x_d(t - jδt) + Σ_k Σ_d A_k[c,d] x_d(t - (j+r_k)δt)
//! ```
//!
//! A referenced sample at offset `q` lands in the current window (column `q`)
//! when `q < L` and in the previous window `u(t - Lδt)` (column `q - L`)
//! otherwise. Collecting terms gives
//! `(1/δt)(D u(t) + D_r u(t-Lδt)) = B(θ) u(t) + A(θ) u(t-Lδt)`.

use nalgebra::DMatrix;
use num_integer::Integer;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, lu_solve, min_singular_value};
use crate::model::{rational_to_f64, AffineMatrix, DdeSystem, Rational};
use crate::stencil::{Stencil, StencilKind};

/// Sampling step, window length and integer delay lags.
#[derive(Debug, Clone, PartialEq)]
pub struct StepChoice {
    pub dt: Rational,
    pub window: usize,
    /// `τ_k = lags[k] · dt` exactly, in the order of `DdeSystem::delayed`.
    pub lags: Vec<usize>,
}

/// Picks the largest step `≤ τ_min / samples` that divides every delay.
pub fn choose_step(
    sys: &DdeSystem,
    samples_per_smallest_delay: usize,
    st: &Stencil,
) -> Result<StepChoice> {
    if samples_per_smallest_delay == 0 {
        return Err(Error::InvalidArgument("samples_per_smallest_delay must be >= 1".into()));
    }
    let samples = i64::try_from(samples_per_smallest_delay)
        .map_err(|_| Error::StepResolution("sample count overflows".into()))?;
    let first = checked_div_int(sys.min_delay(), samples)?;
    let dt = sys
        .delayed()
        .iter()
        .try_fold(first, |acc, t| rational_gcd(acc, t.tau))?;
    step_with(sys, dt, st, None)
}

/// Uses an explicit step. `window` defaults to `max(max lag, m-1)` and may
/// only be raised above that.
pub fn step_with(
    sys: &DdeSystem,
    dt: Rational,
    st: &Stencil,
    window: Option<usize>,
) -> Result<StepChoice> {
    if *dt.numer() <= 0 {
        return Err(Error::InvalidArgument(format!("step {dt} must be > 0")));
    }
    let lags = sys
        .delayed()
        .iter()
        .map(|t| {
            let q = t.tau / dt;
            if !q.is_integer() {
                return Err(Error::StepResolution(format!(
                    "step {dt} does not divide delay {}",
                    t.tau
                )));
            }
            usize::try_from(q.to_integer())
                .map_err(|_| Error::StepResolution(format!("lag for delay {} overflows", t.tau)))
        })
        .collect::<Result<Vec<_>>>()?;
    let min_window = lags
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(st.len() - 1)
        .max(1);
    let window = match window {
        None => min_window,
        Some(w) if w >= min_window => w,
        Some(w) => {
            return Err(Error::WindowTooShort(format!(
                "window {w} < required {min_window}"
            )))
        }
    };
    Ok(StepChoice { dt, window, lags })
}

fn checked_div_int(r: Rational, k: i64) -> Result<Rational> {
    let den = r
        .denom()
        .checked_mul(k)
        .ok_or_else(|| Error::StepResolution("denominator overflow".into()))?;
    Ok(Rational::new(*r.numer(), den))
}

/// gcd of two positive rationals: `gcd(a/b, c/d) = gcd(a, c) / lcm(b, d)`.
fn rational_gcd(x: Rational, y: Rational) -> Result<Rational> {
    let num = x.numer().gcd(y.numer());
    let g = x.denom().gcd(y.denom());
    let den = (x.denom() / g)
        .checked_mul(*y.denom())
        .ok_or_else(|| Error::StepResolution("common denominator overflows".into()))?;
    Ok(Rational::new(num, den))
}

fn check_window(weights: &[f64], window: usize) -> Result<()> {
    if weights.len() < 2 {
        return Err(Error::TooFewPoints(weights.len()));
    }
    if window < weights.len() - 1 || window == 0 {
        return Err(Error::WindowTooShort(format!(
            "window {window} < stencil width - 1 = {}",
            weights.len() - 1
        )));
    }
    Ok(())
}

/// Differentiation matrix for one component: `D[j][k] = w_{k-j+1}` on the band.
pub fn build_d(weights: &[f64], window: usize) -> Result<DMatrix<f64>> {
    check_window(weights, window)?;
    let mut d = DMatrix::zeros(window, window);
    for j in 0..window {
        for (i, w) in weights.iter().enumerate() {
            if j + i < window {
                d[(j, j + i)] = *w;
            }
        }
    }
    Ok(d)
}

/// Remainder matrix for one component: the stencil weights that spill into
/// the previous window, in the lower-left `(m-1)×(m-1)` corner.
pub fn build_dr(weights: &[f64], window: usize) -> Result<DMatrix<f64>> {
    check_window(weights, window)?;
    let mut dr = DMatrix::zeros(window, window);
    for j in 0..window {
        for (i, w) in weights.iter().enumerate() {
            if j + i >= window {
                dr[(j, j + i - window)] = *w;
            }
        }
    }
    Ok(dr)
}

/// Right-hand-side matrices `B(θ)` (current window) and `A(θ)` (previous window).
pub fn build_ba(
    sys: &DdeSystem,
    window: usize,
    lags: &[usize],
) -> Result<(AffineMatrix, AffineMatrix)> {
    if lags.len() != sys.delayed().len() {
        return Err(Error::Dimension(format!(
            "{} lags for {} delays",
            lags.len(),
            sys.delayed().len()
        )));
    }
    if let Some(&r) = lags.iter().find(|&&r| r > window) {
        return Err(Error::WindowTooShort(format!("lag {r} exceeds window {window}")));
    }
    let n = sys.dim();
    let size = n * window;

    // Scatter each (equation row, sample column) contribution of a single
    // n×n coefficient matrix into the current/previous window matrices.
    let scatter = |src: &DMatrix<f64>, lag: usize, cur: &mut DMatrix<f64>, prev: &mut DMatrix<f64>| {
        for c in 0..n {
            for d in 0..n {
                let v = src[(c, d)];
                if v == 0.0 {
                    continue;
                }
                for j in 0..window {
                    let q = j + lag;
                    let row = c * window + j;
                    if q < window {
                        cur[(row, d * window + q)] += v;
                    } else {
                        prev[(row, d * window + q - window)] += v;
                    }
                }
            }
        }
    };

    let assemble = |pick: &dyn Fn(&AffineMatrix) -> &DMatrix<f64>| {
        let mut cur = DMatrix::zeros(size, size);
        let mut prev = DMatrix::zeros(size, size);
        scatter(pick(sys.a0()), 0, &mut cur, &mut prev);
        for (term, &lag) in sys.delayed().iter().zip(lags) {
            scatter(pick(&term.matrix), lag, &mut cur, &mut prev);
        }
        (cur, prev)
    };

    let (b_base, a_base) = assemble(&|m: &AffineMatrix| m.base());
    let mut b_coeffs = Vec::with_capacity(sys.params());
    let mut a_coeffs = Vec::with_capacity(sys.params());
    for p in 0..sys.params() {
        let (b, a) = assemble(&|m: &AffineMatrix| &m.coeffs()[p]);
        b_coeffs.push(b);
        a_coeffs.push(a);
    }
    Ok((
        AffineMatrix::new(b_base, b_coeffs)?,
        AffineMatrix::new(a_base, a_coeffs)?,
    ))
}

/// The discretized system `(1/δt)(D u(t) + D_r u(t-Lδt)) = B(θ) u(t) + A(θ) u(t-Lδt)`.
#[derive(Debug, Clone)]
pub struct Discretization {
    sys: DdeSystem,
    stencil: Stencil,
    step: StepChoice,
    dt: f64,
    d: DMatrix<f64>,
    dr: DMatrix<f64>,
    b: AffineMatrix,
    a: AffineMatrix,
}

impl Discretization {
    /// Step chosen from `samples_per_smallest_delay`, default window.
    pub fn new(sys: &DdeSystem, st: &Stencil, samples_per_smallest_delay: usize) -> Result<Self> {
        let step = choose_step(sys, samples_per_smallest_delay, st)?;
        Self::from_step(sys, st, step)
    }

    /// Explicit step and optional window override.
    pub fn with_step(
        sys: &DdeSystem,
        st: &Stencil,
        dt: Rational,
        window: Option<usize>,
    ) -> Result<Self> {
        let step = step_with(sys, dt, st, window)?;
        Self::from_step(sys, st, step)
    }

    fn from_step(sys: &DdeSystem, st: &Stencil, step: StepChoice) -> Result<Self> {
        if st.kind() != StencilKind::CurrentPoint {
            return Err(Error::InvalidStencil(
                "the block discretization needs a current-point stencil".into(),
            ));
        }
        let n = sys.dim();
        let d = block_diag(&build_d(st.weights(), step.window)?, n);
        let dr = block_diag(&build_dr(st.weights(), step.window)?, n);
        let (b, a) = build_ba(sys, step.window, &step.lags)?;
        Ok(Self {
            sys: sys.clone(),
            stencil: st.clone(),
            dt: rational_to_f64(&step.dt),
            step,
            d,
            dr,
            b,
            a,
        })
    }

    pub fn system(&self) -> &DdeSystem {
        &self.sys
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dt_exact(&self) -> Rational {
        self.step.dt
    }

    pub fn window(&self) -> usize {
        self.step.window
    }

    pub fn lags(&self) -> &[usize] {
        &self.step.lags
    }

    /// Full size `nL` of the stacked sample vector.
    pub fn size(&self) -> usize {
        self.sys.dim() * self.step.window
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn dr(&self) -> &DMatrix<f64> {
        &self.dr
    }

    pub fn b(&self) -> &AffineMatrix {
        &self.b
    }

    pub fn a(&self) -> &AffineMatrix {
        &self.a
    }

    /// `M = (D - δt B(θ))⁻¹ (-D_r + δt A(θ))`, mapping `u(t-Lδt)` to `u(t)`.
    pub fn transition_matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.transition_matrix_at(theta, self.dt)
    }

    /// Same as [`transition_matrix`](Self::transition_matrix) at another step
    /// with the same lags (all delays rescaled with `dt`).
    pub fn transition_matrix_at(&self, theta: &[f64], dt: f64) -> Result<DMatrix<f64>> {
        let (g, r) = self.factors(theta, dt)?;
        lu_solve(&g, &r).ok_or_else(|| Error::SingularSystem(min_singular_value(&g)))
    }

    /// `(D - δt B(θ), -D_r + δt A(θ))`.
    pub fn factors(&self, theta: &[f64], dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let g = &self.d - self.b.eval(theta)? * dt;
        let r = self.a.eval(theta)? * dt - &self.dr;
        Ok((g, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rational;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    /// `x' = a x(t) + b x(t - τ)` with `θ = (a, b)`.
    fn scalar(tau: Rational) -> DdeSystem {
        let a0 = AffineMatrix::new(m(1, &[0.0]), vec![m(1, &[1.0]), m(1, &[0.0])]).unwrap();
        let a1 = AffineMatrix::new(m(1, &[0.0]), vec![m(1, &[0.0]), m(1, &[1.0])]).unwrap();
        DdeSystem::new(a0, vec![(tau, a1)]).unwrap()
    }

    fn delays(ds: &[(i64, i64)]) -> DdeSystem {
        let z = AffineMatrix::zeros(1, 1, 0);
        DdeSystem::new(
            z.clone(),
            ds.iter().map(|&(p, q)| (rational(p, q).unwrap(), z.clone())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn step_single_delay() {
        let st = Stencil::current_point(2).unwrap();
        let c = choose_step(&delays(&[(1, 1)]), 10, &st).unwrap();
        assert_eq!(c.dt, Rational::new(1, 10));
        assert_eq!(c.lags, vec![10]);
        assert_eq!(c.window, 10);
    }

    #[test]
    fn step_common_denominator() {
        let st = Stencil::current_point(2).unwrap();
        let c = choose_step(&delays(&[(1, 2), (1, 3)]), 1, &st).unwrap();
        assert_eq!(c.dt, Rational::new(1, 6));
        assert_eq!(c.lags, vec![3, 2]);
        assert_eq!(c.window, 3);
    }

    #[test]
    fn step_stencil_width_dominates() {
        let st = Stencil::current_point(4).unwrap();
        let c = choose_step(&delays(&[(1, 1)]), 1, &st).unwrap();
        assert_eq!(c.dt, Rational::new(1, 1));
        assert_eq!(c.lags, vec![1]);
        assert_eq!(c.window, 3);
    }

    #[test]
    fn step_overflow_reported() {
        let st = Stencil::current_point(2).unwrap();
        let sys = delays(&[(1, i64::MAX / 3), (1, i64::MAX / 5)]);
        assert!(matches!(choose_step(&sys, 7, &st), Err(Error::StepResolution(_))));
    }

    #[test]
    fn explicit_window_too_short() {
        let st = Stencil::current_point(2).unwrap();
        let sys = delays(&[(1, 1)]);
        assert!(matches!(
            step_with(&sys, Rational::new(1, 4), &st, Some(3)),
            Err(Error::WindowTooShort(_))
        ));
        assert!(matches!(
            step_with(&sys, Rational::new(2, 3), &st, None),
            Err(Error::StepResolution(_))
        ));
    }

    #[test]
    fn d_two_point() {
        assert_eq!(build_d(&[1.0, -1.0], 2).unwrap(), m(2, &[1.0, -1.0, 0.0, 1.0]));
        assert_eq!(build_dr(&[1.0, -1.0], 2).unwrap(), m(2, &[0.0, 0.0, -1.0, 0.0]));
    }

    #[test]
    fn d_three_point_band() {
        let w = [2.0, 3.0, 5.0];
        let d = build_d(&w, 4).unwrap();
        #[rustfmt::skip]
        let expect = m(4, &[
            2.0, 3.0, 5.0, 0.0,
            0.0, 2.0, 3.0, 5.0,
            0.0, 0.0, 2.0, 3.0,
            0.0, 0.0, 0.0, 2.0,
        ]);
        assert_eq!(d, expect);
        let dr = build_dr(&w, 4).unwrap();
        #[rustfmt::skip]
        let expect = m(4, &[
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            5.0, 0.0, 0.0, 0.0,
            3.0, 5.0, 0.0, 0.0,
        ]);
        assert_eq!(dr, expect);
    }

    #[test]
    fn last_row_of_d_and_single_dr_entry() {
        for window in 1..7 {
            let d = build_d(&[1.0, -1.0], window).unwrap();
            let dr = build_dr(&[1.0, -1.0], window).unwrap();
            assert_eq!(d[(window - 1, window - 1)], 1.0);
            assert_eq!(d.row(window - 1).iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(dr.iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(dr[(window - 1, 0)], -1.0);
        }
        assert!(matches!(build_d(&[1.0, -2.0, 1.0], 1), Err(Error::WindowTooShort(_))));
    }

    #[test]
    fn worked_scalar_example_matrices() {
        let st = Stencil::current_point(2).unwrap();
        let d = Discretization::with_step(&scalar(Rational::new(1, 10)), &st, Rational::new(1, 10), Some(2))
            .unwrap();
        assert_eq!(d.d(), &m(2, &[1.0, -1.0, 0.0, 1.0]));
        assert_eq!(d.dr(), &m(2, &[0.0, 0.0, -1.0, 0.0]));
        let (a, b) = (0.7, -1.3);
        assert_eq!(d.b().eval(&[a, b]).unwrap(), m(2, &[a, b, 0.0, a]));
        assert_eq!(d.a().eval(&[a, b]).unwrap(), m(2, &[0.0, 0.0, b, 0.0]));
    }

    #[test]
    fn zero_system_gives_zero_rhs() {
        let st = Stencil::current_point(3).unwrap();
        let d = Discretization::new(&delays(&[(1, 2), (1, 3)]), &st, 2).unwrap();
        assert_eq!(d.b().base().abs().max(), 0.0);
        assert_eq!(d.a().base().abs().max(), 0.0);
    }

    #[test]
    fn historical_stencil_rejected() {
        let st = Stencil::historical(2).unwrap();
        assert!(Discretization::new(&delays(&[(1, 1)]), &st, 1).is_err());
    }

    #[test]
    fn transition_pure_shift_at_zero() {
        let st = Stencil::current_point(2).unwrap();
        let d = Discretization::with_step(&scalar(Rational::new(1, 10)), &st, Rational::new(1, 10), Some(2))
            .unwrap();
        let mm = d.transition_matrix(&[0.0, 0.0]).unwrap();
        assert!((mm - m(2, &[1.0, 0.0, 1.0, 0.0])).abs().max() < 1e-15);
    }

    #[test]
    fn transition_singular_factor() {
        let st = Stencil::current_point(2).unwrap();
        let d = Discretization::with_step(&scalar(Rational::new(1, 10)), &st, Rational::new(1, 10), Some(2))
            .unwrap();
        assert!(matches!(
            d.transition_matrix(&[10.0, 0.0]),
            Err(Error::SingularSystem(_))
        ));
    }
}
