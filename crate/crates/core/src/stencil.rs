//! Backward finite-difference stencils for `d/dt`.
//!
//! Weights come from the moment conditions of a Taylor expansion around
//! `t₀`: with sample offsets `s_i` (the rule reads `f(t₀ - s_i δt)`), the
//! weights satisfy `Σ w_i (-s_i)^j = [j == 1]` for `j = 0..m-1`, so that
//! `(1/δt) Σ w_i f(t₀ - s_i δt) = f'(t₀) + O(δt^{m-1})`.
//!
//! The moment system is a Vandermonde solve. It is done in exact rational
//! arithmetic and only rounded to `f64` at the end.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Widest supported stencil.
pub const MAX_POINTS: usize = 8;

const ZEROTH_MOMENT_TOL: f64 = 1e-12;
const FIRST_MOMENT_TOL: f64 = 1e-12;
const HIGHER_MOMENT_TOL: f64 = 1e-10;

/// Which sample offsets the weights refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    /// Offsets `0, 1, …, m-1`: the current sample plus `m-1` past samples.
    CurrentPoint,
    /// Offsets `1, …, m`: past samples only.
    Historical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    kind: StencilKind,
    weights: Vec<f64>,
}

/// Result of [`Stencil::empirical_order`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderEstimate {
    /// Least-squares slope of `log(error)` against `log(δt)`.
    Slope(f64),
    /// The error sits at the rounding floor on too many steps to fit a slope.
    Saturated,
}

impl OrderEstimate {
    pub fn slope(self) -> Option<f64> {
        match self {
            OrderEstimate::Slope(s) => Some(s),
            OrderEstimate::Saturated => None,
        }
    }
}

impl Stencil {
    /// `m`-point rule on offsets `0..m-1`, first order moment normalized to 1.
    pub fn current_point(m: usize) -> Result<Self> {
        Self::solve(StencilKind::CurrentPoint, m)
    }

    /// `k`-point rule on offsets `1..k`.
    pub fn historical(k: usize) -> Result<Self> {
        Self::solve(StencilKind::Historical, k)
    }

    /// Wraps caller-provided weights, checking every moment condition and `w_1 ≠ 0`.
    pub fn from_weights(kind: StencilKind, weights: Vec<f64>) -> Result<Self> {
        let m = weights.len();
        if m < 2 {
            return Err(Error::TooFewPoints(m));
        }
        if weights[0] == 0.0 {
            return Err(Error::LeadingWeightZero);
        }
        let st = Self { kind, weights };
        let moments = st.moments();
        let scale = st.weights.iter().map(|w| w.abs()).fold(1.0, f64::max);
        for (j, mom) in moments.iter().enumerate() {
            let (target, tol) = match j {
                0 => (0.0, ZEROTH_MOMENT_TOL),
                1 => (1.0, FIRST_MOMENT_TOL),
                _ => (0.0, HIGHER_MOMENT_TOL),
            };
            if (mom - target).abs() > tol * scale {
                return Err(Error::InvalidStencil(format!(
                    "moment {j} is {mom}, expected {target}"
                )));
            }
        }
        Ok(st)
    }

    fn solve(kind: StencilKind, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::TooFewPoints(m));
        }
        if m > MAX_POINTS {
            return Err(Error::InvalidStencil(format!(
                "{m} points exceeds the supported maximum of {MAX_POINTS}"
            )));
        }
        let offsets = offsets(kind, m);
        // rows: moment order j, columns: sample i, entry (-s_i)^j
        let mut a: Vec<Vec<BigRational>> = (0..m)
            .map(|j| {
                offsets
                    .iter()
                    .map(|&s| BigRational::from_integer(BigInt::from(-(s as i64)).pow(j as u32)))
                    .collect()
            })
            .collect();
        let mut rhs: Vec<BigRational> = (0..m)
            .map(|j| if j == 1 { BigRational::one() } else { BigRational::zero() })
            .collect();
        let exact = gauss_exact(&mut a, &mut rhs)
            .ok_or_else(|| Error::InvalidStencil("moment system is singular".into()))?;
        let weights = exact
            .iter()
            .map(|r| r.to_f64().expect("finite rational"))
            .collect();
        Self::from_weights(kind, weights)
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    /// Point count `m`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn offsets(&self) -> Vec<usize> {
        offsets(self.kind, self.len())
    }

    /// `Σ_i w_i (-s_i)^j` for `j = 0..m-1`.
    pub fn moments(&self) -> Vec<f64> {
        let offs = self.offsets();
        (0..self.len())
            .map(|j| {
                self.weights
                    .iter()
                    .zip(&offs)
                    .map(|(w, &s)| w * (-(s as f64)).powi(j as i32))
                    .sum()
            })
            .collect()
    }

    /// `‖V w - e₁‖∞` for the moment system.
    /// Largest moment defect, each scaled by `max(1, Σ |w_i| s_i^j)`.
    pub fn moment_residual(&self) -> f64 {
        let offsets = self.offsets();
        self.moments()
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let scale = self
                    .weights
                    .iter()
                    .zip(&offsets)
                    .map(|(w, s)| w.abs() * (*s as f64).powi(j as i32))
                    .sum::<f64>()
                    .max(1.0);
                (m - if j == 1 { 1.0 } else { 0.0 }).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    /// `(1/δt) Σ w_i f(t₀ - s_i δt)`.
    pub fn derivative(&self, f: impl Fn(f64) -> f64, t0: f64, dt: f64) -> f64 {
        self.weights
            .iter()
            .zip(self.offsets())
            .map(|(w, s)| w * f(t0 - s as f64 * dt))
            .sum::<f64>()
            / dt
    }

    /// Convergence slope of the derivative rule over `δt = 2^-4 … 2^-10`.
    pub fn empirical_order(
        &self,
        f: impl Fn(f64) -> f64,
        exact_derivative: f64,
        t0: f64,
    ) -> OrderEstimate {
        let floor = 1e-12 * exact_derivative.abs().max(1.0);
        let points: Vec<(f64, f64)> = (4..=10)
            .filter_map(|k| {
                let dt = 2f64.powi(-k);
                let err = (self.derivative(&f, t0, dt) - exact_derivative).abs();
                (err > floor).then(|| (dt.ln(), err.ln()))
            })
            .collect();
        if points.len() < 3 {
            return OrderEstimate::Saturated;
        }
        OrderEstimate::Slope(least_squares_slope(&points))
    }
}

fn offsets(kind: StencilKind, m: usize) -> Vec<usize> {
    match kind {
        StencilKind::CurrentPoint => (0..m).collect(),
        StencilKind::Historical => (1..=m).collect(),
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Gauss-Jordan elimination over the rationals. `None` if singular.
fn gauss_exact(a: &mut [Vec<BigRational>], b: &mut [BigRational]) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for k in col..n {
            a[col][k] = &a[col][k] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for k in col..n {
                let delta = &factor * &a[col][k];
                a[r][k] -= delta;
            }
            let delta = &factor * &b[col];
            b[r] -= delta;
        }
    }
    Some(b.to_vec())
}
