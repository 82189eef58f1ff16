//! Parametric linear DDE systems.
//!
//! Coefficient matrices are affine in the parameter vector `θ`
//! ([`AffineMatrix`]); delays are exact rationals so that a common sampling
//! step always exists.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_traits::Signed;

use crate::error::{Error, Result};

/// Exact positive time value (delays, sampling steps).
pub type Rational = num_rational::Ratio<i64>;

/// Builds `num/den`, rejecting a zero denominator instead of panicking.
pub fn rational(num: i64, den: i64) -> Result<Rational> {
    if den == 0 {
        return Err(Error::InvalidDelay(format!(
            "zero denominator in {num}/{den}"
        )));
    }
    Ok(Rational::new(num, den))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Matrix-valued affine map `θ ↦ base + Σ_p θ_p · coeffs[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    base: DMatrix<f64>,
    coeffs: Vec<DMatrix<f64>>,
}

impl AffineMatrix {
    pub fn new(base: DMatrix<f64>, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        if let Some((p, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| c.shape() != base.shape())
        {
            return Err(Error::Dimension(format!(
                "coefficient {p} is {}x{}, base is {}x{}",
                c.nrows(),
                c.ncols(),
                base.nrows(),
                base.ncols()
            )));
        }
        Ok(Self { base, coeffs })
    }

    /// θ-independent matrix over `params` parameters.
    pub fn constant(base: DMatrix<f64>, params: usize) -> Self {
        let coeffs = vec![DMatrix::zeros(base.nrows(), base.ncols()); params];
        Self { base, coeffs }
    }

    pub fn zeros(rows: usize, cols: usize, params: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols), params)
    }

    pub fn rows(&self) -> usize {
        self.base.nrows()
    }

    pub fn cols(&self) -> usize {
        self.base.ncols()
    }

    pub fn params(&self) -> usize {
        self.coeffs.len()
    }

    pub fn base(&self) -> &DMatrix<f64> {
        &self.base
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Evaluates at `theta`, summing coefficient terms in index order.
    pub fn eval(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        if theta.len() != self.coeffs.len() {
            return Err(Error::Dimension(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.coeffs.len()
            )));
        }
        let mut out = self.base.clone();
        for (t, c) in theta.iter().zip(&self.coeffs) {
            out += c * *t;
        }
        Ok(out)
    }

    /// Applies a linear map to the base and every coefficient.
    pub fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self {
            base: f(&self.base),
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    /// Applies a map that is jointly linear in `(self, other)`.
    pub fn zip_map(
        &self,
        other: &Self,
        f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    ) -> Result<Self> {
        if self.params() != other.params() {
            return Err(Error::Dimension(format!(
                "parameter counts differ: {} vs {}",
                self.params(),
                other.params()
            )));
        }
        Ok(Self {
            base: f(&self.base, &other.base),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.base.shape() != other.base.shape() {
            return Err(Error::Dimension("affine sum of differently shaped matrices".into()));
        }
        self.zip_map(other, |a, b| a + b)
    }

    /// Whether base and coefficients are all symmetric to `tol` (relative).
    pub fn is_symmetric(&self, tol: f64) -> bool {
        std::iter::once(&self.base)
            .chain(&self.coeffs)
            .all(|m| crate::linalg::symmetry_deviation(m) <= tol)
    }
}

/// One delayed term `A_i(θ) x(t - τ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub tau: Rational,
    pub matrix: AffineMatrix,
}

/// `x'(t) = A_0(θ) x(t) + Σ_i A_i(θ) x(t - τ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdeSystem {
    n: usize,
    params: usize,
    a0: AffineMatrix,
    delayed: Vec<DelayTerm>,
}

impl DdeSystem {
    /// Validates shapes and delays. Terms sharing a delay are merged by
    /// summing their matrices; the first occurrence fixes the order.
    pub fn new(a0: AffineMatrix, delayed: Vec<(Rational, AffineMatrix)>) -> Result<Self> {
        let n = a0.rows();
        if a0.cols() != n || n == 0 {
            return Err(Error::Dimension(format!(
                "A_0 must be square and nonempty, got {}x{}",
                a0.rows(),
                a0.cols()
            )));
        }
        if delayed.is_empty() {
            return Err(Error::InvalidDelay("at least one delayed term is required".into()));
        }
        let params = a0.params();
        let mut merged: Vec<DelayTerm> = Vec::with_capacity(delayed.len());
        for (i, (tau, matrix)) in delayed.into_iter().enumerate() {
            if !tau.is_positive() {
                return Err(Error::InvalidDelay(format!("delay {} is {tau}, must be > 0", i + 1)));
            }
            if matrix.rows() != n || matrix.cols() != n {
                return Err(Error::Dimension(format!(
                    "A_{} is {}x{}, expected {n}x{n}",
                    i + 1,
                    matrix.rows(),
                    matrix.cols()
                )));
            }
            if matrix.params() != params {
                return Err(Error::Dimension(format!(
                    "A_{} has {} parameters, A_0 has {params}",
                    i + 1,
                    matrix.params()
                )));
            }
            match merged.iter_mut().find(|t| t.tau == tau) {
                Some(t) => t.matrix = t.matrix.add(&matrix)?,
                None => merged.push(DelayTerm { tau, matrix }),
            }
        }
        Ok(Self {
            n,
            params,
            a0,
            delayed: merged,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn a0(&self) -> &AffineMatrix {
        &self.a0
    }

    pub fn delayed(&self) -> &[DelayTerm] {
        &self.delayed
    }

    pub fn max_delay(&self) -> Rational {
        self.delayed.iter().map(|t| t.tau).max().expect("K >= 1")
    }

    pub fn min_delay(&self) -> Rational {
        self.delayed.iter().map(|t| t.tau).min().expect("K >= 1")
    }
}

/// `C_1 x' + … + C_p x^(p) = Σ_{i=0..K} Σ_{j=0..p-1} A_{i,j}(θ) x^(j)(t - τ_i)`
/// with `τ_0 = 0`.
#[derive(Debug, Clone)]
pub struct HigherOrderSystem {
    n: usize,
    params: usize,
    lead: Vec<DMatrix<f64>>,
    delays: Vec<Rational>,
    rhs: BTreeMap<(usize, usize), AffineMatrix>,
}

impl HigherOrderSystem {
    /// `lead` holds `C_1..C_p`; `rhs` is keyed by `(delay index i, derivative order j)`,
    /// missing entries are zero.
    pub fn new(
        n: usize,
        params: usize,
        lead: Vec<DMatrix<f64>>,
        delays: Vec<Rational>,
        rhs: BTreeMap<(usize, usize), AffineMatrix>,
    ) -> Result<Self> {
        let p = lead.len();
        if p == 0 {
            return Err(Error::Dimension("at least one lead matrix C_1 is required".into()));
        }
        if let Some(c) = lead.iter().find(|c| c.shape() != (n, n)) {
            return Err(Error::Dimension(format!(
                "lead matrix is {}x{}, expected {n}x{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        if delays.is_empty() {
            return Err(Error::InvalidDelay("at least one delay is required".into()));
        }
        if let Some(t) = delays.iter().find(|t| !t.is_positive()) {
            return Err(Error::InvalidDelay(format!("delay {t} must be > 0")));
        }
        for (&(i, j), m) in &rhs {
            if i > delays.len() || j >= p {
                return Err(Error::Dimension(format!(
                    "rhs term ({i},{j}) out of range (K={}, p={p})",
                    delays.len()
                )));
            }
            if m.rows() != n || m.cols() != n || m.params() != params {
                return Err(Error::Dimension(format!("rhs term ({i},{j}) has wrong shape")));
            }
        }
        Ok(Self {
            n,
            params,
            lead,
            delays,
            rhs,
        })
    }

    pub fn order(&self) -> usize {
        self.lead.len()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn lead(&self) -> &[DMatrix<f64>] {
        &self.lead
    }

    pub fn delays(&self) -> &[Rational] {
        &self.delays
    }

    pub fn rhs(&self) -> &BTreeMap<(usize, usize), AffineMatrix> {
        &self.rhs
    }

    /// First-order form over `y = [x; x'; …; x^(p-1)]`.
    ///
    /// The undelayed block is the companion matrix whose last block row is
    /// `C_p^{-1}(A_{0,j}(θ) - C_j)` (with `C_0 = 0`); delayed matrices carry
    /// `C_p^{-1} A_{i,j}(θ)` in the last block row, column block `j`.
    pub fn reduce(&self) -> Result<DdeSystem> {
        let n = self.n;
        let p = self.order();
        let cp = &self.lead[p - 1];
        let sv = cp.singular_values();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !cond.is_finite() || cond > 1e14 {
            return Err(Error::SingularLead(cond));
        }
        let cp_inv = cp
            .clone()
            .try_inverse()
            .ok_or(Error::SingularLead(f64::INFINITY))?;

        let dim = p * n;
        let zero = || AffineMatrix::zeros(dim, dim, self.params);

        let mut companion = DMatrix::zeros(dim, dim);
        for k in 0..p - 1 {
            companion
                .view_mut((k * n, (k + 1) * n), (n, n))
                .fill_with_identity();
        }
        for j in 1..p {
            let block = -(&cp_inv * &self.lead[j - 1]);
            companion
                .view_mut(((p - 1) * n, j * n), (n, n))
                .copy_from(&block);
        }
        let mut a0 = AffineMatrix::constant(companion, self.params);

        let mut delayed: Vec<(Rational, AffineMatrix)> =
            self.delays.iter().map(|&tau| (tau, zero())).collect();

        for (&(i, j), m) in &self.rhs {
            let scaled = m.map(|c| &cp_inv * c);
            let placed = scaled.map(|c| {
                let mut out = DMatrix::zeros(dim, dim);
                out.view_mut(((p - 1) * n, j * n), (n, n)).copy_from(c);
                out
            });
            if i == 0 {
                a0 = a0.add(&placed)?;
            } else {
                let slot = &mut delayed[i - 1].1;
                *slot = slot.add(&placed)?;
            }
        }
        DdeSystem::new(a0, delayed)
    }
}
