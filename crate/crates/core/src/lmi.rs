//! Linear matrix inequality data of the discretized system.
//!
//! The block recurrence contracts in the operator norm iff
//! `(D - δtB)(D - δtB)ᵀ - R Rᵀ ≻ 0` with `R = -D_r + δtA`. Expanding in `δt`
//! gives `Q + δt E(θ) + δt² F(θ) ≻ 0`. Two orientations of the remainder Gram
//! term are supported:
//!
//! * [`GapForm::Paper`]: `Q = DDᵀ - D_rᵀD_r`. This is the orientation the
//!   reduced-matrix test ([`classify_by_theorem`]) and the congruence
//!   constructions below are stated for, and the default.
//! * [`GapForm::Transposed`]: `Q = DDᵀ - D_rD_rᵀ`, the orientation that is
//!   exactly equivalent to `‖M‖₂ < 1` through the Schur complement.
//!
//! The two can disagree; [`schur_chain`] exposes both sides so callers can
//! measure it.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::disc::{build_d, build_dr, Discretization};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, spectral_norm, sym_eigen, symmetry_deviation, SymEigen};
use crate::model::AffineMatrix;

/// Relative tolerance for the numerical null space of `Q`.
pub const NULL_TOL: f64 = 1e-9;
/// Relative tolerance of the reduced-matrix classification.
pub const THEOREM_TOL: f64 = 1e-10;
/// Tolerance of the positivity tests in [`schur_chain`].
pub const CHAIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapForm {
    #[default]
    Paper,
    Transposed,
}

impl GapForm {
    pub fn as_str(self) -> &'static str {
        match self {
            GapForm::Paper => "paper",
            GapForm::Transposed => "transposed",
        }
    }
}

impl std::str::FromStr for GapForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(GapForm::Paper),
            "transposed" => Ok(GapForm::Transposed),
            other => Err(Error::InvalidArgument(format!(
                "unknown form `{other}` (expected paper|transposed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    PsdSingular,
    Indefinite,
}

impl Definiteness {
    pub fn as_str(self) -> &'static str {
        match self {
            Definiteness::PositiveDefinite => "positive-definite",
            Definiteness::PsdSingular => "psd-singular",
            Definiteness::Indefinite => "indefinite",
        }
    }
}

/// Classification of a symmetric matrix with the absolute threshold used.
#[derive(Debug, Clone)]
pub struct Classified {
    pub class: Definiteness,
    pub eigen: SymEigen,
    pub threshold: f64,
}

/// Eigenvalues in `[-tol, tol]` count as zero, `tol = rel_tol·‖S‖₂`
/// (or `abs_floor` when that is larger).
pub fn classify(s: &DMatrix<f64>, rel_tol: f64, abs_floor: f64) -> Classified {
    let eigen = sym_eigen(s);
    let threshold = (rel_tol * eigen.abs_max()).max(abs_floor);
    let vals = eigen.values.iter();
    let class = if vals.clone().any(|&v| v < -threshold) {
        Definiteness::Indefinite
    } else if vals.clone().any(|&v| v.abs() <= threshold) {
        Definiteness::PsdSingular
    } else {
        Definiteness::PositiveDefinite
    };
    Classified {
        class,
        eigen,
        threshold,
    }
}

/// Constant term `Q` of the expanded LMI, its class and null-space basis.
#[derive(Debug, Clone)]
pub struct GramGap {
    pub form: GapForm,
    pub q: DMatrix<f64>,
    pub class: Definiteness,
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns spanning the numerical null space; zero columns
    /// unless `class == PsdSingular`.
    pub null_basis: DMatrix<f64>,
}

pub fn gap_matrix(d: &DMatrix<f64>, dr: &DMatrix<f64>, form: GapForm) -> DMatrix<f64> {
    let rem = match form {
        GapForm::Paper => dr.transpose() * dr,
        GapForm::Transposed => dr * dr.transpose(),
    };
    d * d.transpose() - rem
}

pub fn gram_gap(d: &Discretization, form: GapForm) -> GramGap {
    let q = gap_matrix(d.d(), d.dr(), form);
    let c = classify(&q, NULL_TOL, 0.0);
    let null_basis = if c.class == Definiteness::PsdSingular {
        let cols: Vec<usize> = (0..q.nrows())
            .filter(|&i| c.eigen.values[i].abs() <= c.threshold)
            .collect();
        DMatrix::from_fn(q.nrows(), cols.len(), |r, k| c.eigen.vectors[(r, cols[k])])
    } else {
        DMatrix::zeros(q.nrows(), 0)
    };
    GramGap {
        form,
        q,
        class: c.class,
        eigenvalues: c.eigen.values,
        null_basis,
    }
}

/// `Q + δt E(θ) + δt² F(θ)` with `E` affine and `F` quadratic in `θ`.
#[derive(Debug, Clone)]
pub struct LmiSystem {
    pub gap: GramGap,
    pub e: AffineMatrix,
    d: DMatrix<f64>,
    dr: DMatrix<f64>,
    b: AffineMatrix,
    a: AffineMatrix,
}

pub fn expand_lmi(disc: &Discretization, form: GapForm) -> Result<LmiSystem> {
    let d = disc.d().clone();
    let dr = disc.dr().clone();
    let e = disc.b().zip_map(disc.a(), |b, a| {
        let cur = &d * b.transpose() + b * d.transpose();
        let prev = match form {
            GapForm::Paper => dr.transpose() * a + a.transpose() * &dr,
            GapForm::Transposed => &dr * a.transpose() + a * dr.transpose(),
        };
        prev - cur
    })?;
    Ok(LmiSystem {
        gap: gram_gap(disc, form),
        e,
        d,
        dr,
        b: disc.b().clone(),
        a: disc.a().clone(),
    })
}

impl LmiSystem {
    pub fn form(&self) -> GapForm {
        self.gap.form
    }

    pub fn params(&self) -> usize {
        self.e.params()
    }

    /// Second-order term `B Bᵀ - AᵀA` (paper) or `B Bᵀ - A Aᵀ` (transposed).
    pub fn f_quad(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let b = self.b.eval(theta)?;
        let a = self.a.eval(theta)?;
        let rem = match self.form() {
            GapForm::Paper => a.transpose() * &a,
            GapForm::Transposed => &a * a.transpose(),
        };
        Ok(&b * b.transpose() - rem)
    }

    /// `Q + δt E(θ) + δt² F(θ)`.
    pub fn full_matrix(&self, theta: &[f64], dt: f64) -> Result<DMatrix<f64>> {
        Ok(&self.gap.q + self.e.eval(theta)? * dt + self.f_quad(theta)? * (dt * dt))
    }

    /// The unexpanded product form `(D-δtB)(D-δtB)ᵀ - R*R` with the
    /// orientation of `form`.
    pub fn product_matrix(&self, theta: &[f64], dt: f64) -> Result<DMatrix<f64>> {
        let g = &self.d - self.b.eval(theta)? * dt;
        let r = self.a.eval(theta)? * dt - &self.dr;
        let rem = match self.form() {
            GapForm::Paper => r.transpose() * &r,
            GapForm::Transposed => &r * r.transpose(),
        };
        Ok(&g * g.transpose() - rem)
    }

    /// `Vᵀ E(θ) V` on the null space of `Q`.
    pub fn projected(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let v = &self.gap.null_basis;
        Ok(v.transpose() * self.e.eval(theta)? * v)
    }

    /// Projected affine map `θ ↦ Vᵀ E(θ) V`.
    pub fn projected_affine(&self) -> AffineMatrix {
        let v = &self.gap.null_basis;
        self.e.map(|m| v.transpose() * m * v)
    }
}

/// Outcome of the three equivalent-by-algebra contraction tests at one `(θ, δt)`.
#[derive(Debug, Clone, Copy)]
pub struct SchurChain {
    /// Largest singular value of the transition matrix.
    pub opnorm: f64,
    pub opnorm_lt_1: bool,
    /// Smallest eigenvalue of `[[GGᵀ, R], [Rᵀ, I]]`.
    pub block_min_eig: f64,
    pub block_pd: bool,
    /// Smallest eigenvalue of the gap matrix in the requested form.
    pub gap_min_eig: f64,
    pub gap_pd: bool,
}

impl SchurChain {
    pub fn all_agree(&self) -> bool {
        self.opnorm_lt_1 == self.block_pd && self.block_pd == self.gap_pd
    }
}

pub fn schur_chain(
    disc: &Discretization,
    theta: &[f64],
    dt: f64,
    form: GapForm,
) -> Result<SchurChain> {
    let m = disc.transition_matrix_at(theta, dt)?;
    let opnorm = spectral_norm(&m);
    let (g, r) = disc.factors(theta, dt)?;
    let ggt = &g * g.transpose();
    let size = ggt.nrows();

    let mut block = DMatrix::zeros(2 * size, 2 * size);
    block.view_mut((0, 0), (size, size)).copy_from(&ggt);
    block.view_mut((0, size), (size, size)).copy_from(&r);
    block
        .view_mut((size, 0), (size, size))
        .copy_from(&r.transpose());
    block
        .view_mut((size, size), (size, size))
        .fill_with_identity();
    let block_eig = sym_eigen(&block);
    let block_min_eig = block_eig.min();

    let rem = match form {
        GapForm::Paper => r.transpose() * &r,
        GapForm::Transposed => &r * r.transpose(),
    };
    let gap = &ggt - rem;
    let gap_eig = sym_eigen(&gap);
    let gap_min_eig = gap_eig.min();
    let gap_scale = sym_eigen(&ggt).abs_max().max(1.0);

    Ok(SchurChain {
        opnorm,
        opnorm_lt_1: opnorm < 1.0 - CHAIN_TOL,
        block_min_eig,
        block_pd: block_min_eig > CHAIN_TOL * block_eig.abs_max().max(1.0),
        gap_min_eig,
        gap_pd: gap_min_eig > CHAIN_TOL * gap_scale,
    })
}

fn check_leading(weights: &[f64]) -> Result<()> {
    if weights.len() < 2 {
        return Err(Error::TooFewPoints(weights.len()));
    }
    if weights[0] == 0.0 {
        return Err(Error::LeadingWeightZero);
    }
    Ok(())
}

/// The `(m-1)×(m-1)` matrices deciding the class of `Q` for every window.
#[derive(Debug, Clone)]
pub struct ReducedGap {
    /// Upper triangular, `Dt[j][k] = w_{1+k-j}` for `k ≥ j`.
    pub dt: DMatrix<f64>,
    /// Lower triangular trailing weights, `Drt[j][k] = w_{m-(j-k)}` for `k ≤ j`.
    pub drt: DMatrix<f64>,
    /// `Dt Dtᵀ - Drtᵀ Drt`.
    pub gt: DMatrix<f64>,
}

pub fn reduced_matrices(weights: &[f64]) -> Result<ReducedGap> {
    check_leading(weights)?;
    let m = weights.len();
    let k = m - 1;
    let dt = DMatrix::from_fn(k, k, |j, c| if c >= j { weights[c - j] } else { 0.0 });
    let drt = DMatrix::from_fn(k, k, |j, c| if c <= j { weights[m - 1 - (j - c)] } else { 0.0 });
    let gt = &dt * dt.transpose() - drt.transpose() * &drt;
    Ok(ReducedGap { dt, drt, gt })
}

/// Class of the paper-form `Q` for any window, read off the reduced gap.
pub fn classify_by_theorem(weights: &[f64]) -> Result<Definiteness> {
    let r = reduced_matrices(weights)?;
    let abs_floor = if max_abs(&r.gt) == 0.0 { 1e-12 } else { 0.0 };
    Ok(classify(&r.gt, THEOREM_TOL, abs_floor).class)
}

/// `[[𝒜, ℬ], [ℬᵀ, 0]]` built entry by entry from its recurrences in the
/// weights (1-based `w`, `w_i = 0` for `i > m`).
pub fn build_u0(weights: &[f64]) -> Result<DMatrix<f64>> {
    check_leading(weights)?;
    let m = weights.len();
    let k = m - 1;
    let size = 2 * k;
    let w = |i: usize| if (1..=m).contains(&i) { weights[i - 1] } else { 0.0 };
    // 1-based scratch, upper triangle of the first k rows
    let mut u = vec![vec![0.0; size + 1]; size + 1];
    for j in 1..=size {
        u[1][j] = if j <= m { w(1) * w(j) } else { 0.0 };
    }
    for i in 2..=k {
        for j in i..=size {
            u[i][j] = u[i - 1][j - 1] + if j <= m { w(i) * w(j) } else { 0.0 };
        }
    }
    Ok(DMatrix::from_fn(size, size, |r, c| {
        let (i, j) = (r.min(c) + 1, r.max(c) + 1);
        if i > k {
            0.0
        } else {
            u[i][j]
        }
    }))
}

/// `𝒵`, the leading `(m-1)×(m-1)` block of `D_rᵀ D_r`, from its recurrences.
pub fn build_z(weights: &[f64]) -> Result<DMatrix<f64>> {
    check_leading(weights)?;
    let m = weights.len();
    let k = m - 1;
    let w = |i: usize| weights[i - 1];
    let mut z = vec![vec![0.0; k + 1]; k + 1];
    for j in 1..=k {
        z[k][j] = w(m) * w(j + 1);
        z[j][k] = z[k][j];
    }
    for i in (1..k).rev() {
        for j in (1..k).rev() {
            z[i][j] = z[i + 1][j + 1] + w(i + 1) * w(j + 1);
        }
    }
    Ok(DMatrix::from_fn(k, k, |r, c| z[r + 1][c + 1]))
}

/// `𝒰 = 𝒰₀` with `𝒵` in the lower-right block.
pub fn build_u(weights: &[f64]) -> Result<DMatrix<f64>> {
    let mut u = build_u0(weights)?;
    let z = build_z(weights)?;
    let k = z.nrows();
    u.view_mut((k, k), (k, k)).copy_from(&z);
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn new(positive: usize, negative: usize, zero: usize) -> Self {
        Self {
            positive,
            negative,
            zero,
        }
    }
}

/// Eigenvalue sign counts with threshold `tol·‖S‖₂`.
pub fn inertia(s: &DMatrix<f64>, tol: f64) -> Result<Inertia> {
    let dev = symmetry_deviation(s);
    if dev > 1e-10 {
        return Err(Error::Asymmetric(dev));
    }
    let e = sym_eigen(s);
    let thr = tol * e.abs_max();
    let mut out = Inertia::new(0, 0, 0);
    for &v in e.values.iter() {
        if v > thr {
            out.positive += 1;
        } else if v < -thr {
            out.negative += 1;
        } else {
            out.zero += 1;
        }
    }
    Ok(out)
}

/// Block-elimination identity behind the congruence argument.
///
/// All quantities except `a_min_eig` are computed in exact rational
/// arithmetic from the (exactly representable) float weights, so the
/// residuals are free of the conditioning of `𝒜`.
#[derive(Debug, Clone, Copy)]
pub struct LemmaCheck {
    /// `‖ℬᵀ𝒜⁻¹ℬ - 𝒵‖∞`: the Schur complement of `𝒜` in `𝒰`.
    pub residual: f64,
    /// `‖ℬ𝒜⁻¹ℬᵀ - 𝒵‖∞`, the other orientation (not an identity in general).
    pub literal_residual: f64,
    /// `‖𝒵‖∞`.
    pub z_norm: f64,
    /// Smallest eigenvalue of `𝒜` in floating point.
    pub a_min_eig: f64,
}

/// Extracts `𝒜`, `ℬ` from a window of length `window ≥ 2(m-1)`, checks
/// `𝒜 ≻ 0` (exact pivots) and measures `ℬᵀ𝒜⁻¹ℬ - 𝒵`.
pub fn lemma_b1_residual(weights: &[f64], window: usize) -> Result<LemmaCheck> {
    check_leading(weights)?;
    let m = weights.len();
    let k = m - 1;
    if window < 2 * k {
        return Err(Error::WindowTooShort(format!(
            "window {window} < 2(m-1) = {}",
            2 * k
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite".into()));
    }
    let d = exact::from_f64(&build_d(weights, window)?);
    let dr = exact::from_f64(&build_dr(weights, window)?);
    let ddt = exact::mul(&d, &exact::transpose(&d));
    let drtdr = exact::mul(&exact::transpose(&dr), &dr);
    let a: Vec<Vec<BigRational>> = (0..k)
        .map(|i| (0..k).map(|j| &ddt[i][j] - &drtdr[i][j]).collect())
        .collect();
    let b: Vec<Vec<BigRational>> = (0..k)
        .map(|i| (k..2 * k).map(|j| ddt[i][j].clone()).collect())
        .collect();
    let z = exact::z_recurrence(weights);

    let a_float = DMatrix::from_fn(k, k, |i, j| a[i][j].to_f64().unwrap_or(f64::NAN));
    let a_min_eig = sym_eigen(&a_float).min();
    if !exact::positive_definite(&a) {
        return Err(Error::LemmaViolation(format!(
            "leading block not positive definite (λ_min = {a_min_eig:e})"
        )));
    }
    let bt = exact::transpose(&b);
    let schur = exact::mul(&bt, &exact::solve(&a, &b));
    let literal = exact::mul(&b, &exact::solve(&a, &bt));
    Ok(LemmaCheck {
        residual: exact::norm_inf_diff(&schur, &z),
        literal_residual: exact::norm_inf_diff(&literal, &z),
        z_norm: exact::norm_inf_diff(&z, &exact::zeros(k)),
        a_min_eig,
    })
}

mod exact {
    use num_rational::BigRational;
    use num_traits::{Signed, ToPrimitive, Zero};

    use nalgebra::DMatrix;

    pub type Mat = Vec<Vec<BigRational>>;

    fn q(x: f64) -> BigRational {
        BigRational::from_float(x).expect("finite")
    }

    pub fn from_f64(m: &DMatrix<f64>) -> Mat {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| q(m[(i, j)])).collect())
            .collect()
    }

    pub fn zeros(n: usize) -> Mat {
        vec![vec![BigRational::zero(); n]; n]
    }

    pub fn transpose(a: &Mat) -> Mat {
        let cols = a.first().map_or(0, Vec::len);
        (0..cols).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
    }

    pub fn mul(a: &Mat, b: &Mat) -> Mat {
        let cols = b.first().map_or(0, Vec::len);
        a.iter()
            .map(|row| {
                (0..cols)
                    .map(|j| {
                        row.iter()
                            .zip(b)
                            .filter(|(x, _)| !x.is_zero())
                            .fold(BigRational::zero(), |acc, (x, brow)| acc + x * &brow[j])
                    })
                    .collect()
            })
            .collect()
    }

    /// Symmetric `a` is PD iff elimination without pivoting meets only positive pivots.
    pub fn positive_definite(a: &Mat) -> bool {
        let mut a = a.clone();
        let n = a.len();
        for c in 0..n {
            if !a[c][c].is_positive() {
                return false;
            }
            for r in c + 1..n {
                let f = &a[r][c] / &a[c][c];
                for k in c..n {
                    let delta = &f * &a[c][k];
                    a[r][k] -= delta;
                }
            }
        }
        true
    }

    /// `a⁻¹ b` for nonsingular `a` by Gauss-Jordan.
    pub fn solve(a: &Mat, b: &Mat) -> Mat {
        let n = a.len();
        let cols = b.first().map_or(0, Vec::len);
        let mut aug: Mat = a
            .iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().chain(rb).cloned().collect())
            .collect();
        for c in 0..n {
            let p = (c..n).find(|&r| !aug[r][c].is_zero()).expect("nonsingular");
            aug.swap(c, p);
            let inv = aug[c][c].recip();
            for x in aug[c].iter_mut() {
                *x = &*x * &inv;
            }
            for r in 0..n {
                if r != c && !aug[r][c].is_zero() {
                    let f = aug[r][c].clone();
                    for k in 0..n + cols {
                        let delta = &f * &aug[c][k];
                        aug[r][k] -= delta;
                    }
                }
            }
        }
        aug.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    pub fn norm_inf_diff(a: &Mat, b: &Mat) -> f64 {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| {
                ra.iter()
                    .zip(rb)
                    .fold(BigRational::zero(), |acc, (x, y)| acc + (x - y).abs())
            })
            .max()
            .map_or(0.0, |v| v.to_f64().unwrap_or(f64::INFINITY))
    }

    /// `𝒵` from its recurrence, exactly.
    pub fn z_recurrence(weights: &[f64]) -> Mat {
        let m = weights.len();
        let k = m - 1;
        let w = |i: usize| q(weights[i - 1]);
        let mut z = vec![vec![BigRational::zero(); k + 1]; k + 1];
        for j in 1..=k {
            z[k][j] = w(m) * w(j + 1);
            z[j][k] = z[k][j].clone();
        }
        for i in (1..k).rev() {
            for j in (1..k).rev() {
                z[i][j] = &z[i + 1][j + 1] + w(i + 1) * w(j + 1);
            }
        }
        (1..=k).map(|i| z[i][1..=k].to_vec()).collect()
    }
}
