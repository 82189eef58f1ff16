use std::collections::BTreeMap;

use dde_stab::model::{rational_to_f64, AffineMatrix, HigherOrderSystem, Rational};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Vector polynomial `x(t) = Σ_d c_d t^d` and its derivatives.
struct Poly {
    coeffs: Vec<DVector<f64>>,
}

impl Poly {
    fn derivative(&self, order: usize, t: f64) -> DVector<f64> {
        let n = self.coeffs[0].len();
        let mut out = DVector::zeros(n);
        for (d, c) in self.coeffs.iter().enumerate().skip(order) {
            let falling: f64 = (d - order + 1..=d).map(|k| k as f64).product();
            out += c * (falling * t.powi((d - order) as i32));
        }
        out
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

/// For any smooth `x`, the first-order residual `y' - A_0 y - Σ A_i y(t - τ_i)`
/// vanishes in the upper blocks and equals `C_p^{-1}` times the original
/// residual in the last block.
#[test]
fn first_order_form_matches_original_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let n = rng.gen_range(1..=3);
        let p = rng.gen_range(1..=3);
        let params = rng.gen_range(0..=2);
        let delays = vec![Rational::new(1, 4), Rational::new(2, 3)];
        let mut lead: Vec<DMatrix<f64>> = (0..p).map(|_| random_matrix(&mut rng, n)).collect();
        lead[p - 1] += DMatrix::identity(n, n) * 3.0;
        let mut rhs = BTreeMap::new();
        for i in 0..=delays.len() {
            for j in 0..p {
                if rng.gen_bool(0.7) {
                    let base = random_matrix(&mut rng, n);
                    let coeffs = (0..params).map(|_| random_matrix(&mut rng, n)).collect();
                    rhs.insert((i, j), AffineMatrix::new(base, coeffs).unwrap());
                }
            }
        }
        let ho = HigherOrderSystem::new(n, params, lead.clone(), delays.clone(), rhs.clone()).unwrap();
        let sys = ho.reduce().unwrap();
        assert_eq!(sys.dim(), n * p);

        let x = Poly {
            coeffs: (0..=p + 3).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))).collect(),
        };
        let theta: Vec<f64> = (0..params).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let stack = |t: f64| {
            let mut y = DVector::zeros(n * p);
            for j in 0..p {
                y.rows_mut(j * n, n).copy_from(&x.derivative(j, t));
            }
            y
        };
        let stack_dot = |t: f64| {
            let mut y = DVector::zeros(n * p);
            for j in 0..p {
                y.rows_mut(j * n, n).copy_from(&x.derivative(j + 1, t));
            }
            y
        };

        for _ in 0..5 {
            let t: f64 = rng.gen_range(-1.0..1.0);
            let mut reduced = stack_dot(t) - sys.a0().eval(&theta).unwrap() * stack(t);
            for term in sys.delayed() {
                reduced -= term.matrix.eval(&theta).unwrap() * stack(t - rational_to_f64(&term.tau));
            }

            let mut original = DVector::zeros(n);
            for (j, c) in lead.iter().enumerate() {
                original += c * x.derivative(j + 1, t);
            }
            for (&(i, j), m) in &rhs {
                let shift = if i == 0 { 0.0 } else { rational_to_f64(&delays[i - 1]) };
                original -= m.eval(&theta).unwrap() * x.derivative(j, t - shift);
            }

            let scale = 1.0 + original.amax();
            assert!(reduced.rows(0, n * (p - 1)).amax() < 1e-12 * scale);
            let bottom = &lead[p - 1] * reduced.rows(n * (p - 1), n);
            assert!(
                (bottom - &original).amax() < 1e-10 * scale,
                "n={n} p={p}: reduced residual does not match"
            );
        }
    }
}

#[test]
fn delayed_oscillator_has_expected_blocks() {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    let mut rhs = BTreeMap::new();
    rhs.insert((1, 0), AffineMatrix::constant(s(-1.0), 0));
    let ho = HigherOrderSystem::new(1, 0, vec![s(0.0), s(1.0)], vec![Rational::new(1, 1)], rhs).unwrap();
    let sys = ho.reduce().unwrap();
    assert_eq!(sys.a0().base(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    assert_eq!(
        sys.delayed()[0].matrix.base(),
        &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 0.0])
    );
}
