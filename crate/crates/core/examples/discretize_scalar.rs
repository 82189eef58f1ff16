//! Block discretization of x'(t) = a x(t) + b x(t - τ) with τ = δt and a
//! two-sample window.

use dde_stab::model::{AffineMatrix, DdeSystem, Rational};
use dde_stab::oracle::spectral_radius;
use dde_stab::{Discretization, Stencil};
use nalgebra::DMatrix;

fn main() -> dde_stab::Result<()> {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    let a0 = AffineMatrix::new(s(0.0), vec![s(1.0), s(0.0)])?;
    let a1 = AffineMatrix::new(s(0.0), vec![s(0.0), s(1.0)])?;
    let tau = Rational::new(1, 10);
    let sys = DdeSystem::new(a0, vec![(tau, a1)])?;

    let st = Stencil::current_point(2)?;
    let disc = Discretization::with_step(&sys, &st, tau, Some(2))?;
    println!("dt = {}, window = {}, lags = {:?}", disc.dt_exact(), disc.window(), disc.lags());
    println!("D = {}", disc.d());
    println!("D_r = {}", disc.dr());
    println!("B(a=1,b=0) = {}", disc.b().eval(&[1.0, 0.0])?);
    println!("B(a=0,b=1) = {}", disc.b().eval(&[0.0, 1.0])?);
    println!("A(a=0,b=1) = {}", disc.a().eval(&[0.0, 1.0])?);

    // two-step block of the scalar recurrence: rho = ((1 + b dt) / (1 - a dt))^2
    let theta = [0.0, -1.0];
    let m = disc.transition_matrix(&theta)?;
    let rho = spectral_radius(&m)?.value;
    println!("M(0,-1) = {m}");
    println!("spectral radius {rho:.6} (closed form {:.6})", (1.0f64 - 0.1).powi(2));
    Ok(())
}
