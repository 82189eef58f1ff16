//! Reduces x''(t) = -k x(t - τ) - c x'(t) to first order and analyzes the
//! damping c and stiffness k as parameters.

use std::collections::BTreeMap;

use dde_stab::model::{AffineMatrix, HigherOrderSystem, Rational};
use dde_stab::{analyze, AnalyzeOptions, ParamBox, Stencil};
use nalgebra::DMatrix;

fn main() -> dde_stab::Result<()> {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    // theta = (c, k)
    let mut rhs = BTreeMap::new();
    rhs.insert((0, 1), AffineMatrix::new(s(0.0), vec![s(-1.0), s(0.0)])?);
    rhs.insert((1, 0), AffineMatrix::new(s(0.0), vec![s(0.0), s(-1.0)])?);
    let ho = HigherOrderSystem::new(1, 2, vec![s(0.0), s(1.0)], vec![Rational::new(1, 10)], rhs)?;
    let sys = ho.reduce()?;
    println!("first-order dimension {}", sys.dim());
    println!("A0(c=1,k=0) = {}", sys.a0().eval(&[1.0, 0.0])?);
    println!("A1(c=0,k=1) = {}", sys.delayed()[0].matrix.eval(&[0.0, 1.0])?);

    let st = Stencil::current_point(2)?;
    let pbox = ParamBox::new(vec![0.1, 0.1], vec![2.0, 2.0])?;
    let v = analyze(&sys, &st, &pbox, &AnalyzeOptions::default())?;
    println!("case {} (constant term {})", v.case.as_str(), v.full_class.as_str());
    println!("theta* = {:?}, t* = {:?}", v.theta_star, v.tstar);
    Ok(())
}
