//! Case analysis and parameter synthesis for x'(t) = a x(t) + b x(t - τ).

use dde_stab::model::{AffineMatrix, DdeSystem, Rational};
use dde_stab::oracle::OracleOptions;
use dde_stab::{analyze, AnalyzeOptions, ParamBox, Stencil};
use nalgebra::DMatrix;

fn main() -> dde_stab::Result<()> {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    let a0 = AffineMatrix::new(s(0.0), vec![s(1.0), s(0.0)])?;
    let a1 = AffineMatrix::new(s(0.0), vec![s(0.0), s(1.0)])?;
    let sys = DdeSystem::new(a0, vec![(Rational::new(1, 100), a1)])?;
    let st = Stencil::current_point(2)?;
    let opts = AnalyzeOptions {
        window: Some(2),
        oracle: Some(OracleOptions::default()),
        ..Default::default()
    };

    for (lo, hi) in [([-1.0, -1.0], [1.0, 1.0]), ([1.0, 1.0], [2.0, 2.0])] {
        let pbox = ParamBox::new(lo.to_vec(), hi.to_vec())?;
        let v = analyze(&sys, &st, &pbox, &opts)?;
        println!("box {lo:?}..{hi:?}");
        println!("  case {}, constant term {}", v.case.as_str(), v.full_class.as_str());
        println!(
            "  theta* = {:?}, t* = {:?}, certified {:?}",
            v.theta_star, v.tstar, v.certified
        );
        println!("  full matrix PD at dt = {}: {:?}", v.dt, v.finite_dt_check);
        if let Some(o) = &v.oracle {
            println!(
                "  oracles at theta*: rho {:.6}, decay ratio {:?}, rightmost Re {:?}",
                o.rho, o.decay_ratio, o.rightmost_real
            );
        }
        println!("  stabilizable: {}", v.stabilizable(opts.solver.tol));
    }
    Ok(())
}
