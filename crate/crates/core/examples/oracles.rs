//! Independent stability checks: spectral radius of the block transition
//! matrix, implicit time stepping, and a scan for characteristic roots.

use dde_stab::model::{AffineMatrix, DdeSystem, Rational};
use dde_stab::oracle::{char_eval, cross_check, rightmost_root_scan, OracleOptions, ScanBox};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn scalar(a: f64, b: f64, tau: Rational) -> dde_stab::Result<DdeSystem> {
    let c = |v: f64| AffineMatrix::constant(DMatrix::from_element(1, 1, v), 0);
    DdeSystem::new(c(a), vec![(tau, c(b))])
}

fn main() -> dde_stab::Result<()> {
    let tau = Rational::new(1, 1);
    for (a, b) in [(0.0, -1.0), (0.0, -2.0), (-1.0, 0.5), (0.5, -0.2)] {
        let sys = scalar(a, b, tau)?;
        let scan = rightmost_root_scan(&sys, &[], &ScanBox::default_for(&sys))?;
        let r = cross_check(&sys, &[], None, &OracleOptions::default())?;
        println!(
            "a={a:+.1} b={b:+.1}: rho {:.6}  decay {:.3e}  rightmost Re {:+.4} (refined {})  agree {}",
            r.rho,
            r.decay_ratio.unwrap_or(f64::NAN),
            scan.rightmost_real,
            scan.refined,
            r.oracles_agree
        );
    }
    // a + b = 0 puts a root at the origin
    let sys = scalar(1.0, -1.0, tau)?;
    println!("|char(0)| at a=1, b=-1: {}", char_eval(&sys, &[], Complex64::new(0.0, 0.0))?.norm());
    Ok(())
}
