//! Backward stencil weights, their moments and observed convergence orders.

use dde_stab::stencil::{OrderEstimate, Stencil, MAX_POINTS};

fn main() -> dde_stab::Result<()> {
    println!("current-point stencils (offsets 0..m-1)");
    for m in 2..=MAX_POINTS {
        let st = Stencil::current_point(m)?;
        println!("  m={m}: {:?}  residual {:.1e}", st.weights(), st.moment_residual());
    }
    println!("historical stencils (offsets 1..k)");
    for k in 2..=4 {
        let st = Stencil::historical(k)?;
        println!("  k={k}: {:?}", st.weights());
    }

    println!("empirical order on exp at t=0");
    for m in 2..=4 {
        let st = Stencil::current_point(m)?;
        match st.empirical_order(f64::exp, 1.0, 0.0) {
            OrderEstimate::Slope(s) => println!("  m={m}: slope {s:.3} (expected {})", m - 1),
            OrderEstimate::Saturated => println!("  m={m}: saturated at round-off"),
        }
    }
    Ok(())
}
