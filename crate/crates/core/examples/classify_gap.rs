//! Class of the constant LMI term for several stencils and windows, next to
//! the reduced (m-1)x(m-1) test, plus the two remainder orientations.

use dde_stab::disc::{build_d, build_dr};
use dde_stab::lmi::{classify, classify_by_theorem, gap_matrix, GapForm, THEOREM_TOL};
use dde_stab::Stencil;

fn main() -> dde_stab::Result<()> {
    for m in 2..=5 {
        let st = Stencil::current_point(m)?;
        let reduced = classify_by_theorem(st.weights())?;
        println!("m={m} weights {:?}: reduced test -> {}", st.weights(), reduced.as_str());
        for window in (m - 1..=12).step_by(m - 1) {
            let d = build_d(st.weights(), window)?;
            let dr = build_dr(st.weights(), window)?;
            let paper = classify(&gap_matrix(&d, &dr, GapForm::Paper), THEOREM_TOL, 0.0);
            let transposed = classify(&gap_matrix(&d, &dr, GapForm::Transposed), THEOREM_TOL, 0.0);
            println!(
                "  L={window:>2}: paper {:<18} transposed {:<18} min eig {:+.3e}",
                paper.class.as_str(),
                transposed.class.as_str(),
                paper.eigen.min()
            );
        }
    }
    Ok(())
}
