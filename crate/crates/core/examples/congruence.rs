//! The block matrices used to prove the reduced test: inertia of U and the
//! Schur-complement identity, on a few weight vectors.

use dde_stab::lmi::{build_u, inertia, lemma_b1_residual};
use dde_stab::Stencil;

fn main() -> dde_stab::Result<()> {
    let mut cases: Vec<Vec<f64>> = (2..=4)
        .map(|m| Stencil::current_point(m).map(|s| s.weights().to_vec()))
        .collect::<dde_stab::Result<_>>()?;
    cases.push(vec![2.0, -3.0, 1.0]);
    cases.push(vec![0.7, 1.3, -2.2, 0.4]);
    for w in cases {
        let k = w.len() - 1;
        let u = build_u(&w)?;
        let i = inertia(&u, 1e-9)?;
        let c = lemma_b1_residual(&w, 4 * k)?;
        println!("w = {w:?}");
        println!(
            "  inertia (+{}, -{}, 0:{}), expected (+{k}, -0, 0:{k})",
            i.positive, i.negative, i.zero
        );
        println!(
            "  min eig of leading block {:.3e}; Schur residual {:.1e}; other orientation {:.1e}",
            c.a_min_eig, c.residual, c.literal_residual
        );
    }
    Ok(())
}
