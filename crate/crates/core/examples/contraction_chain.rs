//! Compares the operator-norm test, the 2x2 block test and both gap
//! orientations on random scalar systems.

use dde_stab::lmi::{schur_chain, GapForm};
use dde_stab::verify::random_system;
use dde_stab::{Discretization, Stencil};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dde_stab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let st = Stencil::current_point(2)?;
    let (mut agree, mut differ) = (0, 0);
    for _ in 0..20 {
        let sys = random_system(&mut rng, 1, 1, &[2], 10);
        let disc = Discretization::new(&sys, &st, 1)?;
        let theta = [rng.gen_range(-1.0..1.0)];
        let dt = rng.gen_range(0.001..0.1);
        let t = schur_chain(&disc, &theta, dt, GapForm::Transposed)?;
        let p = schur_chain(&disc, &theta, dt, GapForm::Paper)?;
        agree += usize::from(t.all_agree());
        differ += usize::from(t.gap_pd != p.gap_pd);
        println!(
            "||M|| {:.4}  block PD {}  transposed gap PD {}  paper gap PD {}",
            t.opnorm, t.block_pd, t.gap_pd, p.gap_pd
        );
    }
    println!("transposed chain consistent in {agree}/20, paper orientation differs in {differ}/20");
    Ok(())
}
