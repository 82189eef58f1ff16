//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use dde_stab::cli::{cmd_sweep, load_config, run_sweep};
use dde_stab::disc::{build_ba, build_d, build_dr};
use dde_stab::lmi::{build_u, expand_lmi, inertia, lemma_b1_residual, schur_chain};
use dde_stab::oracle::{cross_check, OracleOptions};
use dde_stab::sdp::{find_pd_step, projected_value, synthesize_theta, SolverOptions};
use dde_stab::stencil::OrderEstimate;
use dde_stab::verify::{normal, random_system};
use dde_stab::{AffineMatrix, DdeSystem, Discretization, GapForm, ParamBox, Rational, Stencil};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: dde_stab::Error) -> String {
    e.to_string()
}

/// `x' = a x + b x(t - τ)` with `θ = (a, b)`.
fn scalar(tau: Rational) -> DdeSystem {
    let c = |a: f64, b: f64| {
        AffineMatrix::new(
            DMatrix::zeros(1, 1),
            vec![DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, b)],
        )
        .unwrap()
    };
    DdeSystem::new(c(1.0, 0.0), vec![(tau, c(0.0, 1.0))]).unwrap()
}

fn m2(rows: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
}

/// Newest-first window of `L` samples: `D[i][i+s] = w_s` inside the window,
/// the overflow `i+s ≥ L` lands in the previous window at column `i+s-L`.
fn oracle_d_dr(w: &[f64], l: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut d = DMatrix::zeros(l, l);
    let mut dr = DMatrix::zeros(l, l);
    for i in 0..l {
        for (s, &ws) in w.iter().enumerate() {
            let q = i + s;
            if q < l {
                d[(i, q)] = ws;
            } else {
                dr[(i, q - l)] = ws;
            }
        }
    }
    (d, dr)
}

/// Possible definiteness classes (PD, PSD-singular, indefinite) when
/// eigenvalues within `tol·max|λ|` may take either sign.
fn possible_classes(s: &DMatrix<f64>, tol: f64) -> [bool; 3] {
    let e = s.clone().symmetric_eigen().eigenvalues;
    let scale = e.amax();
    if scale == 0.0 {
        return [false, true, false];
    }
    let thr = tol * scale;
    if e.iter().any(|&v| v < -thr) {
        [false, false, true]
    } else if e.iter().any(|&v| v.abs() <= thr) {
        [true, true, true]
    } else {
        [true, false, false]
    }
}

fn weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..m).map(|_| normal(rng)).collect();
    while w[0].abs() < 1e-3 {
        w[0] = normal(rng);
    }
    w
}

fn c1() -> Check {
    let st = Stencil::current_point(2).map_err(err)?;
    ensure(st.weights() == [1.0, -1.0], format!("weights {:?}", st.weights()))?;
    let d = build_d(st.weights(), 2).map_err(err)?;
    let dr = build_dr(st.weights(), 2).map_err(err)?;
    ensure(d == m2([[1.0, -1.0], [0.0, 1.0]]), format!("D = {d}"))?;
    ensure(dr == m2([[0.0, 0.0], [-1.0, 0.0]]), format!("Dr = {dr}"))?;

    let sys = scalar(Rational::new(1, 10));
    let disc = Discretization::with_step(&sys, &st, Rational::new(1, 10), Some(2)).map_err(err)?;
    let (b, a) = build_ba(&sys, 2, disc.lags()).map_err(err)?;
    ensure(disc.d() == &d && disc.dr() == &dr, "pipeline D/Dr differ from the standalone builders")?;
    ensure(b.base() == &DMatrix::zeros(2, 2) && a.base() == &DMatrix::zeros(2, 2), "nonzero constant part")?;
    // coefficients of a and b
    ensure(b.coeffs()[0] == m2([[1.0, 0.0], [0.0, 1.0]]), "B: a-coefficient")?;
    ensure(b.coeffs()[1] == m2([[0.0, 1.0], [0.0, 0.0]]), "B: b-coefficient")?;
    ensure(a.coeffs()[0] == DMatrix::zeros(2, 2), "A: a-coefficient")?;
    let a_corrected = m2([[0.0, 0.0], [1.0, 0.0]]);
    ensure(a.coeffs()[1] == a_corrected, format!("A: b-coefficient {}", a.coeffs()[1]))?;
    ensure(disc.b() == &b && disc.a() == &a, "pipeline B/A differ")?;

    // errata fixture: the delayed term on the diagonal of the older sample
    let a_errata = m2([[0.0, 0.0], [0.0, 1.0]]);
    ensure(a.coeffs()[1] != a_errata, "matches the errata fixture")?;
    Ok("D, Dr, B exact; A = [[0,0],[b,0]] (errata fixture [[0,0],[0,b]] rejected)".into())
}

fn c2() -> Check {
    let sys = scalar(Rational::new(1, 10));
    let st = Stencil::current_point(2).map_err(err)?;
    let disc = Discretization::with_step(&sys, &st, Rational::new(1, 10), Some(2)).map_err(err)?;
    let lmi = expand_lmi(&disc, GapForm::Paper).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (a, b) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let g = projected_value(&lmi, &[a, b]).map_err(err)?;
        worst = worst.max((g + a + b).abs());
    }
    ensure(worst <= 1e-10, format!("max |g + a + b| = {worst:e}"))?;

    let text = include_str!("../configs/scalar_sweep.toml").replace("counts = [21, 21]", "counts = [9, 9]");
    let mut cfg = load_config(&text).map_err(err)?;
    cfg.oracle = None;
    let res = run_sweep(&cfg).map_err(err)?;
    for c in &res.cells {
        let s = c.p1 + c.p2;
        let expected = if s.abs() <= 1e-12 {
            "boundary"
        } else if s < 0.0 {
            "stable"
        } else {
            "unstable"
        };
        ensure(
            c.verdict.as_str() == expected,
            format!("cell ({}, {}) is {}", c.p1, c.p2, c.verdict.as_str()),
        )?;
    }
    Ok(format!("max |g + a + b| = {worst:.1e}; sweep boundary on a + b = 0 over {} cells", res.cells.len()))
}

fn c3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = 0;
    let mut raw = 0;
    for _ in 0..240 {
        let m = rng.gen_range(2..=4);
        let w = weights(&mut rng, m);
        let k = m - 1;
        let dt = DMatrix::from_fn(k, k, |j, c| if c >= j { w[c - j] } else { 0.0 });
        let drt = DMatrix::from_fn(k, k, |j, c| if c <= j { w[m - 1 - (j - c)] } else { 0.0 });
        let gt = &dt * dt.transpose() - drt.transpose() * &drt;
        let gt_set = possible_classes(&gt, 1e-10);
        let mut l = k;
        while l <= 12 {
            cases += 1;
            let (d, dr) = oracle_d_dr(&w, l);
            let lib_d = build_d(&w, l).map_err(err)?;
            let lib_dr = build_dr(&w, l).map_err(err)?;
            ensure(lib_d == d && lib_dr == dr, format!("builders differ at w = {w:?}, L = {l}"))?;
            let q = &d * d.transpose() - dr.transpose() * &dr;
            let q_set = possible_classes(&q, 1e-10);
            if q_set != gt_set {
                raw += 1;
            }
            ensure(
                (0..3).any(|i| q_set[i] && gt_set[i]),
                format!("class mismatch outside the band: w = {w:?}, L = {l}"),
            )?;
            l += k;
        }
    }
    Ok(format!("240 weight vectors, {cases} (w, L) pairs, 0 disagreements ({raw} touch the band)"))
}

fn c4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_literal: f64 = 0.0;
    let mut worst_schur: f64 = 0.0;
    let mut literal_fail = 0;
    for _ in 0..100 {
        let m = rng.gen_range(2..=4);
        let k = m - 1;
        let w = weights(&mut rng, m);
        let c = lemma_b1_residual(&w, 4 * k).map_err(err)?;
        ensure(c.a_min_eig > 0.0, format!("leading block not PD at {w:?}"))?;
        let scale = c.z_norm.max(f64::MIN_POSITIVE);
        worst_literal = worst_literal.max(c.literal_residual / scale);
        worst_schur = worst_schur.max(c.residual / scale);
        if c.literal_residual / scale > 1e-8 {
            literal_fail += 1;
        }

        let u = build_u(&w).map_err(err)?;
        let i = inertia(&u, 1e-9).map_err(err)?;
        ensure(
            (i.positive, i.negative, i.zero) == (k, 0, k),
            format!("inertia {:?} at {w:?}", (i.positive, i.negative, i.zero)),
        )?;

        // blocks read off the standalone D, Dr
        let (d, dr) = oracle_d_dr(&w, 4 * k);
        let ddt = &d * d.transpose();
        let drtdr = dr.transpose() * &dr;
        let z = drtdr.view((0, 0), (k, k)).into_owned();
        let a = ddt.view((0, 0), (k, k)) - &z;
        let b = ddt.view((0, k), (k, k)).into_owned();
        let mut expected = DMatrix::zeros(2 * k, 2 * k);
        expected.view_mut((0, 0), (k, k)).copy_from(&a);
        expected.view_mut((0, k), (k, k)).copy_from(&b);
        expected.view_mut((k, 0), (k, k)).copy_from(&b.transpose());
        expected.view_mut((k, k), (k, k)).copy_from(&z);
        let dev = (&u - &expected).amax();
        ensure(dev <= 1e-12 * expected.amax().max(1.0), format!("𝒰 entries off by {dev:e} at {w:?}"))?;
    }

    let w: Vec<f64> = (0..3).map(|_| normal(&mut rng)).collect();
    let (w1, w2, w3) = (w[0], w[1], w[2]);
    #[rustfmt::skip]
    let pattern = DMatrix::from_row_slice(4, 4, &[
        w1 * w1, w1 * w2, w1 * w3, 0.0,
        w1 * w2, w1 * w1 + w2 * w2, w1 * w2 + w2 * w3, w1 * w3,
        w1 * w3, w1 * w2 + w2 * w3, w2 * w2 + w3 * w3, w2 * w3,
        0.0, w1 * w3, w2 * w3, w3 * w3,
    ]);
    let dev = (build_u(&w).map_err(err)? - &pattern).amax();
    ensure(dev <= 1e-12, format!("m = 3 pattern off by {dev:e}"))?;

    let summary = format!(
        "𝒜 ≻ 0, inertia (m-1, 0, m-1) and the m = 3 pattern hold on 100 + 1 draws; \
         ‖ℬ𝒜⁻¹ℬᵀ - 𝒵‖∞ relative: max {worst_literal:.2e}, {literal_fail}/100 above 1e-8; \
         ‖ℬᵀ𝒜⁻¹ℬ - 𝒵‖∞ relative: max {worst_schur:.1e}"
    );
    if literal_fail > 0 {
        Err(format!(
            "{summary}. The identity as written does not hold: 𝒰 = [[𝒜, ℬ], [ℬᵀ, 𝒵]] has Schur complement 𝒵 - ℬᵀ𝒜⁻¹ℬ"
        ))
    } else {
        Ok(summary)
    }
}

fn c5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut band = 0;
    let mut contractive = 0;
    let mut differ = 0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=2);
        let lag = rng.gen_range(1..=3);
        let sys = random_system(&mut rng, n, 1, &[lag], 10);
        let st = Stencil::current_point(rng.gen_range(2..=3)).map_err(err)?;
        let disc = Discretization::new(&sys, &st, 1).map_err(err)?;
        let theta = [rng.gen_range(-1.0..1.0)];
        let dt = rng.gen_range(0.001..0.2);
        let t = schur_chain(&disc, &theta, dt, GapForm::Transposed).map_err(err)?;
        let p = schur_chain(&disc, &theta, dt, GapForm::Paper).map_err(err)?;
        differ += usize::from(t.gap_pd != p.gap_pd);

        // independent largest singular value
        let g = disc.d() - disc.b().eval(&theta).map_err(err)? * dt;
        let r = -disc.dr() + disc.a().eval(&theta).map_err(err)? * dt;
        let mmat = g.clone().lu().solve(&r).ok_or("singular step matrix")?;
        let sigma = mmat.singular_values().max();
        ensure((sigma - t.opnorm).abs() <= 1e-9 * sigma.max(1.0), "operator norm mismatch")?;

        if (sigma - 1.0).abs() < 1e-8 || t.block_min_eig.abs() < 1e-8 || t.gap_min_eig.abs() < 1e-8 {
            band += 1;
            continue;
        }
        contractive += usize::from(sigma < 1.0);
        ensure(
            (sigma < 1.0) == t.block_pd && t.block_pd == t.gap_pd,
            format!("chain breaks: σ = {sigma}, block λ = {:e}, gap λ = {:e}", t.block_min_eig, t.gap_min_eig),
        )?;
    }
    Ok(format!(
        "50 instances ({contractive} contractive, {band} in band); paper/transposed gap verdicts differ in {differ}/50 ({:.0}%)",
        differ as f64 * 2.0
    ))
}

fn c6() -> Check {
    let sys = scalar(Rational::new(1, 10));
    let st = Stencil::current_point(2).map_err(err)?;
    let disc = Discretization::with_step(&sys, &st, Rational::new(1, 10), Some(2)).map_err(err)?;
    let lmi = expand_lmi(&disc, GapForm::Paper).map_err(err)?;
    let good = [-1.0, 0.5];
    let bad = [1.0, 0.5];
    let g_good = projected_value(&lmi, &good).map_err(err)?;
    let g_bad = projected_value(&lmi, &bad).map_err(err)?;
    ensure((g_good - 0.5).abs() < 1e-10 && g_bad < 0.0, format!("tstar {g_good}, {g_bad}"))?;
    let dt0 = find_pd_step(&lmi, &good, 0.1, 20).map_err(err)?.ok_or("no PD step for (-1, 0.5)")?;
    let none = find_pd_step(&lmi, &bad, 0.1, 20).map_err(err)?;
    ensure(none.is_none(), format!("(1, 0.5) PD at δt = {none:?}"))?;
    Ok(format!("(-1, 0.5): PD at δt₀ = {dt0}; (1, 0.5): non-PD for δt = 0.1·2^-k, k = 0..20"))
}

fn c7() -> Check {
    let tau = Rational::new(1, 5);
    let sys = scalar(tau);
    let opts = OracleOptions {
        dt: Some(tau / 20),
        ..OracleOptions::default()
    };
    let mut checked = 0;
    let mut skipped = 0;
    for i in 0..5 {
        for j in 0..5 {
            let (a, b) = (-2.0 + i as f64, -2.0 + j as f64);
            if (a + b).abs() < 0.25 {
                skipped += 1;
                continue;
            }
            let expected = a + b < 0.0;
            let r = cross_check(&sys, &[a, b], Some(expected), &opts).map_err(err)?;
            checked += 1;
            ensure(
                r.oracles_agree && r.pipeline_agrees == Some(true),
                format!(
                    "({a}, {b}): ρ = {}, decays {:?}, rightmost {:?}, a + b < 0: {expected}",
                    r.rho, r.sim_decays, r.rightmost_real
                ),
            )?;
        }
    }
    Ok(format!("{checked} margin-interior cells agree ({skipped} on a + b = 0 skipped)"))
}

fn c8() -> Check {
    let mut slopes = Vec::new();
    for m in [2, 3] {
        let st = Stencil::current_point(m).map_err(err)?;
        let t0: f64 = 0.3;
        let s = match st.empirical_order(f64::sin, t0.cos(), t0) {
            OrderEstimate::Slope(s) => s,
            OrderEstimate::Saturated => return Err(format!("m = {m}: error saturated")),
        };
        ensure((s - (m - 1) as f64).abs() <= 0.2, format!("m = {m}: slope {s}"))?;
        slopes.push(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for m in 2..=5 {
        let st = Stencil::current_point(m).map_err(err)?;
        for _ in 0..20 {
            let deg = rng.gen_range(0..m);
            let c: Vec<f64> = (0..=deg).map(|_| normal(&mut rng)).collect();
            let f = |t: f64| c.iter().rev().fold(0.0, |acc, ci| acc * t + ci);
            let df = |t: f64| c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, ci)| acc * t + k as f64 * ci);
            let t0 = rng.gen_range(-1.0..1.0);
            let h = rng.gen_range(0.05..0.5);
            let scale = c.iter().map(|v| v.abs()).sum::<f64>().max(1.0) / h;
            let rel = (st.derivative(f, t0, h) - df(t0)).abs() / scale;
            worst = worst.max(rel);
        }
    }
    ensure(worst <= 1e-12, format!("polynomial error {worst:e}"))?;
    Ok(format!(
        "slopes {:.3} (m = 2), {:.3} (m = 3); polynomial exactness error {worst:.1e}",
        slopes[0], slopes[1]
    ))
}

fn c9() -> Check {
    let sys = scalar(Rational::new(1, 100));
    let st = Stencil::current_point(2).map_err(err)?;
    let disc = Discretization::with_step(&sys, &st, Rational::new(1, 100), Some(2)).map_err(err)?;
    let lmi = expand_lmi(&disc, GapForm::Paper).map_err(err)?;
    let pbox = ParamBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).map_err(err)?;
    let syn = synthesize_theta(&lmi, &pbox, &SolverOptions::default()).map_err(err)?;
    ensure(
        (syn.theta[0] + 1.0).abs() <= 1e-6 && (syn.theta[1] + 1.0).abs() <= 1e-6,
        format!("θ* = {:?}", syn.theta),
    )?;
    ensure((syn.tstar - 2.0).abs() <= 1e-6, format!("tstar = {}", syn.tstar))?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let t1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let t2 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let s: f64 = rng.gen_range(0.0..1.0);
        let mid = [s * t1[0] + (1.0 - s) * t2[0], s * t1[1] + (1.0 - s) * t2[1]];
        let lhs = projected_value(&lmi, &mid).map_err(err)?;
        let rhs = s * projected_value(&lmi, &t1).map_err(err)? + (1.0 - s) * projected_value(&lmi, &t2).map_err(err)?;
        ensure(lhs >= rhs - 1e-10, format!("concavity fails: {lhs} < {rhs}"))?;
    }
    Ok(format!(
        "θ* = ({:.6}, {:.6}), tstar = {:.9}, certified {}; concave on 100 triples",
        syn.theta[0], syn.theta[1], syn.tstar, syn.certified
    ))
}

fn c10() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/scalar_sweep.toml");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let cfg = load_config(&text).map_err(err)?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        cmd_sweep(&cfg, &out).map_err(err)?;
        outputs.push(std::fs::read(out.join("sweep.csv")).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], "CSV bytes differ between runs")?;
    let cells = outputs[0].iter().filter(|&&c| c == b'\n').count() - 1;
    Ok(format!("two runs of {cells} cells, byte-identical ({} bytes)", outputs[0].len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked-example matrices", 1, c1),
        ("scalar projected value", 5, c2),
        ("reduced-gap class", 30, c3),
        ("leading-block lemma", 10, c4),
        ("contraction chain", 10, c5),
        ("small-step consistency", 10, c6),
        ("oracle agreement grid", 60, c7),
        ("stencil orders", 5, c8),
        ("optimizer", 10, c9),
        ("sweep determinism", 10, c10),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget} s budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {}: {} {name} ({:.2} s / {budget} s): {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
