//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use ni_core::lti::StateSpaceSystem;
use ni_core::models::{closed_loop_m, example_controller, example_m_minimal, psi_inv, two_mass_plant, TwoMassParams};
use ni_core::ni::{
    check_dc_ordering, classify, dc_minus_inf, generate_ni, generate_ni_with, sum_with_class, Feedthrough, NiClass,
    SweepConfig,
};
use ni_core::numerics::{spectral_max_real, sym_eigenvalues, ComplexMatrix, Tolerances};
use ni_core::sdp::{solve_ni_feasibility, verify_certificate, FeasibilityProblem};
use ni_core::stability::{
    det_i_minus_ab_nonzero, phi_t_decomposition, robustness_margin, theorem_stability_test, MarginPart, OracleVerdict,
    StabilityConfig, StabilityReport, TheoremVerdict,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel_close(got: f64, want: f64, rel: f64, what: &str) -> Result<(), String> {
    check((got - want).abs() <= rel * want.abs(), format!("{what}: got {got:.12}, want {want:.12}"))
}

fn delta(k: f64, alpha: f64) -> StateSpaceSystem {
    two_mass_plant(&TwoMassParams::new(k, alpha).unwrap()).unwrap().2
}

fn golden_values() -> Outcome {
    let m = example_m_minimal().map_err(|e| e.to_string())?;
    let tol = Tolerances::default();
    let cfg = StabilityConfig::default();
    let m0 = m.dc_gain().map_err(|e| e.to_string())?;
    let l = spectral_max_real(&m0, tol.eq_tol).map_err(|e| e.to_string())?;
    rel_close(l, (3.0 + 5f64.sqrt()) / 2.0, 1e-7, "λ̄(M(0))")?;
    let margin = robustness_margin(&m, MarginPart::I, &cfg).map_err(|e| e.to_string())?;
    rel_close(margin.gamma_star.unwrap_or(f64::NAN), 2.0 / (3.0 + 5f64.sqrt()), 1e-7, "γ*")?;
    for k in [0.5, 1.0, 2.0, 10.0] {
        let d0 = delta(k, 1.0).dc_gain().map_err(|e| e.to_string())?;
        let loop_eig = spectral_max_real(&(&d0 * &m0), tol.eq_tol).map_err(|e| e.to_string())?;
        rel_close(loop_eig, 5.0 / (2.0 * (2.0 * k + 1.0)), 1e-7, &format!("λ̄(Δ(0)M(0)) at k={k}"))?;
        let d_eig = spectral_max_real(&d0, tol.eq_tol).map_err(|e| e.to_string())?;
        rel_close(d_eig, 1.0 / (2.0 * k + 1.0), 1e-7, &format!("λ̄(Δ(0)) at k={k}"))?;
    }
    for alpha in [0.1, 1.0, 10.0] {
        for (k, want) in [
            (0.74, TheoremVerdict::Unstable),
            (0.75, TheoremVerdict::NumericallyMarginal),
            (0.76, TheoremVerdict::Stable),
        ] {
            let r = theorem_stability_test(&delta(k, alpha), &m, &cfg).map_err(|e| e.to_string())?;
            check(r.theorem_verdict == want, format!("k={k}, α={alpha}: {}", r.theorem_verdict))?;
        }
    }
    let (_, p, _) = two_mass_plant(&TwoMassParams::new(2.0, 1.0).unwrap()).map_err(|e| e.to_string())?;
    let raw = closed_loop_m(&p, &example_controller().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let closed_form = psi_inv().transpose() * psi_inv();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let w = 1e-3 * 1e6f64.powf(i as f64 / 49.0);
        let s = Complex64::new(0.0, w);
        let want = closed_form.map(|v| Complex64::new(v, 0.0) / (s + 1.0));
        worst = worst.max((raw.evaluate(s).map_err(|e| e.to_string())? - want).norm());
    }
    check(worst <= 1e-8, format!("M(jω) deviation {worst:e}"))?;
    Ok(format!("λ̄(M(0)) = {l:.7}, γ* = {:.7}, max M deviation {worst:.1e}", margin.gamma_star.unwrap()))
}

/// Randomized `(𝒞, 𝒞ₛ)` pairs with the `𝒞ₛ` operand rescaled so that the DC
/// loop gain straddles 1.
fn random_pairs(target: usize) -> Result<Vec<(StateSpaceSystem, StateSpaceSystem, StabilityReport)>, String> {
    let cfg = StabilityConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::with_capacity(target);
    let mut seed = 0u64;
    while out.len() < target {
        seed += 1;
        if seed > 2 * target as u64 {
            return Err(format!("only {} decided pairs from {} draws", out.len(), seed - 1));
        }
        let io = rng.random_range(1..=4);
        let m = generate_ni(rng.random_range(2..=10), io, 2 * seed, false).map_err(|e| e.to_string())?.system;
        let n = generate_ni_with(rng.random_range(io.max(2)..=10), io, 2 * seed + 1, true, Feedthrough::Zero)
            .map_err(|e| e.to_string())?
            .system;
        let base = spectral_max_real(&(m.dc_gain().unwrap() * n.dc_gain().unwrap()), 1e-8).unwrap_or(0.0);
        let n = if base > 0.0 { n.scaled(rng.random_range(-1.5f64..1.5).exp() / base) } else { n };
        let r = theorem_stability_test(&m, &n, &cfg).map_err(|e| e.to_string())?;
        if r.preconditions.all_hold() {
            out.push((m, n, r));
        }
    }
    Ok(out)
}

fn theorem_oracle_equivalence() -> Outcome {
    let pairs = random_pairs(500)?;
    let (mut stable, mut unstable, mut marginal, mut disagree) = (0, 0, 0, 0);
    for (_, _, r) in &pairs {
        match r.theorem_verdict {
            TheoremVerdict::Stable => stable += 1,
            TheoremVerdict::Unstable => unstable += 1,
            _ => marginal += 1,
        }
        if r.agreement == Some(false)
            || (r.agreement.is_none() && r.theorem_verdict != TheoremVerdict::NumericallyMarginal)
        {
            disagree += 1;
        }
    }
    check(disagree == 0, format!("{disagree} disagreements"))?;
    check(stable > 0 && unstable > 0, format!("degenerate sample: {stable} stable, {unstable} unstable"))?;
    Ok(format!("{} pairs: {stable} stable, {unstable} unstable, {marginal} marginal, 0 disagreements", pairs.len()))
}

fn classification_round_trip() -> Outcome {
    let sweep = SweepConfig::default();
    let tol = Tolerances::default();
    let (mut ni, mut strict, mut refuted) = (0, 0, 0);
    let mut identity_worst: f64 = 0.0;
    let mut gap_min = f64::INFINITY;
    for seed in 0..200u64 {
        let g = generate_ni((2 + seed % 9) as usize, (1 + seed % 4) as usize, 1000 + seed, false)
            .map_err(|e| e.to_string())?;
        let v = classify(&g.system, &sweep, &tol).map_err(|e| e.to_string())?;
        check(v.class_tag.is_ni(), format!("seed {seed}: {}", v.class_tag))?;
        let cert = v.certificate.as_ref().ok_or(format!("seed {seed}: no certificate"))?;
        check(verify_certificate(&g.system, cert, &tol), format!("seed {seed}: certificate fails verification"))?;
        if v.class_tag == NiClass::StrictNi {
            strict += 1;
        } else {
            ni += 1;
        }
        let gap = dc_minus_inf(&g.system).map_err(|e| e.to_string())?;
        let cyc = g.system.c() * &cert.y * g.system.c().transpose();
        identity_worst = identity_worst.max((&gap - &cyc).norm() / (1.0 + cyc.norm()));
        gap_min = gap_min.min(sym_eigenvalues(&gap).map_err(|e| e.to_string())?[0]);
        check(
            check_dc_ordering(&g.system, &v, &tol).map_err(|e| e.to_string())?.holds,
            format!("seed {seed}: DC ordering"),
        )?;

        let flipped = g.system.negated();
        let w = classify(&flipped, &sweep, &tol).map_err(|e| e.to_string())?;
        check(w.class_tag == NiClass::NotNi, format!("seed {seed} negated: {}", w.class_tag))?;
        let f = w.falsifier.ok_or(format!("seed {seed} negated: no falsifier"))?;
        check(f.omega > 0.0 && f.min_eig < 0.0, format!("seed {seed} negated: bad falsifier"))?;
        refuted += 1;
    }
    check(identity_worst <= 1e-6, format!("R(0) − R(∞) vs CYCᵀ: {identity_worst:e}"))?;
    check(gap_min >= -1e-7, format!("λ_min(R(0) − R(∞)) = {gap_min:e}"))?;
    Ok(format!(
        "200 certified ({strict} StrictNi, {ni} Ni), {refuted} refuted; identity residual {identity_worst:.1e}, min gap eig {gap_min:.1e}"
    ))
}

fn dc_identity() -> Outcome {
    // Also covered per system inside the round-trip criterion; here on
    // modal sums and the two-mass operands.
    let sweep = SweepConfig::default();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut systems: Vec<StateSpaceSystem> = Vec::new();
    for _ in 0..30 {
        let modes = (0..rng.random_range(1..=6))
            .map(|_| {
                ni_core::models::Mode::new(
                    rng.random_range(0.1..3.0),
                    rng.random_range(0.01..1.0),
                    rng.random_range(0.3..20.0),
                )
                .unwrap()
            })
            .collect();
        let model = ni_core::models::ModalModel::new(modes).map_err(|e| e.to_string())?;
        systems.push(ni_core::models::modal_to_state_space(&model).map_err(|e| e.to_string())?);
    }
    systems.push(example_m_minimal().map_err(|e| e.to_string())?);
    for k in [0.5, 2.0, 10.0] {
        systems.push(delta(k, 1.0));
    }
    let mut worst: f64 = 0.0;
    let mut gap_min = f64::INFINITY;
    for (i, s) in systems.iter().enumerate() {
        let v = classify(s, &sweep, &tol).map_err(|e| e.to_string())?;
        let cert = v.certificate.as_ref().ok_or(format!("system {i}: {} without certificate", v.class_tag))?;
        let gap = dc_minus_inf(s).map_err(|e| e.to_string())?;
        let cyc = s.c() * &cert.y * s.c().transpose();
        worst = worst.max((&gap - &cyc).norm() / (1.0 + cyc.norm()));
        gap_min = gap_min.min(sym_eigenvalues(&gap).map_err(|e| e.to_string())?[0]);
    }
    check(worst <= 1e-6, format!("identity residual {worst:e}"))?;
    check(gap_min >= -1e-7, format!("λ_min(R(0) − R(∞)) = {gap_min:e}"))?;
    Ok(format!("{} certified systems, identity residual {worst:.1e}, min gap eig {gap_min:.1e}", systems.len()))
}

fn sums() -> Outcome {
    let sweep = SweepConfig::default();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut plain, mut strict) = (0, 0);
    for i in 0..100u64 {
        let io = rng.random_range(1..=3);
        let a = generate_ni(rng.random_range(2..=6), io, 5000 + 2 * i, false).map_err(|e| e.to_string())?.system;
        let b = generate_ni(rng.random_range(2..=6), io, 5001 + 2 * i, false).map_err(|e| e.to_string())?.system;
        let va = classify(&a, &sweep, &tol).map_err(|e| e.to_string())?;
        let vb = classify(&b, &sweep, &tol).map_err(|e| e.to_string())?;
        let (sum, v) = sum_with_class(&a, &va, &b, &vb, &tol).map_err(|e| format!("sum {i}: {e}"))?;
        check(v.class_tag.is_ni(), format!("sum {i}: {}", v.class_tag))?;
        let fresh = classify(&sum, &sweep, &tol).map_err(|e| e.to_string())?;
        check(fresh.class_tag != NiClass::NotNi, format!("sum {i}: fresh classification NotNi"))?;
        plain += 1;
    }
    for i in 0..20u64 {
        let s = generate_ni_with(rng.random_range(2..=6), 2, 7000 + i, true, Feedthrough::Zero)
            .map_err(|e| e.to_string())?
            .system;
        let d = delta(rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
        let vs = classify(&s, &sweep, &tol).map_err(|e| e.to_string())?;
        let vd = classify(&d, &sweep, &tol).map_err(|e| e.to_string())?;
        check(
            vs.class_tag == NiClass::StrictNi && vd.class_tag == NiClass::Ni,
            format!("pair {i}: {} + {}", vs.class_tag, vd.class_tag),
        )?;
        let (_, v) = sum_with_class(&s, &vs, &d, &vd, &tol).map_err(|e| format!("strict sum {i}: {e}"))?;
        check(v.class_tag == NiClass::StrictNi, format!("strict sum {i}: {}", v.class_tag))?;
        strict += 1;
    }
    Ok(format!("{plain} Ni+Ni sums certified by diag(Y₁, Y₂), {strict} StrictNi+Ni sums StrictNi"))
}

fn hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    (&g + g.adjoint()).map(|z| z * 0.5)
}

fn lemma_det() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut smallest = f64::INFINITY;
    for i in 0..1000 {
        let n = rng.random_range(1..=5);
        let j = Complex64::new(0.0, 1.0);
        let g1 = DMatrix::from_fn(n, rng.random_range(0..=n), |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let k1 = &g1 * g1.adjoint();
        let g2 = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let k2 = &g2 * g2.adjoint() + ComplexMatrix::identity(n, n) * Complex64::new(0.1, 0.0);
        let a = hermitian(n, &mut rng) - k1.map(|z| z * j);
        let b = hermitian(n, &mut rng) - k2.map(|z| z * j);
        let ok = det_i_minus_ab_nonzero(&a, &b, 1e-10).map_err(|e| format!("pair {i}: {e}"))?;
        check(ok, format!("pair {i}: det vanished"))?;
        smallest = smallest.min((ComplexMatrix::identity(n, n) - &a * &b).determinant().norm());
    }
    Ok(format!("1000 pairs, min |det(I − AB)| = {smallest:.2e}"))
}

fn phi_t_identity() -> Outcome {
    let pairs = random_pairs(100)?;
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (i, (m, n, r)) in pairs.iter().enumerate() {
        let y = r.preconditions.m_class.certificate.as_ref().ok_or(format!("pair {i}: m uncertified"))?;
        let yb = r.preconditions.n_class.certificate.as_ref().ok_or(format!("pair {i}: n uncertified"))?;
        let pt = phi_t_decomposition(m, n, y, yb, &tol).map_err(|e| format!("pair {i}: {e}"))?;
        worst = worst.max(pt.residual);
        if r.theorem_verdict == TheoremVerdict::NumericallyMarginal {
            continue;
        }
        let oracle = r.oracle.as_ref().ok_or(format!("pair {i}: no oracle"))?;
        let stable = oracle.verdict == OracleVerdict::Stable;
        check(
            (pt.t_min_eig > 0.0) == stable,
            format!("pair {i}: λ_min(T) = {:e}, oracle {}", pt.t_min_eig, oracle.verdict),
        )?;
        compared += 1;
    }
    check(worst <= 1e-7, format!("‖𝒜 − ΦT‖ relative {worst:e}"))?;
    Ok(format!("{} pairs, worst relative residual {worst:.1e}, {compared} T-sign checks", pairs.len()))
}

fn solver_determinism() -> Outcome {
    let tol = Tolerances::default();
    let mut systems: Vec<StateSpaceSystem> = (0..40u64)
        .map(|s| generate_ni((2 + s % 9) as usize, (1 + s % 4) as usize, 9000 + s, false).map(|g| g.system))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    systems.extend((0..20u64).map(|s| generate_ni(4, 2, 9500 + s, false).unwrap().system.negated()));
    systems.push(example_m_minimal().map_err(|e| e.to_string())?);
    systems.push(delta(2.0, 1.0));
    let mut feasible = 0;
    for (i, s) in systems.iter().enumerate() {
        let p = FeasibilityProblem::for_system(s).map_err(|e| e.to_string())?;
        let first = solve_ni_feasibility(&p).map_err(|e| e.to_string())?;
        let second = solve_ni_feasibility(&p).map_err(|e| e.to_string())?;
        let same = match (first.certificate(), second.certificate()) {
            (Some(a), Some(b)) => a.y.as_slice().iter().zip(b.y.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()),
            (None, None) => first.diagnostics.stop_reason == second.diagnostics.stop_reason,
            _ => false,
        };
        check(same, format!("system {i}: repeated solves differ"))?;
        if let Some(c) = first.certificate() {
            check(verify_certificate(s, c, &tol), format!("system {i}: certificate fails verification"))?;
            feasible += 1;
        }
    }
    Ok(format!("{} systems solved twice, bit-identical; {feasible} certificates verified", systems.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 two-mass golden values", golden_values),
        ("2 theorem vs eigenvalue oracle", theorem_oracle_equivalence),
        ("3 certificate / falsifier round trip", classification_round_trip),
        ("4 R(0) − R(∞) = CYCᵀ", dc_identity),
        ("5 sums keep the class", sums),
        ("6 det(I − AB) ≠ 0", lemma_det),
        ("7 𝒜 = ΦT and T-sign pivot", phi_t_identity),
        ("8 solver determinism and validity", solver_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.2}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
