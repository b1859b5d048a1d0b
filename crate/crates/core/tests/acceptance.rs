//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use std::sync::Arc;

use oddform_core::action::{
    run_example_174, theorem47_exhaustive_n1, verify_action_laws, verify_lemma46_agreement,
    involution_invariant_ideals,
};
use oddform_core::congruence::{
    eu_generators, verify_lemma37, verify_lemma38, verify_lemma71, ElementaryMove, Level,
};
use oddform_core::formparam::{verify_lemma7, verify_remark10, FormParameter, FormRing, HPoint};
use oddform_core::rings::{
    build_ring, make_odd_quadruple, standard_involution, Elem, InvolutionName, RingSpec,
};
use oddform_core::sandwich::{
    has_support, random_unitary, reduce_first_entry, reduce_two_columns, SupportClass,
};
use oddform_core::unitary::{
    classical_instance, enumerate_unitary_group, is_unitary, is_unitary_bruteforce,
    verify_lemma15, verify_relations, ClassicalKind, FormsContext, UMatrix, ValueSampling,
};

use rand::SeedableRng;

fn ctx_with(spec: RingSpec, inv: InvolutionName, lambda: &str, mu: &str, n: usize) -> FormsContext {
    let ring = build_ring(&spec).unwrap();
    let bar = Arc::new(standard_involution(&ring, inv).unwrap());
    let lambda = match lambda {
        "one" => ring.one(),
        "minus_one" => ring.neg(ring.one()),
        other => other.parse::<Elem>().unwrap(),
    };
    let mu = match mu {
        "zero" => ring.zero(),
        "two" => ring.add(ring.one(), ring.one()),
        other => other.parse::<Elem>().unwrap(),
    };
    let quad = make_odd_quadruple(bar, lambda, mu).unwrap();
    let delta = FormParameter::max(&quad);
    FormsContext::new(FormRing::new(quad, delta), n).unwrap()
}

fn ctx_f2(n: usize) -> FormsContext {
    ctx_with(RingSpec::PrimeField { p: 2 }, InvolutionName::Identity, "one", "zero", n)
}

fn ctx_f3(n: usize) -> FormsContext {
    ctx_with(RingSpec::PrimeField { p: 3 }, InvolutionName::Identity, "one", "zero", n)
}

fn ctx_z4(n: usize) -> FormsContext {
    ctx_with(RingSpec::IntegersMod { m: 4 }, InvolutionName::Identity, "one", "two", n)
}

fn ctx_m2f2(n: usize) -> FormsContext {
    ctx_with(
        RingSpec::Matrix { dim: 2, inner: Box::new(RingSpec::PrimeField { p: 2 }) },
        InvolutionName::Transpose,
        "one",
        "zero",
        n,
    )
}

fn report(criterion: &str, ok: bool, detail: &str) {
    println!("[{}] {} - {}", criterion, if ok { "PASS" } else { "FAIL" }, detail);
    assert!(ok, "{criterion} failed: {detail}");
}

/// Criterion 1: the worked scenario over M_2(F_2) at n = 3, exact match.
#[test]
fn criterion_1_example_174_reproduction() {
    let start = std::time::Instant::now();
    let outcome = run_example_174(3, 0).unwrap();
    let failed: Vec<&str> = outcome
        .checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name.as_str())
        .collect();
    let elapsed = start.elapsed();
    report(
        "criterion 1",
        failed.is_empty() && elapsed.as_secs() < 60,
        &format!(
            "example-174 scenario: {} checks, failed: {:?}, {:.1}s",
            outcome.checks.len(),
            failed,
            elapsed.as_secs_f64()
        ),
    );
}

/// Criterion 2: the full relation calculus, exhaustive at n = 3 over F_2 and
/// Z/4, sampled with at least 10^4 cases over M_2(F_2).
#[test]
fn criterion_2_relation_suite() {
    let mut total_exhaustive = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for ctx in [ctx_f2(3), ctx_z4(3)] {
        let rep = verify_relations(&ctx, ValueSampling::Exhaustive);
        total_exhaustive += rep.total_cases();
        for e in &rep.entries {
            failures.extend(e.failures.iter().cloned());
        }
    }
    let sampled = verify_relations(&ctx_m2f2(3), ValueSampling::Sampled { count: 5, seed: 2 });
    let sampled_cases = sampled.total_cases();
    for e in &sampled.entries {
        failures.extend(e.failures.iter().cloned());
    }
    report(
        "criterion 2",
        failures.is_empty() && sampled_cases >= 10_000,
        &format!(
            "relations: {total_exhaustive} exhaustive cases (F2, Z/4), {sampled_cases} sampled cases (M2(F2)), failures: {failures:?}"
        ),
    );
}

/// Criterion 3: the column criterion agrees with the literal definition on
/// every invertible 3x3 matrix at n = 1 over F_2 and F_3, including the
/// symplectic-like instance, whose membership also matches preservation of
/// the skew Gram matrix.
#[test]
fn criterion_3_membership_oracle_equivalence() {
    let mut disagreements = 0usize;
    let mut cases = 0usize;

    let sp3 = classical_instance(&ClassicalKind::SpOdd { base: RingSpec::PrimeField { p: 3 } }, 1)
        .unwrap();
    let instances: Vec<(FormsContext, bool)> =
        vec![(ctx_f2(1), false), (ctx_f3(1), false), (sp3, true)];

    for (ctx, check_gram) in &instances {
        let r = ctx.ring().clone();
        let s = r.size() as u64;
        let d = 3usize;
        let gram: Vec<Elem> = vec![
            r.zero(), r.zero(), r.one(),
            r.zero(), r.zero(), r.zero(),
            r.neg(r.one()), r.zero(), r.zero(),
        ];
        for code in 0..s.pow(9) {
            let mut rest = code;
            let mut entries = vec![0u32; 9];
            for slot in entries.iter_mut() {
                *slot = (rest % s) as u32;
                rest /= s;
            }
            let m = UMatrix::from_entries(ctx, entries.clone());
            if !m.is_invertible(ctx) {
                continue;
            }
            cases += 1;
            let fast = is_unitary(ctx, &m).unwrap().ok;
            let slow = is_unitary_bruteforce(ctx, &m, 1 << 22).unwrap();
            if fast != slow {
                disagreements += 1;
            }
            if *check_gram {
                let mut preserved = true;
                for i in 0..d {
                    for j in 0..d {
                        let mut acc = r.zero();
                        for k in 0..d {
                            for l in 0..d {
                                acc = r.add(
                                    acc,
                                    r.mul(
                                        r.mul(entries[k * d + i], gram[k * d + l]),
                                        entries[l * d + j],
                                    ),
                                );
                            }
                        }
                        if acc != gram[i * d + j] {
                            preserved = false;
                        }
                    }
                }
                if fast != preserved {
                    disagreements += 1;
                }
            }
        }
    }
    report(
        "criterion 3",
        disagreements == 0 && cases > 0,
        &format!("membership oracle: {cases} invertible matrices, {disagreements} disagreements"),
    );
}

/// Criterion 4: the quasimodule and form-parameter lemmas, exhaustive at the
/// small instances.
#[test]
fn criterion_4_quasimodule_suite() {
    let mut failures: Vec<String> = Vec::new();
    let mut cases = 0usize;

    // inverse/subtraction/commutator/sum identities and the structural
    // facts about Delta, on all three base instances
    for ctx in [ctx_f2(1), ctx_z4(1), ctx_m2f2(1)] {
        let l7 = verify_lemma7(ctx.quad(), 0);
        cases += l7.items.len();
        failures.extend(l7.items.iter().filter(|(_, ok)| !ok).map(|(n, _)| format!("lemma7/{n}")));
        let r10 = verify_remark10(ctx.form_ring());
        cases += r10.items.len();
        failures
            .extend(r10.items.iter().filter(|(_, ok)| !ok).map(|(n, _)| format!("remark10/{n}")));
    }

    // the trace is additive and twisted-multiplicative (the homomorphism
    // property of the form-trace map)
    for ctx in [ctx_f2(1), ctx_z4(1)] {
        let quad = ctx.quad();
        let r = ctx.ring().clone();
        let h = ctx.heisenberg();
        let s = r.size();
        for x in 0..s {
            for y in 0..s {
                let a = HPoint::new(x, y);
                for u in 0..s {
                    for v in 0..s {
                        let b = HPoint::new(u, v);
                        cases += 1;
                        if h.trace(h.add(a, b)) != r.add(h.trace(a), h.trace(b)) {
                            failures.push("trace additivity".into());
                        }
                    }
                }
                for e in r.elements() {
                    cases += 1;
                    if h.trace(h.scale(a, e)) != r.mul(r.mul(quad.bar(e), h.trace(a)), e) {
                        failures.push("trace scaling".into());
                    }
                }
            }
        }
    }

    // the form identities, exhaustive at n = 1
    for ctx in [ctx_f2(1), ctx_f3(1), ctx_z4(1)] {
        let l15 = verify_lemma15(&ctx, 1 << 30, 0, 0);
        cases += l15.cases;
        failures.extend(l15.failures.iter().cloned());
    }

    // the congruence lemmas at n = 1, plain and GL-like instances
    let f2 = ctx_f2(1);
    let group_f2 = enumerate_unitary_group(&f2, 1 << 22).unwrap();
    for level in [Level::absolute(&f2), Level::zero(&f2)] {
        let rep = verify_lemma37(&f2, &level, 1 << 30).unwrap();
        cases += rep.cases;
        failures.extend(rep.failures.iter().cloned());
        let rep = verify_lemma38(&f2, &level, &group_f2, 1 << 22).unwrap();
        cases += rep.cases;
        failures.extend(rep.failures.iter().cloned());
    }
    let gl = classical_instance(&ClassicalKind::GlOdd { inner: RingSpec::PrimeField { p: 2 } }, 1)
        .unwrap();
    let group_gl = enumerate_unitary_group(&gl, 1 << 22).unwrap();
    let rep = verify_lemma38(&gl, &Level::zero(&gl), &group_gl, 1 << 22).unwrap();
    cases += rep.cases;
    failures.extend(rep.failures.iter().cloned());

    report(
        "criterion 4",
        failures.is_empty(),
        &format!("quasimodule/form suite: {cases} cases, failures: {failures:?}"),
    );
}

/// Criterion 5: action laws, tilde-characterization agreement and the exact
/// normalizer equality, exhaustive at n = 1 over F_2; the GL-like instance
/// enumerates to exactly 168 elements.
#[test]
fn criterion_5_action_suite() {
    let mut failures: Vec<String> = Vec::new();
    let mut cases = 0usize;

    let f2 = ctx_f2(1);
    let group = enumerate_unitary_group(&f2, 1 << 22).unwrap();
    for ideal in involution_invariant_ideals(&f2) {
        let laws = verify_action_laws(&f2, &ideal, &group, 4096).unwrap();
        cases += laws.cases;
        failures.extend(laws.failures.iter().cloned());
        let agree = verify_lemma46_agreement(&f2, &ideal, &group, 4096).unwrap();
        cases += agree.cases;
        failures.extend(agree.failures.iter().cloned());
    }
    let t47 = theorem47_exhaustive_n1(&f2, 1 << 22).unwrap();
    cases += t47.cases;
    failures.extend(t47.failures.iter().cloned());

    let gl = classical_instance(&ClassicalKind::GlOdd { inner: RingSpec::PrimeField { p: 2 } }, 1)
        .unwrap();
    let group_gl = enumerate_unitary_group(&gl, 1 << 22).unwrap();
    if group_gl.len() != 168 {
        failures.push(format!("GL-like instance enumerated {} elements", group_gl.len()));
    }
    for ideal in involution_invariant_ideals(&gl) {
        let laws = verify_action_laws(&gl, &ideal, &group_gl, 4096).unwrap();
        cases += laws.cases;
        failures.extend(laws.failures.iter().cloned());
        let agree = verify_lemma46_agreement(&gl, &ideal, &group_gl, 4096).unwrap();
        cases += agree.cases;
        failures.extend(agree.failures.iter().cloned());
    }
    let t47 = theorem47_exhaustive_n1(&gl, 1 << 22).unwrap();
    cases += t47.cases;
    failures.extend(t47.failures.iter().cloned());

    report(
        "criterion 5",
        failures.is_empty(),
        &format!("action suite: {cases} cases, group order 168 confirmed, failures: {failures:?}"),
    );
}

/// Criterion 6: both column reductions succeed with certified normal forms
/// and declared support on >= 10^3 random generator products at n = 3 over
/// F_2 and Z/4.
#[test]
fn criterion_6_reduction_suite() {
    let mut failures: Vec<String> = Vec::new();
    let mut runs = 0usize;
    for ctx in [ctx_f2(3), ctx_z4(3)] {
        let gens = eu_generators(&ctx);
        let mut rng = rand::rngs::StdRng::seed_from_u64(6);
        let r = ctx.ring().clone();
        for k in 0..525 {
            let sigma = random_unitary(&ctx, &gens, 3 + k % 6, &mut rng);
            runs += 2;
            match reduce_first_entry(&ctx, &sigma) {
                Ok(red) => {
                    let ok = !r.left_inverses(red.reduced.get(&ctx, 1, 1)).is_empty()
                        && has_support(&ctx, &red.f, SupportClass::UpperUnitriangular)
                        && red.f.mul(&ctx, &sigma) == red.reduced
                        && is_unitary(&ctx, &red.reduced).map(|c| c.ok).unwrap_or(false);
                    if !ok && failures.len() < 5 {
                        failures.push("first-entry certificate failed".into());
                    }
                }
                Err(e) => {
                    if failures.len() < 5 {
                        failures.push(format!("first-entry: {e}"));
                    }
                }
            }
            match reduce_two_columns(&ctx, &sigma) {
                Ok(red) => {
                    let mut ok = has_support(&ctx, &red.f, SupportClass::UpperBlock)
                        && red.f.mul(&ctx, &sigma) == red.reduced
                        && is_unitary(&ctx, &red.reduced).map(|c| c.ok).unwrap_or(false);
                    for i in 1..=3i32 {
                        let e1 = if i == 1 { r.one() } else { r.zero() };
                        let e2 = if i == 2 { r.one() } else { r.zero() };
                        ok &= red.reduced.get(&ctx, i, 1) == e1
                            && red.reduced.get(&ctx, i, 2) == e2;
                    }
                    if !ok && failures.len() < 5 {
                        failures.push("two-column certificate failed".into());
                    }
                }
                Err(e) => {
                    if failures.len() < 5 {
                        failures.push(format!("two-column: {e}"));
                    }
                }
            }
        }
    }
    report(
        "criterion 6",
        failures.is_empty() && runs >= 2000,
        &format!("reductions: {runs} certified runs, failures: {failures:?}"),
    );
}

/// Criterion 7: the commutator column identities hold with residuals in the
/// stated ideal sets on >= 10^2 random (sigma, move) pairs at n = 3 over
/// F_2.
#[test]
fn criterion_7_lemma_71_residuals() {
    use rand::Rng;
    let ctx = ctx_f2(3);
    let gens = eu_generators(&ctx);
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let hb = ctx.theta_hb();
    let mut cases = 0usize;
    let mut pairs = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for _ in 0..120 {
        let sigma = random_unitary(&ctx, &gens, 5, &mut rng);
        let i = hb[rng.gen_range(0..hb.len())];
        let mut j = hb[rng.gen_range(0..hb.len())];
        while j == i || j == -i {
            j = hb[rng.gen_range(0..hb.len())];
        }
        let mv = if rng.gen_bool(0.5) {
            ElementaryMove::Short { i, j, x: rng.gen_range(0..ctx.ring().size()) }
        } else {
            let pts = ctx.delta_signed(-oddform_core::unitary::eps(i)).points();
            ElementaryMove::Extra { i, a: pts[rng.gen_range(0..pts.len())] }
        };
        pairs += 1;
        match verify_lemma71(&ctx, &sigma, mv) {
            Ok(rep) => {
                cases += rep.cases;
                failures.extend(rep.failures.iter().cloned());
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    report(
        "criterion 7",
        failures.is_empty() && pairs >= 100,
        &format!("commutator column identities: {pairs} pairs, {cases} column checks, failures: {failures:?}"),
    );
}
