//! The conjugation action of the unitary group on relative odd form
//! parameters, the normalizer theorem checks, orbit computation, and the
//! paper-scale worked scenario over M_2(F_2).

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::congruence::{
    eu_generators, in_principal, in_tilde, lemma46_conditions, Level,
};
use crate::error::{Error, Result};
use crate::formparam::{
    close_subquasimodule, enumerate_relative_form_parameters, omega_min, FormParameter, FormRing,
    HPoint, OddFormIdeal, Orientation, PointSet,
};
use crate::rings::{
    build_ring, make_odd_quadruple, standard_involution, ElemSet, InvolutionName, RingSpec,
};
use crate::sandwich::{
    builtin_subgroup, is_e_normal, level_of, sandwich_check, SubgroupHandle, Verdict,
};
use crate::unitary::{
    enumerate_unitary_group, form_q, FormsContext, UMatrix,
};

/// ^sigma Omega: the subquasimodule closure of
/// {(q(sigma_{*0}) - (1,0)) . x + (x,y) | (x,y) in Omega} together with
/// Omega^I_min. Needs only the 0-column of sigma.
pub fn conj_form_parameter(
    ctx: &FormsContext,
    sigma: &UMatrix,
    ideal: &ElemSet,
    omega: &PointSet,
) -> PointSet {
    let r = ctx.ring();
    let h = ctx.heisenberg();
    let d0 = h.sub(
        form_q(ctx, &sigma.column(ctx, 0)),
        HPoint::new(r.one(), r.zero()),
    );
    let omin = omega_min(ctx.form_ring(), ideal);
    let mut gens: Vec<HPoint> = omin.iter().collect();
    for p in omega.iter() {
        gens.push(h.add(h.scale(d0, p.x), p));
    }
    let out = close_subquasimodule(ctx.quad(), Orientation::Plus, gens, None)
        .expect("conjugated parameter closure stays inside R^2");
    debug_assert!(
        OddFormIdeal::certify(ctx.form_ring(), ideal.clone(), out.clone()).is_ok(),
        "conjugated parameter failed certification"
    );
    out
}

/// The big-quasimodule route: transport Omega through
/// f(Omega) = {(u, x) | u in M(I), q(u) + (0,x) in Omega}, act by sigma on
/// the M-component, and map back. Exhaustive over M, so only for tiny
/// instances; the cross-check oracle for `conj_form_parameter`.
pub fn conj_form_parameter_big_oracle(
    ctx: &FormsContext,
    sigma: &UMatrix,
    ideal: &ElemSet,
    omega: &PointSet,
    cap: u64,
) -> Result<PointSet> {
    let r = ctx.ring();
    let needed = (r.size() as u64).pow(ctx.dim() as u32 + 1);
    if needed > cap {
        return Err(Error::CapExceeded { cap, needed });
    }
    let h = ctx.heisenberg();
    let mut out = PointSet::empty(r.size());
    for u in crate::unitary::all_vectors(ctx) {
        if !crate::congruence::in_m_i(ctx, ideal, &u) {
            continue;
        }
        let qu = form_q(ctx, &u);
        let su = sigma.mul_vec(ctx, &u);
        let qsu = form_q(ctx, &su);
        for x in r.elements() {
            if omega.contains(h.add(qu, HPoint::new(r.zero(), x))) {
                out.insert(h.add(qsu, HPoint::new(r.zero(), x)));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: String,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 5 {
            self.failures.push(msg);
        }
    }
}

/// Identity and composition laws of the action over the whole lattice
/// ROFP(I), for the supplied group elements.
pub fn verify_action_laws(
    ctx: &FormsContext,
    ideal: &ElemSet,
    sigmas: &[UMatrix],
    lattice_cap: usize,
) -> Result<CheckOutcome> {
    let lattice = enumerate_relative_form_parameters(ctx.form_ring(), ideal, lattice_cap)?;
    let mut out = CheckOutcome { id: "action-laws".into(), cases: 0, failures: Vec::new() };
    let e = UMatrix::identity(ctx);
    for omega in &lattice {
        out.cases += 1;
        if &conj_form_parameter(ctx, &e, ideal, omega) != omega {
            out.fail("identity law failed".into());
        }
    }
    for s in sigmas {
        for t in sigmas {
            let st = s.mul(ctx, t);
            for omega in &lattice {
                out.cases += 1;
                let lhs = conj_form_parameter(ctx, &st, ideal, omega);
                let rhs =
                    conj_form_parameter(ctx, s, ideal, &conj_form_parameter(ctx, t, ideal, omega));
                if lhs != rhs {
                    out.fail("composition law failed".into());
                }
            }
        }
        // inverse round trip
        let s_inv = s.try_inverse(ctx)?;
        for omega in &lattice {
            out.cases += 1;
            let back =
                conj_form_parameter(ctx, &s_inv, ideal, &conj_form_parameter(ctx, s, ideal, omega));
            if &back != omega {
                out.fail("inverse round trip failed".into());
            }
        }
    }
    Ok(out)
}

/// Four-way agreement of the tilde-group characterizations over supplied
/// group elements and every parameter of the lattice.
pub fn verify_lemma46_agreement(
    ctx: &FormsContext,
    ideal: &ElemSet,
    sigmas: &[UMatrix],
    lattice_cap: usize,
) -> Result<CheckOutcome> {
    let lattice = enumerate_relative_form_parameters(ctx.form_ring(), ideal, lattice_cap)?;
    let mut out = CheckOutcome { id: "lemma46-agreement".into(), cases: 0, failures: Vec::new() };
    for omega in &lattice {
        let form_ideal = OddFormIdeal::certify(ctx.form_ring(), ideal.clone(), omega.clone())?;
        let level = Level::new(ctx, form_ideal);
        for s in sigmas {
            out.cases += 1;
            let conds = lemma46_conditions(ctx, &level, s);
            if !(conds[0] == conds[1] && conds[1] == conds[2] && conds[2] == conds[3]) {
                out.fail(format!("conditions disagree: {conds:?}"));
            }
        }
    }
    Ok(out)
}

/// ^sigma U(level) = U(I, ^sigma Omega). In exact mode the full group is
/// enumerated and the two sides are compared elementwise; in generator mode
/// the preelementary generators of each side are pushed through sigma.
pub fn theorem47_check(
    ctx: &FormsContext,
    ideal: &ElemSet,
    sigma: &UMatrix,
    omega: &PointSet,
    full_group: Option<&[UMatrix]>,
) -> Result<CheckOutcome> {
    let mut out = CheckOutcome { id: "theorem47".into(), cases: 0, failures: Vec::new() };
    let form_ideal = OddFormIdeal::certify(ctx.form_ring(), ideal.clone(), omega.clone())?;
    let level = Level::new(ctx, form_ideal);
    let conj = conj_form_parameter(ctx, sigma, ideal, omega);
    let conj_ideal = OddFormIdeal::certify(ctx.form_ring(), ideal.clone(), conj)?;
    let conj_level = Level::new(ctx, conj_ideal);
    let sigma_inv = sigma.try_inverse(ctx)?;

    match full_group {
        Some(group) => {
            for tau in group {
                out.cases += 1;
                let lhs = in_principal(ctx, &level, tau).ok;
                let conj_tau = sigma.mul(ctx, tau).mul(ctx, &sigma_inv);
                let rhs = in_principal(ctx, &conj_level, &conj_tau).ok;
                if lhs != rhs {
                    out.fail("conjugated membership mismatch".into());
                }
            }
        }
        None => {
            for (_, g) in crate::congruence::eu_level_generators(ctx, &level) {
                out.cases += 1;
                let conj_g = sigma.mul(ctx, &g).mul(ctx, &sigma_inv);
                if !in_principal(ctx, &conj_level, &conj_g).ok {
                    out.fail("generator conjugate left the target group".into());
                }
            }
            for (_, g) in crate::congruence::eu_level_generators(ctx, &conj_level) {
                out.cases += 1;
                let back = sigma_inv.mul(ctx, &g).mul(ctx, sigma);
                if !in_principal(ctx, &level, &back).ok {
                    out.fail("reverse generator conjugate left the source group".into());
                }
            }
        }
    }
    Ok(out)
}

/// A partition of ROFP(I) into reachability blocks under the supplied
/// witnesses plus the elementary generators.
#[derive(Debug, Clone)]
pub struct OrbitPartition {
    /// The lattice in canonical order.
    pub lattice: Vec<PointSet>,
    /// Blocks as sorted index lists into `lattice`.
    pub blocks: Vec<Vec<usize>>,
    /// Connecting witnesses: (from, to) -> description of the group element.
    pub witnesses: HashMap<(usize, usize), String>,
    /// Per block: whether the block is certified to be a full orbit (not
    /// just a reachability lower bound).
    pub exact: Vec<bool>,
    /// How the blocks were labeled.
    pub label: String,
}

/// Reachability partition of ROFP(I) under conjugation by `witnesses` and
/// the elementary generators. Blocks are unions of reachability classes and
/// lower bounds for the true orbits; a block is marked exact when it is an
/// extreme singleton (the extremes are fixed by every group element) or the
/// complement of the fixed extremes.
pub fn orbits(
    ctx: &FormsContext,
    ideal: &ElemSet,
    witnesses: &[UMatrix],
    lattice_cap: usize,
) -> Result<OrbitPartition> {
    let lattice = enumerate_relative_form_parameters(ctx.form_ring(), ideal, lattice_cap)?;
    let index_of = |s: &PointSet| lattice.iter().position(|t| t == s);
    let omin = omega_min(ctx.form_ring(), ideal);
    let omax = crate::formparam::omega_max(ctx.form_ring(), ideal);
    let min_idx = index_of(&omin).expect("Omega_min is in the lattice");
    let max_idx = index_of(&omax).expect("Omega_max is in the lattice");

    let mut movers: Vec<(String, UMatrix)> = Vec::new();
    for (k, w) in witnesses.iter().enumerate() {
        movers.push((format!("witness[{k}]"), w.clone()));
        movers.push((format!("witness[{k}]^-1"), w.try_inverse(ctx)?));
    }
    for (word, g) in eu_generators(ctx) {
        movers.push((format!("{word:?}"), g));
    }

    // union-find over lattice indices with witness tracking
    let mut parent: Vec<usize> = (0..lattice.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut witness_map: HashMap<(usize, usize), String> = HashMap::new();
    for (idx, omega) in lattice.iter().enumerate() {
        for (name, m) in &movers {
            let image = conj_form_parameter(ctx, m, ideal, omega);
            let jdx = index_of(&image).ok_or_else(|| {
                Error::CertificationFailed("action image left the lattice".into())
            })?;
            if jdx != idx {
                witness_map.entry((idx, jdx)).or_insert_with(|| name.clone());
                let (ri, rj) = (find(&mut parent, idx), find(&mut parent, jdx));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..lattice.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut blocks: Vec<Vec<usize>> = groups.into_values().collect();
    for b in &mut blocks {
        b.sort();
    }
    blocks.sort();

    let non_extreme_count = lattice.len() - if min_idx == max_idx { 1 } else { 2 };
    let exact: Vec<bool> = blocks
        .iter()
        .map(|b| {
            (b.len() == 1 && (b[0] == min_idx || b[0] == max_idx))
                || (!b.contains(&min_idx) && !b.contains(&max_idx) && b.len() == non_extreme_count)
        })
        .collect();

    Ok(OrbitPartition {
        lattice,
        blocks,
        witnesses: witness_map,
        exact,
        label: "reachable-closure".into(),
    })
}

/// Step-by-step record of the worked scenario over M_2(F_2).
#[derive(Debug)]
pub struct Example174Report {
    pub checks: Vec<(String, bool)>,
    pub orbit_blocks: Vec<Vec<usize>>,
    pub forcing_note: String,
}

impl Example174Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

/// Runs the complete scenario: the 5-element lattice of relative form
/// parameters over M_2(F_2) at I = 0, the parameter swap under the middle
/// permutation matrix, the tilde-group exclusion, the E-normal block
/// subgroup with its level and sandwich containments, and the conjugate
/// that escapes it.
pub fn run_example_174(n: usize, seed: u64) -> Result<Example174Report> {
    if n < 3 {
        return Err(Error::SizeMismatch("the scenario needs n >= 3".into()));
    }
    let ring = build_ring(&RingSpec::Matrix {
        dim: 2,
        inner: Box::new(RingSpec::PrimeField { p: 2 }),
    })?;
    let bar = Arc::new(standard_involution(&ring, InvolutionName::Transpose)?);
    let quad = make_odd_quadruple(bar, ring.one(), ring.zero())?;
    let delta = FormParameter::max(&quad);
    let ctx = FormsContext::new(FormRing::new(quad.clone(), delta), n)?;
    let r = ctx.ring().clone();
    let mut checks: Vec<(String, bool)> = Vec::new();

    // Delta_max = {(x, y) | y = y^t}, 16 * 8 points
    checks.push((
        "Delta_max is the symmetric-second-slot set of size 128".into(),
        ctx.delta().len() == 128 && ctx.delta().iter().all(|p| p.y == quad.bar(p.y)),
    ));

    // the 5 relative parameters at I = 0 are J_i x {0} for the right ideals
    let zero_ideal = ElemSet::from_iter(r.size(), [r.zero()]);
    let lattice = enumerate_relative_form_parameters(ctx.form_ring(), &zero_ideal, 64)?;
    let mk = |rows: &[[u32; 4]]| -> PointSet {
        PointSet::from_points(
            r.size(),
            rows.iter().map(|e| HPoint::new(r.matrix_from_entries(&e[..]), r.zero())),
        )
    };
    let j1 = mk(&[[0, 0, 0, 0]]);
    let j2 = mk(&[[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [1, 1, 0, 0]]);
    let j3 = mk(&[[0, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 1, 1]]);
    let j4 = mk(&[[0, 0, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 1, 1]]);
    let j5 = PointSet::from_points(r.size(), r.elements().map(|x| HPoint::new(x, r.zero())));
    let expected = [&j1, &j2, &j3, &j4, &j5];
    checks.push((
        "exactly the 5 relative parameters J_1..J_5 x {0}".into(),
        lattice.len() == 5 && expected.iter().all(|e| lattice.contains(e)),
    ));

    // sigma = identity with the middle entry swapped
    let swap = r.matrix_from_entries(&[0, 1, 1, 0]);
    let mut sigma = UMatrix::identity(&ctx);
    sigma.set(&ctx, 0, 0, swap);
    checks.push((
        "sigma is unitary".into(),
        crate::unitary::is_unitary(&ctx, &sigma)?.ok,
    ));

    // ^sigma Omega_2 = Omega_3
    let conj2 = conj_form_parameter(&ctx, &sigma, &zero_ideal, &j2);
    checks.push(("^sigma Omega_2 = Omega_3".into(), conj2 == j3));

    // sigma is not in the tilde group at level (0, Omega_2)
    let level2 = Level::new(&ctx, OddFormIdeal::certify(ctx.form_ring(), zero_ideal.clone(), j2.clone())?);
    checks.push((
        "sigma is outside the tilde group at (0, Omega_2)".into(),
        !in_tilde(&ctx, &level2, &sigma),
    ));

    // H: E-normal of level (0, Omega_max), both sandwich containments
    let h = builtin_subgroup(&ctx, "example174_H")?;
    let eu = eu_generators(&ctx);
    let enormal = is_e_normal(&ctx, &h, &eu, 32, seed)?;
    checks.push(("H is E-normal (generating family sweep)".into(), enormal.is_verified()));

    let sandwich = sandwich_check(&ctx, &h, &eu, 64, seed)?;
    checks.push((
        "level of H is (0, Omega_max)".into(),
        sandwich.level.level.ideal() == &zero_ideal && sandwich.level.level.omega() == &j5,
    ));
    checks.push((
        "EU(level) is contained in H".into(),
        matches!(sandwich.lower, Verdict::Verified { .. }),
    ));
    checks.push((
        "H is contained in CU(level)".into(),
        matches!(sandwich.upper, Verdict::Verified { .. }),
    ));

    // tau in H but ^sigma tau outside H
    let unipotent_up = r.matrix_from_entries(&[1, 1, 0, 1]);
    let unipotent_down = r.matrix_from_entries(&[1, 0, 1, 1]);
    let mut tau = UMatrix::identity(&ctx);
    tau.set(&ctx, 0, 0, unipotent_up);
    let conj_tau = sigma.mul(&ctx, &tau).mul(&ctx, &sigma.try_inverse(&ctx)?);
    let mut expected_conj = UMatrix::identity(&ctx);
    expected_conj.set(&ctx, 0, 0, unipotent_down);
    checks.push((
        "tau lies in H, ^sigma tau has the lower unipotent middle and escapes H".into(),
        h.contains(&ctx, &tau)? && conj_tau == expected_conj && !h.contains(&ctx, &conj_tau)?,
    ));

    // conjugating H keeps the level ideal and sends Omega_max to itself
    let conj_omega_max = conj_form_parameter(&ctx, &sigma, &zero_ideal, &j5);
    checks.push(("^sigma Omega_max = Omega_max".into(), conj_omega_max == j5));

    // orbit partition: sigma together with the unit middle matrices
    let mut witnesses = vec![sigma.clone()];
    for u in r.elements().filter(|&u| r.is_unit(u)) {
        let mut m = UMatrix::identity(&ctx);
        m.set(&ctx, 0, 0, u);
        if crate::unitary::is_unitary(&ctx, &m)?.ok {
            witnesses.push(m);
        }
    }
    let partition = orbits(&ctx, &zero_ideal, &witnesses, 64)?;
    let sizes: Vec<usize> = partition.blocks.iter().map(|b| b.len()).collect();
    let mut sorted_sizes = sizes.clone();
    sorted_sizes.sort();
    checks.push((
        "orbit partition has blocks of sizes {1, 3, 1}".into(),
        sorted_sizes == vec![1, 1, 3] && partition.exact.iter().all(|&e| e),
    ));
    let idx2 = partition.lattice.iter().position(|s| s == &j2);
    let idx3 = partition.lattice.iter().position(|s| s == &j3);
    let idx4 = partition.lattice.iter().position(|s| s == &j4);
    checks.push((
        "the middle block is {Omega_2, Omega_3, Omega_4}".into(),
        match (idx2, idx3, idx4) {
            (Some(a), Some(b), Some(c)) => {
                let mut block = vec![a, b, c];
                block.sort();
                partition.blocks.contains(&block)
            }
            _ => false,
        },
    ));

    let forcing_note = "extremes are fixed points of every action element (the minimum \
        absorbs Delta . I and the maximum is forced by inclusion-preserving bijectivity), \
        so the reachable middle block is a full orbit and the partition is exact"
        .to_string();

    Ok(Example174Report { checks, orbit_blocks: partition.blocks, forcing_note })
}

/// Conjugate of an E-normal subgroup: level_of(^sigma H) compared with
/// (I, ^sigma Omega) on the worked instance.
pub fn corollary166_check(ctx: &FormsContext, seed: u64) -> Result<CheckOutcome> {
    let r = ctx.ring().clone();
    let mut out = CheckOutcome { id: "corollary166".into(), cases: 0, failures: Vec::new() };
    let h = builtin_subgroup(ctx, "example174_H")?;
    let swap = r.matrix_from_entries(&[0, 1, 1, 0]);
    let mut sigma = UMatrix::identity(ctx);
    sigma.set(ctx, 0, 0, swap);
    let sigma_inv = sigma.try_inverse(ctx)?;

    // ^sigma H as a predicate handle
    let name = "conjugated_H".to_string();
    let h_arc = Arc::new(h);
    let h_for_contains = h_arc.clone();
    let sigma_c = sigma.clone();
    let sigma_inv_c = sigma_inv.clone();
    let contains = move |ctx: &FormsContext, m: &UMatrix| -> bool {
        let back = sigma_inv_c.mul(ctx, m).mul(ctx, &sigma_c);
        h_for_contains.contains(ctx, &back).unwrap_or(false)
    };
    let h_for_sample = h_arc.clone();
    let sigma_s = sigma.clone();
    let sigma_inv_s = sigma_inv.clone();
    let sample = move |ctx: &FormsContext, rng: &mut rand::rngs::StdRng| -> UMatrix {
        let inner = h_for_sample.sample(ctx, rng).expect("predicate sampler");
        sigma_s.mul(ctx, &inner).mul(ctx, &sigma_inv_s)
    };
    let generators: Vec<UMatrix> = h_arc
        .known_generators()
        .iter()
        .map(|g| sigma.mul(ctx, g).mul(ctx, &sigma_inv))
        .collect();
    let conj_h = SubgroupHandle::Predicate {
        name,
        contains: Arc::new(contains),
        sample: Arc::new(sample),
        generators,
    };

    let zero_ideal = ElemSet::from_iter(r.size(), [r.zero()]);
    let level = level_of(ctx, &conj_h)?;
    out.cases += 1;
    if level.level.ideal() != &zero_ideal {
        out.fail("conjugated level ideal is not {0}".into());
    }
    let omega_max = crate::formparam::omega_max(ctx.form_ring(), &zero_ideal);
    let expected = conj_form_parameter(ctx, &sigma, &zero_ideal, &omega_max);
    out.cases += 1;
    if level.level.omega() != &expected {
        out.fail("conjugated level parameter differs from ^sigma Omega".into());
    }
    let eu = eu_generators(ctx);
    out.cases += 1;
    if !is_e_normal(ctx, &conj_h, &eu, 16, seed)?.is_verified() {
        out.fail("conjugated subgroup is not E-normal".into());
    }
    Ok(out)
}

/// Sampled conjugation-transport check on the worked instance: members of
/// CU((R,Delta),(0,Omega_2)) conjugated by the parameter-swapping sigma land
/// in CU((R,Delta),(0,^sigma Omega_2)) = CU((R,Delta),(0,Omega_3)), and the
/// preelementary generators transport between the principal congruence
/// subgroups the same way.
pub fn corollary165_check(ctx: &FormsContext, seed: u64) -> Result<CheckOutcome> {
    let r = ctx.ring().clone();
    let mut out = CheckOutcome { id: "corollary165".into(), cases: 0, failures: Vec::new() };
    let zero = ElemSet::from_iter(r.size(), [r.zero()]);
    let j2: Vec<crate::rings::Elem> = vec![
        r.matrix_from_entries(&[0, 0, 0, 0]),
        r.matrix_from_entries(&[1, 0, 0, 0]),
        r.matrix_from_entries(&[0, 1, 0, 0]),
        r.matrix_from_entries(&[1, 1, 0, 0]),
    ];
    let omega2 = PointSet::from_points(r.size(), j2.iter().map(|&x| HPoint::new(x, 0)));
    let swap = r.matrix_from_entries(&[0, 1, 1, 0]);
    let mut sigma = UMatrix::identity(ctx);
    sigma.set(ctx, 0, 0, swap);
    let sigma_inv = sigma.try_inverse(ctx)?;
    let omega3 = conj_form_parameter(ctx, &sigma, &zero, &omega2);
    let level2 = Level::new(ctx, OddFormIdeal::certify(ctx.form_ring(), zero.clone(), omega2)?);
    let level3 = Level::new(ctx, OddFormIdeal::certify(ctx.form_ring(), zero.clone(), omega3)?);
    let eu = eu_generators(ctx);

    // CU members: 0-row matrices with hyperbolic 0-row entries in J_2 and
    // middle entry in 1 + J_2 that stay invertible
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut tested = 0usize;
    while tested < 20 {
        let mut m = UMatrix::identity(ctx);
        for &jdx in &ctx.theta_hb() {
            m.set(ctx, 0, jdx, j2[rng.gen_range(0..j2.len())]);
        }
        let middle = r.add(r.one(), j2[rng.gen_range(0..j2.len())]);
        if !r.is_unit(middle) {
            continue;
        }
        m.set(ctx, 0, 0, middle);
        if !crate::unitary::is_unitary(ctx, &m)?.ok {
            continue;
        }
        if !crate::congruence::in_cu(ctx, &level2, &m, &eu).ok {
            continue;
        }
        tested += 1;
        out.cases += 1;
        let conj = sigma.mul(ctx, &m).mul(ctx, &sigma_inv);
        if !crate::congruence::in_cu(ctx, &level3, &conj, &eu).ok {
            out.fail("a CU member left CU of the transported level".into());
        }
    }

    // preelementary generators transport into the principal congruence
    // subgroup of the transported level, and back
    for (_, g) in crate::congruence::eu_level_generators(ctx, &level2) {
        out.cases += 1;
        let conj = sigma.mul(ctx, &g).mul(ctx, &sigma_inv);
        if !in_principal(ctx, &level3, &conj).ok {
            out.fail("a transported generator left U of the transported level".into());
        }
    }
    for (_, g) in crate::congruence::eu_level_generators(ctx, &level3) {
        out.cases += 1;
        let back = sigma_inv.mul(ctx, &g).mul(ctx, &sigma);
        if !in_principal(ctx, &level2, &back).ok {
            out.fail("a transported generator left U of the source level".into());
        }
    }
    Ok(out)
}

/// Exhaustive theorem-47 sweep at n = 1: every group element against every
/// relative parameter for every involution-invariant ideal.
pub fn theorem47_exhaustive_n1(ctx: &FormsContext, group_cap: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome { id: "theorem47-exhaustive".into(), cases: 0, failures: Vec::new() };
    let group = enumerate_unitary_group(ctx, group_cap)?;
    for ideal in involution_invariant_ideals(ctx) {
        let lattice = enumerate_relative_form_parameters(ctx.form_ring(), &ideal, 4096)?;
        for omega in &lattice {
            for sigma in &group {
                let sub = theorem47_check(ctx, &ideal, sigma, omega, Some(&group))?;
                out.cases += sub.cases;
                if !sub.passed() {
                    out.fail(format!("failure at |Omega| = {}", omega.len()));
                }
            }
        }
    }
    Ok(out)
}

/// All involution invariant two-sided ideals of the base ring, by closure
/// over singleton generators and joins.
pub fn involution_invariant_ideals(ctx: &FormsContext) -> Vec<ElemSet> {
    let r = ctx.ring().clone();
    let bar = ctx.quad().involution();
    let mut found: Vec<ElemSet> = vec![ElemSet::from_iter(r.size(), [r.zero()])];
    let mut queue = found.clone();
    while let Some(current) = queue.pop() {
        for x in r.elements() {
            if current.contains(x) {
                continue;
            }
            let mut gens: Vec<_> = current.iter().collect();
            gens.push(x);
            let bigger = crate::rings::involution_invariant_ideal(&r, bar, &gens);
            if !found.contains(&bigger) {
                found.push(bigger.clone());
                queue.push(bigger);
            }
        }
    }
    found.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    found
}

/// Sampled action-law and lemma-46 sweep used by the CLI `action` suite on
/// instances whose full group is out of reach.
pub fn sampled_group_elements(
    ctx: &FormsContext,
    count: usize,
    word_len: usize,
    seed: u64,
) -> Vec<UMatrix> {
    let gens = eu_generators(ctx);
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut out = vec![UMatrix::identity(ctx)];
    for _ in 0..count {
        out.push(crate::sandwich::random_unitary(ctx, &gens, word_len, &mut rng));
    }
    // a couple of non-elementary middle elements when the ring allows them
    let r = ctx.ring().clone();
    for u in r.elements().filter(|&u| r.is_unit(u)).take(3) {
        let mut m = UMatrix::identity(ctx);
        m.set(ctx, 0, 0, u);
        if crate::unitary::is_unitary(ctx, &m).map(|c| c.ok).unwrap_or(false) {
            out.push(m);
        }
    }
    let _ = rng.gen_range(0..2usize);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formparam::FormParameter;
    use crate::unitary::ClassicalKind;

    fn ctx_f2(n: usize) -> FormsContext {
        let r = build_ring(&RingSpec::PrimeField { p: 2 }).unwrap();
        let id = Arc::new(standard_involution(&r, InvolutionName::Identity).unwrap());
        let quad = make_odd_quadruple(id, 1, 0).unwrap();
        FormsContext::new(FormRing::new(quad.clone(), FormParameter::max(&quad)), n).unwrap()
    }

    fn ctx_m2f2(n: usize) -> FormsContext {
        let r = build_ring(&RingSpec::Matrix {
            dim: 2,
            inner: Box::new(RingSpec::PrimeField { p: 2 }),
        })
        .unwrap();
        let t = Arc::new(standard_involution(&r, InvolutionName::Transpose).unwrap());
        let quad = make_odd_quadruple(t, r.one(), r.zero()).unwrap();
        FormsContext::new(FormRing::new(quad.clone(), FormParameter::max(&quad)), n).unwrap()
    }

    #[test]
    fn identity_acts_trivially() {
        let ctx = ctx_m2f2(2);
        let r = ctx.ring().clone();
        let zero = ElemSet::from_iter(r.size(), [r.zero()]);
        let e = UMatrix::identity(&ctx);
        for omega in
            enumerate_relative_form_parameters(ctx.form_ring(), &zero, 64).unwrap()
        {
            assert_eq!(conj_form_parameter(&ctx, &e, &zero, &omega), omega);
        }
    }

    #[test]
    fn extremes_are_fixed() {
        let ctx = ctx_m2f2(2);
        let r = ctx.ring().clone();
        let zero = ElemSet::from_iter(r.size(), [r.zero()]);
        let omin = omega_min(ctx.form_ring(), &zero);
        let omax = crate::formparam::omega_max(ctx.form_ring(), &zero);
        let swap = r.matrix_from_entries(&[0, 1, 1, 0]);
        let mut sigma = UMatrix::identity(&ctx);
        sigma.set(&ctx, 0, 0, swap);
        assert_eq!(conj_form_parameter(&ctx, &sigma, &zero, &omin), omin);
        assert_eq!(conj_form_parameter(&ctx, &sigma, &zero, &omax), omax);
    }

    #[test]
    fn big_oracle_agrees_n1() {
        let ctx = ctx_f2(1);
        let r = ctx.ring().clone();
        let group = enumerate_unitary_group(&ctx, 1 << 21).unwrap();
        for ideal in involution_invariant_ideals(&ctx) {
            for omega in
                enumerate_relative_form_parameters(ctx.form_ring(), &ideal, 64).unwrap()
            {
                for sigma in group.iter().take(40) {
                    let fast = conj_form_parameter(&ctx, sigma, &ideal, &omega);
                    let slow =
                        conj_form_parameter_big_oracle(&ctx, sigma, &ideal, &omega, 1 << 20)
                            .unwrap();
                    assert_eq!(fast, slow, "ring size {}", r.size());
                }
            }
        }
    }

    #[test]
    fn action_laws_exhaustive_n1() {
        let ctx = ctx_f2(1);
        let group = enumerate_unitary_group(&ctx, 1 << 21).unwrap();
        for ideal in involution_invariant_ideals(&ctx) {
            let out = verify_action_laws(&ctx, &ideal, &group, 4096).unwrap();
            assert!(out.passed(), "{:?}", out.failures);
        }
    }

    #[test]
    fn lemma46_agreement_n1() {
        let ctx = ctx_f2(1);
        let group = enumerate_unitary_group(&ctx, 1 << 21).unwrap();
        for ideal in involution_invariant_ideals(&ctx) {
            let out = verify_lemma46_agreement(&ctx, &ideal, &group, 4096).unwrap();
            assert!(out.passed(), "{:?}", out.failures);
        }
    }

    #[test]
    fn theorem47_exhaustive_small() {
        let ctx = ctx_f2(1);
        let out = theorem47_exhaustive_n1(&ctx, 1 << 21).unwrap();
        assert!(out.passed(), "{:?}", out.failures);
        assert!(out.cases > 0);
    }

    #[test]
    fn tilde_membership_iff_fixed_parameter() {
        // Lemma 46(4) against in_tilde on the GL-like instance
        let ctx = classical_instance_gl();
        let group = enumerate_unitary_group(&ctx, 1 << 21).unwrap();
        let r = ctx.ring().clone();
        let zero = ElemSet::from_iter(r.size(), [r.zero()]);
        for omega in
            enumerate_relative_form_parameters(ctx.form_ring(), &zero, 256).unwrap()
        {
            let ideal = OddFormIdeal::certify(ctx.form_ring(), zero.clone(), omega.clone())
                .unwrap();
            let level = Level::new(&ctx, ideal);
            for sigma in group.iter().take(60) {
                let fixed = conj_form_parameter(&ctx, sigma, &zero, &omega) == omega;
                assert_eq!(in_tilde(&ctx, &level, sigma), fixed);
            }
        }
    }

    fn classical_instance_gl() -> FormsContext {
        crate::unitary::classical_instance(
            &ClassicalKind::GlOdd { inner: RingSpec::PrimeField { p: 2 } },
            1,
        )
        .unwrap()
    }

    #[test]
    fn example174_n3_full_run() {
        let report = run_example_174(3, 7).unwrap();
        for (name, ok) in &report.checks {
            assert!(*ok, "failed: {name}");
        }
        assert_eq!(report.orbit_blocks.len(), 3);
    }

    #[test]
    fn corollary165_on_example_instance() {
        let ctx = ctx_m2f2(3);
        let out = corollary165_check(&ctx, 23).unwrap();
        assert!(out.passed(), "{:?}", out.failures);
        assert!(out.cases >= 20);
    }

    #[test]
    fn corollary166_on_example_instance() {
        let ctx = ctx_m2f2(3);
        let out = corollary166_check(&ctx, 11).unwrap();
        assert!(out.passed(), "{:?}", out.failures);
    }
}
