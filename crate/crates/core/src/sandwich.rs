//! Levels of E-normal subgroups, E-normality and sandwich containment
//! checks, and the constructive column reductions over finite rings.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::congruence::{eu_level_generators, in_cu, Level};
use crate::error::{Error, Result};
use crate::formparam::{HPoint, OddFormIdeal, PointSet};
use crate::rings::{inverse_quadruple, left_ideal_closure, Elem, ElemSet, RingSpec};
use crate::unitary::{
    eps, form_q, t_extra, t_short, FormsContext, GenWord, ThetaIndex, UMatrix,
};

/// Membership predicate of a predicate-form subgroup.
pub type MembershipFn = Arc<dyn Fn(&FormsContext, &UMatrix) -> bool + Send + Sync>;
/// Sampler of a predicate-form subgroup.
pub type SampleFn = Arc<dyn Fn(&FormsContext, &mut rand::rngs::StdRng) -> UMatrix + Send + Sync>;

/// A subgroup given either by generators (membership through a capped
/// closure) or by a membership predicate. Predicate subgroups may carry a
/// known generating family, which upgrades several sampled checks to
/// exhaustive ones.
pub enum SubgroupHandle {
    Generators {
        name: String,
        gens: Vec<UMatrix>,
        cap: usize,
        closure: std::sync::OnceLock<(Vec<UMatrix>, bool)>,
    },
    Predicate {
        name: String,
        contains: MembershipFn,
        sample: SampleFn,
        generators: Vec<UMatrix>,
    },
}

impl std::fmt::Debug for SubgroupHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubgroupHandle::Generators { name, gens, cap, .. } => f
                .debug_struct("Generators")
                .field("name", name)
                .field("gens", &gens.len())
                .field("cap", cap)
                .finish(),
            SubgroupHandle::Predicate { name, generators, .. } => f
                .debug_struct("Predicate")
                .field("name", name)
                .field("known_generators", &generators.len())
                .finish(),
        }
    }
}

impl SubgroupHandle {
    pub fn from_generators(name: &str, gens: Vec<UMatrix>, cap: usize) -> Self {
        SubgroupHandle::Generators {
            name: name.into(),
            gens,
            cap,
            closure: std::sync::OnceLock::new(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            SubgroupHandle::Generators { name, .. } => name,
            SubgroupHandle::Predicate { name, .. } => name,
        }
    }

    /// The closure together with a truncation flag.
    pub fn closure(&self, ctx: &FormsContext) -> Result<(&[UMatrix], bool)> {
        match self {
            SubgroupHandle::Generators { gens, cap, closure, .. } => {
                let (elements, truncated) = closure.get_or_init(|| {
                    match crate::unitary::generate_group(ctx, gens, *cap) {
                        Ok(all) => (all, false),
                        Err(_) => {
                            // keep the partial set: membership hits stay
                            // decidable, misses become ClosureOverflow
                            let mut partial = gens.clone();
                            partial.push(UMatrix::identity(ctx));
                            partial.sort();
                            partial.dedup();
                            (partial, true)
                        }
                    }
                });
                Ok((elements, *truncated))
            }
            SubgroupHandle::Predicate { .. } => Err(Error::CertificationFailed(
                "predicate subgroups have no generator closure".into(),
            )),
        }
    }

    /// Membership. For truncated generator closures a miss is reported as
    /// ClosureOverflow rather than a silent false.
    pub fn contains(&self, ctx: &FormsContext, m: &UMatrix) -> Result<bool> {
        match self {
            SubgroupHandle::Generators { cap, .. } => {
                let (elements, truncated) = self.closure(ctx)?;
                if elements.binary_search(m).is_ok() {
                    Ok(true)
                } else if truncated {
                    Err(Error::ClosureOverflow { cap: *cap })
                } else {
                    Ok(false)
                }
            }
            SubgroupHandle::Predicate { contains, .. } => Ok(contains(ctx, m)),
        }
    }

    /// A generating family when one is known.
    pub fn known_generators(&self) -> &[UMatrix] {
        match self {
            SubgroupHandle::Generators { gens, .. } => gens,
            SubgroupHandle::Predicate { generators, .. } => generators,
        }
    }

    pub fn sample(&self, ctx: &FormsContext, rng: &mut rand::rngs::StdRng) -> Result<UMatrix> {
        match self {
            SubgroupHandle::Generators { .. } => {
                let (elements, _) = self.closure(ctx)?;
                Ok(elements[rng.gen_range(0..elements.len())].clone())
            }
            SubgroupHandle::Predicate { sample, .. } => Ok(sample(ctx, rng)),
        }
    }
}

/// Three-valued outcome of a containment or normality check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Verified { note: String },
    Refuted { witness: String },
    Truncated { note: String },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified { .. })
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }
}

/// The level of a subgroup: the elementary matrices it contains.
#[derive(Debug)]
pub struct LevelResult {
    pub level: Level,
    /// For each ideal element, indices (i, j) of a short root realizing it.
    pub ideal_witnesses: Vec<(Elem, (ThetaIndex, ThetaIndex))>,
    /// For each Omega point, the negative index of an extra short root
    /// realizing it.
    pub omega_witnesses: Vec<(HPoint, ThetaIndex)>,
}

/// Extracts I = {x | T_ij(x) in H} and
/// Omega = {a in Delta | T_i(a) in H, i negative}, then certifies (I, Omega)
/// as an odd form ideal. Certification fails for subgroups that are not
/// E-normal enough for the extracted sets to be an ideal pair.
pub fn level_of(ctx: &FormsContext, h: &SubgroupHandle) -> Result<LevelResult> {
    let r = ctx.ring();
    let mut ideal = ElemSet::empty(r.size());
    let mut ideal_witnesses = Vec::new();
    // the identity lies in every subgroup, so 0 is always extracted; at
    // n = 1 no short root indices exist and this is the only contribution
    ideal.insert(r.zero());
    for x in r.elements() {
        'pairs: for &i in &ctx.theta_hb() {
            for &j in &ctx.theta_hb() {
                if i == j || i == -j {
                    continue;
                }
                if h.contains(ctx, &t_short(ctx, i, j, x)?)? {
                    ideal.insert(x);
                    ideal_witnesses.push((x, (i, j)));
                    break 'pairs;
                }
            }
        }
    }
    let mut omega = PointSet::empty(r.size());
    let mut omega_witnesses = Vec::new();
    for a in ctx.delta().points() {
        for i in (-(ctx.n() as i32))..=-1 {
            if h.contains(ctx, &t_extra(ctx, i, a)?)? {
                omega.insert(a);
                omega_witnesses.push((a, i));
                break;
            }
        }
    }
    let form_ideal = OddFormIdeal::certify(ctx.form_ring(), ideal, omega)?;
    Ok(LevelResult { level: Level::new(ctx, form_ideal), ideal_witnesses, omega_witnesses })
}

/// E-normality: closure of H under conjugation by the elementary generators.
/// With a known generating family for H the check is exhaustive (conjugating
/// a generating set by each elementary generator controls all of EU and all
/// of H); otherwise membership is tested on sampled elements.
pub fn is_e_normal(
    ctx: &FormsContext,
    h: &SubgroupHandle,
    eu_gens: &[(GenWord, UMatrix)],
    samples: usize,
    seed: u64,
) -> Result<Verdict> {
    let h_family: Vec<UMatrix> = if !h.known_generators().is_empty() {
        h.known_generators().to_vec()
    } else if let SubgroupHandle::Generators { .. } = h {
        let (elements, truncated) = h.closure(ctx)?;
        if truncated {
            return Ok(Verdict::Truncated { note: "closure exceeded cap".into() });
        }
        elements.to_vec()
    } else {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..samples).map(|_| h.sample(ctx, &mut rng)).collect::<Result<Vec<_>>>()?
    };
    let exhaustive = !h.known_generators().is_empty()
        || matches!(h, SubgroupHandle::Generators { .. });

    for (word, g) in eu_gens {
        let g_inv = g.try_inverse(ctx)?;
        for member in &h_family {
            let conj = g.mul(ctx, member).mul(ctx, &g_inv);
            match h.contains(ctx, &conj) {
                Ok(true) => {}
                Ok(false) => {
                    return Ok(Verdict::Refuted {
                        witness: format!("conjugate by {word:?} left the subgroup"),
                    })
                }
                Err(Error::ClosureOverflow { cap }) => {
                    return Ok(Verdict::Truncated {
                        note: format!("membership undecidable within cap {cap}"),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(if exhaustive {
        Verdict::Verified { note: "checked on a generating family of H".into() }
    } else {
        Verdict::Truncated { note: format!("checked on {} sampled elements", h_family.len()) }
    })
}

/// Sandwich containment report for a subgroup and its extracted level.
#[derive(Debug)]
pub struct SandwichReport {
    pub level: LevelResult,
    pub lower: Verdict,
    pub upper: Verdict,
}

/// Verifies EU((R,Delta),(I,Omega)) <= H <= CU((R,Delta),(I,Omega)) for the
/// extracted level, with three-valued verdicts per containment.
pub fn sandwich_check(
    ctx: &FormsContext,
    h: &SubgroupHandle,
    eu_gens: &[(GenWord, UMatrix)],
    conjugate_budget: usize,
    seed: u64,
) -> Result<SandwichReport> {
    let level_result = level_of(ctx, h)?;
    let level = &level_result.level;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);

    // lower containment: the preelementary generators and a budget of their
    // EU-conjugates must lie in H
    let pre_gens = eu_level_generators(ctx, level);
    let mut lower = Verdict::Verified {
        note: "preelementary generators and sampled EU-conjugates lie in H".into(),
    };
    'lower: for (word, g) in &pre_gens {
        match h.contains(ctx, g) {
            Ok(true) => {}
            Ok(false) => {
                lower = Verdict::Refuted { witness: format!("{word:?} is not in H") };
                break 'lower;
            }
            Err(Error::ClosureOverflow { cap }) => {
                lower = Verdict::Truncated {
                    note: format!("membership undecidable within cap {cap}"),
                };
                break 'lower;
            }
            Err(e) => return Err(e),
        }
    }
    if lower.is_verified() && !pre_gens.is_empty() && !eu_gens.is_empty() {
        let mut tested = 0usize;
        'conj: while tested < conjugate_budget {
            let (_, g) = &pre_gens[rng.gen_range(0..pre_gens.len())];
            // conjugate by a short random word over EU generators
            let mut w = UMatrix::identity(ctx);
            for _ in 0..rng.gen_range(1..=3usize) {
                w = w.mul(ctx, &eu_gens[rng.gen_range(0..eu_gens.len())].1);
            }
            let conj = w.mul(ctx, g).mul(ctx, &w.try_inverse(ctx)?);
            tested += 1;
            match h.contains(ctx, &conj) {
                Ok(true) => {}
                Ok(false) => {
                    lower = Verdict::Refuted {
                        witness: "an EU-conjugate of a preelementary generator left H".into(),
                    };
                    break 'conj;
                }
                Err(Error::ClosureOverflow { cap }) => {
                    lower = Verdict::Truncated {
                        note: format!("membership undecidable within cap {cap}"),
                    };
                    break 'conj;
                }
                Err(e) => return Err(e),
            }
        }
    }

    // upper containment: H <= CU(level). CU is a subgroup, so a generating
    // family suffices when one is known; otherwise sampled members.
    let (family, exhaustive): (Vec<UMatrix>, bool) = match h {
        SubgroupHandle::Generators { .. } => {
            let (elements, truncated) = h.closure(ctx)?;
            if truncated {
                (h.known_generators().to_vec(), true)
            } else {
                (elements.to_vec(), true)
            }
        }
        SubgroupHandle::Predicate { generators, .. } => {
            if generators.is_empty() {
                let mut v = Vec::new();
                for _ in 0..conjugate_budget.max(8) {
                    v.push(h.sample(ctx, &mut rng)?);
                }
                (v, false)
            } else {
                (generators.clone(), true)
            }
        }
    };
    let mut upper = if exhaustive {
        Verdict::Verified { note: "every member of a generating family lies in CU(level)".into() }
    } else {
        Verdict::Truncated { note: format!("checked on {} sampled members", family.len()) }
    };
    for m in &family {
        let res = in_cu(ctx, level, m, eu_gens);
        if !res.ok {
            upper = Verdict::Refuted {
                witness: res.witness.unwrap_or_else(|| "commutator left U(level)".into()),
            };
            break;
        }
    }

    Ok(SandwichReport { level: level_result, lower, upper })
}

/// Left unimodularity: the left ideal generated by the entries contains 1.
pub fn is_left_unimodular(ctx: &FormsContext, entries: &[Elem]) -> bool {
    left_ideal_closure(ctx.ring(), entries).contains(ctx.ring().one())
}

/// Finds x such that (u_1 + x u_{m+1}, u_2, ..., u_m) is left unimodular,
/// given that (u_1, ..., u_{m+1}) is. Scans the carrier in index order, so
/// x = 0 is preferred when the shortened column is already unimodular.
pub fn find_unimodular_shift(ctx: &FormsContext, column: &[Elem], m: usize) -> Result<Elem> {
    if column.len() != m + 1 || m == 0 {
        return Err(Error::SizeMismatch(format!(
            "column of length {} does not match m = {m}",
            column.len()
        )));
    }
    if !is_left_unimodular(ctx, column) {
        return Err(Error::NoShiftFound);
    }
    let r = ctx.ring();
    let mut shortened: Vec<Elem> = column[..m].to_vec();
    for x in r.elements() {
        shortened[0] = r.add(column[0], r.mul(x, column[m]));
        if is_left_unimodular(ctx, &shortened) {
            return Ok(x);
        }
    }
    Err(Error::NoShiftFound)
}

/// A reduction outcome: the factors in application order (first applied
/// first), their product f, and f * sigma.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub factors: Vec<GenWord>,
    pub f: UMatrix,
    pub reduced: UMatrix,
}

/// Support class of an emitted reduction factor product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportClass {
    /// Upper triangular with ones on the diagonal.
    UpperUnitriangular,
    /// Block shape [[A,B,C],[0,1,D],[0,0,E]].
    UpperBlock,
}

pub fn has_support(ctx: &FormsContext, m: &UMatrix, class: SupportClass) -> bool {
    let d = ctx.dim();
    let r = ctx.ring();
    match class {
        SupportClass::UpperUnitriangular => {
            for row in 0..d {
                for col in 0..d {
                    let e = m.entries()[row * d + col];
                    if row == col && e != r.one() {
                        return false;
                    }
                    if row > col && e != r.zero() {
                        return false;
                    }
                }
            }
            true
        }
        SupportClass::UpperBlock => {
            let n = ctx.n();
            for row in n..d {
                for col in 0..=n {
                    let e = m.entries()[row * d + col];
                    let expect = if row == col { r.one() } else { r.zero() };
                    if e != expect {
                        return false;
                    }
                }
            }
            true
        }
    }
}

struct ReductionWork<'a> {
    ctx: &'a FormsContext,
    current: UMatrix,
    factors: Vec<GenWord>,
    f: UMatrix,
    gamma_cap: usize,
}

impl<'a> ReductionWork<'a> {
    fn new(ctx: &'a FormsContext, sigma: &UMatrix, gamma_cap: usize) -> Self {
        ReductionWork {
            ctx,
            current: sigma.clone(),
            factors: Vec::new(),
            f: UMatrix::identity(ctx),
            gamma_cap,
        }
    }

    fn apply(&mut self, word: GenWord) -> Result<()> {
        let m = word.build(self.ctx)?;
        if m != UMatrix::identity(self.ctx) {
            self.current = m.mul(self.ctx, &self.current);
            self.f = m.mul(self.ctx, &self.f);
            self.factors.push(word);
        }
        Ok(())
    }

    /// Window tuple of column p: (u_p..u_n, u_{-n}..u_{-p}, weight * u_0).
    fn window_tuple(&self, p: i32, weight: Elem) -> Vec<Elem> {
        let ctx = self.ctx;
        let r = ctx.ring();
        let n = ctx.n() as i32;
        let mut t = Vec::new();
        for i in p..=n {
            t.push(self.current.get(ctx, i, p));
        }
        for i in -n..=-p {
            t.push(self.current.get(ctx, i, p));
        }
        t.push(r.mul(weight, self.current.get(ctx, 0, p)));
        t
    }

    fn top_tuple(&self, p: i32) -> Vec<Elem> {
        let ctx = self.ctx;
        (p..=ctx.n() as i32).map(|i| self.current.get(ctx, i, p)).collect()
    }

    /// Step A: extra-short correction from q of the -p column of `source`,
    /// folding the weighted 0-entry into row p (the first unimodularity
    /// stage of the column reductions).
    fn extra_short_correction(&mut self, p: i32, source: &UMatrix) -> Result<()> {
        let ctx = self.ctx;
        let r = ctx.ring();
        let q = ctx.quad();
        let s0mp = source.get(ctx, 0, -p);
        // weight sigma'_{p0} = bar(lambda) bar(sigma_{0,-p}) mu
        let weight = r.mul(r.mul(q.lambda_inv(), q.bar(s0mp)), q.mu());
        let tuple = self.window_tuple(p, weight);
        let m = tuple.len() - 1;
        let x = find_unimodular_shift(ctx, &tuple, m)?;
        let xbar = q.bar(x);
        let q2 = form_q(ctx, &source.column(ctx, -p)).y;
        let inner = r.mul(r.mul(q.bar(xbar), q2), xbar);
        let qi = inverse_quadruple(q);
        let a = HPoint::new(r.neg(r.mul(s0mp, xbar)), qi.bar(inner));
        self.apply(GenWord::Extra { i: p, x: a.x, y: a.y })
    }

    /// Step B: search the achievable gamma-block group (products of
    /// T_{i,-j}(x) and T_i(0,y) within the window) for one that makes the
    /// top tuple of column p unimodular.
    fn gamma_search(&mut self, p: i32) -> Result<()> {
        let ctx = self.ctx;
        let r = ctx.ring();
        let n = ctx.n() as i32;
        if is_left_unimodular(ctx, &self.top_tuple(p)) {
            return Ok(());
        }
        let w = (n - p + 1) as usize;
        let top: Vec<Elem> = (p..=n).map(|i| self.current.get(ctx, i, p)).collect();
        let bot: Vec<Elem> = ((-n)..=(-p)).map(|i| self.current.get(ctx, i, p)).collect();
        // moves: each elementary generator contributes an additive block
        let mut moves: Vec<(GenWord, Vec<Elem>)> = Vec::new();
        // bot holds the entries at rows -n..-p, so matrix column c sits at
        // window offset c + n
        let col_of = |c: i32| (c + n) as usize;
        for i in p..=n {
            for j in p..=n {
                if i == j {
                    continue;
                }
                for x in r.elements().filter(|&x| x != r.zero()) {
                    let mut block = vec![r.zero(); w * w];
                    block[(i - p) as usize * w + col_of(-j)] = x;
                    let mirror = crate::unitary::t_short_mirror(ctx, i, -j, x);
                    block[(j - p) as usize * w + col_of(-i)] =
                        r.add(block[(j - p) as usize * w + col_of(-i)], mirror);
                    moves.push((GenWord::Short { i, j: -j, x }, block));
                }
            }
            for y in r.elements().filter(|&y| y != r.zero()) {
                if !ctx.delta_signed(-eps(i)).contains(HPoint::new(r.zero(), y)) {
                    continue;
                }
                let mut block = vec![r.zero(); w * w];
                block[(i - p) as usize * w + col_of(-i)] = y;
                moves.push((GenWord::Extra { i, x: r.zero(), y }, block));
            }
        }
        let add_blocks = |a: &[Elem], b: &[Elem]| -> Vec<Elem> {
            a.iter().zip(b).map(|(&x, &y)| r.add(x, y)).collect()
        };
        let test = |block: &[Elem]| -> bool {
            let mut cand = top.clone();
            for (row, c) in cand.iter_mut().enumerate() {
                for (col, &b) in bot.iter().enumerate() {
                    *c = r.add(*c, r.mul(block[row * w + col], b));
                }
            }
            is_left_unimodular(ctx, &cand)
        };
        // BFS over sums of move blocks, shortest words first
        let zero_block = vec![r.zero(); w * w];
        let mut seen: HashSet<Vec<Elem>> = HashSet::new();
        seen.insert(zero_block.clone());
        let mut frontier: Vec<(Vec<Elem>, Vec<GenWord>)> = vec![(zero_block, Vec::new())];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (block, words) in &frontier {
                for (word, mv) in &moves {
                    let cand = add_blocks(block, mv);
                    if !seen.insert(cand.clone()) {
                        continue;
                    }
                    if seen.len() > self.gamma_cap {
                        return Err(Error::ReductionFailed(
                            "gamma search exceeded its cap".into(),
                        ));
                    }
                    let mut cand_words = words.clone();
                    cand_words.push(word.clone());
                    if test(&cand) {
                        for w in cand_words {
                            self.apply(w)?;
                        }
                        debug_assert!(is_left_unimodular(ctx, &self.top_tuple(p)));
                        return Ok(());
                    }
                    next.push((cand, cand_words));
                }
            }
            frontier = next;
        }
        Err(Error::ReductionFailed("no gamma block achieves unimodularity".into()))
    }

    /// Shortens the unimodular top tuple of column p into its first entry
    /// with T_{p,L} shifts, leaving entry (p,p) left invertible.
    fn shift_into_corner(&mut self, p: i32) -> Result<()> {
        let ctx = self.ctx;
        let n = ctx.n() as i32;
        for last in (p + 1..=n).rev() {
            let len = (last - p + 1) as usize;
            let tuple: Vec<Elem> =
                (p..=last).map(|i| self.current.get(ctx, i, p)).collect();
            debug_assert_eq!(tuple.len(), len);
            let x = find_unimodular_shift(ctx, &tuple, len - 1)?;
            self.apply(GenWord::Short { i: p, j: last, x })?;
        }
        Ok(())
    }

    /// Turns the unimodular top tuple of column p into (1, 0, ..., 0) using
    /// in-window short roots (needs at least two window rows).
    fn normalize_top_to_e(&mut self, p: i32) -> Result<()> {
        let ctx = self.ctx;
        let r = ctx.ring();
        let n = ctx.n() as i32;
        if p + 1 > n {
            return Err(Error::ReductionFailed("window too small for normalization".into()));
        }
        // reduce to two entries
        for last in (p + 2..=n).rev() {
            let len = (last - p + 1) as usize;
            let tuple: Vec<Elem> =
                (p..=last).map(|i| self.current.get(ctx, i, p)).collect();
            let x = find_unimodular_shift(ctx, &tuple, len - 1)?;
            self.apply(GenWord::Short { i: p, j: last, x })?;
        }
        // make entry (p,p) a unit (left invertible = unit in a finite ring)
        let pair = [self.current.get(ctx, p, p), self.current.get(ctx, p + 1, p)];
        let x = find_unimodular_shift(ctx, &pair, 1)?;
        self.apply(GenWord::Short { i: p, j: p + 1, x })?;
        let u = self.current.get(ctx, p, p);
        let u_inv = r.inverse(u).ok_or_else(|| {
            Error::ReductionFailed("left invertible corner is not a unit".into())
        })?;
        // w_{p+1} <- 1, then w_p <- 1, then clear the rest
        let c = r.mul(r.sub(r.one(), self.current.get(ctx, p + 1, p)), u_inv);
        self.apply(GenWord::Short { i: p + 1, j: p, x: c })?;
        let c = r.sub(r.one(), self.current.get(ctx, p, p));
        self.apply(GenWord::Short { i: p, j: p + 1, x: c })?;
        for j in p + 1..=n {
            let e = self.current.get(ctx, j, p);
            if e != r.zero() {
                self.apply(GenWord::Short { i: j, j: p, x: r.neg(e) })?;
            }
        }
        Ok(())
    }
}

const DEFAULT_GAMMA_CAP: usize = 1 << 19;

/// Produces f upper unitriangular (a product of T_1(a), in-window
/// T_{i,-j}/T_i(0,y) and T_{1,L} factors) with (f sigma)_{11} left
/// invertible. Expects a certified unitary sigma and n >= 2.
pub fn reduce_first_entry(ctx: &FormsContext, sigma: &UMatrix) -> Result<Reduction> {
    if ctx.n() < 2 {
        return Err(Error::SizeMismatch("reduce_first_entry needs n >= 2".into()));
    }
    let mut work = ReductionWork::new(ctx, sigma, DEFAULT_GAMMA_CAP);
    let source = work.current.clone();
    work.extra_short_correction(1, &source)?;
    work.gamma_search(1)?;
    work.shift_into_corner(1)?;

    let corner = work.current.get(ctx, 1, 1);
    if ctx.ring().left_inverses(corner).is_empty() {
        return Err(Error::ReductionFailed("corner is not left invertible".into()));
    }
    if !has_support(ctx, &work.f, SupportClass::UpperUnitriangular) {
        return Err(Error::ReductionFailed("factor product left TEU support".into()));
    }
    for w in &work.factors {
        let m = w.build(ctx)?;
        if !has_support(ctx, &m, SupportClass::UpperUnitriangular) {
            return Err(Error::ReductionFailed("a factor left TEU support".into()));
        }
    }
    Ok(Reduction { factors: work.factors, f: work.f, reduced: work.current })
}

/// Produces f in the upper block shape with the first column of f sigma
/// equal to e_1 on rows 1..n and the second equal to e_2 there. Expects a
/// certified unitary sigma and n >= 3.
pub fn reduce_two_columns(ctx: &FormsContext, sigma: &UMatrix) -> Result<Reduction> {
    let n = ctx.n() as i32;
    if n < 3 {
        return Err(Error::SizeMismatch("reduce_two_columns needs n >= 3".into()));
    }
    let r = ctx.ring().clone();
    let mut work = ReductionWork::new(ctx, sigma, DEFAULT_GAMMA_CAP);

    // phase 1: first column top to (1,0,...,0)
    let source = work.current.clone();
    work.extra_short_correction(1, &source)?;
    work.gamma_search(1)?;
    work.normalize_top_to_e(1)?;
    let tau = work.current.clone();

    // temporaries: clear the whole first column to expose the inner
    // unimodularity; these factors are not kept
    let mut varsigma = tau.clone();
    for j in (-n)..=-2 {
        let e = varsigma.get(ctx, j, 1);
        if e != r.zero() {
            varsigma = t_short(ctx, j, 1, r.neg(e))?.mul(ctx, &varsigma);
        }
    }
    let x0 = varsigma.get(ctx, 0, 1);
    let y0 = varsigma.get(ctx, -1, 1);
    let h = ctx.heisenberg();
    let a = h.neg(HPoint::new(x0, y0));
    varsigma = t_extra(ctx, -1, a)?.mul(ctx, &varsigma);
    for &i in &ctx.theta() {
        let expect = if i == 1 { r.one() } else { r.zero() };
        if varsigma.get(ctx, i, 1) != expect {
            return Err(Error::ReductionFailed("temporary column clearing failed".into()));
        }
    }

    // phase 2 runs on omega = tau * T_12(-F), whose column 2 has a zero
    // first row; the inner weight comes from the cleared matrix
    let f_entry = tau.get(ctx, 1, 2);
    let xi = t_short(ctx, 1, 2, r.neg(f_entry))?;
    work.current = tau.mul(ctx, &xi);
    let phase1_len = work.factors.len();
    work.extra_short_correction(2, &varsigma)?;
    work.gamma_search(2)?;
    work.normalize_top_to_e(2)?;

    // recombine: remove xi on the right, clear column 1 rows 2..n, then
    // clear the (1,2) entry
    work.current = work.current.mul(ctx, &xi.try_inverse(ctx)?);
    for j in 2..=n {
        let e = work.current.get(ctx, j, 1);
        if e != r.zero() {
            work.apply(GenWord::Short { i: j, j: 1, x: r.neg(e) })?;
        }
    }
    let f_final = work.current.get(ctx, 1, 2);
    if f_final != r.zero() {
        work.apply(GenWord::Short { i: 1, j: 2, x: r.neg(f_final) })?;
    }
    let _ = phase1_len;

    // certificates
    for (col, target) in [(1, 1i32), (2, 2)] {
        for i in 1..=n {
            let expect = if i == target { r.one() } else { r.zero() };
            if work.current.get(ctx, i, col) != expect {
                return Err(Error::ReductionFailed(format!(
                    "column {col} top is not e_{target}"
                )));
            }
        }
    }
    if !has_support(ctx, &work.f, SupportClass::UpperBlock) {
        return Err(Error::ReductionFailed("factor product left UEU support".into()));
    }
    for w in &work.factors {
        let m = w.build(ctx)?;
        if !has_support(ctx, &m, SupportClass::UpperBlock) {
            return Err(Error::ReductionFailed("a factor left UEU support".into()));
        }
    }
    Ok(Reduction { factors: work.factors, f: work.f, reduced: work.current })
}

/// A random product of elementary generators, for reduction stress tests.
pub fn random_unitary(
    ctx: &FormsContext,
    gens: &[(GenWord, UMatrix)],
    word_len: usize,
    rng: &mut rand::rngs::StdRng,
) -> UMatrix {
    let mut m = UMatrix::identity(ctx);
    for _ in 0..word_len {
        m = m.mul(ctx, &gens[rng.gen_range(0..gens.len())].1);
    }
    m
}

/// Built-in named subgroups for the CLI and the worked example. The
/// `example174_H` handle is the block subgroup with identity hyperbolic
/// rows, free 0-row and upper unipotent middle entry, over M_2(F_2).
pub fn builtin_subgroup(ctx: &FormsContext, name: &str) -> Result<SubgroupHandle> {
    match name {
        "example174_H" => {
            let spec_ok = matches!(
                ctx.ring().spec(),
                RingSpec::Matrix { dim: 2, inner } if **inner == RingSpec::PrimeField { p: 2 }
            );
            if !spec_ok {
                return Err(Error::IncompatibleBase {
                    kind: "example174_H".into(),
                    reason: "the M_2(F_2) instance".into(),
                });
            }
            let r = ctx.ring().clone();
            let unipotent = r.matrix_from_entries(&[1, 1, 0, 1]);
            let middle_ok = move |e: Elem| e == r.one() || e == unipotent;
            let contains = {
                let middle_ok = middle_ok.clone();
                move |ctx: &FormsContext, m: &UMatrix| -> bool {
                    let r = ctx.ring();
                    for &i in &ctx.theta_hb() {
                        for &j in &ctx.theta() {
                            let expect = if i == j { r.one() } else { r.zero() };
                            if m.get(ctx, i, j) != expect {
                                return false;
                            }
                        }
                    }
                    middle_ok(m.get(ctx, 0, 0))
                }
            };
            let sample = move |ctx: &FormsContext, rng: &mut rand::rngs::StdRng| -> UMatrix {
                let r = ctx.ring();
                let mut m = UMatrix::identity(ctx);
                for &j in &ctx.theta_hb() {
                    m.set(ctx, 0, j, rng.gen_range(0..r.size()));
                }
                let unipotent = r.matrix_from_entries(&[1, 1, 0, 1]);
                if rng.gen_bool(0.5) {
                    m.set(ctx, 0, 0, unipotent);
                }
                m
            };
            // generating family: all single-entry 0-row matrices (the
            // extra short roots T_i(x, 0)) and the unipotent middle element
            let mut generators = Vec::new();
            let ring = ctx.ring().clone();
            for &i in &ctx.theta_hb() {
                for x in ring.elements().filter(|&x| x != ring.zero()) {
                    generators.push(t_extra(ctx, i, HPoint::new(x, ring.zero()))?);
                }
            }
            let mut tau = UMatrix::identity(ctx);
            tau.set(ctx, 0, 0, ring.matrix_from_entries(&[1, 1, 0, 1]));
            generators.push(tau);
            Ok(SubgroupHandle::Predicate {
                name: "example174_H".into(),
                contains: Arc::new(contains),
                sample: Arc::new(sample),
                generators,
            })
        }
        _ => Err(Error::SpecInvalid(format!("unknown builtin subgroup `{name}`"))),
    }
}
