//! The module M = R^{2n+1} with basis (e_1,...,e_n,e_0,e_{-n},...,e_{-1}),
//! the forms b and q, the odd-dimensional unitary group and its elementary
//! generators, and the machine checks for their relation calculus.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formparam::{
    invert_point_set, FormParameter, FormRing, HPoint, Heisenberg, Orientation, PointSet,
};
use crate::linalg;
use crate::rings::{
    build_ring, make_odd_quadruple, standard_involution, Elem, FiniteRing, InvolutionName,
    OddQuadruple, RingSpec,
};

/// A logical index in Theta = {-n,...,-1,0,1,...,n}. `0` is the middle
/// basis vector; the array position map lives in `FormsContext::pos` and
/// nowhere else.
pub type ThetaIndex = i32;

#[inline]
pub fn eps(i: ThetaIndex) -> i32 {
    if i > 0 {
        1
    } else if i < 0 {
        -1
    } else {
        panic!("eps(0) is undefined")
    }
}

/// Dimension parameter, forms and form parameter bundled with the
/// orientation-adjusted data every operation needs.
#[derive(Debug, Clone)]
pub struct FormsContext {
    n: usize,
    fr: FormRing,
    h: Heisenberg,
    delta_inv: PointSet,
    digest: String,
}

impl FormsContext {
    pub fn new(fr: FormRing, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::SizeMismatch("n must be at least 1".into()));
        }
        let h = Heisenberg::new(fr.quad(), Orientation::Plus);
        let delta_inv = fr.delta().inverted_set();
        let digest = context_digest(&fr, n);
        Ok(FormsContext { n, fr, h, delta_inv, digest })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn form_ring(&self) -> &FormRing {
        &self.fr
    }

    pub fn ring(&self) -> &Arc<FiniteRing> {
        self.fr.ring()
    }

    pub fn quad(&self) -> &OddQuadruple {
        self.fr.quad()
    }

    pub fn delta(&self) -> &PointSet {
        self.fr.delta().set()
    }

    pub fn heisenberg(&self) -> &Heisenberg {
        &self.h
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Array position of a Theta index: (e_1,...,e_n,e_0,e_{-n},...,e_{-1}).
    #[inline]
    pub fn pos(&self, i: ThetaIndex) -> usize {
        let n = self.n as i32;
        debug_assert!(i.abs() <= n);
        if i > 0 {
            (i - 1) as usize
        } else if i == 0 {
            self.n
        } else {
            (2 * n + 1 + i) as usize
        }
    }

    /// Theta indices in array order.
    pub fn theta(&self) -> Vec<ThetaIndex> {
        let n = self.n as i32;
        (1..=n).chain([0]).chain(-n..=-1).collect()
    }

    /// Hyperbolic indices in array order (0 removed).
    pub fn theta_hb(&self) -> Vec<ThetaIndex> {
        let n = self.n as i32;
        (1..=n).chain(-n..=-1).collect()
    }

    /// Delta^{-eps(i)}: the membership domain for extra short root matrices.
    pub fn delta_signed(&self, sign: i32) -> &PointSet {
        if sign >= 0 {
            self.fr.delta().set()
        } else {
            &self.delta_inv
        }
    }

    /// {(x,y) | (x, bar(y)) in omega}: the sign-adjusted copy of a relative
    /// parameter.
    pub fn invert_set(&self, omega: &PointSet) -> PointSet {
        invert_point_set(self.quad(), omega)
    }
}

fn context_digest(fr: &FormRing, n: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{:?}", fr.ring().spec()));
    for x in fr.ring().elements() {
        hasher.update(fr.quad().bar(x).to_le_bytes());
    }
    hasher.update(fr.quad().lambda().to_le_bytes());
    hasher.update(fr.quad().mu().to_le_bytes());
    for (x, y) in fr.delta().set().to_pairs() {
        hasher.update(x.to_le_bytes());
        hasher.update(y.to_le_bytes());
    }
    hasher.update((n as u64).to_le_bytes());
    let out = hasher.finalize();
    out.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// A column vector of M = R^{2n+1}, indexed by Theta.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UVector {
    n: usize,
    entries: Vec<Elem>,
}

impl UVector {
    pub fn zero(ctx: &FormsContext) -> Self {
        UVector { n: ctx.n, entries: vec![ctx.ring().zero(); ctx.dim()] }
    }

    pub fn basis(ctx: &FormsContext, i: ThetaIndex) -> Self {
        let mut v = Self::zero(ctx);
        v.entries[ctx.pos(i)] = ctx.ring().one();
        v
    }

    pub fn from_entries(ctx: &FormsContext, entries: Vec<Elem>) -> Self {
        assert_eq!(entries.len(), ctx.dim());
        UVector { n: ctx.n, entries }
    }

    #[inline]
    pub fn get(&self, ctx: &FormsContext, i: ThetaIndex) -> Elem {
        self.entries[ctx.pos(i)]
    }

    #[inline]
    pub fn set(&mut self, ctx: &FormsContext, i: ThetaIndex, v: Elem) {
        self.entries[ctx.pos(i)] = v;
    }

    pub fn entries(&self) -> &[Elem] {
        &self.entries
    }

    /// The 2n hyperbolic coordinates, 0-entry dropped, order preserved.
    pub fn hyperbolic_part(&self) -> Vec<Elem> {
        let mut out = Vec::with_capacity(2 * self.n);
        out.extend_from_slice(&self.entries[..self.n]);
        out.extend_from_slice(&self.entries[self.n + 1..]);
        out
    }

    pub fn scaled(&self, ctx: &FormsContext, x: Elem) -> UVector {
        let r = ctx.ring();
        UVector { n: self.n, entries: self.entries.iter().map(|&e| r.mul(e, x)).collect() }
    }

    pub fn add(&self, ctx: &FormsContext, other: &UVector) -> UVector {
        let r = ctx.ring();
        UVector {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| r.add(a, b))
                .collect(),
        }
    }
}

/// b(u, v) = sum_{i>0} bar(u_i) v_{-i} + bar(u_0) mu v_0
///         + sum_{i<0} bar(u_i) lambda v_{-i}.
pub fn form_b(ctx: &FormsContext, u: &UVector, v: &UVector) -> Elem {
    let r = ctx.ring();
    let q = ctx.quad();
    let n = ctx.n as i32;
    let mut acc = r.zero();
    for i in 1..=n {
        acc = r.add(acc, r.mul(q.bar(u.get(ctx, i)), v.get(ctx, -i)));
    }
    acc = r.add(acc, r.mul(r.mul(q.bar(u.get(ctx, 0)), q.mu()), v.get(ctx, 0)));
    for i in 1..=n {
        acc = r.add(
            acc,
            r.mul(r.mul(q.bar(u.get(ctx, -i)), q.lambda()), v.get(ctx, i)),
        );
    }
    acc
}

/// q(u) = (u_0, sum_{i>0} bar(u_i) u_{-i}).
pub fn form_q(ctx: &FormsContext, u: &UVector) -> HPoint {
    let r = ctx.ring();
    let q = ctx.quad();
    let n = ctx.n as i32;
    let mut acc = r.zero();
    for i in 1..=n {
        acc = r.add(acc, r.mul(q.bar(u.get(ctx, i)), u.get(ctx, -i)));
    }
    HPoint::new(u.get(ctx, 0), acc)
}

/// A (2n+1) x (2n+1) matrix over R, indexed by Theta, with a lazily cached
/// inverse. Immutable after construction.
#[derive(Debug)]
pub struct UMatrix {
    n: usize,
    entries: Vec<Elem>,
    inverse: std::sync::OnceLock<Option<Vec<Elem>>>,
}

impl Clone for UMatrix {
    fn clone(&self) -> Self {
        let inverse = std::sync::OnceLock::new();
        if let Some(v) = self.inverse.get() {
            let _ = inverse.set(v.clone());
        }
        UMatrix { n: self.n, entries: self.entries.clone(), inverse }
    }
}

impl PartialEq for UMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}
impl Eq for UMatrix {}

impl std::hash::Hash for UMatrix {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.entries.hash(state);
    }
}

impl PartialOrd for UMatrix {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for UMatrix {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.entries.cmp(&other.entries)
    }
}

impl UMatrix {
    pub fn identity(ctx: &FormsContext) -> Self {
        let d = ctx.dim();
        let mut entries = vec![ctx.ring().zero(); d * d];
        for i in 0..d {
            entries[i * d + i] = ctx.ring().one();
        }
        UMatrix { n: ctx.n, entries, inverse: std::sync::OnceLock::new() }
    }

    pub fn from_entries(ctx: &FormsContext, entries: Vec<Elem>) -> Self {
        assert_eq!(entries.len(), ctx.dim() * ctx.dim());
        UMatrix { n: ctx.n, entries, inverse: std::sync::OnceLock::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn entries(&self) -> &[Elem] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, ctx: &FormsContext, i: ThetaIndex, j: ThetaIndex) -> Elem {
        self.entries[ctx.pos(i) * self.dim() + ctx.pos(j)]
    }

    #[inline]
    pub fn set(&mut self, ctx: &FormsContext, i: ThetaIndex, j: ThetaIndex, v: Elem) {
        let d = self.dim();
        self.entries[ctx.pos(i) * d + ctx.pos(j)] = v;
        self.inverse = std::sync::OnceLock::new();
    }

    pub fn column(&self, ctx: &FormsContext, j: ThetaIndex) -> UVector {
        let d = self.dim();
        let jj = ctx.pos(j);
        UVector {
            n: self.n,
            entries: (0..d).map(|r| self.entries[r * d + jj]).collect(),
        }
    }

    pub fn mul(&self, ctx: &FormsContext, other: &UMatrix) -> UMatrix {
        let r = ctx.ring();
        let d = self.dim();
        let mut entries = vec![r.zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == r.zero() {
                    continue;
                }
                for j in 0..d {
                    let b = other.entries[k * d + j];
                    if b == r.zero() {
                        continue;
                    }
                    entries[i * d + j] = r.add(entries[i * d + j], r.mul(a, b));
                }
            }
        }
        UMatrix { n: self.n, entries, inverse: std::sync::OnceLock::new() }
    }

    pub fn mul_vec(&self, ctx: &FormsContext, v: &UVector) -> UVector {
        let r = ctx.ring();
        let d = self.dim();
        let mut entries = vec![r.zero(); d];
        for (i, out) in entries.iter_mut().enumerate() {
            for k in 0..d {
                *out = r.add(*out, r.mul(self.entries[i * d + k], v.entries[k]));
            }
        }
        UVector { n: self.n, entries }
    }

    /// Cached exact inverse.
    pub fn try_inverse(&self, ctx: &FormsContext) -> Result<UMatrix> {
        let inv = self
            .inverse
            .get_or_init(|| linalg::invert(ctx.ring(), self.dim(), &self.entries));
        match inv {
            Some(entries) => Ok(UMatrix {
                n: self.n,
                entries: entries.clone(),
                inverse: std::sync::OnceLock::new(),
            }),
            None => Err(Error::NotInvertible),
        }
    }

    pub fn is_invertible(&self, ctx: &FormsContext) -> bool {
        self.try_inverse(ctx).is_ok()
    }

    pub fn conjugate_by(&self, ctx: &FormsContext, g: &UMatrix) -> Result<UMatrix> {
        // ^g self = g self g^{-1}
        Ok(g.mul(ctx, self).mul(ctx, &g.try_inverse(ctx)?))
    }

    pub fn commutator(&self, ctx: &FormsContext, other: &UMatrix) -> Result<UMatrix> {
        // [a, b] = a b a^{-1} b^{-1}
        Ok(self
            .mul(ctx, other)
            .mul(ctx, &self.try_inverse(ctx)?)
            .mul(ctx, &other.try_inverse(ctx)?))
    }

    /// Hyperbolic part: the 2n x 2n matrix with the 0-row and 0-column
    /// removed.
    pub fn hyperbolic_part(&self, ctx: &FormsContext) -> Vec<Elem> {
        let d = self.dim();
        let mid = ctx.n;
        let mut out = Vec::with_capacity(4 * ctx.n * ctx.n);
        for i in (0..d).filter(|&i| i != mid) {
            for j in (0..d).filter(|&j| j != mid) {
                out.push(self.entries[i * d + j]);
            }
        }
        out
    }

    pub fn render(&self, ctx: &FormsContext) -> String {
        let d = self.dim();
        let r = ctx.ring();
        let mut rows = Vec::with_capacity(d);
        for i in 0..d {
            let row: Vec<String> =
                (0..d).map(|j| r.render(self.entries[i * d + j])).collect();
            rows.push(format!("[{}]", row.join(", ")));
        }
        format!("[{}]", rows.join(", "))
    }
}

/// Outcome of the two-condition unitarity check: the inverse-entry
/// identities and the column q-congruences.
#[derive(Debug, Clone)]
pub struct UnitaryCertificate {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// Membership test through the inverse-entry identities and the column
/// congruences q(sigma_{*j}) = (delta_{0j}, 0) mod Delta.
pub fn is_unitary(ctx: &FormsContext, sigma: &UMatrix) -> Result<UnitaryCertificate> {
    let inv = sigma.try_inverse(ctx)?;
    let r = ctx.ring();
    let q = ctx.quad();
    let mut violations = Vec::new();

    for &i in &ctx.theta_hb() {
        for &j in &ctx.theta_hb() {
            let lhs = inv.get(ctx, i, j);
            let rhs = r.mul(
                r.mul(q.lambda_pow(-(eps(i) + 1) / 2), q.bar(sigma.get(ctx, -j, -i))),
                q.lambda_pow((eps(j) + 1) / 2),
            );
            if lhs != rhs {
                violations.push(format!("inverse identity failed at hb ({i},{j})"));
            }
        }
        // mu sigma'_{0 i} = bar(sigma_{-i,0}) lambda^{(eps(i)+1)/2}
        let lhs = r.mul(q.mu(), inv.get(ctx, 0, i));
        let rhs = r.mul(q.bar(sigma.get(ctx, -i, 0)), q.lambda_pow((eps(i) + 1) / 2));
        if lhs != rhs {
            violations.push(format!("inverse identity failed at 0-row, j={i}"));
        }
        // sigma'_{i 0} = lambda^{-(eps(i)+1)/2} bar(sigma_{0,-i}) mu
        let lhs = inv.get(ctx, i, 0);
        let rhs = r.mul(
            r.mul(q.lambda_pow(-(eps(i) + 1) / 2), q.bar(sigma.get(ctx, 0, -i))),
            q.mu(),
        );
        if lhs != rhs {
            violations.push(format!("inverse identity failed at 0-column, i={i}"));
        }
    }
    let lhs = r.mul(q.mu(), inv.get(ctx, 0, 0));
    let rhs = r.mul(q.bar(sigma.get(ctx, 0, 0)), q.mu());
    if lhs != rhs {
        violations.push("inverse identity failed at (0,0)".into());
    }

    let h = ctx.heisenberg();
    for &j in &ctx.theta() {
        let col_q = form_q(ctx, &sigma.column(ctx, j));
        let target = if j == 0 { HPoint::new(r.one(), r.zero()) } else { h.zero() };
        if !ctx.delta().contains(h.sub(col_q, target)) {
            violations.push(format!("q(column {j}) is not (delta,0) mod Delta"));
        }
    }

    Ok(UnitaryCertificate { ok: violations.is_empty(), violations })
}

/// Literal membership test: b(sigma u, sigma v) = b(u, v) for all u, v and
/// q(sigma u) = q(u) mod Delta for all u. Exhaustive over M, so only for
/// tiny instances; the oracle counterpart of `is_unitary`.
pub fn is_unitary_bruteforce(ctx: &FormsContext, sigma: &UMatrix, cap: u64) -> Result<bool> {
    let r = ctx.ring();
    let needed = (r.size() as u64).pow(ctx.dim() as u32);
    if needed > cap {
        return Err(Error::CapExceeded { cap, needed });
    }
    if !sigma.is_invertible(ctx) {
        return Ok(false);
    }
    let h = ctx.heisenberg();
    let vectors: Vec<UVector> = all_vectors(ctx);
    for u in &vectors {
        let su = sigma.mul_vec(ctx, u);
        if !ctx.delta().contains(h.sub(form_q(ctx, &su), form_q(ctx, u))) {
            return Ok(false);
        }
        for v in &vectors {
            let sv = sigma.mul_vec(ctx, v);
            if form_b(ctx, &su, &sv) != form_b(ctx, u, v) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn all_vectors(ctx: &FormsContext) -> Vec<UVector> {
    let r = ctx.ring();
    let s = r.size() as u64;
    let d = ctx.dim();
    let total = s.pow(d as u32);
    (0..total)
        .map(|code| {
            let mut rest = code;
            let mut entries = vec![0u32; d];
            for slot in entries.iter_mut() {
                *slot = (rest % s) as u32;
                rest /= s;
            }
            UVector { n: ctx.n, entries }
        })
        .collect()
}

/// Short root matrix T_ij(x) = e + x e^{ij}
/// - lambda^{(eps(j)-1)/2} bar(x) lambda^{(1-eps(i))/2} e^{-j,-i}.
pub fn t_short(ctx: &FormsContext, i: ThetaIndex, j: ThetaIndex, x: Elem) -> Result<UMatrix> {
    check_hb_pair(ctx, i, j)?;
    let r = ctx.ring();
    let q = ctx.quad();
    let mut m = UMatrix::identity(ctx);
    m.set(ctx, i, j, r.add(m.get(ctx, i, j), x));
    let mirrored = r.neg(r.mul(
        r.mul(q.lambda_pow((eps(j) - 1) / 2), q.bar(x)),
        q.lambda_pow((1 - eps(i)) / 2),
    ));
    m.set(ctx, -j, -i, r.add(m.get(ctx, -j, -i), mirrored));
    Ok(m)
}

/// The mirrored coefficient of T_ij(x): its entry at (-j, -i).
pub fn t_short_mirror(ctx: &FormsContext, i: ThetaIndex, j: ThetaIndex, x: Elem) -> Elem {
    let r = ctx.ring();
    let q = ctx.quad();
    r.neg(r.mul(
        r.mul(q.lambda_pow((eps(j) - 1) / 2), q.bar(x)),
        q.lambda_pow((1 - eps(i)) / 2),
    ))
}

fn check_hb_pair(ctx: &FormsContext, i: ThetaIndex, j: ThetaIndex) -> Result<()> {
    let n = ctx.n as i32;
    if i == 0 || j == 0 || i.abs() > n || j.abs() > n || i == j || i == -j {
        return Err(Error::BadIndices(format!("(i,j) = ({i},{j}) with n = {n}")));
    }
    Ok(())
}

/// Extra short root matrix
/// T_i(x,y) = e + x e^{0,-i} - lambda^{-(1+eps(i))/2} bar(x) mu e^{i0}
///          + y e^{i,-i}, requiring (x,y) in Delta^{-eps(i)}.
pub fn t_extra(ctx: &FormsContext, i: ThetaIndex, a: HPoint) -> Result<UMatrix> {
    let n = ctx.n as i32;
    if i == 0 || i.abs() > n {
        return Err(Error::BadIndices(format!("i = {i} with n = {n}")));
    }
    if !ctx.delta_signed(-eps(i)).contains(a) {
        return Err(Error::PointNotInParameter { x: a.x, y: a.y });
    }
    let r = ctx.ring();
    let q = ctx.quad();
    let mut m = UMatrix::identity(ctx);
    m.set(ctx, 0, -i, r.add(m.get(ctx, 0, -i), a.x));
    let mid = r.neg(r.mul(r.mul(q.lambda_pow(-(1 + eps(i)) / 2), q.bar(a.x)), q.mu()));
    m.set(ctx, i, 0, r.add(m.get(ctx, i, 0), mid));
    m.set(ctx, i, -i, r.add(m.get(ctx, i, -i), a.y));
    Ok(m)
}

/// Long root matrix T_i(0, y) = e + y e^{i,-i}.
pub fn t_long(ctx: &FormsContext, i: ThetaIndex, y: Elem) -> Result<UMatrix> {
    t_extra(ctx, i, HPoint::new(ctx.ring().zero(), y))
}

/// The permutation-like element P_ij = T_ij(1) T_ji(-1) T_ij(1).
pub fn p_elem(ctx: &FormsContext, i: ThetaIndex, j: ThetaIndex) -> Result<UMatrix> {
    let r = ctx.ring();
    let a = t_short(ctx, i, j, r.one())?;
    let b = t_short(ctx, j, i, r.neg(r.one()))?;
    Ok(a.mul(ctx, &b).mul(ctx, &a))
}

/// P_ij in closed form, used to cross-check the product definition.
pub fn p_elem_explicit(ctx: &FormsContext, i: ThetaIndex, j: ThetaIndex) -> Result<UMatrix> {
    check_hb_pair(ctx, i, j)?;
    let r = ctx.ring();
    let q = ctx.quad();
    let mut m = UMatrix::identity(ctx);
    for k in [i, j, -i, -j] {
        m.set(ctx, k, k, r.zero());
    }
    m.set(ctx, i, j, r.one());
    m.set(ctx, j, i, r.neg(r.one()));
    m.set(ctx, -i, -j, q.lambda_pow((eps(i) - eps(j)) / 2));
    m.set(ctx, -j, -i, r.neg(q.lambda_pow((eps(j) - eps(i)) / 2)));
    Ok(m)
}

/// A generator word, the serialization unit for products of elementary
/// matrices.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "T", rename_all = "snake_case")]
pub enum GenWord {
    Short { i: i32, j: i32, x: Elem },
    Extra { i: i32, x: Elem, y: Elem },
}

impl GenWord {
    pub fn build(&self, ctx: &FormsContext) -> Result<UMatrix> {
        match *self {
            GenWord::Short { i, j, x } => t_short(ctx, i, j, x),
            GenWord::Extra { i, x, y } => t_extra(ctx, i, HPoint::new(x, y)),
        }
    }
}

/// All elementary generators T_ij(x), x != 0, and T_i(a), a != 0, of
/// EU_{2n+1}(R, Delta), with their words.
pub fn elementary_generators(ctx: &FormsContext) -> Vec<(GenWord, UMatrix)> {
    let r = ctx.ring();
    let mut out = Vec::new();
    for &i in &ctx.theta_hb() {
        for &j in &ctx.theta_hb() {
            if i == j || i == -j {
                continue;
            }
            for x in r.elements().filter(|&x| x != r.zero()) {
                let w = GenWord::Short { i, j, x };
                let m = t_short(ctx, i, j, x).expect("indices are admissible");
                out.push((w, m));
            }
        }
        for a in ctx.delta_signed(-eps(i)).points() {
            if a == HPoint::new(r.zero(), r.zero()) {
                continue;
            }
            let w = GenWord::Extra { i, x: a.x, y: a.y };
            let m = t_extra(ctx, i, a).expect("point is in the parameter");
            out.push((w, m));
        }
    }
    out
}

/// Breadth-first closure of `gens` under multiplication and inversion, in a
/// canonical order.
pub fn generate_group(
    ctx: &FormsContext,
    gens: &[UMatrix],
    cap: usize,
) -> Result<Vec<UMatrix>> {
    let mut step: Vec<UMatrix> = vec![UMatrix::identity(ctx)];
    let mut seen: HashSet<Vec<Elem>> = step.iter().map(|m| m.entries.clone()).collect();
    let mut all: Vec<UMatrix> = step.clone();
    let mut moves: Vec<UMatrix> = Vec::new();
    for g in gens {
        moves.push(g.clone());
        moves.push(g.try_inverse(ctx)?);
    }
    while !step.is_empty() {
        let mut next = Vec::new();
        for m in &step {
            for g in &moves {
                let prod = m.mul(ctx, g);
                if seen.insert(prod.entries.clone()) {
                    if all.len() + next.len() + 1 > cap {
                        return Err(Error::ClosureOverflow { cap });
                    }
                    next.push(prod);
                }
            }
        }
        all.extend(next.iter().cloned());
        step = next;
    }
    all.sort();
    Ok(all)
}

/// Exhaustive enumeration of the full unitary group at small sizes:
/// every invertible matrix passing `is_unitary`.
pub fn enumerate_unitary_group(ctx: &FormsContext, cap: u64) -> Result<Vec<UMatrix>> {
    let r = ctx.ring();
    let d = ctx.dim();
    let s = r.size() as u64;
    let needed = s.pow((d * d) as u32);
    if needed > cap {
        return Err(Error::CapExceeded { cap, needed });
    }
    let mut out = Vec::new();
    for code in 0..needed {
        let mut rest = code;
        let mut entries = vec![0u32; d * d];
        for slot in entries.iter_mut() {
            *slot = (rest % s) as u32;
            rest /= s;
        }
        let m = UMatrix { n: ctx.n, entries, inverse: std::sync::OnceLock::new() };
        if m.is_invertible(ctx) && is_unitary(ctx, &m)?.ok {
            out.push(m);
        }
    }
    Ok(out)
}

/// A matrix over R of size 2m x 2m in the hyperbolic basis
/// (e_1,...,e_m,e_{-m},...,e_{-1}), as fed to the even-to-odd embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvenMatrix {
    pub m: usize,
    pub entries: Vec<Elem>,
}

impl EvenMatrix {
    pub fn identity(ring: &FiniteRing, m: usize) -> Self {
        let d = 2 * m;
        let mut entries = vec![ring.zero(); d * d];
        for i in 0..d {
            entries[i * d + i] = ring.one();
        }
        EvenMatrix { m, entries }
    }

    fn pos(&self, i: ThetaIndex) -> usize {
        if i > 0 {
            (i - 1) as usize
        } else {
            (2 * self.m as i32 + i) as usize
        }
    }

    pub fn get(&self, i: ThetaIndex, j: ThetaIndex) -> Elem {
        self.entries[self.pos(i) * 2 * self.m + self.pos(j)]
    }

    pub fn set(&mut self, i: ThetaIndex, j: ThetaIndex, v: Elem) {
        let d = 2 * self.m;
        let (p, q) = (self.pos(i), self.pos(j));
        self.entries[p * d + q] = v;
    }

    pub fn mul(&self, ring: &FiniteRing, other: &EvenMatrix) -> EvenMatrix {
        let d = 2 * self.m;
        let mut entries = vec![ring.zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    entries[i * d + j] = ring.add(
                        entries[i * d + j],
                        ring.mul(self.entries[i * d + k], other.entries[k * d + j]),
                    );
                }
            }
        }
        EvenMatrix { m: self.m, entries }
    }
}

/// phi_{2m}^{2n+1}: block embedding [[A,B],[C,D]] -> [[A,0,B],[0,e,0],[C,0,D]].
/// Indices +-1..+-m keep their labels; everything else is identity.
pub fn embed_even(ctx: &FormsContext, tau: &EvenMatrix) -> Result<UMatrix> {
    let m = tau.m;
    if m > ctx.n {
        return Err(Error::SizeMismatch(format!("m = {m} exceeds n = {}", ctx.n)));
    }
    let r = ctx.ring();
    let mut out = UMatrix::identity(ctx);
    for i in (1..=m as i32).chain(-(m as i32)..=-1) {
        for j in (1..=m as i32).chain(-(m as i32)..=-1) {
            if i == j {
                out.set(ctx, i, j, tau.get(i, j));
            } else {
                let v = tau.get(i, j);
                if v != r.zero() {
                    out.set(ctx, i, j, v);
                }
            }
        }
    }
    Ok(out)
}

/// phi_{2m+1}^{2n+1}: sigma -> diag(e^l, sigma, e^l) with l = n - m. The
/// embedded block is centered, so index labels shift.
pub fn embed_odd(ctx: &FormsContext, inner_ctx: &FormsContext, sigma: &UMatrix) -> Result<UMatrix> {
    let m = inner_ctx.n();
    if m > ctx.n {
        return Err(Error::SizeMismatch(format!("m = {m} exceeds n = {}", ctx.n)));
    }
    let l = ctx.n - m;
    let d_in = inner_ctx.dim();
    let mut out = UMatrix::identity(ctx);
    let d = ctx.dim();
    for p in 0..d_in {
        for q in 0..d_in {
            out.entries[(l + p) * d + (l + q)] = sigma.entries[p * d_in + q];
        }
    }
    out.inverse = std::sync::OnceLock::new();
    Ok(out)
}

/// The classical families realized as odd-dimensional unitary groups.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalKind {
    /// U_{2n+1}(S x S^op, Delta_max) = GL_{2n+1}(S): swap, lambda = mu = 1.
    GlOdd { inner: RingSpec },
    /// O_{2n+1}(R), commutative R: id, lambda = 1, mu = 2, Delta = {(x, -x^2)}.
    OOdd { base: RingSpec },
    /// Sp_{2n+1}(R), commutative R: id, lambda = -1, mu = 0, Delta = R x R.
    SpOdd { base: RingSpec },
    /// U_{2n}(R, Lambda) sitting inside U_{2n+1}: Delta = {0} x Lambda.
    EvenAsOdd { base: RingSpec, lambda: Elem, lambda_param_max: bool },
}

pub fn classical_instance(kind: &ClassicalKind, n: usize) -> Result<FormsContext> {
    match kind {
        ClassicalKind::GlOdd { inner } => {
            let spec = RingSpec::ProductWithOpposite { inner: Box::new(inner.clone()) };
            let ring = build_ring(&spec)?;
            let swap = Arc::new(standard_involution(&ring, InvolutionName::Swap)?);
            let quad = make_odd_quadruple(swap, ring.one(), ring.one())?;
            let delta = FormParameter::max(&quad);
            FormsContext::new(FormRing::new(quad, delta), n)
        }
        ClassicalKind::OOdd { base } => {
            if !base.is_commutative() {
                return Err(Error::IncompatibleBase {
                    kind: "o_odd".into(),
                    reason: "a commutative base ring".into(),
                });
            }
            let ring = build_ring(base)?;
            let id = Arc::new(standard_involution(&ring, InvolutionName::Identity)?);
            let two = ring.add(ring.one(), ring.one());
            let quad = make_odd_quadruple(id, ring.one(), two)?;
            let pts = ring
                .elements()
                .map(|x| HPoint::new(x, ring.neg(ring.mul(x, x))))
                .collect::<Vec<_>>();
            let set = PointSet::from_points(ring.size(), pts);
            let delta = FormParameter::certify(&quad, set)?;
            FormsContext::new(FormRing::new(quad, delta), n)
        }
        ClassicalKind::SpOdd { base } => {
            if !base.is_commutative() {
                return Err(Error::IncompatibleBase {
                    kind: "sp_odd".into(),
                    reason: "a commutative base ring".into(),
                });
            }
            let ring = build_ring(base)?;
            let id = Arc::new(standard_involution(&ring, InvolutionName::Identity)?);
            let quad = make_odd_quadruple(id, ring.neg(ring.one()), ring.zero())?;
            let full = PointSet::from_points(
                ring.size(),
                (0..ring.size()).flat_map(|x| (0..ring.size()).map(move |y| HPoint::new(x, y))),
            );
            let delta = FormParameter::certify(&quad, full)?;
            FormsContext::new(FormRing::new(quad, delta), n)
        }
        ClassicalKind::EvenAsOdd { base, lambda, lambda_param_max } => {
            if !base.is_commutative() {
                return Err(Error::IncompatibleBase {
                    kind: "even_as_odd".into(),
                    reason: "a commutative base ring".into(),
                });
            }
            let ring = build_ring(base)?;
            let id = Arc::new(standard_involution(&ring, InvolutionName::Identity)?);
            let quad = make_odd_quadruple(id, *lambda, ring.zero())?;
            let lam_set: Vec<Elem> = if *lambda_param_max {
                // Lambda_max = {y | y + bar(y) lambda = 0}
                ring.elements()
                    .filter(|&y| ring.add(y, ring.mul(quad.bar(y), quad.lambda())) == ring.zero())
                    .collect()
            } else {
                // Lambda_min = {x - bar(x) lambda}
                ring.elements()
                    .map(|x| ring.sub(x, ring.mul(quad.bar(x), quad.lambda())))
                    .collect()
            };
            let set = PointSet::from_points(
                ring.size(),
                lam_set.into_iter().map(|y| HPoint::new(ring.zero(), y)),
            );
            let delta = FormParameter::certify(&quad, set)?;
            FormsContext::new(FormRing::new(quad, delta), n)
        }
    }
}

/// How many ring values a relation sweep draws.
#[derive(Debug, Clone, Copy)]
pub enum ValueSampling {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

/// Per-relation verdicts of the short/extra-short relation calculus and the
/// P-conjugation identities.
#[derive(Debug, Clone)]
pub struct RelationsReport {
    pub entries: Vec<RelationEntry>,
}

#[derive(Debug, Clone)]
pub struct RelationEntry {
    pub id: String,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl RelationsReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.failures.is_empty())
    }

    pub fn total_cases(&self) -> usize {
        self.entries.iter().map(|e| e.cases).sum()
    }
}

struct Sweep {
    ring_values: Vec<Vec<Elem>>,
    delta_plus: Vec<Vec<HPoint>>,
    delta_minus: Vec<Vec<HPoint>>,
}

impl Sweep {
    fn new(ctx: &FormsContext, sampling: ValueSampling) -> Self {
        let r = ctx.ring();
        match sampling {
            ValueSampling::Exhaustive => {
                let xs: Vec<Elem> = r.elements().collect();
                let dp = ctx.delta_signed(1).points();
                let dm = ctx.delta_signed(-1).points();
                Sweep {
                    ring_values: vec![xs.clone(), xs],
                    delta_plus: vec![dp.clone(), dp],
                    delta_minus: vec![dm.clone(), dm],
                }
            }
            ValueSampling::Sampled { count, seed } => {
                let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
                let dp_all = ctx.delta_signed(1).points();
                let dm_all = ctx.delta_signed(-1).points();
                let draw_x =
                    |rng: &mut rand::rngs::StdRng| (0..count).map(|_| rng.gen_range(0..r.size())).collect::<Vec<_>>();
                let xs1 = draw_x(&mut rng);
                let xs2 = draw_x(&mut rng);
                let draw_p = |rng: &mut rand::rngs::StdRng, all: &[HPoint]| {
                    (0..count).map(|_| all[rng.gen_range(0..all.len())]).collect::<Vec<_>>()
                };
                let dp1 = draw_p(&mut rng, &dp_all);
                let dp2 = draw_p(&mut rng, &dp_all);
                let dm1 = draw_p(&mut rng, &dm_all);
                let dm2 = draw_p(&mut rng, &dm_all);
                Sweep {
                    ring_values: vec![xs1, xs2],
                    delta_plus: vec![dp1, dp2],
                    delta_minus: vec![dm1, dm2],
                }
            }
        }
    }

    fn delta_for(&self, sign: i32, slot: usize) -> &[HPoint] {
        if sign >= 0 {
            &self.delta_plus[slot]
        } else {
            &self.delta_minus[slot]
        }
    }
}

/// Checks relations S1-S5, E1-E3, SE1-SE2 plus the three P-conjugation
/// identities for every admissible index pattern at the context's n.
pub fn verify_relations(ctx: &FormsContext, sampling: ValueSampling) -> RelationsReport {
    let r = ctx.ring().clone();
    let q = ctx.quad().clone();
    let sweep = Sweep::new(ctx, sampling);
    let hb = ctx.theta_hb();
    let mut entries: Vec<RelationEntry> = Vec::new();

    let mut run = |id: &str, body: &mut dyn FnMut(&mut RelationEntry)| {
        let mut entry = RelationEntry { id: id.into(), cases: 0, failures: Vec::new() };
        body(&mut entry);
        entries.push(entry);
    };

    let fail = |entry: &mut RelationEntry, msg: String| {
        if entry.failures.len() < 5 {
            entry.failures.push(msg);
        } else if entry.failures.len() == 5 {
            entry.failures.push("...".into());
        }
    };

    let pairs: Vec<(i32, i32)> = hb
        .iter()
        .flat_map(|&i| hb.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| i != j && i != -j)
        .collect();

    // (S1) T_ij(x) = T_{-j,-i}(-lambda^{(eps(j)-1)/2} bar(x) lambda^{(1-eps(i))/2})
    run("S1", &mut |entry| {
        for &(i, j) in &pairs {
            for &x in &sweep.ring_values[0] {
                entry.cases += 1;
                let lhs = t_short(ctx, i, j, x).unwrap();
                let rhs = t_short(ctx, -j, -i, t_short_mirror(ctx, i, j, x)).unwrap();
                if lhs != rhs {
                    fail(entry, format!("S1 i={i} j={j} x={}", r.render(x)));
                }
            }
        }
    });

    // (S2) T_ij(x) T_ij(y) = T_ij(x+y)
    run("S2", &mut |entry| {
        for &(i, j) in &pairs {
            for &x in &sweep.ring_values[0] {
                for &y in &sweep.ring_values[1] {
                    entry.cases += 1;
                    let lhs = t_short(ctx, i, j, x).unwrap().mul(ctx, &t_short(ctx, i, j, y).unwrap());
                    let rhs = t_short(ctx, i, j, r.add(x, y)).unwrap();
                    if lhs != rhs {
                        fail(entry, format!("S2 i={i} j={j}"));
                    }
                }
            }
        }
    });

    // (S3) [T_ij(x), T_kl(y)] = e if k != j,-i and l != i,-j
    run("S3", &mut |entry| {
        for &(i, j) in &pairs {
            for &(k, l) in &pairs {
                if k == j || k == -i || l == i || l == -j {
                    continue;
                }
                for &x in &sweep.ring_values[0] {
                    for &y in &sweep.ring_values[1] {
                        entry.cases += 1;
                        let a = t_short(ctx, i, j, x).unwrap();
                        let b = t_short(ctx, k, l, y).unwrap();
                        if a.commutator(ctx, &b).unwrap() != UMatrix::identity(ctx) {
                            fail(entry, format!("S3 ({i},{j}) ({k},{l})"));
                        }
                    }
                }
            }
        }
    });

    // (S4) [T_ij(x), T_jk(y)] = T_ik(xy) if i != +-k
    run("S4", &mut |entry| {
        for &(i, j) in &pairs {
            for &k in &hb {
                if k == j || k == -j || k == i || k == -i {
                    continue;
                }
                for &x in &sweep.ring_values[0] {
                    for &y in &sweep.ring_values[1] {
                        entry.cases += 1;
                        let a = t_short(ctx, i, j, x).unwrap();
                        let b = t_short(ctx, j, k, y).unwrap();
                        let rhs = t_short(ctx, i, k, r.mul(x, y)).unwrap();
                        if a.commutator(ctx, &b).unwrap() != rhs {
                            fail(entry, format!("S4 i={i} j={j} k={k}"));
                        }
                    }
                }
            }
        }
    });

    // (S5) [T_ij(x), T_{j,-i}(y)] = T_i(0, xy - lambda^{(-1-eps(i))/2} bar(y) bar(x) lambda^{(1-eps(i))/2})
    run("S5", &mut |entry| {
        for &(i, j) in &pairs {
            for &x in &sweep.ring_values[0] {
                for &y in &sweep.ring_values[1] {
                    entry.cases += 1;
                    let a = t_short(ctx, i, j, x).unwrap();
                    let b = t_short(ctx, j, -i, y).unwrap();
                    let z = r.sub(
                        r.mul(x, y),
                        r.mul(
                            r.mul(
                                r.mul(q.lambda_pow((-1 - eps(i)) / 2), q.bar(y)),
                                q.bar(x),
                            ),
                            q.lambda_pow((1 - eps(i)) / 2),
                        ),
                    );
                    match t_long(ctx, i, z) {
                        Ok(rhs) => {
                            if a.commutator(ctx, &b).unwrap() != rhs {
                                fail(entry, format!("S5 i={i} j={j}"));
                            }
                        }
                        Err(_) => fail(entry, format!("S5 i={i} j={j}: (0,z) not in parameter")),
                    }
                }
            }
        }
    });

    // (E1) T_i(a) T_i(b) = T_i(a +_{-eps(i)} b)
    run("E1", &mut |entry| {
        for &i in &hb {
            let h_or = Heisenberg::new(ctx.quad(), Orientation::from_sign(-eps(i)));
            let d1 = sweep.delta_for(-eps(i), 0).to_vec();
            let d2 = sweep.delta_for(-eps(i), 1).to_vec();
            for &a in &d1 {
                for &b in &d2 {
                    entry.cases += 1;
                    let lhs = t_extra(ctx, i, a).unwrap().mul(ctx, &t_extra(ctx, i, b).unwrap());
                    let rhs = t_extra(ctx, i, h_or.add(a, b)).unwrap();
                    if lhs != rhs {
                        fail(entry, format!("E1 i={i}"));
                    }
                }
            }
        }
    });

    // (E2) [T_i(a), T_j(b)] = T_{i,-j}(-lambda^{-(1+eps(i))/2} bar(x1) mu x2) if i != +-j
    run("E2", &mut |entry| {
        for &i in &hb {
            for &j in &hb {
                if i == j || i == -j {
                    continue;
                }
                let d1 = sweep.delta_for(-eps(i), 0).to_vec();
                let d2 = sweep.delta_for(-eps(j), 1).to_vec();
                for &a in &d1 {
                    for &b in &d2 {
                        entry.cases += 1;
                        let lhs = t_extra(ctx, i, a)
                            .unwrap()
                            .commutator(ctx, &t_extra(ctx, j, b).unwrap())
                            .unwrap();
                        let z = r.neg(r.mul(
                            r.mul(
                                r.mul(q.lambda_pow(-(1 + eps(i)) / 2), q.bar(a.x)),
                                q.mu(),
                            ),
                            b.x,
                        ));
                        let rhs = t_short(ctx, i, -j, z).unwrap();
                        if lhs != rhs {
                            fail(entry, format!("E2 i={i} j={j}"));
                        }
                    }
                }
            }
        }
    });

    // (E3) [T_i(a), T_i(b)] = T_i(0, -lambda^{-(1+eps(i))/2}(bar(x1) mu x2 - bar(x2) mu x1))
    run("E3", &mut |entry| {
        for &i in &hb {
            let d1 = sweep.delta_for(-eps(i), 0).to_vec();
            let d2 = sweep.delta_for(-eps(i), 1).to_vec();
            for &a in &d1 {
                for &b in &d2 {
                    entry.cases += 1;
                    let lhs = t_extra(ctx, i, a)
                        .unwrap()
                        .commutator(ctx, &t_extra(ctx, i, b).unwrap())
                        .unwrap();
                    let inner = r.sub(
                        r.mul(r.mul(q.bar(a.x), q.mu()), b.x),
                        r.mul(r.mul(q.bar(b.x), q.mu()), a.x),
                    );
                    let z = r.neg(r.mul(q.lambda_pow(-(1 + eps(i)) / 2), inner));
                    match t_long(ctx, i, z) {
                        Ok(rhs) => {
                            if lhs != rhs {
                                fail(entry, format!("E3 i={i}"));
                            }
                        }
                        Err(_) => fail(entry, format!("E3 i={i}: (0,z) not in parameter")),
                    }
                }
            }
        }
    });

    // (SE1) [T_ij(x), T_k(b)] = e if k != j,-i
    run("SE1", &mut |entry| {
        for &(i, j) in &pairs {
            for &k in &hb {
                if k == j || k == -i {
                    continue;
                }
                let dk = sweep.delta_for(-eps(k), 1).to_vec();
                for &x in &sweep.ring_values[0] {
                    for &b in &dk {
                        entry.cases += 1;
                        let a = t_short(ctx, i, j, x).unwrap();
                        let t = t_extra(ctx, k, b).unwrap();
                        if a.commutator(ctx, &t).unwrap() != UMatrix::identity(ctx) {
                            fail(entry, format!("SE1 ({i},{j}) k={k}"));
                        }
                    }
                }
            }
        }
    });

    // (SE2) [T_ij(x), T_j(y,z)] = T_{j,-i}(z w) T_i(y w, x z w),
    // w = lambda^{(eps(j)-1)/2} bar(x) lambda^{(1-eps(i))/2}
    run("SE2", &mut |entry| {
        for &(i, j) in &pairs {
            let dj = sweep.delta_for(-eps(j), 1).to_vec();
            for &x in &sweep.ring_values[0] {
                for &b in &dj {
                    entry.cases += 1;
                    let a = t_short(ctx, i, j, x).unwrap();
                    let t = t_extra(ctx, j, b).unwrap();
                    let w = r.mul(
                        r.mul(q.lambda_pow((eps(j) - 1) / 2), q.bar(x)),
                        q.lambda_pow((1 - eps(i)) / 2),
                    );
                    let first = t_short(ctx, j, -i, r.mul(b.y, w)).unwrap();
                    let second = t_extra(
                        ctx,
                        i,
                        HPoint::new(r.mul(b.x, w), r.mul(r.mul(x, b.y), w)),
                    );
                    match second {
                        Ok(second) => {
                            let rhs = first.mul(ctx, &second);
                            if a.commutator(ctx, &t).unwrap() != rhs {
                                fail(entry, format!("SE2 i={i} j={j}"));
                            }
                        }
                        Err(_) => fail(entry, format!("SE2 i={i} j={j}: target not in parameter")),
                    }
                }
            }
        }
    });

    // P-conjugations: ^{P_ki} T_ij(x) = T_kj(x), ^{P_kj} T_ij(x) = T_ik(x),
    // ^{P_{-k,-i}} T_i(y,z) = T_k(y, lambda^{(eps(i)-eps(k))/2} z)
    run("P1", &mut |entry| {
        for &(i, j) in &pairs {
            for &k in &hb {
                if k == i || k == -i || k == j || k == -j {
                    continue;
                }
                for &x in &sweep.ring_values[0] {
                    entry.cases += 1;
                    let p = p_elem(ctx, k, i).unwrap();
                    let lhs = t_short(ctx, i, j, x).unwrap().conjugate_by(ctx, &p).unwrap();
                    if lhs != t_short(ctx, k, j, x).unwrap() {
                        fail(entry, format!("P1 i={i} j={j} k={k}"));
                    }
                }
            }
        }
    });
    run("P2", &mut |entry| {
        for &(i, j) in &pairs {
            for &k in &hb {
                if k == i || k == -i || k == j || k == -j {
                    continue;
                }
                for &x in &sweep.ring_values[0] {
                    entry.cases += 1;
                    let p = p_elem(ctx, k, j).unwrap();
                    let lhs = t_short(ctx, i, j, x).unwrap().conjugate_by(ctx, &p).unwrap();
                    if lhs != t_short(ctx, i, k, x).unwrap() {
                        fail(entry, format!("P2 i={i} j={j} k={k}"));
                    }
                }
            }
        }
    });
    run("P3", &mut |entry| {
        for &i in &hb {
            for &k in &hb {
                if k == i || k == -i {
                    continue;
                }
                let di = sweep.delta_for(-eps(i), 0).to_vec();
                for &a in &di {
                    entry.cases += 1;
                    let p = p_elem(ctx, -k, -i).unwrap();
                    let lhs = t_extra(ctx, i, a).unwrap().conjugate_by(ctx, &p).unwrap();
                    let target = HPoint::new(
                        a.x,
                        r.mul(q.lambda_pow((eps(i) - eps(k)) / 2), a.y),
                    );
                    match t_extra(ctx, k, target) {
                        Ok(rhs) => {
                            if lhs != rhs {
                                fail(entry, format!("P3 i={i} k={k}"));
                            }
                        }
                        Err(_) => fail(entry, format!("P3 i={i} k={k}: target not in parameter")),
                    }
                }
            }
        }
    });

    RelationsReport { entries }
}

/// The form identities: b biadditive and lambda-Hermitian with the twisted
/// sesquilinearity, q compatible with scaling and addition modulo Delta_min,
/// and tr(q(u)) = b(u,u). Exhaustive over M x M when that fits in `cap`,
/// sampled otherwise.
pub fn verify_lemma15(ctx: &FormsContext, cap: u64, samples: usize, seed: u64) -> RelationEntry {
    let r = ctx.ring().clone();
    let q = ctx.quad().clone();
    let h = ctx.heisenberg();
    let dmin = crate::formparam::delta_min(&q);
    let mut entry = RelationEntry { id: "lemma15".into(), cases: 0, failures: Vec::new() };
    let m_size = (r.size() as u64).pow(ctx.dim() as u32);
    let exhaustive = m_size.saturating_mul(m_size) <= cap;
    let vectors: Vec<UVector> = if exhaustive {
        all_vectors(ctx)
    } else {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                UVector::from_entries(
                    ctx,
                    (0..ctx.dim()).map(|_| rng.gen_range(0..r.size())).collect(),
                )
            })
            .collect()
    };
    let scalars: Vec<Elem> = if r.size() <= 4 {
        r.elements().collect()
    } else {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed ^ 1);
        (0..4).map(|_| rng.gen_range(0..r.size())).collect()
    };
    let fail = |entry: &mut RelationEntry, msg: &str| {
        if entry.failures.len() < 5 {
            entry.failures.push(msg.into());
        }
    };
    for u in &vectors {
        entry.cases += 1;
        if h.trace(form_q(ctx, u)) != form_b(ctx, u, u) {
            fail(&mut entry, "tr(q(u)) != b(u,u)");
        }
        for &x in &scalars {
            if form_q(ctx, &u.scaled(ctx, x)) != h.scale(form_q(ctx, u), x) {
                fail(&mut entry, "q(ux) != q(u).x");
            }
        }
        for v in &vectors {
            entry.cases += 1;
            if form_b(ctx, u, v) != r.mul(q.bar(form_b(ctx, v, u)), q.lambda()) {
                fail(&mut entry, "b(u,v) != bar(b(v,u)) lambda");
            }
            for &x in &scalars {
                for &y in &scalars {
                    if form_b(ctx, &u.scaled(ctx, x), &v.scaled(ctx, y))
                        != r.mul(r.mul(q.bar(x), form_b(ctx, u, v)), y)
                    {
                        fail(&mut entry, "b(ux,vy) != bar(x) b(u,v) y");
                    }
                }
            }
            let lhs = form_q(ctx, &u.add(ctx, v));
            let rhs = h.add(
                h.add(form_q(ctx, u), form_q(ctx, v)),
                HPoint::new(r.zero(), form_b(ctx, u, v)),
            );
            if !dmin.contains(h.sub(lhs, rhs)) {
                fail(&mut entry, "q(u+v) defect left Delta_min");
            }
        }
    }
    entry
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formparam::delta_min;

    pub(crate) fn ctx_f2(n: usize) -> FormsContext {
        let r = build_ring(&RingSpec::PrimeField { p: 2 }).unwrap();
        let id = Arc::new(standard_involution(&r, InvolutionName::Identity).unwrap());
        let quad = make_odd_quadruple(id, 1, 0).unwrap();
        let delta = FormParameter::max(&quad);
        FormsContext::new(FormRing::new(quad, delta), n).unwrap()
    }

    pub(crate) fn ctx_z4(n: usize) -> FormsContext {
        let r = build_ring(&RingSpec::IntegersMod { m: 4 }).unwrap();
        let id = Arc::new(standard_involution(&r, InvolutionName::Identity).unwrap());
        let quad = make_odd_quadruple(id, 1, 2).unwrap();
        let delta = FormParameter::max(&quad);
        FormsContext::new(FormRing::new(quad, delta), n).unwrap()
    }

    pub(crate) fn ctx_m2f2(n: usize) -> FormsContext {
        let r = build_ring(&RingSpec::Matrix {
            dim: 2,
            inner: Box::new(RingSpec::PrimeField { p: 2 }),
        })
        .unwrap();
        let t = Arc::new(standard_involution(&r, InvolutionName::Transpose).unwrap());
        let quad = make_odd_quadruple(t, r.one(), r.zero()).unwrap();
        let delta = FormParameter::max(&quad);
        FormsContext::new(FormRing::new(quad, delta), n).unwrap()
    }

    #[test]
    fn theta_position_map() {
        let ctx = ctx_f2(3);
        assert_eq!(ctx.pos(1), 0);
        assert_eq!(ctx.pos(3), 2);
        assert_eq!(ctx.pos(0), 3);
        assert_eq!(ctx.pos(-3), 4);
        assert_eq!(ctx.pos(-1), 6);
        assert_eq!(ctx.theta(), vec![1, 2, 3, 0, -3, -2, -1]);
    }

    #[test]
    fn form_b_on_basis_vectors() {
        let ctx = ctx_z4(2);
        let e1 = UVector::basis(&ctx, 1);
        let em1 = UVector::basis(&ctx, -1);
        let e0 = UVector::basis(&ctx, 0);
        assert_eq!(form_b(&ctx, &e1, &em1), 1);
        assert_eq!(form_b(&ctx, &e0, &e0), ctx.quad().mu());
    }

    #[test]
    fn form_q_on_basis_vectors() {
        let ctx = ctx_z4(2);
        assert_eq!(form_q(&ctx, &UVector::basis(&ctx, 0)), HPoint::new(1, 0));
        for j in [1, 2, -1, -2] {
            assert_eq!(form_q(&ctx, &UVector::basis(&ctx, j)), HPoint::new(0, 0));
        }
    }

    #[test]
    fn lemma15_exhaustive_n1_f2() {
        let ctx = ctx_f2(1);
        let r = ctx.ring().clone();
        let q = ctx.quad().clone();
        let h = ctx.heisenberg();
        let dmin = delta_min(&q);
        let vectors = all_vectors(&ctx);
        for u in &vectors {
            assert_eq!(h.trace(form_q(&ctx, u)), form_b(&ctx, u, u));
            for x in r.elements() {
                assert_eq!(form_q(&ctx, &u.scaled(&ctx, x)), h.scale(form_q(&ctx, u), x));
            }
            for v in &vectors {
                // b(u,v) = bar(b(v,u)) lambda
                assert_eq!(
                    form_b(&ctx, u, v),
                    r.mul(q.bar(form_b(&ctx, v, u)), q.lambda())
                );
                for x in r.elements() {
                    for y in r.elements() {
                        assert_eq!(
                            form_b(&ctx, &u.scaled(&ctx, x), &v.scaled(&ctx, y)),
                            r.mul(r.mul(q.bar(x), form_b(&ctx, u, v)), y)
                        );
                    }
                }
                // q(u+v) = q(u) + q(v) + (0, b(u,v)) mod Delta_min
                let lhs = form_q(&ctx, &u.add(&ctx, v));
                let rhs = h.add(
                    h.add(form_q(&ctx, u), form_q(&ctx, v)),
                    HPoint::new(r.zero(), form_b(&ctx, u, v)),
                );
                assert!(dmin.contains(h.sub(lhs, rhs)));
            }
        }
    }

    #[test]
    fn generators_are_unitary() {
        for ctx in [ctx_f2(2), ctx_z4(2), ctx_m2f2(2)] {
            for (_, g) in elementary_generators(&ctx) {
                assert!(is_unitary(&ctx, &g).unwrap().ok);
            }
            let p = p_elem(&ctx, 1, -2).unwrap();
            assert!(is_unitary(&ctx, &p).unwrap().ok);
        }
    }

    #[test]
    fn t_short_degenerate_and_errors() {
        let ctx = ctx_z4(2);
        assert_eq!(t_short(&ctx, 1, 2, 0).unwrap(), UMatrix::identity(&ctx));
        assert!(matches!(t_short(&ctx, 1, 1, 1), Err(Error::BadIndices(_))));
        assert!(matches!(t_short(&ctx, 1, -1, 1), Err(Error::BadIndices(_))));
        assert!(matches!(t_short(&ctx, 0, 1, 1), Err(Error::BadIndices(_))));
        assert!(matches!(t_short(&ctx, 3, 1, 1), Err(Error::BadIndices(_))));
    }

    #[test]
    fn t_extra_membership_gate() {
        // over the O-like instance Delta = {(x, -x^2)} is a proper subset
        let ctx = classical_instance(&ClassicalKind::OOdd { base: RingSpec::IntegersMod { m: 4 } }, 2)
            .unwrap();
        assert!(t_extra(&ctx, -1, HPoint::new(1, 3)).is_ok());
        assert!(matches!(
            t_extra(&ctx, -1, HPoint::new(1, 1)),
            Err(Error::PointNotInParameter { .. })
        ));
        assert_eq!(
            t_extra(&ctx, 1, HPoint::new(0, 0)).unwrap(),
            UMatrix::identity(&ctx)
        );
    }

    #[test]
    fn p_product_matches_explicit_form() {
        for ctx in [ctx_f2(3), ctx_z4(3), ctx_m2f2(2)] {
            for &i in &ctx.theta_hb() {
                for &j in &ctx.theta_hb() {
                    if i == j || i == -j {
                        continue;
                    }
                    assert_eq!(
                        p_elem(&ctx, i, j).unwrap(),
                        p_elem_explicit(&ctx, i, j).unwrap()
                    );
                }
            }
            // (P_ij)^{-1} = P_ji
            let p12 = p_elem(&ctx, 1, 2).unwrap();
            let p21 = p_elem(&ctx, 2, 1).unwrap();
            assert_eq!(p12.mul(&ctx, &p21), UMatrix::identity(&ctx));
        }
    }

    #[test]
    fn unitary_oracle_agreement_small() {
        // spot agreement on generated elements; the full sweep over GL_3 is
        // in the acceptance suite
        let ctx = ctx_f2(1);
        let gens: Vec<UMatrix> =
            elementary_generators(&ctx).into_iter().map(|(_, m)| m).collect();
        let group = generate_group(&ctx, &gens, 100000).unwrap();
        for m in &group {
            assert!(is_unitary(&ctx, m).unwrap().ok);
            assert!(is_unitary_bruteforce(&ctx, m, 1 << 20).unwrap());
        }
    }

    #[test]
    fn example174_sigma_is_unitary() {
        let ctx = ctx_m2f2(3);
        let r = ctx.ring().clone();
        let swap = r.matrix_from_entries(&[0, 1, 1, 0]);
        let mut sigma = UMatrix::identity(&ctx);
        sigma.set(&ctx, 0, 0, swap);
        assert!(is_unitary(&ctx, &sigma).unwrap().ok);
    }

    #[test]
    fn generate_group_basics() {
        let ctx = ctx_f2(1);
        let e = UMatrix::identity(&ctx);
        assert_eq!(generate_group(&ctx, &[e.clone()], 10).unwrap(), vec![e]);
        let gens: Vec<UMatrix> =
            elementary_generators(&ctx).into_iter().map(|(_, m)| m).collect();
        let group = generate_group(&ctx, &gens, 100000).unwrap();
        // inverse-closed
        for m in &group {
            let inv = m.try_inverse(&ctx).unwrap();
            assert!(group.binary_search(&inv).is_ok());
        }
    }

    #[test]
    fn gl_instance_has_168_elements_at_n1() {
        let ctx = classical_instance(
            &ClassicalKind::GlOdd { inner: RingSpec::PrimeField { p: 2 } },
            1,
        )
        .unwrap();
        let group = enumerate_unitary_group(&ctx, 1 << 21).unwrap();
        assert_eq!(group.len(), 168);
    }

    #[test]
    fn sp_instance_membership_is_gram_preservation() {
        // n = 1 over F3: unitarity coincides with preservation of the skew
        // Gram matrix [[0,0,1],[0,0,0],[-1,0,0]]
        let ctx =
            classical_instance(&ClassicalKind::SpOdd { base: RingSpec::PrimeField { p: 3 } }, 1)
                .unwrap();
        let r = ctx.ring().clone();
        let d = 3;
        let gram: Vec<Elem> = vec![0, 0, 1, 0, 0, 0, r.neg(1), 0, 0];
        let total = (r.size() as u64).pow(9);
        let mut count_unitary = 0;
        for code in 0..total {
            let mut rest = code;
            let mut entries = vec![0u32; 9];
            for slot in entries.iter_mut() {
                *slot = (rest % r.size() as u64) as u32;
                rest /= r.size() as u64;
            }
            let m = UMatrix::from_entries(&ctx, entries.clone());
            if !m.is_invertible(&ctx) {
                continue;
            }
            // sigma^t G sigma = G
            let mut pres = true;
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
                        pres = false;
                    }
                }
            }
            let uni = is_unitary(&ctx, &m).unwrap().ok;
            assert_eq!(uni, pres, "disagreement at code {code}");
            if uni {
                count_unitary += 1;
            }
        }
        assert!(count_unitary > 0);
    }

    #[test]
    fn relations_hold_exhaustively_f2_n3() {
        let ctx = ctx_f2(3);
        let report = verify_relations(&ctx, ValueSampling::Exhaustive);
        assert!(report.passed(), "{:?}", report.entries.iter().filter(|e| !e.failures.is_empty()).collect::<Vec<_>>());
        assert!(report.total_cases() > 0);
    }

    #[test]
    fn relations_sampled_m2f2_n3() {
        let ctx = ctx_m2f2(3);
        let report = verify_relations(&ctx, ValueSampling::Sampled { count: 2, seed: 11 });
        assert!(report.passed(), "{:?}", report.entries.iter().filter(|e| !e.failures.is_empty()).collect::<Vec<_>>());
    }

    #[test]
    fn embeddings() {
        let ctx = ctx_z4(3);
        let r = ctx.ring().clone();
        // identity embeds to identity
        let even_id = EvenMatrix::identity(&r, 2);
        assert_eq!(embed_even(&ctx, &even_id).unwrap(), UMatrix::identity(&ctx));
        let inner = ctx_z4(1);
        assert_eq!(
            embed_odd(&ctx, &inner, &UMatrix::identity(&inner)).unwrap(),
            UMatrix::identity(&ctx)
        );

        // phi is multiplicative (block placement): sampled pairs
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let mut a = EvenMatrix::identity(&r, 2);
            let mut b = EvenMatrix::identity(&r, 2);
            for idx in [1i32, 2, -2, -1] {
                for jdx in [1i32, 2, -2, -1] {
                    if rng.gen_bool(0.5) {
                        a.set(idx, jdx, rng.gen_range(0..r.size()));
                    }
                    if rng.gen_bool(0.5) {
                        b.set(idx, jdx, rng.gen_range(0..r.size()));
                    }
                }
            }
            let lhs = embed_even(&ctx, &a.mul(&r, &b)).unwrap();
            let rhs = embed_even(&ctx, &a).unwrap().mul(&ctx, &embed_even(&ctx, &b).unwrap());
            assert_eq!(lhs, rhs);
        }

        // embedded hyperbolic parts of elementary matrices land in EU:
        // the embedding of the hb part of T_ij(x)/T_i(0,y) at m = n is the
        // generator itself
        let m = ctx.n();
        for (w, g) in elementary_generators(&ctx) {
            let keep = match w {
                GenWord::Short { .. } => true,
                GenWord::Extra { x, .. } => x == r.zero(),
            };
            if !keep {
                continue;
            }
            let hb = g.hyperbolic_part(&ctx);
            let even = EvenMatrix { m, entries: hb };
            let back = embed_even(&ctx, &even).unwrap();
            assert_eq!(back, g);
            assert!(is_unitary(&ctx, &back).unwrap().ok);
        }
    }

    #[test]
    fn o_odd_delta_certifies() {
        let ctx = classical_instance(&ClassicalKind::OOdd { base: RingSpec::IntegersMod { m: 4 } }, 1)
            .unwrap();
        assert_eq!(ctx.delta().len(), 4);
    }

    #[test]
    fn even_as_odd_instance() {
        let ctx = classical_instance(
            &ClassicalKind::EvenAsOdd {
                base: RingSpec::PrimeField { p: 3 },
                lambda: 2, // -1 mod 3
                lambda_param_max: true,
            },
            1,
        )
        .unwrap();
        // Delta = {0} x Lambda_max with Lambda_max = {y | y - y = 0}... over
        // lambda = -1, Lambda_max = {y | y = y} = R
        assert!(ctx.delta().iter().all(|p| p.x == 0));
    }
}
