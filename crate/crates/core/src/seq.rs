//! k-sequences of surjections G_k ↠ … ↠ G_1 between finite abelian p-groups:
//! enumeration, classification up to isomorphism, automorphism counts and
//! the 1/#Aut measure on classes.
//!
//! Groups are G_λ with standard generators in the order of the parts of λ. A
//! homomorphism G_λ → G_μ is a len(μ)×len(λ) matrix, row-major, whose column
//! j is the image of the j-th generator; row i is reduced mod p^{μ_i}.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::arith::{require_prime, serde_biguint, serde_rational};
use crate::error::{Error, Result};
use crate::hl::HLValue;
use crate::limits::cl_constant;
use crate::partition::Partition;
use crate::pgroup::{aut_count, sur_count, ConcreteGroup};

/// Default cap on the number of chains (and homomorphisms per map) enumerated.
pub const DEFAULT_CHAIN_BOUND: u64 = 1_000_000;

/// Classes whose ∏#Aut(G_i) is at most this get a direct stabilizer count.
pub const STABILIZER_CHECK_BOUND: u64 = 10_000;

type Map = Vec<u64>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurjectionChain {
    pub p: u64,
    /// λ^{(k)}, …, λ^{(1)}.
    pub types: Vec<Partition>,
    /// maps[i]: G_{types[i]} ↠ G_{types[i+1]}, row-major.
    pub maps: Vec<Vec<Vec<u64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqClass {
    /// The first chain of the class in enumeration order; not canonical across versions.
    pub representative: SurjectionChain,
    pub size: u64,
    /// ∏#Aut(G_i) / size.
    #[serde(with = "serde_biguint")]
    pub aut_count: BigUint,
    /// Number of automorphism tuples fixing the representative, counted
    /// directly when ∏#Aut(G_i) ≤ STABILIZER_CHECK_BOUND.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilizer_count: Option<u64>,
}

fn pow(p: u64, e: u32) -> u64 {
    p.pow(e)
}

/// Homomorphism arithmetic between G_λ's at a fixed prime.
#[derive(Clone, Debug)]
struct Ctx {
    p: u64,
}

impl Ctx {
    /// Entry (i, j) of a hom G_src → G_tgt ranges over multiples of p^{max(0, f_i - e_j)} mod p^{f_i}.
    fn entry_choices(&self, e: u32, f: u32) -> Vec<u64> {
        let step = pow(self.p, f.saturating_sub(e));
        (0..pow(self.p, e.min(f))).map(|t| t * step).collect()
    }

    fn hom_count(&self, src: &Partition, tgt: &Partition) -> u128 {
        let mut c = 1u128;
        for &f in tgt.parts() {
            for &e in src.parts() {
                c = c.saturating_mul(pow(self.p, e.min(f)) as u128);
            }
        }
        c
    }

    fn all_homs(&self, src: &Partition, tgt: &Partition, bound: u64) -> Result<Vec<Map>> {
        let count = self.hom_count(src, tgt);
        if count > bound as u128 {
            return Err(Error::bound(format!("homomorphisms {src} → {tgt} at p={}", self.p), count, bound));
        }
        let (r, c) = (tgt.len(), src.len());
        let choices: Vec<Vec<u64>> =
            (0..r * c).map(|idx| self.entry_choices(src.parts()[idx % c], tgt.parts()[idx / c])).collect();
        let mut out = Vec::with_capacity(count as usize);
        let mut idx = vec![0usize; r * c];
        loop {
            out.push(idx.iter().zip(&choices).map(|(&i, ch)| ch[i]).collect());
            let mut d = r * c;
            loop {
                if d == 0 {
                    return Ok(out);
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < choices[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// Surjective iff surjective mod p: the reduction mod p has full row rank.
    fn is_surjective(&self, m: &Map, src: &Partition, tgt: &Partition) -> bool {
        let (r, c) = (tgt.len(), src.len());
        let p = self.p;
        let mut a: Vec<u64> = m.iter().map(|x| x % p).collect();
        let mut rank = 0;
        for col in 0..c {
            let Some(piv) = (rank..r).find(|&i| a[i * c + col] != 0) else {
                continue;
            };
            for j in 0..c {
                a.swap(piv * c + j, rank * c + j);
            }
            let inv = (1..p).find(|&x| x * a[rank * c + col] % p == 1).unwrap();
            for i in 0..r {
                if i != rank && a[i * c + col] != 0 {
                    let f = a[i * c + col] * inv % p;
                    for j in 0..c {
                        a[i * c + j] = (a[i * c + j] + (p - f) * a[rank * c + j]) % p;
                    }
                }
            }
            rank += 1;
        }
        rank == r
    }

    /// a ∘ b for b: A → B and a: B → C.
    fn compose(&self, a: &Map, b: &Map, src: &Partition, mid: &Partition, tgt: &Partition) -> Map {
        let (r, m, c) = (tgt.len(), mid.len(), src.len());
        let mut out = vec![0u64; r * c];
        for i in 0..r {
            let q = pow(self.p, tgt.parts()[i]) as u128;
            for j in 0..c {
                let s: u128 = (0..m).map(|l| a[i * m + l] as u128 * b[l * c + j] as u128).sum();
                out[i * c + j] = (s % q) as u64;
            }
        }
        out
    }

    fn identity(&self, lam: &Partition) -> Map {
        let r = lam.len();
        (0..r * r).map(|i| (i / r == i % r) as u64).collect()
    }

    /// Generators of (Z/p^e)^×, chosen greedily.
    fn unit_generators(&self, e: u32) -> Vec<u64> {
        let q = pow(self.p, e);
        let mut gens = Vec::new();
        let mut sub = vec![false; q as usize];
        sub[1 % q as usize] = true;
        for u in 2..q {
            if u % self.p == 0 || sub[u as usize] {
                continue;
            }
            gens.push(u);
            // closure of the subgroup under multiplication by the new generator
            let mut frontier: Vec<u64> = (0..q).filter(|&x| sub[x as usize]).collect();
            while let Some(x) = frontier.pop() {
                for &g in &gens {
                    let y = x * g % q;
                    if !sub[y as usize] {
                        sub[y as usize] = true;
                        frontier.push(y);
                    }
                }
            }
        }
        gens
    }

    /// Unit scalings of each factor, elementary transvections
    /// g_j ↦ g_j + p^{max(0, λ_i - λ_j)} g_i, and swaps of equal factors.
    fn aut_generators(&self, lam: &Partition) -> Vec<Map> {
        let e = lam.parts();
        let r = e.len();
        let id = self.identity(lam);
        let mut gens = Vec::new();
        for i in 0..r {
            for u in self.unit_generators(e[i]) {
                let mut g = id.clone();
                g[i * r + i] = u;
                gens.push(g);
            }
            for j in 0..r {
                if i == j {
                    continue;
                }
                let mut g = id.clone();
                g[i * r + j] = pow(self.p, e[i].saturating_sub(e[j])) % pow(self.p, e[i]);
                gens.push(g);
                if e[i] == e[j] && i < j {
                    let mut s = id.clone();
                    s[i * r + i] = 0;
                    s[j * r + j] = 0;
                    s[i * r + j] = 1;
                    s[j * r + i] = 1;
                    gens.push(s);
                }
            }
        }
        gens
    }

    fn inverse(&self, g: &Map, lam: &Partition) -> Map {
        let id = self.identity(lam);
        let mut prev = id.clone();
        let mut cur = g.clone();
        while cur != id {
            prev = cur.clone();
            cur = self.compose(g, &cur, lam, lam, lam);
        }
        prev
    }

    fn aut_elements(&self, lam: &Partition, bound: u64) -> Result<Vec<Map>> {
        Ok(self.all_homs(lam, lam, bound)?.into_iter().filter(|m| self.is_surjective(m, lam, lam)).collect())
    }
}

fn validate_types(p: u64, types: &[Partition]) -> Result<()> {
    require_prime(p)?;
    if types.is_empty() {
        return Err(Error::InvalidInput("need at least one group type".into()));
    }
    Ok(())
}

fn chain_count(p: u64, types: &[Partition]) -> BigUint {
    types.windows(2).map(|w| sur_count(p, &w[0], &w[1])).product()
}

fn to_rows(m: &Map, cols: usize) -> Vec<Vec<u64>> {
    if cols == 0 {
        return Vec::new();
    }
    m.chunks(cols).map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<u64>], src: &Partition, tgt: &Partition) -> Result<Map> {
    if rows.len() != tgt.len() || rows.iter().any(|r| r.len() != src.len()) {
        return Err(Error::InvalidInput(format!("map {src} → {tgt} needs a {}×{} matrix", tgt.len(), src.len())));
    }
    Ok(rows.concat())
}

fn make_chain(p: u64, types: &[Partition], maps: &[Map]) -> SurjectionChain {
    SurjectionChain {
        p,
        types: types.to_vec(),
        maps: maps.iter().zip(types).map(|(m, src)| to_rows(m, src.len())).collect(),
    }
}

/// Every tuple of surjections G_{types[0]} ↠ … ↠ G_{types[k-1]}, exactly once.
pub fn enumerate_chains(p: u64, types: &[Partition], bound: u64) -> Result<Vec<SurjectionChain>> {
    Ok(enumerate_raw(p, types, bound)?.into_iter().map(|maps| make_chain(p, types, &maps)).collect())
}

fn enumerate_raw(p: u64, types: &[Partition], bound: u64) -> Result<Vec<Vec<Map>>> {
    validate_types(p, types)?;
    let total = chain_count(p, types);
    if total > BigUint::from(bound) {
        return Err(Error::bound(format!("surjection chains at p={p}"), &total, bound));
    }
    let ctx = Ctx { p };
    let mut per_step = Vec::new();
    for w in types.windows(2) {
        let surj: Vec<Map> =
            ctx.all_homs(&w[0], &w[1], bound.saturating_mul(64))?.into_iter().filter(|m| ctx.is_surjective(m, &w[0], &w[1])).collect();
        per_step.push(surj);
    }
    let mut out: Vec<Vec<Map>> = vec![Vec::new()];
    for options in &per_step {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for prefix in &out {
            for m in options {
                let mut c = prefix.clone();
                c.push(m.clone());
                next.push(c);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Actions of the generators of ∏ Aut(G_i) on chains, as (factor, g, g^{-1}).
fn generator_actions(ctx: &Ctx, types: &[Partition]) -> Vec<(usize, Map, Map)> {
    let mut out = Vec::new();
    for (i, lam) in types.iter().enumerate() {
        for g in ctx.aut_generators(lam) {
            let inv = ctx.inverse(&g, lam);
            out.push((i, g, inv));
        }
    }
    out
}

/// σ acting on factor i: maps[i] ↦ maps[i] ∘ σ^{-1}, maps[i-1] ↦ σ ∘ maps[i-1].
fn act(ctx: &Ctx, types: &[Partition], maps: &[Map], (i, g, inv): &(usize, Map, Map)) -> Vec<Map> {
    let mut out = maps.to_vec();
    let i = *i;
    if i < maps.len() {
        out[i] = ctx.compose(&maps[i], inv, &types[i], &types[i], &types[i + 1]);
    }
    if i > 0 {
        out[i - 1] = ctx.compose(g, &maps[i - 1], &types[i - 1], &types[i], &types[i]);
    }
    out
}

fn aut_product(p: u64, types: &[Partition]) -> BigUint {
    types.iter().map(|l| aut_count(p, l)).product()
}

/// Number of (σ_k, …, σ_1) ∈ ∏Aut(G_i) with σ_{i} ∘ φ_i = φ_i ∘ σ_{i+1} for all i,
/// by direct search over all automorphism tuples.
fn stabilizer_brute(ctx: &Ctx, types: &[Partition], maps: &[Map], auts: &[Vec<Map>]) -> u64 {
    let mut count = 0u64;
    let mut idx = vec![0usize; types.len()];
    loop {
        let fixes = maps.iter().enumerate().all(|(i, m)| {
            let (s_src, s_tgt) = (&auts[i][idx[i]], &auts[i + 1][idx[i + 1]]);
            ctx.compose(s_tgt, m, &types[i], &types[i + 1], &types[i + 1])
                == ctx.compose(m, s_src, &types[i], &types[i], &types[i + 1])
        });
        count += fixes as u64;
        let mut d = idx.len();
        loop {
            if d == 0 {
                return count;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < auts[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Partitions all chains into isomorphism classes by orbit search under ∏Aut(G_i).
pub fn classify(p: u64, types: &[Partition], bound: u64) -> Result<Vec<SeqClass>> {
    let chains = enumerate_raw(p, types, bound)?;
    let ctx = Ctx { p };
    let index: FxHashMap<Vec<Map>, usize> = chains.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let actions = generator_actions(&ctx, types);
    let total_aut = aut_product(p, types);
    let brute_auts = if total_aut <= BigUint::from(STABILIZER_CHECK_BOUND) {
        Some(types.iter().map(|l| ctx.aut_elements(l, u64::MAX)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let mut seen = vec![false; chains.len()];
    let mut classes = Vec::new();
    for start in 0..chains.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut size = 0u64;
        while let Some(c) = queue.pop_front() {
            size += 1;
            for a in &actions {
                let next = act(&ctx, types, &chains[c], a);
                let j = *index.get(&next).expect("automorphisms preserve surjectivity");
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let (aut, rem) = num_integer::Integer::div_rem(&total_aut, &BigUint::from(size));
        if !rem.is_zero() {
            return Err(Error::Mismatch(format!("orbit size {size} does not divide ∏#Aut = {total_aut}")));
        }
        let stabilizer_count = brute_auts.as_ref().map(|auts| stabilizer_brute(&ctx, types, &chains[start], auts));
        classes.push(SeqClass { representative: make_chain(p, types, &chains[start]), size, aut_count: aut, stabilizer_count });
    }
    Ok(classes)
}

fn raw_maps(chain: &SurjectionChain) -> Result<Vec<Map>> {
    if chain.maps.len() + 1 != chain.types.len() {
        return Err(Error::InvalidInput("a k-sequence has k-1 maps".into()));
    }
    let ctx = Ctx { p: chain.p };
    chain
        .maps
        .iter()
        .enumerate()
        .map(|(i, rows)| {
            let (src, tgt) = (&chain.types[i], &chain.types[i + 1]);
            let mut m = from_rows(rows, src, tgt)?;
            for (idx, x) in m.iter_mut().enumerate() {
                let (r, c) = (idx / src.len(), idx % src.len());
                let q = pow(chain.p, tgt.parts()[r]);
                *x %= q;
                if *x % pow(chain.p, tgt.parts()[r].saturating_sub(src.parts()[c])) != 0 {
                    return Err(Error::InvalidInput(format!("map {i} is not a homomorphism at entry ({r},{c})")));
                }
            }
            if !ctx.is_surjective(&m, src, tgt) {
                return Err(Error::InvalidInput(format!("map {i} is not surjective")));
            }
            Ok(m)
        })
        .collect()
}

/// Whether some (σ_k, …, σ_1) ∈ ∏Aut(G_i) carries S to T, by orbit search from S.
pub fn chains_isomorphic(s: &SurjectionChain, t: &SurjectionChain) -> Result<bool> {
    if s.p != t.p || s.types != t.types {
        return Err(Error::Mismatch("chains have different primes or group types".into()));
    }
    let (a, b) = (raw_maps(s)?, raw_maps(t)?);
    if a == b {
        return Ok(true);
    }
    let ctx = Ctx { p: s.p };
    let actions = generator_actions(&ctx, &s.types);
    let mut seen: std::collections::HashSet<Vec<Map>> = std::collections::HashSet::from([a.clone()]);
    let mut queue = VecDeque::from([a]);
    while let Some(c) = queue.pop_front() {
        for act_ in &actions {
            let next = act(&ctx, &s.types, &c, act_);
            if next == b {
                return Ok(true);
            }
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(false)
}

/// (1/p; 1/p)_∞^k / #Aut of the class.
pub fn seq_measure(class: &SeqClass) -> Result<HLValue> {
    let p = class.representative.p;
    let k = class.representative.types.len() as u32;
    let inv = BigRational::new(BigInt::one(), BigInt::from(class.aut_count.clone()));
    Ok(HLValue::exact(inv).mul(&cl_constant(p)?.powi(k)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    /// Σ over classes of 1/#Aut(class).
    #[serde(with = "serde_rational")]
    pub class_sum: BigRational,
    /// ∏ #Sur(G_{i+1}, G_i) / ∏ #Aut(G_i).
    #[serde(with = "serde_rational")]
    pub formula: BigRational,
    pub holds: bool,
}

pub fn marginal_check(p: u64, types: &[Partition], bound: u64) -> Result<MarginalCheck> {
    let classes = classify(p, types, bound)?;
    let class_sum: BigRational =
        classes.iter().map(|c| BigRational::new(BigInt::one(), BigInt::from(c.aut_count.clone()))).sum();
    let formula = BigRational::new(BigInt::from(chain_count(p, types)), BigInt::from(aut_product(p, types)));
    Ok(MarginalCheck { holds: class_sum == formula, class_sum, formula })
}

/// Kernel data of a surjection φ: G ↠ H that is unchanged by 2-sequence isomorphisms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelInvariants {
    pub kernel_type: Partition,
    /// |p·ker φ ∩ p²G|.
    pub p_ker_meet_p2g: usize,
    pub p_ker_equals_p2g: bool,
}

pub fn kernel_invariants(p: u64, src: &Partition, tgt: &Partition, rows: &[Vec<u64>]) -> Result<KernelInvariants> {
    let m = from_rows(rows, src, tgt)?;
    let g = ConcreteGroup::new(p, src, DEFAULT_CHAIN_BOUND)?;
    let mut kernel = g.zero_set();
    for x in 0..g.order() {
        let d = g.digits(x);
        let is_zero = tgt.parts().iter().enumerate().all(|(i, &f)| {
            let s: u128 = d.iter().enumerate().map(|(j, &dj)| m[i * src.len() + j] as u128 * dj as u128).sum();
            s % pow(p, f) as u128 == 0
        });
        if is_zero {
            kernel.insert(x);
        }
    }
    let mut p_ker = g.zero_set();
    for x in kernel.iter() {
        p_ker.insert(g.scale(p, x));
    }
    let mut p2g = g.zero_set();
    for x in 0..g.order() {
        p2g.insert(g.scale(p * p, x));
    }
    let meet = p_ker.iter().filter(|&x| p2g.contains(x)).count();
    Ok(KernelInvariants {
        kernel_type: g.subgroup_type(&kernel),
        p_ker_meet_p2g: meet,
        p_ker_equals_p2g: p_ker == p2g,
    })
}

/// Parses "2,1;1" into [(2,1), (1)].
pub fn parse_types(s: &str) -> Result<Vec<Partition>> {
    s.split(';').map(|t| t.trim().parse()).collect()
}

/// Class counts keyed by aut count, a compact summary for reports.
pub fn class_profile(classes: &[SeqClass]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for c in classes {
        *m.entry(c.aut_count.to_string()).or_insert(0) += c.size;
    }
    m
}

/// Total number of chains visited by `classify`, as an f64-free check value.
pub fn total_size(classes: &[SeqClass]) -> u64 {
    classes.iter().map(|c| c.size).sum()
}
