//! Closed-form limit laws for cokernels and coranks of matrix products, and
//! truncated theory tables for comparison with simulation.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{self, inv_prime, ratio_pow, require_prime};
use crate::error::{Error, Result};
use crate::hl::HLValue;
use crate::partition::{partitions_bounded, Partition};
use crate::pgroup::{aut_count, chain_count_prime, sur_count, GroupType};

pub type QPochValue = HLValue;

/// (a; q)_n = ∏_{i<n} (1 - a q^i); `n = None` is the infinite product.
pub fn qpoch(a: &BigRational, q: &BigRational, n: Option<u32>, tol: f64) -> Result<QPochValue> {
    if let Some(n) = n {
        let mut acc = BigRational::one();
        let mut aq = a.clone();
        for _ in 0..n {
            acc *= BigRational::one() - &aq;
            aq *= q;
        }
        return Ok(HLValue::exact(acc));
    }
    if q.abs() >= BigRational::one() {
        return Err(Error::Divergence(format!("|q| = {} is not below 1", arith::format_rational(&q.abs()))));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let af = arith::to_f64(a);
    let qf = arith::to_f64(q);
    let mut acc = 1.0f64;
    let mut aq = af;
    for i in 0..100_000u32 {
        // |remaining factor - 1| ≤ exp(Σ_{j≥i} |a q^j|) - 1
        let s = aq.abs() / (1.0 - qf.abs());
        let tail = acc.abs() * s.exp_m1();
        if tail < tol || aq == 0.0 {
            let rounding = acc.abs() * 4.0 * f64::EPSILON * (i as f64 + 1.0);
            return Ok(HLValue::approx(acc, tail + rounding));
        }
        acc *= 1.0 - aq;
        aq *= qf;
    }
    Err(Error::NonConvergence("q-Pochhammer product".into()))
}

const TIGHT: f64 = 1e-17;

/// (1/p; 1/p)_∞.
pub fn cl_constant(p: u64) -> Result<HLValue> {
    require_prime(p)?;
    let t = inv_prime(p);
    qpoch(&t, &t, None, TIGHT)
}

/// (1/p; 1/p)_n, exactly.
fn tt(p: u64, n: u32) -> BigRational {
    let t = inv_prime(p);
    (1..=n).map(|i| BigRational::one() - ratio_pow(&t, i)).product()
}

/// The exact rational factor ∏_i p^{-r_i s_i} / ((1/p;1/p)_{r_i} (1/p;1/p)_{s_i}),
/// where s_i = r_1 + … + r_i.
pub fn corank_rational_part(p: u64, pattern: &[u32]) -> BigRational {
    let t = inv_prime(p);
    let mut acc = BigRational::one();
    let mut s = 0u32;
    for &r in pattern {
        s += r;
        acc *= ratio_pow(&t, r * s) / (tt(p, r) * tt(p, s));
    }
    acc
}

/// Limiting probability that rank(M_1⋯M_i) = n - (r_1 + … + r_i) for all i.
pub fn corank_joint_limit(p: u64, pattern: &[u32]) -> Result<HLValue> {
    if pattern.is_empty() {
        return Err(Error::InvalidInput("corank pattern must be nonempty".into()));
    }
    let c = cl_constant(p)?;
    Ok(HLValue::exact(corank_rational_part(p, pattern)).mul(&c.powi(pattern.len() as u32)))
}

/// P(rank(BA) = n - k0 - d) for fixed B of rank n - k0 and uniform A over F_p.
pub fn rank_step(p: u64, n: u32, k0: u32, d: u32) -> Result<BigRational> {
    require_prime(p)?;
    if k0 > n || d > n - k0 {
        return Err(Error::InvalidInput(format!("need 0 ≤ k0 ≤ n and 0 ≤ d ≤ n - k0, got n={n} k0={k0} d={d}")));
    }
    let t = inv_prime(p);
    Ok(tt(p, n - k0) * tt(p, n) / (tt(p, d) * tt(p, k0 + d) * tt(p, n - k0 - d)) * ratio_pow(&t, d * (k0 + d)))
}

fn check_support<'a>(primes: &[u64], groups: impl IntoIterator<Item = &'a GroupType>) -> Result<BTreeSet<u64>> {
    let set: BTreeSet<u64> = primes.iter().copied().collect();
    for &p in &set {
        require_prime(p)?;
    }
    for g in groups {
        if let Some(q) = g.primes().find(|q| !set.contains(q)) {
            return Err(Error::PrimeSupport(format!("group {g} involves prime {q} outside {primes:?}")));
        }
    }
    Ok(set)
}

fn constants_pow(primes: &BTreeSet<u64>, k: u32) -> Result<HLValue> {
    let mut acc = HLValue::exact(BigRational::one());
    for &p in primes {
        acc = acc.mul(&cl_constant(p)?.powi(k));
    }
    Ok(acc)
}

fn ratio(n: num_bigint::BigUint, d: num_bigint::BigUint) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// ∏_{p∈P} (1/p;1/p)_∞^k · n_k(B) / #Aut(B).
pub fn cok_prod_limit(primes: &[u64], k: u32, b: &GroupType) -> Result<HLValue> {
    let set = check_support(primes, [b])?;
    let mut r = BigRational::one();
    for (&p, lam) in b.components() {
        r *= ratio(chain_count_prime(p, lam, k), aut_count(p, lam));
    }
    Ok(HLValue::exact(r).mul(&constants_pow(&set, k)?))
}

/// The exact factor ∏_i #Sur(B_i, B_{i-1}) / #Aut(B_i) at a single prime, B_0 = 0.
pub fn cok_joint_rational_part(p: u64, lambdas: &[Partition]) -> BigRational {
    let mut r = BigRational::one();
    let mut prev = Partition::empty();
    for lam in lambdas {
        let s = sur_count(p, lam, &prev);
        if s.is_zero() {
            return BigRational::zero();
        }
        r *= ratio(s, aut_count(p, lam));
        prev = lam.clone();
    }
    r
}

/// ∏_{p∈P} (1/p;1/p)_∞^k ∏_i #Sur(B_i, B_{i-1}) / #Aut(B_i), with B_0 = 0.
pub fn cok_joint_limit(primes: &[u64], bs: &[GroupType]) -> Result<HLValue> {
    if bs.is_empty() {
        return Err(Error::InvalidInput("need at least one group".into()));
    }
    let set = check_support(primes, bs)?;
    let mut r = BigRational::one();
    for &p in &set {
        let lambdas: Vec<Partition> = bs.iter().map(|b| b.component(p)).collect();
        r *= cok_joint_rational_part(p, &lambdas);
    }
    Ok(HLValue::exact(r).mul(&constants_pow(&set, bs.len() as u32)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    CokJoint,
    CokSingle,
    Corank,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "cok_joint" => Ok(Mode::CokJoint),
            "cok_single" => Ok(Mode::CokSingle),
            "corank" => Ok(Mode::Corank),
            _ => Err(Error::InvalidInput(format!("unknown mode {s:?}"))),
        }
    }
}

/// A table or sample key: a cokernel chain (outer index j, inner index over
/// primes in increasing order) or a corank pattern.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellKey {
    Cok(Vec<Vec<Partition>>),
    Corank(Vec<u32>),
}

impl std::fmt::Display for CellKey {
    /// Semicolon-joined slots; primes within a slot are joined with `|`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = match self {
            CellKey::Cok(slots) => slots
                .iter()
                .map(|per_prime| per_prime.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("|"))
                .collect(),
            CellKey::Corank(rs) => rs.iter().map(|r| r.to_string()).collect(),
        };
        f.write_str(&s.join(";"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub key: CellKey,
    pub prob: f64,
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryTable {
    pub p: u64,
    #[serde(rename = "L")]
    pub level: u32,
    pub k: u32,
    pub mode: Mode,
    pub cells: Vec<Cell>,
    pub overflow: f64,
    pub deficit_bound: f64,
}

impl TheoryTable {
    /// Whether an observed key falls in the overflow bucket of this table.
    pub fn is_overflow(&self, key: &CellKey) -> bool {
        match key {
            CellKey::Cok(slots) => slots.iter().flatten().any(|l| l.largest() >= self.level),
            CellKey::Corank(rs) => rs.iter().sum::<u32>() >= self.level,
        }
    }
}

/// Corank patterns of length k with total at most `max_total`.
pub fn corank_patterns(k: u32, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(k: u32, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k as usize {
            out.push(cur.clone());
            return;
        }
        for r in 0..=left {
            cur.push(r);
            rec(k, left - r, cur, out);
            cur.pop();
        }
    }
    rec(k, max_total, &mut cur, &mut out);
    out
}

const TABLE_TAIL: f64 = 1e-12;

/// Smallest R with P(total corank > R) < TABLE_TAIL, with that tail bound.
fn corank_cutoff(p: u64, k: u32) -> Result<(u32, f64)> {
    let c = cl_constant(p)?.powi(k);
    for r in 0..200u32 {
        let mut mass = BigRational::zero();
        for pat in corank_patterns(k, r) {
            mass += corank_rational_part(p, &pat);
        }
        let lower = arith::to_f64(&mass) * (c.value - c.error_bound);
        let tail = (1.0 - lower).max(0.0);
        if tail < TABLE_TAIL {
            return Ok((r, tail));
        }
    }
    Err(Error::NonConvergence(format!("corank tail at p={p}, k={k}")))
}

/// Chains λ^{(1)} ⊆ … ⊆ λ^{(k)} with parts < L and len(λ^{(k)}) ≤ R.
fn containment_chains(top_bound: &[Partition], k: u32) -> Vec<Vec<Partition>> {
    let mut out = Vec::new();
    for top in top_bound {
        let mut cur = vec![top.clone()];
        extend_down(k, &mut cur, &mut out);
    }
    out
}

fn extend_down(k: u32, cur: &mut Vec<Partition>, out: &mut Vec<Vec<Partition>>) {
    if cur.len() == k as usize {
        let mut chain = cur.clone();
        chain.reverse();
        out.push(chain);
        return;
    }
    let last = cur.last().unwrap().clone();
    for sub in last.sub_diagrams() {
        cur.push(sub);
        extend_down(k, cur, out);
        cur.pop();
    }
}

/// Exact interior cells plus an overflow bucket.
///
/// In the cokernel modes, cells are keyed by types whose parts are all below
/// `level` (observations mod p^L identify these exactly); every type with a
/// part equal to L is pooled into the overflow. Cells are listed up to
/// corank R, chosen so the omitted interior mass is below 1e-12. In corank
/// mode, cells are patterns with total corank below `level`.
pub fn theory_table(p: u64, level: u32, k: u32, mode: Mode) -> Result<TheoryTable> {
    require_prime(p)?;
    if level == 0 || k == 0 {
        return Err(Error::InvalidInput("L and k must be at least 1".into()));
    }
    let c = cl_constant(p)?.powi(k);
    let mut cells = Vec::new();
    let mut omitted = 0.0;
    match mode {
        Mode::Corank => {
            for pat in corank_patterns(k, level - 1) {
                let v = HLValue::exact(corank_rational_part(p, &pat)).mul(&c);
                cells.push(Cell { key: CellKey::Corank(pat), prob: v.value, error_bound: v.error_bound });
            }
        }
        Mode::CokJoint | Mode::CokSingle => {
            let (r, tail) = corank_cutoff(p, k)?;
            omitted = tail;
            let tops: Vec<Partition> = partitions_bounded((level - 1) * r, level - 1, r as usize).collect();
            if mode == Mode::CokSingle {
                for lam in tops {
                    let rat = ratio(chain_count_prime(p, &lam, k), aut_count(p, &lam));
                    let v = HLValue::exact(rat).mul(&c);
                    cells.push(Cell { key: CellKey::Cok(vec![vec![lam]]), prob: v.value, error_bound: v.error_bound });
                }
            } else {
                for chain in containment_chains(&tops, k) {
                    let rat = cok_joint_rational_part(p, &chain);
                    if rat.is_zero() {
                        continue;
                    }
                    let v = HLValue::exact(rat).mul(&c);
                    let key = CellKey::Cok(chain.into_iter().map(|l| vec![l]).collect());
                    cells.push(Cell { key, prob: v.value, error_bound: v.error_bound });
                }
            }
        }
    }
    cells.sort_by(|a, b| a.key.cmp(&b.key));
    let total: f64 = cells.iter().map(|c| c.prob).sum();
    let cell_bounds: f64 = cells.iter().map(|c| c.error_bound).sum();
    Ok(TheoryTable {
        p,
        level,
        k,
        mode,
        overflow: (1.0 - total).max(0.0),
        deficit_bound: omitted + cell_bounds + cells.len() as f64 * f64::EPSILON,
        cells,
    })
}
