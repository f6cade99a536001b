//! Seeded simulation of random matrix products, exhaustive small-instance
//! distributions, moment estimation and comparison against theory tables.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, Uniform};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{self, require_prime, serde_rational};
use crate::error::{Error, Result};
use crate::limits::{CellKey, Mode, TheoryTable};
use crate::matrix::{cok_chain, rank_fp, BitMatrix, MatrixModPrimePower, MAX_MODULUS};
use crate::partition::Partition;
use crate::pgroup::{group_sur_count, GroupType};

/// Entry law of ξ. `Table` gives weights on Z/m, lifted to Z/a by a uniform
/// choice of preimage; the presets are explicit laws on Z/a.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryLaw {
    Uniform,
    /// P(ξ = 1) = q, P(ξ = 0) = 1 - q.
    Bernoulli01 {
        #[serde(with = "serde_rational")]
        q: BigRational,
    },
    Signed {
        #[serde(with = "serde_rational")]
        minus: BigRational,
        #[serde(with = "serde_rational")]
        zero: BigRational,
        #[serde(with = "serde_rational")]
        plus: BigRational,
    },
    Table {
        modulus: u64,
        #[serde(with = "crate::arith::serde_rational_vec")]
        weights: Vec<BigRational>,
    },
}

/// An entry law resolved on Z/a, ready for exact sampling.
#[derive(Clone, Debug)]
pub struct ResolvedLaw {
    modulus: u64,
    base: u64,
    lift: u64,
    residues: Vec<u64>,
    weights: Vec<BigRational>,
    cumulative: Vec<u64>,
    denominator: u64,
    uniform_bits: Option<u32>,
}

impl EntryLaw {
    pub fn resolve(&self, modulus: u64) -> Result<ResolvedLaw> {
        if modulus < 2 {
            return Err(Error::InvalidInput("entry modulus must be at least 2".into()));
        }
        let one = BigRational::one();
        let (base, table): (u64, Vec<(u64, BigRational)>) = match self {
            EntryLaw::Uniform => (1, vec![(0, one)]),
            EntryLaw::Bernoulli01 { q } => (modulus, vec![(0, &one - q), (1, q.clone())]),
            EntryLaw::Signed { minus, zero, plus } => {
                (modulus, vec![(modulus - 1, minus.clone()), (0, zero.clone()), (1, plus.clone())])
            }
            EntryLaw::Table { modulus: m, weights } => {
                if *m == 0 || modulus % m != 0 {
                    return Err(Error::InvalidInput(format!("table modulus {m} must divide the run modulus {modulus}")));
                }
                if weights.len() as u64 != *m {
                    return Err(Error::InvalidInput(format!("table needs {m} weights, got {}", weights.len())));
                }
                (*m, weights.iter().cloned().enumerate().map(|(r, w)| (r as u64, w)).collect())
            }
        };
        let mut merged: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (r, w) in table {
            if w.is_negative() {
                return Err(Error::InvalidInput(format!("negative weight {} on residue {r}", arith::format_rational(&w))));
            }
            *merged.entry(r % base).or_insert_with(BigRational::zero) += w;
        }
        merged.retain(|_, w| !w.is_zero());
        let total: BigRational = merged.values().sum();
        if total != BigRational::one() {
            return Err(Error::InvalidInput(format!("weights sum to {}, not 1", arith::format_rational(&total))));
        }
        let denom = merged.values().fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let denominator = denom
            .to_u64()
            .filter(|&d| d <= 1 << 62)
            .ok_or_else(|| Error::InvalidInput("weight denominators exceed 2^62".into()))?;
        let mut cumulative = Vec::new();
        let mut acc = 0u64;
        for w in merged.values() {
            acc += (w * BigRational::from_integer(denom.clone())).to_integer().to_u64().unwrap();
            cumulative.push(acc);
        }
        let uniform_bits = (matches!(self, EntryLaw::Uniform) && modulus.is_power_of_two() && modulus <= 1 << 32)
            .then(|| modulus.trailing_zeros());
        Ok(ResolvedLaw {
            modulus,
            base,
            lift: modulus / base,
            residues: merged.keys().copied().collect(),
            weights: merged.into_values().collect(),
            cumulative,
            denominator,
            uniform_bits,
        })
    }
}

impl ResolvedLaw {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Exact P(ξ ≡ r mod a).
    pub fn prob(&self, r: u64) -> BigRational {
        match self.residues.binary_search(&(r % self.base)) {
            Ok(i) => &self.weights[i] / BigRational::from_integer(BigInt::from(self.lift)),
            Err(_) => BigRational::zero(),
        }
    }

    /// Exact distribution of ξ mod p, for a prime p dividing a.
    pub fn mod_prime(&self, p: u64) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); p as usize];
        if self.base % p == 0 {
            for (r, w) in self.residues.iter().zip(&self.weights) {
                out[(r % p) as usize] += w;
            }
        } else {
            // p divides the lift, so preimages are equidistributed mod p
            let share = BigRational::new(BigInt::one(), BigInt::from(p));
            for x in out.iter_mut() {
                *x = share.clone();
            }
        }
        out
    }

    /// Fills `out` with iid draws in [0, a).
    pub fn fill<R: RngCore>(&self, rng: &mut R, out: &mut [u64]) {
        if let Some(bits) = self.uniform_bits {
            let per = (64 / bits) as usize;
            let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
            for chunk in out.chunks_mut(per) {
                let mut w = rng.next_u64();
                for x in chunk {
                    *x = w & mask;
                    w >>= bits;
                }
            }
            return;
        }
        if self.denominator <= u32::MAX as u64 && self.lift == 1 {
            let d = Uniform::new(0, self.denominator as u32);
            for x in out.iter_mut() {
                let u = d.sample(rng) as u64;
                *x = self.residues[self.cumulative.partition_point(|&c| c <= u)];
            }
            return;
        }
        let d = Uniform::new(0, self.denominator);
        let lift = Uniform::new(0, self.lift);
        for x in out.iter_mut() {
            let u = d.sample(rng);
            let i = self.cumulative.partition_point(|&c| c <= u);
            let mut r = self.residues[i];
            if self.lift > 1 {
                r += self.base * lift.sample(rng);
            }
            *x = r;
        }
    }
}

/// α_p = 1 - max_r P(ξ ≡ r mod p) for each prime p dividing the modulus.
pub fn validate_alpha(law: &EntryLaw, modulus: u64) -> Result<BTreeMap<u64, BigRational>> {
    let resolved = law.resolve(modulus)?;
    let mut out = BTreeMap::new();
    for p in prime_factors(modulus) {
        let dist = resolved.mod_prime(p);
        let (r, max) = dist.iter().enumerate().max_by(|a, b| a.1.cmp(b.1)).unwrap();
        let alpha = BigRational::one() - max;
        if alpha.is_zero() {
            return Err(Error::DegenerateDistribution { prime: p, residue: r as u64 });
        }
        out.insert(p, alpha);
    }
    Ok(out)
}

fn prime_factors(mut a: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= a {
        if a % d == 0 {
            out.push(d);
            while a % d == 0 {
                a /= d;
            }
        }
        d += 1;
    }
    if a > 1 {
        out.push(a);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    CokJoint,
    Corank,
}

impl std::str::FromStr for SimMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "cok_joint" => Ok(SimMode::CokJoint),
            "corank" => Ok(SimMode::Corank),
            _ => Err(Error::InvalidInput(format!("unknown simulation mode {s:?}"))),
        }
    }
}

pub const DEFAULT_CHUNK_SIZE: u64 = 1000;

fn default_chunk_size() -> u64 {
    DEFAULT_CHUNK_SIZE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub k: u32,
    /// Level L_p for each prime; entries are drawn mod a = ∏ p^{L_p}.
    pub levels: BTreeMap<u64, u32>,
    pub samples: u64,
    pub seed: u64,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: u64,
    pub entry: EntryLaw,
    pub mode: SimMode,
}

impl SimConfig {
    /// a = ∏ p^{L_p}.
    pub fn modulus(&self) -> Result<u64> {
        let mut a = 1u64;
        for (&p, &l) in &self.levels {
            require_prime(p)?;
            if l == 0 {
                return Err(Error::InvalidInput(format!("level at p={p} must be at least 1")));
            }
            let q = p.checked_pow(l).filter(|&q| q <= MAX_MODULUS);
            let q = q.ok_or_else(|| Error::bound(format!("modulus at p={p}"), format!("{p}^{l}"), MAX_MODULUS))?;
            a = a.checked_mul(q).filter(|&a| a <= 1 << 62).ok_or_else(|| Error::bound("run modulus", "product", 1 << 62))?;
        }
        Ok(a)
    }

    pub fn validate(&self) -> Result<BTreeMap<u64, BigRational>> {
        if self.n == 0 || self.k == 0 || self.samples == 0 || self.chunk_size == 0 {
            return Err(Error::InvalidInput("n, k, samples and chunk_size must be at least 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidInput("at least one prime level is required".into()));
        }
        if self.mode == SimMode::Corank && self.levels.len() != 1 {
            return Err(Error::InvalidInput("corank mode takes exactly one prime".into()));
        }
        validate_alpha(&self.entry, self.modulus()?)
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn chunk_count(&self) -> u64 {
        self.samples.div_ceil(self.chunk_size)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalJointDistribution {
    pub mode: SimMode,
    pub n: usize,
    pub k: u32,
    pub levels: BTreeMap<u64, u32>,
    pub total: u64,
    /// Chunk indices covered by these counts.
    pub chunks: Vec<u64>,
    pub provenance: Provenance,
    #[serde(rename = "cells", with = "count_cells")]
    pub counts: BTreeMap<CellKey, u64>,
}

mod count_cells {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        key: CellKey,
        count: u64,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<CellKey, u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|(k, &c)| Row { key: k.clone(), count: c }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<CellKey, u64>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        let mut m = BTreeMap::new();
        for r in rows {
            if m.insert(r.key, r.count).is_some() {
                return Err(serde::de::Error::custom("duplicate key"));
            }
        }
        Ok(m)
    }
}

impl EmpiricalJointDistribution {
    /// Count-wise sum of two runs of the same configuration over disjoint chunks.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.provenance.config_hash != other.provenance.config_hash {
            return Err(Error::Mismatch("cannot merge runs with different config hashes".into()));
        }
        let a: BTreeSet<u64> = self.chunks.iter().copied().collect();
        if other.chunks.iter().any(|c| a.contains(c)) {
            return Err(Error::Mismatch("runs share chunks".into()));
        }
        let mut out = self.clone();
        for (k, &c) in &other.counts {
            *out.counts.entry(k.clone()).or_insert(0) += c;
        }
        out.total += other.total;
        out.chunks.extend(&other.chunks);
        out.chunks.sort_unstable();
        Ok(out)
    }

    pub fn frequency(&self, key: &CellKey) -> f64 {
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.total as f64
    }

    fn single_prime(&self) -> Result<(u64, u32)> {
        match self.levels.iter().next() {
            Some((&p, &l)) if self.levels.len() == 1 => Ok((p, l)),
            _ => Err(Error::Mismatch("comparison needs a single-prime run".into())),
        }
    }
}

/// Per-sample work shared by simulation and exhaustive enumeration.
struct Recorder {
    n: usize,
    k: usize,
    mode: SimMode,
    levels: Vec<(u64, u32)>,
}

impl Recorder {
    fn new(n: usize, k: u32, mode: SimMode, levels: &BTreeMap<u64, u32>) -> Self {
        Recorder { n, k: k as usize, mode, levels: levels.iter().map(|(&p, &l)| (p, l)).collect() }
    }

    /// Key of the k matrices whose entries (mod a) are `entries`, row-major, matrix after matrix.
    fn key(&self, entries: &[u64]) -> CellKey {
        let nn = self.n * self.n;
        match self.mode {
            SimMode::Corank => {
                let p = self.levels[0].0;
                let ranks: Vec<usize> = if p == 2 {
                    let ms: Vec<BitMatrix> = entries.chunks(nn).map(|e| parity_matrix(self.n, e)).collect();
                    partial_products(&ms, |a, b| a.mul(b)).iter().map(BitMatrix::rank).collect()
                } else {
                    let ms: Vec<MatrixModPrimePower> = entries.chunks(nn).map(|e| reduce(p, 1, self.n, e)).collect();
                    partial_products(&ms, |a, b| a.mul(b).unwrap()).iter().map(rank_fp).collect()
                };
                corank_key(self.n, &ranks)
            }
            SimMode::CokJoint => {
                let mut slots = vec![Vec::with_capacity(self.levels.len()); self.k];
                for &(p, l) in &self.levels {
                    let ms: Vec<MatrixModPrimePower> = entries.chunks(nn).map(|e| reduce(p, l, self.n, e)).collect();
                    let chain = cok_chain(&ms).expect("matching matrices");
                    for (slot, lam) in slots.iter_mut().zip(chain.types) {
                        slot.push(lam);
                    }
                }
                CellKey::Cok(slots)
            }
        }
    }
}

fn parity_matrix(n: usize, e: &[u64]) -> BitMatrix {
    let mut m = BitMatrix::zero(n);
    for i in 0..n {
        for j in 0..n {
            if e[i * n + j] & 1 == 1 {
                m.set(i, j);
            }
        }
    }
    m
}

fn reduce(p: u64, level: u32, n: usize, e: &[u64]) -> MatrixModPrimePower {
    let q = p.pow(level);
    MatrixModPrimePower::from_residues(p, level, n, e.iter().map(|&x| (x % q) as u32).collect()).expect("valid residues")
}

fn partial_products<M: Clone>(ms: &[M], mul: impl Fn(&M, &M) -> M) -> Vec<M> {
    let mut out: Vec<M> = Vec::with_capacity(ms.len());
    for m in ms {
        let next = match out.last() {
            Some(acc) => mul(acc, m),
            None => m.clone(),
        };
        out.push(next);
    }
    out
}

fn corank_key(n: usize, ranks: &[usize]) -> CellKey {
    let mut prev = n;
    CellKey::Corank(
        ranks
            .iter()
            .map(|&r| {
                let d = prev - r;
                prev = r;
                d as u32
            })
            .collect(),
    )
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn run_chunk(cfg: &SimConfig, law: &ResolvedLaw, rec: &Recorder, chunk: u64) -> BTreeMap<CellKey, u64> {
    let mut rng = chunk_rng(cfg.seed, chunk);
    let start = chunk * cfg.chunk_size;
    let end = (start + cfg.chunk_size).min(cfg.samples);
    let nn = cfg.n * cfg.n;
    let direct_bits = cfg.mode == SimMode::Corank && rec.levels[0].0 == 2 && law.uniform_bits.is_some();
    let mut entries = vec![0u64; nn * cfg.k as usize];
    let mut counts = BTreeMap::new();
    for _ in start..end {
        let key = if direct_bits {
            // the low bit of a uniform residue mod 2^L is a uniform bit
            let ms: Vec<BitMatrix> = (0..cfg.k).map(|_| BitMatrix::from_words(cfg.n, || rng.next_u64())).collect();
            let ranks: Vec<usize> = partial_products(&ms, |a, b| a.mul(b)).iter().map(BitMatrix::rank).collect();
            corank_key(cfg.n, &ranks)
        } else {
            law.fill(&mut rng, &mut entries);
            rec.key(&entries)
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

fn merge_counts(mut a: BTreeMap<CellKey, u64>, b: BTreeMap<CellKey, u64>) -> BTreeMap<CellKey, u64> {
    for (k, c) in b {
        *a.entry(k).or_insert(0) += c;
    }
    a
}

/// Runs every chunk of the configuration on `workers` threads.
pub fn simulate_joint(cfg: &SimConfig, workers: usize) -> Result<EmpiricalJointDistribution> {
    let chunks: Vec<u64> = (0..cfg.chunk_count()).collect();
    simulate_chunks(cfg, &chunks, workers)
}

/// Runs the listed chunks only; results for disjoint chunk sets merge into
/// the full run bit for bit.
pub fn simulate_chunks(cfg: &SimConfig, chunks: &[u64], workers: usize) -> Result<EmpiricalJointDistribution> {
    cfg.validate()?;
    let total_chunks = cfg.chunk_count();
    let unique: BTreeSet<u64> = chunks.iter().copied().collect();
    if unique.len() != chunks.len() || unique.iter().any(|&c| c >= total_chunks) {
        return Err(Error::InvalidInput(format!("chunk ids must be distinct and below {total_chunks}")));
    }
    let law = cfg.entry.resolve(cfg.modulus()?)?;
    let rec = Recorder::new(cfg.n, cfg.k, cfg.mode, &cfg.levels);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let counts = pool.install(|| {
        unique
            .par_iter()
            .map(|&c| run_chunk(cfg, &law, &rec, c))
            .reduce(BTreeMap::new, merge_counts)
    });
    let total = counts.values().sum();
    Ok(EmpiricalJointDistribution {
        mode: cfg.mode,
        n: cfg.n,
        k: cfg.k,
        levels: cfg.levels.clone(),
        total,
        chunks: unique.into_iter().collect(),
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        counts,
    })
}

/// Default cap on the number of matrix tuples visited by exhaustive enumeration.
pub const DEFAULT_EXHAUSTIVE_BOUND: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub mode: SimMode,
    pub n: usize,
    pub p: u64,
    #[serde(rename = "L")]
    pub level: u32,
    pub k: u32,
    pub tuples: u64,
    #[serde(with = "prob_cells")]
    pub cells: BTreeMap<CellKey, BigRational>,
}

mod prob_cells {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        key: CellKey,
        #[serde(with = "serde_rational")]
        prob: BigRational,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<CellKey, BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|(k, p)| Row { key: k.clone(), prob: p.clone() }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<CellKey, BigRational>, D::Error> {
        Ok(Vec::<Row>::deserialize(d)?.into_iter().map(|r| (r.key, r.prob)).collect())
    }
}

impl ExactDistribution {
    /// The law of the first j slots of each key.
    pub fn marginal(&self, j: usize) -> BTreeMap<CellKey, BigRational> {
        let mut out = BTreeMap::new();
        for (key, pr) in &self.cells {
            let m = match key {
                CellKey::Cok(s) => CellKey::Cok(s[..j].to_vec()),
                CellKey::Corank(r) => CellKey::Corank(r[..j].to_vec()),
            };
            *out.entry(m).or_insert_with(BigRational::zero) += pr;
        }
        out
    }
}

/// The exact law of the keys over all k-tuples of n×n matrices over Z/p^L,
/// each weighted by the product of its entry probabilities.
pub fn exhaustive_joint(
    n: usize,
    p: u64,
    level: u32,
    k: u32,
    law: &EntryLaw,
    mode: SimMode,
    bound: u64,
) -> Result<ExactDistribution> {
    require_prime(p)?;
    if n == 0 || k == 0 || level == 0 {
        return Err(Error::InvalidInput("n, k and L must be at least 1".into()));
    }
    let q = p.checked_pow(level).ok_or_else(|| Error::bound("modulus", format!("{p}^{level}"), bound))?;
    let exponent = (k as u64) * (n * n) as u64;
    let tuples = q
        .checked_pow(exponent as u32)
        .filter(|&t| exponent <= 64 && t <= bound)
        .ok_or_else(|| Error::bound("matrix tuples", format!("({q})^{exponent}"), bound))?;
    let resolved = law.resolve(q)?;
    validate_alpha(law, q)?;
    let nn = n * n;
    let per_matrix = q.pow(nn as u32);
    // all matrices with positive weight
    let mut mats: Vec<(Vec<u64>, BigRational)> = Vec::new();
    for idx in 0..per_matrix {
        let mut x = idx;
        let mut e = Vec::with_capacity(nn);
        let mut w = BigRational::one();
        for _ in 0..nn {
            let r = x % q;
            x /= q;
            w *= resolved.prob(r);
            e.push(r);
        }
        if !w.is_zero() {
            mats.push((e, w));
        }
    }
    let levels = BTreeMap::from([(p, level)]);
    let rec = Recorder::new(n, k, mode, &levels);
    let mut cells: BTreeMap<CellKey, BigRational> = BTreeMap::new();
    let mut idx = vec![0usize; k as usize];
    let mut entries = vec![0u64; nn * k as usize];
    'outer: loop {
        let mut w = BigRational::one();
        for (j, &i) in idx.iter().enumerate() {
            entries[j * nn..(j + 1) * nn].copy_from_slice(&mats[i].0);
            w *= &mats[i].1;
        }
        *cells.entry(rec.key(&entries)).or_insert_with(BigRational::zero) += w;
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < mats.len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    Ok(ExactDistribution { mode, n, p, level, k, tuples, cells })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub target: Vec<GroupType>,
    pub mean: f64,
    #[serde(with = "serde_rational")]
    pub mean_exact: BigRational,
    pub stderr: f64,
    pub samples: u64,
}

fn check_targets(levels: &BTreeMap<u64, u32>, k: u32, targets: &[Vec<GroupType>]) -> Result<()> {
    for t in targets {
        if t.len() != k as usize {
            return Err(Error::InvalidInput(format!("each target needs k={k} groups, got {}", t.len())));
        }
        for g in t {
            for (&p, lam) in g.components() {
                let have = levels.get(&p).copied().unwrap_or(0);
                if lam.largest() > have {
                    return Err(Error::LevelTooSmall { prime: p, needed: lam.largest(), have });
                }
            }
        }
    }
    Ok(())
}

fn slot_group(levels: &BTreeMap<u64, u32>, slot: &[Partition]) -> GroupType {
    let comps = levels.keys().copied().zip(slot.iter().cloned()).collect();
    GroupType::new(comps).expect("primes validated")
}

/// ∏_j #Sur(B_j, G_j) for an observed cokernel chain.
fn sur_product(levels: &BTreeMap<u64, u32>, key: &CellKey, target: &[GroupType]) -> Result<BigUint> {
    let CellKey::Cok(slots) = key else {
        return Err(Error::InvalidInput("moments need cokernel-chain keys".into()));
    };
    let mut v = BigUint::one();
    for (slot, g) in slots.iter().zip(target) {
        v *= group_sur_count(&slot_group(levels, slot), g);
        if v.is_zero() {
            break;
        }
    }
    Ok(v)
}

/// Sample mean and standard error of ∏_j #Sur(cok(M_1⋯M_j), G_j) per target.
pub fn moments_from_counts(emp: &EmpiricalJointDistribution, targets: &[Vec<GroupType>]) -> Result<Vec<MomentEstimate>> {
    if emp.mode != SimMode::CokJoint {
        return Err(Error::InvalidInput("moments need a cok_joint run".into()));
    }
    check_targets(&emp.levels, emp.k, targets)?;
    let n = BigInt::from(emp.total);
    targets
        .iter()
        .map(|t| {
            let (mut s1, mut s2) = (BigInt::zero(), BigInt::zero());
            for (key, &c) in &emp.counts {
                let v = BigInt::from(sur_product(&emp.levels, key, t)?);
                s1 += &v * c;
                s2 += &v * &v * c;
            }
            let mean = BigRational::new(s1.clone(), n.clone());
            let stderr = if emp.total > 1 {
                // s²/N with s² the unbiased sample variance
                let ss = BigRational::new(&s2 * &n - &s1 * &s1, &n * &n * (&n - 1));
                ss.to_f64().unwrap_or(f64::INFINITY).max(0.0).sqrt()
            } else {
                f64::INFINITY
            };
            Ok(MomentEstimate { target: t.clone(), mean: arith::to_f64(&mean), mean_exact: mean, stderr, samples: emp.total })
        })
        .collect()
}

/// Simulates the configuration (which must be in cok_joint mode) and
/// estimates the moments of each target.
pub fn estimate_moments(cfg: &SimConfig, targets: &[Vec<GroupType>], workers: usize) -> Result<Vec<MomentEstimate>> {
    if cfg.mode != SimMode::CokJoint {
        return Err(Error::InvalidInput("moments need mode cok_joint".into()));
    }
    check_targets(&cfg.levels, cfg.k, targets)?;
    moments_from_counts(&simulate_joint(cfg, workers)?, targets)
}

/// Exact expectations of the targets under an exhaustive distribution.
pub fn exact_moments(dist: &ExactDistribution, targets: &[Vec<GroupType>]) -> Result<Vec<BigRational>> {
    let levels = BTreeMap::from([(dist.p, dist.level)]);
    check_targets(&levels, dist.k, targets)?;
    targets
        .iter()
        .map(|t| {
            let mut acc = BigRational::zero();
            for (key, pr) in &dist.cells {
                acc += pr * BigRational::from_integer(BigInt::from(sur_product(&levels, key, t)?));
            }
            Ok(acc)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tv: f64,
    pub z: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { tv: 0.01, z: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub key: CellKey,
    pub theory: f64,
    pub theory_bound: f64,
    pub empirical: f64,
    pub stderr: f64,
    /// (empirical - theory) / max(stderr, theory_bound); absent when both vanish.
    pub z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverflowRow {
    pub theory: f64,
    pub theory_bound: f64,
    pub empirical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub p: u64,
    #[serde(rename = "L")]
    pub level: u32,
    pub k: u32,
    pub mode: Mode,
    pub samples: Option<u64>,
    pub rows: Vec<CompareRow>,
    pub overflow: OverflowRow,
    /// Total variation over interior cells plus the overflow bucket.
    pub tv: f64,
    pub tv_interior: f64,
    pub max_abs_z: f64,
    pub thresholds: Thresholds,
    pub pass: bool,
}

/// Maps an observed key to its table cell, or None for the overflow bucket.
pub fn bucket_key(table: &TheoryTable, key: &CellKey) -> Result<Option<CellKey>> {
    let projected = match (table.mode, key) {
        (Mode::Corank, CellKey::Corank(r)) if r.len() == table.k as usize => key.clone(),
        (Mode::CokJoint, CellKey::Cok(s)) if s.len() == table.k as usize => key.clone(),
        (Mode::CokSingle, CellKey::Cok(s)) if s.len() == table.k as usize => CellKey::Cok(vec![s.last().unwrap().clone()]),
        _ => return Err(Error::Mismatch(format!("key {key} does not fit a {:?} table with k={}", table.mode, table.k))),
    };
    Ok((!table.is_overflow(&projected)).then_some(projected))
}

fn bucketed(table: &TheoryTable, freqs: &BTreeMap<CellKey, f64>) -> Result<(BTreeMap<CellKey, f64>, f64)> {
    let mut cells = BTreeMap::new();
    let mut overflow = 0.0;
    for (key, &f) in freqs {
        match bucket_key(table, key)? {
            Some(c) => *cells.entry(c).or_insert(0.0) += f,
            None => overflow += f,
        }
    }
    Ok((cells, overflow))
}

/// Compares observed frequencies (from `samples` draws, or exact when None) with a table.
pub fn compare_frequencies(
    freqs: &BTreeMap<CellKey, f64>,
    samples: Option<u64>,
    table: &TheoryTable,
    thresholds: Thresholds,
) -> Result<CompareReport> {
    let (emp, emp_over) = bucketed(table, freqs)?;
    let theory: BTreeMap<&CellKey, (f64, f64)> = table.cells.iter().map(|c| (&c.key, (c.prob, c.error_bound))).collect();
    let keys: BTreeSet<&CellKey> = theory.keys().copied().chain(emp.keys()).collect();
    let se = |th: f64| samples.map_or(0.0, |n| (th * (1.0 - th) / n as f64).max(0.0).sqrt());
    let mut rows = Vec::new();
    let mut tv_interior = 0.0;
    let mut max_abs_z: f64 = 0.0;
    for key in keys {
        // interior cells beyond the listed range carry at most the deficit
        let (th, bound) = theory.get(key).copied().unwrap_or((0.0, table.deficit_bound));
        let f = emp.get(key).copied().unwrap_or(0.0);
        let stderr = se(th);
        let denom = stderr.max(bound);
        let z = if denom > 0.0 { Some((f - th) / denom) } else if f == th { Some(0.0) } else { None };
        if th > 0.0 {
            if let Some(z) = z {
                max_abs_z = max_abs_z.max(z.abs());
            }
        }
        tv_interior += (f - th).abs();
        rows.push(CompareRow { key: key.clone(), theory: th, theory_bound: bound, empirical: f, stderr, z });
    }
    let tv_interior = 0.5 * tv_interior;
    let tv = (tv_interior + 0.5 * (emp_over - table.overflow).abs()).min(1.0);
    let pass = tv <= thresholds.tv && max_abs_z <= thresholds.z;
    Ok(CompareReport {
        p: table.p,
        level: table.level,
        k: table.k,
        mode: table.mode,
        samples,
        rows,
        overflow: OverflowRow { theory: table.overflow, theory_bound: table.deficit_bound, empirical: emp_over },
        tv,
        tv_interior,
        max_abs_z,
        thresholds,
        pass,
    })
}

fn check_run_against(table: &TheoryTable, p: u64, level: u32, k: u32, corank: bool) -> Result<()> {
    let mode_ok = match table.mode {
        Mode::Corank => corank,
        Mode::CokJoint | Mode::CokSingle => !corank && level >= table.level,
    };
    if p != table.p || k != table.k || !mode_ok {
        return Err(Error::Mismatch(format!(
            "run (p={p}, L={level}, k={k}, corank={corank}) vs table (p={}, L={}, k={}, mode={:?})",
            table.p, table.level, table.k, table.mode
        )));
    }
    Ok(())
}

/// Clamps every part at L, the image of a type under ⊗ Z/p^L.
fn truncate_key(key: &CellKey, level: u32) -> CellKey {
    match key {
        CellKey::Cok(s) => CellKey::Cok(s.iter().map(|per| per.iter().map(|l| l.truncate_parts(level)).collect()).collect()),
        other => other.clone(),
    }
}

pub fn compare(emp: &EmpiricalJointDistribution, table: &TheoryTable, thresholds: Thresholds) -> Result<CompareReport> {
    let (p, level) = emp.single_prime()?;
    check_run_against(table, p, level, emp.k, emp.mode == SimMode::Corank)?;
    let mut freqs = BTreeMap::new();
    for (key, &c) in &emp.counts {
        *freqs.entry(truncate_key(key, table.level)).or_insert(0.0) += c as f64 / emp.total as f64;
    }
    compare_frequencies(&freqs, Some(emp.total), table, thresholds)
}

pub fn compare_exact(dist: &ExactDistribution, table: &TheoryTable, thresholds: Thresholds) -> Result<CompareReport> {
    check_run_against(table, dist.p, dist.level, dist.k, dist.mode == SimMode::Corank)?;
    let mut freqs = BTreeMap::new();
    for (key, pr) in &dist.cells {
        *freqs.entry(truncate_key(key, table.level)).or_insert(0.0) += arith::to_f64(pr);
    }
    compare_frequencies(&freqs, None, table, thresholds)
}

/// Total variation between two runs after bucketing both by `table`.
pub fn empirical_tv(a: &EmpiricalJointDistribution, b: &EmpiricalJointDistribution, table: &TheoryTable) -> Result<f64> {
    let freqs = |e: &EmpiricalJointDistribution| -> Result<(BTreeMap<CellKey, f64>, f64)> {
        let (p, level) = e.single_prime()?;
        check_run_against(table, p, level, e.k, e.mode == SimMode::Corank)?;
        let f = e.counts.iter().map(|(k, &c)| (truncate_key(k, table.level), c as f64 / e.total as f64));
        let mut m = BTreeMap::new();
        for (k, v) in f {
            *m.entry(k).or_insert(0.0) += v;
        }
        bucketed(table, &m)
    };
    let (ca, oa) = freqs(a)?;
    let (cb, ob) = freqs(b)?;
    let keys: BTreeSet<&CellKey> = ca.keys().chain(cb.keys()).collect();
    let s: f64 = keys.iter().map(|k| (ca.get(*k).unwrap_or(&0.0) - cb.get(*k).unwrap_or(&0.0)).abs()).sum();
    Ok(0.5 * (s + (oa - ob).abs()))
}

impl CompareReport {
    /// One row per cell plus an overflow row; keys are flattened as
    /// semicolon-joined partition strings.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        w.write_record(["key", "theory", "theory_bound", "empirical", "stderr", "z"]).map_err(io)?;
        for r in &self.rows {
            let z = r.z.map(|z| z.to_string()).unwrap_or_default();
            w.write_record([
                r.key.to_string(),
                r.theory.to_string(),
                r.theory_bound.to_string(),
                r.empirical.to_string(),
                r.stderr.to_string(),
                z,
            ])
            .map_err(io)?;
        }
        let o = &self.overflow;
        w.write_record(["overflow".to_string(), o.theory.to_string(), o.theory_bound.to_string(), o.empirical.to_string(), String::new(), String::new()])
            .map_err(io)?;
        String::from_utf8(w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?)
            .map_err(|e| Error::InvalidInput(e.to_string()))
    }
}
