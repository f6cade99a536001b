//! Explicit finite abelian p-groups Z/p^{e_1} ⊕ … ⊕ Z/p^{e_r} with elements
//! encoded as mixed-radix indices (first component most significant).

use rustc_hash::FxHashSet;
use smallvec::{smallvec, SmallVec};
use std::hash::{Hash, Hasher};

use crate::arith::require_prime;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// A set of group elements as a bitset over element indices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ElemSet {
    words: SmallVec<[u64; 4]>,
}

impl Hash for ElemSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.words.hash(state);
    }
}

impl ElemSet {
    pub fn new(universe: usize) -> Self {
        ElemSet { words: smallvec![0; universe.div_ceil(64).max(1)] }
    }

    pub fn singleton(universe: usize, x: usize) -> Self {
        let mut s = Self::new(universe);
        s.insert(x);
        s
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.words[x >> 6] >> (x & 63) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, x: usize) -> bool {
        let w = &mut self.words[x >> 6];
        let bit = 1u64 << (x & 63);
        let fresh = *w & bit == 0;
        *w |= bit;
        fresh
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &ElemSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &ElemSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + b)
            })
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConcreteGroup {
    p: u64,
    exps: Vec<u32>,
    moduli: Vec<u32>,
    strides: Vec<usize>,
    order: usize,
    /// Exponent j with p^j the order of each element.
    ord_exp: Vec<u32>,
    add_table: Option<Vec<u16>>,
}

const ADD_TABLE_LIMIT: usize = 1024;

impl ConcreteGroup {
    /// G_λ for a partition λ, refusing groups of order above `bound`.
    pub fn new(p: u64, lambda: &Partition, bound: u64) -> Result<Self> {
        Self::from_exponents(p, lambda.parts().to_vec(), bound)
    }

    /// Direct sum of cyclic groups of the given exponents, in the given order.
    pub fn from_exponents(p: u64, exps: Vec<u32>, bound: u64) -> Result<Self> {
        require_prime(p)?;
        if exps.contains(&0) {
            return Err(Error::InvalidInput("cyclic factor of exponent 0".into()));
        }
        let total: u32 = exps.iter().sum();
        let order = (p as u128).checked_pow(total).filter(|&o| o <= bound as u128).ok_or_else(|| {
            Error::bound(format!("group order at p={p}"), format!("{p}^{total}"), bound)
        })? as usize;
        let moduli: Vec<u32> = exps.iter().map(|&e| (p as u32).pow(e)).collect();
        let mut strides = vec![1usize; exps.len()];
        for i in (0..exps.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * moduli[i + 1] as usize;
        }
        let mut g = ConcreteGroup { p, exps, moduli, strides, order, ord_exp: Vec::new(), add_table: None };
        g.ord_exp = (0..order).map(|x| g.compute_ord_exp(x)).collect();
        if order <= ADD_TABLE_LIMIT {
            let mut table = vec![0u16; order * order];
            for a in 0..order {
                for b in 0..order {
                    table[a * order + b] = g.add_slow(a, b) as u16;
                }
            }
            g.add_table = Some(table);
        }
        Ok(g)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn rank(&self) -> usize {
        self.exps.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn type_of(&self) -> Partition {
        Partition::from_unsorted(self.exps.iter().copied())
    }

    pub fn digits(&self, x: usize) -> Vec<u32> {
        self.strides
            .iter()
            .zip(&self.moduli)
            .map(|(&s, &m)| ((x / s) % m as usize) as u32)
            .collect()
    }

    /// Index of the element with the given residues (reduced per component).
    pub fn encode(&self, digits: &[u32]) -> usize {
        digits
            .iter()
            .zip(&self.moduli)
            .zip(&self.strides)
            .map(|((&d, &m), &s)| (d % m) as usize * s)
            .sum()
    }

    /// The i-th standard generator (1 in component i).
    pub fn generator(&self, i: usize) -> usize {
        self.strides[i]
    }

    fn add_slow(&self, a: usize, b: usize) -> usize {
        let mut out = 0;
        for (&s, &m) in self.strides.iter().zip(&self.moduli) {
            let m = m as usize;
            let da = (a / s) % m;
            let db = (b / s) % m;
            out += ((da + db) % m) * s;
        }
        out
    }

    #[inline]
    pub fn add(&self, a: usize, b: usize) -> usize {
        match &self.add_table {
            Some(t) => t[a * self.order + b] as usize,
            None => self.add_slow(a, b),
        }
    }

    pub fn neg(&self, a: usize) -> usize {
        let d: Vec<u32> = self.digits(a).iter().zip(&self.moduli).map(|(&x, &m)| (m - x) % m).collect();
        self.encode(&d)
    }

    pub fn scale(&self, c: u64, a: usize) -> usize {
        let d: Vec<u32> = self
            .digits(a)
            .iter()
            .zip(&self.moduli)
            .map(|(&x, &m)| ((x as u64 * (c % m as u64)) % m as u64) as u32)
            .collect();
        self.encode(&d)
    }

    fn compute_ord_exp(&self, x: usize) -> u32 {
        self.digits(x)
            .iter()
            .zip(&self.exps)
            .map(|(&d, &e)| {
                if d == 0 {
                    0
                } else {
                    let mut v = 0;
                    let mut d = d as u64;
                    while d % self.p == 0 {
                        d /= self.p;
                        v += 1;
                    }
                    e - v
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// j such that the element has order p^j.
    #[inline]
    pub fn ord_exp(&self, x: usize) -> u32 {
        self.ord_exp[x]
    }

    pub fn zero_set(&self) -> ElemSet {
        ElemSet::singleton(self.order, 0)
    }

    pub fn full_set(&self) -> ElemSet {
        let mut s = ElemSet::new(self.order);
        for x in 0..self.order {
            s.insert(x);
        }
        s
    }

    /// ⟨H, g⟩ for a subgroup H: the union of cosets H + i·g until i·g ∈ H.
    pub fn join_element(&self, h: &ElemSet, g: usize) -> ElemSet {
        let members: Vec<usize> = h.iter().collect();
        let mut out = h.clone();
        let mut shift = g;
        while !h.contains(shift) {
            for &m in &members {
                out.insert(self.add(m, shift));
            }
            shift = self.add(shift, g);
        }
        out
    }

    /// Subgroup generated by the given elements.
    pub fn generated(&self, gens: &[usize]) -> ElemSet {
        let mut s = self.zero_set();
        for &g in gens {
            if !s.contains(g) {
                s = self.join_element(&s, g);
            }
        }
        s
    }

    /// Isomorphism type of a subgroup, read off from the sizes of its p^j-torsion layers.
    pub fn subgroup_type(&self, h: &ElemSet) -> Partition {
        let max_e = self.exps.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0usize; max_e as usize + 1];
        for x in h.iter() {
            counts[self.ord_exp[x] as usize] += 1;
        }
        // layer[j] = log_p #{x ∈ H : p^j x = 0} = λ'_1 + … + λ'_j
        let mut conj = Vec::new();
        let mut cumulative = 0usize;
        let mut prev_log = 0u32;
        for c in counts.iter() {
            cumulative += c;
            let log = ilog(self.p, cumulative);
            if cumulative > 1 {
                conj.push(log - prev_log);
            }
            prev_log = log;
        }
        // conj lists λ'_1, λ'_2, …
        Partition::from_unsorted(conj).conjugate()
    }

    /// All subgroups, grouped by increasing order. Each subgroup K ≠ 0 is built
    /// from every H ≤ K of index p by adjoining some g with p·g ∈ H; elements
    /// already covered by an extension of H are skipped, so each (H, K) pair is
    /// generated once.
    pub fn all_subgroups(&self) -> Vec<ElemSet> {
        let p = self.p as usize;
        let times_p: Vec<usize> = (0..self.order).map(|x| self.scale(p as u64, x)).collect();
        let mut all = vec![self.zero_set()];
        let mut current = vec![self.zero_set()];
        let mut seen: FxHashSet<ElemSet> = FxHashSet::default();
        while !current.is_empty() {
            let mut next = Vec::new();
            for h in &current {
                let members: Vec<usize> = h.iter().collect();
                let mut covered = h.clone();
                for g in 0..self.order {
                    if covered.contains(g) || !h.contains(times_p[g]) {
                        continue;
                    }
                    let mut k = h.clone();
                    let mut shift = g;
                    for _ in 1..p {
                        for &m in &members {
                            k.insert(self.add(m, shift));
                        }
                        shift = self.add(shift, g);
                    }
                    covered.union_with(&k);
                    if seen.insert(k.clone()) {
                        next.push(k);
                    }
                }
            }
            seen.clear();
            all.extend(next.iter().cloned());
            current = next;
        }
        all
    }
}

fn ilog(p: u64, mut n: usize) -> u32 {
    let mut e = 0;
    while n > 1 {
        debug_assert!(n % p as usize == 0);
        n /= p as usize;
        e += 1;
    }
    e
}
