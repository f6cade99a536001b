//! Brute-force oracle: subgroup lattices and map counts on explicit groups.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::concrete::{ConcreteGroup, ElemSet};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Counts tuples (y_1, …, y_r) of elements of the subgroup `target` with
/// p^{e_j} y_j = 0 that generate `target`. With `exps` the exponents of a
/// source group G this is #Sur(G, target), since such tuples are exactly the
/// images of the standard generators under surjective homomorphisms.
///
/// Dynamic programming over the subgroup S generated by the first j entries:
/// the next entry's contribution depends only on its coset modulo S.
pub fn count_generating_tuples(group: &ConcreteGroup, target: &ElemSet, exps: &[u32]) -> Result<u128> {
    let overflow = || Error::bound("generating tuple count", "more than 2^128", u64::MAX);
    let target_members: Vec<usize> = target.iter().collect();
    // Image of each element in the Frattini quotient target / p·target, used
    // to discard partial tuples that can no longer generate the target.
    let frattini = FrattiniMap::new(group, &target_members);
    let mut states: FxHashMap<ElemSet, u128> = FxHashMap::default();
    states.insert(group.zero_set(), 1);
    for (j, &e) in exps.iter().enumerate() {
        let remaining = exps.len() - j - 1;
        let mut next: FxHashMap<ElemSet, u128> = FxHashMap::default();
        for (s, count) in &states {
            let s_members: Vec<usize> = s.iter().collect();
            let mut covered = ElemSet::new(group.order());
            for &x in &target_members {
                if covered.contains(x) {
                    continue;
                }
                let mut weight = 0u128;
                for &m in &s_members {
                    let y = group.add(m, x);
                    covered.insert(y);
                    if group.ord_exp(y) <= e {
                        weight += 1;
                    }
                }
                if weight == 0 {
                    continue;
                }
                let t = if s.contains(x) { s.clone() } else { group.join_element(s, x) };
                if frattini.deficit(&t) > remaining {
                    continue;
                }
                let add = count.checked_mul(weight).ok_or_else(overflow)?;
                let slot = next.entry(t).or_insert(0);
                *slot = slot.checked_add(add).ok_or_else(overflow)?;
            }
        }
        states = next;
    }
    Ok(states.get(target).copied().unwrap_or(0))
}

struct FrattiniMap {
    p: usize,
    dim: usize,
    class: Vec<usize>,
}

impl FrattiniMap {
    fn new(group: &ConcreteGroup, members: &[usize]) -> Self {
        let p = group.p() as usize;
        let mut frattini = ElemSet::new(group.order());
        for &x in members {
            frattini.insert(group.scale(p as u64, x));
        }
        let mut class = vec![usize::MAX; group.order()];
        let mut n_classes = 0;
        for &x in members {
            if class[x] != usize::MAX {
                continue;
            }
            for f in frattini.iter() {
                class[group.add(x, f)] = n_classes;
            }
            n_classes += 1;
        }
        let mut dim = 0;
        let mut c = 1;
        while c < n_classes {
            c *= p;
            dim += 1;
        }
        FrattiniMap { p, dim, class }
    }

    /// Minimal number of further elements needed, together with `t`, to generate the target.
    fn deficit(&self, t: &ElemSet) -> usize {
        let mut seen = ElemSet::new(self.class.len());
        let mut n = 0usize;
        for x in t.iter() {
            if seen.insert(self.class[x]) {
                n += 1;
            }
        }
        let mut d = 0;
        while n > 1 {
            n /= self.p;
            d += 1;
        }
        self.dim - d
    }
}

/// #Sur(G_src, G_target) by brute force, where `src_exps` are the cyclic
/// exponents of the source.
pub fn brute_sur_count(p: u64, src_exps: &[u32], target: &Partition, bound: u64) -> Result<BigUint> {
    let t = ConcreteGroup::new(p, target, bound)?;
    Ok(BigUint::from(count_generating_tuples(&t, &t.full_set(), src_exps)?))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Census {
    pub p: u64,
    pub group: Partition,
    pub order: usize,
    pub subgroup_count: usize,
    pub subgroup_types: BTreeMap<Partition, u64>,
    #[serde(with = "crate::arith::serde_biguint")]
    pub aut_count: BigUint,
    #[serde(serialize_with = "serialize_big_map", deserialize_with = "deserialize_big_map")]
    pub sur_counts: BTreeMap<Partition, BigUint>,
    #[serde(skip)]
    pub subgroups: Vec<(ElemSet, Partition)>,
}

fn serialize_big_map<S: serde::Serializer>(
    map: &BTreeMap<Partition, BigUint>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(&k.to_string(), &v.to_string())?;
    }
    m.end()
}

fn deserialize_big_map<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<Partition, BigUint>, D::Error> {
    use serde::de::Error as _;
    let raw = BTreeMap::<String, String>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            let k: Partition = k.parse().map_err(D::Error::custom)?;
            let v: BigUint = v.parse().map_err(D::Error::custom)?;
            Ok((k, v))
        })
        .collect()
}

/// Enumerates every subgroup of `g` with its type, counts automorphisms as
/// generating tuples of g itself, and counts surjections onto each of `sur_targets`.
pub fn brute_census(g: &ConcreteGroup, sur_targets: &[Partition]) -> Result<Census> {
    let subgroups: Vec<(ElemSet, Partition)> = g
        .all_subgroups()
        .into_iter()
        .map(|h| {
            let ty = g.subgroup_type(&h);
            (h, ty)
        })
        .collect();
    let mut subgroup_types = BTreeMap::new();
    for (_, ty) in &subgroups {
        *subgroup_types.entry(ty.clone()).or_insert(0u64) += 1;
    }
    let aut_count = BigUint::from(count_generating_tuples(g, &g.full_set(), g.exponents())?);
    let mut sur_counts = BTreeMap::new();
    for t in sur_targets {
        // a target larger than G receives no surjection
        let c = match ConcreteGroup::new(g.p(), t, g.order() as u64) {
            Ok(target) => count_generating_tuples(&target, &target.full_set(), g.exponents())?,
            Err(Error::BoundExceeded { .. }) => 0,
            Err(e) => return Err(e),
        };
        sur_counts.insert(t.clone(), BigUint::from(c));
    }
    Ok(Census {
        p: g.p(),
        group: g.type_of(),
        order: g.order(),
        subgroup_count: subgroups.len(),
        subgroup_types,
        aut_count,
        sur_counts,
        subgroups,
    })
}

/// n_k by direct counting of chains in the subgroup lattice of `g`.
pub fn brute_chain_count(g: &ConcreteGroup, k: u32) -> BigUint {
    let subs = g.all_subgroups();
    if k == 0 {
        return BigUint::from((g.order() == 1) as u32);
    }
    let sizes: Vec<usize> = subs.iter().map(|s| s.len()).collect();
    let width = subs[0].words().len();
    let flat: Vec<u64> = subs.iter().flat_map(|s| s.words().iter().copied()).collect();
    let subset = |j: usize, i: usize| {
        let (a, b) = (&flat[j * width..(j + 1) * width], &flat[i * width..(i + 1) * width]);
        a.iter().zip(b).all(|(x, y)| x & !y == 0)
    };
    // subgroups come sorted by order
    let below: Vec<Vec<u32>> = (0..subs.len())
        .into_par_iter()
        .map(|i| {
            let end = sizes.partition_point(|&s| s <= sizes[i]);
            (0..end).filter(|&j| subset(j, i)).map(|j| j as u32).collect()
        })
        .collect();
    let mut current = vec![BigUint::from(1u32); subs.len()];
    for _ in 1..k {
        current = below.iter().map(|b| b.iter().map(|&j| &current[j as usize]).sum()).collect();
    }
    current[subs.len() - 1].clone()
}
