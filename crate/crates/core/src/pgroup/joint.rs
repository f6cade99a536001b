//! m_k(G_1, …, G_k) by explicit enumeration of compatible subgroup sequences.

use std::collections::HashMap;

use num_bigint::BigUint;

use super::concrete::{ConcreteGroup, ElemSet};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Counts sequences (H_1, …, H_k) with H_k = G_k and, for i < k,
/// H_i ≤ G_i ⊕ … ⊕ G_k, π_i(H_i) = G_i and π_{i+1..k}(H_i) ≤ H_{i+1},
/// for the p-groups G_i = G_{gs[i]}. Fails if |G_1 ⊕ … ⊕ G_k| exceeds `bound`.
pub fn joint_chain_count_prime(p: u64, gs: &[Partition], bound: u64) -> Result<BigUint> {
    let k = gs.len();
    if k == 0 {
        return Err(Error::InvalidInput("m_k needs at least one group".into()));
    }
    // T_i = G_i ⊕ … ⊕ G_k, with G_i's components most significant so that
    // an element index splits as head · |T_{i+1}| + tail.
    let tails: Vec<ConcreteGroup> = (0..k)
        .map(|i| {
            let exps: Vec<u32> = gs[i..].iter().flat_map(|g| g.parts().iter().copied()).collect();
            ConcreteGroup::from_exponents(p, exps, bound)
        })
        .collect::<Result<_>>()?;

    // weights over admissible H_{i+1} ≤ T_{i+1}; initially H_k = G_k only
    let last = &tails[k - 1];
    let mut weights: Vec<(ElemSet, BigUint)> = vec![(last.full_set(), BigUint::from(1u32))];
    for i in (0..k - 1).rev() {
        let t = &tails[i];
        let tail_order = tails[i + 1].order();
        let head_order = t.order() / tail_order;
        let mut memo: HashMap<ElemSet, BigUint> = HashMap::new();
        let mut next = Vec::new();
        for h in t.all_subgroups() {
            let mut heads = ElemSet::new(head_order);
            let mut proj = ElemSet::new(tail_order);
            for x in h.iter() {
                heads.insert(x / tail_order);
                proj.insert(x % tail_order);
            }
            if heads.len() != head_order {
                continue;
            }
            let w = memo
                .entry(proj)
                .or_insert_with_key(|proj| {
                    weights.iter().filter(|(h2, _)| proj.is_subset(h2)).map(|(_, c)| c).sum()
                })
                .clone();
            if w != BigUint::from(0u32) {
                next.push((h, w));
            }
        }
        weights = next;
    }
    Ok(weights.into_iter().map(|(_, c)| c).sum())
}
