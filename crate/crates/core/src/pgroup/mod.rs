//! Finite abelian groups: types, exact counts, and brute-force oracles.

mod census;
mod concrete;
mod counts;
mod joint;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

pub use census::{brute_census, brute_chain_count, brute_sur_count, count_generating_tuples, Census};
pub use concrete::{ConcreteGroup, ElemSet};
pub use counts::{aut_count, chain_count_prime, hom_count, inj_count, subgroup_type_count, sur_count};
pub use joint::joint_chain_count_prime;

use crate::arith::{big_pow, require_prime};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Default cap on explicit enumeration (group orders, chain counts).
pub const DEFAULT_ORDER_BOUND: u64 = 256;

/// ⊕_p G_{λ(p)}: a finite abelian group given by one partition per prime.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u64, Partition>", into = "BTreeMap<u64, Partition>")]
pub struct GroupType {
    components: BTreeMap<u64, Partition>,
}

impl GroupType {
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn new(components: BTreeMap<u64, Partition>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (p, lam) in components {
            require_prime(p)?;
            if !lam.is_empty() {
                out.insert(p, lam);
            }
        }
        Ok(GroupType { components: out })
    }

    /// The p-group G_λ as a group type.
    pub fn prime_power(p: u64, lambda: Partition) -> Result<Self> {
        Self::new(BTreeMap::from([(p, lambda)]))
    }

    pub fn component(&self, p: u64) -> Partition {
        self.components.get(&p).cloned().unwrap_or_default()
    }

    pub fn direct_sum(&self, other: &GroupType) -> GroupType {
        let mut out = self.components.clone();
        for (p, lam) in &other.components {
            let merged = out.get(p).map_or_else(|| lam.clone(), |l| l.direct_sum(lam));
            out.insert(*p, merged);
        }
        GroupType { components: out }
    }

    pub fn components(&self) -> &BTreeMap<u64, Partition> {
        &self.components
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.components.keys().copied()
    }

    pub fn is_trivial(&self) -> bool {
        self.components.is_empty()
    }

    pub fn order(&self) -> BigUint {
        self.components.iter().map(|(&p, lam)| big_pow(p, lam.size() as u64)).product()
    }
}

impl TryFrom<BTreeMap<u64, Partition>> for GroupType {
    type Error = Error;
    fn try_from(m: BTreeMap<u64, Partition>) -> Result<Self> {
        GroupType::new(m)
    }
}

impl From<GroupType> for BTreeMap<u64, Partition> {
    fn from(g: GroupType) -> Self {
        g.components
    }
}

impl fmt::Display for GroupType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.components.iter().map(|(p, l)| format!("{p}:{l}")).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Parses a JSON object such as `{"2":"2,1","3":"1"}`, the compact form
/// `2:2,1 3:1`, or `0` for the trivial group.
impl FromStr for GroupType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("group type: {e}")));
        }
        if s.is_empty() || s == "0" {
            return Ok(Self::trivial());
        }
        let mut map = BTreeMap::new();
        for tok in s.split_whitespace() {
            let (p, lam) = tok
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("expected prime:partition, got {tok:?}")))?;
            let p: u64 = p.parse().map_err(|_| Error::InvalidInput(format!("bad prime {p:?}")))?;
            if map.insert(p, lam.parse()?).is_some() {
                return Err(Error::InvalidInput(format!("prime {p} given twice")));
            }
        }
        Self::new(map)
    }
}

fn union_primes<'a>(gs: impl IntoIterator<Item = &'a GroupType>) -> BTreeSet<u64> {
    gs.into_iter().flat_map(|g| g.primes()).collect()
}

pub fn group_aut_count(g: &GroupType) -> BigUint {
    g.components.iter().map(|(&p, lam)| aut_count(p, lam)).product()
}

/// #Sur(G, H), a product of per-prime counts.
pub fn group_sur_count(g: &GroupType, h: &GroupType) -> BigUint {
    union_primes([g, h])
        .into_iter()
        .map(|p| sur_count(p, &g.component(p), &h.component(p)))
        .product()
}

/// n_k(G) = ∏_p n_k(G_p).
pub fn chain_count_nk(g: &GroupType, k: u32) -> BigUint {
    if k == 0 {
        return BigUint::from(g.is_trivial() as u32);
    }
    g.components.iter().map(|(&p, lam)| chain_count_prime(p, lam, k)).product()
}

/// m_k(G_1, …, G_k) = ∏_p m_k(G_{1,p}, …, G_{k,p}), each factor by enumeration
/// with |G_{1,p} ⊕ … ⊕ G_{k,p}| ≤ `bound`.
pub fn joint_chain_count_mk(gs: &[GroupType], bound: u64) -> Result<BigUint> {
    if gs.is_empty() {
        return Err(Error::InvalidInput("m_k needs at least one group".into()));
    }
    let mut acc = BigUint::one();
    for p in union_primes(gs) {
        let parts: Vec<Partition> = gs.iter().map(|g| g.component(p)).collect();
        acc *= joint_chain_count_prime(p, &parts, bound)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> GroupType {
        s.parse().unwrap()
    }

    #[test]
    fn group_type_format() {
        let x = g(r#"{"2":"2,1","3":"1","5":"[]"}"#);
        assert_eq!(x, g("2:2,1 3:1"));
        assert_eq!(serde_json::to_string(&x).unwrap(), r#"{"2":"2,1","3":"1"}"#);
        assert_eq!(x.order(), BigUint::from(24u32));
        assert!("4:1".parse::<GroupType>().is_err());
        assert!(serde_json::from_str::<GroupType>(r#"{"6":"1"}"#).is_err());
        assert!(g("0").is_trivial());
    }

    #[test]
    fn nk_examples() {
        for h in ["0", "2:1", "3:2,1", "2:1 3:1"] {
            assert_eq!(chain_count_nk(&g(h), 1), BigUint::one());
        }
        assert_eq!(chain_count_nk(&g("2:1"), 2), BigUint::from(2u32));
        assert_eq!(chain_count_nk(&g("2:1 3:1"), 2), BigUint::from(4u32));
        assert_eq!(chain_count_nk(&g("2:1"), 0), BigUint::from(0u32));
        assert_eq!(chain_count_nk(&g("0"), 0), BigUint::one());
    }

    #[test]
    fn mk_examples() {
        assert_eq!(joint_chain_count_mk(&[g("2:2,1 3:1")], 256).unwrap(), BigUint::one());
        assert_eq!(joint_chain_count_mk(&[g("2:1"), g("2:1")], 256).unwrap(), BigUint::from(3u32));
        assert_eq!(joint_chain_count_mk(&[g("0"), g("2:1")], 256).unwrap(), BigUint::from(2u32));
        assert_eq!(joint_chain_count_mk(&[g("2:1 3:1"), g("2:1")], 256).unwrap(), BigUint::from(3u32));
    }
}
