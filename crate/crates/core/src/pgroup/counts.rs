//! Closed-form and recursive counts for maps and subgroups of G_λ.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::arith::{big_pow, gaussian_binomial};
use crate::partition::Partition;

fn conj_dot(a: &Partition, b: &Partition) -> u64 {
    let w = a.largest().min(b.largest()) as usize;
    (1..=w)
        .map(|i| a.conjugate_part(i) as u64 * b.conjugate_part(i) as u64)
        .sum()
}

/// #Aut(G_λ) = p^{Σ λ'_i²} ∏_i (1/p; 1/p)_{m_i(λ)}, computed in exact integers.
pub fn aut_count(p: u64, lambda: &Partition) -> BigUint {
    let mut exponent: i64 = conj_dot(lambda, lambda) as i64;
    let mut acc = BigUint::one();
    for i in 1..=lambda.largest() {
        let m = lambda.multiplicity(i) as u64;
        for j in 1..=m {
            // (1 - p^{-j}) = (p^j - 1) / p^j
            acc *= big_pow(p, j) - 1u32;
            exponent -= j as i64;
        }
    }
    debug_assert!(exponent >= 0);
    acc * big_pow(p, exponent as u64)
}

/// #Hom(G_μ, G_λ) = p^{Σ μ'_i λ'_i}.
pub fn hom_count(p: u64, mu: &Partition, lambda: &Partition) -> BigUint {
    big_pow(p, conj_dot(mu, lambda))
}

/// Number of subgroups of G_λ isomorphic to G_μ, via the Gaussian-binomial
/// product over columns of the diagrams.
pub fn subgroup_type_count(p: u64, mu: &Partition, lambda: &Partition) -> BigUint {
    let width = lambda.largest().max(mu.largest()) as usize;
    let mut acc = BigUint::one();
    for i in 1..=width {
        let lc = lambda.conjugate_part(i) as i64;
        let mc = mu.conjugate_part(i) as i64;
        let mc_next = mu.conjugate_part(i + 1) as i64;
        if mc > lc {
            return BigUint::zero();
        }
        acc *= big_pow(p, (mc_next * (lc - mc)) as u64);
        acc *= gaussian_binomial(p, lc - mc_next, mc - mc_next);
        if acc.is_zero() {
            return acc;
        }
    }
    acc
}

/// #Sur(G_λ, G_μ) by subtracting, from #Hom, the maps whose image is a
/// proper subgroup (grouped by the image's type).
pub fn sur_count(p: u64, lambda: &Partition, mu: &Partition) -> BigUint {
    let subs = mu.sub_diagrams();
    let mut sur: HashMap<&Partition, BigInt> = HashMap::with_capacity(subs.len());
    for nu in &subs {
        let mut value = BigInt::from(hom_count(p, lambda, nu));
        for smaller in &subs {
            if smaller == nu || !smaller.is_contained_in(nu) {
                continue;
            }
            let s = &sur[smaller];
            if s.is_zero() {
                continue;
            }
            value -= BigInt::from(subgroup_type_count(p, smaller, nu)) * s;
        }
        debug_assert!(!value.is_negative(), "negative surjection count");
        sur.insert(nu, value);
    }
    sur[mu].to_biguint().expect("nonnegative")
}

/// #Inj(G_μ, G_λ), equal to #Sur(G_λ, G_μ) by duality.
pub fn inj_count(p: u64, mu: &Partition, lambda: &Partition) -> BigUint {
    subgroup_type_count(p, mu, lambda) * aut_count(p, mu)
}

/// n_k(G_λ): chains 0 = H_0 ≤ H_1 ≤ … ≤ H_k = G_λ, by the recursion
/// n_{j+1}(λ) = Σ_μ |G_{μ,λ}| n_j(μ) with n_1 ≡ 1.
pub fn chain_count_prime(p: u64, lambda: &Partition, k: u32) -> BigUint {
    if k == 0 {
        return if lambda.is_empty() { BigUint::one() } else { BigUint::zero() };
    }
    let subs = lambda.sub_diagrams();
    let index: HashMap<&Partition, usize> = subs.iter().enumerate().map(|(i, s)| (s, i)).collect();
    // inner[i] = (j, |G_{subs[j], subs[i]}|) for subs[j] ⊆ subs[i]
    let inner: Vec<Vec<(usize, BigUint)>> = subs
        .iter()
        .map(|nu| {
            nu.sub_diagrams()
                .into_iter()
                .map(|s| {
                    let c = subgroup_type_count(p, &s, nu);
                    (index[&s], c)
                })
                .collect()
        })
        .collect();
    let mut current = vec![BigUint::one(); subs.len()];
    for _ in 1..k {
        current = inner
            .iter()
            .map(|terms| terms.iter().map(|(j, c)| c * &current[*j]).sum())
            .collect();
    }
    current[index[lambda]].clone()
}
