//! Limit laws against each other and against independent closed forms.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use coklab::arith::big_to_f64;
use coklab::limits::{
    cl_constant, cok_joint_limit, cok_joint_rational_part, cok_prod_limit, corank_joint_limit, corank_patterns,
    rank_step,
};
use coklab::partition::partitions_bounded;
use coklab::pgroup::{aut_count, chain_count_prime, subgroup_type_count, sur_count, GroupType};
use coklab::Partition;

fn tt(p: u64, n: u32) -> BigRational {
    let t = BigRational::new(BigInt::one(), BigInt::from(p));
    let mut acc = BigRational::one();
    let mut x = BigRational::one();
    for _ in 0..n {
        x *= &t;
        acc *= BigRational::one() - &x;
    }
    acc
}

#[test]
fn rank_step_rows_are_distributions() {
    for p in [2u64, 3, 5] {
        for n in 0..=12 {
            for k0 in 0..=n {
                let row: BigRational = (0..=n - k0).map(|d| rank_step(p, n, k0, d).unwrap()).sum();
                assert_eq!(row, BigRational::one(), "p={p} n={n} k0={k0}");
            }
            assert_eq!(rank_step(p, n, 0, 0).unwrap(), tt(p, n));
        }
    }
    assert_eq!(rank_step(2, 2, 0, 1).unwrap(), BigRational::new(9.into(), 16.into()));
}

#[test]
fn single_matrix_corank_law() {
    // p^{-d²} ∏_{i>d}(1 - p^{-i}) / ∏_{i≤d}(1 - p^{-i}), summed in floating point
    for p in [2u64, 3, 5, 7] {
        let t = 1.0 / p as f64;
        for d in 0..6u32 {
            let num: f64 = (d + 1..400).map(|i| 1.0 - t.powi(i as i32)).product();
            let den: f64 = (1..=d).map(|i| 1.0 - t.powi(i as i32)).product();
            let expected = t.powi((d * d) as i32) * num / den;
            let got = corank_joint_limit(p, &[d]).unwrap();
            assert!((got.value - expected).abs() <= 1e-14, "p={p} d={d}");
        }
    }
}

#[test]
fn corank_patterns_normalize() {
    for p in [2u64, 3] {
        for k in 1..=3u32 {
            let total: f64 = corank_patterns(k, 20).iter().map(|r| corank_joint_limit(p, r).unwrap().value).sum();
            assert!(total >= 1.0 - 1e-6 && total <= 1.0 + 1e-12, "p={p} k={k} total={total}");
        }
    }
}

/// Every (B_1, …, B_{k-1}) with B_1 ⊆ … ⊆ B_{k-1} ⊆ B; others carry no mass.
fn joint_sequences(b: &Partition, k: usize) -> Vec<Vec<Partition>> {
    if k == 1 {
        return vec![vec![b.clone()]];
    }
    let mut out = Vec::new();
    for sub in b.sub_diagrams() {
        for mut seq in joint_sequences(&sub, k - 1) {
            seq.push(b.clone());
            out.push(seq);
        }
    }
    out
}

#[test]
fn joint_law_marginalizes_to_product_law() {
    for p in [2u64, 3] {
        for k in 1..=3usize {
            for b in partitions_bounded(8, 8, 8) {
                let seqs = joint_sequences(&b, k);
                let exact: BigRational = seqs.iter().map(|s| cok_joint_rational_part(p, s)).sum();
                let expected = BigRational::new(
                    BigInt::from(chain_count_prime(p, &b, k as u32)),
                    BigInt::from(aut_count(p, &b)),
                );
                assert_eq!(exact, expected, "p={p} k={k} B={b}");
                let bg = GroupType::prime_power(p, b.clone()).unwrap();
                let lhs = cok_prod_limit(&[p], k as u32, &bg).unwrap();
                let rhs: f64 = seqs
                    .iter()
                    .map(|s| {
                        let gs: Vec<GroupType> = s.iter().map(|l| GroupType::prime_power(p, l.clone()).unwrap()).collect();
                        cok_joint_limit(&[p], &gs).unwrap().value
                    })
                    .sum();
                assert!((lhs.value - rhs).abs() <= 1e-6 * lhs.value.max(1e-300), "p={p} k={k} B={b}");
            }
        }
    }
}

#[test]
fn two_prime_joint_law_factorizes() {
    let b1 = GroupType::new([(2u64, "1".parse().unwrap()), (3, "1".parse().unwrap())].into()).unwrap();
    let b2 = GroupType::new([(2u64, "2".parse().unwrap()), (3, "1".parse().unwrap())].into()).unwrap();
    let joint = cok_joint_limit(&[2, 3], &[b1.clone(), b2.clone()]).unwrap();
    let at2 = cok_joint_limit(&[2], &[GroupType::prime_power(2, b1.component(2)).unwrap(), GroupType::prime_power(2, b2.component(2)).unwrap()]).unwrap();
    let at3 = cok_joint_limit(&[3], &[GroupType::prime_power(3, b1.component(3)).unwrap(), GroupType::prime_power(3, b2.component(3)).unwrap()]).unwrap();
    assert!((joint.value - at2.value * at3.value).abs() < 1e-15);
}

/// n_k(λ) for every |λ| ≤ max_size, sharing the recursion across λ.
fn chain_counts_upto(p: u64, max_size: u32, k: u32) -> Vec<(Partition, BigUint)> {
    let all: Vec<Partition> = partitions_bounded(max_size, max_size, max_size as usize).collect();
    let index: HashMap<Partition, usize> = all.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
    let inner: Vec<Vec<(usize, BigUint)>> = all
        .iter()
        .map(|l| l.sub_diagrams().into_iter().map(|s| (index[&s], subgroup_type_count(p, &s, l))).collect())
        .collect();
    let mut current = vec![BigUint::one(); all.len()];
    for _ in 1..k {
        current = inner.iter().map(|terms| terms.iter().map(|(j, c)| c * &current[*j]).sum()).collect();
    }
    all.into_iter().zip(current).collect()
}

/// Σ_{|λ| ≤ B} n_k(λ)/#Aut(λ) · #Sur(λ, μ).
fn moment_partial(p: u64, mu: &Partition, weights: &[(Partition, f64)], max_size: u32) -> f64 {
    weights
        .iter()
        .filter(|(l, _)| l.size() <= max_size)
        .map(|(l, w)| w * big_to_f64(&sur_count(p, l, mu)))
        .sum()
}

#[test]
fn product_law_moments_converge_to_chain_counts() {
    for p in [2u64, 3] {
        let c = cl_constant(p).unwrap().value;
        for k in 1..=3u32 {
            let nk = chain_counts_upto(p, 18, k);
            let weights: Vec<(Partition, f64)> =
                nk.iter().map(|(l, n)| (l.clone(), big_to_f64(n) / big_to_f64(&aut_count(p, l)))).collect();
            for mu in partitions_bounded(3, 3, 3) {
                let target = big_to_f64(&chain_count_prime(p, &mu, k));
                let gaps: Vec<f64> = [12u32, 15, 18]
                    .iter()
                    .map(|&b| target - c.powi(k as i32) * (moment_partial(p, &mu, &weights, b)))
                    .collect();
                // increasing partial sums approaching the target from below
                assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] > -1e-9, "p={p} k={k} μ={mu} {gaps:?}");
                assert!(gaps[2] <= gaps[0] / 4.0, "p={p} k={k} μ={mu} {gaps:?}");
                if p == 3 && k == 1 {
                    assert!(gaps[2] <= 1e-5, "μ={mu} gap {}", gaps[2]);
                }
            }
        }
    }
}

#[test]
fn cl_measure_has_unit_moments() {
    // Σ_λ #Sur(λ, μ)/#Aut(λ) = 1/(1/p;1/p)_∞ for every μ
    let p = 3u64;
    let c = cl_constant(p).unwrap().value;
    for mu in partitions_bounded(2, 2, 2) {
        let s: f64 = partitions_bounded(24, 24, 24)
            .map(|l| big_to_f64(&sur_count(p, &l, &mu)) / big_to_f64(&aut_count(p, &l)))
            .sum();
        assert!((c * s - 1.0).abs() < 1e-6, "μ={mu} {}", c * s);
    }
    assert!(sur_count(p, &Partition::empty(), &"1".parse().unwrap()).is_zero());
}
