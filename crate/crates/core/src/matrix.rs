//! Matrices over Z/p^L: Smith-form cokernel types, chains of partial
//! products, and rank over F_p (with a bit-packed path for p = 2).

use serde::{Deserialize, Serialize};

use crate::arith::require_prime;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Largest supported modulus p^L.
pub const MAX_MODULUS: u64 = 1 << 31;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixModPrimePower {
    n: usize,
    p: u64,
    level: u32,
    modulus: u32,
    entries: Vec<u32>,
}

fn modulus_of(p: u64, level: u32) -> Result<u32> {
    require_prime(p)?;
    if level == 0 {
        return Err(Error::InvalidInput("level L must be at least 1".into()));
    }
    let mut m = 1u64;
    for _ in 0..level {
        m = m.saturating_mul(p);
        if m > MAX_MODULUS {
            return Err(Error::bound("modulus p^L", format!("{p}^{level}"), MAX_MODULUS));
        }
    }
    Ok(m as u32)
}

impl MatrixModPrimePower {
    /// Builds an n×n matrix from row-major integer entries, reducing mod p^L.
    pub fn new(p: u64, level: u32, n: usize, entries: &[i64]) -> Result<Self> {
        let modulus = modulus_of(p, level)?;
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!("expected {} entries for n={n}, got {}", n * n, entries.len())));
        }
        let entries = entries.iter().map(|&x| x.rem_euclid(modulus as i64) as u32).collect();
        Ok(MatrixModPrimePower { n, p, level, modulus, entries })
    }

    /// Builds a matrix from residues already in [0, p^L).
    pub fn from_residues(p: u64, level: u32, n: usize, entries: Vec<u32>) -> Result<Self> {
        let modulus = modulus_of(p, level)?;
        if entries.len() != n * n || entries.iter().any(|&x| x >= modulus) {
            return Err(Error::InvalidInput("residues must be n² values in [0, p^L)".into()));
        }
        Ok(MatrixModPrimePower { n, p, level, modulus, entries })
    }

    pub fn from_rows(p: u64, level: u32, rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix must be square".into()));
        }
        Self::new(p, level, n, &rows.concat())
    }

    pub fn identity(p: u64, level: u32, n: usize) -> Result<Self> {
        let d = vec![1; n];
        Self::diagonal(p, level, &d)
    }

    pub fn diagonal(p: u64, level: u32, diag: &[i64]) -> Result<Self> {
        let n = diag.len();
        let mut e = vec![0i64; n * n];
        for (i, &d) in diag.iter().enumerate() {
            e[i * n + i] = d;
        }
        Self::new(p, level, n, &e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.entries.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.p != other.p || self.level != other.level {
            return Err(Error::Mismatch(format!(
                "matrices n={} mod {}^{} and n={} mod {}^{}",
                self.n, self.p, self.level, other.n, other.p, other.level
            )));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let entries = if self.p == 2 {
            matmul(Pow2 { mask: self.modulus - 1 }, self.n, &self.entries, &other.entries)
        } else {
            matmul(Odd { m: self.modulus as u64 }, self.n, &self.entries, &other.entries)
        };
        Ok(MatrixModPrimePower { entries, ..self.clone() })
    }

    /// The image under Z/p^L → Z/p^level.
    pub fn reduce_to(&self, level: u32) -> Result<Self> {
        if level > self.level {
            return Err(Error::InvalidInput(format!("cannot lift from level {} to {level}", self.level)));
        }
        let modulus = modulus_of(self.p, level)?;
        let entries = self.entries.iter().map(|&x| x % modulus).collect();
        Ok(MatrixModPrimePower { level, modulus, entries, ..self.clone() })
    }
}

trait Reducer: Copy {
    fn fma(self, acc: u32, a: u32, b: u32) -> u32;
    fn neg(self, a: u32) -> u32;
}

/// Arithmetic mod 2^L: wrapping u32 arithmetic followed by a mask.
#[derive(Clone, Copy)]
struct Pow2 {
    mask: u32,
}

impl Reducer for Pow2 {
    #[inline(always)]
    fn fma(self, acc: u32, a: u32, b: u32) -> u32 {
        acc.wrapping_add(a.wrapping_mul(b)) & self.mask
    }
    #[inline(always)]
    fn neg(self, a: u32) -> u32 {
        a.wrapping_neg() & self.mask
    }
}

#[derive(Clone, Copy)]
struct Odd {
    m: u64,
}

impl Reducer for Odd {
    #[inline(always)]
    fn fma(self, acc: u32, a: u32, b: u32) -> u32 {
        ((acc as u64 + a as u64 * b as u64) % self.m) as u32
    }
    #[inline(always)]
    fn neg(self, a: u32) -> u32 {
        ((self.m - a as u64) % self.m) as u32
    }
}

fn matmul<R: Reducer>(r: R, n: usize, a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut c = vec![0u32; n * n];
    for i in 0..n {
        let out = &mut c[i * n..(i + 1) * n];
        for j in 0..n {
            let x = a[i * n + j];
            if x == 0 {
                continue;
            }
            for (o, &y) in out.iter_mut().zip(&b[j * n..(j + 1) * n]) {
                *o = r.fma(*o, x, y);
            }
        }
    }
    c
}

fn valuation(p: u64, x: u32, cap: u32) -> u32 {
    if x == 0 {
        return cap;
    }
    if p == 2 {
        return x.trailing_zeros().min(cap);
    }
    let (mut x, mut v) = (x as u64, 0);
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

fn inverse_mod(u: u64, m: u64) -> u64 {
    let (mut a, mut b) = (u as i64, m as i64);
    let (mut x0, mut x1) = (1i64, 0i64);
    while b != 0 {
        let q = a / b;
        (a, b) = (b, a - q * b);
        (x0, x1) = (x1, x0 - q * x1);
    }
    x0.rem_euclid(m as i64) as u64
}

/// Diagonal valuations of the Smith form, each in [0, L], in pivot order.
fn snf_valuations<R: Reducer>(r: R, m: &MatrixModPrimePower) -> Vec<u32> {
    let (n, p, level) = (m.n, m.p, m.level);
    let modulus = m.modulus as u64;
    let mut a = m.entries.clone();
    let mut vals = Vec::with_capacity(n);
    for s in 0..n {
        // minimal-valuation pivot; a unit ends the search at once
        let mut best = (level, s, s);
        'scan: for i in s..n {
            for j in s..n {
                let x = a[i * n + j];
                if x == 0 {
                    continue;
                }
                let v = valuation(p, x, level);
                if v < best.0 {
                    best = (v, i, j);
                    if v == 0 {
                        break 'scan;
                    }
                }
            }
        }
        let (v, pi, pj) = best;
        if v >= level {
            vals.extend(std::iter::repeat(level).take(n - s));
            break;
        }
        if pi != s {
            for j in s..n {
                a.swap(pi * n + j, s * n + j);
            }
        }
        if pj != s {
            for i in s..n {
                a.swap(i * n + pj, i * n + s);
            }
        }
        let pv = p.pow(v);
        let uinv = inverse_mod(a[s * n + s] as u64 / pv, modulus) as u32;
        let (head, tail) = a.split_at_mut((s + 1) * n);
        let pivot_row = &head[s * n + s..s * n + n];
        for row in tail.chunks_mut(n) {
            let b = row[s];
            if b == 0 {
                continue;
            }
            let f = ((b as u64 / pv) * uinv as u64 % modulus) as u32;
            let nf = r.neg(f);
            for (x, &y) in row[s..].iter_mut().zip(pivot_row) {
                *x = r.fma(*x, nf, y);
            }
        }
        vals.push(v);
    }
    vals
}

/// Cokernel type of M over Z/p^L: nonzero Smith valuations, clamped at L.
pub fn snf_type(m: &MatrixModPrimePower) -> Partition {
    let vals = if m.p == 2 {
        snf_valuations(Pow2 { mask: m.modulus - 1 }, m)
    } else {
        snf_valuations(Odd { m: m.modulus as u64 }, m)
    };
    Partition::from_unsorted(vals.into_iter().filter(|&v| v > 0))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CokernelChainResult {
    /// Types of cok(M_1⋯M_j) ⊗ Z/p^L for j = 1..k.
    pub types: Vec<Partition>,
}

impl CokernelChainResult {
    pub fn is_monotone(&self) -> bool {
        self.types.windows(2).all(|w| w[0].is_contained_in(&w[1]))
    }
}

pub fn cok_chain(ms: &[MatrixModPrimePower]) -> Result<CokernelChainResult> {
    let Some(first) = ms.first() else {
        return Err(Error::InvalidInput("cokernel chain needs at least one matrix".into()));
    };
    let mut acc = first.clone();
    let mut types = vec![snf_type(&acc)];
    for m in &ms[1..] {
        acc = acc.mul(m)?;
        types.push(snf_type(&acc));
    }
    Ok(CokernelChainResult { types })
}

/// Rank of M mod p by row echelon form.
pub fn rank_fp(m: &MatrixModPrimePower) -> usize {
    let (n, p) = (m.n, m.p);
    let mut a: Vec<u64> = m.entries.iter().map(|&x| x as u64 % p).collect();
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..n).find(|&i| a[i * n + col] != 0) else {
            continue;
        };
        for j in 0..n {
            a.swap(piv * n + j, rank * n + j);
        }
        let inv = inverse_mod(a[rank * n + col], p);
        for i in rank + 1..n {
            let f = a[i * n + col] * inv % p;
            if f == 0 {
                continue;
            }
            for j in col..n {
                a[i * n + j] = (a[i * n + j] + (p - f) * a[rank * n + j]) % p;
            }
        }
        rank += 1;
    }
    rank
}

/// Square matrix over F_2 with bit-packed rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn zero(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitMatrix { n, words, bits: vec![0; n * words] }
    }

    /// Fills each row from `next_word`, masking bits beyond column n.
    pub fn from_words(n: usize, mut next_word: impl FnMut() -> u64) -> Self {
        let mut m = Self::zero(n);
        let tail = n % 64;
        for i in 0..n {
            for w in 0..m.words {
                let mut x = next_word();
                if w == m.words - 1 && tail != 0 {
                    x &= (1u64 << tail) - 1;
                }
                m.bits[i * m.words + w] = x;
            }
        }
        m
    }

    pub fn from_matrix(m: &MatrixModPrimePower) -> Result<Self> {
        if m.p != 2 {
            return Err(Error::InvalidInput("bit matrices are over F_2".into()));
        }
        let mut b = Self::zero(m.n);
        for i in 0..m.n {
            for j in 0..m.n {
                if m.get(i, j) & 1 == 1 {
                    b.set(i, j);
                }
            }
        }
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.n, other.n, "bit matrix dimensions");
        let w = self.words;
        let mut c = BitMatrix::zero(self.n);
        for (out, row) in c.bits.chunks_mut(w).zip(self.bits.chunks(w)) {
            for (wi, &word) in row.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let j = wi * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for (o, &y) in out.iter_mut().zip(other.row(j)) {
                        *o ^= y;
                    }
                }
            }
        }
        c
    }

    pub fn rank(&self) -> usize {
        let w = self.words;
        let mut a = self.bits.clone();
        let mut rank = 0;
        for col in 0..self.n {
            let (cw, bit) = (col / 64, 1u64 << (col % 64));
            let Some(piv) = (rank..self.n).find(|&i| a[i * w + cw] & bit != 0) else {
                continue;
            };
            for x in 0..w {
                a.swap(piv * w + x, rank * w + x);
            }
            let (head, tail) = a.split_at_mut((rank + 1) * w);
            let pivot = &head[rank * w..];
            for row in tail.chunks_mut(w) {
                if row[cw] & bit != 0 {
                    for (x, &y) in row.iter_mut().zip(pivot) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn part(s: &str) -> Partition {
        s.parse().unwrap()
    }

    #[test]
    fn snf_examples() {
        assert_eq!(snf_type(&MatrixModPrimePower::diagonal(2, 3, &[4, 2, 1]).unwrap()), part("2,1"));
        assert_eq!(snf_type(&MatrixModPrimePower::new(2, 2, 2, &[0; 4]).unwrap()), part("2,2"));
        let m = MatrixModPrimePower::from_rows(2, 3, &[vec![2, 1], vec![0, 2]]).unwrap();
        assert_eq!(snf_type(&m), part("2"));
        let m = MatrixModPrimePower::from_rows(3, 2, &[vec![3, 6], vec![6, 3]]).unwrap();
        // det = -27, entries all divisible by 3
        assert_eq!(snf_type(&m), part("2,1"));
    }

    #[test]
    fn chain_examples() {
        let d = |a: &[i64]| MatrixModPrimePower::diagonal(2, 2, a).unwrap();
        let i = MatrixModPrimePower::identity(2, 2, 2).unwrap();
        assert_eq!(cok_chain(&[i.clone(), i]).unwrap().types, vec![Partition::empty(), Partition::empty()]);
        assert_eq!(cok_chain(&[d(&[2, 1]), d(&[1, 2])]).unwrap().types, vec![part("1"), part("1,1")]);
        assert_eq!(cok_chain(&[d(&[2, 1]), d(&[2, 1])]).unwrap().types, vec![part("1"), part("2")]);
        let other = MatrixModPrimePower::identity(2, 3, 2).unwrap();
        assert!(matches!(cok_chain(&[d(&[1, 1]), other]), Err(Error::Mismatch(_))));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_fp(&MatrixModPrimePower::identity(5, 1, 4).unwrap()), 4);
        assert_eq!(rank_fp(&MatrixModPrimePower::new(5, 1, 3, &[0; 9]).unwrap()), 0);
        let m = MatrixModPrimePower::from_rows(2, 1, &[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(rank_fp(&m), 1);
        assert_eq!(BitMatrix::from_matrix(&m).unwrap().rank(), 1);
    }

    #[test]
    fn modulus_bound() {
        assert!(matches!(MatrixModPrimePower::identity(2, 32, 2), Err(Error::BoundExceeded { .. })));
        assert!(MatrixModPrimePower::identity(2, 31, 2).is_ok());
    }

    fn random(rng: &mut ChaCha8Rng, p: u64, level: u32, n: usize) -> MatrixModPrimePower {
        let m = p.pow(level) as i64;
        let e: Vec<i64> = (0..n * n).map(|_| rng.gen_range(0..m)).collect();
        MatrixModPrimePower::new(p, level, n, &e).unwrap()
    }

    fn random_invertible(rng: &mut ChaCha8Rng, p: u64, level: u32, n: usize) -> MatrixModPrimePower {
        loop {
            let m = random(rng, p, level, n);
            if rank_fp(&m) == n {
                return m;
            }
        }
    }

    #[test]
    fn gl_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let (p, level) = [(2, 3), (3, 2), (5, 2), (2, 1)][trial % 4];
            let n = rng.gen_range(1..=8);
            let m = random(&mut rng, p, level, n);
            let u = random_invertible(&mut rng, p, level, n);
            let v = random_invertible(&mut rng, p, level, n);
            let umv = u.mul(&m).unwrap().mul(&v).unwrap();
            assert_eq!(snf_type(&umv), snf_type(&m), "trial {trial}");
        }
    }

    #[test]
    fn chain_monotone_on_many_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let (p, level) = if rng.gen_bool(0.5) { (2, 3) } else { (3, 2) };
            let n = rng.gen_range(1..=4);
            let k = rng.gen_range(1..=3);
            let ms: Vec<_> = (0..k).map(|_| random(&mut rng, p, level, n)).collect();
            let chain = cok_chain(&ms).unwrap();
            assert!(chain.is_monotone(), "{chain:?}");
        }
    }

    #[test]
    fn bit_matrix_agrees_with_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 5, 63, 64, 65, 130] {
            let a = random(&mut rng, 2, 1, n);
            let b = random(&mut rng, 2, 1, n);
            let (ba, bb) = (BitMatrix::from_matrix(&a).unwrap(), BitMatrix::from_matrix(&b).unwrap());
            let ab = a.mul(&b).unwrap();
            assert_eq!(ba.mul(&bb), BitMatrix::from_matrix(&ab).unwrap());
            assert_eq!(ba.rank(), rank_fp(&a));
            assert_eq!(ba.mul(&bb).rank(), rank_fp(&ab));
        }
    }

    proptest! {
        #[test]
        fn rank_matches_snf_length(p in prop::sample::select(vec![2u64, 3, 5]), n in 1usize..7,
                                   level in 1u32..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random(&mut rng, p, level, n);
            prop_assert_eq!(n - rank_fp(&m), snf_type(&m).len());
        }

        #[test]
        fn diagonal_products(p in prop::sample::select(vec![2u64, 3]), level in 1u32..5,
                             a in prop::collection::vec(0i64..200, 1..6), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<i64> = a.iter().map(|_| rng.gen_range(0..200)).collect();
            let prod: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
            let (da, db) = (MatrixModPrimePower::diagonal(p, level, &a).unwrap(), MatrixModPrimePower::diagonal(p, level, &b).unwrap());
            let val = |x: i64| if x == 0 { level } else { let mut v = 0; let mut x = x; while x % p as i64 == 0 { x /= p as i64; v += 1; } v.min(level) };
            let expected = Partition::from_unsorted(prod.iter().map(|&x| val(x)).filter(|&v| v > 0));
            prop_assert_eq!(snf_type(&da.mul(&db).unwrap()), expected);
        }

        #[test]
        fn chain_monotone(p in prop::sample::select(vec![2u64, 3]), n in 1usize..6, k in 1usize..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ms: Vec<_> = (0..k).map(|_| random(&mut rng, p, 2, n)).collect();
            prop_assert!(cok_chain(&ms).unwrap().is_monotone());
        }
    }
}
