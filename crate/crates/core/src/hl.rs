//! Hall-Littlewood polynomials P, Q and their skew versions, evaluated by the
//! one-variable branching rule, at finite and geometric specializations.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{pow, Num, One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{self, serde_rational};
use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    P,
    Q,
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" | "p" => Ok(Kind::P),
            "Q" | "q" => Ok(Kind::Q),
            _ => Err(Error::InvalidInput(format!("kind must be P or Q, got {s:?}"))),
        }
    }
}

/// Variables to substitute.
#[derive(Clone, Debug, PartialEq)]
pub enum Spec {
    /// Finitely many nonnegative values.
    Finite(Vec<BigRational>),
    /// t^a, t^{a+1}, … with each value repeated `mult` times.
    Geometric { start: u32, mult: u32 },
}

impl Spec {
    pub fn geometric(start: u32, mult: u32) -> Self {
        Spec::Geometric { start, mult }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Spec::Finite(xs) => {
                if xs.iter().any(|x| x.is_negative()) {
                    return Err(Error::InvalidInput("specialization values must be nonnegative".into()));
                }
            }
            Spec::Geometric { mult, .. } => {
                if *mult == 0 {
                    return Err(Error::InvalidInput("geometric multiplicity must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// An evaluation result: `value` is within `error_bound` of the true value,
/// and `exact` is present when no truncation or rounding occurred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HLValue {
    pub value: f64,
    pub error_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    pub exact: Option<BigRational>,
}

mod opt_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(x) => serde_rational::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<BigRational>, D::Error> {
        Ok(Some(serde_rational::deserialize(d)?))
    }
}

const ROUNDING: f64 = 64.0 * f64::EPSILON;

impl HLValue {
    pub fn exact(x: BigRational) -> Self {
        let value = arith::to_f64(&x);
        HLValue { value, error_bound: value.abs() * f64::EPSILON, exact: Some(x) }
    }

    pub fn approx(value: f64, error_bound: f64) -> Self {
        HLValue { value, error_bound, exact: None }
    }

    pub fn mul(&self, other: &HLValue) -> HLValue {
        let exact = match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => return HLValue::exact(a * b),
            _ => None,
        };
        let value = self.value * other.value;
        let (a, b) = (self.value.abs(), other.value.abs());
        let bound = a * other.error_bound + b * self.error_bound + self.error_bound * other.error_bound;
        HLValue { value, error_bound: bound + value.abs() * ROUNDING, exact }
    }

    pub fn div(&self, other: &HLValue) -> Result<HLValue> {
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            if b.is_zero() {
                return Err(Error::InvalidInput("division by zero".into()));
            }
            return Ok(HLValue::exact(a / b));
        }
        let d = other.value.abs();
        if d <= other.error_bound {
            return Err(Error::NonConvergence("denominator not separated from zero".into()));
        }
        let value = self.value / other.value;
        let bound = (self.value.abs() * other.error_bound + d * self.error_bound) / (d * (d - other.error_bound));
        Ok(HLValue { value, error_bound: bound + value.abs() * ROUNDING, exact: None })
    }

    pub fn powi(&self, k: u32) -> HLValue {
        let mut acc = HLValue::exact(BigRational::one());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }
}

fn one_minus_t_pow<T: Clone + Num>(t: &T, m: u32) -> T {
    T::one() - pow(t.clone(), m as usize)
}

/// Branching coefficient for one added variable: ψ_{outer/inner} for P,
/// φ_{outer/inner} for Q. Requires inner ≺ outer.
fn branch_coef<T: Clone + Num>(kind: Kind, outer: &Partition, inner: &Partition, t: &T) -> T {
    let mut acc = T::one();
    for i in 1..=outer.largest() {
        let mo = outer.multiplicity(i);
        let mi = inner.multiplicity(i);
        match kind {
            Kind::P if mi == mo + 1 => acc = acc * one_minus_t_pow(t, mi),
            Kind::Q if mo == mi + 1 => acc = acc * one_minus_t_pow(t, mo),
            _ => {}
        }
    }
    acc
}

/// Every ν' with ν ≺ ν' ⊆ λ.
fn horizontal_strips(nu: &Partition, lambda: &Partition) -> Vec<Partition> {
    let n = lambda.len();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(i: usize, nu: &Partition, lambda: &Partition, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if i > lambda.len() {
            out.push(Partition::from_unsorted(cur.iter().copied()));
            return;
        }
        let lo = nu.part(i);
        let hi = if i == 1 { lambda.part(1) } else { lambda.part(i).min(nu.part(i - 1)) };
        for v in lo..=hi {
            cur.push(v);
            rec(i + 1, nu, lambda, cur, out);
            cur.pop();
        }
    }
    if nu.len() <= n {
        rec(1, nu, lambda, &mut cur, &mut out);
    }
    out
}

/// The interval {ν : μ ⊆ ν ⊆ λ} with its horizontal-strip transitions.
struct Interval<T> {
    nodes: Vec<Partition>,
    /// For each node ν, every (ν', coefficient, |ν'/ν|) with ν ≺ ν' ⊆ λ.
    strips: Vec<Vec<(usize, T, u32)>>,
    top: usize,
}

impl<T: Clone + Num> Interval<T> {
    fn new(kind: Kind, lambda: &Partition, mu: &Partition, t: &T) -> Self {
        let nodes: Vec<Partition> = if mu.is_contained_in(lambda) {
            lambda.sub_diagrams().into_iter().filter(|nu| mu.is_contained_in(nu)).collect()
        } else {
            Vec::new()
        };
        let index: HashMap<&Partition, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let strips = nodes
            .iter()
            .map(|nu| {
                horizontal_strips(nu, lambda)
                    .into_iter()
                    .map(|outer| {
                        let coef = branch_coef(kind, &outer, nu, t);
                        let deg = outer.size() - nu.size();
                        (index[&outer], coef, deg)
                    })
                    .collect()
            })
            .collect();
        let top = index.get(lambda).copied().unwrap_or(usize::MAX);
        Interval { nodes, strips, top }
    }
}

fn powers<T: Clone + Num>(x: &T, max: u32) -> Vec<T> {
    let mut out = Vec::with_capacity(max as usize + 1);
    out.push(T::one());
    for i in 0..max as usize {
        out.push(out[i].clone() * x.clone());
    }
    out
}

/// Incremental evaluation of a skew polynomial as variables are appended:
/// states[ν] holds the skew polynomial ν/μ in the variables pushed so far.
struct Branching<T> {
    interval: Interval<T>,
    states: Vec<T>,
    max_deg: u32,
}

impl<T: Clone + Num> Branching<T> {
    fn new(kind: Kind, lambda: &Partition, mu: &Partition, t: T) -> Self {
        let interval = Interval::new(kind, lambda, mu, &t);
        let mut states = vec![T::zero(); interval.nodes.len()];
        if let Some(s) = states.first_mut() {
            // sub_diagrams lists μ first among the nodes containing it
            *s = T::one();
        }
        debug_assert!(interval.nodes.first().map_or(true, |n| n == mu));
        Branching { interval, states, max_deg: lambda.size().saturating_sub(mu.size()) }
    }

    fn push(&mut self, x: &T) {
        let xp = powers(x, self.max_deg);
        let mut next = vec![T::zero(); self.states.len()];
        for (c, strips) in self.states.iter().zip(&self.interval.strips) {
            if c.is_zero() {
                continue;
            }
            for (j, coef, deg) in strips {
                next[*j] = next[*j].clone() + c.clone() * coef.clone() * xp[*deg as usize].clone();
            }
        }
        self.states = next;
    }

    fn value(&self) -> T {
        self.states.get(self.interval.top).cloned().unwrap_or_else(T::zero)
    }
}

/// P_{λ/μ} or Q_{λ/μ} at a geometric specialization for every μ ⊆ λ at once,
/// with the same stopping rule and bounds as [`principal`]. Variables are
/// absorbed from the outside in: after each step, g[ν] is the skew polynomial
/// λ/ν in the variables absorbed so far.
pub fn principal_all_inner(kind: Kind, lambda: &Partition, spec: &Spec, t: &BigRational, tol: f64) -> Result<Vec<(Partition, HLValue)>> {
    spec.validate()?;
    let (start, mult) = match spec {
        Spec::Finite(xs) => {
            return lambda
                .sub_diagrams()
                .into_iter()
                .map(|mu| {
                    let v = eval_skew(kind, lambda, &mu, xs, t)?;
                    Ok((mu, HLValue::exact(v)))
                })
                .collect()
        }
        Spec::Geometric { start, mult } => (*start, *mult),
    };
    let tf = require_unit_interval(t)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let iv: Interval<f64> = Interval::new(kind, lambda, &Partition::empty(), &tf);
    let n = iv.nodes.len();
    let r = tf.powf(1.0 / mult as f64);
    let safety = (2.0 * r / (1.0 - r)).max(10.0);
    let mut g = vec![0.0; n];
    g[iv.top] = 1.0;
    let mut quiet = vec![0u32; n];
    let mut last_inc = vec![0.0; n];
    for i in 0..MAX_PRINCIPAL_VARS {
        let x = tf.powi((start + i as u32 / mult) as i32);
        let xp = powers(&x, lambda.size());
        let mut next = vec![0.0; n];
        for (nu, strips) in iv.strips.iter().enumerate() {
            next[nu] = strips.iter().map(|(j, coef, deg)| coef * xp[*deg as usize] * g[*j]).sum();
        }
        let mut done = true;
        for nu in 0..n {
            let inc = next[nu] - g[nu];
            last_inc[nu] = inc;
            if next[nu] > 0.0 && inc <= next[nu] * tol / 10.0 {
                quiet[nu] += 1;
            } else {
                quiet[nu] = 0;
            }
            done &= quiet[nu] >= 2;
        }
        g = next;
        if done || x == 0.0 {
            let steps = i as f64 + 1.0;
            return Ok(iv
                .nodes
                .into_iter()
                .zip(g.iter().zip(&last_inc))
                .map(|(mu, (&v, &inc))| (mu, HLValue::approx(v, safety * inc + v * ROUNDING * steps)))
                .collect());
        }
    }
    Err(Error::NonConvergence(format!("{kind:?}_{{{lambda}/μ}} at t = {}", arith::format_rational(t))))
}

fn check_t(t: &BigRational) -> Result<()> {
    if *t == -BigRational::one() {
        return Err(Error::InvalidInput("t = -1 makes the normalizing factor vanish".into()));
    }
    Ok(())
}

/// P_{λ/μ} or Q_{λ/μ} at finitely many rational variables, exactly.
pub fn eval_skew(kind: Kind, lambda: &Partition, mu: &Partition, vars: &[BigRational], t: &BigRational) -> Result<BigRational> {
    check_t(t)?;
    let mut b = Branching::new(kind, lambda, mu, t.clone());
    for x in vars {
        b.push(x);
    }
    Ok(b.value())
}

/// P_λ at finitely many rational variables, exactly.
pub fn eval_p(lambda: &Partition, vars: &[BigRational], t: &BigRational) -> Result<BigRational> {
    eval_skew(Kind::P, lambda, &Partition::empty(), vars, t)
}

pub const MAX_PRINCIPAL_VARS: usize = 20_000;

fn require_unit_interval(t: &BigRational) -> Result<f64> {
    if !t.is_positive() || *t >= BigRational::one() {
        return Err(Error::InvalidInput(format!("t = {} must lie in (0,1)", arith::format_rational(t))));
    }
    Ok(arith::to_f64(t))
}

/// Skew P or Q at a specialization. Finite specializations are exact; geometric
/// ones append variables until the relative increment stays below tol/10 for
/// two consecutive steps. Partial values are nondecreasing in the number of
/// variables, so the truncated value is a lower bound.
pub fn principal(kind: Kind, lambda: &Partition, mu: &Partition, spec: &Spec, t: &BigRational, tol: f64) -> Result<HLValue> {
    spec.validate()?;
    let (start, mult) = match spec {
        Spec::Finite(xs) => return Ok(HLValue::exact(eval_skew(kind, lambda, mu, xs, t)?)),
        Spec::Geometric { start, mult } => (*start, *mult),
    };
    let tf = require_unit_interval(t)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if !mu.is_contained_in(lambda) {
        return Ok(HLValue::exact(BigRational::zero()));
    }
    // the tail after a step is at most about r/(1-r) times that step's increment
    let r = tf.powf(1.0 / mult as f64);
    let safety = (2.0 * r / (1.0 - r)).max(10.0);
    let mut b = Branching::new(kind, lambda, mu, tf);
    let mut prev = b.value();
    let mut quiet_steps = 0;
    for i in 0..MAX_PRINCIPAL_VARS {
        let x = tf.powi((start + i as u32 / mult) as i32);
        b.push(&x);
        let v = b.value();
        let inc = v - prev;
        prev = v;
        if v > 0.0 && inc <= v * tol / 10.0 {
            quiet_steps += 1;
            if quiet_steps >= 2 {
                let bound = safety * inc + v * ROUNDING * (i as f64 + 1.0);
                return Ok(HLValue::approx(v, bound));
            }
        } else {
            quiet_steps = 0;
        }
        if x == 0.0 {
            break;
        }
    }
    Err(Error::NonConvergence(format!(
        "{kind:?}_{{{lambda}/{mu}}} at t = {}",
        arith::format_rational(t)
    )))
}

/// Bounds p_ℓ(spec) ≤ c·ρ^ℓ and evaluates p_ℓ.
struct PowerSums {
    spec: Spec,
    t: f64,
    c: f64,
    rho: f64,
}

impl PowerSums {
    fn new(spec: &Spec, t: f64) -> Self {
        let (c, rho) = match spec {
            Spec::Finite(xs) => {
                let max = xs.iter().map(arith::to_f64).fold(0.0, f64::max);
                (xs.len() as f64, max)
            }
            Spec::Geometric { start, mult } => (*mult as f64 / (1.0 - t), t.powi(*start as i32)),
        };
        PowerSums { spec: spec.clone(), t, c, rho }
    }

    fn is_zero(&self) -> bool {
        self.c == 0.0 || self.rho == 0.0
    }

    fn eval(&self, l: u32) -> f64 {
        match &self.spec {
            Spec::Finite(xs) => xs.iter().map(|x| arith::to_f64(x).powi(l as i32)).sum(),
            Spec::Geometric { start, mult } => {
                *mult as f64 * self.t.powi((l * start) as i32) / (1.0 - self.t.powi(l as i32))
            }
        }
    }
}

/// Π_t(A; B) = ∏ (1 - t x y)/(1 - x y) over x ∈ A, y ∈ B.
pub fn cauchy_kernel(a: &Spec, b: &Spec, t: &BigRational, tol: f64) -> Result<HLValue> {
    a.validate()?;
    b.validate()?;
    if let (Spec::Finite(xs), Spec::Finite(ys)) = (a, b) {
        let mut acc = BigRational::one();
        for x in xs {
            for y in ys {
                let xy = x * y;
                if xy >= BigRational::one() {
                    return Err(Error::Divergence(format!(
                        "x*y = {} is not below 1",
                        arith::format_rational(&xy)
                    )));
                }
                acc *= (BigRational::one() - t * &xy) / (BigRational::one() - xy);
            }
        }
        return Ok(HLValue::exact(acc));
    }
    let tf = require_unit_interval(t)?;
    let pa = PowerSums::new(a, tf);
    let pb = PowerSums::new(b, tf);
    if pa.is_zero() || pb.is_zero() {
        return Ok(HLValue::exact(BigRational::one()));
    }
    let r = pa.rho * pb.rho;
    if r >= 1.0 {
        return Err(Error::Divergence(format!("largest product of variables is {r}, not below 1")));
    }
    let cc = pa.c * pb.c;
    let mut sum = 0.0;
    for l in 1..=100_000u32 {
        sum += (1.0 - tf.powi(l as i32)) / l as f64 * pa.eval(l) * pb.eval(l);
        // Σ_{m > l} (1/m) c_A c_B r^m
        let tail = cc * r.powi(l as i32 + 1) / ((l as f64 + 1.0) * (1.0 - r));
        if tail < tol * 1e-3 || tail < sum * 1e-17 {
            let value = sum.exp();
            let bound = value * tail.exp_m1() + value * ROUNDING * (l as f64 + 1.0);
            return Ok(HLValue::approx(value, bound));
        }
    }
    Err(Error::NonConvergence("Cauchy kernel power-sum series".into()))
}

/// Π_t(1, t, …; t[k], t²[k], …), the normalizer of both measures.
pub fn measure_normalizer(k: u32, t: &BigRational, tol: f64) -> Result<HLValue> {
    cauchy_kernel(&Spec::geometric(0, 1), &Spec::geometric(1, k), t, tol)
}

/// Q_λ(1[k], t[k], …) P_λ(t, t², …) / Π_t(1, t, …; t[k], t²[k], …).
pub fn measure_prod(lambda: &Partition, k: u32, t: &BigRational, tol: f64) -> Result<HLValue> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let empty = Partition::empty();
    let q = principal(Kind::Q, lambda, &empty, &Spec::geometric(0, k), t, tol)?;
    let p = principal(Kind::P, lambda, &empty, &Spec::geometric(1, 1), t, tol)?;
    q.mul(&p).div(&measure_normalizer(k, t, tol)?)
}

/// Q_{λ1}(1,t,…) Q_{λ2/λ1}(1,t,…) ⋯ Q_{λk/λ(k-1)}(1,t,…) P_{λk}(t,t²,…) / Π_t(1,t,…; t[k],t²[k],…).
pub fn measure_joint(lambdas: &[Partition], t: &BigRational, tol: f64) -> Result<HLValue> {
    let k = lambdas.len() as u32;
    if k == 0 {
        return Err(Error::InvalidInput("need at least one partition".into()));
    }
    let empty = Partition::empty();
    let mut inner = &empty;
    for l in lambdas {
        if !inner.is_contained_in(l) {
            return Ok(HLValue::exact(BigRational::zero()));
        }
        inner = l;
    }
    let mut acc = HLValue::exact(BigRational::one());
    let mut inner = &empty;
    for l in lambdas {
        acc = acc.mul(&principal(Kind::Q, l, inner, &Spec::geometric(0, 1), t, tol)?);
        inner = l;
    }
    acc = acc.mul(&principal(Kind::P, inner, &empty, &Spec::geometric(1, 1), t, tol)?);
    acc.div(&measure_normalizer(k, t, tol)?)
}
