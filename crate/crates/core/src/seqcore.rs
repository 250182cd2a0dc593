//! Sequence evaluation contract and the built-in families.
//!
//! Everything is kept in the log domain: `log_quotient(p) = ln m_p` and
//! `mean_log(p) = ln(M_p) / p`, which stays finite where `ln M_p` itself would
//! overflow a double.

use crate::bigindex::BigIndex;
use crate::error::{Error, Result};
use crate::numeric::{self, Neumaier};
use crate::riesz::{k_level, q_level, DeltaSeq};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

const LN2: f64 = std::f64::consts::LN_2;
const E: f64 = std::f64::consts::E;

/// Sequence description as read from JSON configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Gevrey { alpha: f64 },
    MAlphaBeta { alpha: f64, beta: f64 },
    MZeroBeta { beta: f64 },
    MQ { q: f64 },
    ExampleA,
    ExampleB,
    ExampleRiesz,
    Table { log_quotients: Vec<f64> },
    Constructed { order: crate::proxord::OrderSpec, pmax: u64 },
}

impl FamilySpec {
    /// Parses `name[:p1[:p2]]`, e.g. `gevrey:1`, `m_alpha_beta:1:2`, `example_b`.
    pub fn parse_short(s: &str) -> Result<FamilySpec> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::InvalidParameter(format!("missing parameter {i} in '{s}'")))?
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number in '{s}'")))
        };
        let spec = match parts[0] {
            "gevrey" => FamilySpec::Gevrey { alpha: num(1)? },
            "m_alpha_beta" => FamilySpec::MAlphaBeta { alpha: num(1)?, beta: num(2)? },
            "m_zero_beta" => FamilySpec::MZeroBeta { beta: num(1)? },
            "m_q" => FamilySpec::MQ { q: num(1)? },
            "example_a" => FamilySpec::ExampleA,
            "example_b" => FamilySpec::ExampleB,
            "example_riesz" => FamilySpec::ExampleRiesz,
            other => return Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        };
        Ok(spec)
    }
}

/// Evaluation contract for a sequence given by its quotients.
pub trait QuotientSeq: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// `ln m_p`.
    fn log_quotient(&self, p: &BigIndex) -> f64;

    /// `ln(M_p) / p` for `p >= 1`; 0 at `p = 0`.
    fn mean_log(&self, p: &BigIndex) -> f64;

    /// `ln M_p` (may be infinite for huge `p`).
    fn log_value(&self, p: &BigIndex) -> f64 {
        if p.is_zero() {
            0.0
        } else {
            p.to_f64() * self.mean_log(p)
        }
    }

    /// `nu(t) = #{j : m_j <= t}`.
    fn count_below(&self, logt: f64) -> BigIndex {
        generic_count(self, logt)
    }

    /// Ordered sample indices reaching below `2^budget`.
    fn sample_schedule(&self, budget: u64) -> Vec<BigIndex> {
        smooth_schedule(budget, self.len())
    }

    fn default_budget(&self) -> u64 {
        20
    }

    /// Window boundaries in `x = log2 p`, ascending, all below `x_max`.
    fn cutoffs(&self, x_max: f64) -> Vec<f64> {
        geometric_cutoffs(x_max)
    }

    /// Number of defined quotients for finite tables.
    fn len(&self) -> Option<u64> {
        None
    }

    fn is_block_family(&self) -> bool {
        false
    }
}

/// Sample record with `alpha_p = ln m_p` and `beta_p = ln m_p - ln(M_p)/p`.
#[derive(Clone, Debug, Serialize)]
pub struct SamplePoint {
    pub p: BigIndex,
    pub log_m: f64,
    pub log_mean: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn log_m(seq: &dyn QuotientSeq, p: &BigIndex) -> f64 {
    seq.log_quotient(p)
}

#[allow(non_snake_case)]
pub fn log_M(seq: &dyn QuotientSeq, p: &BigIndex) -> f64 {
    seq.log_value(p)
}

pub fn alpha_beta(seq: &dyn QuotientSeq, p: &BigIndex) -> SamplePoint {
    let lm = seq.log_quotient(p);
    let mean = seq.mean_log(p);
    SamplePoint {
        p: p.clone(),
        log_m: lm,
        log_mean: mean,
        alpha: lm,
        beta: if p.is_zero() { lm } else { lm - mean },
    }
}

pub fn sample_schedule(seq: &dyn QuotientSeq, budget: u64) -> Vec<BigIndex> {
    seq.sample_schedule(budget.max(16))
}

fn tie_tol(logt: f64) -> f64 {
    1e-13 * logt.abs().max(1.0)
}

/// Galloping + bisection inversion of a nondecreasing quotient sequence.
/// Exact below `2^62`, 53 significant bits beyond.
pub fn generic_count<S: QuotientSeq + ?Sized>(seq: &S, logt: f64) -> BigIndex {
    let thr = logt + tie_tol(logt);
    let above = |p: &BigIndex| seq.log_quotient(p) > thr;
    if let Some(n) = seq.len() {
        let (mut lo, mut hi) = (0u64, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if above(&BigIndex::from_u64(mid)) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        return BigIndex::from_u64(lo);
    }
    if above(&BigIndex::zero()) {
        return BigIndex::zero();
    }
    if above(&BigIndex::one()) {
        return BigIndex::one();
    }
    // smallest e with m_{2^e} above the threshold
    let mut e_hi = 1u64;
    while !above(&BigIndex::pow2(e_hi)) {
        if e_hi > 1 << 40 {
            return BigIndex::pow2(e_hi);
        }
        e_hi *= 2;
    }
    let mut e_lo = e_hi / 2; // m_{2^e_lo} not above (or e_lo = 0)
    while e_hi - e_lo > 1 {
        let mid = e_lo + (e_hi - e_lo) / 2;
        if above(&BigIndex::pow2(mid)) {
            e_hi = mid;
        } else {
            e_lo = mid;
        }
    }
    // answer in (2^e_lo, 2^e_hi]
    if e_hi <= 62 {
        let (mut lo, mut hi) = ((1u64 << e_lo) + 1, 1u64 << e_hi);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if above(&BigIndex::from_u64(mid)) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        return BigIndex::from_u64(lo);
    }
    let sh = e_lo - 52;
    let (mut lo, mut hi) = ((1u64 << 52) + 1, 1u64 << 53);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if above(&BigIndex::mul_pow2(mid, sh)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    BigIndex::mul_pow2(lo, sh)
}

fn push_u64s(out: &mut Vec<BigIndex>, it: impl Iterator<Item = u64>) {
    out.extend(it.map(BigIndex::from_u64));
}

fn finish(mut v: Vec<BigIndex>) -> Vec<BigIndex> {
    v.sort();
    v.dedup();
    v
}

/// `1..=16`, then `2^(e + i/4)` for `4 <= e < budget`.
pub fn smooth_schedule(budget: u64, len: Option<u64>) -> Vec<BigIndex> {
    let mut out = Vec::new();
    if let Some(n) = len {
        if n <= 4097 {
            push_u64s(&mut out, 1..n);
            return out;
        }
    }
    push_u64s(&mut out, 1..=16);
    for e in 4..budget {
        for i in 0..4 {
            let p = if i == 0 { BigIndex::pow2(e) } else { BigIndex::floor_exp2(e as f64 + i as f64 / 4.0) };
            out.push(p);
        }
    }
    if let Some(n) = len {
        out.retain(|p| p.to_u64().map_or(false, |v| v < n));
    }
    finish(out)
}

/// `x_max * 2^(-i/2)` down to 2, ascending.
pub fn geometric_cutoffs(x_max: f64) -> Vec<f64> {
    let mut c = Vec::new();
    let mut x = x_max;
    while x >= 2.0 {
        c.push(x);
        x /= std::f64::consts::SQRT_2;
    }
    c.reverse();
    c.pop();
    c
}

// ---------------------------------------------------------------- gevrey

#[derive(Debug, Clone)]
pub struct Gevrey {
    pub alpha: f64,
}

impl QuotientSeq for Gevrey {
    fn name(&self) -> String {
        format!("gevrey({})", self.alpha)
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        self.alpha * p.ln_offset(1.0)
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        self.alpha * numeric::ln_factorial_mean(p)
    }
    fn log_value(&self, p: &BigIndex) -> f64 {
        self.alpha * numeric::ln_factorial(p)
    }
}

// ---------------------------------------------------------- alpha / beta

/// `m_p = (p+1)^alpha ln^beta(e+p+1)`; for `beta < 0` the initial dip is
/// replaced by the running maximum.
#[derive(Debug, Clone)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    // quotients below `pstar` are replaced by f(0)
    pstar: BigIndex,
    // (pstar f(0) - F(pstar)), split as a ratio-friendly pair
    plateau_excess_mean: f64,
}

impl AlphaBeta {
    pub fn new(alpha: f64, beta: f64) -> Self {
        let mut s = AlphaBeta { alpha, beta, pstar: BigIndex::zero(), plateau_excess_mean: 0.0 };
        if beta < 0.0 {
            s.pstar = s.find_pstar();
            if !s.pstar.is_zero() {
                let f0 = s.raw(&BigIndex::zero());
                s.plateau_excess_mean = f0 - s.raw_mean(&s.pstar);
            }
        }
        s
    }

    fn raw(&self, p: &BigIndex) -> f64 {
        let a = if self.alpha == 0.0 { 0.0 } else { self.alpha * p.ln_offset(1.0) };
        a + self.beta * p.ln_offset(E + 1.0).ln()
    }

    // F(p)/p with F(p) = sum_{k<p} f(k) = alpha ln p! + beta S(p)
    fn raw_mean(&self, p: &BigIndex) -> f64 {
        let a = if self.alpha == 0.0 { 0.0 } else { self.alpha * numeric::ln_factorial_mean(p) };
        a + self.beta * numeric::loglog_sum_mean(p)
    }

    fn raw_f(&self, x: f64) -> f64 {
        self.alpha * x.ln_1p() + self.beta * (E + 1.0 + x).ln().ln()
    }

    fn find_pstar(&self) -> BigIndex {
        let f0 = self.raw_f(0.0);
        if self.raw_f(1.0) >= f0 {
            return BigIndex::zero();
        }
        if self.alpha <= 0.0 {
            // never recovers; keep the whole sequence constant
            return BigIndex::pow2(1 << 40);
        }
        // f is decreasing then increasing; bisect on y = ln(p+1) past the minimum
        let g = |y: f64| self.alpha * y + self.beta * (E + y.exp()).ln().ln() - f0;
        let gy = |y: f64| {
            // ln(e + e^y) without overflow
            let l = if y > 700.0 { y + (E * (-y).exp()).ln_1p() } else { (E + y.exp()).ln() };
            self.alpha * y + self.beta * l.ln() - f0
        };
        let _ = g;
        let (mut lo, mut hi) = (1f64.ln_1p(), 1.0);
        while gy(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gy(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if hi < 43.0 {
            let mut p = (hi.exp() - 1.0).floor().max(1.0) as u64;
            while p > 1 && self.raw(&BigIndex::from_u64(p - 1)) >= f0 {
                p -= 1;
            }
            while self.raw(&BigIndex::from_u64(p)) < f0 {
                p += 1;
            }
            BigIndex::from_u64(p)
        } else {
            BigIndex::floor_exp(hi)
        }
    }

    /// Index from which the unmodified quotients are used.
    pub fn modification_end(&self) -> &BigIndex {
        &self.pstar
    }
}

impl QuotientSeq for AlphaBeta {
    fn name(&self) -> String {
        if self.alpha == 0.0 {
            format!("m_zero_beta({})", self.beta)
        } else {
            format!("m_alpha_beta({}, {})", self.alpha, self.beta)
        }
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        if p < &self.pstar {
            self.raw(&BigIndex::zero())
        } else {
            self.raw(p)
        }
    }
    fn default_budget(&self) -> u64 {
        1000
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        if p.is_zero() {
            return 0.0;
        }
        if self.pstar.is_zero() {
            return self.raw_mean(p);
        }
        let f0 = self.raw(&BigIndex::zero());
        if p <= &self.pstar {
            return f0;
        }
        self.pstar.ratio(p) * self.plateau_excess_mean + self.raw_mean(p)
    }
}

// ----------------------------------------------------------------- m_q

/// `M_p = q^(p^2)`, `m_p = q^(2p+1)`.
#[derive(Debug, Clone)]
pub struct MQ {
    pub q: f64,
}

impl QuotientSeq for MQ {
    fn name(&self) -> String {
        format!("m_q({})", self.q)
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        (2.0 * p.to_f64() + 1.0) * self.q.ln()
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        p.to_f64() * self.q.ln()
    }
    fn count_below(&self, logt: f64) -> BigIndex {
        let lq = self.q.ln();
        let x = (logt + tie_tol(logt)) / lq;
        if x < 1.0 {
            return BigIndex::zero();
        }
        BigIndex::from_u64(((x - 1.0) / 2.0).floor() as u64 + 1)
    }
}

// ----------------------------------------------------------- example A

/// Quotients `1,1,2,2,6,6,6,6`, then on `[2^e, 2^(e+1) - 1]` with
/// `e = 2^k + j` (`k >= 1`, `1 <= j <= 2^k`):
/// `m_p = 2^(2^k) 3 (2^(2^k)/3)^((j-1)/(2^k-1))`.
#[derive(Debug, Clone, Default)]
pub struct ExampleA;

const A_HEAD: [f64; 8] = [1.0, 1.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0];

impl ExampleA {
    /// `ln m` on the block `[2^e, 2^(e+1) - 1]`, `e >= 3`.
    pub fn block_log(e: u64) -> f64 {
        let k = 63 - (e - 1).leading_zeros() as u64;
        let j = e - (1u64 << k);
        let tk = (1u64 << k) as f64 * LN2; // valid while 2^k fits; e < 2^63
        let ln3 = 3f64.ln();
        tk + ln3 + ((j - 1) as f64 / ((1u64 << k) - 1) as f64) * (tk - ln3)
    }

    fn head_sum(n: usize) -> f64 {
        A_HEAD[..n].iter().map(|m| m.ln()).sum()
    }
}

impl QuotientSeq for ExampleA {
    fn name(&self) -> String {
        "example_a".into()
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(n) if n < 8 => A_HEAD[n as usize].ln(),
            _ => Self::block_log(p.floor_log2()),
        }
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        if p.is_zero() {
            return 0.0;
        }
        if let Some(n) = p.to_u64().filter(|&n| n <= 8) {
            return Self::head_sum(n as usize) / n as f64;
        }
        // indices < p: head, full blocks 3..E-1, partial block E from 2^E
        let big_e = p.floor_log2_minus(1);
        let (pm, pe) = p.split();
        let w = |e: u64| ((e as f64) - pe as f64).exp2() / pm;
        let mut acc = Neumaier::new();
        let lo = 3.max(big_e.saturating_sub(80));
        if lo == 3 {
            acc.add(Self::head_sum(8) / p.to_f64());
        }
        for e in lo..big_e {
            acc.add(w(e) * Self::block_log(e));
        }
        acc.add((1.0 - w(big_e)) * Self::block_log(big_e));
        acc.value()
    }
    fn count_below(&self, logt: f64) -> BigIndex {
        let thr = logt + tie_tol(logt);
        for n in 0..8u64 {
            if A_HEAD[n as usize].ln() > thr {
                return BigIndex::from_u64(n);
            }
        }
        // first block e >= 3 whose value exceeds thr
        let mut hi = 4u64;
        while Self::block_log(hi) <= thr {
            hi *= 2;
        }
        let mut lo = 3u64;
        if Self::block_log(lo) > thr {
            return BigIndex::pow2(3);
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if Self::block_log(mid) > thr {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        BigIndex::pow2(hi)
    }
    fn sample_schedule(&self, budget: u64) -> Vec<BigIndex> {
        let mut out = Vec::new();
        push_u64s(&mut out, 1..=16);
        for e in 4..budget {
            out.push(BigIndex::pow2(e));
            out.push(BigIndex::mul_pow2(3, e - 1));
            if e + 1 < budget {
                out.push(BigIndex::pow2(e + 1).checked_sub_u64(1).unwrap());
            }
        }
        finish(out)
    }
    fn default_budget(&self) -> u64 {
        (1 << 13) + 1
    }
    fn cutoffs(&self, x_max: f64) -> Vec<f64> {
        (1..63).map(|k| ((1u64 << k) + 1) as f64).take_while(|&c| c < x_max).collect()
    }
    fn is_block_family(&self) -> bool {
        true
    }
}

// ----------------------------------------------------------- example B

/// `m_0 = m_1 = 1`, `m_2 = 2`; on `I(a) = (2^a, 2^(a+1)]` with `a = 2^k + j`,
/// `m` is `4` (for `j <= k-1`) or `2^tau_k` (otherwise) times its value on the
/// previous block, `tau_k = (2^k - 2k)/(2^k - k)`.
#[derive(Debug, Clone, Default)]
pub struct ExampleB;

impl ExampleB {
    pub fn tau(k: u64) -> f64 {
        let t = (1u64 << k) as f64;
        (t - 2.0 * k as f64) / (t - k as f64)
    }

    /// `log2 m` on `I(a)`, `a >= 1`.
    pub fn block_log2(a: u64) -> f64 {
        let k = 63 - a.leading_zeros() as u64;
        let j = a - (1u64 << k);
        (1u64 << k) as f64 + 2.0 * (j + 1).min(k) as f64 + Self::tau(k) * (j + 1).saturating_sub(k) as f64
    }

    fn block_log(a: u64) -> f64 {
        Self::block_log2(a) * LN2
    }
}

impl QuotientSeq for ExampleB {
    fn name(&self) -> String {
        "example_b".into()
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(0) | Some(1) => 0.0,
            Some(2) => LN2,
            _ => Self::block_log(p.floor_log2_minus(1)),
        }
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(0) | Some(1) | Some(2) => return 0.0,
            Some(3) => return LN2 / 3.0,
            _ => {}
        }
        // last index p-1 lies in I(big_a); partial count p - 1 - 2^big_a
        let big_a = p.floor_log2_minus(2);
        let (pm, pe) = p.split();
        let w = |e: u64| ((e as f64) - pe as f64).exp2() / pm;
        let inv = 1.0 / p.to_f64();
        let mut acc = Neumaier::new();
        let lo = 1.max(big_a.saturating_sub(80));
        if lo == 1 {
            acc.add(LN2 * inv);
        }
        for a in lo..big_a {
            acc.add(w(a) * Self::block_log(a));
        }
        acc.add((1.0 - inv - w(big_a)) * Self::block_log(big_a));
        acc.value()
    }
    fn count_below(&self, logt: f64) -> BigIndex {
        let thr = logt + tie_tol(logt);
        if thr < 0.0 {
            return BigIndex::zero();
        }
        if thr < LN2 {
            return BigIndex::from_u64(2);
        }
        let mut hi = 2u64;
        while Self::block_log(hi) <= thr {
            hi *= 2;
        }
        let mut lo = 1u64;
        if Self::block_log(lo) > thr {
            return BigIndex::from_u64(3);
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if Self::block_log(mid) > thr {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // first index of I(hi) is 2^hi + 1
        BigIndex::pow2(hi).add_u64(1)
    }
    fn sample_schedule(&self, budget: u64) -> Vec<BigIndex> {
        let mut out = Vec::new();
        push_u64s(&mut out, 1..=16);
        for a in 4..budget {
            out.push(BigIndex::pow2(a));
            out.push(BigIndex::mul_pow2(3, a - 1));
        }
        finish(out)
    }
    fn default_budget(&self) -> u64 {
        1 << 17
    }
    fn cutoffs(&self, x_max: f64) -> Vec<f64> {
        (1..63).map(|k| (1u64 << k) as f64 + 0.25).take_while(|&c| c < x_max).collect()
    }
    fn is_block_family(&self) -> bool {
        true
    }
}

// ------------------------------------------------------- Riesz example

/// `m_p = exp(sum_{k<=p} delta_k / k)` with the two-level weights.
#[derive(Debug, Clone)]
pub struct ExampleRiesz {
    pub delta: DeltaSeq,
}

impl Default for ExampleRiesz {
    fn default() -> Self {
        ExampleRiesz { delta: DeltaSeq::two_valued() }
    }
}

impl QuotientSeq for ExampleRiesz {
    fn name(&self) -> String {
        "example_riesz".into()
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        self.delta.prefix_sum(p)
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        if p.is_zero() {
            return 0.0;
        }
        // ln M_p = p S(p) - sum_{k<=p} delta_k
        self.delta.prefix_sum(p) - self.delta.count_mean(p)
    }
    fn sample_schedule(&self, budget: u64) -> Vec<BigIndex> {
        let mut out = Vec::new();
        push_u64s(&mut out, 1..=64);
        for e in 7..budget.min(200) {
            out.push(BigIndex::pow2(e));
        }
        let mut n = 0u32;
        while 3u64.pow(n) < budget && n < crate::riesz::MAX_LEVEL {
            let a = 3u64.pow(n);
            let b = 2 * a;
            let c = 3 * a;
            for (lo, hi) in [(a, b), (b, c)] {
                for i in 0..8 {
                    let e = lo + (hi - lo) * i / 8;
                    if e < budget {
                        out.push(BigIndex::pow2(e));
                    }
                }
            }
            if b < budget {
                out.push(q_level(n));
            }
            out.push(k_level(n));
            n += 1;
        }
        finish(out)
    }
    fn default_budget(&self) -> u64 {
        2 * 3u64.pow(20) + 1
    }
    fn cutoffs(&self, x_max: f64) -> Vec<f64> {
        (1..40u32).map(|n| 3f64.powi(n as i32)).take_while(|&c| c < x_max).collect()
    }
    fn is_block_family(&self) -> bool {
        true
    }
}

// --------------------------------------------------------------- table

/// Finite sequence given by its log-quotients.
#[derive(Debug, Clone)]
pub struct TableSeq {
    label: String,
    quotients: Vec<f64>,
    prefix: Vec<f64>,
}

impl TableSeq {
    pub fn new(label: impl Into<String>, quotients: Vec<f64>) -> Result<Self> {
        if quotients.is_empty() {
            return Err(Error::InvalidParameter("table must be nonempty".into()));
        }
        if quotients.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidParameter("table entries must be finite".into()));
        }
        let mut prefix = Vec::with_capacity(quotients.len() + 1);
        let mut acc = Neumaier::new();
        prefix.push(0.0);
        for q in &quotients {
            acc.add(*q);
            prefix.push(acc.value());
        }
        Ok(TableSeq { label: label.into(), quotients, prefix })
    }

    /// Builds from tabulated `ln M_0 = 0, ln M_1, ..., ln M_n`.
    pub fn from_log_values(label: impl Into<String>, log_values: &[f64]) -> Result<Self> {
        let q: Vec<f64> = log_values.windows(2).map(|w| w[1] - w[0]).collect();
        let mut t = Self::new(label, q)?;
        t.prefix = log_values.to_vec();
        Ok(t)
    }

    pub fn quotients(&self) -> &[f64] {
        &self.quotients
    }

    pub fn log_values(&self) -> &[f64] {
        &self.prefix
    }
}

impl QuotientSeq for TableSeq {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(n) if (n as usize) < self.quotients.len() => self.quotients[n as usize],
            _ => f64::NAN,
        }
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(0) => 0.0,
            Some(n) if (n as usize) < self.prefix.len() => self.prefix[n as usize] / n as f64,
            _ => f64::NAN,
        }
    }
    fn log_value(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(n) if (n as usize) < self.prefix.len() => self.prefix[n as usize],
            _ => f64::NAN,
        }
    }
    fn count_below(&self, logt: f64) -> BigIndex {
        let thr = logt + tie_tol(logt);
        BigIndex::from_u64(self.quotients.iter().filter(|&&q| q <= thr).count() as u64)
    }
    fn len(&self) -> Option<u64> {
        Some(self.quotients.len() as u64)
    }
    fn default_budget(&self) -> u64 {
        64 - (self.quotients.len() as u64).leading_zeros() as u64
    }
}

/// Builds the evaluator for a family description.
pub fn make_family(spec: &FamilySpec) -> Result<Arc<dyn QuotientSeq>> {
    let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
    let fin = |x: f64| x.is_finite();
    Ok(match spec {
        FamilySpec::Gevrey { alpha } => {
            if !(fin(*alpha) && *alpha > 0.0) {
                return bad("gevrey needs alpha > 0");
            }
            Arc::new(Gevrey { alpha: *alpha })
        }
        FamilySpec::MAlphaBeta { alpha, beta } => {
            if !(fin(*alpha) && *alpha > 0.0 && fin(*beta)) {
                return bad("m_alpha_beta needs alpha > 0 and finite beta");
            }
            Arc::new(AlphaBeta::new(*alpha, *beta))
        }
        FamilySpec::MZeroBeta { beta } => {
            if !(fin(*beta) && *beta > 0.0) {
                return bad("m_zero_beta needs beta > 0");
            }
            Arc::new(AlphaBeta::new(0.0, *beta))
        }
        FamilySpec::MQ { q } => {
            if !(fin(*q) && *q > 1.0) {
                return bad("m_q needs q > 1");
            }
            Arc::new(MQ { q: *q })
        }
        FamilySpec::ExampleA => Arc::new(ExampleA),
        FamilySpec::ExampleB => Arc::new(ExampleB),
        FamilySpec::ExampleRiesz => Arc::new(ExampleRiesz::default()),
        FamilySpec::Table { log_quotients } => Arc::new(TableSeq::new("table", log_quotients.clone())?),
        FamilySpec::Constructed { order, pmax } => {
            let o = crate::proxord::make_order(order)?;
            let v = crate::construct::make_axis_v(&o)?;
            Arc::new(crate::construct::build_mv_sequence(&v, *pmax)?.seq)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(n: u64) -> BigIndex {
        BigIndex::from_u64(n)
    }

    fn brute_log_m(seq: &dyn QuotientSeq, n: u64) -> Vec<f64> {
        (0..n).map(|k| seq.log_quotient(&b(k))).collect()
    }

    // independent element-wise construction of example_a from its definition
    fn example_a_oracle(n: u64) -> Vec<f64> {
        let mut v: Vec<f64> = A_HEAD.iter().map(|x| x.ln()).collect();
        let mut k = 1u32;
        while (v.len() as u64) < n {
            let tk = 2f64.powi(1 << k);
            for j in 1..=(1u64 << k) {
                let m = tk * 3.0 * (tk / 3.0).powf((j - 1) as f64 / ((1u64 << k) - 1) as f64);
                let start = 1u64 << ((1u64 << k) + j);
                for _ in start..2 * start {
                    v.push(m.ln());
                    if v.len() as u64 >= n {
                        return v;
                    }
                }
            }
            k += 1;
        }
        v
    }

    // independent element-wise construction of example_b, recursive definition
    fn example_b_oracle(n: u64) -> Vec<f64> {
        let mut m = vec![1.0f64, 1.0, 2.0];
        let mut k = 0u32;
        'outer: loop {
            let tk = 2u64.pow(k);
            let tau = (tk as f64 - 2.0 * k as f64) / (tk as f64 - k as f64);
            for j in 0..tk {
                let base = 1u64 << (tk + j);
                let factor = if (j as i64) <= k as i64 - 1 { 4.0 } else { 2f64.powf(tau) };
                let v = factor * m[base as usize];
                for _p in base + 1..=2 * base {
                    m.push(v);
                    if m.len() as u64 >= n {
                        break 'outer;
                    }
                }
            }
            k += 1;
        }
        m.iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn spot_values() {
        assert!((Gevrey { alpha: 1.0 }.log_quotient(&b(3)) - 4f64.ln()).abs() < 1e-15);
        assert!((Gevrey { alpha: 2.0 }.log_quotient(&b(9)) - 2.0 * 10f64.ln()).abs() < 1e-14);
        assert!((MQ { q: 2.0 }.log_quotient(&b(5)) - 11.0 * LN2).abs() < 1e-14);
        assert!((ExampleA.log_quotient(&b(8)) - 12f64.ln()).abs() < 1e-14);
        assert!((ExampleA.log_quotient(&b(32)) - 48f64.ln()).abs() < 1e-14);
        assert!((ExampleRiesz::default().log_quotient(&b(4)) - 4.75).abs() < 1e-14);
        assert!((Gevrey { alpha: 1.0 }.log_value(&b(4)) - 24f64.ln()).abs() < 1e-14);
        assert_eq!(ExampleB.log_quotient(&b(3)), 4f64.ln());
        assert_eq!(ExampleB.log_quotient(&b(16)), 16f64.ln());
        assert!((ExampleB.log_quotient(&b(1 << 6)) - 256f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn m_q_matches_direct_division() {
        let s = MQ { q: 2.0 };
        for p in 0..=50u64 {
            let direct = ((p + 1) * (p + 1) - p * p) as f64 * LN2;
            assert!((s.log_quotient(&b(p)) - direct).abs() < 1e-12);
            assert!((s.log_value(&b(p)) - (p * p) as f64 * LN2).abs() < 1e-9);
        }
    }

    #[test]
    fn example_a_matches_oracle() {
        let n = 1 << 13;
        let want = example_a_oracle(n);
        let got = brute_log_m(&ExampleA, n);
        for p in 0..n as usize {
            assert!((want[p] - got[p]).abs() < 1e-12, "p={p}");
        }
        let mut acc = Neumaier::new();
        for p in 0..n as usize {
            let lv = ExampleA.log_value(&b(p as u64));
            assert!((lv - acc.value()).abs() < 1e-9 * acc.value().abs().max(1.0), "p={p}");
            acc.add(want[p]);
        }
    }

    #[test]
    fn example_b_matches_oracle() {
        let n = 1 << 13;
        let want = example_b_oracle(n);
        let got = brute_log_m(&ExampleB, n);
        for p in 0..n as usize {
            assert!((want[p] - got[p]).abs() < 1e-12, "p={p} want={} got={}", want[p], got[p]);
        }
        let mut acc = Neumaier::new();
        for p in 0..n as usize {
            let lv = ExampleB.log_value(&b(p as u64));
            assert!((lv - acc.value()).abs() < 1e-9 * acc.value().abs().max(1.0), "p={p}");
            acc.add(want[p]);
        }
    }

    #[test]
    fn example_b_anchors() {
        for k in 1..8u64 {
            let a = 1u64 << k;
            assert!((ExampleB::block_log2(a - 1) - a as f64).abs() < 1e-12);
            if k >= 2 {
                assert!((ExampleB::block_log2(a + k - 1) - (a + 2 * k) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn riesz_matches_oracle() {
        let s = ExampleRiesz::default();
        let d = DeltaSeq::two_valued();
        let mut lm = Neumaier::new();
        let mut lv = Neumaier::new();
        for p in 0..(1u64 << 13) {
            if p > 0 {
                lm.add(d.delta(&b(p)) / p as f64);
            }
            let got_v = s.log_value(&b(p));
            assert!((got_v - lv.value()).abs() < 1e-9 * lv.value().abs().max(1.0), "p={p}");
            assert!((s.log_quotient(&b(p)) - lm.value()).abs() < 1e-12);
            lv.add(lm.value());
        }
    }

    #[test]
    fn prefix_identity_all_families() {
        let fams: Vec<Arc<dyn QuotientSeq>> = vec![
            Arc::new(Gevrey { alpha: 1.5 }),
            Arc::new(AlphaBeta::new(1.0, 2.0)),
            Arc::new(AlphaBeta::new(0.5, -3.0)),
            Arc::new(AlphaBeta::new(0.0, 1.0)),
            Arc::new(MQ { q: 1.5 }),
        ];
        for f in fams {
            let mut acc = Neumaier::new();
            for p in 0..=10_000u64 {
                let lv = f.log_value(&b(p));
                assert!(
                    (lv - acc.value()).abs() <= 1e-9 * acc.value().abs().max(1.0),
                    "{} p={p} {} vs {}",
                    f.name(),
                    lv,
                    acc.value()
                );
                acc.add(f.log_quotient(&b(p)));
            }
        }
    }

    #[test]
    fn alpha_beta_large_p_matches_direct() {
        let f = AlphaBeta::new(1.0, 2.0);
        let n = 300_000u64;
        let mut acc = Neumaier::new();
        for p in 0..n {
            acc.add(f.log_quotient(&b(p)));
        }
        let got = f.mean_log(&b(n));
        assert!((got - acc.value() / n as f64).abs() < 1e-11);
    }

    #[test]
    fn negative_beta_is_log_convex() {
        let f = AlphaBeta::new(0.5, -3.0);
        assert!(!f.modification_end().is_zero());
        let v = brute_log_m(&f, 5000);
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn beta_identity() {
        for f in [&Gevrey { alpha: 1.0 } as &dyn QuotientSeq, &ExampleA, &ExampleB] {
            let mut acc = Neumaier::new();
            for p in 0..=10_000u64 {
                let sp = alpha_beta(f, &b(p));
                assert!((sp.alpha - (acc.value() + sp.beta)).abs() < 1e-9, "{} p={p}", f.name());
                acc.add(sp.beta / (p + 1) as f64);
            }
        }
        let sp = alpha_beta(&Gevrey { alpha: 1.0 }, &b(4));
        assert!((sp.beta - (5f64 / 24f64.powf(0.25)).ln()).abs() < 1e-14);
        let sp = alpha_beta(&Gevrey { alpha: 1.0 }, &b(100_000));
        assert!((sp.beta - 1.0).abs() < 5e-3);
    }

    #[test]
    fn counting_matches_enumeration() {
        let fams: Vec<Arc<dyn QuotientSeq>> = vec![
            Arc::new(Gevrey { alpha: 1.0 }),
            Arc::new(ExampleA),
            Arc::new(ExampleB),
            Arc::new(ExampleRiesz::default()),
            Arc::new(MQ { q: 2.0 }),
        ];
        for f in fams {
            let v = brute_log_m(f.as_ref(), 1 << 13);
            for &lt in &[0.5f64, 1.0, 2.5, 4.0, 7.3, 9.0] {
                let want = v.iter().filter(|&&x| x <= lt + 1e-12).count() as u64;
                if want < (1 << 13) {
                    assert_eq!(f.count_below(lt).to_u64(), Some(want), "{} lt={lt}", f.name());
                }
            }
            // ties are included
            let n3 = f.count_below(v[3]).to_u64().unwrap();
            assert!(n3 >= 4);
        }
        assert_eq!(Gevrey { alpha: 1.0 }.count_below(3.5f64.ln()).to_u64(), Some(3));
    }

    #[test]
    fn schedules() {
        let s = Gevrey { alpha: 1.0 }.sample_schedule(16);
        for e in 0..16 {
            assert!(s.contains(&BigIndex::pow2(e)));
        }
        assert!(s.last().unwrap() < &BigIndex::pow2(16));
        let a = ExampleA.sample_schedule(32);
        for k in 1..=4u64 {
            for j in 1..=(1u64 << k) {
                let e = (1u64 << k) + j;
                if e < 32 {
                    assert!(a.contains(&BigIndex::pow2(e)));
                }
            }
        }
        let r = ExampleRiesz::default().sample_schedule(55);
        for n in 0..=3 {
            assert!(r.contains(&k_level(n)));
            assert!(r.contains(&q_level(n)));
        }
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spec_json_round_trip() {
        let s: FamilySpec = serde_json::from_str(r#"{"family":"gevrey","alpha":1.0}"#).unwrap();
        assert_eq!(s, FamilySpec::Gevrey { alpha: 1.0 });
        let s: FamilySpec = serde_json::from_str(r#"{"family":"example_riesz"}"#).unwrap();
        assert_eq!(s, FamilySpec::ExampleRiesz);
        let s: FamilySpec = serde_json::from_str(r#"{"family":"table","log_quotients":[0.0,0.69]}"#).unwrap();
        assert!(matches!(s, FamilySpec::Table { .. }));
        assert!(make_family(&FamilySpec::Gevrey { alpha: -1.0 }).is_err());
        assert!(make_family(&FamilySpec::Table { log_quotients: vec![] }).is_err());
        assert_eq!(FamilySpec::parse_short("m_alpha_beta:1:2").unwrap(), FamilySpec::MAlphaBeta { alpha: 1.0, beta: 2.0 });
    }
}
