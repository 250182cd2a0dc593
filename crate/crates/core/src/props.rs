//! Checkers for (lc), (mg), (snq), quotient equivalence, almost-increase and
//! the growth indices.

use crate::bigindex::BigIndex;
use crate::envelope::{EnvelopeEstimate, Real, Trend};
use crate::error::{Error, Result};
use crate::seqcore::QuotientSeq;
use serde::Serialize;
use std::collections::BTreeMap;

pub const SNQ_MARGIN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub label: String,
    pub index: String,
    pub value: Real,
}

/// Outcome of a property check with its supporting data.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub constants: BTreeMap<String, Real>,
    pub witnesses: Vec<Witness>,
    /// log2 of the largest sampled index (or the largest log t for t-grids).
    pub horizon: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Verdict {
    pub fn new(status: Status, horizon: f64) -> Self {
        Verdict { status, constants: BTreeMap::new(), witnesses: Vec::new(), horizon, note: String::new() }
    }
    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.constants.insert(key.to_string(), Real(v));
        self
    }
    pub fn witness(mut self, label: &str, index: impl ToString, value: f64) -> Self {
        self.witnesses.push(Witness { label: label.to_string(), index: index.to_string(), value: Real(value) });
        self
    }
    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.note = s.into();
        self
    }
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
    pub fn get(&self, key: &str) -> f64 {
        self.constants.get(key).map_or(f64::NAN, |r| r.0)
    }
}

/// Schedule points `p >= 1` with `k p` still inside the sequence.
pub fn usable_schedule(seq: &dyn QuotientSeq, budget: u64, k: u64) -> Vec<BigIndex> {
    let s = seq.sample_schedule(budget.max(16));
    match seq.len() {
        Some(n) => s.into_iter().filter(|p| p.to_u64().map_or(false, |v| v >= 1 && v * k < n)).collect(),
        None => s.into_iter().filter(|p| !p.is_zero()).collect(),
    }
}

fn horizon_of(ps: &[BigIndex]) -> f64 {
    ps.last().map_or(0.0, |p| p.log2())
}

fn tol(a: f64) -> f64 {
    1e-12 * a.abs().max(1.0)
}

/// (lc): quotients nondecreasing on all indices below 4096 and across
/// consecutive schedule points.
pub fn check_lc(seq: &dyn QuotientSeq, budget: u64) -> Verdict {
    let limit = seq.len().unwrap_or(u64::MAX).min(4096);
    let mut best = (f64::NEG_INFINITY, String::new());
    let mut prev = seq.log_quotient(&BigIndex::zero());
    for p in 1..limit {
        let cur = seq.log_quotient(&BigIndex::from_u64(p));
        if cur < prev - tol(prev) {
            return Verdict::new(Status::Fail, (p as f64).log2())
                .witness("decrease m_p < m_{p-1}", p, (cur - prev).exp());
        }
        if cur - prev >= best.0 {
            best = (cur - prev, (p - 1).to_string());
        }
        prev = cur;
    }
    let sched = usable_schedule(seq, budget, 1);
    let vals: Vec<f64> = sched.iter().map(|p| seq.log_quotient(p)).collect();
    for i in 1..sched.len() {
        if vals[i] < vals[i - 1] - tol(vals[i - 1]) {
            return Verdict::new(Status::Fail, sched[i].log2())
                .witness("decrease between schedule points", &sched[i], (vals[i] - vals[i - 1]).exp());
        }
        let adjacent = sched[i].bits() <= 64 && sched[i].to_u64().unwrap() == sched[i - 1].to_u64().unwrap() + 1;
        if (adjacent || seq.is_block_family()) && vals[i] - vals[i - 1] >= best.0 {
            best = (vals[i] - vals[i - 1], sched[i - 1].to_string());
        }
    }
    Verdict::new(Status::Pass, horizon_of(&sched))
        .with("max_step_ratio", best.0.exp())
        .witness("largest m_{p+1}/m_p (last occurrence)", best.1, best.0.exp())
}

fn ratio_stream(seq: &dyn QuotientSeq, ps: &[BigIndex], lambda: f64) -> Vec<(BigIndex, f64)> {
    ps.iter()
        .map(|p| {
            let q = p.mul_floor(lambda);
            (p.clone(), seq.log_quotient(&q) - seq.log_quotient(p))
        })
        .collect()
}

/// Envelope of `m_{floor(lambda p)} / m_p`.
pub fn ratio_envelope(seq: &dyn QuotientSeq, budget: u64, lambda: f64) -> EnvelopeEstimate {
    let k = lambda.ceil().max(1.0) as u64;
    let ps = usable_schedule(seq, budget, k);
    let pts = ratio_stream(seq, &ps, lambda);
    let x_max = horizon_of(&ps);
    EnvelopeEstimate::build(&format!("m_[{lambda}p]/m_p"), &pts, &seq.cutoffs(x_max), true)
}

/// (mg) through `sup m_{2p}/m_p < inf`.
pub fn check_mg(seq: &dyn QuotientSeq, budget: u64) -> Verdict {
    let env = ratio_envelope(seq, budget, 2.0);
    let ps = usable_schedule(seq, budget, 2);
    // pair constant: ln A >= (ln M_{2p} - 2 ln M_p) / (2p) = mean(2p) - mean(p)
    let log_a = ps
        .iter()
        .map(|p| seq.mean_log(&p.mul_u64(2)) - seq.mean_log(p))
        .fold(0.0f64, f64::max);
    // decreasing window suprema bound the ratio by the sampled maximum
    let status = match env.sup_trend {
        t if t.settled() => Status::Pass,
        Trend::DivergingDown => Status::Pass,
        Trend::DivergingUp => Status::Fail,
        _ => Status::Inconclusive,
    };
    let sup = if env.sup_trend == Trend::DivergingDown { env.global_sup.0 } else { env.global_sup.0.max(env.limsup.0) };
    let mut v = Verdict::new(status, env.horizon)
        .with("sup_ratio", if status == Status::Fail { f64::INFINITY } else { sup })
        .with("limsup_ratio", env.limsup.0)
        .with("liminf_ratio", env.liminf.0)
        .with("A", log_a.exp());
    if let Some(p) = &env.argmax {
        v = v.witness("argmax m_2p/m_p", p, env.global_sup.0);
    }
    if status == Status::Fail {
        v = v.note(format!("window suprema diverge: {:?}", last3(&env.window_sup)));
    }
    v
}

fn last3(v: &[Real]) -> Vec<f64> {
    v.iter().rev().take(3).rev().map(|r| r.0).collect()
}

/// (mg) through `sup m_p / M_p^{1/p} < inf`, i.e. bounded `beta_p`.
pub fn check_mg_beta(seq: &dyn QuotientSeq, budget: u64) -> Verdict {
    let ps = usable_schedule(seq, budget, 1);
    let pts: Vec<(BigIndex, f64)> = ps.iter().map(|p| (p.clone(), seq.log_quotient(p) - seq.mean_log(p))).collect();
    let env = EnvelopeEstimate::build("beta_p", &pts, &seq.cutoffs(horizon_of(&ps)), true);
    let status = match env.sup_trend {
        t if t.settled() => Status::Pass,
        Trend::Oscillating if !env.diverging => Status::Pass,
        Trend::DivergingUp => Status::Fail,
        _ => Status::Inconclusive,
    };
    Verdict::new(status, env.horizon)
        .with("sup_m_over_root", env.global_sup.0.max(env.limsup.0))
        .with("limsup_m_over_root", env.limsup.0)
}

/// Aitken limit of the last three window values when they decrease and contract.
fn decreasing_limit(ws: &[Real]) -> Option<f64> {
    let n = ws.len();
    if n < 3 {
        return None;
    }
    let (a, b, c) = (ws[n - 3].0.ln(), ws[n - 2].0.ln(), ws[n - 1].0.ln());
    let (d1, d2) = (b - a, c - b);
    if !(d1 < 0.0 && d2 < 0.0 && d2 > d1) {
        return None;
    }
    Some((c - d2 * d2 / (d2 - d1)).exp())
}

/// Limit of `r(x) = r_inf + c / x` through the infima of the last two windows,
/// each placed at its right end.
fn inverse_x_limit(env: &EnvelopeEstimate) -> Option<f64> {
    let n = env.window_inf.len();
    if n < 3 || env.cutoffs.len() != n {
        return None;
    }
    let (x1, x2) = (env.cutoffs[n - 1], env.horizon);
    let (r1, r2) = (env.window_inf[n - 2].0.ln(), env.window_inf[n - 1].0.ln());
    if !(x2 > x1 && x1 > 0.0) {
        return None;
    }
    Some(((x2 * r2 - x1 * r1) / (x2 - x1)).exp())
}

/// (snq) through `liminf m_{kp}/m_p > 1`, trying `k` in {2, 4, 8} unless given.
pub fn check_snq(seq: &dyn QuotientSeq, budget: u64, k: Option<u64>) -> Verdict {
    let ks: Vec<u64> = k.map_or(vec![2, 4, 8], |k| vec![k]);
    let mut fails = Vec::new();
    let mut horizon = 0.0;
    let mut any_inconclusive = false;
    for &k in &ks {
        let env = ratio_envelope(seq, budget, k as f64);
        horizon = env.horizon;
        // ratios of an lc sequence stay >= 1, so a falling trend is extrapolated
        let li = if env.inf_trend == Trend::DivergingDown {
            inverse_x_limit(&env).unwrap_or(env.liminf.0)
        } else {
            decreasing_limit(&env.window_inf).map_or(env.liminf.0, |l| l.min(env.liminf.0))
        };
        let recent = env.window_inf.iter().rev().take(3).map(|r| r.0).fold(f64::INFINITY, f64::min);
        let status = match env.inf_trend {
            Trend::DivergingUp => Status::Pass,
            t if t.settled() && li > 1.0 + SNQ_MARGIN => Status::Pass,
            t if t.settled() => Status::Fail,
            Trend::DivergingDown if li > 1.0 + SNQ_MARGIN => Status::Pass,
            Trend::DivergingDown => Status::Fail,
            Trend::Oscillating if recent > 1.0 + SNQ_MARGIN => Status::Pass,
            _ => Status::Inconclusive,
        };
        match status {
            Status::Pass => {
                return Verdict::new(Status::Pass, env.horizon)
                    .with("k", k as f64)
                    .with("liminf_ratio", li)
                    .with("tail_inf_ratio", env.tail_inf.last().map_or(f64::NAN, |r| r.0));
            }
            Status::Fail => fails.push((k, li, env.argmin.clone())),
            Status::Inconclusive => any_inconclusive = true,
        }
    }
    if any_inconclusive || fails.is_empty() {
        return Verdict::new(Status::Inconclusive, horizon).note("ratio infima have not settled");
    }
    let mut v = Verdict::new(Status::Fail, horizon).note("liminf m_kp/m_p extrapolates to <= 1 + margin for every k");
    for (k, li, arg) in fails {
        v = v.with(&format!("liminf_ratio_k{k}"), li);
        if let Some(p) = arg {
            v = v.witness(&format!("argmin m_{k}p/m_p"), p, li);
        }
    }
    v
}

/// Joint schedule of two sequences, restricted to indices both define.
fn joint_schedule(a: &dyn QuotientSeq, b: &dyn QuotientSeq, budget: u64) -> Vec<BigIndex> {
    let mut s = usable_schedule(a, budget, 1);
    s.extend(usable_schedule(b, budget.min(b.default_budget().max(16)), 1));
    if let Some(n) = a.len().min(b.len()).or(a.len()).or(b.len()) {
        let n = a.len().unwrap_or(n).min(b.len().unwrap_or(n));
        s.retain(|p| p.to_u64().map_or(false, |v| v < n));
    }
    s.sort();
    s.dedup();
    s
}

/// Quotient equivalence `c <= m_p / l_p <= d`.
pub fn check_equiv_quotients(a: &dyn QuotientSeq, b: &dyn QuotientSeq, budget: u64) -> Verdict {
    let ps = joint_schedule(a, b, budget);
    let pts: Vec<(BigIndex, f64)> = ps.iter().map(|p| (p.clone(), a.log_quotient(p) - b.log_quotient(p))).collect();
    let env = EnvelopeEstimate::build("m_p/l_p", &pts, &a.cutoffs(horizon_of(&ps)), true);
    let bounded = |t: Trend| !t.diverging() && t != Trend::Insufficient;
    let status = if env.inf_trend.diverging() || env.sup_trend.diverging() {
        Status::Fail
    } else if bounded(env.inf_trend) && bounded(env.sup_trend) {
        Status::Pass
    } else {
        Status::Inconclusive
    };
    let mut v = Verdict::new(status, env.horizon).with("c", env.global_inf.0).with("d", env.global_sup.0);
    if let (Some(i), Some(j)) = (&env.argmin, &env.argmax) {
        v = v.witness("argmin ratio", i, env.global_inf.0).witness("argmax ratio", j, env.global_sup.0);
    }
    v
}

/// `(min, max)` of `m_p / (p + shift)^alpha` over schedule indices `p >= from`.
pub fn power_ratio_range(seq: &dyn QuotientSeq, budget: u64, alpha: f64, shift: f64, from: u64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let extra: Vec<BigIndex> = (from..from.max(64)).map(BigIndex::from_u64).collect();
    for p in usable_schedule(seq, budget, 1).iter().chain(extra.iter()) {
        if p < &BigIndex::from_u64(from) {
            continue;
        }
        let r = seq.log_quotient(p) - alpha * p.ln_offset(shift);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo.exp(), hi.exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectResult {
    pub gamma: f64,
    /// Smallest `C >= 1` over the sampled pairs, `inf` if the drawdown diverges.
    pub constant: Real,
    pub sampled_constant: Real,
    pub trend: Trend,
    pub window_drawdown: Vec<Real>,
}

impl DefectResult {
    pub fn diverging(&self) -> bool {
        self.trend == Trend::DivergingUp
    }
}

/// Almost-increase defect of `(p+1)^{-gamma} m_p`.
pub fn almost_increasing_defect(seq: &dyn QuotientSeq, gamma: f64, budget: u64) -> DefectResult {
    let ps = usable_schedule(seq, budget, 1);
    let cuts = seq.cutoffs(horizon_of(&ps));
    let mut run_max = f64::NEG_INFINITY;
    let mut draw = 0.0f64;
    let mut windows = Vec::new();
    let mut ci = 0;
    for p in &ps {
        let x = p.log2();
        while ci < cuts.len() && x >= cuts[ci] {
            if ci > 0 {
                windows.push(draw);
            }
            ci += 1;
        }
        let f = seq.log_quotient(p) - gamma * p.ln_offset(1.0);
        run_max = run_max.max(f);
        draw = draw.max(run_max - f);
    }
    windows.push(draw);
    // a final window cut short of the next cutoff only holds part of a period
    let n = cuts.len();
    if n >= 2 && windows.len() >= 4 && horizon_of(&ps) < cuts[n - 1] * cuts[n - 1] / cuts[n - 2] {
        windows.pop();
    }
    let (trend, _) = crate::envelope::classify(&windows, true);
    let trend = if trend == Trend::Oscillating || trend == Trend::DivergingDown { Trend::Stable } else { trend };
    DefectResult {
        gamma,
        constant: Real(if trend == Trend::DivergingUp { f64::INFINITY } else { draw.exp() }),
        sampled_constant: Real(draw.exp()),
        trend,
        window_drawdown: windows.iter().map(|&d| Real(d)).collect(),
    }
}

/// Envelope of `ln m_p / ln p` over `p >= 2`.
pub fn estimate_omega(seq: &dyn QuotientSeq, budget: u64) -> EnvelopeEstimate {
    let ps: Vec<BigIndex> = usable_schedule(seq, budget, 1).into_iter().filter(|p| p.bits() >= 2).collect();
    let pts: Vec<(BigIndex, f64)> = ps.iter().map(|p| (p.clone(), seq.log_quotient(p) / p.ln())).collect();
    EnvelopeEstimate::build("ln m_p / ln p", &pts, &seq.cutoffs(horizon_of(&ps)), false)
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaInterval {
    pub lo: f64,
    pub hi: f64,
    pub status: Status,
    pub probes: Vec<DefectResult>,
}

impl GammaInterval {
    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }
}

const GAMMA_STEP: f64 = 1.0 / 32.0;

/// Bisection on multiples of 1/32 between a bounded and a diverging defect.
pub fn estimate_gamma_index(seq: &dyn QuotientSeq, budget: u64) -> Result<GammaInterval> {
    let lc = check_lc(seq, budget);
    if !lc.passed() {
        return Err(Error::Precondition("gamma index needs a log-convex sequence".into()));
    }
    let omega = estimate_omega(seq, budget);
    let upper = omega.global_sup.0.max(omega.limsup.0);
    let mut probes = Vec::new();
    let probe = |j: i64, probes: &mut Vec<DefectResult>| {
        let d = almost_increasing_defect(seq, j as f64 * GAMMA_STEP, budget);
        let div = d.diverging();
        probes.push(d);
        div
    };
    let mut lo = 0i64;
    let mut hi = if upper.is_finite() { (upper / GAMMA_STEP).ceil() as i64 + 1 } else { 64 * 32 };
    while !probe(hi, &mut probes) {
        lo = hi;
        hi += 32;
        if hi > 64 * 32 {
            return Ok(GammaInterval { lo: lo as f64 * GAMMA_STEP, hi: f64::INFINITY, status: Status::Inconclusive, probes });
        }
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if probe(mid, &mut probes) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GammaInterval { lo: lo as f64 * GAMMA_STEP, hi: hi as f64 * GAMMA_STEP, status: Status::Pass, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::*;

    #[test]
    fn lc_cases() {
        assert!(check_lc(&Gevrey { alpha: 1.0 }, 20).passed());
        let t = TableSeq::new("t", vec![2f64.ln(), 0.0]).unwrap();
        let v = check_lc(&t, 16);
        assert_eq!(v.status, Status::Fail);
        assert_eq!(v.witnesses[0].index, "1");
        let v = check_lc(&ExampleA, 64);
        assert!(v.passed());
        assert!((v.get("max_step_ratio") - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mg_cases() {
        let v = check_mg(&Gevrey { alpha: 1.0 }, 20);
        assert!(v.passed());
        assert!((v.get("sup_ratio") - 2.0).abs() < 1e-3);
        assert_eq!(check_mg(&MQ { q: 2.0 }, 20).status, Status::Fail);
        assert_eq!(check_mg_beta(&MQ { q: 2.0 }, 20).status, Status::Fail);
        assert!(check_mg_beta(&Gevrey { alpha: 1.0 }, 20).passed());
    }

    #[test]
    fn snq_cases() {
        let v = check_snq(&Gevrey { alpha: 1.0 }, 20, Some(2));
        assert!(v.passed());
        assert!((v.get("liminf_ratio") - 2.0).abs() < 1e-3);
        assert_eq!(check_snq(&AlphaBeta::new(0.0, 1.0), 20, None).status, Status::Fail);
    }

    #[test]
    fn equivalence_cases() {
        let g1 = Gevrey { alpha: 1.0 };
        let v = check_equiv_quotients(&g1, &g1, 20);
        assert!(v.passed());
        assert_eq!(v.get("c"), 1.0);
        assert_eq!(v.get("d"), 1.0);
        assert_eq!(check_equiv_quotients(&g1, &Gevrey { alpha: 2.0 }, 20).status, Status::Fail);
    }

    #[test]
    fn defect_cases() {
        let g = Gevrey { alpha: 1.0 };
        let d = almost_increasing_defect(&g, 0.5, 20);
        assert_eq!(d.constant.0, 1.0);
        assert!(almost_increasing_defect(&g, 1.5, 20).diverging());
    }

    #[test]
    fn gamma_gevrey() {
        for a in [0.5, 1.0, 2.0] {
            let iv = estimate_gamma_index(&Gevrey { alpha: a }, 20).unwrap();
            assert!(iv.contains(a, 0.0), "{a}: [{}, {}]", iv.lo, iv.hi);
            assert!(iv.hi - iv.lo <= 0.05);
        }
    }

    #[test]
    fn omega_cases() {
        let e = estimate_omega(&Gevrey { alpha: 2.0 }, 20);
        assert!((e.liminf.0 - 2.0).abs() < 1e-2, "{:?}", e.liminf);
        assert!(estimate_omega(&MQ { q: 2.0 }, 20).diverging);
    }
}
