//! Proximate orders in the variable `u = ln r`.
//!
//! `rho(u)` is the order, `drho(u)` its derivative with respect to `u`
//! (that is `r rho'(r)`), so the condition (D) residual is `u * drho(u)`.

use crate::assoc;
use crate::envelope::{EnvelopeEstimate, Real, Trend};
use crate::error::{Error, Result};
use crate::props::{Status, Verdict};
use crate::seqcore::QuotientSeq;
use crate::solve::{bracket_down, bracket_up, increasing_root};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

const LN10: f64 = std::f64::consts::LN_10;
/// Tail residual below which (C), (D) and order equivalence count as converged.
pub const TAIL_TOL: f64 = 1e-2;
/// Default end of validation grids in `ln t`.
pub const GRID_END: f64 = 700.0;
pub const BUILTIN_GRID_END: f64 = 2000.0;
pub const PER_DECADE: usize = 64;
/// Tail residuals below this are rounding noise and need not decrease.
pub const NOISE_FLOOR: f64 = 1e-8;
const DIFF_H: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "order", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrderSpec {
    RhoAlphaBeta { alpha: f64, beta: f64 },
    Const { rho: f64 },
    PowerDecay { rho: f64, gamma: f64 },
    LogDecay { rho: f64, gamma: f64 },
    SinCounterexample { rho: f64 },
}

impl OrderSpec {
    /// Parses `name[:p1[:p2]]`, e.g. `const:0.5`, `rho_alpha_beta:1:1`.
    pub fn parse_short(s: &str) -> Result<OrderSpec> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::InvalidParameter(format!("missing parameter {i} in '{s}'")))?
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number in '{s}'")))
        };
        Ok(match parts[0] {
            "rho_alpha_beta" => OrderSpec::RhoAlphaBeta { alpha: num(1)?, beta: num(2)? },
            "const" => OrderSpec::Const { rho: num(1)? },
            "power_decay" => OrderSpec::PowerDecay { rho: num(1)?, gamma: num(2)? },
            "log_decay" => OrderSpec::LogDecay { rho: num(1)?, gamma: num(2)? },
            "sin_counterexample" | "sin" => OrderSpec::SinCounterexample { rho: num(1)? },
            other => return Err(Error::InvalidParameter(format!("unknown order '{other}'"))),
        })
    }
}

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Builtin(OrderSpec),
    Custom { rho: Func, drho: Option<Func> },
}

/// A (candidate) proximate order.
#[derive(Clone)]
pub struct ProximateOrder {
    pub label: String,
    /// Declared limit of `rho`.
    pub limit: f64,
    /// Domain threshold `ln c`; the order is evaluated for `u > log_c`.
    pub log_c: f64,
    kind: Kind,
}

impl fmt::Debug for ProximateOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProximateOrder({}, limit {}, log_c {})", self.label, self.limit, self.log_c)
    }
}

impl ProximateOrder {
    /// Order given by closures in `u`; without `drho` central differences are used.
    pub fn custom(label: impl Into<String>, limit: f64, log_c: f64, rho: Func, drho: Option<Func>) -> Self {
        ProximateOrder { label: label.into(), limit, log_c, kind: Kind::Custom { rho, drho } }
    }

    pub fn spec(&self) -> Option<&OrderSpec> {
        match &self.kind {
            Kind::Builtin(s) => Some(s),
            Kind::Custom { .. } => None,
        }
    }

    pub fn rho(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Builtin(s) => match *s {
                OrderSpec::RhoAlphaBeta { alpha, beta } => 1.0 / alpha - (beta / alpha) * u.ln() / u,
                OrderSpec::Const { rho } => rho,
                OrderSpec::PowerDecay { rho, gamma } => rho + (-gamma * u).exp(),
                OrderSpec::LogDecay { rho, gamma } => rho + u.powf(-gamma),
                OrderSpec::SinCounterexample { rho } => {
                    let t = u.exp();
                    rho + t.sin() / t
                }
            },
            Kind::Custom { rho, .. } => rho(u),
        }
    }

    /// `d rho / d u`.
    pub fn drho(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Builtin(s) => match *s {
                OrderSpec::RhoAlphaBeta { alpha, beta } => -(beta / alpha) * (1.0 - u.ln()) / (u * u),
                OrderSpec::Const { .. } => 0.0,
                OrderSpec::PowerDecay { gamma, .. } => -gamma * (-gamma * u).exp(),
                OrderSpec::LogDecay { gamma, .. } => -gamma * u.powf(-gamma - 1.0),
                OrderSpec::SinCounterexample { .. } => {
                    let t = u.exp();
                    t.cos() - t.sin() / t
                }
            },
            Kind::Custom { drho: Some(d), .. } => d(u),
            Kind::Custom { rho, drho: None } => (rho(u + DIFF_H) - rho(u - DIFF_H)) / (2.0 * DIFF_H),
        }
    }

    /// `r rho'(r) ln r`.
    pub fn d_residual(&self, u: f64) -> f64 {
        u * self.drho(u)
    }

    /// `ln V(r) = rho(r) ln r`.
    pub fn log_v(&self, u: f64) -> f64 {
        self.rho(u) * u
    }

    /// `d ln V / d ln r = rho + u drho`.
    pub fn a_of(&self, u: f64) -> f64 {
        self.rho(u) + u * self.drho(u)
    }

    pub fn is_nonzero(&self) -> bool {
        self.limit > 0.0
    }
}

/// Builds a builtin order.
pub fn make_order(spec: &OrderSpec) -> Result<ProximateOrder> {
    let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
    let ok = |x: f64| x.is_finite();
    let (label, limit, log_c) = match *spec {
        OrderSpec::RhoAlphaBeta { alpha, beta } => {
            if !(ok(alpha) && alpha > 0.0 && ok(beta)) {
                return bad("rho_alpha_beta needs alpha > 0 and finite beta");
            }
            (format!("rho_alpha_beta({alpha}, {beta})"), 1.0 / alpha, 1.0)
        }
        OrderSpec::Const { rho } => {
            if !(ok(rho) && rho >= 0.0) {
                return bad("const needs rho >= 0");
            }
            (format!("const({rho})"), rho, f64::NEG_INFINITY)
        }
        OrderSpec::PowerDecay { rho, gamma } => {
            if !(ok(rho) && rho >= 0.0 && ok(gamma) && gamma > 0.0) {
                return bad("power_decay needs rho >= 0 and gamma > 0");
            }
            (format!("power_decay({rho}, {gamma})"), rho, 0.0)
        }
        OrderSpec::LogDecay { rho, gamma } => {
            if !(ok(rho) && rho >= 0.0 && ok(gamma) && gamma > 0.0) {
                return bad("log_decay needs rho >= 0 and gamma > 0");
            }
            (format!("log_decay({rho}, {gamma})"), rho, 1.0)
        }
        OrderSpec::SinCounterexample { rho } => {
            if !(ok(rho) && rho >= 0.0) {
                return bad("sin_counterexample needs rho >= 0");
            }
            (format!("sin_counterexample({rho})"), rho, 0.0)
        }
    };
    Ok(ProximateOrder { label, limit, log_c, kind: Kind::Builtin(spec.clone()) })
}

/// Points in `u = ln t`, uniformly spaced (geometric in `t`).
#[derive(Clone, Debug, Serialize)]
pub struct LogGrid {
    pub u_min: f64,
    pub u_max: f64,
    pub per_decade: usize,
    #[serde(skip)]
    pub u: Vec<f64>,
}

impl LogGrid {
    pub fn new(u_min: f64, u_max: f64, per_decade: usize) -> Self {
        let h = LN10 / per_decade as f64;
        let n = ((u_max - u_min) / h).floor() as usize;
        let mut u: Vec<f64> = (0..=n).map(|i| u_min + i as f64 * h).collect();
        if u.last().map_or(true, |&x| x < u_max - 1e-12) {
            u.push(u_max);
        }
        LogGrid { u_min, u_max, per_decade, u }
    }

    /// Default grid for an order: from just above its threshold to `ln t = 700`,
    /// or `BUILTIN_GRID_END` for the closed-form orders with logarithmic tails.
    pub fn for_order(o: &ProximateOrder) -> Self {
        let end = match &o.kind {
            Kind::Builtin(OrderSpec::SinCounterexample { .. }) | Kind::Custom { .. } => GRID_END,
            Kind::Builtin(_) => BUILTIN_GRID_END,
        };
        Self::new(o.log_c.max(0.0) + 1.0, end, PER_DECADE)
    }

    pub fn decades(&self) -> f64 {
        (self.u_max - self.u_min) / LN10
    }
}

/// Tail test: max of `|r|` over the last decade, below `TAIL_TOL` and not
/// above the max over the decade before.
#[derive(Clone, Debug, Serialize)]
pub struct TailTest {
    pub last_decade_max: Real,
    pub previous_decade_max: Real,
    pub pass: bool,
}

fn tail_test(grid: &[f64], r: &[f64]) -> TailTest {
    let end = *grid.last().unwrap_or(&0.0);
    let mut last = 0.0f64;
    let mut prev = 0.0f64;
    for (&u, &v) in grid.iter().zip(r) {
        let a = if v.is_finite() { v.abs() } else { f64::INFINITY };
        if u >= end - LN10 {
            last = last.max(a);
        } else if u >= end - 2.0 * LN10 {
            prev = prev.max(a);
        }
    }
    TailTest {
        last_decade_max: Real(last),
        previous_decade_max: Real(prev),
        pass: last < TAIL_TOL && (last <= prev * (1.0 + 1e-9) + 1e-15 || last <= NOISE_FLOOR),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub u: f64,
    pub value: Real,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderValidation {
    pub order: String,
    pub limit: f64,
    pub grid: LogGrid,
    /// Finite `rho` and `drho` on every grid point.
    pub a_finite: bool,
    pub b_min_rho: Real,
    pub b_pass: bool,
    pub c_tail: TailTest,
    pub d_tail: TailTest,
    pub d_count_over_half: usize,
    pub d_worst: Vec<GridPoint>,
    pub c_end: Real,
    pub nonzero: bool,
}

impl OrderValidation {
    pub fn passed(&self) -> bool {
        self.a_finite && self.b_pass && self.c_tail.pass && self.d_tail.pass
    }
}

pub fn validate_order(o: &ProximateOrder, grid: &LogGrid) -> Result<OrderValidation> {
    if grid.decades() < 6.0 {
        return Err(Error::InvalidParameter(format!("grid spans {:.2} decades, need >= 6", grid.decades())));
    }
    let u = &grid.u;
    let rho: Vec<f64> = u.iter().map(|&x| o.rho(x)).collect();
    let dres: Vec<f64> = u.iter().map(|&x| o.d_residual(x)).collect();
    let cres: Vec<f64> = rho.iter().map(|r| r - o.limit).collect();
    let a_finite = rho.iter().chain(dres.iter()).all(|v| v.is_finite());
    let b_min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let mut worst: Vec<GridPoint> = u.iter().zip(&dres).map(|(&u, &d)| GridPoint { u, value: Real(d) }).collect();
    worst.sort_by(|a, b| b.value.0.abs().total_cmp(&a.value.0.abs()).then(a.u.total_cmp(&b.u)));
    worst.truncate(10);
    Ok(OrderValidation {
        order: o.label.clone(),
        limit: o.limit,
        grid: grid.clone(),
        a_finite,
        b_min_rho: Real(b_min),
        b_pass: b_min >= -1e-12,
        c_tail: tail_test(u, &cres),
        d_tail: tail_test(u, &dres),
        d_count_over_half: dres.iter().filter(|d| !(d.abs() <= 0.5)).count(),
        d_worst: worst,
        c_end: Real(*cres.last().unwrap_or(&f64::NAN)),
        nonzero: o.is_nonzero(),
    })
}

pub fn v_of(o: &ProximateOrder, logt: f64) -> Result<f64> {
    if !(logt > o.log_c) {
        return Err(Error::Undefined { what: "V below the order threshold".into(), threshold: o.log_c });
    }
    Ok(o.log_v(logt))
}

/// Start of the tail on which `ln V` is strictly increasing (scan step 0.01
/// up to `GRID_END`); `-inf` when it increases everywhere.
pub fn increasing_from(o: &ProximateOrder) -> Result<f64> {
    let start = if o.log_c.is_finite() { o.log_c } else { -50.0 };
    let h = 0.01;
    let n = ((GRID_END - start) / h) as usize;
    let mut last_bad: Option<usize> = None;
    for i in 0..=n {
        let u = start + i as f64 * h;
        if u <= o.log_c {
            last_bad = Some(i);
            continue;
        }
        let a = o.a_of(u);
        if !(a > 0.0) {
            last_bad = Some(i);
        }
    }
    match last_bad {
        None if !o.log_c.is_finite() => Ok(f64::NEG_INFINITY),
        None => Ok(start),
        Some(i) if i + 1 < n => Ok(start + (i + 1) as f64 * h),
        Some(i) => Err(Error::Precondition(format!(
            "ln V is not increasing near ln t = {:.2}",
            start + i as f64 * h
        ))),
    }
}

/// Increasing root of `g` above `lb` (or anywhere when `lb = -inf`).
pub(crate) fn root_above(g: impl Fn(f64) -> f64, lb: f64, what: &str) -> Result<f64> {
    let x0 = if lb.is_finite() { lb } else { 0.0 };
    let g0 = g(x0);
    let (lo, hi) = if g0 > 0.0 {
        if lb.is_finite() {
            return Err(Error::Precondition(format!("{what}: value below the attained range")));
        }
        bracket_down(&g, x0, 1.0)?
    } else {
        bracket_up(&g, x0, 1.0)?
    };
    Ok(increasing_root(&g, lo, hi, 1e-15)?.x)
}

/// `ln U(s)`: inverse of `V` on its increasing tail.
pub fn u_of(o: &ProximateOrder, logs: f64) -> Result<f64> {
    if !o.is_nonzero() {
        return Err(Error::Precondition("U needs a nonzero proximate order".into()));
    }
    let lb = increasing_from(o)?;
    root_above(|u| o.log_v(u) - logs, lb, "U")
}

/// Conjugate order `rho*(s) = ln U(s) / ln s`, with limit `1 / rho`.
pub fn conjugate_order(o: &ProximateOrder) -> Result<ProximateOrder> {
    if !o.is_nonzero() {
        return Err(Error::Precondition("conjugate order needs rho > 0".into()));
    }
    let lb = increasing_from(o)?;
    let v_lb = if lb.is_finite() { o.log_v(lb) } else { f64::NEG_INFINITY };
    let base = o.clone();
    let inv = move |v: f64| root_above(|u| base.log_v(u) - v, lb, "U").unwrap_or(f64::NAN);
    let inv = Arc::new(inv);
    let o2 = o.clone();
    let i1 = inv.clone();
    let rho: Func = Arc::new(move |v: f64| i1(v) / v);
    // d/dv (w/v) with w' = 1/A(w)
    let drho: Func = Arc::new(move |v: f64| {
        let w = inv(v);
        (1.0 / o2.a_of(w) - w / v) / v
    });
    Ok(ProximateOrder::custom(format!("conjugate of {}", o.label), 1.0 / o.limit, v_lb.max(0.0), rho, Some(drho)))
}

/// `(rho_1 - rho_2) ln r -> 0` on the grid tail.
pub fn orders_equivalent(a: &ProximateOrder, b: &ProximateOrder, grid: &LogGrid) -> Verdict {
    let r: Vec<f64> = grid.u.iter().map(|&u| (a.rho(u) - b.rho(u)) * u).collect();
    let t = tail_test(&grid.u, &r);
    let end = *r.last().unwrap_or(&f64::NAN);
    let status = if t.pass { Status::Pass } else { Status::Fail };
    Verdict::new(status, grid.u_max)
        .with("last_decade_max", t.last_decade_max.0)
        .with("previous_decade_max", t.previous_decade_max.0)
        .with("v_ratio_end", end.exp())
        .witness("(rho_1 - rho_2) ln r at grid end", format!("{:.4}", grid.u_max), end)
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub order: String,
    pub sequence: String,
    /// Envelope of `ln t (rho(t) - d_M(t)) = ln(V(t) / M(t))`, stored exponentiated.
    pub envelope: EnvelopeEstimate,
    pub lower: Real,
    pub upper: Real,
    pub verdict: Verdict,
}

/// Default `ln t` range for admissibility envelopes of `seq`.
pub fn admit_grid(seq: &dyn QuotientSeq) -> LogGrid {
    let reach = match seq.len() {
        Some(n) => seq.log_quotient(&crate::BigIndex::from_u64(n - 1)),
        None => 2000.0,
    };
    let u_min = seq.log_quotient(&crate::BigIndex::one()).max(1.0) + 1e-9;
    LogGrid::new(u_min, reach.min(2000.0).max(u_min + 1.0), 32)
}

/// Cutoffs doubling in `u` from 2.
fn doubling_cutoffs(u_min: f64, u_max: f64) -> Vec<f64> {
    let mut c = Vec::new();
    let mut x = 2.0f64.max(u_min);
    while x < u_max {
        c.push(x);
        x *= 2.0;
    }
    c
}

/// Does `seq` admit `o`: is `ln t (rho(t) - d_M(t))` bounded on the grid tail.
pub fn admits(seq: &dyn QuotientSeq, o: &ProximateOrder, grid: &LogGrid) -> Result<AdmissibilityReport> {
    let val = validate_order(o, &LogGrid::for_order(o))?;
    if !val.passed() {
        return Err(Error::Precondition(format!("{} does not validate as a proximate order", o.label)));
    }
    let pts: Vec<(f64, f64)> = grid
        .u
        .iter()
        .filter(|&&u| u > o.log_c)
        .map(|&u| {
            let lm = assoc::log_m_assoc(seq, u);
            (u, o.log_v(u) - lm)
        })
        .filter(|p| p.1.is_finite())
        .collect();
    let cuts = doubling_cutoffs(grid.u_min, grid.u_max);
    let env = EnvelopeEstimate::build_x("V(t)/M(t)", &pts, &cuts, true);
    let from = env.cutoffs.first().copied().unwrap_or(f64::NEG_INFINITY);
    let tail = pts.iter().filter(|p| p.0 >= from).map(|p| p.1);
    let (lo, hi) = tail.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let status = if env.inf_trend.diverging() || env.sup_trend.diverging() {
        Status::Fail
    } else if env.inf_trend == Trend::Insufficient || env.sup_trend == Trend::Insufficient {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    let mut v = Verdict::new(status, grid.u_max).with("A", lo).with("B", hi);
    if status == Status::Fail {
        let w: Vec<f64> = env.window_sup.iter().map(|r| r.0.ln()).collect();
        let wi: Vec<f64> = env.window_inf.iter().map(|r| r.0.ln()).collect();
        v = v
            .witness("window sup of ln t (rho - d_M)", format!("{:.3}", env.argmax_x), *w.last().unwrap_or(&f64::NAN))
            .witness("window inf of ln t (rho - d_M)", format!("{:.3}", env.argmin_x), *wi.last().unwrap_or(&f64::NAN))
            .note("envelope of ln t (rho(t) - d_M(t)) diverges");
    }
    Ok(AdmissibilityReport {
        order: o.label.clone(),
        sequence: seq.name(),
        envelope: env,
        lower: Real(lo),
        upper: Real(hi),
        verdict: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(s: &str) -> ProximateOrder {
        make_order(&OrderSpec::parse_short(s).unwrap()).unwrap()
    }

    #[test]
    fn builtin_values() {
        let c = o("const:0.5");
        assert_eq!(c.rho(10.0), 0.5);
        assert_eq!(c.drho(10.0), 0.0);
        let l = o("log_decay:1:1");
        assert!((l.d_residual(100.0) + 0.01).abs() < 1e-15);
        let p = o("power_decay:1:1");
        let t: f64 = 5.0;
        assert!((p.log_v(t.ln()) - (1.0 + 1.0 / t) * t.ln()).abs() < 1e-14);
        assert!((v_of(&o("const:2"), 10f64.ln()).unwrap() - 2.0 * 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_differences() {
        for s in ["rho_alpha_beta:1:1", "rho_alpha_beta:2:3", "power_decay:1:1", "log_decay:1:2"] {
            let ord = o(s);
            for u in [2.0, 7.5, 40.0] {
                let h = 1e-5;
                let fd = (ord.rho(u + h) - ord.rho(u - h)) / (2.0 * h);
                assert!((fd - ord.drho(u)).abs() < 1e-8, "{s} at {u}");
            }
        }
    }

    #[test]
    fn validation() {
        for s in ["rho_alpha_beta:1:1", "rho_alpha_beta:2:1", "power_decay:1:1", "log_decay:1:1", "const:0"] {
            let ord = o(s);
            let v = validate_order(&ord, &LogGrid::for_order(&ord)).unwrap();
            assert!(v.passed(), "{s}: {v:?}");
        }
        let s = o("sin:1");
        let v = validate_order(&s, &LogGrid::for_order(&s)).unwrap();
        assert!(!v.d_tail.pass && v.c_tail.pass);
        assert!(v.d_count_over_half >= 10);
        assert!(validate_order(&s, &LogGrid::new(1.0, 5.0, 64)).is_err());
    }

    #[test]
    fn inverse_and_conjugate() {
        assert!((u_of(&o("const:2"), 4f64.ln()).unwrap() - 2f64.ln()).abs() < 1e-15);
        let p = o("power_decay:1:1");
        for u in [3.0, 30.0, 300.0] {
            let back = u_of(&p, p.log_v(u)).unwrap();
            assert!(((back - u) / u).abs() < 1e-10);
        }
        for s in ["rho_alpha_beta:1:1", "const:0.5", "log_decay:2:1"] {
            let ord = o(s);
            let c = conjugate_order(&ord).unwrap();
            let v = validate_order(&c, &LogGrid::for_order(&c)).unwrap();
            assert!(v.passed(), "{s}: {v:?}");
            assert!((c.rho(GRID_END) - 1.0 / ord.limit).abs() < 2e-2);
        }
        assert!(u_of(&o("const:0"), 1.0).is_err());
    }

    #[test]
    fn equivalence() {
        let g = LogGrid::new(1.0, GRID_END, PER_DECADE);
        assert!(orders_equivalent(&o("const:1"), &o("const:1"), &g).passed());
        assert!(orders_equivalent(&o("const:1"), &o("log_decay:1:2"), &g).passed());
        assert!(!orders_equivalent(&o("const:1"), &o("const:1.1"), &g).passed());
    }
}
