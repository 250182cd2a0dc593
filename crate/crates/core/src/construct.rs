//! Sequences built from a nonzero proximate order: the spliced axis function
//! `V`, `M_p^V = sup_t t^p e^{-V(t)}` through Young conjugation, the
//! sequence `l_p = U(p)`, and the sandwich checks linking them.
//!
//! Everything runs in `u = ln t`: `phi(u) = V(e^u)`, `A(u) = d ln V / du`,
//! and `ln M_p^V = phi*(p) = sup_u (p u - phi(u))`.

use crate::assoc;
use crate::bigindex::BigIndex;
use crate::envelope::{EnvelopeEstimate, Real};
use crate::error::{Error, Result};
use crate::props::{self, Status, Verdict};
use crate::proxord::{self, LogGrid, ProximateOrder};
use crate::regvar;
use crate::seqcore::{QuotientSeq, TableSeq};
use crate::solve::{golden_max, increasing_root};
use serde::Serialize;
use std::io::Write;

/// Relative tolerance of the `V(s) A(s) = p` solve in `ln s`.
pub const SOLVE_TOL: f64 = 1e-14;
const SCAN_STEP: f64 = 0.01;

/// `ln V` on the whole axis: the order above `u0`, its tangent line below.
#[derive(Clone, Debug, Serialize)]
pub struct AxisV {
    pub order: String,
    #[serde(skip)]
    pub o: ProximateOrder,
    /// Splice point `ln t_0`; `None` when the order needs no splice.
    pub u0: Option<f64>,
    pub log_v0: f64,
    /// Slope of the tangent line, `A(u0)`.
    pub a0: f64,
    pub limit: f64,
}

/// Splices `o` at the first scan point after which `A >= rho/2` and
/// `A' + A^2 > 0` (so `V(e^u)` is increasing and convex in `u`).
pub fn make_axis_v(o: &ProximateOrder) -> Result<AxisV> {
    if !o.is_nonzero() {
        return Err(Error::Precondition(format!("{}: construction needs a nonzero order (rho > 0)", o.label)));
    }
    let good = |u: f64| {
        let a = o.a_of(u);
        let h = 1e-5;
        let da = (o.a_of(u + h) - o.a_of(u - h)) / (2.0 * h);
        a >= 0.5 * o.limit && da + a * a > 0.0 && a.is_finite()
    };
    let start = if o.log_c.is_finite() { o.log_c } else { -50.0 };
    let n = ((proxord::GRID_END - start) / SCAN_STEP) as usize;
    let mut last_bad = None;
    for i in 0..=n {
        let u = start + i as f64 * SCAN_STEP;
        if u <= o.log_c || !good(u) {
            last_bad = Some(i);
        }
    }
    let u0 = match last_bad {
        None if !o.log_c.is_finite() => None,
        None => Some(start),
        Some(i) if i + 1 < n => Some(start + (i + 1) as f64 * SCAN_STEP),
        Some(_) => {
            return Err(Error::Precondition(format!("{}: no splice point with increasing convex V found", o.label)))
        }
    };
    let (log_v0, a0) = match u0 {
        Some(u) => (o.log_v(u), o.a_of(u)),
        None => (f64::NAN, f64::NAN),
    };
    Ok(AxisV { order: o.label.clone(), o: o.clone(), u0, log_v0, a0, limit: o.limit })
}

impl AxisV {
    pub fn log_v(&self, u: f64) -> f64 {
        match self.u0 {
            Some(u0) if u < u0 => self.log_v0 + self.a0 * (u - u0),
            _ => self.o.log_v(u),
        }
    }

    /// `A(u) = d ln V / du`.
    pub fn dlog_v(&self, u: f64) -> f64 {
        match self.u0 {
            Some(u0) if u < u0 => self.a0,
            _ => self.o.a_of(u),
        }
    }

    /// `ln U(s)`, the inverse of `V` on the whole axis.
    pub fn log_u(&self, logs: f64) -> Result<f64> {
        if let Some(u0) = self.u0 {
            if logs <= self.log_v0 {
                return Ok(u0 + (logs - self.log_v0) / self.a0);
            }
            return proxord::root_above(|u| self.log_v(u) - logs, u0, "U");
        }
        proxord::root_above(|u| self.log_v(u) - logs, f64::NEG_INFINITY, "U")
    }

    /// `ln(V A)` minus `ln y`; increasing in `u`.
    fn stationarity(&self, u: f64, log_y: f64) -> f64 {
        self.log_v(u) + self.dlog_v(u).ln() - log_y
    }
}

pub fn a_of_s(v: &AxisV, logs: f64) -> f64 {
    v.dlog_v(logs)
}

#[derive(Clone, Debug, Serialize)]
pub struct SupSolveResult {
    pub p: f64,
    /// `ln s_p`, the maximizer of `p u - V(e^u)`.
    pub log_s: f64,
    pub log_m: f64,
    pub iterations: usize,
    /// `|V(s_p) A(s_p) - p|`.
    pub residual: f64,
    /// `g_p(s_p (1 +- 1e-3)) >= g_p(s_p)` with `g_p = V - p u`.
    pub lateral_ok: bool,
    pub fallback: bool,
}

fn g(v: &AxisV, y: f64, u: f64) -> f64 {
    y * u - v.log_v(u).exp()
}

/// `phi*(y) = sup_u (y u - V(e^u))` with its maximizer, for `y > 0`.
pub fn conjugate_solve(v: &AxisV, y: f64) -> Result<SupSolveResult> {
    let ly = y.ln();
    let f = |u: f64| v.stationarity(u, ly);
    let mut iterations = 0;
    let u = match v.u0 {
        Some(u0) if f(u0) > 0.0 => u0 + (ly - v.a0.ln() - v.log_v0) / v.a0,
        _ => {
            let lb = v.u0.unwrap_or(f64::NEG_INFINITY);
            let x0 = if lb.is_finite() { lb } else { 0.0 };
            let (lo, hi) = if f(x0) > 0.0 {
                crate::solve::bracket_down(&f, x0, 1.0)?
            } else {
                crate::solve::bracket_up(&f, x0, 1.0)?
            };
            let r = increasing_root(&f, lo, hi, SOLVE_TOL)?;
            iterations = r.iterations;
            r.x
        }
    };
    let mut u = u;
    let mut residual = (v.log_v(u).exp() * v.dlog_v(u) - y).abs();
    let mut fallback = false;
    if !(residual <= 1e-8 * y.max(1.0)) {
        let r = golden_max(|x| g(v, y, x), u - 1.0, u + 1.0, 1e-15)?;
        iterations += r.iterations;
        u = r.x;
        residual = (v.log_v(u).exp() * v.dlog_v(u) - y).abs();
        fallback = true;
    }
    let val = g(v, y, u);
    let d = (1e-3f64).ln_1p();
    let lateral_ok = g(v, y, u + d) <= val + 1e-12 * val.abs().max(1.0) && g(v, y, u - d) <= val + 1e-12 * val.abs().max(1.0);
    Ok(SupSolveResult { p: y, log_s: u, log_m: val, iterations, residual, lateral_ok, fallback })
}

/// `ln M_p^V`; `M_0^V = 1`.
pub fn mv_value(v: &AxisV, p: u64) -> Result<SupSolveResult> {
    if p == 0 {
        return Ok(SupSolveResult {
            p: 0.0,
            log_s: f64::NEG_INFINITY,
            log_m: 0.0,
            iterations: 0,
            residual: 0.0,
            lateral_ok: true,
            fallback: false,
        });
    }
    conjugate_solve(v, p as f64)
}

/// Young conjugate `phi*_V(y) = sup_x (x y - V(e^x))`.
pub fn young_conjugate(v: &AxisV, y: f64) -> Result<f64> {
    if y < 0.0 {
        return Ok(f64::INFINITY);
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(conjugate_solve(v, y)?.log_m)
}

/// `sup_y (x y - phi*(y))`, found by bisection in `ln y` on the maximizer of `phi*`.
pub fn biconjugate(v: &AxisV, x: f64) -> Result<f64> {
    let arg = |ly: f64| conjugate_solve(v, ly.exp()).map(|r| r.log_s - x);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while arg(lo)? > 0.0 {
        lo -= 2.0 * (hi - lo);
        if lo < -700.0 {
            return Err(Error::Solver { iterations: 0, lo, hi });
        }
    }
    while arg(hi)? < 0.0 {
        hi += 2.0 * (hi - lo);
        if hi > 700.0 {
            return Err(Error::Solver { iterations: 0, lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if arg(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = (0.5 * (lo + hi)).exp();
    Ok(x * y - young_conjugate(v, y)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct BiconjugateCheck {
    pub points: usize,
    pub max_rel_error: f64,
    pub worst_x: f64,
    pub pass: bool,
}

/// `(phi*)* = phi` on `n` evenly spaced points of `[x_lo, x_hi]`, relative to `max(1, phi)`.
pub fn biconjugate_check(v: &AxisV, x_lo: f64, x_hi: f64, n: usize) -> Result<BiconjugateCheck> {
    let mut worst = (0.0f64, f64::NAN);
    for i in 0..n {
        let x = x_lo + (x_hi - x_lo) * i as f64 / (n - 1) as f64;
        let phi = v.log_v(x).exp();
        let e = (biconjugate(v, x)? - phi).abs() / phi.max(1.0);
        if e >= worst.0 {
            worst = (e, x);
        }
    }
    Ok(BiconjugateCheck { points: n, max_rel_error: worst.0, worst_x: worst.1, pass: worst.0 <= 1e-6 })
}

/// Tabulated `M^V` with solver diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct ConstructedSeq {
    #[serde(skip)]
    pub seq: TableSeq,
    pub order: String,
    pub pmax: u64,
    pub splice_log_t0: Option<f64>,
    pub splice_slope: f64,
    pub solve_tol: f64,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub max_rel_residual: f64,
    pub fallbacks: usize,
    pub lateral_ok: bool,
    pub s_increasing: bool,
    /// Smallest `ln M_{p-1} + ln M_{p+1} - 2 ln M_p`.
    pub min_second_difference: f64,
    #[serde(skip)]
    pub log_s: Vec<f64>,
}

pub fn build_mv_sequence(v: &AxisV, pmax: u64) -> Result<ConstructedSeq> {
    if pmax < 16 {
        return Err(Error::InvalidParameter("pmax must be >= 16".into()));
    }
    let mut log_values = Vec::with_capacity(pmax as usize + 1);
    let mut log_s = Vec::with_capacity(pmax as usize + 1);
    let (mut it, mut res, mut rel, mut fb, mut lat) = (0usize, 0.0f64, 0.0f64, 0usize, true);
    for p in 0..=pmax {
        let r = mv_value(v, p)?;
        it = it.max(r.iterations);
        res = res.max(r.residual);
        rel = rel.max(r.residual / (p as f64).max(1.0));
        fb += r.fallback as usize;
        lat &= r.lateral_ok;
        log_values.push(r.log_m);
        log_s.push(r.log_s);
    }
    let s_increasing = log_s.windows(2).all(|w| w[1] > w[0]);
    let min2 = log_values.windows(3).map(|w| w[0] + w[2] - 2.0 * w[1]).fold(f64::INFINITY, f64::min);
    let seq = TableSeq::from_log_values(format!("M^V[{}]", v.order), &log_values)?;
    Ok(ConstructedSeq {
        seq,
        order: v.order.clone(),
        pmax,
        splice_log_t0: v.u0,
        splice_slope: v.a0,
        solve_tol: SOLVE_TOL,
        max_iterations: it,
        max_residual: res,
        max_rel_residual: rel,
        fallbacks: fb,
        lateral_ok: lat,
        s_increasing,
        min_second_difference: min2,
        log_s,
    })
}

/// `l_0 = U(1)`, `l_p = U(p)`, for `p < pmax`.
pub fn build_l_sequence(v: &AxisV, pmax: u64) -> Result<TableSeq> {
    let mut q = Vec::with_capacity(pmax as usize);
    for p in 0..pmax {
        q.push(v.log_u((p.max(1) as f64).ln())?);
    }
    TableSeq::new(format!("L[{}]", v.order), q)
}

/// Step in `ln x` of the prefix integral past the table.
const L_STEP: f64 = 0.01;

/// `l_p = U(p)` for indices up to `2^budget`: a table below `2^16`, then
/// `U` evaluated directly and `ln L_p` from the table plus
/// `int ln U(x) dx - (ln U(p) - ln U(N)) / 2` (Simpson in `ln x`).
#[derive(Clone)]
pub struct LSeq {
    v: AxisV,
    table: TableSeq,
    s0: f64,
    /// `cum[k]` is the integral from `N` to `e^{s0 + k h}`.
    cum: Vec<f64>,
    budget: u64,
}

impl std::fmt::Debug for LSeq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LSeq({}, budget {})", self.v.order, self.budget)
    }
}

impl LSeq {
    pub const TABLE_LEN: u64 = 1 << 16;

    pub fn new(v: &AxisV, budget: u64) -> Result<Self> {
        let table = build_l_sequence(v, Self::TABLE_LEN)?;
        let s0 = (Self::TABLE_LEN as f64).ln();
        let s_end = (budget as f64 + 1.0) * std::f64::consts::LN_2;
        let n = ((s_end - s0) / L_STEP).ceil() as usize;
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        let mut fa = Self::integrand(v, s0)?;
        for k in 0..n {
            let a = s0 + k as f64 * L_STEP;
            let fm = Self::integrand(v, a + 0.5 * L_STEP)?;
            let fb = Self::integrand(v, a + L_STEP)?;
            cum.push(cum[k] + L_STEP / 6.0 * (fa + 4.0 * fm + fb));
            fa = fb;
        }
        Ok(LSeq { v: v.clone(), table, s0, cum, budget })
    }

    fn integrand(v: &AxisV, s: f64) -> Result<f64> {
        Ok(v.log_u(s)? * s.exp())
    }

    fn integral_to(&self, s: f64) -> Result<f64> {
        let k = (((s - self.s0) / L_STEP).floor().max(0.0) as usize).min(self.cum.len() - 1);
        let a = self.s0 + k as f64 * L_STEP;
        let h = s - a;
        if h <= 0.0 {
            return Ok(self.cum[k]);
        }
        let f = |x| Self::integrand(&self.v, x);
        Ok(self.cum[k] + h / 6.0 * (f(a)? + 4.0 * f(a + 0.5 * h)? + f(s)?))
    }

    fn tail_mean_log(&self, p: &BigIndex) -> Result<f64> {
        let s = p.ln();
        let n = Self::TABLE_LEN;
        let head = self.table.log_values()[n as usize];
        let ends = self.v.log_u(s)? - self.v.log_u((n as f64).ln())?;
        let pf = p.to_f64();
        Ok(head / pf + self.integral_to(s)? / pf - 0.5 * ends / pf)
    }
}

impl QuotientSeq for LSeq {
    fn name(&self) -> String {
        format!("L[{}]", self.v.order)
    }
    fn log_quotient(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(n) if n < Self::TABLE_LEN => self.table.log_quotient(p),
            _ => self.v.log_u(p.ln()).unwrap_or(f64::NAN),
        }
    }
    fn mean_log(&self, p: &BigIndex) -> f64 {
        match p.to_u64() {
            Some(n) if n <= Self::TABLE_LEN => self.table.mean_log(p),
            _ => self.tail_mean_log(p).unwrap_or(f64::NAN),
        }
    }
    fn default_budget(&self) -> u64 {
        self.budget
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichCheck {
    pub name: String,
    pub pass: bool,
    pub constants: std::collections::BTreeMap<String, Real>,
    pub points: usize,
}

/// `B^{-p} U(p)^p <= M_p^V <= B^p U(p)^p` with `B = max_p |ln M_p / p - ln U(p)|`;
/// passes unless the per-octave maxima of the deviation diverge.
pub fn u_sandwich(v: &AxisV, c: &ConstructedSeq) -> Result<SandwichCheck> {
    let lv = c.seq.log_values();
    let mut octaves: Vec<f64> = Vec::new();
    for p in 1..lv.len() {
        let dev = (lv[p] / p as f64 - v.log_u((p as f64).ln())?).abs();
        let k = (63 - (p as u64).leading_zeros()) as usize;
        if octaves.len() <= k {
            octaves.push(dev);
        } else {
            octaves[k] = octaves[k].max(dev);
        }
    }
    let b = octaves.iter().copied().fold(0.0, f64::max);
    let (trend, _) = crate::envelope::classify(&octaves, true);
    let mut k = std::collections::BTreeMap::new();
    k.insert("B".into(), Real(b.exp()));
    k.insert("last_octave_log_dev".into(), Real(*octaves.last().unwrap_or(&f64::NAN)));
    Ok(SandwichCheck {
        name: "U-sandwich".into(),
        pass: b.is_finite() && trend != crate::envelope::Trend::DivergingUp,
        constants: k,
        points: lv.len() - 1,
    })
}

/// `1 <= V(t)/M(t) <= nu/(nu - 1)` for `m_1 < t <= m_{pmax-1}`, and `V/M` near 1 at the end.
pub fn vm_sandwich(v: &AxisV, c: &ConstructedSeq, per_decade: usize) -> SandwichCheck {
    let q = c.seq.quotients();
    let grid = LogGrid::new(q[1] + 1e-9, q[q.len() - 1], per_decade);
    let slack = 1e-8;
    let mut worst_low = f64::INFINITY;
    let mut worst_high = f64::NEG_INFINITY;
    let mut ok = true;
    let mut end_ratio = f64::NAN;
    for &u in &grid.u {
        let n = c.seq.count_below(u).to_u64().unwrap() as f64;
        let ratio = (v.log_v(u) - assoc::log_m_assoc(&c.seq, u)).exp();
        let upper = n / (n - 1.0);
        worst_low = worst_low.min(ratio - 1.0);
        worst_high = worst_high.max(ratio - upper);
        if ratio < 1.0 - slack || ratio > upper + slack {
            ok = false;
        }
        end_ratio = ratio;
    }
    let mut k = std::collections::BTreeMap::new();
    k.insert("min_ratio_minus_1".into(), Real(worst_low));
    k.insert("max_ratio_minus_upper".into(), Real(worst_high));
    k.insert("ratio_at_end".into(), Real(end_ratio));
    k.insert("log_t_end".into(), Real(grid.u_max));
    SandwichCheck {
        name: "V/M sandwich".into(),
        pass: ok && (end_ratio - 1.0).abs() <= 1e-2,
        constants: k,
        points: grid.u.len(),
    }
}

/// CSV rows `p,log_s,log_MV,log_l`.
pub fn write_csv<W: Write>(c: &ConstructedSeq, l: &TableSeq, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["p", "log_s", "log_MV", "log_l"])?;
    let lv = c.seq.log_values();
    for p in 0..lv.len() {
        let ll = l.quotients().get(p).copied().unwrap_or(f64::NAN);
        wr.write_record([p.to_string(), fmt17(c.log_s[p]), fmt17(lv[p]), fmt17(ll)])?;
    }
    wr.flush()?;
    Ok(())
}

pub(crate) fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureReport {
    pub sequence: String,
    pub order: String,
    pub admits: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence_to_mv: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_regvar: Option<Verdict>,
    pub status: Status,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// Admissibility, then `seq ~ M^V` (bounded `(M_p / M_p^V)^{1/p}`), then
/// regular variation of `l = U(p)` with index `1/rho`.
/// log2 of the largest index compared with M^V.
pub const EQUIV_BUDGET: u64 = 1000;

pub fn admissibility_closure_check(seq: &dyn QuotientSeq, o: &ProximateOrder, pmax: u64) -> Result<ClosureReport> {
    let adm = proxord::admits(seq, o, &proxord::admit_grid(seq))?;
    let mut rep = ClosureReport {
        sequence: seq.name(),
        order: o.label.clone(),
        admits: adm.verdict.clone(),
        equivalence_to_mv: None,
        l_regvar: None,
        status: Status::Fail,
        note: String::new(),
    };
    if !adm.verdict.passed() {
        rep.status = adm.verdict.status;
        rep.note = "precondition failed: the sequence does not admit the order".into();
        return Ok(rep);
    }
    let v = make_axis_v(o)?;
    let mv = build_mv_sequence(&v, pmax)?;
    let n = match seq.len() {
        Some(n) => n.min(pmax + 1),
        None => pmax + 1,
    };
    let mut pts: Vec<(BigIndex, f64)> = (1..n)
        .map(|p| {
            let b = BigIndex::from_u64(p);
            (b.clone(), seq.mean_log(&b) - mv.seq.mean_log(&b))
        })
        .collect();
    // past the table, M^V_p comes from the conjugate solve at real p
    let top = BigIndex::from_u64(n - 1);
    for b in seq.sample_schedule(seq.default_budget().min(EQUIV_BUDGET)) {
        if b > top {
            let y = b.log2().exp2();
            let m = conjugate_solve(&v, y)?.log_m / y;
            pts.push((b.clone(), seq.mean_log(&b) - m));
        }
    }
    let x_max = pts.last().map_or(0.0, |p| p.0.log2());
    let env = EnvelopeEstimate::build("(M_p/M^V_p)^(1/p)", &pts, &crate::seqcore::geometric_cutoffs(x_max), true);
    let eq_status = if env.diverging {
        Status::Fail
    } else if env.inf_trend == crate::envelope::Trend::Insufficient {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    let eq = Verdict::new(eq_status, x_max).with("c", env.global_inf.0).with("d", env.global_sup.0);
    let l = LSeq::new(&v, EQUIV_BUDGET)?;
    let rv = regvar::regvar_index_test(&l, l.default_budget());
    let target = 1.0 / o.limit;
    let l_ok = rv.verdict_d.passed() && (rv.omega - target).abs() <= 2e-2;
    let lv = Verdict::new(if l_ok { Status::Pass } else { Status::Fail }, rv.verdict_d.horizon)
        .with("omega", rv.omega)
        .with("expected", target);
    rep.status = if eq.passed() && l_ok { Status::Pass } else { Status::Fail };
    rep.equivalence_to_mv = Some(eq);
    rep.l_regvar = Some(lv);
    Ok(rep)
}

/// Strong regularity of a constructed table.
pub fn strong_regularity(c: &ConstructedSeq) -> (Verdict, Verdict, Verdict) {
    let b = c.seq.default_budget();
    (props::check_lc(&c.seq, b), props::check_mg(&c.seq, b), props::check_snq(&c.seq, b, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proxord::{make_order, OrderSpec};

    fn axis(s: &str) -> AxisV {
        make_axis_v(&make_order(&OrderSpec::parse_short(s).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn closed_forms() {
        let v = axis("const:2");
        assert!(v.u0.is_none());
        let r = mv_value(&v, 2).unwrap();
        assert!((r.log_m - (-1.0)).abs() < 1e-12 && r.log_s.abs() < 1e-12);
        assert!((mv_value(&v, 4).unwrap().log_m.exp() - 4.0 * (-2f64).exp()).abs() < 1e-12);
        assert_eq!(mv_value(&v, 0).unwrap().log_m, 0.0);
        assert!((young_conjugate(&v, 2.0).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(young_conjugate(&v, 0.0).unwrap(), 0.0);
        assert_eq!(young_conjugate(&v, -1.0).unwrap(), f64::INFINITY);
        for rho in [0.5, 1.0, 2.0] {
            let v = axis(&format!("const:{rho}"));
            for p in [1u64, 7, 100, 512] {
                let x = p as f64 / rho;
                let want = x * (x.ln() - 1.0);
                let got = mv_value(&v, p).unwrap().log_m;
                assert!(((got - want) / want.abs().max(1e-300)).abs() < 1e-8, "{rho} {p}");
            }
        }
    }

    #[test]
    fn splices() {
        let v = axis("rho_alpha_beta:1:1");
        let u0 = v.u0.unwrap();
        assert!((u0 - 2.0).abs() < 0.011);
        assert!((v.log_v(50.0) - (50.0 - 50f64.ln())).abs() < 1e-12);
        let v = axis("log_decay:1:1");
        assert!((v.log_v(30.0) - 31.0).abs() < 1e-12);
        // C1 across the splice
        let v = axis("power_decay:1:1");
        let u0 = v.u0.unwrap();
        assert!((v.log_v(u0 - 1e-9) - v.log_v(u0 + 1e-9)).abs() < 1e-8);
        assert!(a_of_s(&v, 400.0) - 1.0 < 1e-2);
        assert!(make_axis_v(&make_order(&OrderSpec::Const { rho: 0.0 }).unwrap()).is_err());
    }

    #[test]
    fn inverse() {
        let v = axis("rho_alpha_beta:1:1");
        for s in [-3.0, 0.5, 1.0, 20.0, 300.0] {
            let u = v.log_u(s).unwrap();
            assert!((v.log_v(u) - s).abs() < 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn biconjugates() {
        for s in ["const:2", "rho_alpha_beta:1:1"] {
            let c = biconjugate_check(&axis(s), -2.0, 4.0, 16).unwrap();
            assert!(c.pass, "{s}: {c:?}");
        }
    }

    #[test]
    fn constructed_sequence() {
        let v = axis("rho_alpha_beta:1:1");
        let c = build_mv_sequence(&v, 256).unwrap();
        assert!(c.s_increasing && c.lateral_ok);
        assert!(c.min_second_difference >= -1e-8);
        assert!(c.max_rel_residual <= 1e-8);
        assert!(u_sandwich(&v, &c).unwrap().pass);
        let vm = vm_sandwich(&v, &c, 64);
        assert!(vm.constants["min_ratio_minus_1"].0 >= -1e-8);
        assert!(build_mv_sequence(&v, 8).is_err());
    }
}
