//! Reproducibility suite: every acceptance criterion as a function returning
//! measured values and the list of failed sub-checks.

use crate::assoc;
use crate::construct;
use crate::envelope::Real;
use crate::props::{self, Status};
use crate::proxord::{self, LogGrid, OrderSpec};
use crate::regvar;
use crate::report::{TOOL, VERSION};
use crate::riesz::{self, DeltaSeq};
use crate::seqcore::{make_family, FamilySpec, Gevrey, QuotientSeq};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub tags: Vec<String>,
    pub pass: bool,
    pub measured: BTreeMap<String, Value>,
    pub failures: Vec<String>,
}

#[derive(Default)]
struct Acc {
    measured: BTreeMap<String, Value>,
    failures: Vec<String>,
}

impl Acc {
    fn value(&mut self, key: &str, v: f64) {
        self.measured.insert(key.into(), serde_json::to_value(Real(v)).unwrap_or(Value::Null));
    }

    fn expect(&mut self, key: &str, v: f64, ok: bool) {
        self.value(key, v);
        if !ok {
            self.failures.push(key.into());
        }
    }

    fn status(&mut self, key: &str, got: Status, want: Status) {
        self.measured.insert(key.into(), serde_json::to_value(got).unwrap_or(Value::Null));
        if got != want {
            self.failures.push(format!("{key} (want {want:?})"));
        }
    }

    fn flag(&mut self, key: &str, ok: bool) {
        self.measured.insert(key.into(), Value::Bool(ok));
        if !ok {
            self.failures.push(key.into());
        }
    }

    fn error(&mut self, key: &str, e: crate::Error) {
        self.measured.insert(key.into(), Value::String(e.to_string()));
        self.failures.push(format!("{key}: error"));
    }
}

fn family(s: &str) -> std::sync::Arc<dyn QuotientSeq> {
    make_family(&FamilySpec::parse_short(s).expect("builtin family")).expect("builtin family")
}

fn order(s: &str) -> proxord::ProximateOrder {
    proxord::make_order(&OrderSpec::parse_short(s).expect("builtin order")).expect("builtin order")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn gevrey_indices(a: &mut Acc) {
    for alpha in [0.5, 1.0, 2.0] {
        let g = Gevrey { alpha };
        let om = props::estimate_omega(&g, 20);
        a.expect(&format!("gevrey:{alpha} omega"), om.limit(), om.has_limit(1e-2) && within(om.limit(), alpha, 1e-2));
        match assoc::d_m(&g, 1e8f64.ln()) {
            Ok(d) => a.expect(&format!("gevrey:{alpha} d_M(1e8)"), d, within(d, 1.0 / alpha, 5e-2)),
            Err(e) => a.error(&format!("gevrey:{alpha} d_M(1e8)"), e),
        }
    }
}

fn example_a(a: &mut Acc) {
    let s = family("example_a");
    let b = s.default_budget();
    let env = props::ratio_envelope(s.as_ref(), b, 2.0);
    a.expect("liminf m_2p/m_p", env.liminf.0, within(env.liminf.0, 2.0, 1e-3));
    a.expect("limsup m_2p/m_p", env.limsup.0, within(env.limsup.0, 3.0, 1e-3));
    let (lo, hi) = props::power_ratio_range(s.as_ref(), b, 1.0, 0.0, 1);
    a.expect("min m_p/p", lo, lo >= 0.25 * (1.0 - 1e-12));
    a.expect("max m_p/p", hi, hi <= 3.0 * (1.0 + 1e-12));
    let eq = props::check_equiv_quotients(s.as_ref(), &Gevrey { alpha: 1.0 }, b);
    a.status("equivalent to gevrey:1", eq.status, Status::Pass);
    let rv = regvar::regvar_index_test(s.as_ref(), b);
    a.status("(b)", rv.verdict_b.status, Status::Fail);
    a.status("(d)", rv.verdict_d.status, Status::Fail);
    a.flag("(b) and (d) agree", rv.agree);
}

fn example_b(a: &mut Acc) {
    let s = family("example_b");
    let b = s.default_budget();
    let env = props::ratio_envelope(s.as_ref(), b, 2.0);
    a.expect("liminf m_2p/m_p", env.liminf.0, within(env.liminf.0, 2.0, 1e-3));
    a.expect("limsup m_2p/m_p", env.limsup.0, within(env.limsup.0, 4.0, 1e-3));
    let om = props::estimate_omega(s.as_ref(), b);
    a.expect("omega limit", om.limit(), om.has_limit(1e-2) && within(om.limit(), 1.0, 1e-2));
    match props::estimate_gamma_index(s.as_ref(), b) {
        Ok(g) => {
            a.value("gamma_lo", g.lo);
            a.value("gamma_hi", g.hi);
            a.flag("gamma interval contains 1", g.contains(1.0, 0.0));
        }
        Err(e) => a.error("gamma interval", e),
    }
    match proxord::admits(s.as_ref(), &order("const:1"), &proxord::admit_grid(s.as_ref())) {
        Ok(r) => {
            a.status("admits const:1", r.verdict.status, Status::Fail);
            let unbounded = r.envelope.sup_trend.diverging() || r.envelope.inf_trend.diverging();
            a.flag("admissibility envelope unbounded", unbounded);
        }
        Err(e) => a.error("admits const:1", e),
    }
}

fn riesz_example(a: &mut Acc) {
    match riesz::riesz_subsequences(&DeltaSeq::two_valued(), 20) {
        Ok(r) => {
            let tail = r.rows.iter().filter(|x| x.n >= 10);
            let (mut ek, mut eq) = (0.0f64, 0.0f64);
            for row in tail {
                ek = ek.max((row.t_k - 2.5).abs());
                eq = eq.max((row.t_q - 2.75).abs());
            }
            a.expect("max |t_k_n - 5/2|, n in [10, 20]", ek, ek <= 1e-6);
            a.expect("max |t_q_n - 11/4|, n in [10, 20]", eq, eq <= 1e-6);
            a.expect("recurrence vs direct", r.max_recurrence_gap, r.max_recurrence_gap <= 1e-9);
        }
        Err(e) => a.error("subsequences", e),
    }
    let s = family("example_riesz");
    let b = s.default_budget();
    let env = props::ratio_envelope(s.as_ref(), b, 2.0);
    a.expect("liminf m_2p/m_p", env.liminf.0, env.liminf.0 >= 3.96 && env.liminf.0 <= 8.08);
    a.expect("limsup m_2p/m_p", env.limsup.0, env.limsup.0 >= 3.96 && env.limsup.0 <= 8.08);
    a.status("mg", props::check_mg(s.as_ref(), b).status, Status::Pass);
    match props::estimate_gamma_index(s.as_ref(), b) {
        Ok(g) => {
            a.value("gamma_lo", g.lo);
            a.value("gamma_hi", g.hi);
            a.flag("gamma interval contains 2", g.contains(2.0, 0.0));
        }
        Err(e) => a.error("gamma interval", e),
    }
}

fn construction(a: &mut Acc) {
    for rho in [0.5, 1.0, 2.0] {
        let key = format!("const:{rho}");
        let run = || -> crate::Result<_> {
            let v = construct::make_axis_v(&order(&key))?;
            let mv = construct::build_mv_sequence(&v, 512)?;
            let us = construct::u_sandwich(&v, &mv)?;
            Ok((mv, us))
        };
        match run() {
            Ok((mv, us)) => {
                let lv = mv.seq.log_values();
                let worst = (1..=512u64)
                    .map(|p| {
                        let x = p as f64 / rho;
                        let exact = x * (x.ln() - 1.0);
                        (lv[p as usize] - exact).abs() / exact.abs()
                    })
                    .fold(0.0f64, f64::max);
                a.expect(&format!("{key} closed form rel error"), worst, worst <= 1e-8);
                a.expect(&format!("{key} U-sandwich B"), us.constants["B"].0, us.pass);
                let (lc, mg, snq) = construct::strong_regularity(&mv);
                a.status(&format!("{key} lc"), lc.status, Status::Pass);
                a.status(&format!("{key} mg"), mg.status, Status::Pass);
                a.status(&format!("{key} snq"), snq.status, Status::Pass);
            }
            Err(e) => a.error(&key, e),
        }
    }
}

fn vm_equivalence(a: &mut Acc) {
    for key in ["const:0.5", "const:1", "const:2", "log_decay:1:1", "log_decay:2:1"] {
        let run = || -> crate::Result<_> {
            let v = construct::make_axis_v(&order(key))?;
            let mv = construct::build_mv_sequence(&v, 512)?;
            Ok(construct::vm_sandwich(&v, &mv, proxord::PER_DECADE))
        };
        match run() {
            Ok(c) => {
                let k = &c.constants;
                a.value(&format!("{key} min V/M - 1"), k["min_ratio_minus_1"].0);
                a.value(&format!("{key} max V/M - nu/(nu-1)"), k["max_ratio_minus_upper"].0);
                a.expect(&format!("{key} V/M at grid end"), k["ratio_at_end"].0, c.pass);
            }
            Err(e) => a.error(key, e),
        }
    }
}

fn biconjugates(a: &mut Acc) {
    for key in ["const:2", "rho_alpha_beta:1:1"] {
        let r = construct::make_axis_v(&order(key)).and_then(|v| construct::biconjugate_check(&v, -2.0, 4.0, 64));
        match r {
            Ok(c) => a.expect(&format!("{key} max rel error"), c.max_rel_error, c.pass),
            Err(e) => a.error(key, e),
        }
    }
}

fn order_validation(a: &mut Acc) {
    for key in ["rho_alpha_beta:1:1", "power_decay:1:1", "log_decay:1:1"] {
        let o = order(key);
        match proxord::validate_order(&o, &LogGrid::for_order(&o)) {
            Ok(v) => {
                a.flag(&format!("{key} (B)"), v.b_pass);
                a.expect(&format!("{key} (C) tail"), v.c_tail.last_decade_max.0, v.c_tail.pass);
                a.expect(&format!("{key} (D) tail"), v.d_tail.last_decade_max.0, v.d_tail.pass);
            }
            Err(e) => a.error(key, e),
        }
        match proxord::conjugate_order(&o) {
            Ok(c) => {
                let end = c.rho(proxord::GRID_END);
                a.expect(&format!("{key} conjugate order at grid end"), end, within(end, 1.0 / o.limit, 2e-2));
            }
            Err(e) => a.error(&format!("{key} conjugate"), e),
        }
    }
    let o = order("sin_counterexample:1");
    match proxord::validate_order(&o, &LogGrid::for_order(&o)) {
        Ok(v) => {
            a.flag("sin (B)", v.b_pass);
            a.flag("sin (C)", v.c_tail.pass);
            a.flag("sin fails (D)", !v.d_tail.pass);
            a.expect("sin points with |D residual| > 0.5", v.d_count_over_half as f64, v.d_count_over_half >= 10);
        }
        Err(e) => a.error("sin", e),
    }
}

fn property_matrix(a: &mut Acc) {
    let expect = |a: &mut Acc, key: &str, want: [Status; 3]| {
        let s = family(key);
        let b = s.default_budget();
        let got = [
            props::check_lc(s.as_ref(), b),
            props::check_mg(s.as_ref(), b),
            props::check_snq(s.as_ref(), b, None),
        ];
        for (name, (v, w)) in ["lc", "mg", "snq"].iter().zip(got.iter().zip(want)) {
            a.status(&format!("{key} {name}"), v.status, w);
        }
        a.expect(&format!("{key} snq horizon log2 p"), got[2].horizon, got[2].horizon >= 1e5f64.log2());
    };
    expect(a, "m_q:2", [Status::Pass, Status::Fail, Status::Pass]);
    expect(a, "m_zero_beta:1", [Status::Pass, Status::Pass, Status::Fail]);
}

fn moricz(a: &mut Acc) {
    let s = |k: u64| (k as f64).ln();
    for lambda in [1.1, 1.25, 1.5, 0.7, 0.8, 0.9] {
        let mut corr = Vec::new();
        let mut orig = Vec::new();
        for p in [1_000u64, 10_000, 100_000] {
            match (riesz::moricz_expression(&s, lambda, p, true), riesz::moricz_expression(&s, lambda, p, false)) {
                (Ok(c), Ok(o)) => {
                    corr.push(c);
                    orig.push(o);
                }
                (Err(e), _) | (_, Err(e)) => {
                    a.error(&format!("lambda {lambda}"), e);
                    return;
                }
            }
        }
        let hi = corr.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.abs()));
        let lo = corr.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        let spread = (hi - lo) / hi;
        a.expect(&format!("lambda {lambda} corrected spread"), spread, spread < 0.1);
        let decay = orig[0].abs() / orig[2].abs();
        a.expect(&format!("lambda {lambda} uncorrected decay factor"), decay, decay >= 10.0);
    }
}

type Body = fn(&mut Acc);

const CRITERIA: [(u32, &str, &[&str], Body); 10] = [
    (1, "Gevrey indices", &["gevrey", "props", "assoc"], gevrey_indices),
    (2, "Block example with ratios 2 and 3", &["example_a", "props", "regvar"], example_a),
    (3, "Block example with ratios 2 and 4", &["example_b", "props", "proxord"], example_b),
    (4, "Riesz means", &["riesz", "props"], riesz_example),
    (5, "Construction closed form", &["construct"], construction),
    (6, "V/M equivalence", &["construct", "assoc"], vm_equivalence),
    (7, "Young biconjugate", &["construct"], biconjugates),
    (8, "Proximate-order validation", &["proxord"], order_validation),
    (9, "Property-fail matrix", &["props"], property_matrix),
    (10, "Moricz normalizer comparison", &["riesz", "moricz"], moricz),
];

fn selected(id: u32, name: &str, tags: &[&str], filter: Option<&str>) -> bool {
    match filter {
        None => true,
        Some(f) => {
            let f = f.to_lowercase();
            id.to_string() == f || name.to_lowercase().contains(&f) || tags.iter().any(|t| t.contains(&f))
        }
    }
}

fn evaluate(ids: &[usize]) -> Vec<Criterion> {
    ids.iter()
        .map(|&i| {
            let (id, name, tags, body) = CRITERIA[i];
            let mut acc = Acc::default();
            body(&mut acc);
            Criterion {
                id,
                name: name.into(),
                tags: tags.iter().map(|t| t.to_string()).collect(),
                pass: acc.failures.is_empty(),
                measured: acc.measured,
                failures: acc.failures,
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Matrix {
    pub tool: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    pub criteria: Vec<Criterion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl Matrix {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn get(&self, id: u32) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One line per criterion, failed sub-checks indented below.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            out.push_str(&format!("{} {:>2}  {}\n", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name));
            for f in &c.failures {
                let v = c.measured.get(f.as_str()).map(|v| format!(" = {v}")).unwrap_or_default();
                out.push_str(&format!("          - {f}{v}\n"));
            }
        }
        let n = self.criteria.iter().filter(|c| c.pass).count();
        out.push_str(&format!("{n}/{} criteria pass\n", self.criteria.len()));
        out
    }
}

/// Runs the criteria matching `filter`; the determinism criterion reruns the
/// others (all of them when only it is selected) and compares serialized bytes.
pub fn run(filter: Option<&str>, timestamp: bool) -> Matrix {
    let mut ids: Vec<usize> =
        (0..CRITERIA.len()).filter(|&i| selected(CRITERIA[i].0, CRITERIA[i].1, CRITERIA[i].2, filter)).collect();
    let det = selected(11, "Determinism", &["determinism"], filter);
    let mut criteria = evaluate(&ids);
    if det {
        let shown = !ids.is_empty();
        if !shown {
            ids = (0..CRITERIA.len()).collect();
        }
        let first = if shown { criteria.clone() } else { evaluate(&ids) };
        let second = evaluate(&ids);
        let a = serde_json::to_string(&first).unwrap_or_default();
        let b = serde_json::to_string(&second).unwrap_or_default();
        let mut acc = Acc::default();
        acc.value("criteria rerun", ids.len() as f64);
        acc.value("bytes", a.len() as f64);
        acc.flag("byte-identical rerun", !a.is_empty() && a == b);
        criteria.push(Criterion {
            id: 11,
            name: "Determinism".into(),
            tags: vec!["determinism".into()],
            pass: acc.failures.is_empty(),
            measured: acc.measured,
            failures: acc.failures,
        });
    }
    let mut m = Matrix {
        tool: TOOL.into(),
        version: VERSION.into(),
        filter: filter.map(String::from),
        criteria,
        generated_at: None,
    };
    if timestamp {
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
        m.generated_at = Some(format!("unix:{secs}"));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters() {
        assert!(selected(4, "Riesz means", &["riesz"], Some("riesz")));
        assert!(selected(10, "Moricz", &["riesz", "moricz"], Some("riesz")));
        assert!(!selected(5, "Construction", &["construct"], Some("riesz")));
        assert!(selected(5, "Construction", &["construct"], Some("5")));
        assert!(selected(5, "Construction", &["construct"], None));
    }

    #[test]
    fn biconjugate_criterion() {
        let m = run(Some("7"), false);
        assert_eq!(m.criteria.len(), 1);
        assert!(m.all_pass(), "{}", m.table());
        assert!(m.to_json().unwrap().contains("\"id\": 7"));
    }
}
