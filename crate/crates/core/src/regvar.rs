//! Regular variation of quotient sequences: ratio limits, the (b)/(d)/de Haan
//! tests, the canonical Bojanic-Seneta decomposition, and the cross-check of
//! the equivalent conditions together with property (g).

use crate::assoc;
use crate::bigindex::BigIndex;
use crate::envelope::{EnvelopeEstimate, Real};
use crate::numeric::{harmonic, Neumaier};
use crate::props::{self, usable_schedule, GammaInterval, Status, Verdict};
use crate::proxord::{self, LogGrid, OrderValidation};
use crate::seqcore::QuotientSeq;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Relative width below which an envelope counts as having a limit.
pub const LIMIT_TOL: f64 = 1e-2;
/// Agreement tolerance between index estimates.
pub const OMEGA_TOL: f64 = 2e-2;
pub const D_RATIOS: [u64; 4] = [2, 3, 4, 5];
pub const DE_HAAN: [u64; 2] = [2, 3];
/// Largest index enumerated term by term.
/// `d_M` is evaluated in the log domain, so its grid may run past `e^700`.
pub const DM_GRID_END: f64 = 2000.0;
pub const ENUM_LIMIT: u64 = 100_000;

/// Envelope of `m_{floor(lambda p)} / m_p`.
pub fn ratio_limit(seq: &dyn QuotientSeq, lambda: f64, budget: u64) -> crate::Result<EnvelopeEstimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(crate::Error::InvalidParameter("lambda must be positive".into()));
    }
    Ok(props::ratio_envelope(seq, budget, lambda))
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioTest {
    pub ell: u64,
    pub envelope: EnvelopeEstimate,
    pub has_limit: bool,
    pub omega: Real,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegVarReport {
    pub sequence: String,
    pub ratios: Vec<RatioTest>,
    pub beta_envelope: EnvelopeEstimate,
    #[serde(rename = "b")]
    pub verdict_b: Verdict,
    #[serde(rename = "d")]
    pub verdict_d: Verdict,
    #[serde(rename = "deHaan")]
    pub verdict_de_haan: Verdict,
    pub omega: f64,
    pub agree: bool,
}

fn quotients_unbounded(seq: &dyn QuotientSeq, budget: u64) -> bool {
    let om = props::estimate_omega(seq, budget);
    let ps = usable_schedule(seq, budget, 1);
    let last = ps.last().map_or(f64::NAN, |p| seq.log_quotient(p));
    let prev = ps.get(ps.len() / 2).map_or(f64::NAN, |p| seq.log_quotient(p));
    om.diverging || (last > prev && last > 0.0)
}

fn ratio_test(seq: &dyn QuotientSeq, ell: u64, budget: u64) -> RatioTest {
    let envelope = props::ratio_envelope(seq, budget, ell as f64);
    let has_limit = envelope.has_limit(LIMIT_TOL) && envelope.limit().is_finite();
    let omega = if has_limit { envelope.limit().ln() / (ell as f64).ln() } else { f64::NAN };
    RatioTest { ell, envelope, has_limit, omega: Real(omega) }
}

fn ratios_verdict(tests: &[&RatioTest], label: &str) -> (Verdict, f64) {
    let all = tests.iter().all(|t| t.has_limit);
    let om: Vec<f64> = tests.iter().map(|t| t.omega.0).collect();
    let mean = om.iter().sum::<f64>() / om.len() as f64;
    let spread = om.iter().fold(0.0f64, |a, &w| a.max((w - mean).abs()));
    let pass = all && spread <= OMEGA_TOL && mean > OMEGA_TOL;
    let horizon = tests.iter().map(|t| t.envelope.horizon).fold(0.0, f64::max);
    let mut v = Verdict::new(if pass { Status::Pass } else { Status::Fail }, horizon).with("omega", mean);
    for t in tests {
        v = v
            .with(&format!("liminf_ratio_{}", t.ell), t.envelope.liminf.0)
            .with(&format!("limsup_ratio_{}", t.ell), t.envelope.limsup.0);
    }
    if !pass {
        let why = if !all {
            "a ratio m_lp/m_p has no limit"
        } else if mean <= OMEGA_TOL {
            "index is not distinguishable from 0"
        } else {
            "indices from different ratios disagree"
        };
        v = v.note(format!("{label}: {why}"));
        if let Some(t) = tests.iter().find(|t| !t.has_limit) {
            if let (Some(i), Some(j)) = (&t.envelope.argmin, &t.envelope.argmax) {
                v = v
                    .witness(&format!("argmin m_{}p/m_p", t.ell), i, t.envelope.global_inf.0)
                    .witness(&format!("argmax m_{}p/m_p", t.ell), j, t.envelope.global_sup.0);
            }
        }
    }
    (v, if all { mean } else { f64::NAN })
}

/// Conditions (b), (d) with `l` in {2,..,5}, and the de Haan pair {2, 3}.
pub fn regvar_index_test(seq: &dyn QuotientSeq, budget: u64) -> RegVarReport {
    let ratios: Vec<RatioTest> = D_RATIOS.iter().map(|&l| ratio_test(seq, l, budget)).collect();
    let (mut vd, om_d) = ratios_verdict(&ratios.iter().collect::<Vec<_>>(), "(d)");
    let dh: Vec<&RatioTest> = ratios.iter().filter(|t| DE_HAAN.contains(&t.ell)).collect();
    let (mut vh, om_h) = ratios_verdict(&dh, "de Haan");

    let ps = usable_schedule(seq, budget, 1);
    let pts: Vec<(BigIndex, f64)> = ps.iter().map(|p| (p.clone(), seq.log_quotient(p) - seq.mean_log(p))).collect();
    let horizon = ps.last().map_or(0.0, |p| p.log2());
    let beta_env = EnvelopeEstimate::build("m_p / M_p^(1/p)", &pts, &seq.cutoffs(horizon), true);
    let lim_b = beta_env.limit().ln();
    let b_pass = beta_env.has_limit(LIMIT_TOL) && lim_b > OMEGA_TOL && lim_b.is_finite();
    let mut vb = Verdict::new(if b_pass { Status::Pass } else { Status::Fail }, beta_env.horizon)
        .with("liminf_beta", beta_env.liminf.0.ln())
        .with("limsup_beta", beta_env.limsup.0.ln())
        .with("omega", if b_pass { lim_b } else { f64::NAN });
    if !b_pass {
        vb = vb.note("beta_p = ln(m_p / M_p^(1/p)) has no finite limit above the index tolerance");
        if let (Some(i), Some(j)) = (&beta_env.argmin, &beta_env.argmax) {
            vb = vb.witness("argmin beta_p", i, beta_env.global_inf.0.ln()).witness("argmax beta_p", j, beta_env.global_sup.0.ln());
        }
    }

    if !quotients_unbounded(seq, budget) {
        let n = "precondition: quotients do not tend to infinity";
        vb = vb.note(n);
        vd = vd.note(n);
        vh = vh.note(n);
    }

    let omega = if vh.passed() {
        om_h
    } else if vd.passed() {
        om_d
    } else if b_pass {
        lim_b
    } else {
        f64::NAN
    };
    let mut agree = vb.passed() == vd.passed() && vd.passed() == vh.passed();
    if vb.passed() && vd.passed() {
        agree &= (lim_b - om_d).abs() <= OMEGA_TOL && (om_h - om_d).abs() <= OMEGA_TOL;
    }
    RegVarReport {
        sequence: seq.name(),
        ratios,
        beta_envelope: beta_env,
        verdict_b: vb,
        verdict_d: vd,
        verdict_de_haan: vh,
        omega,
        agree,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BSDecomposition {
    pub omega: f64,
    pub indices: Vec<String>,
    pub delta: Vec<Real>,
    pub c: Vec<Real>,
    pub delta_envelope: EnvelopeEstimate,
    pub c_envelope: EnvelopeEstimate,
    pub c_limit: Real,
    /// Largest `|ln m_p - (omega ln p + ln C_p + sum_{j<=p} delta_j / j)|` over enumerated `p`.
    pub reconstruction_error: f64,
    pub enumerated: u64,
    pub verdict: Verdict,
}

/// `delta_p = beta_{p-1} - omega`, `C_p = m_p p^{-omega} exp(-sum_{j<=p} delta_j / j)`.
pub fn bs_decompose(seq: &dyn QuotientSeq, omega: f64, budget: u64) -> crate::Result<BSDecomposition> {
    if !omega.is_finite() {
        return Err(crate::Error::InvalidParameter("omega must be finite".into()));
    }
    let beta = |p: &BigIndex| if p.is_zero() { seq.log_quotient(p) } else { seq.log_quotient(p) - seq.mean_log(p) };
    // term-by-term sums against the closed form ln C_p = beta_p + omega (H_p - ln p)
    let n = seq.len().unwrap_or(u64::MAX).min(ENUM_LIMIT + 1);
    let mut acc = Neumaier::new();
    let mut err = 0.0f64;
    for p in 1..n {
        let bp = BigIndex::from_u64(p);
        let d = beta(&BigIndex::from_u64(p - 1)) - omega;
        acc.add(d / p as f64);
        let lc = beta(&bp) + omega * (harmonic(&bp) - (p as f64).ln());
        let rec = omega * (p as f64).ln() + lc + acc.value();
        err = err.max((rec - seq.log_quotient(&bp)).abs() / seq.log_quotient(&bp).abs().max(1.0));
    }
    let ps: Vec<BigIndex> = usable_schedule(seq, budget, 1).into_iter().filter(|p| p.bits() >= 2).collect();
    let mut delta = Vec::new();
    let mut logc = Vec::new();
    for p in &ps {
        // beyond 2^64 the shift by one is below double resolution
        let pm = if p.bits() <= 64 { p.checked_sub_u64(1).unwrap() } else { p.clone() };
        delta.push((p.clone(), beta(&pm) - omega));
        logc.push((p.clone(), beta(p) + omega * (harmonic(p) - p.ln())));
    }
    let horizon = ps.last().map_or(0.0, |p| p.log2());
    let cuts = seq.cutoffs(horizon);
    let denv = EnvelopeEstimate::build("delta_p", &delta, &cuts, false);
    let cenv = EnvelopeEstimate::build("C_p", &logc, &cuts, true);
    let delta_ok = denv.inf_trend.settled()
        && denv.sup_trend.settled()
        && denv.liminf.0.abs() <= LIMIT_TOL
        && denv.limsup.0.abs() <= LIMIT_TOL;
    let c_ok = cenv.has_limit(LIMIT_TOL);
    let status = if delta_ok && c_ok { Status::Pass } else { Status::Fail };
    let verdict = Verdict::new(status, horizon)
        .with("delta_liminf", denv.liminf.0)
        .with("delta_limsup", denv.limsup.0)
        .with("C_liminf", cenv.liminf.0)
        .with("C_limsup", cenv.limsup.0);
    Ok(BSDecomposition {
        omega,
        indices: ps.iter().map(|p| p.to_string()).collect(),
        delta: delta.iter().map(|d| Real(d.1)).collect(),
        c: logc.iter().map(|d| Real(d.1.exp())).collect(),
        c_limit: Real(if c_ok { cenv.limit() } else { f64::NAN }),
        delta_envelope: denv,
        c_envelope: cenv,
        reconstruction_error: err,
        enumerated: n.saturating_sub(1),
        verdict,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Crosscheck {
    pub sequence: String,
    pub regvar: RegVarReport,
    /// (a): `d_M` validated as a proximate order with limit `1/omega`.
    pub a: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_validation: Option<OrderValidation>,
    pub omega_envelope: EnvelopeEstimate,
    pub gamma: Option<GammaInterval>,
    /// (g): `ln m_p / ln p` converges and `gamma(M) = omega(M)`.
    pub g: Verdict,
    pub corollary: BTreeMap<String, Verdict>,
    pub conditions_agree: bool,
    pub classification: String,
}

/// `ln t` grid on which `d_M` of `seq` is validated.
pub fn dm_grid(seq: &dyn QuotientSeq) -> LogGrid {
    let lo = assoc::d_threshold(seq);
    let reach = match seq.len() {
        Some(n) => seq.log_quotient(&BigIndex::from_u64(n - 1)),
        None => DM_GRID_END,
    };
    let lo = if lo.is_finite() { lo + 1.0 } else { 2.0 };
    LogGrid::new(lo, reach.min(DM_GRID_END).max(lo + 14.0), 32)
}

/// Conditions (a), (b), (d) and the consequences of (g).
pub fn characterization_crosscheck(seq: Arc<dyn QuotientSeq>, budget: u64) -> Crosscheck {
    let s = seq.as_ref();
    let rv = regvar_index_test(s, budget);
    let omega_env = props::estimate_omega(s, budget);
    let om_lim = omega_env.has_limit(LIMIT_TOL);
    let om = if rv.omega.is_finite() { rv.omega } else { omega_env.liminf.0 };

    let (a, a_validation) = if om.is_finite() && om > 0.0 {
        let ord = assoc::dm_order(seq.clone(), 1.0 / om);
        match proxord::validate_order(&ord, &dm_grid(s)) {
            Ok(val) => {
                let st = if val.passed() { Status::Pass } else { Status::Fail };
                let v = Verdict::new(st, val.grid.u_max)
                    .with("c_tail", val.c_tail.last_decade_max.0)
                    .with("d_tail", val.d_tail.last_decade_max.0);
                (v, Some(val))
            }
            Err(e) => (Verdict::new(Status::Inconclusive, 0.0).note(e.to_string()), None),
        }
    } else {
        (Verdict::new(Status::Fail, omega_env.horizon).note("no positive finite index for the limit of d_M"), None)
    };

    let gamma = props::estimate_gamma_index(s, budget).ok();
    let g_lim = omega_env.limit();
    let g_ok = om_lim && gamma.as_ref().map_or(false, |g| g.contains(g_lim, 1e-2));
    let mut g = Verdict::new(if g_ok { Status::Pass } else { Status::Fail }, omega_env.horizon)
        .with("omega_liminf", omega_env.liminf.0)
        .with("omega_limsup", omega_env.limsup.0);
    if let Some(iv) = &gamma {
        g = g.with("gamma_lo", iv.lo).with("gamma_hi", iv.hi);
    }

    let mut corollary = BTreeMap::new();
    let all_pass = rv.verdict_b.passed() && rv.verdict_d.passed();
    if all_pass {
        corollary.insert("mg".to_string(), props::check_mg(s, budget));
        corollary.insert("snq".to_string(), props::check_snq(s, budget, None));
        corollary.insert(
            "omega_limit".to_string(),
            Verdict::new(if om_lim { Status::Pass } else { Status::Fail }, omega_env.horizon).with("limit", g_lim),
        );
        let gi = gamma.as_ref().map_or(false, |iv| iv.contains(rv.omega, 1e-2));
        corollary.insert(
            "gamma_contains_omega".to_string(),
            Verdict::new(if gi { Status::Pass } else { Status::Fail }, omega_env.horizon).with("omega", rv.omega),
        );
    }
    let conditions_agree = rv.agree && (a.status == Status::Inconclusive || a.passed() == rv.verdict_b.passed());
    let classification = match (all_pass, g_ok) {
        (true, _) => "satisfies (a)-(d)",
        (false, true) => "satisfies (g), fails (a)-(d)",
        (false, false) => "fails (a)-(d) and (g)",
    }
    .to_string();
    Crosscheck {
        sequence: s.name(),
        regvar: rv,
        a,
        a_validation,
        omega_envelope: omega_env,
        gamma,
        g,
        corollary,
        conditions_agree,
        classification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::*;

    #[test]
    fn ratio_cases() {
        let g = Gevrey { alpha: 1.5 };
        let e = ratio_limit(&g, 2.0, 20).unwrap();
        assert!((e.limit() - 2f64.powf(1.5)).abs() < 1e-3);
        let e = ratio_limit(&g, 1.0, 20).unwrap();
        assert!(e.window_inf.iter().chain(e.window_sup.iter()).all(|r| r.0 == 1.0));
        let e = ratio_limit(&ExampleA, 2.0, ExampleA.default_budget()).unwrap();
        assert!((e.liminf.0 - 2.0).abs() < 1e-3 && (e.limsup.0 - 3.0).abs() < 1e-3);
        assert!(ratio_limit(&g, 0.0, 20).is_err());
    }

    #[test]
    fn index_tests() {
        let r = regvar_index_test(&Gevrey { alpha: 1.0 }, 20);
        assert!(r.verdict_b.passed() && r.verdict_d.passed() && r.verdict_de_haan.passed(), "{:?}", r.verdict_b);
        assert!((r.omega - 1.0).abs() < 2e-2 && r.agree);
        let r = regvar_index_test(&ExampleA, ExampleA.default_budget());
        assert!(!r.verdict_b.passed() && !r.verdict_d.passed() && r.agree);
    }

    #[test]
    fn decomposition() {
        let g = Gevrey { alpha: 1.0 };
        let d = bs_decompose(&g, 1.0, 20).unwrap();
        assert!(d.reconstruction_error < 1e-9);
        assert!(d.verdict.passed());
        let want = (1.0 + crate::numeric::EULER_GAMMA).exp();
        assert!((d.c_limit.0 - want).abs() < 1e-3 * want, "{:?}", d.c_limit);
        let t = TableSeq::new("c", vec![2f64.ln(); 64]).unwrap();
        let d = bs_decompose(&t, 0.0, 6).unwrap();
        assert!(d.delta.iter().skip(1).all(|x| x.0.abs() < 1e-15));
        assert!(d.c.iter().all(|x| (x.0 - 1.0).abs() < 1e-12));
    }
}
