//! Associated function `M(t) = sup_p ln(t^p / M_p)`, counting function
//! `nu(t)`, and `d_M(t) = ln M(t) / ln t`.
//!
//! With `u = ln t` and `n = nu(t)`, `M(t) = n (u - ln(M_n)/n)`, so `ln M`
//! is evaluated as `ln n + ln(u - mean_log(n))` without forming `M_n`.

use crate::bigindex::BigIndex;
use crate::envelope::Real;
use crate::error::{Error, Result};
use crate::proxord::{LogGrid, ProximateOrder};
use crate::seqcore::QuotientSeq;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// `d_M` is evaluated only where `M(t) >= M_MIN` and `ln t >= LOGT_MIN`.
pub const M_MIN: f64 = 1e-6;
pub const LOGT_MIN: f64 = 1.0;

/// `nu(e^logt)`, with a local consistency check of the quotients around the count.
pub fn nu(seq: &dyn QuotientSeq, logt: f64) -> Result<BigIndex> {
    let n = seq.count_below(logt);
    if n.is_zero() {
        return Ok(n);
    }
    let below = n.checked_sub_u64(1).unwrap();
    let lm = seq.log_quotient(&below);
    let slack = 1e-12 * logt.abs().max(1.0);
    if lm > logt + slack {
        return Err(Error::Precondition(format!("quotients are not monotone near index {below}")));
    }
    if let Some(b2) = below.checked_sub_u64(1) {
        if seq.log_quotient(&b2) > lm + slack {
            return Err(Error::Precondition(format!("quotients decrease at index {below}")));
        }
    }
    Ok(n)
}

fn parts(seq: &dyn QuotientSeq, logt: f64) -> (BigIndex, f64) {
    let n = seq.count_below(logt);
    if n.is_zero() {
        return (n, f64::NAN);
    }
    let gap = logt - seq.mean_log(&n);
    (n, gap.max(0.0))
}

/// `ln M(e^logt)`; `-inf` where `M = 0`.
pub fn log_m_assoc(seq: &dyn QuotientSeq, logt: f64) -> f64 {
    let (n, gap) = parts(seq, logt);
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    n.ln() + gap.ln()
}

/// `M(e^logt)` (may overflow to `inf`).
#[allow(non_snake_case)]
pub fn M_assoc(seq: &dyn QuotientSeq, logt: f64) -> f64 {
    log_m_assoc(seq, logt).exp()
}

fn defined(seq: &dyn QuotientSeq, logt: f64) -> Result<f64> {
    if logt < LOGT_MIN {
        return Err(Error::Undefined { what: "d_M needs ln t >= 1".into(), threshold: LOGT_MIN });
    }
    let lm = log_m_assoc(seq, logt);
    if !(lm >= M_MIN.ln()) {
        return Err(Error::Undefined { what: "d_M needs M(t) >= 1e-6".into(), threshold: M_MIN });
    }
    Ok(lm)
}

/// `d_M(t) = ln M(t) / ln t`.
pub fn d_m(seq: &dyn QuotientSeq, logt: f64) -> Result<f64> {
    Ok(defined(seq, logt)? / logt)
}

/// `nu(t)/M(t) - d_M(t)`.
pub fn d_residual(seq: &dyn QuotientSeq, logt: f64) -> Result<f64> {
    let lm = defined(seq, logt)?;
    let (_, gap) = parts(seq, logt);
    Ok(1.0 / gap - lm / logt)
}

#[derive(Clone, Debug, Serialize)]
pub struct AssocEval {
    pub logt: f64,
    pub nu: BigIndex,
    #[serde(rename = "M")]
    pub m: Real,
    pub log_m: Real,
    pub d: Real,
    pub residual: Real,
}

pub fn eval(seq: &dyn QuotientSeq, logt: f64) -> AssocEval {
    let n = seq.count_below(logt);
    let lm = log_m_assoc(seq, logt);
    AssocEval {
        logt,
        nu: n,
        m: Real(lm.exp()),
        log_m: Real(lm),
        d: Real(d_m(seq, logt).unwrap_or(f64::NAN)),
        residual: Real(d_residual(seq, logt).unwrap_or(f64::NAN)),
    }
}

pub fn eval_grid(seq: &dyn QuotientSeq, grid: &LogGrid) -> Vec<AssocEval> {
    grid.u.iter().map(|&u| eval(seq, u)).collect()
}

fn g17(x: f64) -> String {
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

/// CSV rows `logt,t,nu,M,d,residual`.
pub fn write_csv<W: Write>(rows: &[AssocEval], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["logt", "t", "nu", "M", "d", "residual"])?;
    for r in rows {
        wr.write_record([
            g17(r.logt),
            g17(r.logt.exp()),
            r.nu.to_string(),
            g17(r.m.0),
            g17(r.d.0),
            g17(r.residual.0),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Smallest `ln t >= 1` where `d_M` is defined.
pub fn d_threshold(seq: &dyn QuotientSeq) -> f64 {
    let ok = |u: f64| log_m_assoc(seq, u) >= M_MIN.ln();
    if ok(LOGT_MIN) {
        return LOGT_MIN;
    }
    let (mut lo, mut hi) = (LOGT_MIN, 2.0 * LOGT_MIN);
    while !ok(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `d_M` wrapped as a candidate proximate order with declared limit `limit`.
pub fn dm_order(seq: Arc<dyn QuotientSeq>, limit: f64) -> ProximateOrder {
    let c = d_threshold(seq.as_ref());
    let s1 = seq.clone();
    let rho = Arc::new(move |u: f64| d_m(s1.as_ref(), u).unwrap_or(f64::NAN));
    let drho = Arc::new(move |u: f64| d_residual(seq.as_ref(), u).unwrap_or(f64::NAN) / u);
    ProximateOrder::custom("d_M", limit, c, rho, Some(drho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::*;

    #[test]
    fn counting_and_values() {
        let g = Gevrey { alpha: 1.0 };
        assert_eq!(nu(&g, 3.5f64.ln()).unwrap().to_u64(), Some(3));
        assert!(nu(&g, -0.5).unwrap().is_zero());
        assert!((M_assoc(&g, 3.5f64.ln()) - (3.0 * 3.5f64.ln() - 6f64.ln())).abs() < 1e-12);
        assert!((M_assoc(&g, 4f64.ln()) - (64.0f64 / 6.0).ln()).abs() < 1e-12);
        assert_eq!(M_assoc(&g, -1.0), 0.0);
        let t = TableSeq::new("t", vec![0.0, 1.0, 0.5, 2.0]).unwrap();
        assert!(nu(&t, 1.2).is_err());
    }

    #[test]
    fn d_values() {
        let g = Gevrey { alpha: 1.0 };
        let u = 1e8f64.ln();
        assert!((d_m(&g, u).unwrap() - 1.0).abs() < 5e-2);
        let g2 = Gevrey { alpha: 2.0 };
        assert!((d_m(&g2, 300.0).unwrap() - 0.5).abs() < 1e-2);
        assert!(d_m(&g, 0.5).is_err());
        let q = MQ { q: 2.0 };
        assert!(d_m(&q, u).unwrap() < 0.3);
        // nu(2.9) = 2
        let u = 2.9f64.ln();
        let m = 2.0 * u - 2f64.ln();
        assert!((d_residual(&g, u).unwrap() - (2.0 / m - m.ln() / u)).abs() < 1e-12);
    }

    #[test]
    fn slope_is_nu() {
        let g = Gevrey { alpha: 1.5 };
        for p in [3u64, 10, 100] {
            let a = g.log_quotient(&BigIndex::from_u64(p - 1));
            let b = g.log_quotient(&BigIndex::from_u64(p));
            let (u1, u2) = (a + 0.25 * (b - a), a + 0.75 * (b - a));
            let slope = (M_assoc(&g, u2) - M_assoc(&g, u1)) / (u2 - u1);
            assert!((slope - p as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_output() {
        let g = Gevrey { alpha: 1.0 };
        let rows = eval_grid(&g, &LogGrid::new(1.0, 3.0, 4));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("logt,t,nu,M,d,residual\n"));
        assert_eq!(s.lines().count(), rows.len() + 1);
    }
}
