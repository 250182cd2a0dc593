//! Riesz means of piecewise-constant weight sequences, the subsequence
//! recurrences of the two-level example, and the Moricz normalizers.

use crate::bigindex::BigIndex;
use crate::error::{Error, Result};
use crate::numeric::{harmonic, harmonic_diff, Neumaier};
pub use crate::numeric::harmonic as harmonic_number;
use serde::Serialize;

/// Largest `n` for which `k_n = 2^(3^n)` and `q_n` are tabulated.
pub const MAX_LEVEL: u32 = 38;

#[derive(Clone, Debug)]
struct Segment {
    start: BigIndex, // exclusive
    end: Option<BigIndex>, // inclusive; None = unbounded
    delta: f64,
}

/// Weights `delta_k`, `k >= 1`, constant on consecutive segments.
#[derive(Clone, Debug)]
pub struct DeltaSeq {
    segments: Vec<Segment>,
    // sum of delta_k / k over all segments before segment i
    cum: Vec<f64>,
}

/// `k_n = 2^(3^n)`.
pub fn k_level(n: u32) -> BigIndex {
    BigIndex::pow2(3u64.pow(n))
}

/// `q_n = k_n^2`.
pub fn q_level(n: u32) -> BigIndex {
    BigIndex::pow2(2 * 3u64.pow(n))
}

impl DeltaSeq {
    fn from_segments(segments: Vec<Segment>) -> Self {
        let mut cum = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for s in &segments {
            cum.push(acc);
            if let Some(end) = &s.end {
                acc += s.delta * harmonic_diff(&s.start, end);
            }
        }
        DeltaSeq { segments, cum }
    }

    /// `delta_k = c` for every `k`.
    pub fn constant(c: f64) -> Self {
        Self::from_segments(vec![Segment { start: BigIndex::zero(), end: None, delta: c }])
    }

    /// `delta = 2` on `{1, 2}` and on `(q_j, k_{j+1}]`, `delta = 3` on `(k_j, q_j]`.
    pub fn two_valued() -> Self {
        let mut segs = vec![Segment { start: BigIndex::zero(), end: Some(k_level(0)), delta: 2.0 }];
        for n in 0..MAX_LEVEL {
            segs.push(Segment { start: k_level(n), end: Some(q_level(n)), delta: 3.0 });
            segs.push(Segment { start: q_level(n), end: Some(k_level(n + 1)), delta: 2.0 });
        }
        segs.push(Segment { start: k_level(MAX_LEVEL), end: Some(q_level(MAX_LEVEL)), delta: 3.0 });
        let last = q_level(MAX_LEVEL);
        segs.push(Segment { start: last, end: None, delta: 2.0 });
        Self::from_segments(segs)
    }

    fn segment_of(&self, k: &BigIndex) -> usize {
        // first segment whose end is >= k
        let (mut lo, mut hi) = (0usize, self.segments.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match &self.segments[mid].end {
                Some(e) if e < k => lo = mid + 1,
                _ => hi = mid,
            }
        }
        lo
    }

    /// `delta_k` for `k >= 1`.
    pub fn delta(&self, k: &BigIndex) -> f64 {
        self.segments[self.segment_of(k)].delta
    }

    /// `sum_{k=1}^{p} delta_k / k`, blockwise through harmonic differences.
    pub fn prefix_sum(&self, p: &BigIndex) -> f64 {
        if p.is_zero() {
            return 0.0;
        }
        let i = self.segment_of(p);
        let s = &self.segments[i];
        self.cum[i] + s.delta * harmonic_diff(&s.start, p)
    }

    /// `(sum_{k=1}^{p} delta_k) / p` for `p >= 1`.
    pub fn count_mean(&self, p: &BigIndex) -> f64 {
        if let Some(n) = p.to_u64().filter(|&n| n < 1 << 53) {
            let mut acc = Neumaier::new();
            for s in &self.segments {
                let a = s.start.to_u64().unwrap();
                if a >= n {
                    break;
                }
                let b = s.end.as_ref().and_then(|e| e.to_u64()).map_or(n, |e| e.min(n));
                acc.add(s.delta * (b - a) as f64);
            }
            return acc.value() / n as f64;
        }
        let mut acc = Neumaier::new();
        for s in &self.segments {
            if &s.start >= p {
                break;
            }
            let a = s.start.ratio(p);
            let b = match &s.end {
                Some(e) if e < p => e.ratio(p),
                _ => 1.0,
            };
            acc.add(s.delta * (b - a));
        }
        acc.value()
    }
}

/// `t_p = (sum_{k<=p} delta_k / k) / ln p`.
pub fn riesz_mean(delta: &DeltaSeq, p: &BigIndex) -> Result<f64> {
    if p.bits() < 2 {
        return Err(Error::InvalidParameter("riesz mean needs p >= 2".into()));
    }
    Ok(delta.prefix_sum(p) / p.ln())
}

/// Element-wise `t_p`, for cross-checks at small `p`.
pub fn riesz_mean_direct(delta: &DeltaSeq, p: u64) -> f64 {
    let mut acc = Neumaier::new();
    for k in 1..=p {
        acc.add(delta.delta(&BigIndex::from_u64(k)) / k as f64);
    }
    acc.value() / (p as f64).ln()
}

/// `eps_b - eps_a` with `eps_p = H_p - ln p - gamma`.
fn eps_diff(a: &BigIndex, b: &BigIndex) -> f64 {
    harmonic_diff(a, b) - b.ln_ratio(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct RieszRow {
    pub n: u32,
    pub log2_k: u64,
    pub t_k: f64,
    pub t_q: f64,
    pub t_k_recurrence: f64,
    pub t_q_recurrence: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RieszReport {
    pub rows: Vec<RieszRow>,
    pub max_recurrence_gap: f64,
    pub lim_t_k: f64,
    pub lim_t_q: f64,
    pub limit_gap: f64,
    pub has_limit: bool,
}

fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let d1 = b - a;
    let d2 = c - b;
    let den = d2 - d1;
    if den.abs() < 1e-300 || (d2 * d1) <= 0.0 {
        c
    } else {
        c - d2 * d2 / den
    }
}

/// Direct and recurrence values of `t_{k_n}`, `t_{q_n}` for `n <= nmax`.
pub fn riesz_subsequences(delta: &DeltaSeq, nmax: u32) -> Result<RieszReport> {
    if nmax < 1 || nmax > MAX_LEVEL - 1 {
        return Err(Error::InvalidParameter(format!("nmax must lie in [1, {}]", MAX_LEVEL - 1)));
    }
    let mut rows = Vec::new();
    let mut tk_rec = riesz_mean(delta, &k_level(0))?;
    let mut gap: f64 = 0.0;
    for n in 0..=nmax {
        let k = k_level(n);
        let q = q_level(n);
        let t_k = riesz_mean(delta, &k)?;
        let t_q = riesz_mean(delta, &q)?;
        let tq_rec = tk_rec / 2.0 + 1.5 + 3.0 * eps_diff(&k, &q) / q.ln();
        gap = gap.max((t_k - tk_rec).abs()).max((t_q - tq_rec).abs());
        rows.push(RieszRow {
            n,
            log2_k: 3u64.pow(n),
            t_k,
            t_q,
            t_k_recurrence: tk_rec,
            t_q_recurrence: tq_rec,
        });
        let k1 = k_level(n + 1);
        tk_rec = 2.0 * tq_rec / 3.0 + 2.0 / 3.0 + 2.0 * eps_diff(&q, &k1) / k1.ln();
    }
    let m = rows.len();
    let lim = |f: fn(&RieszRow) -> f64| {
        if m >= 3 {
            aitken(f(&rows[m - 3]), f(&rows[m - 2]), f(&rows[m - 1]))
        } else {
            f(&rows[m - 1])
        }
    };
    let lim_t_k = lim(|r| r.t_k);
    let lim_t_q = lim(|r| r.t_q);
    let limit_gap = (lim_t_q - lim_t_k).abs();
    Ok(RieszReport {
        rows,
        max_recurrence_gap: gap,
        lim_t_k,
        lim_t_q,
        limit_gap,
        has_limit: limit_gap < 1e-2,
    })
}

/// The Moricz expression for `lambda > 1` (forward window) or `lambda < 1`
/// (backward window), with the corrected normalizer `|H_{floor(p^lambda)} - H_p|`
/// or the original `|floor(p^lambda) - p| H_p`.
pub fn moricz_expression(s: &dyn Fn(u64) -> f64, lambda: f64, p: u64, corrected: bool) -> Result<f64> {
    if p < 3 || !(lambda > 0.0) || lambda == 1.0 {
        return Err(Error::InvalidParameter("need p >= 3 and lambda > 0, lambda != 1".into()));
    }
    let n = (p as f64).powf(lambda).floor() as u64;
    if n == p {
        return Err(Error::InvalidParameter(format!("empty summation range at p = {p}")));
    }
    let sp = s(p);
    let (lo, hi, sign) = if n > p { (p, n, 1.0) } else { (n, p, -1.0) };
    let mut acc = Neumaier::new();
    for k in lo + 1..=hi {
        acc.add(sign * (s(k) - sp) / k as f64);
    }
    let norm = if corrected {
        harmonic_diff(&BigIndex::from_u64(lo), &BigIndex::from_u64(hi))
    } else {
        (hi - lo) as f64 * harmonic(&BigIndex::from_u64(p))
    };
    Ok(acc.value() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_valued_delta_blocks() {
        let d = DeltaSeq::two_valued();
        let v: Vec<f64> = (1..=10).map(|k| d.delta(&BigIndex::from_u64(k))).collect();
        assert_eq!(v, vec![2.0, 2.0, 3.0, 3.0, 2.0, 2.0, 2.0, 2.0, 3.0, 3.0]);
        assert_eq!(d.delta(&BigIndex::from_u64(64)), 3.0);
        assert_eq!(d.delta(&BigIndex::from_u64(65)), 2.0);
        assert_eq!(d.delta(&BigIndex::from_u64(512)), 2.0);
        assert_eq!(d.delta(&BigIndex::from_u64(513)), 3.0);
    }

    #[test]
    fn small_riesz_means() {
        let d = DeltaSeq::two_valued();
        let t2 = riesz_mean(&d, &BigIndex::from_u64(2)).unwrap();
        assert!((t2 - 3.0 / 2f64.ln()).abs() < 1e-14);
        assert!((t2 - 4.3281).abs() < 1e-4);
        let t8 = riesz_mean(&d, &BigIndex::from_u64(8)).unwrap();
        assert!((t8 - riesz_mean_direct(&d, 8)).abs() < 1e-12);
        assert!((d.prefix_sum(&BigIndex::from_u64(4)) - 4.75).abs() < 1e-15);
    }

    #[test]
    fn constant_two_mean() {
        let d = DeltaSeq::constant(2.0);
        let t = riesz_mean(&d, &BigIndex::from_u64(1_000_000)).unwrap();
        assert!((t - 2.0836).abs() < 1e-4);
    }

    #[test]
    fn count_mean_small() {
        let d = DeltaSeq::two_valued();
        // delta_1..delta_5 = 2,2,3,3,2
        assert!((d.count_mean(&BigIndex::from_u64(5)) - 12.0 / 5.0).abs() < 1e-15);
        let big = BigIndex::pow2(2 * 3u64.pow(5));
        let m = d.count_mean(&big);
        // (k_5, q_5] carries all but a 2^-243 fraction
        assert!((m - 3.0).abs() < 1e-12);
    }

    #[test]
    fn subsequences_recurrence() {
        let r = riesz_subsequences(&DeltaSeq::two_valued(), 12).unwrap();
        assert!(r.max_recurrence_gap < 1e-9);
        assert!((r.lim_t_k - 2.5).abs() < 1e-3);
        assert!((r.lim_t_q - 2.75).abs() < 1e-3);
        assert!(!r.has_limit);
    }

    #[test]
    fn moricz_constant_is_zero() {
        let s = |_k: u64| 1.5;
        for corrected in [true, false] {
            assert_eq!(moricz_expression(&s, 1.25, 100, corrected).unwrap(), 0.0);
            assert_eq!(moricz_expression(&s, 0.8, 100, corrected).unwrap(), 0.0);
        }
        assert!(moricz_expression(&s, 1.0001, 3, true).is_err());
    }
}
