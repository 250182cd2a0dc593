//! Tail envelopes of scalar streams: running tail infima/suprema at increasing
//! cutoffs, per-window extrema, and a trend classification of the last windows.

use crate::bigindex::BigIndex;
use serde::{Serialize, Serializer};

/// Relative change across the last three windows that counts as settled.
pub const STABLE_TOL: f64 = 1e-3;
/// Consecutive window increments shrinking slower than this ratio count as divergence.
pub const DIVERGE_RATIO: f64 = 0.8;

/// Double that serializes non-finite values as strings.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

pub fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().map(|&x| Real(x)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Stable,
    Converging,
    DivergingUp,
    DivergingDown,
    Oscillating,
    Insufficient,
}

impl Trend {
    pub fn settled(self) -> bool {
        matches!(self, Trend::Stable | Trend::Converging)
    }
    pub fn diverging(self) -> bool {
        matches!(self, Trend::DivergingUp | Trend::DivergingDown)
    }
}

fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let d1 = b - a;
    let d2 = c - b;
    let den = d2 - d1;
    if den.abs() < 1e-300 {
        c
    } else {
        c - d2 * d2 / den
    }
}

/// Classifies the last three entries of a window series and estimates its limit.
pub fn classify(ws: &[f64], log_scale: bool) -> (Trend, f64) {
    let n = ws.len();
    if n == 0 {
        return (Trend::Insufficient, f64::NAN);
    }
    let c = ws[n - 1];
    if c == f64::INFINITY {
        return (Trend::DivergingUp, f64::INFINITY);
    }
    if c == f64::NEG_INFINITY {
        return (Trend::DivergingDown, f64::NEG_INFINITY);
    }
    if n < 3 {
        return (Trend::Insufficient, c);
    }
    let (a, b) = (ws[n - 3], ws[n - 2]);
    let scale = if log_scale { 1.0 } else { c.abs().max(1e-12) };
    if (c - b).abs().max((c - a).abs()) <= STABLE_TOL * scale {
        return (Trend::Stable, c);
    }
    let d1 = b - a;
    let d2 = c - b;
    if d1 * d2 > 0.0 {
        if d2.abs() >= DIVERGE_RATIO * d1.abs() {
            let t = if d2 > 0.0 { Trend::DivergingUp } else { Trend::DivergingDown };
            let v = if d2 > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
            return (t, v);
        }
        return (Trend::Converging, aitken(a, b, c));
    }
    (Trend::Oscillating, c)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeEstimate {
    pub stream: String,
    /// Values were accumulated as logarithms; reported limits are exponentiated.
    pub log_scale: bool,
    pub cutoffs: Vec<f64>,
    pub tail_inf: Vec<Real>,
    pub tail_sup: Vec<Real>,
    pub window_inf: Vec<Real>,
    pub window_sup: Vec<Real>,
    pub inf_trend: Trend,
    pub sup_trend: Trend,
    pub liminf: Real,
    pub limsup: Real,
    pub global_inf: Real,
    pub global_sup: Real,
    pub argmin_x: f64,
    pub argmax_x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmin: Option<BigIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax: Option<BigIndex>,
    #[serde(skip)]
    pub argmin_pos: Option<usize>,
    #[serde(skip)]
    pub argmax_pos: Option<usize>,
    pub diverging: bool,
    /// Largest sampled x (log2 p for index streams).
    pub horizon: f64,
    pub samples: usize,
}

impl EnvelopeEstimate {
    /// Builds the envelope of `(p, value)` pairs; `cutoffs` are in `log2 p`.
    pub fn build(stream: &str, points: &[(BigIndex, f64)], cutoffs: &[f64], log_scale: bool) -> Self {
        let xy: Vec<(f64, f64)> = points.iter().map(|(p, v)| (p.log2(), *v)).collect();
        let mut e = Self::build_x(stream, &xy, cutoffs, log_scale);
        if let (Some(i), Some(j)) = (e.argmin_pos, e.argmax_pos) {
            e.argmin = Some(points[i].0.clone());
            e.argmax = Some(points[j].0.clone());
        }
        e
    }

    /// Builds the envelope of `(x, value)` pairs with window boundaries `cutoffs`.
    pub fn build_x(stream: &str, points: &[(f64, f64)], cutoffs: &[f64], log_scale: bool) -> Self {
        let x_max = points.iter().filter(|t| !t.1.is_nan()).map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let cuts: Vec<f64> = cutoffs.iter().copied().filter(|&c| c < x_max).collect();
        let nw = cuts.len();
        let mut window_inf = vec![f64::INFINITY; nw];
        let mut window_sup = vec![f64::NEG_INFINITY; nw];
        let mut gi = (f64::INFINITY, None);
        let mut gs = (f64::NEG_INFINITY, None);
        let mut samples = 0;
        for (i, &(x, v)) in points.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            samples += 1;
            if v < gi.0 {
                gi = (v, Some(i));
            }
            if v > gs.0 {
                gs = (v, Some(i));
            }
            // window index: last cutoff <= x
            let w = cuts.partition_point(|&c| c <= x);
            if w == 0 {
                continue;
            }
            let w = w - 1;
            window_inf[w] = window_inf[w].min(v);
            window_sup[w] = window_sup[w].max(v);
        }
        // drop empty windows
        let keep: Vec<usize> = (0..nw).filter(|&i| window_sup[i] >= window_inf[i]).collect();
        let cuts: Vec<f64> = keep.iter().map(|&i| cuts[i]).collect();
        let window_inf: Vec<f64> = keep.iter().map(|&i| window_inf[i]).collect();
        let window_sup: Vec<f64> = keep.iter().map(|&i| window_sup[i]).collect();
        let mut tail_inf = window_inf.clone();
        let mut tail_sup = window_sup.clone();
        for i in (0..tail_inf.len().saturating_sub(1)).rev() {
            tail_inf[i] = tail_inf[i].min(tail_inf[i + 1]);
            tail_sup[i] = tail_sup[i].max(tail_sup[i + 1]);
        }
        let (inf_trend, li) = classify(&window_inf, log_scale);
        let (sup_trend, ls) = classify(&window_sup, log_scale);
        let out = |v: f64| if log_scale { v.exp() } else { v };
        let map = |v: &[f64]| reals(&v.iter().map(|&x| out(x)).collect::<Vec<_>>());
        EnvelopeEstimate {
            stream: stream.to_string(),
            log_scale,
            cutoffs: cuts,
            tail_inf: map(&tail_inf),
            tail_sup: map(&tail_sup),
            window_inf: map(&window_inf),
            window_sup: map(&window_sup),
            inf_trend,
            sup_trend,
            liminf: Real(out(li)),
            limsup: Real(out(ls)),
            global_inf: Real(out(gi.0)),
            global_sup: Real(out(gs.0)),
            argmin_x: gi.1.map_or(f64::NAN, |i| points[i].0),
            argmax_x: gs.1.map_or(f64::NAN, |i| points[i].0),
            argmin: None,
            argmax: None,
            argmin_pos: gi.1,
            argmax_pos: gs.1,
            diverging: sup_trend == Trend::DivergingUp || inf_trend == Trend::DivergingDown,
            horizon: x_max,
            samples,
        }
    }

    /// Largest and smallest value over the tail beyond the first kept cutoff.
    pub fn tail_bounds(&self) -> (f64, f64) {
        match (self.tail_inf.first(), self.tail_sup.first()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => (self.global_inf.0, self.global_sup.0),
        }
    }

    /// Both ends settled and within `tol` (relative to max(1, |limit|)).
    pub fn has_limit(&self, tol: f64) -> bool {
        self.inf_trend.settled()
            && self.sup_trend.settled()
            && (self.limsup.0 - self.liminf.0).abs() <= tol * self.limsup.0.abs().max(1.0)
    }

    /// Midpoint of the two limit estimates.
    pub fn limit(&self) -> f64 {
        0.5 * (self.liminf.0 + self.limsup.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(f: impl Fn(f64) -> f64, xmax: u64) -> Vec<(BigIndex, f64)> {
        (1..xmax * 4).map(|i| {
            let x = i as f64 / 4.0;
            (BigIndex::floor_exp2(x), f(x))
        }).collect()
    }

    #[test]
    fn converging_stream() {
        let pts = stream(|x| 1.0 + 1.0 / x, 40);
        let cuts = crate::seqcore::geometric_cutoffs(40.0);
        let e = EnvelopeEstimate::build("t", &pts, &cuts, false);
        assert!(e.inf_trend.settled());
        assert!((e.liminf.0 - 1.0).abs() < 5e-3);
        for w in e.tail_inf.windows(2) {
            assert!(w[0].0 <= w[1].0);
        }
        for w in e.tail_sup.windows(2) {
            assert!(w[0].0 >= w[1].0);
        }
    }

    #[test]
    fn diverging_and_oscillating() {
        let pts = stream(|x| x.ln(), 60);
        let cuts = crate::seqcore::geometric_cutoffs(60.0);
        let e = EnvelopeEstimate::build("t", &pts, &cuts, false);
        assert_eq!(e.sup_trend, Trend::DivergingUp);
        let pts = stream(|x| 2.0 + (x * 1.3).sin(), 60);
        let e = EnvelopeEstimate::build("t", &pts, &cuts, false);
        assert!((e.liminf.0 - 1.0).abs() < 1e-2 && (e.limsup.0 - 3.0).abs() < 1e-2);
        assert!(!e.has_limit(1e-2));
    }

    #[test]
    fn insufficient() {
        let pts = stream(|x| x, 3);
        let e = EnvelopeEstimate::build("t", &pts, &crate::seqcore::geometric_cutoffs(3.0), false);
        assert_eq!(e.inf_trend, Trend::Insufficient);
    }

    #[test]
    fn real_serialization() {
        let s = serde_json::to_string(&reals(&[1.5, f64::INFINITY, f64::NAN])).unwrap();
        assert_eq!(s, r#"[1.5,"inf","nan"]"#);
    }
}
