//! Compensated sums, harmonic numbers, log-factorials and the `log log` sums
//! used by the `m_alpha_beta` families.

use crate::bigindex::BigIndex;
use std::sync::OnceLock;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Harmonic numbers are tabulated exactly up to this index.
pub const HARMONIC_TABLE: u64 = 1 << 20;
/// Log-factorials and `log log` sums are tabulated up to this index.
pub const SMALL_TABLE: u64 = 1 << 16;

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Prefix sums `out[n] = f(1) + ... + f(n)`, `out[0] = 0`.
pub fn prefix_table(n: u64, f: impl Fn(u64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = Neumaier::new();
    out.push(0.0);
    for k in 1..=n {
        acc.add(f(k));
        out.push(acc.value());
    }
    out
}

fn harmonic_table() -> &'static [f64] {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| prefix_table(HARMONIC_TABLE, |k| 1.0 / k as f64))
}

fn ln_factorial_table() -> &'static [f64] {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| prefix_table(SMALL_TABLE, |k| (k as f64).ln()))
}

fn loglog_table() -> &'static [f64] {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| prefix_table(SMALL_TABLE, |m| loglog_term(m as f64)))
}

/// `ln ln(e + x)`.
pub fn loglog_term(x: f64) -> f64 {
    (std::f64::consts::E + x).ln().ln()
}

fn small(p: &BigIndex, limit: u64) -> Option<usize> {
    p.to_u64().filter(|&n| n <= limit).map(|n| n as usize)
}

/// Tail of the asymptotic series `H_p - ln p - gamma`.
fn harmonic_tail(inv: f64) -> f64 {
    let i2 = inv * inv;
    inv / 2.0 - i2 / 12.0 + i2 * i2 / 120.0 - i2 * i2 * i2 / 252.0
}

/// `H_p = 1 + 1/2 + ... + 1/p`, `H_0 = 0`.
pub fn harmonic(p: &BigIndex) -> f64 {
    if let Some(n) = small(p, HARMONIC_TABLE) {
        return harmonic_table()[n];
    }
    p.ln() + EULER_GAMMA + harmonic_tail(1.0 / p.to_f64())
}

/// `H_b - H_a` for `a <= b`, without forming the large terms when both are big.
pub fn harmonic_diff(a: &BigIndex, b: &BigIndex) -> f64 {
    let sa = small(a, HARMONIC_TABLE);
    let sb = small(b, HARMONIC_TABLE);
    match (sa, sb) {
        (Some(i), Some(j)) => harmonic_table()[j] - harmonic_table()[i],
        (Some(i), None) => harmonic(b) - harmonic_table()[i],
        _ => {
            b.ln_ratio(a) + harmonic_tail(1.0 / b.to_f64()) - harmonic_tail(1.0 / a.to_f64())
        }
    }
}

/// `ln(n!)`.
pub fn ln_factorial(p: &BigIndex) -> f64 {
    if let Some(n) = small(p, SMALL_TABLE) {
        return ln_factorial_table()[n];
    }
    let x = p.to_f64();
    if !x.is_finite() {
        return f64::INFINITY;
    }
    x * ln_factorial_mean(p)
}

/// `ln(n!) / n` for `n >= 1`, finite for any magnitude.
pub fn ln_factorial_mean(p: &BigIndex) -> f64 {
    if let Some(n) = small(p, SMALL_TABLE) {
        return if n == 0 { 0.0 } else { ln_factorial_table()[n] / n as f64 };
    }
    let l = p.ln();
    let inv = 1.0 / p.to_f64();
    let i2 = inv * inv;
    let corr = inv / 12.0 - inv * i2 / 360.0 + inv * i2 * i2 / 1260.0;
    l - 1.0 + ((2.0 * std::f64::consts::PI).ln() + l) / 2.0 * inv + corr * inv
}

/// `S(p) = sum_{m=1}^{p} ln ln(e + m)`.
pub fn loglog_sum(p: &BigIndex) -> f64 {
    if let Some(n) = small(p, SMALL_TABLE) {
        return loglog_table()[n];
    }
    let x = p.to_f64();
    if !x.is_finite() {
        return f64::INFINITY;
    }
    x * loglog_sum_mean(p)
}

/// `S(p) / p` for `p >= 1`, finite for any magnitude.
///
/// Beyond the table: Euler-Maclaurin from the table end, with the integral
/// rewritten as `int_0^V ln ln(e + p e^{-v}) e^{-v} dv`.
pub fn loglog_sum_mean(p: &BigIndex) -> f64 {
    if let Some(n) = small(p, SMALL_TABLE) {
        return if n == 0 { 0.0 } else { loglog_table()[n] / n as f64 };
    }
    let nn = SMALL_TABLE as f64;
    let lp = p.ln();
    let inv = (-lp).exp();
    let vmax = (lp - nn.ln()).min(60.0);
    let e = std::f64::consts::E;
    let integrand = |v: f64| {
        let inner = lp - v + (e * (v - lp).exp()).ln_1p();
        inner.ln() * (-v).exp()
    };
    let integral = integrate(integrand, 0.0, vmax, (vmax.ceil() as usize).max(1));
    let g = |lx: f64| (lx.exp() + e).ln().ln();
    let dg = |x: f64| 1.0 / ((e + x) * (e + x).ln());
    let g_p = (lp + (e * (-lp).exp()).ln_1p()).ln();
    let em = (g_p - g(nn.ln())) / 2.0 + (dg(p.to_f64()) - dg(nn)) / 12.0;
    loglog_table()[SMALL_TABLE as usize] * inv + integral + em * inv
}

fn gauss_legendre_16() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(16))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Composite 16-point Gauss-Legendre quadrature on `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (xs, ws) = gauss_legendre_16();
    let h = (b - a) / panels as f64;
    let mut acc = Neumaier::new();
    for i in 0..panels {
        let lo = a + h * i as f64;
        let mid = lo + h / 2.0;
        for (x, w) in xs.iter().zip(ws) {
            acc.add(w * f(mid + x * h / 2.0) * h / 2.0);
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(n: u64) -> BigIndex {
        BigIndex::from_u64(n)
    }

    #[test]
    fn harmonic_small_values() {
        assert_eq!(harmonic(&b(1)), 1.0);
        assert!((harmonic(&b(10)) - 2.928_968_253_968_254).abs() < 1e-14);
    }

    #[test]
    fn harmonic_paths_agree_at_switchover() {
        // exact table vs the asymptotic series one step below the switch
        let n = HARMONIC_TABLE;
        let lnn = (n as f64).ln();
        let asym = lnn + EULER_GAMMA + harmonic_tail(1.0 / n as f64);
        assert!((asym - harmonic(&b(n))).abs() < 1e-13);
        // direct summation beyond the table
        let mut acc = Neumaier::new();
        for k in 1..=(n + 1000) {
            acc.add(1.0 / k as f64);
        }
        assert!((acc.value() - harmonic(&b(n + 1000))).abs() < 1e-13);
    }

    #[test]
    fn harmonic_huge() {
        let h = harmonic(&BigIndex::pow2(81));
        assert!((h - (81.0 * std::f64::consts::LN_2 + EULER_GAMMA)).abs() < 1e-12);
        assert!((h - 56.7221).abs() < 1e-4);
    }

    #[test]
    fn harmonic_diff_consistent() {
        let a = BigIndex::pow2(30);
        let c = BigIndex::pow2(60);
        let d = harmonic_diff(&a, &c);
        assert!((d - (harmonic(&c) - harmonic(&a))).abs() < 1e-12);
        assert!((harmonic_diff(&b(3), &b(10)) - (1.0 / 4.0 + 0.2 + 1.0 / 6.0 + 1.0 / 7.0 + 0.125 + 1.0 / 9.0 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn ln_factorial_stirling_matches_table_region() {
        // sum of logs past the table vs Stirling
        let n = SMALL_TABLE + 5000;
        let mut acc = Neumaier::new();
        for k in 1..=n {
            acc.add((k as f64).ln());
        }
        let s = ln_factorial(&b(n));
        assert!(((s - acc.value()) / s).abs() < 1e-14);
        assert!((ln_factorial(&b(4)) - 24f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn loglog_mean_matches_direct_sum() {
        for n in [SMALL_TABLE + 1, 200_000u64, 1_000_000] {
            let mut acc = Neumaier::new();
            for m in 1..=n {
                acc.add(loglog_term(m as f64));
            }
            let want = acc.value() / n as f64;
            let got = loglog_sum_mean(&b(n));
            assert!((got - want).abs() < 1e-12, "n={n} got={got} want={want}");
        }
    }

    #[test]
    fn gauss_legendre_polynomials() {
        let v = integrate(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0, 1);
        assert!((v - (32.0 + 8.0)).abs() < 1e-12);
    }
}
