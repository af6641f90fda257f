//! Numerical KL divergences computed straight from log-densities, with no
//! reference to the closed forms under test.

#![allow(dead_code)]

/// Composite Simpson rule on `[a, b]` with `intervals` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn bernoulli(p: f64, q: f64) -> f64 {
    [(1.0, p, q), (0.0, 1.0 - p, 1.0 - q)]
        .iter()
        .filter(|(_, pp, _)| *pp > 0.0)
        .map(|(_, pp, qq)| pp * (pp.ln() - qq.ln()))
        .sum()
}

/// Sums `p(k) ln(p(k)/q(k))` until the remaining tail mass under `p` drops below 1e-12.
pub fn poisson(p: f64, q: f64) -> f64 {
    let log_pmf = |k: u64, lambda: f64, ln_fact: f64| k as f64 * lambda.ln() - lambda - ln_fact;
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut ln_fact = 0.0;
    let mut k = 0u64;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let lp = log_pmf(k, p, ln_fact);
        let lq = log_pmf(k, q, ln_fact);
        let pk = lp.exp();
        total += pk * (lp - lq);
        mass += pk;
        if k as f64 > p && 1.0 - mass < 1e-12 {
            break;
        }
        k += 1;
    }
    total
}

/// Mean-parameterized exponential densities, integrated on `u = s / θ`.
pub fn exponential(p: f64, q: f64) -> f64 {
    let log_f = |s: f64, theta: f64| -theta.ln() - s / theta;
    simpson(
        |u| {
            let s = u * p;
            (-u).exp() * (log_f(s, p) - log_f(s, q))
        },
        0.0,
        60.0,
        60_000,
    )
}

pub fn gaussian(p: f64, q: f64, sigma: f64) -> f64 {
    let log_f = |x: f64, mu: f64| {
        -0.5 * ((x - mu) / sigma).powi(2) - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
    };
    simpson(
        |z| {
            let x = p + sigma * z;
            (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * (log_f(x, p) - log_f(x, q))
        },
        -40.0,
        40.0,
        80_000,
    )
}

/// 50 parameter pairs spread over `[lo, hi]`, including a few identical pairs.
pub fn pair_grid(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (0..10).map(|i| lo + (hi - lo) * i as f64 / 9.0).collect();
    let mut pairs = Vec::new();
    for (i, &a) in pts.iter().enumerate() {
        for d in [0usize, 1, 3, 5, 8] {
            pairs.push((a, pts[(i + d) % pts.len()]));
        }
    }
    pairs
}
