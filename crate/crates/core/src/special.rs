//! Modified Bessel function `I0` and Gauss–Legendre rules.

use std::f64::consts::PI;

/// Below this argument `I0` is summed from its power series (all terms
/// positive, so no cancellation); above it the asymptotic expansion is
/// accurate to `O(e^{-2t})` relative.
pub const I0_SERIES_LIMIT: f64 = 20.0;

fn i0_series(t: f64) -> f64 {
    let q = 0.25 * t * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < f64::EPSILON * 0.5 * sum {
            return sum;
        }
        k += 1.0;
    }
}

/// `sum_k a_k t^{-k}` with `a_k = ((2k-1)!!)^2 / (k! 8^k)`, truncated at
/// the smallest term.
fn i0_asymptotic_series(t: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * t);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < f64::EPSILON * 0.25 * sum {
            break;
        }
    }
    sum
}

/// Exponentially scaled Bessel function `e^{-t} I0(t)` for `t >= 0`.
pub fn bessel_i0_scaled(t: f64) -> f64 {
    let t = t.abs();
    if t <= I0_SERIES_LIMIT {
        (-t).exp() * i0_series(t)
    } else {
        i0_asymptotic_series(t) / (2.0 * PI * t).sqrt()
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(t: f64) -> f64 {
    let t = t.abs();
    if t <= I0_SERIES_LIMIT {
        i0_series(t)
    } else {
        t.exp() * bessel_i0_scaled(t)
    }
}

/// Coefficients `c_k` of the large-`t` expansion
/// `(e^{-t} I0(t))^d = (2 pi t)^{-d/2} sum_k c_k t^{-k}`, first `terms` of them.
pub fn scaled_i0_power_coefficients(d: usize, terms: usize) -> Vec<f64> {
    let mut a = vec![1.0; terms];
    for k in 1..terms {
        let kf = k as f64;
        a[k] = a[k - 1] * (2.0 * kf - 1.0).powi(2) / (8.0 * kf);
    }
    let mut acc = vec![0.0; terms];
    acc[0] = 1.0;
    for _ in 0..d {
        let mut next = vec![0.0; terms];
        for (i, &x) in acc.iter().enumerate() {
            for (j, &y) in a.iter().enumerate().take(terms - i) {
                next[i + j] += x * y;
            }
        }
        acc = next;
    }
    acc
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
