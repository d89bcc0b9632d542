use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Normal,
    ClopperPearson,
    OrderStatistic,
    None,
}

impl CiMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CiMethod::Normal => "normal",
            CiMethod::ClopperPearson => "clopper_pearson",
            CiMethod::OrderStatistic => "order_statistic",
            CiMethod::None => "none",
        }
    }
}

pub(crate) fn z_quantile(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0)
}

/// Sample mean with a normal-approximation interval.
pub fn normal_interval(samples: &[f64], level: f64) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, mean, mean);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = z_quantile(level) * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Exact binomial interval for `k` successes out of `n`.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    let a = 1.0 - level;
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64).expect("beta").inverse_cdf(a / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new((k + 1) as f64, (n - k) as f64).expect("beta").inverse_cdf(1.0 - a / 2.0)
    };
    (lo, hi)
}

/// Kaplan–Meier survival `P(T > n)` for `n = 0..=max_time`.
///
/// `events` holds `(time, observed)`; censored times count as at risk up to
/// and including their time.
pub fn kaplan_meier(events: &[(u64, bool)], max_time: u64) -> Vec<f64> {
    let len = max_time as usize + 1;
    let mut deaths = vec![0u64; len];
    let mut leaving = vec![0u64; len];
    for &(t, observed) in events {
        let t = (t as usize).min(len - 1);
        if observed {
            deaths[t] += 1;
        }
        leaving[t] += 1;
    }
    let mut at_risk = events.len() as u64;
    let mut s = 1.0;
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        if at_risk > 0 && deaths[t] > 0 {
            s *= 1.0 - deaths[t] as f64 / at_risk as f64;
        }
        out.push(s);
        at_risk -= leaving[t];
    }
    out
}

/// Least-squares line through `(n, log S(n))` over the points with
/// `n ≥ 1` and `S(n) > 0`: `(slope, intercept, R²)`.
pub fn tail_fit(survival: &[f64]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = survival
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &s)| s > 0.0)
        .map(|(n, &s)| (n as f64, s.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, my - slope * mx, r2))
}

/// Nearest-rank quantile of sorted data with an order-statistic interval.
pub(crate) fn quantile_with_ci(sorted: &[f64], q: f64, level: f64) -> (f64, f64, f64) {
    let n = sorted.len();
    let rank = |r: f64| sorted[(r.ceil().max(1.0) as usize).min(n) - 1];
    let value = rank(q * n as f64);
    let half = z_quantile(level) * (n as f64 * q * (1.0 - q)).sqrt();
    (value, rank(n as f64 * q - half), rank(n as f64 * q + half + 1.0))
}
