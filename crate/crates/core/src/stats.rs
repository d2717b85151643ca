//! Goodness-of-fit statistics and small descriptive helpers.

use std::collections::BTreeMap;

use crate::error::{Result, SieveError};

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_m - F|`, exact over the sorted sample.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    if values.is_empty() {
        return Err(SieveError::Parameter("KS needs a nonempty sample".into()));
    }
    let xs = sorted(values);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance by merge scan; tied values are
/// consumed from both samples before the CDFs are compared.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SieveError::Parameter("KS needs two nonempty samples".into()));
    }
    let (xs, ys) = (sorted(a), sorted(b));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov survival function `P{K > λ}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a two-sample KS distance.
pub fn ks_two_sample_pvalue(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    kolmogorov_survival(d * ne.sqrt())
}

/// Large-sample two-sample critical value `c(a)·sqrt((n+m)/(nm))`.
pub fn ks_two_sample_critical(significance: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (significance / 2.0).ln()).sqrt();
    c * ((na + nb) as f64 / (na * nb) as f64).sqrt()
}

/// Pearson homogeneity statistic for two categorical samples.
///
/// Categories whose pooled expected count is below `min_expected` are merged
/// into one bin. Returns `(statistic, degrees of freedom)`.
pub fn chi_square_homogeneity<K: Ord + Clone>(
    a: &BTreeMap<K, u64>,
    b: &BTreeMap<K, u64>,
    min_expected: f64,
) -> (f64, usize) {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let total = (na + nb) as f64;
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in keys {
        let ca = *a.get(k).unwrap_or(&0) as f64;
        let cb = *b.get(k).unwrap_or(&0) as f64;
        let smaller = na.min(nb) as f64;
        if (ca + cb) * smaller / total < min_expected {
            pooled.0 += ca;
            pooled.1 += cb;
        } else {
            cells.push((ca, cb));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let mut stat = 0.0;
    for &(ca, cb) in &cells {
        let row = ca + cb;
        let ea = row * na as f64 / total;
        let eb = row * nb as f64 / total;
        stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    (stat, cells.len().saturating_sub(1))
}

/// Total variation distance between an empirical histogram and a law.
pub fn total_variation<K: Ord>(counts: &BTreeMap<K, u64>, law: &BTreeMap<K, f64>) -> f64 {
    let m: u64 = counts.values().sum();
    let mut tv = 0.0;
    for (k, &p) in law {
        let c = *counts.get(k).unwrap_or(&0) as f64 / m as f64;
        tv += (c - p).abs();
    }
    for (k, &c) in counts {
        if !law.contains_key(k) {
            tv += c as f64 / m as f64;
        }
    }
    0.5 * tv
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn std_error(values: &[f64]) -> f64 {
    (variance(values) / values.len() as f64).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let xs = sorted(values);
    let pos = q.clamp(0.0, 1.0) * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}
