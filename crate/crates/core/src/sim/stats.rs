//! Goodness-of-fit tests used to compare simulated laws.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use serde::Serialize;

use super::Histogram;

/// Result of a chi-square test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test of homogeneity on integer-valued samples.
///
/// Adjacent values are pooled, in increasing order, until every cell has an
/// expected count of at least five; a short remainder joins the last cell.
pub fn chi2_homogeneity(a: &Histogram, b: &Histogram) -> ChiSquareTest {
    let (na, nb) = (a.total() as f64, b.total() as f64);
    let total = na + nb;
    let frac_min = na.min(nb) / total;
    // a cell of pooled size m has smallest expected count m * frac_min
    let need = 5.0 / frac_min;

    let mut values: Vec<u64> = a.counts().keys().chain(b.counts().keys()).copied().collect();
    values.sort_unstable();
    values.dedup();

    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for v in values {
        ca += a.count(v) as f64;
        cb += b.count(v) as f64;
        if ca + cb >= need {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    if cells.len() < 2 {
        return ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(oa, ob)| {
            let col = oa + ob;
            let (ea, eb) = (col * na / total, col * nb / total);
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();
    let dof = cells.len() - 1;
    let p_value = ChiSquared::new(dof as f64).expect("positive dof").sf(statistic);
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

/// Kolmogorov-Smirnov statistic `sup |F_n - F|` for a continuous `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS p-value with Stephens' small-sample correction.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let d = ks_statistic(sample, cdf);
    let root = (sample.len() as f64).sqrt();
    kolmogorov_sf((root + 0.12 + 0.11 / root) * d)
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
