//! Compound Poisson laws on the nonnegative integers: PMF by Panjer
//! recursion, moments, and total-variation distances.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-12;

const SUM_TOL: f64 = 1e-12;
const RESCALE_AT: f64 = 1e200;

/// Increment law on `{1, ..., m}`; `pmf[j - 1]` is the mass at `j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementDist {
    pmf: Vec<f64>,
}

impl IncrementDist {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::param("increment pmf", "[]", "must be nonempty"));
        }
        if let Some(bad) = pmf.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param("increment pmf", bad, "entries must be finite and nonnegative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::param("increment pmf", total, "must sum to one"));
        }
        Ok(Self { pmf })
    }

    /// Point mass at `k >= 1`.
    pub fn dirac(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", k, "increments start at 1"));
        }
        let mut pmf = vec![0.0; k];
        pmf[k - 1] = 1.0;
        Ok(Self { pmf })
    }

    /// Extends the support with zero mass up to `len`.
    pub fn padded(mut self, len: usize) -> Self {
        if self.pmf.len() < len {
            self.pmf.resize(len, 0.0);
        }
        self
    }

    pub fn support_max(&self) -> usize {
        self.pmf.len()
    }

    /// Mass at `j`, zero outside the support.
    pub fn prob(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.pmf.get(j - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| ((i + 1) as f64).powi(2) * p).sum()
    }

    /// Total-variation distance between two increment laws.
    pub fn tv(&self, other: &Self) -> f64 {
        let m = self.support_max().max(other.support_max());
        0.5 * (1..=m).map(|j| (self.prob(j) - other.prob(j)).abs()).sum::<f64>()
    }
}

/// `CP(lambda, zeta)`: the law of a Poisson(`lambda`) sum of i.i.d. `zeta`
/// increments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompoundPoisson {
    lambda: f64,
    increments: IncrementDist,
}

impl CompoundPoisson {
    pub fn new(lambda: f64, increments: IncrementDist) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::param("lambda", lambda, "must be finite and nonnegative"));
        }
        Ok(Self { lambda, increments })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::new(lambda, IncrementDist::dirac(1)?)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn increments(&self) -> &IncrementDist {
        &self.increments
    }

    /// One draw of `sum_{i <= N} Z_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.lambda == 0.0 {
            return 0;
        }
        let n = Poisson::new(self.lambda).expect("validated rate").sample(rng) as u64;
        let z = WeightedIndex::new(self.increments.pmf()).expect("validated pmf");
        (0..n).map(|_| z.sample(rng) as u64 + 1).sum()
    }
}

/// Law on `{0, ..., pmf.len() - 1}` plus unassigned `tail_mass` beyond.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteDist {
    pmf: Vec<f64>,
    tail_mass: f64,
}

impl DiscreteDist {
    pub fn new(pmf: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if let Some(bad) = pmf.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param("pmf", bad, "entries must be finite and nonnegative"));
        }
        if !(tail_mass.is_finite() && tail_mass >= 0.0) {
            return Err(Error::param("tail_mass", tail_mass, "must be finite and nonnegative"));
        }
        let total = pmf.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::param("pmf", total, "mass plus tail must equal one"));
        }
        Ok(Self { pmf, tail_mass })
    }

    pub fn dirac(k: usize) -> Self {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        Self { pmf, tail_mass: 0.0 }
    }

    /// Empirical law of a sample of counts.
    pub fn from_samples(samples: &[u64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("samples", 0, "need at least one observation"));
        }
        let max = *samples.iter().max().expect("nonempty") as usize;
        let mut pmf = vec![0.0; max + 1];
        for &s in samples {
            pmf[s as usize] += 1.0;
        }
        let n = samples.len() as f64;
        pmf.iter_mut().for_each(|v| *v /= n);
        Ok(Self { pmf, tail_mass: 0.0 })
    }

    /// Empirical law from `(value, count)` pairs.
    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(counts: I) -> Result<Self> {
        let pairs: Vec<(u64, u64)> = counts.into_iter().collect();
        let total: u64 = pairs.iter().map(|&(_, c)| c).sum();
        if total == 0 {
            return Err(Error::param("counts", 0, "need at least one observation"));
        }
        let max = pairs.iter().map(|&(k, _)| k).max().unwrap_or(0) as usize;
        let mut pmf = vec![0.0; max + 1];
        for (k, c) in pairs {
            pmf[k as usize] += c as f64 / total as f64;
        }
        Ok(Self { pmf, tail_mass: 0.0 })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| (k as f64).powi(2) * p).sum()
    }
}

/// PMF of `cp` by Panjer recursion, truncated once the accumulated mass
/// reaches `1 - eps`.
///
/// The recursion runs on an unnormalised sequence that is rescaled whenever
/// it grows past `1e200`, so rates far beyond `exp(-lambda)` underflow are
/// handled.
pub fn cp_pmf(cp: &CompoundPoisson, eps: f64) -> Result<DiscreteDist> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", eps, "must lie in (0, 1)"));
    }
    let lambda = cp.lambda();
    if lambda == 0.0 {
        return Ok(DiscreteDist::dirac(0));
    }
    let zeta = cp.increments();
    let m = zeta.support_max();
    let weights: Vec<f64> = (1..=m).map(|j| j as f64 * zeta.prob(j)).collect();
    let max_terms = ((m as f64) * (lambda + 40.0 * lambda.sqrt() + 100.0)).ceil() as usize;

    let mut w: Vec<f64> = vec![1.0];
    // w[k] * exp(log_scale - lambda) = p(k)
    let mut log_scale = 0.0;
    let mut acc = 1.0;
    let mass = |acc: f64, log_scale: f64| acc * (log_scale - lambda).exp();
    let mut k = 0;
    while mass(acc, log_scale) < 1.0 - eps && k < max_terms {
        k += 1;
        let s: f64 = (1..=m.min(k)).map(|j| weights[j - 1] * w[k - j]).sum();
        let v = lambda / k as f64 * s;
        w.push(v);
        acc += v;
        if v > RESCALE_AT {
            w.iter_mut().for_each(|x| *x /= RESCALE_AT);
            acc /= RESCALE_AT;
            log_scale += RESCALE_AT.ln();
        }
    }
    let factor = (log_scale - lambda).exp();
    let pmf: Vec<f64> = w.into_iter().map(|x| x * factor).collect();
    let total: f64 = pmf.iter().sum();
    let tail_mass = (1.0 - total).max(0.0);
    // round-off can push the sum a hair above one
    let pmf = if total > 1.0 { pmf.into_iter().map(|x| x / total).collect() } else { pmf };
    DiscreteDist::new(pmf, tail_mass)
}

/// Poisson(`lambda`) truncated like [`cp_pmf`].
pub fn poisson_pmf(lambda: f64, eps: f64) -> Result<DiscreteDist> {
    cp_pmf(&CompoundPoisson::poisson(lambda)?, eps)
}

/// `(E Z, E Z^2)` for `Z ~ CP(lambda, zeta)`.
pub fn cp_moments(cp: &CompoundPoisson) -> (f64, f64) {
    let mean = cp.lambda() * cp.increments().mean();
    (mean, cp.lambda() * cp.increments().second_moment() + mean * mean)
}

/// `1/2 sum_k |p1(k) - p2(k)|` plus half of both truncation tails, capped at
/// one.
pub fn tv_distance(d1: &DiscreteDist, d2: &DiscreteDist) -> f64 {
    let len = d1.pmf().len().max(d2.pmf().len());
    let body: f64 = (0..len).map(|k| (d1.prob(k) - d2.prob(k)).abs()).sum();
    (0.5 * body + 0.5 * (d1.tail_mass() + d2.tail_mass())).min(1.0)
}

/// Upper bound on the TV distance between two compound Poisson laws:
/// `min(l1, l2) tv(z1, z2) + min(|l1 - l2|, sqrt(2/e) |sqrt(l1) - sqrt(l2)|)`.
pub fn cp_tv_bound(cp1: &CompoundPoisson, cp2: &CompoundPoisson) -> f64 {
    let (l1, l2) = (cp1.lambda(), cp2.lambda());
    let rate = (l1 - l2)
        .abs()
        .min((2.0 / std::f64::consts::E).sqrt() * (l1.sqrt() - l2.sqrt()).abs());
    l1.min(l2) * cp1.increments().tv(cp2.increments()) + rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SimRng;

    fn ln_factorial(k: usize) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn unit_increments_give_poisson() {
        for &lambda in &[0.3, 1.0, 7.5] {
            let d = poisson_pmf(lambda, DEFAULT_EPS).unwrap();
            assert!((d.prob(0) - (-lambda).exp()).abs() < 1e-15);
            assert!((d.prob(1) - lambda * (-lambda).exp()).abs() < 1e-15);
            assert!(d.tail_mass() <= DEFAULT_EPS);
        }
    }

    #[test]
    fn dirac_two_has_even_support() {
        let lambda = 1.7;
        let cp = CompoundPoisson::new(lambda, IncrementDist::dirac(2).unwrap()).unwrap();
        let d = cp_pmf(&cp, DEFAULT_EPS).unwrap();
        for (k, &p) in d.pmf().iter().enumerate() {
            if k % 2 == 1 {
                assert_eq!(p, 0.0);
            } else {
                let j = k / 2;
                let want = (-lambda + j as f64 * lambda.ln() - ln_factorial(j)).exp();
                assert!((p - want).abs() < 1e-15, "k={k}");
            }
        }
    }

    #[test]
    fn large_rate_survives_underflow() {
        // exp(-2000) underflows; the recursion still normalises
        let cp = CompoundPoisson::new(2000.0, IncrementDist::new(vec![0.5, 0.5]).unwrap()).unwrap();
        let d = cp_pmf(&cp, 1e-10).unwrap();
        let (mean, second) = cp_moments(&cp);
        assert!((d.mean() - mean).abs() / mean < 1e-8);
        assert!((d.second_moment() - second).abs() / second < 1e-8);
        assert!(d.tail_mass() <= 1e-10);
    }

    #[test]
    fn moments_closed_forms() {
        let cp = CompoundPoisson::poisson(3.0).unwrap();
        assert_eq!(cp_moments(&cp), (3.0, 12.0));
        let cp = CompoundPoisson::new(2.0, IncrementDist::dirac(2).unwrap()).unwrap();
        assert_eq!(cp_moments(&cp), (4.0, 24.0));
    }

    #[test]
    fn empirical_moments_agree() {
        let cp = CompoundPoisson::new(1.3, IncrementDist::new(vec![0.2, 0.5, 0.3]).unwrap()).unwrap();
        let mut rng = SimRng::new(7, 0);
        let draws = 1_000_000;
        let xs: Vec<f64> = (0..draws).map(|_| cp.sample(&mut rng) as f64).collect();
        let (mean, second) = cp_moments(&cp);
        let m = xs.iter().sum::<f64>() / draws as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / draws as f64;
        assert!((m - mean).abs() < 4.0 * (v / draws as f64).sqrt());
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let m2 = sq.iter().sum::<f64>() / draws as f64;
        let v2 = sq.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / draws as f64;
        assert!((m2 - second).abs() < 4.0 * (v2 / draws as f64).sqrt());
    }

    #[test]
    fn tv_basics() {
        let d = poisson_pmf(2.0, DEFAULT_EPS).unwrap();
        assert!(tv_distance(&d, &d) <= DEFAULT_EPS);
        assert_eq!(tv_distance(&DiscreteDist::dirac(0), &DiscreteDist::dirac(1)), 1.0);
    }

    #[test]
    fn tv_poisson_pair_matches_direct_sum() {
        let a = poisson_pmf(1.0, 1e-15).unwrap();
        let b = poisson_pmf(1.1, 1e-15).unwrap();
        let direct: f64 = 0.5
            * (0..=200)
                .map(|k| {
                    let lk = ln_factorial(k);
                    ((-1.0 - lk).exp() - (-1.1 + k as f64 * 1.1f64.ln() - lk).exp()).abs()
                })
                .sum::<f64>();
        assert!((tv_distance(&a, &b) - direct).abs() < 1e-10);
    }

    #[test]
    fn bound_formula() {
        let z = IncrementDist::new(vec![0.4, 0.6]).unwrap();
        let c1 = CompoundPoisson::new(1.0, z.clone()).unwrap();
        let c4 = CompoundPoisson::new(4.0, z).unwrap();
        assert_eq!(cp_tv_bound(&c1, &c1), 0.0);
        assert!((cp_tv_bound(&c1, &c4) - (2.0 / std::f64::consts::E).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(IncrementDist::new(vec![0.5, 0.4]).is_err());
        assert!(IncrementDist::new(vec![1.2, -0.2]).is_err());
        assert!(IncrementDist::dirac(0).is_err());
        assert!(CompoundPoisson::poisson(-1.0).is_err());
        assert!(CompoundPoisson::poisson(f64::INFINITY).is_err());
        assert!(DiscreteDist::new(vec![0.5], 0.2).is_err());
        assert!(cp_pmf(&CompoundPoisson::poisson(1.0).unwrap(), 0.0).is_err());
    }
}
