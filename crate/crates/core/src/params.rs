//! Compound-Poisson parameters for vertex and star counts: universal-vertex
//! probabilities, increment laws, rates, thresholds, and Poisson bounds.

use rayon::prelude::*;
use serde::Serialize;

use crate::cpois::{CompoundPoisson, IncrementDist};
use crate::error::{Error, Result};
use crate::geometry::special::{inc_beta, ln_binomial, ln_gamma, reg_inc_beta};
use crate::geometry::{cap_constants, cap_radius, check_n, pn, sample_ball, CapSampler, SimRng};
use crate::graphs::{count_universal, geometric_graph, pseudo_geometric_graph};

/// Trials per RNG stream; fixed so estimates do not depend on thread count.
const CHUNK: u64 = 2048;

/// Adjacency used among the conditioned neighbours of the finite-`rho`
/// estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRule {
    /// Neighbours drawn from both antipodal caps, pseudo-metric adjacency.
    PseudoGeometric,
    /// Neighbours drawn from the cap around the hub only, Euclidean adjacency.
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaKind {
    Limit,
    Finite { rho: f64, rule: NeighborRule },
    Analytic,
}

/// Probabilities of `l` universal vertices, `values[l - 1]` for
/// `l = 1..=delta+1`. `trials == 0` marks exact values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub delta: usize,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub trials: u64,
    pub kind: AlphaKind,
}

impl AlphaEstimate {
    pub fn value(&self, l: usize) -> f64 {
        self.values[l - 1]
    }

    pub fn std_error(&self, l: usize) -> f64 {
        self.std_errors[l - 1]
    }

    /// `sum_l alpha_l / l`.
    pub fn harmonic_weight(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, a)| a / (i + 1) as f64).sum()
    }

    /// `sum_{l >= 2} alpha_l`.
    pub fn tail(&self) -> f64 {
        self.values[1..].iter().sum()
    }

    fn from_counts(delta: usize, counts: Vec<u64>, trials: u64, kind: AlphaKind) -> Self {
        let t = trials as f64;
        let values: Vec<f64> = counts.iter().map(|&c| c as f64 / t).collect();
        let std_errors = values.iter().map(|v| (v * (1.0 - v) / t).sqrt()).collect();
        Self {
            delta,
            values,
            std_errors,
            trials,
            kind,
        }
    }
}

fn check_delta(delta: usize) -> Result<()> {
    if delta == 0 {
        return Err(Error::param("delta", delta, "must be at least 1"));
    }
    Ok(())
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::param("trials", trials, "must be at least 1"));
    }
    Ok(())
}

/// Runs `trials` draws of `l` in fixed-size chunks, one RNG stream per
/// chunk, and tallies `l` in `1..=delta+1`.
fn tally<F>(delta: usize, trials: u64, seed: u64, draw: F) -> Result<Vec<u64>>
where
    F: Fn(&mut SimRng) -> Result<usize> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partial: Result<Vec<Vec<u64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = SimRng::new(seed, c);
            let len = CHUNK.min(trials - c * CHUNK);
            let mut counts = vec![0u64; delta + 1];
            for _ in 0..len {
                let l = draw(&mut rng)?;
                counts[l - 1] += 1;
            }
            Ok(counts)
        })
        .collect();
    Ok(partial?.into_iter().fold(vec![0u64; delta + 1], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        acc
    }))
}

/// Monte-Carlo `alpha_l`: `delta` uniform points in `B^{n-2}`, geometric
/// graph of radius one, `l` = universal vertices + 1.
pub fn estimate_alpha_limit(n: usize, delta: usize, trials: u64, seed: u64) -> Result<AlphaEstimate> {
    check_n(n)?;
    check_delta(delta)?;
    check_trials(trials)?;
    let dim = n - 2;
    let counts = tally(delta, trials, seed, |rng| {
        let pts: Vec<Vec<f64>> = (0..delta).map(|_| sample_ball(dim, rng)).collect();
        Ok(count_universal(&geometric_graph(&pts, 1.0)?) + 1)
    })?;
    Ok(AlphaEstimate::from_counts(delta, counts, trials, AlphaKind::Limit))
}

/// Monte-Carlo `alpha(l, r_rho)` conditional on one hub being adjacent to
/// `delta` neighbours, with the hub fixed at `e_1`.
pub fn estimate_alpha_finite(
    n: usize,
    delta: usize,
    rho: f64,
    trials: u64,
    seed: u64,
) -> Result<AlphaEstimate> {
    estimate_alpha_finite_with(n, delta, rho, trials, seed, NeighborRule::PseudoGeometric)
}

pub fn estimate_alpha_finite_with(
    n: usize,
    delta: usize,
    rho: f64,
    trials: u64,
    seed: u64,
    rule: NeighborRule,
) -> Result<AlphaEstimate> {
    check_n(n)?;
    check_delta(delta)?;
    check_trials(trials)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param("rho", rho, "conditional estimator needs rho in (0, 1)"));
    }
    let r = cap_radius(rho);
    let sampler = CapSampler::new(n, r)?;
    let mut hub = vec![0.0; n - 1];
    hub[0] = 1.0;
    let counts = tally(delta, trials, seed, |rng| {
        let mut pts = Vec::with_capacity(delta + 1);
        pts.push(hub.clone());
        for _ in 0..delta {
            let mut x = sampler.sample(rng);
            if rule == NeighborRule::PseudoGeometric && rand::Rng::random::<bool>(rng) {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            pts.push(x);
        }
        let g = match rule {
            NeighborRule::PseudoGeometric => pseudo_geometric_graph(&pts, r)?,
            NeighborRule::Geometric => geometric_graph(&pts, r)?,
        };
        Ok(count_universal(&g))
    })?;
    Ok(AlphaEstimate::from_counts(
        delta,
        counts,
        trials,
        AlphaKind::Finite { rho, rule },
    ))
}

/// Closed forms for `delta = 1` and `delta = 2`.
pub fn analytic_alpha(n: usize, delta: usize) -> Result<AlphaEstimate> {
    check_n(n)?;
    let values = match delta {
        1 => vec![0.0, 1.0],
        2 => {
            let a3 = alpha3_delta2(n)?;
            vec![1.0 - a3, 0.0, a3]
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "no closed form for universal-vertex probabilities with delta = {delta}"
            )))
        }
    };
    Ok(AlphaEstimate {
        delta,
        std_errors: vec![0.0; values.len()],
        values,
        trials: 0,
        kind: AlphaKind::Analytic,
    })
}

/// `(3/2) I_{3/4}((n-1)/2, 1/2)`: probability that two uniform points of
/// `B^{n-2}` lie within distance one.
fn alpha3_delta2(n: usize) -> Result<f64> {
    Ok(1.5 * reg_inc_beta(0.75, (n as f64 - 1.0) / 2.0, 0.5)?)
}

/// `zeta(l) = (alpha_l / l) / sum_s (alpha_s / s)`.
pub fn increment_dist(alpha: &AlphaEstimate) -> Result<IncrementDist> {
    let w = alpha.harmonic_weight();
    if !(w > 0.0) {
        return Err(Error::param("alpha", format!("{:?}", alpha.values), "all-zero probabilities"));
    }
    let mut pmf: Vec<f64> = alpha
        .values
        .iter()
        .enumerate()
        .map(|(i, a)| a / (i + 1) as f64 / w)
        .collect();
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|v| *v /= total);
    IncrementDist::new(pmf)
}

fn check_alpha(alpha: &AlphaEstimate, delta: usize) -> Result<()> {
    if alpha.delta != delta || alpha.values.len() != delta + 1 {
        return Err(Error::Dimension(format!(
            "alpha has delta = {}, expected {delta}",
            alpha.delta
        )));
    }
    Ok(())
}

/// `C(p,1) C(p-1,delta) (2 P_n(r_rho))^delta sum_l alpha(l, r_rho)/l`,
/// evaluated in log space.
pub fn lambda_finite(p: u64, n: usize, delta: usize, rho: f64, alpha: &AlphaEstimate) -> Result<f64> {
    check_alpha(alpha, delta)?;
    let mean = mean_star_count(p, n, delta, rho)?;
    Ok(mean * alpha.harmonic_weight())
}

/// `C(p,1) C(p-1,delta) (2 P_n(r_rho))^delta`: the expected star count under
/// a diagonal dispersion matrix.
pub fn mean_star_count(p: u64, n: usize, delta: usize, rho: f64) -> Result<f64> {
    check_n(n)?;
    check_delta(delta)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::param("rho", rho, "must lie in [0, 1)"));
    }
    if (delta as u64) >= p {
        return Err(Error::param("delta", delta, "must be below p"));
    }
    let cap = 2.0 * pn(cap_radius(rho), n)?;
    if cap == 0.0 {
        return Ok(0.0);
    }
    let pf = p as f64;
    let ln = pf.ln() + ln_binomial(pf - 1.0, delta as f64) + delta as f64 * cap.ln();
    Ok(ln.exp())
}

/// `e^delta / delta! * sum_l alpha_l / l`.
pub fn lambda_limit(delta: usize, e: f64, alpha: &AlphaEstimate) -> Result<f64> {
    check_alpha(alpha, delta)?;
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::param("e", e, "must be positive"));
    }
    let ln = delta as f64 * e.ln() - ln_gamma(delta as f64 + 1.0);
    Ok(ln.exp() * alpha.harmonic_weight())
}

/// `rho = 1 - (1/2) (e / (2 a_n p^{1+1/delta}))^{2/(n-2)}`.
pub fn rho_threshold(p: u64, n: usize, delta: usize, e: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::param("e", e, "must be positive"));
    }
    let c = cap_constants(n)?;
    let expo = 1.0 + 1.0 / delta as f64;
    let ln_ratio = e.ln() - (2.0 * c.a_n).ln() - expo * (p as f64).ln();
    let rho = 1.0 - 0.5 * (2.0 / (n as f64 - 2.0) * ln_ratio).exp();
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param("rho", rho, "threshold falls outside (0, 1); increase p or decrease e"));
    }
    Ok(rho)
}

/// `a_n 2^{n/2} p^{1+1/delta} (1 - rho)^{(n-2)/2}`.
pub fn e_from_rho(p: u64, n: usize, delta: usize, rho: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho", rho, "must lie in [0, 1]"));
    }
    let c = cap_constants(n)?;
    let nf = n as f64;
    let ln = c.a_n.ln()
        + nf / 2.0 * std::f64::consts::LN_2
        + (1.0 + 1.0 / delta as f64) * (p as f64).ln()
        + (nf - 2.0) / 2.0 * (1.0 - rho).ln();
    Ok(ln.exp())
}

/// Source for `sum_{l >= 2} alpha_l` in the Poisson-approximation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaTail {
    Supplied(f64),
    /// Closed form (only `delta = 2`).
    Analytic,
    /// Incomplete-beta upper bound.
    IncBetaBound,
    /// Closed form when available, otherwise the incomplete-beta bound.
    Default,
}

/// `delta (n-2) 2^{n-3} B(1/4; (n-2)/2, (n-2)(delta-1)/2 + 1)`, an upper
/// bound on `sum_{l >= 2} alpha_l`.
pub fn inc_beta_tail_bound(n: usize, delta: usize) -> Result<f64> {
    check_n(n)?;
    check_delta(delta)?;
    let nf = n as f64;
    let a = (nf - 2.0) / 2.0;
    let b = (nf - 2.0) * (delta as f64 - 1.0) / 2.0 + 1.0;
    let ln = (delta as f64 * (nf - 2.0)).ln() + (nf - 3.0) * std::f64::consts::LN_2;
    Ok(ln.exp() * inc_beta(0.25, a, b)?)
}

/// `(5/2) (e^delta / delta!) sum_{l >= 2} alpha_l`: bound on the TV distance
/// between the limiting compound Poisson law and `Pois(e^delta / delta!)`.
pub fn poisson_approx_bound_limit(n: usize, delta: usize, e: f64, tail: AlphaTail) -> Result<f64> {
    check_n(n)?;
    if delta < 2 {
        return Err(Error::Unsupported(
            "Poisson reduction needs delta >= 2; delta = 1 has increments Dirac(2)".into(),
        ));
    }
    let t = match tail {
        AlphaTail::Supplied(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param("alpha tail", t, "must lie in [0, 1]"));
            }
            t
        }
        AlphaTail::Analytic => analytic_alpha(n, delta)?.tail(),
        AlphaTail::IncBetaBound => inc_beta_tail_bound(n, delta)?,
        AlphaTail::Default if delta == 2 => analytic_alpha(n, delta)?.tail(),
        AlphaTail::Default => inc_beta_tail_bound(n, delta)?,
    };
    let ln = delta as f64 * e.ln() - ln_gamma(delta as f64 + 1.0);
    Ok(2.5 * ln.exp() * t)
}

/// `1 - exp(-lambda)`.
pub fn fwer(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", lambda, "must be nonnegative"));
    }
    Ok(-(-lambda).exp_m1())
}

/// `2 p^{1+1/delta} P_n(r_rho)`; reported only.
pub fn gamma_diagnostic(p: u64, n: usize, delta: usize, rho: f64) -> Result<f64> {
    check_delta(delta)?;
    let expo = 1.0 + 1.0 / delta as f64;
    Ok(2.0 * (p as f64).powf(expo) * pn(cap_radius(rho), n)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum ParamRegime {
    Finite { p: u64, rho: f64 },
    Limit { e: f64 },
}

/// Rate and increment law of a compound Poisson approximation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpParams {
    pub lambda: f64,
    pub zeta: IncrementDist,
    pub regime: ParamRegime,
}

impl CpParams {
    pub fn finite(p: u64, n: usize, delta: usize, rho: f64, alpha: &AlphaEstimate) -> Result<Self> {
        Ok(Self {
            lambda: lambda_finite(p, n, delta, rho, alpha)?,
            zeta: increment_dist(alpha)?,
            regime: ParamRegime::Finite { p, rho },
        })
    }

    pub fn limit(delta: usize, e: f64, alpha: &AlphaEstimate) -> Result<Self> {
        Ok(Self {
            lambda: lambda_limit(delta, e, alpha)?,
            zeta: increment_dist(alpha)?,
            regime: ParamRegime::Limit { e },
        })
    }

    pub fn compound_poisson(&self) -> Result<CompoundPoisson> {
        CompoundPoisson::new(self.lambda, self.zeta.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_one_is_deterministic() {
        let lim = estimate_alpha_limit(7, 1, 500, 1).unwrap();
        assert_eq!(lim.values, vec![0.0, 1.0]);
        let fin = estimate_alpha_finite(7, 1, 0.6, 500, 1).unwrap();
        assert_eq!(fin.values, vec![0.0, 1.0]);
        let zeta = increment_dist(&analytic_alpha(9, 1).unwrap()).unwrap();
        assert_eq!(zeta, IncrementDist::dirac(2).unwrap());
    }

    #[test]
    fn dirac_alpha_gives_dirac_zeta() {
        let a = AlphaEstimate {
            delta: 2,
            values: vec![1.0, 0.0, 0.0],
            std_errors: vec![0.0; 3],
            trials: 0,
            kind: AlphaKind::Analytic,
        };
        assert_eq!(increment_dist(&a).unwrap(), IncrementDist::dirac(1).unwrap().padded(3));
        assert!((lambda_limit(2, 1.5, &a).unwrap() - 1.5f64.powi(2) / 2.0).abs() < 1e-12);
        let zero = AlphaEstimate { values: vec![0.0; 3], ..a };
        assert!(increment_dist(&zero).is_err());
    }

    #[test]
    fn analytic_delta_two() {
        let a = analytic_alpha(4, 2).unwrap();
        let oracle = 1.0 - 3.0 * 3f64.sqrt() / (4.0 * std::f64::consts::PI);
        assert!((a.value(3) - oracle).abs() < 1e-14);
        assert_eq!(a.value(2), 0.0);
        assert!(analytic_alpha(35, 2).unwrap().value(3) < 0.01);
        assert!(analytic_alpha(200, 2).unwrap().value(3) < 1e-6);
        assert!(matches!(analytic_alpha(10, 3), Err(Error::Unsupported(_))));

        let n = 12;
        let i = reg_inc_beta(0.75, (n as f64 - 1.0) / 2.0, 0.5).unwrap();
        let z = increment_dist(&analytic_alpha(n, 2).unwrap()).unwrap();
        assert!((z.prob(1) - (1.0 - 1.5 * i) / (1.0 - i)).abs() < 1e-14);
        assert_eq!(z.prob(2), 0.0);
        assert!((z.prob(3) - 0.5 * i / (1.0 - i)).abs() < 1e-14);
        let lam = lambda_limit(2, 1.3, &analytic_alpha(n, 2).unwrap()).unwrap();
        assert!((lam - 0.5 * 1.69 * (1.0 - i)).abs() < 1e-14);
    }

    #[test]
    fn rate_examples() {
        let alpha = analytic_alpha(4, 1).unwrap();
        let lam = lambda_finite(100, 4, 1, 0.9999, &alpha).unwrap();
        assert!((lam - 0.495).abs() < 1e-10, "{lam}");
        assert!((lambda_limit(1, 1.0, &alpha).unwrap() - 0.5).abs() < 1e-15);
        for &rho in &[0.3, 0.8, 0.95] {
            let lam = lambda_finite(50, 9, 1, rho, &alpha).unwrap();
            let want = 50.0 * 49.0 * pn(cap_radius(rho), 9).unwrap();
            assert!((lam - want).abs() < 1e-10 * want);
        }
        assert!(lambda_finite(100, 6, 1, 1.0 - 1e-15, &alpha).unwrap() < 1e-20);
        assert!(lambda_finite(1_000_000, 30, 2, 0.99, &analytic_alpha(30, 2).unwrap())
            .unwrap()
            .is_finite());
    }

    #[test]
    fn threshold_round_trip() {
        assert!((rho_threshold(100, 4, 1, 1.0).unwrap() - 0.9999).abs() < 1e-13);
        assert!((e_from_rho(100, 4, 1, 0.9999).unwrap() - 1.0).abs() < 1e-10);
        for &(p, n, delta, e) in &[(500u64, 20usize, 1usize, 1.0), (2000, 10, 2, 0.3), (50, 6, 3, 2.0)] {
            let rho = rho_threshold(p, n, delta, e).unwrap();
            assert!((e_from_rho(p, n, delta, rho).unwrap() - e).abs() < 1e-10);
        }
        let mut prev = 0.0;
        for p in [10u64, 100, 1000, 10_000, 100_000] {
            let rho = rho_threshold(p, 10, 1, 1.0).unwrap();
            assert!(rho > prev);
            prev = rho;
        }
        assert_eq!(e_from_rho(100, 10, 1, 1.0).unwrap(), 0.0);
        assert!(rho_threshold(2, 4, 1, 100.0).is_err());
    }

    #[test]
    fn poisson_bounds() {
        assert_eq!(poisson_approx_bound_limit(10, 2, 1.0, AlphaTail::Supplied(0.0)).unwrap(), 0.0);
        assert!(poisson_approx_bound_limit(35, 2, 1.0, AlphaTail::IncBetaBound).unwrap() < 0.05);
        assert!(poisson_approx_bound_limit(10, 1, 1.0, AlphaTail::Default).is_err());
        for n in [4, 10, 20, 35, 60] {
            let exact = analytic_alpha(n, 2).unwrap().tail();
            assert!(inc_beta_tail_bound(n, 2).unwrap() >= exact);
        }
    }

    #[test]
    fn fwer_values() {
        assert_eq!(fwer(0.0).unwrap(), 0.0);
        assert!((fwer(std::f64::consts::LN_2).unwrap() - 0.5).abs() < 1e-15);
        assert!((fwer(0.495).unwrap() - 0.3904).abs() < 1e-4);
        assert!(fwer(-1.0).is_err());
    }

    #[test]
    fn estimates_are_reproducible() {
        let a = estimate_alpha_limit(6, 3, 5000, 9).unwrap();
        let b = estimate_alpha_limit(6, 3, 5000, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
