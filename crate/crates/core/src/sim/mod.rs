//! Seeded Monte-Carlo experiments: draw data, threshold its correlation and
//! partial-correlation graphs, and tabulate the resulting counts.
//!
//! Trial `t` always uses stream `t` of the configured seed, so histograms do
//! not depend on the number of worker threads.

pub mod experiments;
pub mod stats;

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpois::DiscreteDist;
use crate::error::{Error, Result};
use crate::geometry::{cap_radius, euclid_unchecked, SimRng};
use crate::graphs::{count_statistics, portmanteau_holds, score_graph, star_count, threshold_graph, SimpleGraph, Statistic};
use crate::scores::{gram, sample_correlation, u_scores, y_scores_with_cap, DataMatrix, ScoreMatrix, DEFAULT_CONDITION_CAP};
use crate::sparsity::CovarianceSpec;

pub use experiments::{
    fwer_report, moment_report, run_grid_point, tv_curve, ExperimentConfig, FwerRow, GridPoint, MomentRow, RhoRule,
    SigmaRecipe, TvRow,
};

/// Pairs with `||R_ij| - rho|` below this are skipped by the graph
/// equivalence check.
pub const TIE_TOL: f64 = 1e-9;

/// Counts of integer outcomes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Histogram(BTreeMap<u64, u64>);

impl Histogram {
    pub fn record(&mut self, value: u64) {
        *self.0.entry(value).or_insert(0) += 1;
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.0
    }

    pub fn count(&self, value: u64) -> u64 {
        self.0.get(&value).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&k, &c) in &other.0 {
            *self.0.entry(k).or_insert(0) += c;
        }
    }

    fn raw_moment(&self, power: i32) -> f64 {
        let t = self.total() as f64;
        self.0.iter().map(|(&k, &c)| (k as f64).powi(power) * c as f64).sum::<f64>() / t
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn second_moment(&self) -> f64 {
        self.raw_moment(2)
    }

    /// Standard error of the sample mean.
    pub fn mean_std_error(&self) -> f64 {
        let var = self.raw_moment(2) - self.mean().powi(2);
        (var.max(0.0) / self.total() as f64).sqrt()
    }

    /// Standard error of the sample second moment.
    pub fn second_moment_std_error(&self) -> f64 {
        let var = self.raw_moment(4) - self.second_moment().powi(2);
        (var.max(0.0) / self.total() as f64).sqrt()
    }

    /// Fraction of outcomes above zero.
    pub fn positive_fraction(&self) -> f64 {
        1.0 - self.count(0) as f64 / self.total() as f64
    }

    pub fn to_dist(&self) -> Result<DiscreteDist> {
        DiscreteDist::from_counts(self.0.iter().map(|(&k, &c)| (k, c)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Correlation,
    Partial,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Correlation => "correlation",
            GraphKind::Partial => "partial",
        }
    }
}

/// Positive scalar multiplying a whole Gaussian data matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum RadialLaw {
    Unit,
    /// `sqrt(dof / chi2_dof)`: a matrix-t.
    StudentT { dof: f64 },
    LogNormal { sigma: f64 },
}

impl RadialLaw {
    fn validate(self) -> Result<Self> {
        match self {
            RadialLaw::StudentT { dof } if !(dof > 0.0 && dof.is_finite()) => {
                Err(Error::param("dof", dof, "must be positive"))
            }
            RadialLaw::LogNormal { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::param("sigma", sigma, "must be nonnegative"))
            }
            law => Ok(law),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            RadialLaw::Unit => 1.0,
            RadialLaw::StudentT { dof } => {
                let chi: f64 = ChiSquared::new(dof).expect("validated").sample(rng);
                (dof / chi).sqrt()
            }
            RadialLaw::LogNormal { sigma } => LogNormal::new(0.0, sigma).expect("validated").sample(rng),
        }
    }
}

/// Data-generating family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Elliptical { radial: RadialLaw },
}

/// Draws `n x p` data matrices with dispersion `sigma`, a fixed mean, and
/// a radial mixing law.
#[derive(Clone, Debug)]
pub struct DataSampler {
    factor: DMatrix<f64>,
    radial: RadialLaw,
    mean: Option<Vec<f64>>,
}

impl DataSampler {
    pub fn new(sigma: &CovarianceSpec, family: Family, mean: Option<Vec<f64>>) -> Result<Self> {
        let chol = Cholesky::new(sigma.matrix.as_matrix().clone())
            .ok_or(Error::NotPositiveDefinite { min_eigenvalue: sigma.matrix.eigenvalues()[0] })?;
        if let Some(m) = &mean {
            if m.len() != sigma.p() {
                return Err(Error::Dimension(format!("mean has length {}, expected {}", m.len(), sigma.p())));
            }
        }
        let radial = match family {
            Family::Gaussian => RadialLaw::Unit,
            Family::Elliptical { radial } => radial.validate()?,
        };
        Ok(Self {
            factor: chol.l().transpose(),
            radial,
            mean,
        })
    }

    pub fn p(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DataMatrix> {
        let p = self.p();
        let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x = z * &self.factor;
        let r = self.radial.sample(rng);
        if r != 1.0 {
            x *= r;
        }
        if let Some(m) = &self.mean {
            for (j, mut col) in x.column_iter_mut().enumerate() {
                col.add_scalar_mut(m[j]);
            }
        }
        DataMatrix::new(x)
    }
}

/// Rows i.i.d. `N(0, sigma)`.
pub fn sample_matrix_normal<R: Rng + ?Sized>(sigma: &CovarianceSpec, n: usize, rng: &mut R) -> Result<DataMatrix> {
    DataSampler::new(sigma, Family::Gaussian, None)?.sample(n, rng)
}

/// `r W` with `W` matrix normal and `r` one draw of `radial`.
pub fn sample_vector_elliptical<R: Rng + ?Sized>(
    sigma: &CovarianceSpec,
    n: usize,
    radial: RadialLaw,
    rng: &mut R,
) -> Result<DataMatrix> {
    DataSampler::new(sigma, Family::Elliptical { radial }, None)?.sample(n, rng)
}

/// Settings for one batch of trials at a fixed `p`.
#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub n: usize,
    pub delta: usize,
    pub sigma: CovarianceSpec,
    pub rho: f64,
    pub trials: u64,
    pub seed: u64,
    pub kinds: Vec<GraphKind>,
    pub family: Family,
    pub mean: Option<Vec<f64>>,
    /// Compare the thresholded correlation graph with the pseudo-geometric
    /// graph of the U-scores on every trial.
    pub check_equivalence: bool,
    /// Check the U-to-Y distance distortion bound on every partial trial.
    pub check_distances: bool,
}

impl TrialConfig {
    pub fn new(n: usize, delta: usize, sigma: CovarianceSpec, rho: f64, trials: u64, seed: u64) -> Self {
        Self {
            n,
            delta,
            sigma,
            rho,
            trials,
            seed,
            kinds: vec![GraphKind::Correlation],
            family: Family::Gaussian,
            mean: None,
            check_equivalence: true,
            check_distances: true,
        }
    }

    pub fn p(&self) -> usize {
        self.sigma.p()
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", self.trials, "must be at least 1"));
        }
        if self.n < 4 {
            return Err(Error::param("n", self.n, "must be at least 4"));
        }
        if self.delta == 0 || self.delta + 1 > self.p() {
            return Err(Error::param("delta", self.delta, "must lie in 1..=p-1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::param("rho", self.rho, "must lie in [0, 1)"));
        }
        if self.kinds.is_empty() {
            return Err(Error::param("kinds", "[]", "need at least one graph kind"));
        }
        if self.kinds.contains(&GraphKind::Partial) && self.p() < self.n {
            return Err(Error::Regime { n: self.n, p: self.p() });
        }
        Ok(())
    }
}

/// How many invariant checks ran; any failure aborts the run instead.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckTally {
    pub portmanteau: u64,
    pub parity: u64,
    pub equivalence_pairs: u64,
    pub ties_skipped: u64,
    pub distance_pairs: u64,
}

impl CheckTally {
    fn add(&mut self, o: &CheckTally) {
        self.portmanteau += o.portmanteau;
        self.parity += o.parity;
        self.equivalence_pairs += o.equivalence_pairs;
        self.ties_skipped += o.ties_skipped;
        self.distance_pairs += o.distance_pairs;
    }
}

/// Per graph kind and statistic, the histogram of counts over trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub delta: usize,
    pub trials: u64,
    pub histograms: BTreeMap<GraphKind, BTreeMap<Statistic, Histogram>>,
    pub checks: CheckTally,
}

impl EmpiricalDistribution {
    pub fn histogram(&self, kind: GraphKind, stat: Statistic) -> Option<&Histogram> {
        self.histograms.get(&kind)?.get(&stat)
    }
}

struct TrialRecord {
    counts: Vec<(GraphKind, [u64; 3])>,
    checks: CheckTally,
}

fn record_counts(g: &SimpleGraph, delta: usize, trial: usize, checks: &mut CheckTally) -> Result<[u64; 3]> {
    let c = count_statistics(g, delta)?;
    if !portmanteau_holds(g, &c)? {
        return Err(Error::Invariant {
            trial,
            detail: format!(
                "portmanteau chain fails: N_E={}, N_E+1={}, N_V_exact={}, N_V_atleast={}",
                c.n_e,
                star_count(g, delta + 1)?,
                c.n_v_exact,
                c.n_v_atleast
            ),
        });
    }
    checks.portmanteau += 1;
    let twice_edges = star_count(g, 1)?;
    if twice_edges % 2 != 0 {
        return Err(Error::Invariant {
            trial,
            detail: format!("N_E1 = {twice_edges} is odd"),
        });
    }
    checks.parity += 1;
    Ok([c.n_e, c.n_v_exact, c.n_v_atleast])
}

fn check_equivalence(
    r: &crate::scores::SymmetricMatrix,
    rho: f64,
    g: &SimpleGraph,
    u: &ScoreMatrix,
    trial: usize,
    checks: &mut CheckTally,
) -> Result<()> {
    let geo = score_graph(u, cap_radius(rho));
    let p = g.p();
    for i in 0..p {
        for j in i + 1..p {
            if (r.get(i, j).abs() - rho).abs() < TIE_TOL {
                checks.ties_skipped += 1;
                continue;
            }
            if g.has_edge(i, j) != geo.has_edge(i, j) {
                return Err(Error::Invariant {
                    trial,
                    detail: format!("pair ({i},{j}): |R| = {} but pseudo-geometric edge differs", r.get(i, j).abs()),
                });
            }
            checks.equivalence_pairs += 1;
        }
    }
    Ok(())
}

fn check_distances(u: &ScoreMatrix, y: &ScoreMatrix, h: f64, trial: usize, checks: &mut CheckTally) -> Result<()> {
    let p = u.cols();
    let slack = 1e-10;
    let neg = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| -x).collect() };
    for i in 0..p {
        let (ui, yi) = (u.column(i), y.column(i));
        let (ui_neg, yi_neg) = (neg(ui), neg(yi));
        for j in i + 1..p {
            let (uj, yj) = (u.column(j), y.column(j));
            for (du, dy) in [
                (euclid_unchecked(ui, uj), euclid_unchecked(yi, yj)),
                (euclid_unchecked(&ui_neg, uj), euclid_unchecked(&yi_neg, yj)),
            ] {
                if dy < du / h - slack || dy > h * du + slack {
                    return Err(Error::Invariant {
                        trial,
                        detail: format!("pair ({i},{j}): |u_i-u_j| = {du}, |y_i-y_j| = {dy}, h = {h}"),
                    });
                }
            }
            checks.distance_pairs += 1;
        }
    }
    Ok(())
}

fn one_trial(cfg: &TrialConfig, sampler: &DataSampler, trial: usize) -> Result<TrialRecord> {
    let mut rng = SimRng::new(cfg.seed, trial as u64);
    let x = sampler.sample(cfg.n, &mut rng)?;
    let u = u_scores(&x)?;
    let mut checks = CheckTally::default();
    let mut counts = Vec::with_capacity(cfg.kinds.len());
    for &kind in &cfg.kinds {
        let g = match kind {
            GraphKind::Correlation => {
                let r = sample_correlation(&x)?;
                let g = threshold_graph(&r, cfg.rho)?;
                if cfg.check_equivalence {
                    check_equivalence(&r, cfg.rho, &g, &u, trial, &mut checks)?;
                }
                g
            }
            GraphKind::Partial => {
                let y = y_scores_with_cap(&u, DEFAULT_CONDITION_CAP)?;
                if cfg.check_distances {
                    check_distances(&u, &y.scores, y.condition, trial, &mut checks)?;
                }
                threshold_graph(&gram(&y.scores), cfg.rho)?
            }
        };
        counts.push((kind, record_counts(&g, cfg.delta, trial, &mut checks)?));
    }
    Ok(TrialRecord { counts, checks })
}

/// Runs `cfg.trials` independent trials in parallel and tabulates the
/// counts for `cfg.delta`. Invariant failures abort with the trial index.
pub fn run_trials(cfg: &TrialConfig) -> Result<EmpiricalDistribution> {
    cfg.validate()?;
    let sampler = DataSampler::new(&cfg.sigma, cfg.family, cfg.mean.clone())?;
    let records: Vec<TrialRecord> = (0..cfg.trials as usize)
        .into_par_iter()
        .map(|t| {
            one_trial(cfg, &sampler, t).map_err(|e| match e {
                e @ Error::Invariant { .. } => e,
                e => Error::Trial { trial: t, source: Box::new(e) },
            })
        })
        .collect::<Result<_>>()?;

    let mut histograms: BTreeMap<GraphKind, BTreeMap<Statistic, Histogram>> = BTreeMap::new();
    let mut checks = CheckTally::default();
    for rec in &records {
        checks.add(&rec.checks);
        for (kind, values) in &rec.counts {
            let per = histograms.entry(*kind).or_default();
            for (stat, v) in Statistic::ALL.iter().zip(values) {
                per.entry(*stat).or_default().record(*v);
            }
        }
    }
    Ok(EmpiricalDistribution {
        delta: cfg.delta,
        trials: cfg.trials,
        histograms,
        checks,
    })
}
