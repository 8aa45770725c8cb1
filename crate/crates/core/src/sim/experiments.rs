//! Experiments over a grid of `p`: TV curves, moment tables, FWER tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_trials, EmpiricalDistribution, Family, GraphKind, TrialConfig};
use crate::cpois::{cp_moments, cp_pmf, poisson_pmf, tv_distance, CompoundPoisson};
use crate::error::{Error, Result};
use crate::geometry::derive_seed;
use crate::graphs::Statistic;
use crate::params::{
    analytic_alpha, e_from_rho, estimate_alpha_finite, estimate_alpha_limit, fwer, mean_star_count, rho_threshold,
    AlphaEstimate, CpParams,
};
use crate::sparsity::{make_block_sparse, make_diagonal, make_tau_kappa_sparse, CovarianceSpec, XiRule};

/// Truncation used for every model PMF compared against simulations.
pub const MODEL_EPS: f64 = 1e-10;

/// Dispersion matrix as a function of `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaRecipe {
    Diagonal,
    /// `tau = ceil(p^tau_exponent)`, `kappa = ceil(p^kappa_exponent)`.
    TauKappa {
        tau_exponent: f64,
        kappa_exponent: f64,
        xi: XiRule,
    },
    Block {
        tau_exponent: f64,
        xi: f64,
    },
}

fn power_ceil(p: usize, exponent: f64) -> usize {
    // guard against 64^0.5 = 8.000000000000002
    ((p as f64).powf(exponent) - 1e-9).ceil() as usize
}

impl SigmaRecipe {
    pub fn build(&self, p: usize) -> Result<CovarianceSpec> {
        match *self {
            SigmaRecipe::Diagonal => make_diagonal(&vec![1.0; p]),
            SigmaRecipe::TauKappa {
                tau_exponent,
                kappa_exponent,
                xi,
            } => {
                let tau = power_ceil(p, tau_exponent).clamp(1, p);
                let kappa = power_ceil(p, kappa_exponent).max(2);
                make_tau_kappa_sparse(p, tau, kappa, xi)
            }
            SigmaRecipe::Block { tau_exponent, xi } => make_block_sparse(p, power_ceil(p, tau_exponent).clamp(1, p), xi),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoRule {
    Fixed { rho: f64 },
    /// Threshold from the rate formula with the given `e`.
    FromE { e: f64 },
}

impl RhoRule {
    pub fn resolve(&self, p: usize, n: usize, delta: usize) -> Result<f64> {
        match *self {
            RhoRule::Fixed { rho } => Ok(rho),
            RhoRule::FromE { e } => rho_threshold(p as u64, n, delta, e),
        }
    }
}

fn default_kinds() -> Vec<GraphKind> {
    vec![GraphKind::Correlation]
}

fn default_statistics() -> Vec<Statistic> {
    Statistic::ALL.to_vec()
}

fn default_family() -> Family {
    Family::Gaussian
}

fn default_alpha_trials() -> u64 {
    100_000
}

fn default_true() -> bool {
    true
}

/// Experiment description, readable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub delta: usize,
    pub p_grid: Vec<usize>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    pub sigma: SigmaRecipe,
    pub rho: RhoRule,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<GraphKind>,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_family")]
    pub family: Family,
    /// Column `j` gets mean `mean_shift * (j + 1)`.
    #[serde(default)]
    pub mean_shift: f64,
    /// Monte-Carlo trials for universal-vertex probabilities when no closed
    /// form applies.
    #[serde(default = "default_alpha_trials")]
    pub alpha_trials: u64,
    #[serde(default = "default_true")]
    pub check_invariants: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Trial settings for one grid point.
    pub fn trial_config(&self, p: usize) -> Result<TrialConfig> {
        let sigma = self.sigma.build(p)?;
        let rho = self.rho.resolve(p, self.n, self.delta)?;
        let mut cfg = TrialConfig::new(self.n, self.delta, sigma, rho, self.trials, self.seed);
        cfg.kinds = self.kinds.clone();
        cfg.family = self.family;
        cfg.mean = (self.mean_shift != 0.0).then(|| (0..p).map(|j| self.mean_shift * (j + 1) as f64).collect());
        cfg.check_equivalence = self.check_invariants;
        cfg.check_distances = self.check_invariants;
        Ok(cfg)
    }

    fn alpha_finite(&self, p: usize, rho: f64) -> Result<AlphaEstimate> {
        if self.delta == 1 {
            return analytic_alpha(self.n, 1);
        }
        estimate_alpha_finite(self.n, self.delta, rho, self.alpha_trials, derive_seed(self.seed, p as u64))
    }

    fn alpha_limit(&self) -> Result<AlphaEstimate> {
        match analytic_alpha(self.n, self.delta) {
            Ok(a) => Ok(a),
            Err(Error::Unsupported(_)) => {
                estimate_alpha_limit(self.n, self.delta, self.alpha_trials, derive_seed(self.seed, u64::MAX))
            }
            Err(e) => Err(e),
        }
    }
}

/// Everything computed at one grid point.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub p: usize,
    pub rho: f64,
    pub e: f64,
    pub finite: CpParams,
    pub limit: CpParams,
    pub empirical: EmpiricalDistribution,
}

pub fn run_grid_point(cfg: &ExperimentConfig, p: usize) -> Result<GridPoint> {
    let trial = cfg.trial_config(p)?;
    let rho = trial.rho;
    let e = e_from_rho(p as u64, cfg.n, cfg.delta, rho)?;
    let finite = CpParams::finite(p as u64, cfg.n, cfg.delta, rho, &cfg.alpha_finite(p, rho)?)?;
    let limit = CpParams::limit(cfg.delta, e, &cfg.alpha_limit()?)?;
    let empirical = run_trials(&trial)?;
    Ok(GridPoint {
        p,
        rho,
        e,
        finite,
        limit,
        empirical,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvRow {
    pub p: usize,
    pub kind: GraphKind,
    pub statistic: Statistic,
    pub rho: f64,
    pub e: f64,
    pub lambda_finite: f64,
    pub lambda_limit: f64,
    pub tv_finite: f64,
    pub tv_limit: f64,
    /// Against the Poisson law with the finite-p compound Poisson mean.
    pub tv_poisson: f64,
    pub trials: u64,
}

fn rows_for<F, T>(cfg: &ExperimentConfig, mut make: F) -> Result<Vec<T>>
where
    F: FnMut(&GridPoint, GraphKind, Statistic) -> Result<T>,
{
    let mut rows = Vec::new();
    for &p in &cfg.p_grid {
        let point = run_grid_point(cfg, p)?;
        for &kind in &cfg.kinds {
            for &stat in &cfg.statistics {
                rows.push(make(&point, kind, stat)?);
            }
        }
    }
    Ok(rows)
}

fn histogram(point: &GridPoint, kind: GraphKind, stat: Statistic) -> &super::Histogram {
    point.empirical.histogram(kind, stat).expect("every configured kind is tabulated")
}

/// TV distance from the empirical law of each statistic to the finite-p
/// compound Poisson, the limiting compound Poisson, and a mean-matched
/// Poisson law.
pub fn tv_curve(cfg: &ExperimentConfig) -> Result<Vec<TvRow>> {
    rows_for(cfg, |point, kind, stat| {
        let emp = histogram(point, kind, stat).to_dist()?;
        let finite = point.finite.compound_poisson()?;
        let limit = point.limit.compound_poisson()?;
        let pois = poisson_pmf(cp_moments(&finite).0, MODEL_EPS)?;
        Ok(TvRow {
            p: point.p,
            kind,
            statistic: stat,
            rho: point.rho,
            e: point.e,
            lambda_finite: finite.lambda(),
            lambda_limit: limit.lambda(),
            tv_finite: tv_distance(&emp, &cp_pmf(&finite, MODEL_EPS)?),
            tv_limit: tv_distance(&emp, &cp_pmf(&limit, MODEL_EPS)?),
            tv_poisson: tv_distance(&emp, &pois),
            trials: point.empirical.trials,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub p: usize,
    pub kind: GraphKind,
    pub statistic: Statistic,
    pub rho: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub cp_mean: f64,
    pub cp_second_moment: f64,
    /// Exact star-count mean under a diagonal dispersion matrix.
    pub star_mean: f64,
    pub trials: u64,
}

/// Empirical first and second moments against the finite-p compound
/// Poisson prediction.
pub fn moment_report(cfg: &ExperimentConfig) -> Result<Vec<MomentRow>> {
    rows_for(cfg, |point, kind, stat| {
        let h = histogram(point, kind, stat);
        let (cp_mean, cp_second) = cp_moments(&point.finite.compound_poisson()?);
        Ok(MomentRow {
            p: point.p,
            kind,
            statistic: stat,
            rho: point.rho,
            mean: h.mean(),
            mean_se: h.mean_std_error(),
            second_moment: h.second_moment(),
            second_moment_se: h.second_moment_std_error(),
            cp_mean,
            cp_second_moment: cp_second,
            star_mean: mean_star_count(point.p as u64, cfg.n, cfg.delta, point.rho)?,
            trials: point.empirical.trials,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FwerRow {
    pub p: usize,
    pub kind: GraphKind,
    pub statistic: Statistic,
    pub rho: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub predicted: f64,
    pub lambda: f64,
    pub trials: u64,
}

/// Empirical `P(count > 0)` against `1 - exp(-lambda)`.
pub fn fwer_report(cfg: &ExperimentConfig) -> Result<Vec<FwerRow>> {
    rows_for(cfg, |point, kind, stat| {
        let h = histogram(point, kind, stat);
        let q = h.positive_fraction();
        let cp: CompoundPoisson = point.finite.compound_poisson()?;
        Ok(FwerRow {
            p: point.p,
            kind,
            statistic: stat,
            rho: point.rho,
            empirical: q,
            std_error: (q * (1.0 - q) / h.total() as f64).sqrt(),
            predicted: fwer(cp.lambda())?,
            lambda: cp.lambda(),
            trials: point.empirical.trials,
        })
    })
}
