//! One function per subcommand; each builds a report and hands it to
//! [`output`](crate::output).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use corrmine::geometry::{cap_constants, cap_radius, pn, pn_bounds};
use corrmine::graphs::{count_statistics, count_universal, threshold_graph, Statistic};
use corrmine::io::{read_data, read_symmetric, write_edge_list, write_matrix_file};
use corrmine::params::{
    analytic_alpha, e_from_rho, estimate_alpha_finite, estimate_alpha_limit, fwer, gamma_diagnostic, rho_threshold,
    AlphaEstimate, AlphaKind, CpParams,
};
use corrmine::scores::{partial_correlation, sample_correlation};
use corrmine::sim::{
    fwer_report, moment_report, run_grid_point, tv_curve, CheckTally, ExperimentConfig, GraphKind, Histogram,
};
use corrmine::sparsity::{
    check_row_kappa, inverse_local_normalized_det, is_connected, local_normalized_det, make_block_sparse,
    make_diagonal, make_tau_kappa_sparse, normalized_det, LocalDetMode, SparsityMeta, XiRule, DEFAULT_SUBSET_BUDGET,
};
use serde::Serialize;

use crate::output::{emit, emit_rows, Format};
use crate::{
    Cli, CliError, Command, ConstantsArgs, CountsArgs, KindArg, ParamsArgs, PatternArg, RunArgs, SparsityArgs,
    ThresholdArgs, XiRuleArg,
};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    let format = cli.format;
    match &cli.command {
        Command::Constants(args) => emit_rows(format, out, &constants(args)?),
        Command::Params(args) => {
            let report = params(args)?;
            emit(format, out, &report, &[ParamsRow::from(&report)])
        }
        Command::Threshold(args) => single(format, out, threshold(args)?),
        Command::Counts(args) => single(format, out, counts(args)?),
        Command::Simulate(args) => {
            let points = simulate(&experiment(args)?)?;
            let rows: Vec<HistogramRow> = points.iter().flat_map(SimulationPoint::rows).collect();
            emit(format, out, &points, &rows)
        }
        Command::TvCurve(args) => emit_rows(format, out, &tv_curve(&experiment(args)?)?),
        Command::Moments(args) => emit_rows(format, out, &moment_report(&experiment(args)?)?),
        Command::Fwer(args) => emit_rows(format, out, &fwer_report(&experiment(args)?)?),
        Command::Sparsity(args) => single(format, out, sparsity(args)?),
    }
}

fn single<R: Serialize>(format: Format, out: Option<&Path>, row: R) -> Result<(), CliError> {
    emit(format, out, &row, std::slice::from_ref(&row))
}

#[derive(Serialize)]
struct ConstantsRow {
    n: usize,
    a_n: f64,
    b_n: f64,
    r: Option<f64>,
    pn: Option<f64>,
    pn_lower: Option<f64>,
    pn_upper: Option<f64>,
}

fn constants(args: &ConstantsArgs) -> Result<Vec<ConstantsRow>, CliError> {
    args.n
        .iter()
        .map(|&n| {
            let c = cap_constants(n)?;
            let (area, bounds) = match args.r {
                Some(r) => (Some(pn(r, n)?), Some(pn_bounds(r, n)?)),
                None => (None, None),
            };
            Ok(ConstantsRow {
                n,
                a_n: c.a_n,
                b_n: c.b_n,
                r: args.r,
                pn: area,
                pn_lower: bounds.map(|b| b.0),
                pn_upper: bounds.map(|b| b.1),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct ParamsReport {
    regime: &'static str,
    n: usize,
    delta: usize,
    p: Option<u64>,
    rho: Option<f64>,
    e: f64,
    /// `alpha[l - 1]` is the probability of `l` universal vertices.
    alpha: Vec<f64>,
    alpha_std_errors: Vec<f64>,
    alpha_source: &'static str,
    /// `zeta[k - 1]` is the increment probability of `k`.
    zeta: Vec<f64>,
    lambda: f64,
    fwer: f64,
    /// `2 p^{1 + 1/delta} P_n(r_rho)`, reported only.
    gamma: Option<f64>,
}

#[derive(Serialize)]
struct ParamsRow {
    regime: &'static str,
    n: usize,
    delta: usize,
    p: Option<u64>,
    rho: Option<f64>,
    e: f64,
    lambda: f64,
    fwer: f64,
    gamma: Option<f64>,
    alpha_source: &'static str,
    alpha: String,
    zeta: String,
}

fn joined(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

impl From<&ParamsReport> for ParamsRow {
    fn from(r: &ParamsReport) -> Self {
        ParamsRow {
            regime: r.regime,
            n: r.n,
            delta: r.delta,
            p: r.p,
            rho: r.rho,
            e: r.e,
            lambda: r.lambda,
            fwer: r.fwer,
            gamma: r.gamma,
            alpha_source: r.alpha_source,
            alpha: joined(&r.alpha),
            zeta: joined(&r.zeta),
        }
    }
}

fn params(args: &ParamsArgs) -> Result<ParamsReport, CliError> {
    let (n, delta) = (args.n, args.delta as usize);
    let seed = || {
        args.seed
            .ok_or_else(|| CliError::Usage("no closed form applies; pass --seed or set CORRMINE_SEED".into()))
    };
    let (regime, p, rho, e, alpha, cp, gamma) = match args.p {
        None => {
            let alpha = match analytic_alpha(n, delta) {
                Ok(a) => a,
                Err(corrmine::Error::Unsupported(_)) => estimate_alpha_limit(n, delta, args.trials, seed()?)?,
                Err(e) => return Err(e.into()),
            };
            let cp = CpParams::limit(delta, args.e, &alpha)?;
            ("limit", None, None, args.e, alpha, cp, None)
        }
        Some(p) => {
            let rho = match args.rho {
                Some(rho) => rho,
                None => rho_threshold(p, n, delta, args.e)?,
            };
            let alpha: AlphaEstimate = if delta == 1 {
                analytic_alpha(n, 1)?
            } else {
                estimate_alpha_finite(n, delta, rho, args.trials, seed()?)?
            };
            let cp = CpParams::finite(p, n, delta, rho, &alpha)?;
            let e = e_from_rho(p, n, delta, rho)?;
            ("finite", Some(p), Some(rho), e, alpha, cp, Some(gamma_diagnostic(p, n, delta, rho)?))
        }
    };
    Ok(ParamsReport {
        regime,
        n,
        delta,
        p,
        rho,
        e,
        alpha_source: match alpha.kind {
            AlphaKind::Analytic => "analytic",
            _ => "monte_carlo",
        },
        alpha: alpha.values,
        alpha_std_errors: alpha.std_errors,
        zeta: cp.zeta.pmf().to_vec(),
        lambda: cp.lambda,
        fwer: fwer(cp.lambda)?,
        gamma,
    })
}

#[derive(Serialize)]
struct ThresholdRow {
    p: u64,
    n: usize,
    delta: usize,
    e: f64,
    rho: f64,
    r: f64,
}

fn threshold(args: &ThresholdArgs) -> Result<ThresholdRow, CliError> {
    let delta = args.delta as usize;
    let (rho, e) = match (args.e, args.rho) {
        (Some(e), _) => (rho_threshold(args.p, args.n, delta, e)?, e),
        (None, Some(rho)) => (rho, e_from_rho(args.p, args.n, delta, rho)?),
        (None, None) => unreachable!("clap requires --e or --rho"),
    };
    Ok(ThresholdRow {
        p: args.p,
        n: args.n,
        delta,
        e,
        rho,
        r: cap_radius(rho),
    })
}

#[derive(Serialize)]
struct CountsRow {
    source: &'static str,
    rho: f64,
    delta: usize,
    vertices: usize,
    edges: usize,
    n_e: u64,
    n_v_exact: u64,
    n_v_atleast: u64,
    universal: usize,
}

fn counts(args: &CountsArgs) -> Result<CountsRow, CliError> {
    let (psi, source) = match (&args.matrix, &args.data) {
        (Some(path), _) => (read_symmetric(path).map_err(CliError::input(path))?, "matrix"),
        (None, Some(path)) => {
            let x = read_data(path).map_err(CliError::input(path))?;
            match args.kind {
                KindArg::Correlation => (sample_correlation(&x)?, "correlation"),
                KindArg::Partial => (partial_correlation(&x)?, "partial"),
            }
        }
        (None, None) => unreachable!("clap requires --matrix or --data"),
    };
    let g = threshold_graph(&psi, args.rho)?;
    let c = count_statistics(&g, args.delta as usize)?;
    if let Some(path) = &args.edges {
        let file = File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        write_edge_list(&g, BufWriter::new(file))?;
    }
    Ok(CountsRow {
        source,
        rho: args.rho,
        delta: c.delta,
        vertices: g.p(),
        edges: g.edge_count(),
        n_e: c.n_e,
        n_v_exact: c.n_v_exact,
        n_v_atleast: c.n_v_atleast,
        universal: count_universal(&g),
    })
}

fn experiment(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_file(&args.config).map_err(|e| match e {
        corrmine::Error::Parse(msg) => CliError::Usage(format!("{}: {msg}", args.config.display())),
        e => CliError::input(&args.config)(e),
    })?;
    cfg.seed = args.seed;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(grid) = &args.p {
        cfg.p_grid = grid.clone();
    }
    if cfg.p_grid.is_empty() {
        return Err(CliError::Usage("the p grid is empty".into()));
    }
    // fail on a bad grid point before any trial runs
    for &p in &cfg.p_grid {
        cfg.trial_config(p)?;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct SimulationPoint {
    p: usize,
    rho: f64,
    e: f64,
    trials: u64,
    lambda_finite: f64,
    lambda_limit: f64,
    checks: CheckTally,
    histograms: BTreeMap<GraphKind, BTreeMap<Statistic, Histogram>>,
}

#[derive(Serialize)]
struct HistogramRow {
    p: usize,
    kind: GraphKind,
    statistic: Statistic,
    value: u64,
    count: u64,
}

impl SimulationPoint {
    fn rows(&self) -> Vec<HistogramRow> {
        let mut rows = Vec::new();
        for (&kind, by_stat) in &self.histograms {
            for (&statistic, h) in by_stat {
                rows.extend(h.counts().iter().map(|(&value, &count)| HistogramRow {
                    p: self.p,
                    kind,
                    statistic,
                    value,
                    count,
                }));
            }
        }
        rows
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<Vec<SimulationPoint>, CliError> {
    cfg.p_grid
        .iter()
        .map(|&p| {
            let point = run_grid_point(cfg, p)?;
            Ok(SimulationPoint {
                p,
                rho: point.rho,
                e: point.e,
                trials: point.empirical.trials,
                lambda_finite: point.finite.lambda,
                lambda_limit: point.limit.lambda,
                checks: point.empirical.checks,
                histograms: point.empirical.histograms,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SparsityRow {
    pattern: &'static str,
    p: usize,
    tau: Option<usize>,
    kappa: Option<usize>,
    xi: Option<f64>,
    row_nonzeros: usize,
    connected: bool,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    normalized_det: f64,
    m: usize,
    n: usize,
    local_normalized_det: f64,
    inverse_local_normalized_det: f64,
    local_det_mode: &'static str,
}

fn sparsity(args: &SparsityArgs) -> Result<SparsityRow, CliError> {
    let p = args.p as usize;
    let xi_rule = match args.xi_rule {
        XiRuleArg::Fixed => XiRule::Fixed(args.xi),
        XiRuleArg::OverKappa => XiRule::OverKappa(args.xi),
        XiRuleArg::Spectral => XiRule::Spectral(args.xi),
    };
    let (spec, pattern) = match args.pattern {
        PatternArg::TauKappa => (make_tau_kappa_sparse(p, args.tau, args.kappa, xi_rule), "tau_kappa"),
        PatternArg::Block => (make_block_sparse(p, args.tau, args.xi), "block"),
        PatternArg::Diagonal => (make_diagonal(&vec![1.0; p]), "diagonal"),
    };
    // an inadmissible xi is a bad option value
    let spec = spec.map_err(|e| match e {
        corrmine::Error::NotPositiveDefinite { .. } => CliError::Usage(format!("--xi {}: {e}", args.xi)),
        e => e.into(),
    })?;
    let (tau, kappa, xi) = match spec.meta {
        SparsityMeta::TauKappa { tau, kappa, xi, .. } => (Some(tau), Some(kappa), Some(xi)),
        SparsityMeta::Block { tau, xi } => (Some(tau), Some(tau), Some(xi)),
        SparsityMeta::Diagonal | SparsityMeta::Explicit => (None, None, None),
    };
    let a = &spec.matrix;
    let exact = LocalDetMode::Exact {
        budget: DEFAULT_SUBSET_BUDGET,
    };
    let (mode, local_det_mode) = match local_normalized_det(a, args.m, exact) {
        Err(corrmine::Error::BudgetExceeded { .. }) => (LocalDetMode::Bound, "bound"),
        Err(e) => return Err(e.into()),
        Ok(_) => (exact, "exact"),
    };
    let ev = a.eigenvalues();
    if let Some(path) = &args.matrix_out {
        write_matrix_file(a.as_matrix(), path)?;
    }
    Ok(SparsityRow {
        pattern,
        p,
        tau,
        kappa,
        xi,
        row_nonzeros: check_row_kappa(a),
        connected: is_connected(a),
        min_eigenvalue: ev[0],
        max_eigenvalue: ev[ev.len() - 1],
        normalized_det: normalized_det(a)?,
        m: args.m,
        n: args.n,
        local_normalized_det: local_normalized_det(a, args.m, mode)?,
        inverse_local_normalized_det: inverse_local_normalized_det(a, args.n, args.m, mode)?,
        local_det_mode,
    })
}
