//! Sparse dispersion matrices and normalized-determinant functionals.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SimRng;
use crate::scores::SymmetricMatrix;

/// Entries below this magnitude count as structural zeros.
pub const ZERO_TOL: f64 = 1e-14;
/// Smallest admissible eigenvalue relative to the largest.
pub const SPD_TOL: f64 = 1e-10;
pub const DEFAULT_SUBSET_BUDGET: u128 = 1_000_000;

/// How the off-diagonal value of a generated matrix is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum XiRule {
    Fixed(f64),
    /// `c / kappa`.
    OverKappa(f64),
    /// `c / lambda_max(A)` for the 0/1 adjacency `A`; the smallest eigenvalue
    /// of a bipartite pattern is then `1 - c`.
    Spectral(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SparsityMeta {
    /// `row_nonzeros` is the verified maximum count over the first `tau`
    /// rows, diagonal included.
    TauKappa {
        tau: usize,
        kappa: usize,
        xi: f64,
        row_nonzeros: usize,
    },
    Block {
        tau: usize,
        xi: f64,
    },
    Diagonal,
    Explicit,
}

/// Symmetric positive-definite dispersion matrix with its declared pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSpec {
    pub matrix: SymmetricMatrix,
    pub meta: SparsityMeta,
}

impl CovarianceSpec {
    pub fn p(&self) -> usize {
        self.matrix.dim()
    }

    /// Validates an arbitrary matrix as SPD.
    pub fn explicit(matrix: SymmetricMatrix) -> Result<Self> {
        check_spd(&matrix)?;
        Ok(Self {
            matrix,
            meta: SparsityMeta::Explicit,
        })
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(self.matrix.as_matrix())
    }
}

fn check_spd(m: &SymmetricMatrix) -> Result<()> {
    let ev = m.eigenvalues();
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(hi > 0.0 && lo > SPD_TOL * hi) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
    }
    Ok(())
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].abs() < ZERO_TOL))
}

/// Edges of the connected `(tau, kappa)` construction, 0-indexed.
///
/// Hub `i < tau` links to hub `i + 1` and to its own run of `kappa - 2`
/// leaves; the last hub links to `kappa - 1` leaves. Indices beyond `p` are
/// dropped.
pub fn tau_kappa_edges(p: usize, tau: usize, kappa: usize) -> Result<Vec<(usize, usize)>> {
    if !(1..=p).contains(&tau) {
        return Err(Error::param("tau", tau, "must lie in 1..=p"));
    }
    if kappa < 2 {
        return Err(Error::param("kappa", kappa, "must be at least 2"));
    }
    let mut edges = Vec::new();
    let mut push = |i: usize, j: usize| {
        if j <= p {
            edges.push((i - 1, j - 1));
        }
    };
    // 1-indexed as in the construction
    for i in 1..tau {
        push(i, i + 1);
        let start = tau + (i - 1) * (kappa - 2) + 1;
        for j in start..=tau + i * (kappa - 2) {
            push(i, j);
        }
    }
    let start = tau + (tau - 1) * (kappa - 2) + 1;
    for j in start..=tau + tau * (kappa - 2) + 1 {
        push(tau, j);
    }
    Ok(edges)
}

fn adjacency(p: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(p, p);
    for &(i, j) in edges {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    a
}

fn resolve_xi(rule: XiRule, kappa: usize, adjacency: &DMatrix<f64>) -> Result<f64> {
    let xi = match rule {
        XiRule::Fixed(x) => x,
        XiRule::OverKappa(c) => c / kappa as f64,
        XiRule::Spectral(c) => {
            let top = SymmetricEigen::new(adjacency.clone())
                .eigenvalues
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()));
            if top == 0.0 {
                0.0
            } else {
                c / top
            }
        }
    };
    if !xi.is_finite() {
        return Err(Error::param("xi", xi, "must be finite"));
    }
    Ok(xi)
}

/// Unit diagonal with `xi` on the edges of the connected `(tau, kappa)`
/// construction.
pub fn make_tau_kappa_sparse(p: usize, tau: usize, kappa: usize, xi: XiRule) -> Result<CovarianceSpec> {
    let edges = tau_kappa_edges(p, tau, kappa)?;
    let a = adjacency(p, &edges);
    let xi = resolve_xi(xi, kappa, &a)?;
    let m = DMatrix::identity(p, p) + &a * xi;
    let matrix = SymmetricMatrix::new(m)?;
    check_spd(&matrix)?;
    let row_nonzeros = (0..tau).map(|i| row_nonzeros(matrix.as_matrix(), i)).max().unwrap_or(0);
    Ok(CovarianceSpec {
        matrix,
        meta: SparsityMeta::TauKappa {
            tau,
            kappa,
            xi,
            row_nonzeros,
        },
    })
}

/// Unit diagonal with `xi` throughout the leading `tau x tau` block.
pub fn make_block_sparse(p: usize, tau: usize, xi: f64) -> Result<CovarianceSpec> {
    if !(1..=p).contains(&tau) {
        return Err(Error::param("tau", tau, "must lie in 1..=p"));
    }
    let m = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i < tau && j < tau {
            xi
        } else {
            0.0
        }
    });
    let matrix = SymmetricMatrix::new(m)?;
    check_spd(&matrix)?;
    Ok(CovarianceSpec {
        matrix,
        meta: SparsityMeta::Block { tau, xi },
    })
}

/// Diagonal dispersion with the given positive variances.
pub fn make_diagonal(variances: &[f64]) -> Result<CovarianceSpec> {
    if let Some(bad) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::param("variance", bad, "must be positive and finite"));
    }
    let matrix = SymmetricMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(variances)))?;
    check_spd(&matrix)?;
    Ok(CovarianceSpec {
        matrix,
        meta: SparsityMeta::Diagonal,
    })
}

fn row_nonzeros(m: &DMatrix<f64>, i: usize) -> usize {
    m.row(i).iter().filter(|v| v.abs() >= ZERO_TOL).count()
}

/// Largest number of nonzeros in any row.
pub fn check_row_kappa(m: &SymmetricMatrix) -> usize {
    (0..m.dim()).map(|i| row_nonzeros(m.as_matrix(), i)).max().unwrap_or(0)
}

/// First `tau` rows have at most `kappa` nonzeros and the trailing
/// `(p - tau) x (p - tau)` block is diagonal, in the given coordinates.
pub fn check_tau_kappa(m: &SymmetricMatrix, tau: usize, kappa: usize) -> bool {
    let a = m.as_matrix();
    let p = m.dim();
    let tau = tau.min(p);
    (0..tau).all(|i| row_nonzeros(a, i) <= kappa)
        && (tau..p).all(|i| (tau..p).all(|j| i == j || a[(i, j)].abs() < ZERO_TOL))
}

/// Connectivity of the nonzero pattern, by breadth-first search.
pub fn is_connected(m: &SymmetricMatrix) -> bool {
    let a = m.as_matrix();
    let p = m.dim();
    if p == 0 {
        return true;
    }
    let mut seen = vec![false; p];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..p {
            if !seen[j] && a[(i, j)].abs() >= ZERO_TOL {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn normalized_det_of(m: DMatrix<f64>) -> Result<f64> {
    let ev = sorted_eigenvalues(m);
    let top = ev[ev.len() - 1];
    if !(ev[0] > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: ev[0] });
    }
    Ok(ev.iter().map(|v| (v / top).ln()).sum::<f64>().exp())
}

/// `det(A) / lambda_max(A)^dim`.
pub fn normalized_det(a: &SymmetricMatrix) -> Result<f64> {
    normalized_det_of(a.as_matrix().clone())
}

/// Strategy for the minimum over principal submatrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalDetMode {
    /// Exhaustive scan, refused when `C(dim, m)` exceeds `budget`.
    Exact { budget: u128 },
    /// Minimum over random subsets: an upper bound on the true minimum.
    Sampled { subsets: usize, seed: u64 },
    /// `(lambda_min / lambda_max)^m`: a lower bound on the true minimum.
    Bound,
}

fn n_choose(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |c, i| c.saturating_mul(n as u128 - i) / (i + 1))
}

fn submatrix(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

// minimum over all m-subsets whose smallest element is `first`
fn min_with_first(a: &DMatrix<f64>, first: usize, m: usize) -> Result<f64> {
    let dim = a.nrows();
    let mut idx: Vec<usize> = (first..first + m).collect();
    let mut best = f64::INFINITY;
    loop {
        best = best.min(normalized_det_of(submatrix(a, &idx))?);
        // advance positions 1..m lexicographically
        let mut k = m;
        loop {
            if k <= 1 {
                return Ok(best);
            }
            k -= 1;
            if idx[k] < dim - (m - k) {
                idx[k] += 1;
                for t in k + 1..m {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `mu_m(A)`: smallest normalized determinant of an `m x m` principal
/// submatrix, or a bound on it depending on `mode`.
pub fn local_normalized_det(a: &SymmetricMatrix, m: usize, mode: LocalDetMode) -> Result<f64> {
    let dim = a.dim();
    if !(1..=dim).contains(&m) {
        return Err(Error::param("m", m, "must lie in 1..=dim"));
    }
    check_spd(a)?;
    let mat = a.as_matrix();
    match mode {
        LocalDetMode::Exact { budget } => {
            let needed = n_choose(dim, m);
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget });
            }
            let mins: Result<Vec<f64>> = (0..=dim - m)
                .into_par_iter()
                .map(|first| min_with_first(mat, first, m))
                .collect();
            Ok(mins?.into_iter().fold(f64::INFINITY, f64::min))
        }
        LocalDetMode::Sampled { subsets, seed } => {
            if subsets == 0 {
                return Err(Error::param("subsets", subsets, "must be at least 1"));
            }
            let mut rng = SimRng::new(seed, 0);
            let mut best = f64::INFINITY;
            for _ in 0..subsets {
                let mut idx = rand::seq::index::sample(&mut rng, dim, m).into_vec();
                idx.sort_unstable();
                best = best.min(normalized_det_of(submatrix(mat, &idx))?);
            }
            Ok(best)
        }
        LocalDetMode::Bound => {
            let ev = a.eigenvalues();
            Ok((ev[0] / ev[dim - 1]).powi(m as i32))
        }
    }
}

/// `mu_{n,m}(A) = mu_m(A)^{-(n-1)/2}`, and exactly one for diagonal `A`.
///
/// In `Bound` mode the result is the condition-number bound
/// `(lambda_max / lambda_min)^{m (n-1)/2}`; in `Sampled` mode it is a lower
/// bound.
pub fn inverse_local_normalized_det(a: &SymmetricMatrix, n: usize, m: usize, mode: LocalDetMode) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("n", n, "must be at least 2"));
    }
    if is_diagonal(a.as_matrix()) {
        check_spd(a)?;
        return Ok(1.0);
    }
    let mu = local_normalized_det(a, m, mode)?;
    Ok(mu.powf(-(n as f64 - 1.0) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_matrix() -> SymmetricMatrix {
        SymmetricMatrix::new(DMatrix::from_row_slice(
            5,
            5,
            &[
                5., 0., 2., 0., 1., //
                0., 8., 3., 0., 0., //
                2., 3., 6., 0., 0., //
                0., 0., 0., 7., 0., //
                1., 0., 0., 0., 8.,
            ],
        ))
        .unwrap()
    }

    #[test]
    fn five_by_five_example() {
        let m = example_matrix();
        assert!(check_tau_kappa(&m, 2, 3));
        assert!(!check_tau_kappa(&m, 1, 3));
        assert_eq!(check_row_kappa(&m), 3);
    }

    #[test]
    fn row_kappa_extremes() {
        assert_eq!(check_row_kappa(&SymmetricMatrix::identity(6)), 1);
        let dense = SymmetricMatrix::new(DMatrix::from_element(4, 4, 0.3) + DMatrix::identity(4, 4)).unwrap();
        assert_eq!(check_row_kappa(&dense), 4);
    }

    #[test]
    fn connected_construction() {
        let s = make_tau_kappa_sparse(10, 3, 4, XiRule::Fixed(0.1)).unwrap();
        assert!(is_connected(&s.matrix));
        let edges = tau_kappa_edges(10, 3, 4).unwrap();
        assert_eq!(
            edges,
            vec![(0, 1), (0, 3), (0, 4), (1, 2), (1, 5), (1, 6), (2, 7), (2, 8), (2, 9)]
        );
        let SparsityMeta::TauKappa { row_nonzeros, .. } = s.meta else {
            panic!("wrong meta")
        };
        assert_eq!(row_nonzeros, 5);
        assert!(check_tau_kappa(&s.matrix, 3, row_nonzeros));
        // one vertex short of the connectivity bound
        let s = make_tau_kappa_sparse(11, 3, 4, XiRule::Fixed(0.1)).unwrap();
        assert!(!is_connected(&s.matrix));
    }

    #[test]
    fn zero_xi_is_identity() {
        let s = make_tau_kappa_sparse(8, 2, 3, XiRule::Fixed(0.0)).unwrap();
        assert_eq!(s.matrix, SymmetricMatrix::identity(8));
    }

    #[test]
    fn large_xi_is_refused() {
        assert!(matches!(
            make_tau_kappa_sparse(30, 3, 10, XiRule::Fixed(0.9)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let s = make_tau_kappa_sparse(30, 3, 10, XiRule::Spectral(0.9)).unwrap();
        let ev = s.matrix.eigenvalues();
        assert!((ev[0] - 0.1).abs() < 1e-10);
        let s = make_tau_kappa_sparse(30, 3, 10, XiRule::OverKappa(1.0)).unwrap();
        assert!(matches!(s.meta, SparsityMeta::TauKappa { xi, .. } if (xi - 0.1).abs() < 1e-15));
    }

    #[test]
    fn block_examples() {
        assert_eq!(make_block_sparse(5, 1, 0.4).unwrap().matrix, SymmetricMatrix::identity(5));
        let s = make_block_sparse(6, 2, 0.5).unwrap();
        let ev = s.matrix.eigenvalues();
        let want = [0.5, 1.0, 1.0, 1.0, 1.0, 1.5];
        assert!(ev.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
        let s = make_block_sparse(9, 4, 0.3).unwrap();
        assert!(check_tau_kappa(&s.matrix, 4, 4));
        assert!(make_block_sparse(5, 3, -0.6).is_err());
    }

    #[test]
    fn normalized_det_examples() {
        let c = SymmetricMatrix::new(DMatrix::identity(4, 4) * 3.0).unwrap();
        assert!((normalized_det(&c).unwrap() - 1.0).abs() < 1e-14);
        let d = make_diagonal(&[1.0, 2.0]).unwrap();
        assert!((normalized_det(&d.matrix).unwrap() - 0.5).abs() < 1e-15);
        assert!(make_diagonal(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn local_det_on_diagonal() {
        let c = SymmetricMatrix::new(DMatrix::identity(6, 6) * 2.0).unwrap();
        for m in 1..=6 {
            let mu = local_normalized_det(&c, m, LocalDetMode::Exact { budget: DEFAULT_SUBSET_BUDGET }).unwrap();
            assert!((mu - 1.0).abs() < 1e-14);
        }
        let d = make_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(inverse_local_normalized_det(&d.matrix, 10, 2, LocalDetMode::Bound).unwrap(), 1.0);
    }

    #[test]
    fn budget_is_enforced() {
        let s = make_tau_kappa_sparse(40, 3, 5, XiRule::Fixed(0.1)).unwrap();
        assert!(matches!(
            local_normalized_det(&s.matrix, 20, LocalDetMode::Exact { budget: DEFAULT_SUBSET_BUDGET }),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(local_normalized_det(&s.matrix, 20, LocalDetMode::Sampled { subsets: 50, seed: 1 }).is_ok());
    }

    #[test]
    fn combination_walk_matches_bitmask_enumeration() {
        let b = DMatrix::from_fn(7, 7, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let a = b.tr_mul(&b) + DMatrix::identity(7, 7);
        for m in 1..=7 {
            for first in 0..=7 - m {
                let brute = (0u32..1 << 7)
                    .filter(|mask| mask.count_ones() as usize == m && mask.trailing_zeros() as usize == first)
                    .map(|mask| {
                        let idx: Vec<usize> = (0..7).filter(|i| mask & (1 << i) != 0).collect();
                        normalized_det_of(submatrix(&a, &idx)).unwrap()
                    })
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(min_with_first(&a, first, m).unwrap(), brute, "m={m} first={first}");
            }
        }
        assert_eq!(n_choose(7, 3), 35);
        assert_eq!(n_choose(40, 20), 137_846_528_820);
    }
}
