//! Sample covariance, correlation and partial correlation, and their
//! unit-sphere representations (U-scores and Y-scores).

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default cap on the condition number of `B` before Y-scores are refused.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

const SYMMETRY_TOL: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-10;

/// `n x p` matrix of observations, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 || p < 2 {
            return Err(Error::Dimension(format!(
                "data matrix must be at least 2 x 2, got {n} x {p}"
            )));
        }
        for col in 0..p {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {p}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Square matrix that is symmetric to within `1e-12` (relative to its
/// largest entry).
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {} x {}",
                values.nrows(),
                values.ncols()
            )));
        }
        let scale = values.amax().max(1.0);
        let dim = values.nrows();
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::param(
                        "matrix",
                        format!("({i},{j})={a}, ({j},{i})={b}"),
                        "not symmetric",
                    ));
                }
            }
        }
        Ok(Self(values))
    }

    /// Replaces `A` by `(A + A^T)/2`.
    pub fn from_symmetrized(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {} x {}",
                values.nrows(),
                values.ncols()
            )));
        }
        let sym = (&values + values.transpose()) * 0.5;
        Self::new(sym)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// `(n-1) x p` matrix whose columns are unit vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix(DMatrix<f64>);

impl ScoreMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        for (j, col) in values.column_iter().enumerate() {
            let norm = col.norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite { row: 0, col: j });
            }
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::param(
                    "score column",
                    format!("{j} (norm {norm})"),
                    "columns must have unit norm",
                ));
            }
        }
        Ok(Self(values))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// Column `j` as a contiguous slice (storage is column-major).
    pub fn column(&self, j: usize) -> &[f64] {
        let r = self.rows();
        &self.0.as_slice()[j * r..(j + 1) * r]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.cols()).map(move |j| self.column(j))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

fn centered(x: &DataMatrix) -> DMatrix<f64> {
    let mut c = x.values().clone();
    let n = c.nrows() as f64;
    for mut col in c.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    c
}

/// `S = X^T (I - 11^T/n) X / (n - 1)`.
pub fn sample_covariance(x: &DataMatrix) -> SymmetricMatrix {
    let c = centered(x);
    let s = c.tr_mul(&c) / (x.n() as f64 - 1.0);
    SymmetricMatrix::from_symmetrized(s).expect("covariance of finite data is finite and square")
}

/// Centered columns scaled to unit norm; the scaling is `sqrt(n-1)` times
/// the usual standardisation.
fn z_scores(x: &DataMatrix) -> Result<DMatrix<f64>> {
    let mut c = centered(x);
    let n = x.n() as f64;
    for (j, mut col) in c.column_iter_mut().enumerate() {
        let scale = x.values().column(j).amax() * n.sqrt();
        let norm = col.norm();
        if norm == 0.0 || norm <= 1e-14 * scale {
            return Err(Error::DegenerateColumn { column: j });
        }
        col /= norm;
    }
    Ok(c)
}

fn into_correlation(mut m: DMatrix<f64>) -> SymmetricMatrix {
    let sym = (&m + m.transpose()) * 0.5;
    m = sym;
    let dim = m.nrows();
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = if i == j { 1.0 } else { m[(i, j)].clamp(-1.0, 1.0) };
        }
    }
    SymmetricMatrix(m)
}

/// `R = D^{-1/2} S D^{-1/2}` with `D = diag(S)`.
pub fn sample_correlation(x: &DataMatrix) -> Result<SymmetricMatrix> {
    let s = sample_covariance(x);
    let d: Vec<f64> = s.as_matrix().diagonal().iter().copied().collect();
    let scale = x.values().column_iter().map(|c| c.amax()).collect::<Vec<_>>();
    for (j, &v) in d.iter().enumerate() {
        if v <= (1e-14 * scale[j]).powi(2) {
            return Err(Error::DegenerateColumn { column: j });
        }
    }
    let inv: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let r = DMatrix::from_fn(x.p(), x.p(), |i, j| s.get(i, j) * inv[i] * inv[j]);
    Ok(into_correlation(r))
}

/// Columns 2..n of the Householder reflection that maps `e_1` to `1/sqrt(n)`,
/// applied transposed to every column of `z`.
fn project_off_ones(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let root = (n as f64).sqrt();
    // v = 1/sqrt(n) - e_1
    let v0 = 1.0 / root - 1.0;
    let vi = 1.0 / root;
    let vtv = 2.0 - 2.0 / root;
    let shift: Vec<f64> = z
        .column_iter()
        .map(|col| 2.0 * vi * (v0 * col[0] + vi * col.rows(1, n - 1).sum()) / vtv)
        .collect();
    DMatrix::from_fn(n - 1, z.ncols(), |i, j| z[(i + 1, j)] - shift[j])
}

/// U-scores: `(n-1) x p` unit columns with `U^T U = R`.
pub fn u_scores(x: &DataMatrix) -> Result<ScoreMatrix> {
    let z = z_scores(x)?;
    let mut u = project_off_ones(&z);
    // renormalise to shed round-off from the projection
    for mut col in u.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    ScoreMatrix::new(u)
}

/// `Psi = S^T S` for a score matrix, returned as a correlation-type matrix.
pub fn gram(scores: &ScoreMatrix) -> SymmetricMatrix {
    into_correlation(scores.as_matrix().tr_mul(scores.as_matrix()))
}

/// `B = ((n-1)/p) U U^T`.
pub fn b_matrix(u: &ScoreMatrix) -> Result<SymmetricMatrix> {
    let (rows, p) = (u.rows(), u.cols());
    if p < rows + 1 {
        return Err(Error::Regime { n: rows + 1, p });
    }
    let b = u.as_matrix() * u.as_matrix().transpose() * (rows as f64 / p as f64);
    SymmetricMatrix::from_symmetrized(b)
}

/// Condition number `lambda_max / lambda_min` of a symmetric matrix;
/// infinite when it is not positive definite.
pub fn condition_number(m: &SymmetricMatrix) -> f64 {
    let ev = m.eigenvalues();
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Y-scores together with the condition number of the `B` used to build
/// them.
#[derive(Clone, Debug)]
pub struct YScores {
    pub scores: ScoreMatrix,
    pub condition: f64,
}

pub fn y_scores(u: &ScoreMatrix) -> Result<ScoreMatrix> {
    Ok(y_scores_with_cap(u, DEFAULT_CONDITION_CAP)?.scores)
}

/// Solves `B Ybar = U` by Cholesky and normalises the columns of `Ybar`.
pub fn y_scores_with_cap(u: &ScoreMatrix, cap: f64) -> Result<YScores> {
    let b = b_matrix(u)?;
    let condition = condition_number(&b);
    if !(condition <= cap) {
        return Err(Error::Singular { condition, cap });
    }
    let chol = Cholesky::new(b.into_inner()).ok_or(Error::Singular { condition, cap })?;
    let mut y = chol.solve(u.as_matrix());
    for mut col in y.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Ok(YScores {
        scores: ScoreMatrix::new(y)?,
        condition,
    })
}

/// Sample partial correlation through the Y-score route, `P = Y^T Y`.
pub fn partial_correlation(x: &DataMatrix) -> Result<SymmetricMatrix> {
    let u = u_scores(x)?;
    Ok(gram(&y_scores(&u)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> DataMatrix {
        DataMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 3.0]]).unwrap()
    }

    #[test]
    fn hand_computed_covariance() {
        let s = sample_covariance(&example());
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!((s.as_matrix() - want).amax() < 1e-15);
        let r = sample_correlation(&example()).unwrap();
        assert!((r.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_give_zero_covariance() {
        let x = DataMatrix::from_rows(&vec![vec![1.5, -2.0, 7.0]; 5]).unwrap();
        assert_eq!(sample_covariance(&x).as_matrix().amax(), 0.0);
        assert!(matches!(
            sample_correlation(&x),
            Err(Error::DegenerateColumn { column: 0 })
        ));
        assert!(u_scores(&x).is_err());
    }

    #[test]
    fn scaling_scales_covariance() {
        let x = example();
        let x2 = DataMatrix::new(x.values() * 2.0).unwrap();
        let diff = sample_covariance(&x2).as_matrix() - sample_covariance(&x).as_matrix() * 4.0;
        assert!(diff.amax() < 1e-14);
    }

    #[test]
    fn perfect_and_zero_correlation() {
        let x = DataMatrix::from_rows(&[
            vec![1.0, 7.0, 1.0],
            vec![2.0, 10.0, -1.0],
            vec![-4.0, -8.0, -1.0],
            vec![1.0, 7.0, 1.0],
        ])
        .unwrap();
        let r = sample_correlation(&x).unwrap();
        assert!((r.get(0, 1) - 1.0).abs() < 1e-12);
        // second example: orthogonal centered columns
        let y = DataMatrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ])
        .unwrap();
        assert!(sample_correlation(&y).unwrap().get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0])).is_err());
        assert!(ScoreMatrix::new(DMatrix::from_element(3, 2, 1.0)).is_err());
    }

    #[test]
    fn b_refuses_small_p() {
        let x = DataMatrix::new(DMatrix::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 + (i * j) as f64)).unwrap();
        let u = u_scores(&x).unwrap();
        assert!(matches!(b_matrix(&u), Err(Error::Regime { n: 6, p: 5 })));
    }

    #[test]
    fn identity_b_leaves_scores_unchanged() {
        // rows of U orthogonal with U U^T = (p/(n-1)) I: B = I
        let (rows, p) = (3, 6);
        let mut u = DMatrix::zeros(rows, p);
        for j in 0..p {
            u[(j % rows, j)] = 1.0;
        }
        let u = ScoreMatrix::new(u).unwrap();
        let b = b_matrix(&u).unwrap();
        assert!((b.as_matrix() - DMatrix::identity(rows, rows)).amax() < 1e-15);
        let y = y_scores(&u).unwrap();
        assert!((y.as_matrix() - u.as_matrix()).amax() < 1e-15);
    }

    #[test]
    fn singular_b_is_refused() {
        // all columns equal: B has rank one
        let mut u = DMatrix::zeros(3, 5);
        for j in 0..5 {
            u[(0, j)] = 1.0;
        }
        let u = ScoreMatrix::new(u).unwrap();
        assert!(matches!(y_scores(&u), Err(Error::Singular { .. })));
    }
}
