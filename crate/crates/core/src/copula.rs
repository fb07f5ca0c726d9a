//! B-spline copulas `C(u, v; R) = sum_{k,l} r_kl Phi_k(u) Phi_l(v)`.
//!
//! A copula is a mixture: pick `(k, l)` with probability `r_kl`, then draw
//! `U ~ phi_k` and `V ~ phi_l` independently. Uniform marginals follow from
//! the row/column sums of `R` matching the basis weights, since
//! `sum_k q_k phi_k = 1` on `[0, 1]`.

use nalgebra::DMatrix;
use num_traits::Zero;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::basis::{check_unit, BasisError, BasisSystem};
use crate::moments::{self, MomentError, Rational};

/// Tolerance on row/column sums and total mass of a parameter matrix.
pub const SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopulaError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error("parameter matrix is {rows}x{cols} but weights have lengths {row_weights} and {col_weights}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        row_weights: usize,
        col_weights: usize,
    },
    #[error("negative entry r[{row}][{col}] = {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {got}, expected {want}")]
    RowSumMismatch { row: usize, got: f64, want: f64 },
    #[error("column {col} sums to {got}, expected {want}")]
    ColSumMismatch { col: usize, got: f64, want: f64 },
    #[error("total mass {got} differs from 1")]
    TotalMassMismatch { got: f64 },
    #[error("parameter-matrix weights do not match the basis weights at position {position}")]
    WeightMismatch { position: usize },
    #[error("operation needs a square parameter matrix over a single basis")]
    NotSquare,
    #[error("closed form requires m >= d >= 0 and m >= 1 (got n = {n}, d = {d})")]
    Domain { n: usize, d: usize },
}

/// Nonnegative `R` whose row sums equal `row_weights` and column sums equal
/// `col_weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrix {
    entries: DMatrix<f64>,
    row_weights: Vec<f64>,
    col_weights: Vec<f64>,
}

impl ParameterMatrix {
    /// Square matrix with both margins equal to `q`.
    pub fn new(entries: DMatrix<f64>, q: &[f64]) -> Result<Self, CopulaError> {
        Self::rectangular(entries, q, q)
    }

    pub fn rectangular(
        entries: DMatrix<f64>,
        row_weights: &[f64],
        col_weights: &[f64],
    ) -> Result<Self, CopulaError> {
        let (rows, cols) = entries.shape();
        if rows != row_weights.len() || cols != col_weights.len() {
            return Err(CopulaError::DimensionMismatch {
                rows,
                cols,
                row_weights: row_weights.len(),
                col_weights: col_weights.len(),
            });
        }
        for row in 0..rows {
            for col in 0..cols {
                let value = entries[(row, col)];
                if value.is_nan() || value < 0.0 {
                    return Err(CopulaError::NegativeEntry { row, col, value });
                }
            }
        }
        for (row, &want) in row_weights.iter().enumerate() {
            let got = entries.row(row).sum();
            if (got - want).abs() > SUM_TOLERANCE {
                return Err(CopulaError::RowSumMismatch { row, got, want });
            }
        }
        for (col, &want) in col_weights.iter().enumerate() {
            let got = entries.column(col).sum();
            if (got - want).abs() > SUM_TOLERANCE {
                return Err(CopulaError::ColSumMismatch { col, got, want });
            }
        }
        let total = entries.sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(CopulaError::TotalMassMismatch { got: total });
        }
        Ok(Self {
            entries,
            row_weights: row_weights.to_vec(),
            col_weights: col_weights.to_vec(),
        })
    }

    /// Builds from row-major nested vectors, as read from a CSV file.
    pub fn from_rows(rows: &[Vec<f64>], q: &[f64]) -> Result<Self, CopulaError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(CopulaError::DimensionMismatch {
                rows: nrows,
                cols: ncols,
                row_weights: q.len(),
                col_weights: q.len(),
            });
        }
        let entries = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
        Self::new(entries, q)
    }

    /// `R = diag(q)`: the maximum-correlation parameter.
    pub fn diagonal(q: &[f64]) -> Result<Self, CopulaError> {
        Self::new(DMatrix::from_diagonal(&q.to_vec().into()), q)
    }

    /// `R = q q^T`: the independence copula.
    pub fn independence(q: &[f64]) -> Result<Self, CopulaError> {
        let n = q.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| q[i] * q[j]), q)
    }

    /// A random feasible `R` with margins `q`: a random convex combination of
    /// north-west-corner transport plans under random row and column orders,
    /// together with `diag(q)` and `q q^T`.
    pub fn random<R: Rng + ?Sized>(q: &[f64], rng: &mut R) -> Result<Self, CopulaError> {
        let n = q.len();
        let plans = rng.gen_range(1..=4);
        let mut parts = vec![
            DMatrix::from_diagonal(&q.to_vec().into()),
            DMatrix::from_fn(n, n, |i, j| q[i] * q[j]),
        ];
        let mut order_rows: Vec<usize> = (0..n).collect();
        let mut order_cols: Vec<usize> = (0..n).collect();
        for _ in 0..plans {
            order_rows.shuffle(rng);
            order_cols.shuffle(rng);
            parts.push(northwest_corner(q, &order_rows, &order_cols));
        }
        let raw: Vec<f64> = parts
            .iter()
            .map(|_| -rng.gen::<f64>().max(1e-300).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let mut entries = DMatrix::zeros(n, n);
        for (part, w) in parts.iter().zip(&raw) {
            entries += part * (w / total);
        }
        Self::new(entries, q)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn col_weights(&self) -> &[f64] {
        &self.col_weights
    }

    /// `a^T R b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, &ak) in a.iter().enumerate().take(self.entries.nrows()) {
            if ak == 0.0 {
                continue;
            }
            let inner: f64 = self
                .entries
                .row(k)
                .iter()
                .zip(b)
                .map(|(r, bl)| r * bl)
                .sum();
            acc += ak * inner;
        }
        acc
    }
}

fn northwest_corner(q: &[f64], rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let n = q.len();
    let mut plan = DMatrix::zeros(n, n);
    let mut supply: Vec<f64> = q.to_vec();
    let mut demand: Vec<f64> = q.to_vec();
    let (mut i, mut j) = (0, 0);
    while i < n && j < n {
        let (r, c) = (rows[i], cols[j]);
        let amount = supply[r].min(demand[c]);
        plan[(r, c)] += amount;
        supply[r] -= amount;
        demand[c] -= amount;
        if supply[r] <= demand[c] {
            i += 1;
        } else {
            j += 1;
        }
    }
    plan
}

/// Evaluation interface shared by the copula types.
pub trait Copula {
    fn cdf(&self, u: f64, v: f64) -> Result<f64, CopulaError>;

    fn density(&self, u: f64, v: f64) -> Result<f64, CopulaError>;

    /// `P(U > u, V > v) = 1 - u - v + C(u, v)`.
    fn survival(&self, u: f64, v: f64) -> Result<f64, CopulaError> {
        let c = self.cdf(u, v)?;
        Ok((1.0 - u - v + c).clamp(0.0, 1.0))
    }
}

fn check_pair(u: f64, v: f64) -> Result<(), CopulaError> {
    check_unit(u)?;
    check_unit(v)?;
    Ok(())
}

/// Draws `count` pairs from the mixture with cell probabilities `R`.
fn sample_mixture(
    u_basis: &BasisSystem,
    v_basis: &BasisSystem,
    r: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    if count == 0 {
        return Vec::new();
    }
    let (rows, cols) = r.shape();
    // row-major cell weights
    let cells: Vec<f64> = (0..rows * cols)
        .map(|c| r[(c / cols, c % cols)].max(0.0))
        .collect();
    let picker = WeightedIndex::new(&cells).expect("parameter matrix has positive mass");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let cell = picker.sample(&mut rng);
        let (k, l) = (cell / cols, cell % cols);
        let pu: f64 = rng.gen();
        let pv: f64 = rng.gen();
        let u = u_basis
            .inverse_cdf(k + 1, pu)
            .expect("position and probability are in range");
        let v = v_basis
            .inverse_cdf(l + 1, pv)
            .expect("position and probability are in range");
        out.push((u, v));
    }
    out
}

/// General B-spline copula with parameter matrix `R`.
#[derive(Debug, Clone)]
pub struct BsplineCopula {
    u_basis: BasisSystem,
    v_basis: Option<BasisSystem>,
    params: ParameterMatrix,
}

fn weights_match(a: &[f64], b: &[f64]) -> Result<(), CopulaError> {
    if a.len() != b.len() {
        return Err(CopulaError::DimensionMismatch {
            rows: a.len(),
            cols: b.len(),
            row_weights: a.len(),
            col_weights: b.len(),
        });
    }
    match a
        .iter()
        .zip(b)
        .position(|(x, y)| (x - y).abs() > SUM_TOLERANCE)
    {
        Some(position) => Err(CopulaError::WeightMismatch { position }),
        None => Ok(()),
    }
}

impl BsplineCopula {
    /// Square copula: both coordinates use `basis`.
    pub fn new(basis: BasisSystem, params: ParameterMatrix) -> Result<Self, CopulaError> {
        weights_match(params.row_weights(), basis.weights())?;
        weights_match(params.col_weights(), basis.weights())?;
        Ok(Self {
            u_basis: basis,
            v_basis: None,
            params,
        })
    }

    /// Copula with separate bases for `u` and `v` (rectangular `R`).
    pub fn with_bases(
        u_basis: BasisSystem,
        v_basis: BasisSystem,
        params: ParameterMatrix,
    ) -> Result<Self, CopulaError> {
        weights_match(params.row_weights(), u_basis.weights())?;
        weights_match(params.col_weights(), v_basis.weights())?;
        Ok(Self {
            u_basis,
            v_basis: Some(v_basis),
            params,
        })
    }

    pub fn independence(basis: BasisSystem) -> Result<Self, CopulaError> {
        let params = ParameterMatrix::independence(basis.weights())?;
        Self::new(basis, params)
    }

    pub fn u_basis(&self) -> &BasisSystem {
        &self.u_basis
    }

    pub fn v_basis(&self) -> &BasisSystem {
        self.v_basis.as_ref().unwrap_or(&self.u_basis)
    }

    pub fn params(&self) -> &ParameterMatrix {
        &self.params
    }

    /// `C` from precomputed CDF vectors `Phi(u)` and `Phi(v)`.
    pub fn cdf_from(&self, phi_u: &[f64], phi_v: &[f64]) -> f64 {
        self.params.bilinear(phi_u, phi_v).clamp(0.0, 1.0)
    }

    /// `E[UV] = sum_{k,l} r_kl mu_k nu_l` with `mu`, `nu` the density means.
    pub fn expected_uv(&self) -> Result<f64, CopulaError> {
        let means = self.square_basis()?.means();
        Ok(self.params.bilinear(&means, &means))
    }

    pub fn correlation(&self) -> Result<f64, CopulaError> {
        Ok(12.0 * (self.expected_uv()? - 0.25))
    }

    fn square_basis(&self) -> Result<&BasisSystem, CopulaError> {
        match &self.v_basis {
            None => Ok(&self.u_basis),
            Some(_) => Err(CopulaError::NotSquare),
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<(f64, f64)> {
        sample_mixture(
            &self.u_basis,
            self.v_basis(),
            self.params.entries(),
            count,
            seed,
        )
    }
}

impl Copula for BsplineCopula {
    fn cdf(&self, u: f64, v: f64) -> Result<f64, CopulaError> {
        check_pair(u, v)?;
        let phi_u = self.u_basis.cdf_all(u)?;
        let phi_v = self.v_basis().cdf_all(v)?;
        Ok(self.cdf_from(&phi_u, &phi_v))
    }

    fn density(&self, u: f64, v: f64) -> Result<f64, CopulaError> {
        check_pair(u, v)?;
        let (su, du) = self.u_basis.density_local(u)?;
        let (sv, dv) = self.v_basis().density_local(v)?;
        let mut acc = 0.0;
        for (a, x) in du.iter().enumerate() {
            for (b, y) in dv.iter().enumerate() {
                acc += self.params.get(su + a, sv + b) * x * y;
            }
        }
        Ok(acc.max(0.0))
    }
}

/// Maximum-correlation copula `C*(u, v) = sum_k q_k Phi_k(u) Phi_k(v)`.
#[derive(Debug, Clone)]
pub struct MaxCorrCopula {
    basis: BasisSystem,
}

impl MaxCorrCopula {
    pub fn new(basis: BasisSystem) -> Self {
        Self { basis }
    }

    pub fn uniform(degree: usize, spans: usize) -> Result<Self, CopulaError> {
        Ok(Self::new(BasisSystem::uniform(degree, spans)?))
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    /// The same copula as a general [`BsplineCopula`] with `R = diag(q)`.
    pub fn to_general(&self) -> BsplineCopula {
        let params =
            ParameterMatrix::diagonal(self.basis.weights()).expect("diag(q) is always feasible");
        BsplineCopula::new(self.basis.clone(), params).expect("weights match by construction")
    }

    pub fn cdf_from(&self, phi_u: &[f64], phi_v: &[f64]) -> f64 {
        self.basis
            .weights()
            .iter()
            .zip(phi_u.iter().zip(phi_v))
            .map(|(q, (a, b))| q * a * b)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// `E[UV] = sum_k r_k^2 / q_k`.
    pub fn expected_uv(&self) -> f64 {
        self.basis
            .first_moments()
            .iter()
            .zip(self.basis.weights())
            .map(|(r, q)| r * r / q)
            .sum()
    }

    pub fn correlation(&self) -> f64 {
        12.0 * (self.expected_uv() - 0.25)
    }

    /// Largest `|min(u, v) - C*(u, v)|` over the lattice `{i / grid}^2`.
    pub fn fh_distance(&self, grid: usize) -> Result<f64, CopulaError> {
        let grid = grid.max(1);
        let points: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).collect();
        let phis = points
            .iter()
            .map(|&u| self.basis.cdf_all(u))
            .collect::<Result<Vec<_>, _>>()?;
        let mut worst = 0.0f64;
        for (i, &u) in points.iter().enumerate() {
            for (j, &v) in points.iter().enumerate() {
                let gap = (u.min(v) - self.cdf_from(&phis[i], &phis[j])).abs();
                worst = worst.max(gap);
            }
        }
        Ok(worst)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<(f64, f64)> {
        let diag = DMatrix::from_diagonal(&self.basis.weights().to_vec().into());
        sample_mixture(&self.basis, &self.basis, &diag, count, seed)
    }
}

impl Copula for MaxCorrCopula {
    fn cdf(&self, u: f64, v: f64) -> Result<f64, CopulaError> {
        check_pair(u, v)?;
        let phi_u = self.basis.cdf_all(u)?;
        let phi_v = self.basis.cdf_all(v)?;
        Ok(self.cdf_from(&phi_u, &phi_v))
    }

    fn density(&self, u: f64, v: f64) -> Result<f64, CopulaError> {
        check_pair(u, v)?;
        let (su, du) = self.basis.density_local(u)?;
        let (sv, dv) = self.basis.density_local(v)?;
        let q = self.basis.weights();
        let mut acc = 0.0;
        for (a, x) in du.iter().enumerate() {
            let k = su + a;
            if k >= sv && k - sv < dv.len() {
                acc += q[k] * x * dv[k - sv];
            }
        }
        Ok(acc)
    }
}

/// `1 - (d+1)/m^2 + d(d+3)(2d+3) / (5(d+2) m^3)` with `m = n - d`, valid for
/// equally spaced knots with `m >= d`.
pub fn closed_form_max_correlation(n: usize, d: usize) -> Result<f64, CopulaError> {
    if n < d + 1 || n - d < d {
        return Err(CopulaError::Domain { n, d });
    }
    let m = (n - d) as f64;
    let d = d as f64;
    Ok(1.0 - (d + 1.0) / (m * m) + d * (d + 3.0) * (2.0 * d + 3.0) / (5.0 * (d + 2.0) * m * m * m))
}

/// Exact maximum correlation `12 (sum r_k^2 / q_k - 1/4)` from the rational
/// unit-interval moments (equally spaced knots, `m >= d`).
pub fn exact_max_correlation(degree: usize, spans: usize) -> Result<Rational, CopulaError> {
    let (qs, rs) = moments::unit_interval_vectors(degree, spans)?;
    let mut euv = Rational::zero();
    for (q, r) in qs.iter().zip(&rs) {
        euv += r * r / q;
    }
    let quarter = Rational::new(1.into(), 4.into());
    Ok(Rational::from_integer(12.into()) * (euv - quarter))
}
