//! Numerical total-positivity checks.
//!
//! A kernel `K(u, v)` is TP_r when every `r x r` matrix `K(u_i, v_j)` with
//! `u_1 > ... > u_r` and `v_1 > ... > v_r` has a nonnegative determinant.
//! The checks here sample such matrices, take LU determinants, and compare
//! them against the product of the Euclidean row norms (the Hadamard bound),
//! so the tolerances are scale free.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::basis::{BasisError, BasisSystem};
use crate::copula::{Copula, CopulaError, MaxCorrCopula};

/// Scaled-determinant floor for TP_r checks.
pub const TP_TOLERANCE: f64 = 1e-9;
/// Scaled-minor floor for the moment-matrix check.
pub const MOMENT_TOLERANCE: f64 = 1e-8;
/// Minimum separation between sampled abscissae.
pub const MIN_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TpError {
    #[error("order r must be at least 1")]
    ZeroOrder,
    #[error("at least one trial is required")]
    NoTrials,
    #[error("abscissae must be strictly decreasing with gaps of at least {MIN_GAP}")]
    NotDecreasing,
    #[error("row and column abscissae have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("arguments must satisfy x < x' and y < y' inside [0, 1]")]
    Unordered,
    #[error("partition must be weakly decreasing")]
    BadPartition,
    #[error("Schur arguments must be nonnegative, strictly decreasing and separated by at least {MIN_GAP}")]
    BadSchurArguments,
    #[error("moment order must be between 1 and 4, got {0}")]
    MomentOrder(usize),
    #[error("Bernstein minor needs 1 <= k_r < ... < k_1 <= n and distinct t in (0, 1)")]
    BadBernsteinArguments,
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Kernel values on a strictly decreasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMatrix {
    rows: Vec<f64>,
    cols: Vec<f64>,
    values: DMatrix<f64>,
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] - w[1] >= MIN_GAP)
}

impl GridMatrix {
    pub fn from_kernel<K: Fn(f64, f64) -> f64>(
        kernel: K,
        rows: Vec<f64>,
        cols: Vec<f64>,
    ) -> Result<Self, TpError> {
        if rows.len() != cols.len() {
            return Err(TpError::LengthMismatch(rows.len(), cols.len()));
        }
        if rows.is_empty() {
            return Err(TpError::ZeroOrder);
        }
        if !strictly_decreasing(&rows) || !strictly_decreasing(&cols) {
            return Err(TpError::NotDecreasing);
        }
        let values = DMatrix::from_fn(rows.len(), cols.len(), |i, j| kernel(rows[i], cols[j]));
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn cols(&self) -> &[f64] {
        &self.cols
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `(det, scale)` with `scale` the product of row norms.
    pub fn determinant(&self) -> (f64, f64) {
        determinant_with_scale(&self.values)
    }

    /// `det / scale`, or 0 when a row vanishes.
    pub fn scaled_determinant(&self) -> f64 {
        let (det, scale) = self.determinant();
        scaled(det, scale)
    }
}

fn determinant_with_scale(m: &DMatrix<f64>) -> (f64, f64) {
    let scale: f64 = m.row_iter().map(|row| row.norm()).product();
    let det = m.clone().lu().determinant();
    (det, scale)
}

fn scaled(det: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        det / scale
    }
}

/// Identifies the kernel in a report.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct KernelLabel {
    pub kernel: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
}

impl KernelLabel {
    pub fn new(kernel: impl Into<String>) -> Self {
        Self {
            kernel: kernel.into(),
            n: None,
            d: None,
        }
    }

    pub fn with_basis(kernel: impl Into<String>, basis: &BasisSystem) -> Self {
        Self {
            kernel: kernel.into(),
            n: Some(basis.len()),
            d: Some(basis.degree()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TpReport {
    pub kernel: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub r: usize,
    pub trials: usize,
    pub min_scaled_det: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DegeneracyReport {
    pub kernel: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub r: usize,
    pub trials: usize,
    pub max_abs_scaled_det: f64,
    pub pass: bool,
}

/// `r` strictly decreasing points in `(0, 1)` with gaps of at least
/// [`MIN_GAP`]; draws that violate the gap are discarded.
pub fn decreasing_abscissae<R: Rng + ?Sized>(rng: &mut R, r: usize) -> Vec<f64> {
    loop {
        let mut xs: Vec<f64> = (0..r).map(|_| rng.gen::<f64>()).collect();
        xs.sort_by(|a, b| b.total_cmp(a));
        let inside = xs.iter().all(|&x| x > 0.0 && x < 1.0);
        if inside && strictly_decreasing(&xs) {
            return xs;
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64))
}

fn sampled_scaled_dets<K: Fn(f64, f64) -> f64>(
    kernel: &K,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>, TpError> {
    if r == 0 {
        return Err(TpError::ZeroOrder);
    }
    if trials == 0 {
        return Err(TpError::NoTrials);
    }
    (0..trials)
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let rows = decreasing_abscissae(&mut rng, r);
            let cols = decreasing_abscissae(&mut rng, r);
            let grid = GridMatrix::from_kernel(kernel, rows, cols)?;
            Ok(grid.scaled_determinant())
        })
        .collect()
}

/// Samples `trials` order-`r` determinants of `kernel`; passes when the
/// smallest scaled determinant is at least `-TP_TOLERANCE`. Trial `t` uses
/// the generator seeded with `seed + t`.
pub fn tp_order_check<K: Fn(f64, f64) -> f64>(
    label: KernelLabel,
    kernel: K,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<TpReport, TpError> {
    let dets = sampled_scaled_dets(&kernel, r, trials, seed)?;
    let min = dets.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TpReport {
        kernel: label.kernel,
        n: label.n,
        d: label.d,
        r,
        trials,
        min_scaled_det: min,
        pass: min >= -TP_TOLERANCE,
    })
}

/// For kernels of rank at most `r - 1`: passes when every sampled
/// `|det| <= TP_TOLERANCE * scale`.
pub fn rank_degeneracy_check<K: Fn(f64, f64) -> f64>(
    label: KernelLabel,
    kernel: K,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<DegeneracyReport, TpError> {
    let dets = sampled_scaled_dets(&kernel, r, trials, seed)?;
    let max = dets.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(DegeneracyReport {
        kernel: label.kernel,
        n: label.n,
        d: label.d,
        r,
        trials,
        max_abs_scaled_det: max,
        pass: max <= TP_TOLERANCE,
    })
}

/// TP_r check of the survival function `1 - u - v + C(u, v)`.
pub fn survival_tp_check<C: Copula>(
    label: KernelLabel,
    cop: &C,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<TpReport, TpError> {
    tp_order_check(
        label,
        |u, v| cop.survival(u, v).unwrap_or(f64::NAN),
        r,
        trials,
        seed,
    )
}

/// Determinant of the bordered survival matrix
///
/// ```text
/// | 1       S_V(y)     S_V(y')    |
/// | S_U(x)  S(x, y)    S(x, y')   |
/// | S_U(x') S(x', y)   S(x', y')  |
/// ```
///
/// where `S_U(x) = 1 - x` and `S` is the survival copula. It is nonnegative
/// for TP_3 survival functions.
pub fn two_by_two_pqd_inequality<C: Copula>(
    cop: &C,
    x: f64,
    x2: f64,
    y: f64,
    y2: f64,
) -> Result<f64, TpError> {
    let m = bordered_survival_matrix(cop, x, x2, y, y2)?;
    Ok(m.determinant())
}

pub fn bordered_survival_matrix<C: Copula>(
    cop: &C,
    x: f64,
    x2: f64,
    y: f64,
    y2: f64,
) -> Result<DMatrix<f64>, TpError> {
    let ordered = x < x2 && y < y2;
    let inside = [x, x2, y, y2].iter().all(|t| (0.0..=1.0).contains(t));
    if !ordered || !inside {
        return Err(TpError::Unordered);
    }
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0,
            1.0 - y,
            1.0 - y2,
            1.0 - x,
            cop.survival(x, y)?,
            cop.survival(x, y2)?,
            1.0 - x2,
            cop.survival(x2, y)?,
            cop.survival(x2, y2)?,
        ],
    ))
}

/// Principal 2x2 minor of the bordered matrix: `S(x, y) - (1 - x)(1 - y)`.
pub fn pqd_gap<C: Copula>(cop: &C, x: f64, y: f64) -> Result<f64, TpError> {
    Ok(cop.survival(x, y)? - (1.0 - x) * (1.0 - y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentMatrixReport {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    /// `E[U^i V^j]`, `i, j = 0..r`, row-major.
    pub matrix: Vec<Vec<f64>>,
    pub min_scaled_minor: f64,
    /// Expanded determinant of the 3x3 leading block, when `r >= 3`.
    pub three_by_three: Option<f64>,
    pub pass: bool,
}

/// `E[U^i V^j]` under `c*`: `sum_k q_k E_k[T^i] E_k[T^j]`.
pub fn moment_matrix(cop: &MaxCorrCopula, r: usize) -> DMatrix<f64> {
    let basis = cop.basis();
    let q = basis.weights();
    let per_power: Vec<Vec<f64>> = (0..r).map(|p| basis.density_moments(p)).collect();
    DMatrix::from_fn(r, r, |i, j| {
        q.iter()
            .enumerate()
            .map(|(k, qk)| qk * per_power[i][k] * per_power[j][k])
            .sum()
    })
}

/// Six-term expansion of the leading 3x3 moment determinant.
pub fn moment_three_by_three(m: &DMatrix<f64>) -> f64 {
    let ey = m[(0, 1)];
    let ey2 = m[(0, 2)];
    let ex = m[(1, 0)];
    let exy = m[(1, 1)];
    let exy2 = m[(1, 2)];
    let ex2 = m[(2, 0)];
    let ex2y = m[(2, 1)];
    let ex2y2 = m[(2, 2)];
    ex2y2 * exy - ex2y * exy2 - ex * ex2y2 * ey + ex2 * exy2 * ey + ex * ex2y * ey2
        - ex2 * exy * ey2
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Smallest scaled minor over all square submatrices of `m`.
pub fn min_scaled_minor(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = f64::INFINITY;
    for size in 1..=n {
        for rows in subsets(m.nrows(), size) {
            for cols in subsets(m.ncols(), size) {
                let sub = DMatrix::from_fn(size, size, |i, j| m[(rows[i], cols[j])]);
                let (det, scale) = determinant_with_scale(&sub);
                worst = worst.min(scaled(det, scale));
            }
        }
    }
    worst
}

/// Checks that the moment matrix `(E[U^{i-1} V^{j-1}])_{i,j <= r}` of `c*`
/// has all minors nonnegative (scaled floor [`MOMENT_TOLERANCE`]).
pub fn moment_matrix_tp_check(
    cop: &MaxCorrCopula,
    r: usize,
) -> Result<MomentMatrixReport, TpError> {
    if r == 0 || r > 4 {
        return Err(TpError::MomentOrder(r));
    }
    let m = moment_matrix(cop, r);
    let min = min_scaled_minor(&m);
    let three = (r >= 3).then(|| moment_three_by_three(&m));
    let three_ok = match three {
        Some(value) => {
            let lead = m.view((0, 0), (3, 3)).into_owned();
            let (_, scale) = determinant_with_scale(&lead);
            scaled(value, scale) >= -MOMENT_TOLERANCE
        }
        None => true,
    };
    Ok(MomentMatrixReport {
        n: cop.basis().len(),
        d: cop.basis().degree(),
        r,
        matrix: m
            .row_iter()
            .map(|row| row.iter().copied().collect())
            .collect(),
        min_scaled_minor: min,
        three_by_three: three,
        pass: min >= -MOMENT_TOLERANCE && three_ok,
    })
}

/// Weakly decreasing sequence of nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self, TpError> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(TpError::BadPartition);
        }
        Ok(Self(parts))
    }

    /// Partition with `k_j - 1 = kappa_j + r - j` for strictly decreasing
    /// `k_1 > ... > k_r >= 1`.
    pub fn from_indices(k: &[usize]) -> Result<Self, TpError> {
        let r = k.len();
        if k.contains(&0) || k.windows(2).any(|w| w[0] <= w[1]) {
            return Err(TpError::BadPartition);
        }
        Self::new(
            k.iter()
                .enumerate()
                .map(|(j, &kj)| kj - 1 - (r - 1 - j))
                .collect(),
        )
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Schur function value with its Hadamard-type scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurValue {
    pub value: f64,
    /// Product of row norms of the generalized Vandermonde matrix divided by
    /// the Vandermonde product; bounds `|value|`.
    pub scale: f64,
}

/// Bialternant `det(z_i^{kappa_j + r - j}) / prod_{i<j} (z_i - z_j)`.
pub fn schur_function(kappa: &Partition, z: &[f64]) -> Result<SchurValue, TpError> {
    let r = z.len();
    if kappa.len() != r {
        return Err(TpError::LengthMismatch(kappa.len(), r));
    }
    if z.iter().any(|&x| x.is_nan() || x < 0.0) || !strictly_decreasing(z) {
        return Err(TpError::BadSchurArguments);
    }
    if r == 0 {
        return Ok(SchurValue {
            value: 1.0,
            scale: 1.0,
        });
    }
    let exps: Vec<i32> = kappa
        .parts()
        .iter()
        .enumerate()
        .map(|(j, &p)| (p + r - 1 - j) as i32)
        .collect();
    let alt = DMatrix::from_fn(r, r, |i, j| z[i].powi(exps[j]));
    let (det, norms) = determinant_with_scale(&alt);
    let mut vandermonde = 1.0;
    for i in 0..r {
        for j in i + 1..r {
            vandermonde *= z[i] - z[j];
        }
    }
    Ok(SchurValue {
        value: det / vandermonde,
        scale: norms / vandermonde,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MinorPair {
    pub direct: f64,
    pub via_schur: f64,
}

impl MinorPair {
    pub fn relative_gap(&self) -> f64 {
        let denom = self.direct.abs().max(self.via_schur.abs());
        if denom == 0.0 {
            0.0
        } else {
            (self.direct - self.via_schur).abs() / denom
        }
    }
}

/// The minor `det(phi_{k_j}(t_i))` of the single-span (Bernstein) system,
/// evaluated directly from the spline basis and through the Schur-function
/// factorization.
pub fn bernstein_minor_oracle(n: usize, k: &[usize], t: &[f64]) -> Result<MinorPair, TpError> {
    let r = k.len();
    if n == 0
        || r == 0
        || r != t.len()
        || k[0] > n
        || t.iter().any(|&x| x.is_nan() || x <= 0.0 || x >= 1.0)
        || !strictly_decreasing(t)
    {
        return Err(TpError::BadBernsteinArguments);
    }
    let kappa = Partition::from_indices(k).map_err(|_| TpError::BadBernsteinArguments)?;

    let basis = BasisSystem::uniform(n - 1, 1)?;
    let mut direct_m = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            direct_m[(i, j)] = basis.density(k[j], t[i])?;
        }
    }
    let direct = direct_m.lu().determinant();

    let z: Vec<f64> = t.iter().map(|&x| x / (1.0 - x)).collect();
    let schur = schur_function(&kappa, &z)?.value;
    let mut via = schur;
    for &kj in k {
        via *= kj as f64 * binomial_f64(n, kj);
    }
    for &ti in t {
        via *= (1.0 - ti).powi(n as i32 - 1);
    }
    for i in 0..r {
        for j in i + 1..r {
            via *= (t[i] - t[j]) / ((1.0 - t[i]) * (1.0 - t[j]));
        }
    }
    Ok(MinorPair {
        direct,
        via_schur: via,
    })
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}
