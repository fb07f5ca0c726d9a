//! Clamped B-spline bases on `[0, 1]` and the normalized density system
//! built from them.
//!
//! Basis functions are indexed the usual way for a clamped knot sequence:
//! `N^d_i` for `i = -d, ..., m - 1`, where `m` is the number of knot spans.
//! The density system uses 1-based positions `k = 1, ..., n` with `n = m + d`
//! and `phi_k = N^d_{k-d-1} / q_k`.

use thiserror::Error;

use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("number of knot spans must be at least 1, got {0}")]
    NoSpans(usize),
    #[error("interior knot {index} = {value} is not strictly inside (0, 1)")]
    KnotOutOfRange { index: usize, value: f64 },
    #[error("interior knots must be strictly increasing (t_{index} = {prev}, t_{next_index} = {next})", next_index = index + 1)]
    KnotsNotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("basis index {index} outside {lo}..={hi}")]
    IndexOutOfRange { index: i64, lo: i64, hi: i64 },
    #[error("argument {0} outside [0, 1]")]
    ArgumentOutOfRange(f64),
    #[error("operation requires equally spaced knots")]
    NonUniformKnots,
    #[error("degree {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeTooLarge(usize),
}

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 31;

/// Clamped knot sequence of degree `d` with `m` spans on `[0, 1]`.
///
/// Only the interior knots are stored; the `d + 1` copies of each endpoint
/// are implied.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    interior: Vec<f64>,
    full: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, interior: Vec<f64>) -> Result<Self, BasisError> {
        if degree > MAX_DEGREE {
            return Err(BasisError::DegreeTooLarge(degree));
        }
        for (index, &value) in interior.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(BasisError::KnotOutOfRange {
                    index: index + 1,
                    value,
                });
            }
        }
        for (index, pair) in interior.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(BasisError::KnotsNotIncreasing {
                    index: index + 1,
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        let mut full = Vec::with_capacity(interior.len() + 2 * degree + 3);
        full.extend(std::iter::repeat_n(0.0, degree + 1));
        full.extend_from_slice(&interior);
        full.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(Self {
            degree,
            interior,
            full,
        })
    }

    /// Equally spaced interior knots `i / m`, `i = 1, ..., m - 1`.
    pub fn uniform(degree: usize, spans: usize) -> Result<Self, BasisError> {
        if spans == 0 {
            return Err(BasisError::NoSpans(spans));
        }
        let interior = (1..spans).map(|i| i as f64 / spans as f64).collect();
        Self::new(degree, interior)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of knot spans `m`.
    pub fn spans(&self) -> usize {
        self.interior.len() + 1
    }

    /// Number of nonzero basis functions `n = m + d`.
    pub fn basis_count(&self) -> usize {
        self.spans() + self.degree
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// The full sequence `t_{-d}, ..., t_{m+d}` (length `m + 2d + 1`).
    pub fn full(&self) -> &[f64] {
        &self.full
    }

    /// Knot `t_j` for `j` in `-d..=m+d`.
    pub fn knot(&self, j: i64) -> f64 {
        let pos = j + self.degree as i64;
        self.full[pos.clamp(0, self.full.len() as i64 - 1) as usize]
    }

    /// Left end of span `s`, for `s` in `0..=m`.
    pub fn breakpoint(&self, s: usize) -> f64 {
        self.full[s + self.degree]
    }

    pub fn is_uniform(&self) -> bool {
        let m = self.spans();
        self.interior
            .iter()
            .enumerate()
            .all(|(i, &t)| t == (i + 1) as f64 / m as f64)
    }

    /// Span `s` with `t_s <= t < t_{s+1}`; `t = 1` belongs to the last span.
    pub fn span_of(&self, t: f64) -> usize {
        let m = self.spans();
        if t >= 1.0 {
            return m - 1;
        }
        // interior[s - 1] = t_s
        self.interior.partition_point(|&knot| knot <= t)
    }

    /// Values of the `d + 1` basis functions that can be nonzero on span
    /// `span`, evaluated at `t`. Entry `r` belongs to `N^d_{span - d + r}`,
    /// i.e. density position `span + r` (0-based).
    pub fn nonzero_basis(&self, span: usize, t: f64, out: &mut [f64]) {
        let d = self.degree;
        let p = span + d;
        let knots = &self.full;
        let mut left = [0.0f64; MAX_DEGREE + 1];
        let mut right = [0.0f64; MAX_DEGREE + 1];
        out[0] = 1.0;
        for j in 1..=d {
            left[j] = t - knots[p + 1 - j];
            right[j] = knots[p + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                // 0/0 := 0
                let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// `N^d_i(t)` for `i` in `-d..=m-1`.
    pub fn eval(&self, i: i64, t: f64) -> Result<f64, BasisError> {
        let d = self.degree as i64;
        let hi = self.spans() as i64 - 1;
        if i < -d || i > hi {
            return Err(BasisError::IndexOutOfRange {
                index: i,
                lo: -d,
                hi,
            });
        }
        check_unit(t)?;
        let span = self.span_of(t);
        let first = span as i64 - d;
        if i < first || i > span as i64 {
            return Ok(0.0);
        }
        let mut vals = vec![0.0; self.degree + 1];
        self.nonzero_basis(span, t, &mut vals);
        Ok(vals[(i - first) as usize])
    }

    /// All `n` basis values at `t`, ordered `N^d_{-d}, ..., N^d_{m-1}`.
    pub fn eval_all(&self, t: f64) -> Result<Vec<f64>, BasisError> {
        check_unit(t)?;
        let span = self.span_of(t);
        let mut vals = vec![0.0; self.degree + 1];
        self.nonzero_basis(span, t, &mut vals);
        let mut out = vec![0.0; self.basis_count()];
        out[span..=span + self.degree].copy_from_slice(&vals);
        Ok(out)
    }
}

pub(crate) fn check_unit(t: f64) -> Result<(), BasisError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(BasisError::ArgumentOutOfRange(t))
    }
}

/// Normalized densities `phi_k = N^d_{k-d-1} / q_k` with their weights,
/// first moments and CDFs.
#[derive(Debug, Clone)]
pub struct BasisSystem {
    knots: KnotVector,
    rule: GaussLegendre,
    weights: Vec<f64>,
    first_moments: Vec<f64>,
    // cumulative[s][k] = integral of N_k over [0, t_s], s = 0..=m
    cumulative: Vec<Vec<f64>>,
}

impl BasisSystem {
    pub fn new(knots: KnotVector) -> Self {
        let d = knots.degree();
        let m = knots.spans();
        let n = knots.basis_count();
        // exact for t * N(t), a degree d + 1 polynomial on each span
        let rule = GaussLegendre::exact_for_degree(d + 1);
        let mut cumulative = Vec::with_capacity(m + 1);
        cumulative.push(vec![0.0; n]);
        let mut first_moments = vec![0.0; n];
        let mut vals = vec![0.0; d + 1];
        for s in 0..m {
            let (a, b) = (knots.breakpoint(s), knots.breakpoint(s + 1));
            let mut next = cumulative[s].clone();
            let span_mass = span_partial(&knots, &rule, s, a, b, &mut vals);
            for (r, mass) in span_mass.iter().enumerate() {
                next[s + r] += mass;
            }
            for (x, w) in rule.mapped(a, b) {
                knots.nonzero_basis(s, x, &mut vals);
                for (r, v) in vals.iter().enumerate() {
                    first_moments[s + r] += w * x * v;
                }
            }
            cumulative.push(next);
        }
        let weights = cumulative[m].clone();
        Self {
            knots,
            rule,
            weights,
            first_moments,
            cumulative,
        }
    }

    pub fn uniform(degree: usize, spans: usize) -> Result<Self, BasisError> {
        Ok(Self::new(KnotVector::uniform(degree, spans)?))
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn spans(&self) -> usize {
        self.knots.spans()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `q_k = integral of N^d_{k-d-1}` (0-based storage).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `r_k = integral of t N^d_{k-d-1}(t)` (0-based storage).
    pub fn first_moments(&self) -> &[f64] {
        &self.first_moments
    }

    /// Means `r_k / q_k` of the densities.
    pub fn means(&self) -> Vec<f64> {
        self.first_moments
            .iter()
            .zip(&self.weights)
            .map(|(r, q)| r / q)
            .collect()
    }

    fn check_position(&self, k: usize) -> Result<usize, BasisError> {
        if k == 0 || k > self.len() {
            return Err(BasisError::IndexOutOfRange {
                index: k as i64,
                lo: 1,
                hi: self.len() as i64,
            });
        }
        Ok(k - 1)
    }

    /// Support `[t_{k-d-1}, t_k]` of `phi_k`, for 1-based `k`.
    pub fn support(&self, k: usize) -> Result<(f64, f64), BasisError> {
        let pos = self.check_position(k)?;
        let full = self.knots.full();
        Ok((full[pos], full[pos + self.degree() + 1]))
    }

    /// `phi_k(t)` for 1-based `k`.
    pub fn density(&self, k: usize, t: f64) -> Result<f64, BasisError> {
        let pos = self.check_position(k)?;
        let i = pos as i64 - self.degree() as i64;
        Ok(self.knots.eval(i, t)? / self.weights[pos])
    }

    /// All densities at `t`, 0-based.
    pub fn density_all(&self, t: f64) -> Result<Vec<f64>, BasisError> {
        let mut vals = self.knots.eval_all(t)?;
        for (v, q) in vals.iter_mut().zip(&self.weights) {
            *v /= q;
        }
        Ok(vals)
    }

    /// The `d + 1` densities that may be nonzero at `t`, with the 0-based
    /// position of the first one.
    pub fn density_local(&self, t: f64) -> Result<(usize, Vec<f64>), BasisError> {
        check_unit(t)?;
        let span = self.knots.span_of(t);
        let mut vals = vec![0.0; self.degree() + 1];
        self.knots.nonzero_basis(span, t, &mut vals);
        for (r, v) in vals.iter_mut().enumerate() {
            *v /= self.weights[span + r];
        }
        Ok((span, vals))
    }

    /// Unnormalized integrals `integral_0^u N_k` for every position.
    fn raw_cdf_all(&self, u: f64) -> Vec<f64> {
        let s = self.knots.span_of(u);
        let mut out = self.cumulative[s].clone();
        let mut vals = vec![0.0; self.degree() + 1];
        let a = self.knots.breakpoint(s);
        let partial = span_partial(&self.knots, &self.rule, s, a, u, &mut vals);
        for (r, mass) in partial.iter().enumerate() {
            out[s + r] += mass;
        }
        out
    }

    /// `Phi_k(u)` for 1-based `k`.
    pub fn cdf(&self, k: usize, u: f64) -> Result<f64, BasisError> {
        let pos = self.check_position(k)?;
        check_unit(u)?;
        Ok(self.cdf_at_position(pos, u))
    }

    fn cdf_at_position(&self, pos: usize, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let s = self.knots.span_of(u);
        let d = self.degree();
        let raw = if pos < s || pos > s + d {
            self.cumulative[s][pos]
        } else {
            let mut vals = vec![0.0; d + 1];
            let a = self.knots.breakpoint(s);
            self.cumulative[s][pos]
                + span_partial(&self.knots, &self.rule, s, a, u, &mut vals)[pos - s]
        };
        (raw / self.weights[pos]).clamp(0.0, 1.0)
    }

    /// `Phi_1(u), ..., Phi_n(u)`, 0-based.
    pub fn cdf_all(&self, u: f64) -> Result<Vec<f64>, BasisError> {
        check_unit(u)?;
        if u >= 1.0 {
            return Ok(vec![1.0; self.len()]);
        }
        let mut raw = self.raw_cdf_all(u);
        for (v, q) in raw.iter_mut().zip(&self.weights) {
            *v = (*v / q).clamp(0.0, 1.0);
        }
        Ok(raw)
    }

    /// Smallest `u` with `Phi_k(u) >= p`, located by bisection on the
    /// support of `phi_k`.
    pub fn inverse_cdf(&self, k: usize, p: f64) -> Result<f64, BasisError> {
        let pos = self.check_position(k)?;
        check_unit(p)?;
        let (mut lo, mut hi) = self.support(k)?;
        if p <= 0.0 {
            return Ok(lo);
        }
        if p >= 1.0 {
            return Ok(hi);
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf_at_position(pos, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// `integral t^power N_k(t) dt` for every position, exact up to rounding.
    pub fn raw_moments(&self, power: usize) -> Vec<f64> {
        let d = self.degree();
        let rule = GaussLegendre::exact_for_degree(d + power);
        let mut out = vec![0.0; self.len()];
        let mut vals = vec![0.0; d + 1];
        for s in 0..self.spans() {
            let (a, b) = (self.knots.breakpoint(s), self.knots.breakpoint(s + 1));
            for (x, w) in rule.mapped(a, b) {
                self.knots.nonzero_basis(s, x, &mut vals);
                let xp = x.powi(power as i32);
                for (r, v) in vals.iter().enumerate() {
                    out[s + r] += w * xp * v;
                }
            }
        }
        out
    }

    /// `E[T^power]` under each density `phi_k`.
    pub fn density_moments(&self, power: usize) -> Vec<f64> {
        self.raw_moments(power)
            .iter()
            .zip(&self.weights)
            .map(|(mu, q)| mu / q)
            .collect()
    }
}

/// Integrals over `[a, b]` (inside span `s`) of the `d + 1` local bases.
fn span_partial(
    knots: &KnotVector,
    rule: &GaussLegendre,
    s: usize,
    a: f64,
    b: f64,
    vals: &mut [f64],
) -> Vec<f64> {
    let mut acc = vec![0.0; knots.degree() + 1];
    if b <= a {
        return acc;
    }
    for (x, w) in rule.mapped(a, b) {
        knots.nonzero_basis(s, x, vals);
        for (slot, v) in acc.iter_mut().zip(vals.iter()) {
            *slot += w * v;
        }
    }
    acc
}
