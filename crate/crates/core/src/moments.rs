//! Exact moments of B-splines with a single clamped boundary, through
//! Stirling numbers of the second kind.
//!
//! On `[0, inf)` with knots `t_i = max(i, 0)` the `h`-th moment
//! `gamma^d_i(h) = integral t^h N^d_i(t) dt` is available two ways: a
//! four-case recurrence in the degree, and a closed form in Stirling numbers.
//! Both are implemented here over exact rationals so they can check each
//! other without tolerances.
//!
//! The Stirling numbers are also tied to the generalized Bernoulli
//! polynomials by `S(n + k, k) = C(n + k, k) B_n^{(-k)}`; that side is not
//! computed.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MomentError {
    #[error("exact unit-interval moments need m >= d (got d = {degree}, m = {spans})")]
    TooFewSpans { degree: usize, spans: usize },
    #[error("position {k} outside 1..={n}")]
    PositionOutOfRange { k: usize, n: usize },
    #[error("number of spans must be at least 1")]
    NoSpans,
}

/// Moment `gamma^d_i(h)` of `N^d_i` on the half line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MomentQuery {
    pub degree: usize,
    pub index: i64,
    pub power: usize,
}

impl MomentQuery {
    pub fn new(degree: usize, index: i64, power: usize) -> Self {
        Self {
            degree,
            index,
            power,
        }
    }
}

fn int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, j| acc * j)
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * (n - j) / (j + 1);
    }
    acc
}

/// Growable triangle of Stirling numbers of the second kind, filled by
/// `S(n + 1, k) = k S(n, k) + S(n, k - 1)`.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    rows: Vec<Vec<BigInt>>,
}

impl Default for StirlingTable {
    fn default() -> Self {
        Self::new()
    }
}

impl StirlingTable {
    pub fn new() -> Self {
        Self {
            rows: vec![vec![BigInt::one()]],
        }
    }

    fn grow_to(&mut self, n: usize) {
        while self.rows.len() <= n {
            let prev = self.rows.last().expect("table is never empty");
            let len = prev.len() + 1;
            let mut row = vec![BigInt::zero(); len];
            for (k, slot) in row.iter_mut().enumerate().skip(1) {
                let stay = prev.get(k).map(|s| s * k).unwrap_or_default();
                *slot = stay + &prev[k - 1];
            }
            self.rows.push(row);
        }
    }

    pub fn get(&mut self, n: usize, k: usize) -> BigInt {
        if k > n {
            return BigInt::zero();
        }
        self.grow_to(n);
        self.rows[n][k].clone()
    }

    /// Row `n`: `S(n, 0), ..., S(n, n)`.
    pub fn row(&mut self, n: usize) -> &[BigInt] {
        self.grow_to(n);
        &self.rows[n]
    }
}

/// `S(n, k)` by the triangular recurrence.
pub fn stirling2(n: usize, k: usize) -> BigInt {
    StirlingTable::new().get(n, k)
}

/// `S(n, k) = (1/k!) sum_j (-1)^j C(k, j) (k - j)^n`, with `0^0 = 1`.
pub fn stirling2_explicit(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::zero();
    for j in 0..=k {
        let base = BigInt::from(k - j);
        let term = binomial(k, j) * num_traits::pow(base, n);
        if j.is_odd() {
            acc -= term;
        } else {
            acc += term;
        }
    }
    acc / factorial(k)
}

fn pow_i64(base: i64, exp: usize) -> BigInt {
    // 0^0 = 1
    num_traits::pow(BigInt::from(base), exp)
}

/// Memoized evaluator for the degree recurrence of `gamma^d_i(h)`.
#[derive(Debug, Default, Clone)]
pub struct MomentRecurrence {
    memo: HashMap<MomentQuery, Rational>,
}

impl MomentRecurrence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn gamma(&mut self, q: MomentQuery) -> Rational {
        if let Some(v) = self.memo.get(&q) {
            return v.clone();
        }
        let value = self.compute(q);
        self.memo.insert(q, value.clone());
        value
    }

    fn compute(&mut self, q: MomentQuery) -> Rational {
        let MomentQuery {
            degree: d,
            index: i,
            power: h,
        } = q;
        let di = d as i64;
        if i < -di {
            return Rational::zero();
        }
        if d == 0 {
            // gamma^0_i(h) = ((i+1)^{h+1} - i^{h+1}) / (h+1), zero for i < 0
            if i < 0 {
                return Rational::zero();
            }
            let num = pow_i64(i + 1, h + 1) - pow_i64(i, h + 1);
            return Rational::new(num, BigInt::from(h + 1));
        }
        let lower = |index: i64, power: usize| MomentQuery::new(d - 1, index, power);
        if i == -di {
            return self.gamma(lower(i + 1, h)) - self.gamma(lower(i + 1, h + 1));
        }
        let right = int(i + di + 1) * self.gamma(lower(i + 1, h)) - self.gamma(lower(i + 1, h + 1));
        if i < 0 {
            self.gamma(lower(i, h + 1)) / int(i + di) + right / int(i + di + 1)
        } else {
            (self.gamma(lower(i, h + 1)) - int(i) * self.gamma(lower(i, h)) + right) / int(di)
        }
    }
}

/// `gamma^d_i(h)` from the degree recurrence.
pub fn gamma_moment_recurrence(q: MomentQuery) -> Rational {
    MomentRecurrence::new().gamma(q)
}

/// `gamma^d_i(h)` from the Stirling-number closed form, reusing `table`.
pub fn gamma_moment_closed_with(table: &mut StirlingTable, q: MomentQuery) -> Rational {
    let MomentQuery {
        degree: d,
        index: i,
        power: h,
    } = q;
    let di = d as i64;
    if i < -di {
        return Rational::zero();
    }
    if i >= 0 {
        let mut acc = Rational::zero();
        for l in 0..=h {
            let top = h + d + 1 - l;
            let term = Rational::new(
                pow_i64(i, l) * binomial(h, l) * table.get(top, d + 1),
                binomial(top, d + 1),
            );
            acc += term;
        }
        acc
    } else {
        let shift = (i + di + 1) as usize;
        Rational::new(
            BigInt::from(shift) * table.get(h + shift, shift),
            BigInt::from(d + 1) * binomial(h + d + 1, d + 1),
        )
    }
}

/// `gamma^d_i(h)` from the Stirling-number closed form.
pub fn gamma_moment_closed(q: MomentQuery) -> Rational {
    gamma_moment_closed_with(&mut StirlingTable::new(), q)
}

/// Exact `(q_k, r_k)` for the uniform-knot system on `[0, 1]` with `m >= d`,
/// `k` 1-based.
///
/// Left and interior positions come from the half-line moments rescaled by
/// `1/m` and `1/m^2`; the right boundary follows by reflection.
pub fn unit_interval_moments(
    degree: usize,
    spans: usize,
    k: usize,
) -> Result<(Rational, Rational), MomentError> {
    if spans == 0 {
        return Err(MomentError::NoSpans);
    }
    if spans < degree {
        return Err(MomentError::TooFewSpans { degree, spans });
    }
    let n = spans + degree;
    if k == 0 || k > n {
        return Err(MomentError::PositionOutOfRange { k, n });
    }
    let m = int(spans as i64);
    let index = k as i64 - degree as i64 - 1;
    let mut rec = MomentRecurrence::new();
    if k <= spans {
        let q = rec.gamma(MomentQuery::new(degree, index, 0)) / &m;
        let r = rec.gamma(MomentQuery::new(degree, index, 1)) / (&m * &m);
        Ok((q, r))
    } else {
        let (q, r) = unit_interval_moments(degree, spans, n + 1 - k)?;
        let r = &q - r;
        Ok((q, r))
    }
}

/// Full `(q, r)` vectors for the uniform-knot system, `m >= d`.
pub fn unit_interval_vectors(
    degree: usize,
    spans: usize,
) -> Result<(Vec<Rational>, Vec<Rational>), MomentError> {
    let n = spans + degree;
    let mut qs = Vec::with_capacity(n);
    let mut rs = Vec::with_capacity(n);
    for k in 1..=n {
        let (q, r) = unit_interval_moments(degree, spans, k)?;
        qs.push(q);
        rs.push(r);
    }
    Ok((qs, rs))
}

/// Outcome of one family of exact identity checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub instances: usize,
    pub pass: bool,
    #[serde(rename = "counterexample", skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub n_max: usize,
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

/// Checks `S(n+1, k+1) = sum_{j=k}^{n} C(n, j) S(j, k)` for `k <= n <= n_max`
/// and the shift identity `gamma^d_{i+1}(h) = sum_j C(h, j) gamma^d_i(j)`
/// for `i >= 0` and `d, h, i <= min(n_max, 8)`.
pub fn verify_identities(n_max: usize) -> IdentityReport {
    let mut table = StirlingTable::new();
    let mut instances = 0;
    let mut counterexample = None;
    'outer: for n in 0..=n_max {
        for k in 0..=n {
            instances += 1;
            let lhs = table.get(n + 1, k + 1);
            let rhs: BigInt = (k..=n).map(|j| binomial(n, j) * table.get(j, k)).sum();
            if lhs != rhs {
                counterexample = Some(format!("n={n} k={k}: {lhs} != {rhs}"));
                break 'outer;
            }
        }
    }
    let stirling = IdentityCheck {
        name: "stirling-binomial-sum".to_string(),
        instances,
        pass: counterexample.is_none(),
        counterexample,
    };

    let cap = n_max.min(8);
    let mut rec = MomentRecurrence::new();
    let mut instances = 0;
    let mut counterexample = None;
    'shift: for d in 0..=cap {
        for i in 0..=cap as i64 {
            for h in 0..=cap {
                instances += 1;
                let lhs = rec.gamma(MomentQuery::new(d, i + 1, h));
                let rhs: Rational = (0..=h)
                    .map(|j| int(binomial(h, j)) * rec.gamma(MomentQuery::new(d, i, j)))
                    .fold(Rational::zero(), |a, b| a + b);
                if lhs != rhs {
                    counterexample = Some(format!("d={d} i={i} h={h}: {lhs} != {rhs}"));
                    break 'shift;
                }
            }
        }
    }
    let shift = IdentityCheck {
        name: "moment-shift".to_string(),
        instances,
        pass: counterexample.is_none(),
        counterexample,
    };
    let pass = stirling.pass && shift.pass;
    IdentityReport {
        n_max,
        checks: vec![stirling, shift],
        pass,
    }
}

/// Renders a rational as `p/q`, or `p` when integral.
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(p: i64, q: i64) -> Rational {
        Rational::new(BigInt::from(p), BigInt::from(q))
    }

    /// Counts set partitions of {0..n} into exactly k blocks by brute force
    /// over restricted growth strings.
    fn count_partitions(n: usize, k: usize) -> u64 {
        fn go(pos: usize, n: usize, k: usize, used: usize) -> u64 {
            if pos == n {
                return (used == k) as u64;
            }
            let mut total = 0;
            for b in 0..=used.min(k.saturating_sub(1)) {
                let next = if b == used { used + 1 } else { used };
                if next <= k {
                    total += go(pos + 1, n, k, next);
                }
            }
            total
        }
        if n == 0 {
            return (k == 0) as u64;
        }
        go(0, n, k, 0)
    }

    #[test]
    fn stirling_small_values() {
        assert_eq!(stirling2(4, 2), BigInt::from(7));
        assert_eq!(stirling2(0, 0), BigInt::one());
        assert_eq!(stirling2(5, 0), BigInt::zero());
        assert_eq!(stirling2(2, 3), BigInt::zero());
        for n in 1..=30 {
            assert_eq!(stirling2(n, n), BigInt::one());
            assert_eq!(stirling2(n, 1), BigInt::one());
            assert_eq!(stirling2(n, n - 1), BigInt::from(n * (n - 1) / 2));
        }
    }

    #[test]
    fn stirling_matches_enumeration() {
        for n in 0..=9 {
            for k in 0..=n {
                assert_eq!(
                    stirling2(n, k),
                    BigInt::from(count_partitions(n, k)),
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn recurrence_and_explicit_sum_agree() {
        let mut table = StirlingTable::new();
        for n in 0..=40 {
            for k in 0..=n + 1 {
                assert_eq!(table.get(n, k), stirling2_explicit(n, k), "n={n} k={k}");
            }
        }
        // past u64
        assert!(stirling2(40, 20) > BigInt::from(u64::MAX));
    }

    #[test]
    fn boundary_moment_values() {
        assert_eq!(
            gamma_moment_recurrence(MomentQuery::new(0, 2, 1)),
            ratio(5, 2)
        );
        assert_eq!(
            gamma_moment_recurrence(MomentQuery::new(2, -2, 1)),
            ratio(1, 12)
        );
        assert_eq!(
            gamma_moment_closed(MomentQuery::new(2, -2, 1)),
            ratio(1, 12)
        );
        assert_eq!(gamma_moment_closed(MomentQuery::new(1, 0, 1)), ratio(1, 1));
        assert_eq!(
            gamma_moment_recurrence(MomentQuery::new(3, -4, 2)),
            Rational::zero()
        );
        assert_eq!(
            gamma_moment_closed(MomentQuery::new(3, -4, 2)),
            Rational::zero()
        );
    }

    #[test]
    fn recurrence_equals_closed_form() {
        let mut rec = MomentRecurrence::new();
        let mut table = StirlingTable::new();
        for d in 0..=6 {
            for i in -(d as i64)..=6 {
                for h in 0..=6 {
                    let q = MomentQuery::new(d, i, h);
                    assert_eq!(
                        rec.gamma(q),
                        gamma_moment_closed_with(&mut table, q),
                        "{q:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn unit_interval_linear_case() {
        let (q, r) = unit_interval_moments(1, 3, 1).unwrap();
        assert_eq!(q, ratio(1, 6));
        assert_eq!(r, ratio(1, 54));
        let (qs, _) = unit_interval_vectors(1, 3).unwrap();
        assert_eq!(qs, vec![ratio(1, 6), ratio(1, 3), ratio(1, 3), ratio(1, 6)]);
        assert_eq!(
            unit_interval_moments(3, 2, 1),
            Err(MomentError::TooFewSpans {
                degree: 3,
                spans: 2
            })
        );
        assert!(unit_interval_moments(1, 3, 5).is_err());
    }

    #[test]
    fn identities_hold() {
        let report = verify_identities(20);
        assert!(report.pass, "{report:?}");
        assert!(verify_identities(1).pass);
        assert!(verify_identities(0).pass);
    }

    #[test]
    fn formats_fractions() {
        assert_eq!(format_rational(&ratio(2, 24)), "1/12");
        assert_eq!(format_rational(&ratio(6, 3)), "2");
        assert_eq!(format_rational(&ratio(-1, 2)), "-1/2");
        assert!((to_f64(&ratio(1, 12)) - 1.0 / 12.0).abs() < 1e-17);
    }
}
