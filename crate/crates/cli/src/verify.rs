use anyhow::Result;
use bspline_copula::moments::{to_f64, unit_interval_vectors, verify_identities, IdentityReport};
use bspline_copula::total_positivity::{
    bernstein_minor_oracle, decreasing_abscissae, moment_matrix_tp_check, rank_degeneracy_check,
    survival_tp_check, tp_order_check, DegeneracyReport, KernelLabel, MomentMatrixReport, TpReport,
};
use bspline_copula::{BasisSystem, Copula, MaxCorrCopula};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TpSuite {
    pub suite: &'static str,
    pub seed: u64,
    pub reports: Vec<TpReport>,
    pub degeneracy: Vec<DegeneracyReport>,
    pub moment_matrices: Vec<MomentMatrixReport>,
    pub pass: bool,
}

pub struct TpOptions {
    pub degrees: Vec<usize>,
    pub spans: Vec<usize>,
    pub max_order: usize,
    pub trials: usize,
    pub seed: u64,
}

/// TP_r scans of C*, c*, the survival function of C* and min(u, v) for every
/// configuration, plus the rank-degeneracy check at `r = n + 1` and the
/// moment matrices.
pub fn tp_suite(opts: &TpOptions) -> Result<TpSuite> {
    let mut reports = Vec::new();
    let mut degeneracy = Vec::new();
    let mut moment_matrices = Vec::new();
    for &d in &opts.degrees {
        for &m in &opts.spans {
            let cop = MaxCorrCopula::uniform(d, m)?;
            let n = cop.basis().len();
            for r in 1..=n.min(opts.max_order) {
                let label = |name: &str| KernelLabel::with_basis(name, cop.basis());
                reports.push(tp_order_check(
                    label("C*"),
                    |u, v| cop.cdf(u, v).unwrap_or(f64::NAN),
                    r,
                    opts.trials,
                    opts.seed,
                )?);
                reports.push(tp_order_check(
                    label("c*"),
                    |u, v| cop.density(u, v).unwrap_or(f64::NAN),
                    r,
                    opts.trials,
                    opts.seed,
                )?);
                reports.push(survival_tp_check(
                    label("survival"),
                    &cop,
                    r,
                    opts.trials,
                    opts.seed,
                )?);
            }
            degeneracy.push(rank_degeneracy_check(
                KernelLabel::with_basis("C*", cop.basis()),
                |u, v| cop.cdf(u, v).unwrap_or(f64::NAN),
                n + 1,
                opts.trials,
                opts.seed,
            )?);
            for r in 1..=opts.max_order.min(4) {
                moment_matrices.push(moment_matrix_tp_check(&cop, r)?);
            }
        }
    }
    for r in 1..=opts.max_order.max(5) {
        reports.push(tp_order_check(
            KernelLabel::new("min"),
            |u, v| u.min(v),
            r,
            opts.trials,
            opts.seed,
        )?);
    }
    let pass = reports.iter().all(|r| r.pass)
        && degeneracy.iter().all(|r| r.pass)
        && moment_matrices.iter().all(|r| r.pass);
    Ok(TpSuite {
        suite: "tp",
        seed: opts.seed,
        reports,
        degeneracy,
        moment_matrices,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FhSeries {
    pub d: usize,
    pub m: Vec<usize>,
    pub distance: Vec<f64>,
    pub one_minus_corr: Vec<f64>,
    /// `(1 - corr) / ((d + 1) / m^2)`.
    pub ratio: Vec<f64>,
    pub strictly_decreasing: bool,
    pub ratio_within_factor_two: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FhSuite {
    pub suite: &'static str,
    pub grid: usize,
    pub series: Vec<FhSeries>,
    pub pass: bool,
}

/// Grid distance of C* to min(u, v) along increasing `m`; the ratio check
/// applies to `m >= 8`.
pub fn fh_suite(degrees: &[usize], spans: &[usize], grid: usize) -> Result<FhSuite> {
    let mut series = Vec::new();
    for &d in degrees {
        let mut distance = Vec::new();
        let mut one_minus = Vec::new();
        let mut ratio = Vec::new();
        for &m in spans {
            let cop = MaxCorrCopula::uniform(d, m)?;
            distance.push(cop.fh_distance(grid)?);
            let gap = 1.0 - cop.correlation();
            one_minus.push(gap);
            ratio.push(gap / ((d + 1) as f64 / (m * m) as f64));
        }
        let strictly_decreasing = distance.windows(2).all(|w| w[1] < w[0]);
        let ratio_within_factor_two = spans
            .iter()
            .zip(&ratio)
            .filter(|(&m, _)| m >= 8)
            .all(|(_, &q)| (0.5..=2.0).contains(&q));
        series.push(FhSeries {
            d,
            m: spans.to_vec(),
            distance,
            one_minus_corr: one_minus,
            ratio,
            strictly_decreasing,
            ratio_within_factor_two,
        });
    }
    let pass = series
        .iter()
        .all(|s| s.strictly_decreasing && s.ratio_within_factor_two);
    Ok(FhSuite {
        suite: "fh-convergence",
        grid,
        series,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MinorAgreement {
    pub instances: usize,
    pub max_relative_gap: f64,
    pub min_direct: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentitySuite {
    pub suite: &'static str,
    pub exact: IdentityReport,
    pub bernstein_minor: MinorAgreement,
    pub pass: bool,
}

/// Random single-span minors, `n <= 8`, `r <= 4`; agreement within `1e-8`
/// relative and both sides nonnegative.
pub fn bernstein_minor_agreement(instances: usize, seed: u64) -> Result<MinorAgreement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap: f64 = 0.0;
    let mut min_direct = f64::INFINITY;
    let mut nonnegative = true;
    for _ in 0..instances {
        let n = rng.gen_range(1..=8);
        let r = rng.gen_range(1..=n.min(4));
        let mut k: Vec<usize> = rand::seq::index::sample(&mut rng, n, r)
            .into_iter()
            .map(|x| x + 1)
            .collect();
        k.sort_unstable_by(|a, b| b.cmp(a));
        let t = decreasing_abscissae(&mut rng, r);
        let pair = bernstein_minor_oracle(n, &k, &t)?;
        max_gap = max_gap.max(pair.relative_gap());
        min_direct = min_direct.min(pair.direct);
        let floor = -1e-12 * pair.direct.abs().max(pair.via_schur.abs()).max(1.0);
        nonnegative &= pair.direct >= floor && pair.via_schur >= floor;
    }
    Ok(MinorAgreement {
        instances,
        max_relative_gap: max_gap,
        min_direct,
        pass: max_gap <= 1e-8 && nonnegative,
    })
}

pub fn identity_suite(n_max: usize, instances: usize, seed: u64) -> Result<IdentitySuite> {
    let exact = verify_identities(n_max);
    let bernstein_minor = bernstein_minor_agreement(instances, seed)?;
    let pass = exact.pass && bernstein_minor.pass;
    Ok(IdentitySuite {
        suite: "identities",
        exact,
        bernstein_minor,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VectorComparison {
    pub d: usize,
    pub m: usize,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VectorSuite {
    pub suite: &'static str,
    pub tolerance: f64,
    pub cases: Vec<VectorComparison>,
    pub pass: bool,
}

/// Exact rational `(q, r)` vectors against per-span quadrature, `d <= d_max`,
/// `d <= m <= m_max`.
pub fn moment_vector_suite(d_max: usize, m_max: usize) -> Result<VectorSuite> {
    let tolerance = 1e-12;
    let mut cases = Vec::new();
    for d in 0..=d_max {
        for m in d.max(1)..=m_max {
            let (q, r) = unit_interval_vectors(d, m)?;
            let bs = BasisSystem::uniform(d, m)?;
            let mut err: f64 = 0.0;
            for k in 0..bs.len() {
                err = err.max((to_f64(&q[k]) - bs.weights()[k]).abs());
                err = err.max((to_f64(&r[k]) - bs.first_moments()[k]).abs());
            }
            cases.push(VectorComparison {
                d,
                m,
                max_abs_error: err,
            });
        }
    }
    let pass = cases.iter().all(|c| c.max_abs_error <= tolerance);
    Ok(VectorSuite {
        suite: "moment-vectors",
        tolerance,
        cases,
        pass,
    })
}
