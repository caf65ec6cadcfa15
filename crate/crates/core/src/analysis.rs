//! Post-processing of experiment grids and latent spaces.
//!
//! The grid analysis is a linear model with treatment coding fitted by least
//! squares, with factors entered in a fixed order and tested by sequential
//! (Type I) sums of squares:
//!
//! | factor          | reference level       | indicator columns                         |
//! |-----------------|-----------------------|-------------------------------------------|
//! | capacity        | constant_calibrated   | gamma_shifted                             |
//! | susceptibility  | constant_2            | gamma                                     |
//! | modularity      | low                   | high                                      |
//! | sampling        | random (both regimes) | max_capacity within low, within high      |
//!
//! The sampling factor is nested in modularity, so it carries one indicator
//! per modularity level.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::scenarios::{
    CapacityDist, ExperimentRecord, InitiatorRule, ModularityRegime, SusceptibilityDist,
};

pub const ANOVA_CODING: &str = "treatment coding, sequential sums of squares in the order \
capacity (ref constant_calibrated), susceptibility (ref constant_2), modularity (ref low), \
sampling within modularity (ref random)";

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> Result<f64> {
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(dist.sf(f.max(0.0)))
}

/// A group of design columns tested together.
#[derive(Clone, Debug)]
pub struct TermBlock {
    pub name: String,
    /// One entry per column: the level the indicator marks.
    pub levels: Vec<String>,
    /// Column-major: `columns[c][row]`.
    pub columns: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficient {
    pub level: String,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnovaRow {
    pub factor: String,
    pub df: usize,
    pub sum_sq: f64,
    pub mean_sq: f64,
    /// `None` when the term adds no rank or the residual variance is zero.
    pub f: Option<f64>,
    pub p: Option<f64>,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequentialAnova {
    pub intercept: f64,
    pub rows: Vec<AnovaRow>,
    pub residual_df: usize,
    pub residual_ss: f64,
    pub total_ss: f64,
    pub residuals: Vec<f64>,
}

struct LeastSquares {
    rss: f64,
    rank: usize,
    beta: DVector<f64>,
    residuals: DVector<f64>,
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * 1e-10 * (x.nrows().max(x.ncols()) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let beta = svd
        .solve(y, eps)
        .map_err(|e| Error::Numeric(format!("least squares: {e}")))?;
    let residuals = y - x * &beta;
    Ok(LeastSquares {
        rss: residuals.norm_squared(),
        rank,
        beta,
        residuals,
    })
}

/// Least-squares fit of `y` on an intercept plus `blocks`, with each block's
/// sum of squares taken as the drop in residual sum of squares when it joins
/// the blocks before it.
pub fn sequential_anova(y: &[f64], blocks: &[TermBlock]) -> Result<SequentialAnova> {
    let m = y.len();
    for b in blocks {
        if b.columns.len() != b.levels.len() || b.columns.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension(format!(
                "term {} does not match {m} responses",
                b.name
            )));
        }
    }
    let width = 1 + blocks.iter().map(|b| b.columns.len()).sum::<usize>();
    if m <= width {
        return Err(Error::invalid(format!(
            "{m} observations cannot support {width} coefficients"
        )));
    }
    let yv = DVector::from_column_slice(y);
    let mut cols: Vec<&[f64]> = Vec::new();
    let ones = vec![1.0; m];
    cols.push(&ones);
    let design = |cols: &[&[f64]]| DMatrix::from_fn(m, cols.len(), |r, c| cols[c][r]);

    let mut prev = least_squares(&design(&cols), &yv)?;
    let total_ss = prev.rss;
    let mut stages = Vec::with_capacity(blocks.len());
    for b in blocks {
        cols.extend(b.columns.iter().map(Vec::as_slice));
        let fit = least_squares(&design(&cols), &yv)?;
        let df = fit.rank.saturating_sub(prev.rank);
        stages.push((df, (prev.rss - fit.rss).max(0.0)));
        prev = fit;
    }
    let full = prev;
    let residual_df = m - full.rank;
    let residual_ms = full.rss / residual_df as f64;

    let mut offset = 1;
    let mut rows = Vec::with_capacity(blocks.len());
    for (b, &(df, ss)) in blocks.iter().zip(&stages) {
        let coefficients = b
            .levels
            .iter()
            .enumerate()
            .map(|(c, level)| Coefficient {
                level: level.clone(),
                estimate: full.beta[offset + c],
            })
            .collect();
        offset += b.columns.len();
        let mean_sq = if df > 0 { ss / df as f64 } else { 0.0 };
        let f = (df > 0 && residual_ms > 0.0).then(|| mean_sq / residual_ms);
        let p = match f {
            Some(f) => Some(f_sf(f, df as f64, residual_df as f64)?),
            None => None,
        };
        rows.push(AnovaRow {
            factor: b.name.clone(),
            df,
            sum_sq: ss,
            mean_sq,
            f,
            p,
            coefficients,
        });
    }
    Ok(SequentialAnova {
        intercept: full.beta[0],
        rows,
        residual_df,
        residual_ss: full.rss,
        total_ss,
        residuals: full.residuals.iter().copied().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    LogTotalTime,
    LogReach,
}

impl Response {
    fn value(self, r: &ExperimentRecord) -> f64 {
        match self {
            Response::LogTotalTime => r.total_time,
            Response::LogReach => r.reach,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub jarque_bera_p: Option<f64>,
    pub levene_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnovaReport {
    pub response: Response,
    pub coding: String,
    pub n_used: usize,
    pub n_excluded: usize,
    pub intercept: f64,
    pub factors: Vec<AnovaRow>,
    pub residual_df: usize,
    pub residual_ss: f64,
    pub diagnostics: Diagnostics,
}

fn indicator(records: &[&ExperimentRecord], f: impl Fn(&ExperimentRecord) -> bool) -> Vec<f64> {
    records
        .iter()
        .map(|r| if f(r) { 1.0 } else { 0.0 })
        .collect()
}

/// The grid's design blocks in the order they are tested.
pub fn grid_design(records: &[&ExperimentRecord]) -> Vec<TermBlock> {
    let max_in = |regime: ModularityRegime| {
        move |r: &ExperimentRecord| {
            r.initiator_rule == InitiatorRule::MaxCapacity && r.modularity_regime == regime
        }
    };
    vec![
        TermBlock {
            name: "capacity".into(),
            levels: vec!["gamma_shifted".into()],
            columns: vec![indicator(records, |r| {
                r.o_dist == CapacityDist::GammaShifted
            })],
        },
        TermBlock {
            name: "susceptibility".into(),
            levels: vec!["gamma".into()],
            columns: vec![indicator(records, |r| {
                r.i_dist == SusceptibilityDist::Gamma
            })],
        },
        TermBlock {
            name: "modularity".into(),
            levels: vec!["high".into()],
            columns: vec![indicator(records, |r| {
                r.modularity_regime == ModularityRegime::High
            })],
        },
        TermBlock {
            name: "sampling/modularity".into(),
            levels: vec!["max_capacity|low".into(), "max_capacity|high".into()],
            columns: vec![
                indicator(records, max_in(ModularityRegime::Low)),
                indicator(records, max_in(ModularityRegime::High)),
            ],
        },
    ]
}

/// Nested ANOVA of the log response over the grid factors. Records whose
/// response is not strictly positive are dropped and counted.
pub fn nested_anova(records: &[ExperimentRecord], response: Response) -> Result<AnovaReport> {
    let used: Vec<&ExperimentRecord> = records.iter().filter(|r| response.value(r) > 0.0).collect();
    let n_excluded = records.len() - used.len();
    if n_excluded > 0 {
        log::warn!("{n_excluded} records with non-positive {response:?} excluded from the ANOVA");
    }
    let y: Vec<f64> = used.iter().map(|r| response.value(r).ln()).collect();
    let fit = sequential_anova(&y, &grid_design(&used))?;

    let jarque_bera_p = match jarque_bera(&fit.residuals) {
        Ok(t) => Some(t.p),
        Err(e) => {
            log::warn!("Jarque-Bera skipped: {e}");
            None
        }
    };
    let labels: Vec<usize> = used.iter().map(|r| r.spec_id).collect();
    let levene_p = match levene(&fit.residuals, &labels) {
        Ok(t) => Some(t.p),
        Err(e) => {
            log::warn!("Levene skipped: {e}");
            None
        }
    };
    Ok(AnovaReport {
        response,
        coding: ANOVA_CODING.into(),
        n_used: used.len(),
        n_excluded,
        intercept: fit.intercept,
        factors: fit.rows,
        residual_df: fit.residual_df,
        residual_ss: fit.residual_ss,
        diagnostics: Diagnostics {
            jarque_bera_p,
            levene_p,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
}

/// `JB = (m/6)(S^2 + K^2/4)` from population skewness and excess kurtosis;
/// the chi-square(2) tail is `exp(-JB/2)`.
pub fn jarque_bera(residuals: &[f64]) -> Result<TestResult> {
    let m = residuals.len();
    if m < 8 {
        return Err(Error::invalid(format!(
            "Jarque-Bera needs at least 8 values, got {m}"
        )));
    }
    let mf = m as f64;
    let mean = residuals.iter().sum::<f64>() / mf;
    let moment = |k: i32| residuals.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / mf;
    let m2 = moment(2);
    let scale = residuals.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m2 <= (1e-12 * scale).powi(2) {
        return Err(Error::undefined("Jarque-Bera of constant values"));
    }
    let skew = moment(3) / m2.powf(1.5);
    let kurt = moment(4) / (m2 * m2) - 3.0;
    let statistic = mf / 6.0 * (skew * skew + kurt * kurt / 4.0);
    Ok(TestResult {
        statistic,
        p: (-statistic / 2.0).exp(),
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Brown-Forsythe test: one-way ANOVA on absolute deviations from the group
/// medians.
pub fn levene(values: &[f64], groups: &[usize]) -> Result<TestResult> {
    if values.len() != groups.len() {
        return Err(Error::Dimension(format!(
            "{} values, {} group labels",
            values.len(),
            groups.len()
        )));
    }
    let mut by_group: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (&v, &g) in values.iter().zip(groups) {
        by_group.entry(g).or_default().push(v);
    }
    let k = by_group.len();
    if k < 2 {
        return Err(Error::invalid("Levene needs at least two groups"));
    }
    if let Some((g, members)) = by_group.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::invalid(format!(
            "group {g} has {} member(s)",
            members.len()
        )));
    }
    let deviations: Vec<Vec<f64>> = by_group
        .into_values()
        .map(|mut g| {
            let med = median(&mut g);
            g.iter().map(|x| (x - med).abs()).collect()
        })
        .collect();
    let total_n: usize = deviations.iter().map(Vec::len).sum();
    let grand = deviations.iter().flatten().sum::<f64>() / total_n as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in &deviations {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (mean - grand).powi(2);
        within += g.iter().map(|z| (z - mean).powi(2)).sum::<f64>();
    }
    let (df1, df2) = ((k - 1) as f64, (total_n - k) as f64);
    if within == 0.0 {
        return Ok(if between == 0.0 {
            TestResult {
                statistic: 0.0,
                p: 1.0,
            }
        } else {
            TestResult {
                statistic: f64::INFINITY,
                p: 0.0,
            }
        });
    }
    let statistic = (between / df1) / (within / df2);
    Ok(TestResult {
        statistic,
        p: f_sf(statistic, df1, df2)?,
    })
}

/// Share of total variance along each principal axis of the rows of the
/// row-major `n x p` matrix `u`, largest first.
pub fn pca_variance_share(u: &[f64], n: usize, p: usize) -> Result<Vec<f64>> {
    if u.len() != n * p || p == 0 {
        return Err(Error::Dimension(format!(
            "{} values for a {n}x{p} matrix",
            u.len()
        )));
    }
    if n <= p {
        return Err(Error::invalid(format!(
            "PCA needs more rows than columns, got {n}x{p}"
        )));
    }
    let x = DMatrix::from_row_slice(n, p, u);
    let means = x.row_mean();
    let centered = DMatrix::from_fn(n, p, |r, c| x[(r, c)] - means[c]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut values: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::undefined("all rows coincide"));
    }
    Ok(values.into_iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn normal(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn record(
        spec_id: usize,
        o: CapacityDist,
        i: SusceptibilityDist,
        m: ModularityRegime,
        s: InitiatorRule,
    ) -> ExperimentRecord {
        ExperimentRecord {
            spec_id,
            replicate: 0,
            o_dist: o,
            i_dist: i,
            modularity_regime: m,
            initiator_rule: s,
            total_time: 1.0,
            reach: 0.5,
            realized_modularity: 0.0,
            realized_avg_degree: 10.0,
        }
    }

    pub(crate) fn grid_records() -> Vec<ExperimentRecord> {
        let specs = crate::scenarios::enumerate_specs(&Default::default());
        let mut out = Vec::new();
        for (id, s) in specs.iter().enumerate() {
            for rep in 0..4 {
                let mut r = record(
                    id,
                    s.o_dist,
                    s.i_dist,
                    s.modularity_regime,
                    s.initiator_rule,
                );
                r.replicate = rep;
                out.push(r);
            }
        }
        out
    }

    #[test]
    fn two_group_f_matches_hand_computation() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [3.0, 5.0, 4.0, 6.0];
        let y: Vec<f64> = a.iter().chain(&b).copied().collect();
        let col = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let fit = sequential_anova(
            &y,
            &[TermBlock {
                name: "g".into(),
                levels: vec!["b".into()],
                columns: vec![col],
            }],
        )
        .unwrap();
        // means 2.5 and 4.5, grand 3.5
        let between = 4.0 * 1.0 + 4.0 * 1.0;
        let within = (2.25 + 0.25 + 0.25 + 2.25) + (2.25 + 0.25 + 0.25 + 2.25);
        let f = between / (within / 6.0);
        let row = &fit.rows[0];
        assert!((row.sum_sq - between).abs() < 1e-10);
        assert!((row.f.unwrap() - f).abs() < 1e-10);
        assert!((row.coefficients[0].estimate - 2.0).abs() < 1e-10);
        assert!((fit.intercept - 2.5).abs() < 1e-10);
        assert_eq!(fit.residual_df, 6);
    }

    #[test]
    fn sums_of_squares_add_up_and_shift_invariance() {
        let mut rng = seeded(2);
        let mut recs = grid_records();
        for r in &mut recs {
            r.total_time = rng.random_range(0.5..5.0);
        }
        let table = nested_anova(&recs, Response::LogTotalTime).unwrap();
        let model: f64 = table.factors.iter().map(|r| r.sum_sq).sum();
        let y: Vec<f64> = recs.iter().map(|r| r.total_time.ln()).collect();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        assert!(((model + table.residual_ss) - total).abs() < 1e-8 * total);
        assert_eq!(table.factors.len(), 4);
        assert_eq!(
            table.factors.iter().map(|r| r.df).collect::<Vec<_>>(),
            vec![1, 1, 1, 2]
        );
        assert_eq!(table.residual_df, 48 - 6);

        let mut shifted = recs.clone();
        for r in &mut shifted {
            r.total_time *= std::f64::consts::E.powi(3);
        }
        let t2 = nested_anova(&shifted, Response::LogTotalTime).unwrap();
        for (a, b) in table.factors.iter().zip(&t2.factors) {
            assert!((a.f.unwrap() - b.f.unwrap()).abs() < 1e-8 * a.f.unwrap().max(1.0));
        }
        assert!((t2.intercept - table.intercept - 3.0).abs() < 1e-9);
    }

    #[test]
    fn planted_capacity_effect_is_detected() {
        let mut rng = seeded(4);
        let mut recs = grid_records();
        for r in &mut recs {
            let effect = if r.o_dist == CapacityDist::GammaShifted {
                2.0
            } else {
                0.0
            };
            r.total_time = (effect + 0.1 * rng.sample::<f64, _>(StandardNormal)).exp();
        }
        let t = nested_anova(&recs, Response::LogTotalTime).unwrap();
        assert!(t.factors[0].p.unwrap() < 1e-3);
        assert!((t.factors[0].coefficients[0].estimate - 2.0).abs() < 0.1);
    }

    #[test]
    fn zero_reach_is_excluded() {
        let mut recs = grid_records();
        recs[0].reach = 0.0;
        recs[5].reach = 0.0;
        let t = nested_anova(&recs, Response::LogReach).unwrap();
        assert_eq!(t.n_excluded, 2);
        assert_eq!(t.n_used, 46);
    }

    #[test]
    fn jarque_bera_cases() {
        let mut rng = seeded(6);
        let skewed: Vec<f64> = (0..500)
            .map(|_| Exp::new(1.0).unwrap().sample(&mut rng))
            .collect();
        assert!(jarque_bera(&skewed).unwrap().p < 0.01);
        assert!(matches!(jarque_bera(&[2.0; 10]), Err(Error::Undefined(_))));
        assert!(jarque_bera(&[1.0; 5]).is_err());
        let normal_p = jarque_bera(&normal(10_000, &mut rng)).unwrap().p;
        assert!(normal_p > 0.001);
    }

    #[test]
    fn jarque_bera_hand_value() {
        // symmetric, so S = 0; K from population moments
        let x = [-2.0, -1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 2.0];
        let m2: f64 = x.iter().map(|v: &f64| v * v).sum::<f64>() / 8.0;
        let m4: f64 = x.iter().map(|v: &f64| v.powi(4)).sum::<f64>() / 8.0;
        let k = m4 / (m2 * m2) - 3.0;
        let jb = 8.0 / 6.0 * k * k / 4.0;
        let t = jarque_bera(&x).unwrap();
        assert!((t.statistic - jb).abs() < 1e-12);
        assert!((t.p - (-jb / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn levene_cases() {
        let mut rng = seeded(7);
        let a = normal(50, &mut rng);
        let b: Vec<f64> = normal(50, &mut rng).iter().map(|x| 3.0 * x).collect();
        let values: Vec<f64> = a.iter().chain(&b).copied().collect();
        let groups: Vec<usize> = (0..100).map(|i| i / 50).collect();
        assert!(levene(&values, &groups).unwrap().p < 0.01);

        let same = [1.0, 2.0, 4.0, 1.0, 2.0, 4.0];
        let t = levene(&same, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!(levene(&[1.0, 2.0, 3.0], &[0, 0, 1]).is_err());
        assert!(levene(&[1.0, 2.0], &[0, 0]).is_err());
    }

    #[test]
    fn levene_matches_brute_force_oracle() {
        let values = [1.0, 3.0, 8.0, 2.0, 2.5, 2.0, 9.0, 0.0, 4.0, 5.0];
        let groups = [0, 0, 0, 1, 1, 1, 1, 2, 2, 2];
        // medians: 3, 2.25, 4
        let z = [2.0, 0.0, 5.0, 0.25, 0.25, 0.25, 6.75, 4.0, 0.0, 1.0];
        let g_means = [7.0 / 3.0, 7.5 / 4.0, 5.0 / 3.0];
        let grand = z.iter().sum::<f64>() / 10.0;
        let sizes = [3.0, 4.0, 3.0];
        let between: f64 = (0..3)
            .map(|g| sizes[g] * (g_means[g] - grand).powi(2))
            .sum();
        let within: f64 = z
            .iter()
            .zip(groups)
            .map(|(v, g)| (v - g_means[g]).powi(2))
            .sum();
        let f = (between / 2.0) / (within / 7.0);
        assert!((levene(&values, &groups).unwrap().statistic - f).abs() < 1e-12);
    }

    #[test]
    fn pca_cases() {
        let line: Vec<f64> = (0..20).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
        let s = pca_variance_share(&line, 20, 2).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12);

        let mut rng = seeded(9);
        let cloud = normal(20_000, &mut rng);
        let s = pca_variance_share(&cloud, 10_000, 2).unwrap();
        assert!((s[0] - 0.5).abs() < 0.05 && (s[1] - 0.5).abs() < 0.05);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s[0] >= s[1]);

        assert!(pca_variance_share(&[1.0, 2.0, 3.0, 4.0], 2, 2).is_err());
        assert!(matches!(
            pca_variance_share(&[1.0; 6], 3, 2),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn pca_rotation_invariant() {
        let mut rng = seeded(10);
        let u: Vec<f64> = (0..100)
            .flat_map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                [3.0 * a, 0.5 * b]
            })
            .collect();
        let (c, s) = (0.7_f64.cos(), 0.7_f64.sin());
        let rotated: Vec<f64> = u
            .chunks(2)
            .flat_map(|r| [c * r[0] - s * r[1], s * r[0] + c * r[1]])
            .collect();
        let a = pca_variance_share(&u, 100, 2).unwrap();
        let b = pca_variance_share(&rotated, 100, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
