//! Posterior predictive checks and frequentist coverage.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DirectedNetwork, GraphStatistic};
use crate::mcmc::{
    align_positions, procrustes_align, run_sampler, sample_inverse_gamma, SamplerConfig,
};
use crate::model::{expit, projection, Hyperparams, LatentState};
use crate::rng::substream;

/// Draws one network from the sampling model: every ordered pair `(i, j)`,
/// `i != j`, carries an edge independently with probability
/// `expit(eta_ij)`.
pub fn simulate_network<R: Rng + ?Sized>(state: &LatentState, rng: &mut R) -> DirectedNetwork {
    let n = state.n();
    let mut edges = Vec::new();
    for i in 0..n {
        let oi = state.capacity()[i];
        let ui = state.position(i);
        for j in (0..n).filter(|&j| j != i) {
            let p = expit(oi + projection(ui, state.position(j)));
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    DirectedNetwork::new(n, edges).expect("simulated edges are valid")
}

/// Draws `(omega2, sigma2)` from their inverse-gamma priors, then
/// `O_i ~ N(0, omega2)` and `u_ik ~ N(0, sigma2)`.
pub fn sample_prior_state<R: Rng + ?Sized>(
    n: usize,
    dim: usize,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<LatentState> {
    hyper.validate()?;
    let omega2 = sample_inverse_gamma(hyper.a_omega, hyper.b_omega, rng);
    let sigma2 = sample_inverse_gamma(hyper.a_sigma, hyper.b_sigma, rng);
    let o_law = Normal::new(0.0, omega2.sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
    let u_law = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
    let capacity = (0..n).map(|_| o_law.sample(rng)).collect();
    let positions = (0..n * dim).map(|_| u_law.sample(rng)).collect();
    LatentState::new(capacity, positions, dim, omega2, sigma2)
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (m - 1) q`, R's type 7). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval at `level`, interpolated as in
/// [`quantile_sorted`].
pub fn credible_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.len() < 2 {
        return Err(Error::invalid("credible interval needs at least 2 draws"));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid(format!(
            "level must lie in (0, 1], got {level}"
        )));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((
        quantile_sorted(&sorted, tail),
        quantile_sorted(&sorted, 1.0 - tail),
    ))
}

/// Two-sided posterior predictive tail probability
/// `min(1, 2 min(P(T >= obs), P(T <= obs)))`.
pub fn tail_probability(replicates: &[f64], observed: f64) -> Option<f64> {
    if replicates.is_empty() {
        return None;
    }
    let m = replicates.len() as f64;
    let above = replicates.iter().filter(|&&t| t >= observed).count() as f64 / m;
    let below = replicates.iter().filter(|&&t| t <= observed).count() as f64 / m;
    Some((2.0 * above.min(below)).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PpcResult {
    pub statistic: GraphStatistic,
    pub observed: Option<f64>,
    /// One entry per draw; `None` where the statistic is undefined on the
    /// replicate.
    pub replicates: Vec<Option<f64>>,
    pub tail_probability: Option<f64>,
    pub missing: usize,
}

/// Simulates one replicate network per draw and compares each statistic
/// with its observed value. Replicate `b` uses substream `b` of `seed`, so
/// results do not depend on thread scheduling.
pub fn posterior_predictive_check(
    draws: &[LatentState],
    observed: &DirectedNetwork,
    statistics: &[GraphStatistic],
    seed: u64,
) -> Result<Vec<PpcResult>> {
    if let Some(d) = draws.iter().find(|d| d.n() != observed.n()) {
        return Err(Error::Dimension(format!(
            "draw has {} vertices, network has {}",
            d.n(),
            observed.n()
        )));
    }
    let per_draw: Vec<Vec<Option<f64>>> = draws
        .par_iter()
        .enumerate()
        .map(|(b, state)| {
            let mut rng = substream(seed, b as u64);
            let replicate = simulate_network(state, &mut rng);
            statistics
                .iter()
                .map(|s| s.evaluate(&replicate).ok())
                .collect()
        })
        .collect();

    Ok(statistics
        .iter()
        .enumerate()
        .map(|(k, &statistic)| {
            let replicates: Vec<Option<f64>> = per_draw.iter().map(|row| row[k]).collect();
            let valid: Vec<f64> = replicates.iter().flatten().copied().collect();
            let observed_value = statistic.evaluate(observed).ok();
            PpcResult {
                statistic,
                observed: observed_value,
                missing: replicates.len() - valid.len(),
                tail_probability: observed_value.and_then(|o| tail_probability(&valid, o)),
                replicates,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coverage {
    /// Fraction of capacities inside their interval.
    pub coverage_capacity: f64,
    /// Fraction of aligned position coordinates inside their interval.
    pub coverage_position: f64,
    pub level: f64,
}

/// Fraction of true parameters covered by percentile intervals computed
/// from `draws`. Positions are compared coordinate-wise after aligning the
/// draws among themselves and the truth to their mean.
pub fn interval_coverage(
    truth: &LatentState,
    draws: &[LatentState],
    level: f64,
) -> Result<Coverage> {
    if draws.len() < 2 {
        return Err(Error::invalid("coverage needs at least 2 draws"));
    }
    let n = truth.n();
    let mut covered_o = 0usize;
    for i in 0..n {
        let trace: Vec<f64> = draws.iter().map(|d| d.capacity()[i]).collect();
        let (lo, hi) = credible_interval(&trace, level)?;
        covered_o += usize::from((lo..=hi).contains(&truth.capacity()[i]));
    }

    let (aligned, mean) = align_positions(draws)?;
    let truth_aligned = procrustes_align(&mean, truth.positions(), truth.dim())?;
    let mut covered_u = 0usize;
    for (k, &t) in truth_aligned.iter().enumerate() {
        let trace: Vec<f64> = aligned.iter().map(|a| a[k]).collect();
        let (lo, hi) = credible_interval(&trace, level)?;
        covered_u += usize::from((lo..=hi).contains(&t));
    }
    Ok(Coverage {
        coverage_capacity: covered_o as f64 / n as f64,
        coverage_position: covered_u as f64 / truth_aligned.len() as f64,
        level,
    })
}

/// Simulates a network from `truth`, fits it and reports interval coverage.
/// The network uses substream 1 of `config.seed`; the sampler uses the seed
/// as given.
pub fn coverage_experiment(
    truth: &LatentState,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    level: f64,
) -> Result<Coverage> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid(format!(
            "level must lie in (0, 1], got {level}"
        )));
    }
    if truth.dim() != config.dim {
        return Err(Error::Dimension(format!(
            "truth has dimension {}, sampler is configured for {}",
            truth.dim(),
            config.dim
        )));
    }
    let mut rng = substream(config.seed, 1);
    let net = simulate_network(truth, &mut rng);
    let fit = run_sampler(&net, hyper, config)?;
    interval_coverage(truth, &fit.draws, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn prior_draws_have_prior_scale() {
        let hyper = Hyperparams::new(3.0, 2.0, 4.0, 3.0).unwrap();
        let mut rng = seeded(12);
        let mut omega = Vec::new();
        let mut ratio = Vec::new();
        for _ in 0..4000 {
            let s = sample_prior_state(20, 2, &hyper, &mut rng).unwrap();
            omega.push(s.omega2);
            let ss = s.positions().iter().map(|u| u * u).sum::<f64>() / 40.0;
            ratio.push(ss / s.sigma2);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // IG(3, 2) has mean 1; u^2 / sigma2 has mean 1
        assert!((mean(&omega) - 1.0).abs() < 0.05);
        assert!((mean(&ratio) - 1.0).abs() < 0.02);
    }

    #[test]
    fn hopeless_state_gives_empty_network() {
        let s = LatentState::new(vec![-1e6; 6], vec![0.0; 12], 2, 1.0, 1.0).unwrap();
        let net = simulate_network(&s, &mut seeded(1));
        assert_eq!(net.edge_count(), 0);
    }

    #[test]
    fn coin_flip_edges_follow_binomial() {
        let s = LatentState::zeros(12, 2);
        let pairs = 12.0 * 11.0;
        let mut rng = seeded(2);
        let counts: Vec<f64> = (0..400)
            .map(|_| simulate_network(&s, &mut rng).edge_count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let sd_of_mean = (pairs * 0.25 / counts.len() as f64).sqrt();
        assert!((mean - pairs / 2.0).abs() < 4.0 * sd_of_mean);
    }

    #[test]
    fn simulation_is_reproducible() {
        let s = LatentState::new(
            vec![-0.5; 8],
            (0..16).map(|k| k as f64 * 0.1 - 0.8).collect(),
            2,
            1.0,
            1.0,
        )
        .unwrap();
        let a = simulate_network(&s, &mut seeded(3));
        let b = simulate_network(&s, &mut seeded(3));
        assert_eq!(a, b);
    }

    #[test]
    fn edge_frequencies_match_probabilities() {
        let s = LatentState::new(
            vec![-1.0, 0.5, 0.0, -0.3],
            vec![1.0, 0.0, -0.5, 0.8, 0.3, 0.3, 0.0, 0.0],
            2,
            1.0,
            1.0,
        )
        .unwrap();
        let reps = 10_000;
        let mut counts = [[0u32; 4]; 4];
        let mut rng = seeded(4);
        for _ in 0..reps {
            let net = simulate_network(&s, &mut rng);
            for (i, j) in net.edges() {
                counts[i][j] += 1;
            }
        }
        for i in 0..4 {
            assert_eq!(counts[i][i], 0);
            for j in (0..4).filter(|&j| j != i) {
                let p = expit(crate::model::edge_logit(&s, i, j).unwrap());
                let freq = counts[i][j] as f64 / reps as f64;
                let se = (p * (1.0 - p) / reps as f64).sqrt();
                assert!((freq - p).abs() < 4.0 * se + 1e-12, "pair ({i},{j})");
            }
        }
    }

    #[test]
    fn interval_of_one_to_hundred() {
        let draws: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = credible_interval(&draws, 0.95).unwrap();
        assert!((lo - 3.475).abs() < 1e-12);
        assert!((hi - 97.525).abs() < 1e-12);
    }

    #[test]
    fn interval_edge_cases() {
        assert_eq!(credible_interval(&[2.0; 10], 0.9).unwrap(), (2.0, 2.0));
        let sym: Vec<f64> = (-50..=50).map(|k| f64::from(k) * 0.37).collect();
        let (lo, hi) = credible_interval(&sym, 0.8).unwrap();
        assert!((lo + hi).abs() < 1e-12);
        assert!(credible_interval(&[1.0], 0.9).is_err());
        assert_eq!(
            credible_interval(&[3.0, 1.0, 2.0], 1.0).unwrap(),
            (1.0, 3.0)
        );
    }

    #[test]
    fn tail_probability_extremes() {
        assert_eq!(tail_probability(&[0.3; 20], 0.3), Some(1.0));
        assert_eq!(tail_probability(&[0.1, 0.2, 0.3], 5.0), Some(0.0));
        assert_eq!(tail_probability(&[0.1, 0.2, 0.3], -5.0), Some(0.0));
        assert_eq!(tail_probability(&[], 1.0), None);
    }

    #[test]
    fn ppc_records_missing_statistics() {
        // all-empty replicates: assortativity undefined everywhere
        let draws = vec![LatentState::new(vec![-1e6; 5], vec![0.0; 10], 2, 1.0, 1.0).unwrap(); 4];
        let observed = DirectedNetwork::new(5, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let out = posterior_predictive_check(
            &draws,
            &observed,
            &[GraphStatistic::Density, GraphStatistic::Assortativity],
            1,
        )
        .unwrap();
        assert_eq!(out[0].missing, 0);
        assert_eq!(out[0].tail_probability, Some(0.0));
        assert_eq!(out[1].missing, 4);
        assert_eq!(out[1].tail_probability, None);
    }

    #[test]
    fn ppc_is_deterministic() {
        let draws: Vec<LatentState> = (0..16)
            .map(|k| {
                LatentState::new(vec![-1.0 + 0.01 * k as f64; 6], vec![0.2; 12], 2, 1.0, 1.0)
                    .unwrap()
            })
            .collect();
        let observed = DirectedNetwork::new(6, [(0, 1), (2, 3)]).unwrap();
        let stats = [GraphStatistic::Density, GraphStatistic::DegreeSd];
        let a = posterior_predictive_check(&draws, &observed, &stats, 9).unwrap();
        let b = posterior_predictive_check(&draws, &observed, &stats, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_range_interval_covers_truth_inside_draws() {
        let truth = LatentState::new(vec![0.0, 0.0, 0.0], vec![0.0; 3], 1, 1.0, 1.0).unwrap();
        let draws = vec![
            LatentState::new(vec![-1.0, -1.0, -1.0], vec![-1.0; 3], 1, 1.0, 1.0).unwrap(),
            LatentState::new(vec![1.0, 1.0, 1.0], vec![1.0; 3], 1, 1.0, 1.0).unwrap(),
        ];
        let c = interval_coverage(&truth, &draws, 1.0).unwrap();
        assert_eq!(c.coverage_capacity, 1.0);
    }
}
