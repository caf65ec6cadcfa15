//! Metropolis-within-Gibbs sampling of the projection-model posterior.
//!
//! One sweep updates, in order: `omega2` (conjugate inverse-gamma draw), each
//! capacity `O_i` by a Gaussian random-walk Metropolis step, `sigma2`
//! (conjugate), then each position `u_i` by a spherical random-walk step.
//! Proposal scales are tuned per parameter during warmup only (Robbins–Monro
//! on the log scale) and frozen for the kept draws.
//!
//! The module also hosts the posterior summaries that need to cope with the
//! rotation invariance of the likelihood: Procrustes alignment of position
//! draws and the deviance information criterion computed on aligned means.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedNetwork;
use crate::model::{
    column_log_likelihood_with, log_likelihood, row_log_likelihood_with, Hyperparams, LatentState,
};
use crate::rng::{seeded, SimRng};

/// Data term used by the full conditionals. `Disabled` turns the sampler
/// into a prior simulator, which is how the hierarchy is checked in
/// isolation.
#[derive(Clone, Copy, Debug)]
pub enum Likelihood<'a> {
    Network(&'a DirectedNetwork),
    Disabled,
}

impl<'a> From<&'a DirectedNetwork> for Likelihood<'a> {
    fn from(net: &'a DirectedNetwork) -> Self {
        Likelihood::Network(net)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Number of kept draws `B`.
    pub n_samples: usize,
    pub warmup: usize,
    pub thin: usize,
    /// Initial random-walk sd for every capacity.
    pub proposal_sd_capacity: f64,
    /// Initial random-walk sd (per coordinate) for every position.
    pub proposal_sd_position: f64,
    /// Tune proposal sds during warmup.
    pub adapt: bool,
    pub target_accept_capacity: f64,
    pub target_accept_position: f64,
    pub seed: u64,
    pub dim: usize,
    /// Drop the likelihood from the MH ratios.
    #[serde(default)]
    pub prior_only: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            warmup: 5000,
            thin: 10,
            proposal_sd_capacity: 0.5,
            proposal_sd_position: 0.5,
            adapt: true,
            target_accept_capacity: 0.44,
            target_accept_position: 0.234,
            seed: 0,
            dim: 2,
            prior_only: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        for (name, v) in [
            ("proposal_sd_capacity", self.proposal_sd_capacity),
            ("proposal_sd_position", self.proposal_sd_position),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("target_accept_capacity", self.target_accept_capacity),
            ("target_accept_position", self.target_accept_position),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.warmup + self.n_samples * self.thin
    }
}

/// Draw from an inverse-gamma distribution with density proportional to
/// `x^(-shape-1) exp(-scale/x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(shape, 1.0 / scale).expect("positive inverse-gamma parameters");
    1.0 / gamma.sample(rng)
}

/// Shape and scale of the `omega2` full conditional.
pub fn omega2_conditional(state: &LatentState, hyper: &Hyperparams) -> (f64, f64) {
    let ss: f64 = state.capacity().iter().map(|o| o * o).sum();
    (
        hyper.a_omega + state.n() as f64 / 2.0,
        hyper.b_omega + ss / 2.0,
    )
}

/// Shape and scale of the `sigma2` full conditional.
pub fn sigma2_conditional(state: &LatentState, hyper: &Hyperparams) -> (f64, f64) {
    let ss: f64 = state.positions().iter().map(|u| u * u).sum();
    (
        hyper.a_sigma + (state.n() * state.dim()) as f64 / 2.0,
        hyper.b_sigma + ss / 2.0,
    )
}

pub fn gibbs_update_omega2<R: Rng + ?Sized>(
    state: &mut LatentState,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let (shape, scale) = omega2_conditional(state, hyper);
    state.omega2 = sample_inverse_gamma(shape, scale, rng);
}

pub fn gibbs_update_sigma2<R: Rng + ?Sized>(
    state: &mut LatentState,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let (shape, scale) = sigma2_conditional(state, hyper);
    state.sigma2 = sample_inverse_gamma(shape, scale, rng);
}

/// Unnormalized log full conditional of `O_i` at `candidate`.
pub fn log_full_conditional_capacity(
    i: usize,
    candidate: f64,
    state: &LatentState,
    lik: Likelihood<'_>,
) -> f64 {
    let prior = -0.5 * candidate * candidate / state.omega2;
    match lik {
        Likelihood::Network(net) => {
            prior + row_log_likelihood_with(net, state, i, candidate, state.position(i))
        }
        Likelihood::Disabled => prior,
    }
}

/// Unnormalized log full conditional of `u_i` at `candidate`: the prior plus
/// every likelihood term that involves `u_i`, i.e. row `i` and column `i`.
pub fn log_full_conditional_position(
    i: usize,
    candidate: &[f64],
    state: &LatentState,
    lik: Likelihood<'_>,
) -> f64 {
    let prior = -0.5 * candidate.iter().map(|x| x * x).sum::<f64>() / state.sigma2;
    match lik {
        Likelihood::Network(net) => {
            prior
                + row_log_likelihood_with(net, state, i, state.capacity()[i], candidate)
                + column_log_likelihood_with(net, state, i, candidate)
        }
        Likelihood::Disabled => prior,
    }
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    // ln U < 0 for U in [0, 1), so a zero log-ratio always accepts
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Random-walk Metropolis step for `O_i`. Returns whether the proposal was
/// accepted.
pub fn mh_update_capacity<R: Rng + ?Sized>(
    i: usize,
    state: &mut LatentState,
    lik: Likelihood<'_>,
    proposal_sd: f64,
    rng: &mut R,
) -> bool {
    let current = state.capacity()[i];
    let step: f64 = rng.sample(StandardNormal);
    let proposal = current + proposal_sd * step;
    let log_ratio = log_full_conditional_capacity(i, proposal, state, lik)
        - log_full_conditional_capacity(i, current, state, lik);
    let accepted = accept(log_ratio, rng);
    if accepted {
        state.capacity_mut()[i] = proposal;
    }
    accepted
}

/// Spherical random-walk Metropolis step for `u_i`.
pub fn mh_update_position<R: Rng + ?Sized>(
    i: usize,
    state: &mut LatentState,
    lik: Likelihood<'_>,
    proposal_sd: f64,
    rng: &mut R,
) -> bool {
    let current = state.position(i).to_vec();
    let proposal: Vec<f64> = current
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            x + proposal_sd * z
        })
        .collect();
    let log_ratio = log_full_conditional_position(i, &proposal, state, lik)
        - log_full_conditional_position(i, &current, state, lik);
    let accepted = accept(log_ratio, rng);
    if accepted {
        state.position_mut(i).copy_from_slice(&proposal);
    }
    accepted
}

/// A single Markov chain: current state, per-parameter proposal scales and
/// the random stream.
pub struct Chain {
    pub state: LatentState,
    hyper: Hyperparams,
    pub sd_capacity: Vec<f64>,
    pub sd_position: Vec<f64>,
    targets: (f64, f64),
    adapting: bool,
    adapt_step: usize,
    accepted_capacity: Vec<u64>,
    accepted_position: Vec<u64>,
    counted: u64,
    rng: SimRng,
}

impl Chain {
    pub fn new(
        state: LatentState,
        hyper: Hyperparams,
        config: &SamplerConfig,
        rng: SimRng,
    ) -> Self {
        let n = state.n();
        Self {
            state,
            hyper,
            sd_capacity: vec![config.proposal_sd_capacity; n],
            sd_position: vec![config.proposal_sd_position; n],
            targets: (config.target_accept_capacity, config.target_accept_position),
            adapting: false,
            adapt_step: 0,
            accepted_capacity: vec![0; n],
            accepted_position: vec![0; n],
            counted: 0,
            rng,
        }
    }

    /// The default starting point: capacities at 0, positions drawn from
    /// `N(0, 0.1 I)`, both variances at 1.
    pub fn initial_state(n: usize, dim: usize, rng: &mut SimRng) -> LatentState {
        let sd = 0.1f64.sqrt();
        let positions = (0..n * dim)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        LatentState::new(vec![0.0; n], positions, dim, 1.0, 1.0).expect("valid initial state")
    }

    pub fn set_adapting(&mut self, on: bool) {
        self.adapting = on;
    }

    pub fn reset_acceptance(&mut self) {
        self.accepted_capacity.iter_mut().for_each(|a| *a = 0);
        self.accepted_position.iter_mut().for_each(|a| *a = 0);
        self.counted = 0;
    }

    pub fn acceptance_capacity(&self) -> Vec<f64> {
        rates(&self.accepted_capacity, self.counted)
    }

    pub fn acceptance_position(&self) -> Vec<f64> {
        rates(&self.accepted_position, self.counted)
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// One full sweep in the fixed order omega2, capacities, sigma2,
    /// positions (ascending vertex index inside each block).
    pub fn sweep(&mut self, lik: Likelihood<'_>) {
        let n = self.state.n();
        let gain = if self.adapting {
            self.adapt_step += 1;
            (self.adapt_step as f64).powf(-0.6)
        } else {
            0.0
        };

        gibbs_update_omega2(&mut self.state, &self.hyper, &mut self.rng);
        for i in 0..n {
            let ok =
                mh_update_capacity(i, &mut self.state, lik, self.sd_capacity[i], &mut self.rng);
            self.accepted_capacity[i] += u64::from(ok);
            if self.adapting {
                let delta = f64::from(u8::from(ok)) - self.targets.0;
                self.sd_capacity[i] = (self.sd_capacity[i].ln() + gain * delta)
                    .exp()
                    .clamp(1e-4, 1e3);
            }
        }
        gibbs_update_sigma2(&mut self.state, &self.hyper, &mut self.rng);
        for i in 0..n {
            let ok =
                mh_update_position(i, &mut self.state, lik, self.sd_position[i], &mut self.rng);
            self.accepted_position[i] += u64::from(ok);
            if self.adapting {
                let delta = f64::from(u8::from(ok)) - self.targets.1;
                self.sd_position[i] = (self.sd_position[i].ln() + gain * delta)
                    .exp()
                    .clamp(1e-4, 1e3);
            }
        }
        self.counted += 1;
    }
}

fn rates(counts: &[u64], total: u64) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PosteriorSamples {
    pub draws: Vec<LatentState>,
    /// Log-likelihood of the observed network at each kept draw.
    pub log_lik_trace: Vec<f64>,
    /// Post-warmup acceptance rate per capacity.
    pub acceptance_capacity: Vec<f64>,
    /// Post-warmup acceptance rate per position.
    pub acceptance_position: Vec<f64>,
    pub proposal_sd_capacity: Vec<f64>,
    pub proposal_sd_position: Vec<f64>,
}

impl PosteriorSamples {
    pub fn mean_acceptance(&self) -> (f64, f64) {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        (
            mean(&self.acceptance_capacity),
            mean(&self.acceptance_position),
        )
    }
}

/// Runs one chain: `warmup` adaptive sweeps, then `n_samples * thin` sweeps
/// keeping every `thin`-th state.
pub fn run_sampler(
    net: &DirectedNetwork,
    hyper: &Hyperparams,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    hyper.validate()?;
    let mut rng = seeded(config.seed);
    let init = Chain::initial_state(net.n(), config.dim, &mut rng);
    run_sampler_from(net, hyper, config, init, rng)
}

/// Same as [`run_sampler`] with an explicit starting state and stream.
pub fn run_sampler_from(
    net: &DirectedNetwork,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    init: LatentState,
    rng: SimRng,
) -> Result<PosteriorSamples> {
    config.validate()?;
    hyper.validate()?;
    if init.n() != net.n() || init.dim() != config.dim {
        return Err(Error::Dimension(format!(
            "initial state is {}x{}, expected {}x{}",
            init.n(),
            init.dim(),
            net.n(),
            config.dim
        )));
    }
    let lik = if config.prior_only {
        Likelihood::Disabled
    } else {
        Likelihood::Network(net)
    };
    let mut chain = Chain::new(init, *hyper, config, rng);

    chain.set_adapting(config.adapt);
    for _ in 0..config.warmup {
        chain.sweep(lik);
    }
    chain.set_adapting(false);
    chain.reset_acceptance();

    let mut draws = Vec::with_capacity(config.n_samples);
    let mut log_lik_trace = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        for _ in 0..config.thin {
            chain.sweep(lik);
        }
        let ll = log_likelihood(net, &chain.state)?;
        if !ll.is_finite() {
            return Err(Error::Numeric(format!("non-finite log-likelihood {ll}")));
        }
        log_lik_trace.push(ll);
        draws.push(chain.state.clone());
    }
    Ok(PosteriorSamples {
        draws,
        log_lik_trace,
        acceptance_capacity: chain.acceptance_capacity(),
        acceptance_position: chain.acceptance_position(),
        proposal_sd_capacity: chain.sd_capacity.clone(),
        proposal_sd_position: chain.sd_position.clone(),
    })
}

/// Orthogonal Procrustes: rotates/reflects `target` (row-major `n x dim`)
/// to best match `reference` in Frobenius norm. No translation or scaling.
/// An all-zero target (or a zero cross-product) is returned unchanged.
pub fn procrustes_align(reference: &[f64], target: &[f64], dim: usize) -> Result<Vec<f64>> {
    if reference.len() != target.len() || dim == 0 || !target.len().is_multiple_of(dim) {
        return Err(Error::Dimension(format!(
            "cannot align {} entries to {} entries with dim {dim}",
            target.len(),
            reference.len()
        )));
    }
    let n = target.len() / dim;
    let t = DMatrix::from_row_slice(n, dim, target);
    let r = DMatrix::from_row_slice(n, dim, reference);
    let cross = t.transpose() * &r;
    if cross.iter().all(|&x| x == 0.0) {
        return Ok(target.to_vec());
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numeric("SVD did not converge".into())),
    };
    let rotation = u * v_t;
    let aligned = t * rotation;
    Ok((0..n)
        .flat_map(|i| (0..dim).map(move |k| (i, k)))
        .map(|(i, k)| aligned[(i, k)])
        .collect())
}

/// Aligns every draw's positions to the running mean of the previously
/// aligned draws. Returns the aligned position matrices and their mean.
pub fn align_positions(draws: &[LatentState]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let Some(first) = draws.first() else {
        return Err(Error::invalid("no draws to align"));
    };
    let dim = first.dim();
    let mut mean = first.positions().to_vec();
    let mut aligned = vec![mean.clone()];
    for (b, draw) in draws.iter().enumerate().skip(1) {
        let a = procrustes_align(&mean, draw.positions(), dim)?;
        let w = 1.0 / (b as f64 + 1.0);
        for (m, x) in mean.iter_mut().zip(&a) {
            *m += w * (x - *m);
        }
        aligned.push(a);
    }
    Ok((aligned, mean))
}

/// Posterior mean state: capacities and variances averaged directly,
/// positions averaged after alignment.
pub fn posterior_mean_state(draws: &[LatentState]) -> Result<LatentState> {
    let (_, mean_positions) = align_positions(draws)?;
    let b = draws.len() as f64;
    let n = draws[0].n();
    let mut capacity = vec![0.0; n];
    for d in draws {
        for (c, x) in capacity.iter_mut().zip(d.capacity()) {
            *c += x / b;
        }
    }
    let omega2 = draws.iter().map(|d| d.omega2).sum::<f64>() / b;
    let sigma2 = draws.iter().map(|d| d.sigma2).sum::<f64>() / b;
    LatentState::new(capacity, mean_positions, draws[0].dim(), omega2, sigma2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dic {
    pub dic: f64,
    pub p_d: f64,
    /// Posterior mean of the deviance `-2 log p(Y | theta)`.
    pub mean_deviance: f64,
    /// Deviance at the (aligned) posterior mean.
    pub deviance_at_mean: f64,
}

/// Deviance information criterion `DIC = mean deviance + p_D` with
/// `p_D = mean deviance - deviance at the posterior mean`.
pub fn compute_dic(draws: &[LatentState], net: &DirectedNetwork) -> Result<Dic> {
    if draws.len() < 2 {
        return Err(Error::invalid("DIC needs at least 2 draws"));
    }
    let deviances: Vec<f64> = draws
        .par_iter()
        .map(|d| log_likelihood(net, d).map(|ll| -2.0 * ll))
        .collect::<Result<_>>()?;
    let mean_deviance = deviances.iter().sum::<f64>() / deviances.len() as f64;
    let mean_state = posterior_mean_state(draws)?;
    let deviance_at_mean = -2.0 * log_likelihood(net, &mean_state)?;
    let p_d = mean_deviance - deviance_at_mean;
    Ok(Dic {
        dic: mean_deviance + p_d,
        p_d,
        mean_deviance,
        deviance_at_mean,
    })
}

/// Effective sample size by Geyer's initial positive sequence: pairs of
/// consecutive autocorrelations are summed until a pair sum turns
/// non-positive.
pub fn effective_sample_size(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < 10 {
        return Err(Error::invalid(
            "effective sample size needs at least 10 values",
        ));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let var = autocov(0);
    let scale = trace.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if var <= (1e-12 * scale).powi(2) {
        return Err(Error::undefined(
            "effective sample size of a constant trace",
        ));
    }
    let mut sum_pairs = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / var;
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        m += 1;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(f64::MIN_POSITIVE);
    Ok(n as f64 / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn toy_state(n: usize, dim: usize, seed: u64) -> LatentState {
        let mut rng = seeded(seed);
        let caps = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
        let pos = (0..n * dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        LatentState::new(caps, pos, dim, 1.3, 0.7).unwrap()
    }

    fn toy_net() -> DirectedNetwork {
        DirectedNetwork::new(5, [(0, 1), (0, 2), (1, 2), (3, 0), (4, 3), (2, 4)]).unwrap()
    }

    fn log_joint(net: &DirectedNetwork, s: &LatentState) -> f64 {
        let prior_o: f64 = s.capacity().iter().map(|o| -0.5 * o * o / s.omega2).sum();
        let prior_u: f64 = s.positions().iter().map(|u| -0.5 * u * u / s.sigma2).sum();
        prior_o + prior_u + log_likelihood(net, s).unwrap()
    }

    #[test]
    fn omega2_draws_match_inverse_gamma_mean() {
        let state = LatentState::zeros(4, 2);
        let hyper = Hyperparams::default();
        assert_eq!(omega2_conditional(&state, &hyper), (3.0, 1.0));
        let mut rng = seeded(11);
        let mut s = state.clone();
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                gibbs_update_omega2(&mut s, &hyper, &mut rng);
                s.omega2
            })
            .collect();
        assert!(draws.iter().all(|&x| x > 0.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn conditional_shapes_at_case_study_size() {
        let state = LatentState::zeros(634, 2);
        let hyper = Hyperparams::default();
        assert_eq!(omega2_conditional(&state, &hyper).0, 318.0);
        assert_eq!(sigma2_conditional(&state, &hyper).0, 635.0);
    }

    #[test]
    fn sigma2_draws_match_inverse_gamma_mean() {
        let state = LatentState::zeros(3, 2);
        let hyper = Hyperparams::new(1.0, 1.0, 2.0, 1.0).unwrap();
        let (shape, scale) = sigma2_conditional(&state, &hyper);
        assert_eq!((shape, scale), (5.0, 1.0));
        let mut rng = seeded(12);
        let mut s = state.clone();
        let mut sum = 0.0;
        for _ in 0..100_000 {
            gibbs_update_sigma2(&mut s, &hyper, &mut rng);
            assert!(s.sigma2 > 0.0);
            sum += s.sigma2;
        }
        let expected = scale / (shape - 1.0);
        assert!((sum / 1e5 - expected).abs() < 0.02 * expected);
    }

    #[test]
    fn capacity_conditional_differences_match_joint() {
        let net = toy_net();
        let s = toy_state(5, 2, 1);
        for i in 0..5 {
            let mut moved = s.clone();
            moved.capacity_mut()[i] += 0.37;
            let lik = Likelihood::Network(&net);
            let lhs = log_full_conditional_capacity(i, moved.capacity()[i], &s, lik)
                - log_full_conditional_capacity(i, s.capacity()[i], &s, lik);
            let rhs = log_joint(&net, &moved) - log_joint(&net, &s);
            assert!((lhs - rhs).abs() < 1e-10, "vertex {i}");
        }
    }

    #[test]
    fn capacity_conditional_prior_term_vanishes_at_origin() {
        let s = toy_state(5, 2, 2);
        assert_eq!(
            log_full_conditional_capacity(0, 0.0, &s, Likelihood::Disabled),
            0.0
        );
    }

    #[test]
    fn capacity_conditional_decreasing_in_square_without_edges() {
        let net = DirectedNetwork::empty(4);
        let s = LatentState::zeros(4, 2);
        let lik = Likelihood::Network(&net);
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let o = k as f64 * 0.1;
            let v = log_full_conditional_capacity(1, o, &s, lik);
            assert!(v < last);
            last = v;
        }
        // no edges: the row term keeps pushing O down, but with |O| fixed the
        // positive side must be worse
        for k in 1..20 {
            let o = k as f64 * 0.25;
            assert!(
                log_full_conditional_capacity(1, o, &s, lik)
                    < log_full_conditional_capacity(1, -o, &s, lik)
            );
        }
    }

    #[test]
    fn position_conditional_differences_match_joint() {
        let net = toy_net();
        let s = toy_state(5, 2, 3);
        for i in 0..5 {
            let mut moved = s.clone();
            moved.position_mut(i)[0] -= 0.4;
            moved.position_mut(i)[1] += 0.25;
            let lik = Likelihood::Network(&net);
            let lhs = log_full_conditional_position(i, moved.position(i), &s, lik)
                - log_full_conditional_position(i, s.position(i), &s, lik);
            let rhs = log_joint(&net, &moved) - log_joint(&net, &s);
            assert!((lhs - rhs).abs() < 1e-10, "vertex {i}");
            let same = log_full_conditional_position(i, s.position(i), &s, lik)
                - log_full_conditional_position(i, s.position(i), &s, lik);
            assert_eq!(same, 0.0);
        }
    }

    #[test]
    fn position_conditional_two_vertex_expansion() {
        // y_01 = 1, y_10 = 0; p = 1
        let net = DirectedNetwork::new(2, [(0, 1)]).unwrap();
        let s = LatentState::new(vec![-0.3, 0.4], vec![0.8, -1.1], 1, 1.0, 2.0).unwrap();
        let cand = [0.5];
        // row: eta_01 = O_0 + sign(c) u_1; column: eta_10 = O_1 + sign(u_1) c
        let eta01: f64 = -0.3 + 1.0 * -1.1;
        let eta10: f64 = 0.4 - 0.5;
        let expected = -0.5 * 0.25 / 2.0
            + (1.0 / (1.0 + (-eta01).exp())).ln()
            + (1.0 - 1.0 / (1.0 + (-eta10).exp())).ln();
        let got = log_full_conditional_position(0, &cand, &s, Likelihood::Network(&net));
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn identity_proposal_always_accepted() {
        let net = toy_net();
        let mut s = toy_state(5, 2, 4);
        let mut rng = seeded(5);
        for _ in 0..1000 {
            assert!(mh_update_capacity(
                2,
                &mut s,
                Likelihood::Network(&net),
                0.0,
                &mut rng
            ));
            assert!(mh_update_position(
                2,
                &mut s,
                Likelihood::Network(&net),
                0.0,
                &mut rng
            ));
        }
    }

    #[test]
    fn flat_target_accepts_nearly_everything() {
        let mut s = LatentState::new(vec![0.0; 3], vec![0.0; 6], 2, 1e12, 1e12).unwrap();
        let mut rng = seeded(6);
        let mut acc_o = 0;
        let mut acc_u = 0;
        for _ in 0..10_000 {
            acc_o += mh_update_capacity(0, &mut s, Likelihood::Disabled, 1.0, &mut rng) as u32;
            acc_u += mh_update_position(0, &mut s, Likelihood::Disabled, 1.0, &mut rng) as u32;
        }
        assert!(acc_o as f64 / 1e4 > 0.99);
        assert!(acc_u as f64 / 1e4 > 0.99);
    }

    /// Chain for a single coordinate, with effective-sample-size based
    /// Monte Carlo error.
    fn chain_mean_and_se(trace: &[f64]) -> (f64, f64) {
        let n = trace.len() as f64;
        let mean = trace.iter().sum::<f64>() / n;
        let var = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let ess = effective_sample_size(trace).unwrap();
        (mean, (var / ess).sqrt())
    }

    #[test]
    fn capacity_chain_matches_quadrature() {
        // target: N(0, omega2) * expit(O + c) * (1 - expit(O + d)) ... only row 0
        let net = DirectedNetwork::new(2, [(0, 1)]).unwrap();
        let mut s =
            LatentState::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.5, 0.5], 2, 2.0, 1.0).unwrap();
        let c = crate::model::projection(s.position(0), s.position(1));
        let log_target = |o: f64| -0.5 * o * o / 2.0 + crate::model::log_expit(o + c);
        let (mut z, mut m1) = (0.0, 0.0);
        let h = 1e-3;
        let mut o = -15.0;
        while o <= 15.0 {
            let w = log_target(o).exp();
            z += w;
            m1 += o * w;
            o += h;
        }
        let truth = m1 / z;

        let mut rng = seeded(21);
        let lik = Likelihood::Network(&net);
        let trace: Vec<f64> = (0..200_000)
            .map(|_| {
                mh_update_capacity(0, &mut s, lik, 1.5, &mut rng);
                s.capacity()[0]
            })
            .collect();
        let (mean, se) = chain_mean_and_se(&trace[1000..]);
        assert!(
            (mean - truth).abs() < 3.0 * se,
            "mean {mean} truth {truth} se {se}"
        );
    }

    #[test]
    fn position_chain_matches_quadrature() {
        let net = DirectedNetwork::new(2, [(0, 1)]).unwrap();
        let mut s =
            LatentState::new(vec![0.3, -0.2], vec![0.1, 0.1, 1.2, -0.4], 2, 1.0, 1.5).unwrap();
        let fixed = s.clone();
        let log_target =
            |u: [f64; 2]| log_full_conditional_position(0, &u, &fixed, Likelihood::Network(&net));
        let h = 0.01;
        let (mut z, mut mx, mut my) = (0.0, 0.0, 0.0);
        let steps = (12.0 / h) as i32;
        for a in 0..=steps {
            for b in 0..=steps {
                let u = [-6.0 + a as f64 * h, -6.0 + b as f64 * h];
                let w = log_target(u).exp();
                z += w;
                mx += u[0] * w;
                my += u[1] * w;
            }
        }
        let truth = [mx / z, my / z];

        let mut rng = seeded(22);
        let lik = Likelihood::Network(&net);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..200_000 {
            mh_update_position(0, &mut s, lik, 1.2, &mut rng);
            xs.push(s.position(0)[0]);
            ys.push(s.position(0)[1]);
        }
        for (trace, t) in [(&xs, truth[0]), (&ys, truth[1])] {
            let (mean, se) = chain_mean_and_se(&trace[1000..]);
            assert!((mean - t).abs() < 3.0 * se, "mean {mean} truth {t} se {se}");
        }
    }

    fn small_config(seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_samples: 50,
            warmup: 50,
            thin: 2,
            seed,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn single_draw_bookkeeping() {
        let net = DirectedNetwork::new(3, [(0, 1), (1, 2)]).unwrap();
        let config = SamplerConfig {
            n_samples: 1,
            warmup: 0,
            thin: 1,
            ..SamplerConfig::default()
        };
        let out = run_sampler(&net, &Hyperparams::default(), &config).unwrap();
        assert_eq!(out.draws.len(), 1);
        assert_eq!(out.log_lik_trace.len(), 1);
    }

    #[test]
    fn same_seed_same_draws() {
        let net = toy_net();
        let a = run_sampler(&net, &Hyperparams::default(), &small_config(9)).unwrap();
        let b = run_sampler(&net, &Hyperparams::default(), &small_config(9)).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.log_lik_trace, b.log_lik_trace);
        let c = run_sampler(&net, &Hyperparams::default(), &small_config(10)).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn traces_are_finite_and_rates_bounded() {
        let net = toy_net();
        let out = run_sampler(&net, &Hyperparams::default(), &small_config(3)).unwrap();
        assert!(out.log_lik_trace.iter().all(|x| x.is_finite()));
        for r in out
            .acceptance_capacity
            .iter()
            .chain(&out.acceptance_position)
        {
            assert!((0.0..=1.0).contains(r));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let net = toy_net();
        let hyper = Hyperparams::default();
        let mut config = small_config(0);
        config.thin = 0;
        assert!(run_sampler(&net, &hyper, &config).is_err());
        let mut config = small_config(0);
        config.target_accept_capacity = 1.0;
        assert!(run_sampler(&net, &hyper, &config).is_err());
        let bad = Hyperparams {
            a_omega: 0.0,
            ..Hyperparams::default()
        };
        assert!(run_sampler(&net, &bad, &small_config(0)).is_err());
    }

    #[test]
    fn adaptation_reaches_target_band() {
        let truth = toy_state(30, 2, 8);
        let mut rng = seeded(80);
        let net = crate::ppc::simulate_network(&truth, &mut rng);
        let config = SamplerConfig {
            n_samples: 500,
            warmup: 3000,
            thin: 1,
            proposal_sd_capacity: 5.0,
            proposal_sd_position: 0.01,
            seed: 81,
            ..SamplerConfig::default()
        };
        let out = run_sampler(
            &net,
            &Hyperparams::new(3.0, 2.0, 3.0, 2.0).unwrap(),
            &config,
        )
        .unwrap();
        let (acc_o, acc_u) = out.mean_acceptance();
        assert!((acc_o - 0.44).abs() < 0.08, "capacity acceptance {acc_o}");
        assert!((acc_u - 0.234).abs() < 0.08, "position acceptance {acc_u}");
    }

    #[test]
    fn prior_only_run_reproduces_hierarchy() {
        // omega2 ~ IG(3, 2): E = 1, so Var(O_i) = E[omega2] = 1
        let hyper = Hyperparams::new(3.0, 2.0, 3.0, 2.0).unwrap();
        let net = DirectedNetwork::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let config = SamplerConfig {
            n_samples: 20_000,
            warmup: 500,
            thin: 2,
            proposal_sd_capacity: 1.5,
            proposal_sd_position: 1.5,
            seed: 33,
            prior_only: true,
            ..SamplerConfig::default()
        };
        let out = run_sampler(&net, &hyper, &config).unwrap();
        let o: Vec<f64> = out.draws.iter().map(|d| d.capacity()[0]).collect();
        let u: Vec<f64> = out.draws.iter().map(|d| d.position(1)[0]).collect();
        let w: Vec<f64> = out.draws.iter().map(|d| d.omega2).collect();
        let (mo, so) = chain_mean_and_se(&o);
        assert!(mo.abs() < 4.0 * so, "mean O {mo} se {so}");
        let var_o: Vec<f64> = o.iter().map(|x| x * x).collect();
        let (vo, svo) = chain_mean_and_se(&var_o);
        assert!((vo - 1.0).abs() < 4.0 * svo + 0.02, "E O^2 {vo} se {svo}");
        let var_u: Vec<f64> = u.iter().map(|x| x * x).collect();
        let (vu, svu) = chain_mean_and_se(&var_u);
        assert!((vu - 1.0).abs() < 4.0 * svu + 0.02, "E u^2 {vu} se {svu}");
        let (mw, sw) = chain_mean_and_se(&w);
        assert!((mw - 1.0).abs() < 4.0 * sw + 0.02, "E omega2 {mw} se {sw}");
    }

    fn rotate2(m: &[f64], angle: f64) -> Vec<f64> {
        let (s, c) = angle.sin_cos();
        m.chunks(2)
            .flat_map(|r| [c * r[0] - s * r[1], s * r[0] + c * r[1]])
            .collect()
    }

    fn frob(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let reference = vec![1.0, 0.2, -0.5, 1.3, 0.7, -0.9, 2.0, 0.1];
        let rotated = rotate2(&reference, std::f64::consts::FRAC_PI_2);
        let back = procrustes_align(&reference, &rotated, 2).unwrap();
        assert!(frob(&back, &reference) < 1e-8);
        let same = procrustes_align(&reference, &reference, 2).unwrap();
        assert!(frob(&same, &reference) < 1e-12);
        let zero = vec![0.0; 8];
        assert_eq!(procrustes_align(&reference, &zero, 2).unwrap(), zero);
        assert!(procrustes_align(&reference, &zero[..6], 2).is_err());
    }

    #[test]
    fn procrustes_matches_angle_grid() {
        let mut rng = seeded(17);
        for _ in 0..10 {
            let a: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let aligned = procrustes_align(&a, &b, 2).unwrap();
            let got = frob(&aligned, &a);
            assert!(got <= frob(&b, &a) + 1e-12);
            // grid over rotations and reflections
            let mut best = f64::INFINITY;
            for k in 0..20_000 {
                let t = k as f64 / 20_000.0 * std::f64::consts::TAU;
                best = best.min(frob(&rotate2(&b, t), &a));
                let reflected: Vec<f64> = b.chunks(2).flat_map(|r| [r[0], -r[1]]).collect();
                best = best.min(frob(&rotate2(&reflected, t), &a));
            }
            assert!(got <= best + 1e-9);
            assert!(best - got < 1e-5, "grid {best} svd {got}");
        }
    }

    #[test]
    fn dic_degenerate_chain() {
        let net = toy_net();
        let s = toy_state(5, 2, 40);
        let dic = compute_dic(&[s.clone(), s.clone(), s.clone()], &net).unwrap();
        let d = -2.0 * log_likelihood(&net, &s).unwrap();
        assert!(dic.p_d.abs() < 1e-9);
        assert!((dic.dic - d).abs() < 1e-9);
        assert!(compute_dic(&[s], &net).is_err());
    }

    #[test]
    fn dic_two_draw_hand_computation() {
        // p = 1 with same-sign positions: alignment is the identity
        let net = DirectedNetwork::new(3, [(0, 1), (2, 0)]).unwrap();
        let a = LatentState::new(vec![-1.0, 0.5, 0.0], vec![1.0, 2.0, 0.5], 1, 1.0, 1.0).unwrap();
        let b = LatentState::new(vec![-2.0, 1.5, 1.0], vec![3.0, 1.0, 1.5], 1, 1.0, 1.0).unwrap();
        let mean =
            LatentState::new(vec![-1.5, 1.0, 0.5], vec![2.0, 1.5, 1.0], 1, 1.0, 1.0).unwrap();
        let da = -2.0 * log_likelihood(&net, &a).unwrap();
        let db = -2.0 * log_likelihood(&net, &b).unwrap();
        let dbar = 0.5 * (da + db);
        let dhat = -2.0 * log_likelihood(&net, &mean).unwrap();
        let dic = compute_dic(&[a, b], &net).unwrap();
        assert!((dic.mean_deviance - dbar).abs() < 1e-12);
        assert!((dic.deviance_at_mean - dhat).abs() < 1e-9);
        assert!((dic.p_d - (dbar - dhat)).abs() < 1e-9);
        assert!((dic.dic - (2.0 * dbar - dhat)).abs() < 1e-9);
    }

    #[test]
    fn ess_of_white_noise() {
        let mut rng = seeded(50);
        let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let ess = effective_sample_size(&x).unwrap();
        assert!((ess - 1e4).abs() < 1e3, "ess {ess}");
    }

    #[test]
    fn ess_of_ar1() {
        let mut rng = seeded(51);
        let phi = 0.9;
        let n = 100_000;
        let mut x = Vec::with_capacity(n);
        let mut prev = 0.0;
        for _ in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            prev = phi * prev + e;
            x.push(prev);
        }
        let ess = effective_sample_size(&x).unwrap();
        let theory = n as f64 * (1.0 - phi) / (1.0 + phi);
        assert!(
            (ess - theory).abs() < 0.2 * theory,
            "ess {ess} theory {theory}"
        );
    }

    #[test]
    fn ess_of_constant_trace_is_undefined() {
        assert!(matches!(
            effective_sample_size(&[2.5; 50]),
            Err(Error::Undefined(_))
        ));
        assert!(effective_sample_size(&[1.0, 2.0]).is_err());
    }
}
