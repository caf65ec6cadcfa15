//! Posterior predictive check: compare six network statistics of the data
//! with replicates simulated from posterior draws.

use influnet::graph::GraphStatistic;
use influnet::mcmc::{run_sampler, SamplerConfig};
use influnet::model::Hyperparams;
use influnet::ppc::{posterior_predictive_check, sample_prior_state, simulate_network};
use influnet::rng::seeded;

fn main() -> influnet::Result<()> {
    let mut rng = seeded(3);
    let truth = sample_prior_state(50, 2, &Hyperparams::new(3.0, 2.0, 3.0, 2.0)?, &mut rng)?;
    let net = simulate_network(&truth, &mut rng);

    let config = SamplerConfig {
        n_samples: 300,
        warmup: 1000,
        thin: 3,
        seed: 11,
        ..SamplerConfig::default()
    };
    let fit = run_sampler(&net, &Hyperparams::default(), &config)?;
    let results = posterior_predictive_check(&fit.draws, &net, &GraphStatistic::ALL, 12)?;

    println!("{:<18} {:>10} {:>10}", "statistic", "observed", "P(T>=obs)");
    for r in &results {
        let obs = r.observed.map_or("-".into(), |v| format!("{v:.4}"));
        let tail = r.tail_probability.map_or("-".into(), |v| format!("{v:.3}"));
        println!("{:<18} {obs:>10} {tail:>10}", r.statistic.name());
    }
    Ok(())
}
