//! Frequentist check of the sampler: draw a truth from the prior, simulate,
//! fit and count how many true values fall inside their 95% intervals.

use influnet::mcmc::SamplerConfig;
use influnet::model::Hyperparams;
use influnet::ppc::{coverage_experiment, sample_prior_state};
use influnet::rng::substream;

fn main() -> influnet::Result<()> {
    let hyper = Hyperparams::default();
    let reps = 3;
    for rep in 0..reps {
        let mut rng = substream(42, rep);
        let truth = sample_prior_state(30, 2, &hyper, &mut rng)?;
        let config = SamplerConfig {
            n_samples: 1000,
            warmup: 1000,
            thin: 1,
            seed: 100 + rep,
            ..SamplerConfig::default()
        };
        let c = coverage_experiment(&truth, &hyper, &config, 0.95)?;
        println!(
            "repetition {rep}: capacities {:.3}, positions {:.3}",
            c.coverage_capacity, c.coverage_position
        );
    }
    Ok(())
}
