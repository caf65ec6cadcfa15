//! Fit the projection model to a simulated network and summarize the
//! posterior: acceptance rates, DIC, effective sample sizes and the
//! influence reparameterization at the posterior mean.

use influnet::mcmc::{
    compute_dic, effective_sample_size, posterior_mean_state, run_sampler, SamplerConfig,
};
use influnet::model::{reparameterize, Hyperparams, LatentState};
use influnet::ppc::simulate_network;
use influnet::rng::seeded;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> influnet::Result<()> {
    let n = 40;
    let mut rng = seeded(1);
    let capacity: Vec<f64> = (0..n).map(|i| if i < 5 { -0.5 } else { -2.5 }).collect();
    let positions: Vec<f64> = (0..2 * n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let truth = LatentState::new(capacity, positions, 2, 1.0, 1.0)?;
    let net = simulate_network(&truth, &mut rng);
    println!(
        "simulated {} vertices and {} edges",
        net.n(),
        net.edge_count()
    );

    let config = SamplerConfig {
        n_samples: 500,
        warmup: 1000,
        thin: 4,
        seed: 7,
        ..SamplerConfig::default()
    };
    let fit = run_sampler(&net, &Hyperparams::default(), &config)?;
    let (acc_o, acc_u) = fit.mean_acceptance();
    println!("acceptance: capacities {acc_o:.3}, positions {acc_u:.3}");

    let dic = compute_dic(&fit.draws, &net)?;
    println!("DIC {:.1} (p_D {:.1})", dic.dic, dic.p_d);
    let omega2: Vec<f64> = fit.draws.iter().map(|d| d.omega2).collect();
    println!(
        "ESS: log-likelihood {:.0}, omega2 {:.0}",
        effective_sample_size(&fit.log_lik_trace)?,
        effective_sample_size(&omega2)?
    );

    let mean = posterior_mean_state(&fit.draws)?;
    let view = reparameterize(&mean);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mean.capacity()[b].total_cmp(&mean.capacity()[a]));
    println!("\nmost influential individuals (posterior mean):");
    for &i in order.iter().take(5) {
        println!(
            "  {i:>2}: O = {:+.2} (truth {:+.2}), I = {:.2}",
            mean.capacity()[i],
            truth.capacity()[i],
            view.susceptibility[i]
        );
    }
    Ok(())
}
