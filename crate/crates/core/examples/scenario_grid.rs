//! Calibrate, realize and run the twelve-cell scenario grid at reduced size.
//!
//! ```text
//! cargo run --release --example scenario_grid -- 300
//! ```

use influnet::rng::seeded;
use influnet::scenarios::{enumerate_specs, realize_scenario, run_experiment_grid, GridConfig};

fn main() -> influnet::Result<()> {
    let n = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(150);
    let config = GridConfig {
        n,
        seed: 2,
        ..GridConfig::default()
    };

    println!(
        "{:<3} {:<20} {:<12} {:<5} {:<12} {:>6} {:>7} {:>7} {:>7}",
        "id", "capacity", "suscept.", "Q", "initiators", "kappa", "k*", "Q real", "degree"
    );
    for (id, spec) in enumerate_specs(&config).iter().enumerate() {
        let world = realize_scenario(spec, &mut seeded(id as u64))?;
        println!(
            "{id:<3} {:<20} {:<12} {:<5} {:<12} {:>6.2} {:>7.3} {:>7.3} {:>7.2}",
            format!("{:?}", spec.o_dist),
            format!("{:?}", spec.i_dist),
            format!("{:?}", spec.modularity_regime),
            format!("{:?}", spec.initiator_rule),
            world.kappa,
            world.k_star,
            world.modularity,
            world.average_degree,
        );
    }

    let records = run_experiment_grid(&config)?;
    println!("\n{} experiments", records.len());
    for r in records.iter().take(8) {
        println!(
            "  spec {:>2} rep {}: total time {:.3}, reach {:.2}",
            r.spec_id, r.replicate, r.total_time, r.reach
        );
    }
    Ok(())
}
