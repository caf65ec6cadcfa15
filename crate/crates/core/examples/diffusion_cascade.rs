//! Run a four-state cascade on a small-world style network with both
//! simulation engines and print the first few jumps.

use influnet::diffusion::{
    cascade_summaries, run_cascade, DiffusionParams, Engine, SimilarityMatrix, Stance, StoppingRule,
};
use influnet::graph::DirectedNetwork;
use influnet::rng::seeded;
use rand::Rng;

fn main() -> influnet::Result<()> {
    let n = 60;
    let mut rng = seeded(5);
    let mut edges = Vec::new();
    for i in 0..n {
        for step in [1, 2] {
            edges.push((i, (i + step) % n));
            edges.push(((i + step) % n, i));
        }
        let far = rng.random_range(0..n);
        if far != i {
            edges.push((i, far));
        }
    }
    let net = DirectedNetwork::new(n, edges)?;
    let capacity: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.5)).collect();
    let susceptibility: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut tau = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let same_half = (i < n / 2) == (j < n / 2);
            tau[i * n + j] = if i == j {
                1.0
            } else if same_half {
                0.4
            } else {
                -0.4
            };
        }
    }
    let params = DiffusionParams::new(
        capacity,
        susceptibility,
        SimilarityMatrix::new(n, tau)?,
        net,
    )?;

    let mut initial = vec![Stance::Unknown; n];
    initial[0] = Stance::Support;
    initial[n / 2] = Stance::Reject;

    for engine in [Engine::Reference, Engine::Race] {
        let trace = run_cascade(
            &params,
            initial.clone(),
            &StoppingRule::default(),
            engine,
            &mut seeded(9),
        )?;
        let s = cascade_summaries(&trace);
        println!(
            "{engine:?}: {} jumps, total time {:.3}, reach {:.2}, stopped by {:?}",
            s.n_jumps, s.total_time, s.reach, s.stop_reason
        );
        for row in trace.rows.iter().take(5) {
            println!(
                "  t={:7.4}  {:>2} -> {:>2}  {} => {}",
                row.elapsed, row.source, row.target, row.old_state, row.new_state
            );
        }
    }
    Ok(())
}
