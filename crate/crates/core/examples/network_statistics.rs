//! Descriptive statistics and fast-greedy communities for an edge list.
//!
//! ```text
//! cargo run --example network_statistics -- path/to/edges.csv
//! ```
//!
//! Without an argument a small two-clique network is used.

use std::fs::File;

use influnet::graph::{
    fast_greedy_communities, giant_component, load_edge_list, DirectedNetwork, EdgeListFormat,
    NetworkSummary,
};

const BUILTIN: &str = "source,target
alice,bob
bob,carol
carol,alice
dave,erin
erin,frank
frank,dave
carol,dave
";

fn main() -> influnet::Result<()> {
    let net: DirectedNetwork = match std::env::args().nth(1) {
        Some(path) => load_edge_list(File::open(path)?, EdgeListFormat::default())?,
        None => load_edge_list(BUILTIN.as_bytes(), EdgeListFormat::default())?,
    };
    let giant = giant_component(&net)?;
    println!(
        "{} vertices, {} edges ({} in the giant component)",
        net.n(),
        net.edge_count(),
        giant.n()
    );

    let s = NetworkSummary::compute(&giant);
    let show = |x: Option<f64>| x.map_or("undefined".to_string(), |v| format!("{v:.6}"));
    println!("density            {}", show(s.density));
    println!("transitivity       {:.6}", s.transitivity);
    println!("assortativity      {}", show(s.assortativity));
    println!("average distance   {}", show(s.average_distance));
    println!("average degree     {}", show(s.average_degree));
    println!("degree sd          {}", show(s.degree_sd));

    let communities = fast_greedy_communities(&giant);
    println!(
        "\n{} communities, modularity {:.4}",
        communities.partition.k(),
        communities.modularity
    );
    for c in 0..communities.partition.k() {
        let names: Vec<&str> = communities
            .partition
            .members(c)
            .into_iter()
            .map(|v| giant.labels()[v].as_str())
            .collect();
        println!("  {c}: {}", names.join(" "));
    }
    Ok(())
}
