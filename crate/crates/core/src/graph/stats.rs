use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{fast_greedy_communities, DirectedNetwork};
use crate::error::{Error, Result};

/// Fraction of the `n(n-1)` ordered pairs that carry an edge.
pub fn density(net: &DirectedNetwork) -> Result<f64> {
    let n = net.n();
    if n < 2 {
        return Err(Error::invalid("density needs at least 2 vertices"));
    }
    Ok(net.edge_count() as f64 / (n as f64 * (n as f64 - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegreeStats {
    pub mean: f64,
    /// Population standard deviation (divides by n).
    pub sd: f64,
}

/// Mean and population sd of total degree `in + out`.
pub fn degree_stats(net: &DirectedNetwork) -> Result<DegreeStats> {
    let n = net.n();
    if n == 0 {
        return Err(Error::invalid("degree statistics of an empty network"));
    }
    let mean = 2.0 * net.edge_count() as f64 / n as f64;
    let ss: f64 = (0..n)
        .map(|v| {
            let d = (net.in_degree(v) + net.out_degree(v)) as f64 - mean;
            d * d
        })
        .sum();
    Ok(DegreeStats {
        mean,
        sd: (ss / n as f64).sqrt(),
    })
}

/// Global clustering coefficient `3 * triangles / connected triples` of the
/// undirected projection; 0 when there are no triples.
pub fn transitivity(net: &DirectedNetwork) -> f64 {
    let adj = net.undirected_adjacency();
    let mut triangles = 0u64;
    for (v, nv) in adj.iter().enumerate() {
        for &w in nv.iter().filter(|&&w| w > v) {
            // common neighbours above w, so each triangle counts once
            let nw = &adj[w];
            let (mut a, mut b) = (0, 0);
            while a < nv.len() && b < nw.len() {
                match nv[a].cmp(&nw[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        if nv[a] > w {
                            triangles += 1;
                        }
                        a += 1;
                        b += 1;
                    }
                }
            }
        }
    }
    let triples: u64 = adj
        .iter()
        .map(|nb| {
            let d = nb.len() as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    if triples == 0 {
        0.0
    } else {
        3.0 * triangles as f64 / triples as f64
    }
}

/// Degree assortativity: Pearson correlation of endpoint degrees over the
/// edges of the undirected projection (each edge counted in both
/// orientations).
pub fn assortativity(net: &DirectedNetwork) -> Result<f64> {
    let adj = net.undirected_adjacency();
    let mut m = 0.0;
    let (mut sum_prod, mut sum_mean, mut sum_sq) = (0.0, 0.0, 0.0);
    for (v, nv) in adj.iter().enumerate() {
        let dv = nv.len() as f64;
        for &w in nv.iter().filter(|&&w| w > v) {
            let dw = adj[w].len() as f64;
            m += 1.0;
            sum_prod += dv * dw;
            sum_mean += 0.5 * (dv + dw);
            sum_sq += 0.5 * (dv * dv + dw * dw);
        }
    }
    if m == 0.0 {
        return Err(Error::undefined("assortativity of a graph without edges"));
    }
    let mu = sum_mean / m;
    let var = sum_sq / m - mu * mu;
    if var.abs() <= 1e-12 * (sum_sq / m).max(1.0) {
        return Err(Error::undefined(
            "assortativity with zero degree variance across edge endpoints",
        ));
    }
    Ok((sum_prod / m - mu * mu) / var)
}

/// Mean directed shortest-path length over ordered reachable pairs.
pub fn average_distance(net: &DirectedNetwork) -> Result<f64> {
    let n = net.n();
    let mut total = 0u64;
    let mut pairs = 0u64;
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        dist[s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in net.out_neighbors(v) {
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    total += u64::from(dist[w]);
                    pairs += 1;
                    queue.push_back(w);
                }
            }
        }
    }
    if pairs == 0 {
        return Err(Error::undefined("average distance without reachable pairs"));
    }
    Ok(total as f64 / pairs as f64)
}

/// Statistics that can be monitored by posterior predictive checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphStatistic {
    Density,
    Transitivity,
    Assortativity,
    DegreeSd,
    MeanDegree,
    AverageDistance,
}

impl GraphStatistic {
    pub const ALL: [GraphStatistic; 6] = [
        GraphStatistic::Density,
        GraphStatistic::Transitivity,
        GraphStatistic::Assortativity,
        GraphStatistic::DegreeSd,
        GraphStatistic::MeanDegree,
        GraphStatistic::AverageDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphStatistic::Density => "density",
            GraphStatistic::Transitivity => "transitivity",
            GraphStatistic::Assortativity => "assortativity",
            GraphStatistic::DegreeSd => "degree_sd",
            GraphStatistic::MeanDegree => "mean_degree",
            GraphStatistic::AverageDistance => "average_distance",
        }
    }

    pub fn evaluate(self, net: &DirectedNetwork) -> Result<f64> {
        match self {
            GraphStatistic::Density => density(net),
            GraphStatistic::Transitivity => Ok(transitivity(net)),
            GraphStatistic::Assortativity => assortativity(net),
            GraphStatistic::DegreeSd => degree_stats(net).map(|d| d.sd),
            GraphStatistic::MeanDegree => degree_stats(net).map(|d| d.mean),
            GraphStatistic::AverageDistance => average_distance(net),
        }
    }
}

impl fmt::Display for GraphStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GraphStatistic::ALL
            .into_iter()
            .find(|stat| stat.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown graph statistic '{s}'")))
    }
}

/// The seven descriptive measures reported for an observed network.
/// Undefined measures serialize as `null`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub density: Option<f64>,
    pub transitivity: f64,
    pub assortativity: Option<f64>,
    pub average_distance: Option<f64>,
    pub average_degree: Option<f64>,
    pub degree_sd: Option<f64>,
    pub clustering_modularity: f64,
}

impl NetworkSummary {
    pub fn compute(net: &DirectedNetwork) -> Self {
        let degrees = degree_stats(net).ok();
        Self {
            n_vertices: net.n(),
            n_edges: net.edge_count(),
            density: density(net).ok(),
            transitivity: transitivity(net),
            assortativity: assortativity(net).ok(),
            average_distance: average_distance(net).ok(),
            average_degree: degrees.map(|d| d.mean),
            degree_sd: degrees.map(|d| d.sd),
            clustering_modularity: fast_greedy_communities(net).modularity,
        }
    }
}
