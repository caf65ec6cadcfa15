use std::collections::BTreeMap;

use serde::Serialize;

use super::DirectedNetwork;
use crate::error::{Error, Result};

/// Assignment of every vertex to one of `k` communities labelled `0..k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Relabels arbitrary ids to `0..k` in order of first appearance.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        let labels = raw
            .iter()
            .map(|&c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: map.len(),
        }
    }

    pub fn single(n: usize) -> Self {
        Self::from_labels(&vec![0; n])
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn members(&self, community: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&v| self.labels[v] == community)
            .collect()
    }
}

/// Newman modularity `Q = sum_c (e_c/m - (d_c/2m)^2)` on the undirected
/// projection. A graph without edges has `Q = 0`.
pub fn modularity(net: &DirectedNetwork, partition: &Partition) -> Result<f64> {
    if partition.len() != net.n() {
        return Err(Error::Dimension(format!(
            "partition covers {} vertices, network has {}",
            partition.len(),
            net.n()
        )));
    }
    let adj = net.undirected_adjacency();
    let mut inside = vec![0.0; partition.k()];
    let mut degree = vec![0.0; partition.k()];
    let mut m = 0.0;
    for (v, nb) in adj.iter().enumerate() {
        let cv = partition.label(v);
        degree[cv] += nb.len() as f64;
        for &w in nb.iter().filter(|&&w| w > v) {
            m += 1.0;
            if partition.label(w) == cv {
                inside[cv] += 1.0;
            }
        }
    }
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(inside
        .iter()
        .zip(&degree)
        .map(|(e, d)| e / m - (d / (2.0 * m)).powi(2))
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommunityResult {
    pub partition: Partition,
    pub modularity: f64,
}

/// Greedy agglomerative modularity maximization (Clauset–Newman–Moore) on
/// the undirected projection.
///
/// Starting from singletons, the adjacent pair with the largest modularity
/// gain is merged until no adjacent pairs remain; the partition at the step
/// of maximum modularity is returned. Gain ties go to the lowest index pair,
/// and the earliest step wins among equal maxima.
pub fn fast_greedy_communities(net: &DirectedNetwork) -> CommunityResult {
    let n = net.n();
    let adj = net.undirected_adjacency();
    let two_m: f64 = adj.iter().map(|nb| nb.len() as f64).sum();
    if two_m == 0.0 {
        return CommunityResult {
            partition: Partition::singletons(n),
            modularity: 0.0,
        };
    }

    // e[i][j]: fraction of edge ends joining communities i and j (one direction)
    let mut e: Vec<BTreeMap<usize, f64>> = adj
        .iter()
        .map(|nb| nb.iter().map(|&w| (w, 1.0 / two_m)).collect())
        .collect();
    let mut a: Vec<f64> = adj.iter().map(|nb| nb.len() as f64 / two_m).collect();
    let mut alive = vec![true; n];

    let mut q: f64 = -a.iter().map(|x| x * x).sum::<f64>();
    let mut best_q = q;
    let mut best_step = 0;
    let mut merges: Vec<(usize, usize)> = Vec::new();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            for (&j, &eij) in e[i].range(i + 1..) {
                let gain = 2.0 * (eij - a[i] * a[j]);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((gain, i, j)) = best else { break };

        let row_j = std::mem::take(&mut e[j]);
        for (k, ejk) in row_j {
            if k == i {
                continue;
            }
            *e[i].entry(k).or_insert(0.0) += ejk;
            let row_k = &mut e[k];
            row_k.remove(&j);
            *row_k.entry(i).or_insert(0.0) += ejk;
        }
        e[i].remove(&j);
        a[i] += a[j];
        a[j] = 0.0;
        alive[j] = false;

        q += gain;
        merges.push((i, j));
        if q > best_q + 1e-12 {
            best_q = q;
            best_step = merges.len();
        }
    }

    let mut owner: Vec<usize> = (0..n).collect();
    for &(i, j) in &merges[..best_step] {
        for o in owner.iter_mut() {
            if *o == j {
                *o = i;
            }
        }
    }
    let partition = Partition::from_labels(&owner);
    let modularity = modularity(net, &partition).expect("partition sized to network");
    CommunityResult {
        partition,
        modularity,
    }
}
