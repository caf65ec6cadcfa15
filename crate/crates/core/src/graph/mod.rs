//! Directed binary networks.
//!
//! [`DirectedNetwork`] is the observed adjacency `y[i][j]`: an immutable
//! simple digraph on `0..n` with sorted out- and in-adjacency lists and a
//! string label per vertex. Statistics that are conventionally defined on
//! undirected graphs (transitivity, assortativity, modularity, communities)
//! run on the undirected projection, where a reciprocal pair collapses into a
//! single edge.

mod community;
mod stats;

use std::collections::HashMap;
use std::io::Read;

use crate::error::{Error, Result};

pub use community::{fast_greedy_communities, modularity, CommunityResult, Partition};
pub use stats::{
    assortativity, average_distance, degree_stats, density, transitivity, DegreeStats,
    GraphStatistic, NetworkSummary,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedNetwork {
    n: usize,
    n_edges: usize,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl DirectedNetwork {
    /// Builds a network from ordered pairs. Duplicates are collapsed;
    /// self-loops and out-of-range indices are rejected.
    pub fn new<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::with_labels(labels, edges)
    }

    pub fn with_labels<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = labels.len();
        let mut out_adj = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop on vertex {i}")));
            }
            out_adj[i].push(j);
        }
        let mut in_adj = vec![Vec::new(); n];
        let mut n_edges = 0;
        for (i, row) in out_adj.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            n_edges += row.len();
            for &j in row.iter() {
                in_adj[j].push(i);
            }
        }
        Ok(Self {
            n,
            n_edges,
            out_adj,
            in_adj,
            labels,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self::new(n, std::iter::empty()).expect("empty network is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    pub fn in_neighbors(&self, j: usize) -> &[usize] {
        &self.in_adj[j]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_adj[i].len()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        self.in_adj[j].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out_adj
            .get(i)
            .is_some_and(|row| row.binary_search(&j).is_ok())
    }

    /// All edges in (source, target) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
    }

    /// Sorted neighbor lists of the undirected projection.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|v| {
                let mut nb: Vec<usize> = self.out_adj[v]
                    .iter()
                    .chain(self.in_adj[v].iter())
                    .copied()
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect()
    }

    /// Vertex-induced subgraph on `keep` (ascending original indices are
    /// mapped to `0..keep.len()`).
    pub fn induced_subgraph(&self, keep: &[usize]) -> Self {
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &v) in sorted.iter().enumerate() {
            new_index[v] = k;
        }
        let edges: Vec<(usize, usize)> = sorted
            .iter()
            .flat_map(|&v| {
                self.out_adj[v]
                    .iter()
                    .filter(|&&w| new_index[w] != usize::MAX)
                    .map(|&w| (new_index[v], new_index[w]))
                    .collect::<Vec<_>>()
            })
            .collect();
        let labels = sorted.iter().map(|&v| self.labels[v].clone()).collect();
        Self::with_labels(labels, edges).expect("subgraph of a valid network is valid")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeaderMode {
    Present,
    Absent,
    /// Skip the first record only if it reads `source,target`.
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug)]
pub struct EdgeListFormat {
    pub header: HeaderMode,
    pub delimiter: u8,
}

impl Default for EdgeListFormat {
    fn default() -> Self {
        Self {
            header: HeaderMode::Auto,
            delimiter: b',',
        }
    }
}

/// Reads a `src,dst` edge list. Vertex ids are arbitrary strings, mapped to
/// dense indices in order of first appearance.
pub fn load_edge_list<R: Read>(source: R, format: EdgeListFormat) -> Result<DirectedNetwork> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(format.delimiter)
        .from_reader(source);

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |id: &str| -> usize {
        if let Some(&k) = index.get(id) {
            return k;
        }
        let k = labels.len();
        index.insert(id.to_owned(), k);
        labels.push(id.to_owned());
        k
    };

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if row == 0 {
            let looks_like_header = record.len() == 2
                && record[0].eq_ignore_ascii_case("source")
                && record[1].eq_ignore_ascii_case("target");
            match format.header {
                HeaderMode::Present => continue,
                HeaderMode::Auto if looks_like_header => continue,
                _ => {}
            }
        }
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let (src, dst) = (&record[0], &record[1]);
        if src.is_empty() || dst.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty vertex id".into(),
            });
        }
        if src == dst {
            return Err(Error::invalid(format!("line {line}: self-loop on '{src}'")));
        }
        let s = intern(src);
        let d = intern(dst);
        edges.push((s, d));
    }
    DirectedNetwork::with_labels(labels, edges)
}

/// Largest weakly connected component, reindexed by ascending original
/// index. Among equally large components the one holding the lowest vertex
/// index wins.
pub fn giant_component(net: &DirectedNetwork) -> Result<DirectedNetwork> {
    if net.n() == 0 {
        return Err(Error::invalid("giant component of an empty network"));
    }
    let adj = net.undirected_adjacency();
    let mut seen = vec![false; net.n()];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..net.n() {
        if seen[start] {
            continue;
        }
        let mut component = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < component.len() {
            let v = component[head];
            head += 1;
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    component.push(w);
                }
            }
        }
        if component.len() > best.len() {
            best = component;
        }
    }
    Ok(net.induced_subgraph(&best))
}
