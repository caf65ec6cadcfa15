//! Projection-model parameters, likelihood and the influence
//! reparameterization.
//!
//! An edge `i -> j` appears with probability `expit(eta_ij)` where
//!
//! ```text
//! eta_ij = O_i + (u_i . u_j) / |u_i|
//! ```
//!
//! `O_i` is the influencing capacity of `i` (log-odds scale) and `u_i` its
//! latent position in `R^p`. Writing `I_j = |u_j|` and `tau_ij` for the cosine
//! between `u_i` and `u_j` gives the equivalent influence form
//! `eta_ij = O_i + tau_ij * I_j`. When `u_i = 0` the projection term is taken
//! to be 0, as is `tau_ij`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedNetwork;

/// Logistic function, evaluated on the branch that cannot overflow.
///
/// Stays strictly positive down to `x ≈ -745.13`, where `exp(x)` leaves the
/// subnormal range.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log expit(x)`.
pub fn log_expit(x: f64) -> f64 {
    -softplus(-x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Prior hyperparameters of the inverse-gamma variance priors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub a_omega: f64,
    pub b_omega: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
}

impl Hyperparams {
    pub fn new(a_omega: f64, b_omega: f64, a_sigma: f64, b_sigma: f64) -> Result<Self> {
        let h = Self {
            a_omega,
            b_omega,
            a_sigma,
            b_sigma,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_omega", self.a_omega),
            ("b_omega", self.b_omega),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "hyperparameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            a_omega: 1.0,
            b_omega: 1.0,
            a_sigma: 1.0,
            b_sigma: 1.0,
        }
    }
}

/// One configuration of capacities, positions and variance parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    capacity: Vec<f64>,
    /// Row-major `n x dim`.
    positions: Vec<f64>,
    dim: usize,
    pub omega2: f64,
    pub sigma2: f64,
}

impl LatentState {
    pub fn new(
        capacity: Vec<f64>,
        positions: Vec<f64>,
        dim: usize,
        omega2: f64,
        sigma2: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("latent dimension must be at least 1"));
        }
        if positions.len() != capacity.len() * dim {
            return Err(Error::Dimension(format!(
                "{} capacities need {} position entries, got {}",
                capacity.len(),
                capacity.len() * dim,
                positions.len()
            )));
        }
        if !(omega2 > 0.0 && sigma2 > 0.0) {
            return Err(Error::invalid("omega2 and sigma2 must be positive"));
        }
        Ok(Self {
            capacity,
            positions,
            dim,
            omega2,
            sigma2,
        })
    }

    /// All capacities zero, all positions at the origin.
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n * dim], dim, 1.0, 1.0).expect("valid zero state")
    }

    pub fn n(&self) -> usize {
        self.capacity.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    pub fn capacity_mut(&mut self) -> &mut [f64] {
        &mut self.capacity
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.positions[i * d..(i + 1) * d]
    }

    /// Replaces all positions; `positions` is row-major `n x dim`.
    pub fn set_positions(&mut self, positions: Vec<f64>) -> Result<()> {
        if positions.len() != self.positions.len() {
            return Err(Error::Dimension("position matrix shape changed".into()));
        }
        self.positions = positions;
        Ok(())
    }
}

/// Unit direction of `u`, or `None` at the origin.
fn direction(u: &[f64]) -> Option<Vec<f64>> {
    let r = norm(u);
    (r > 0.0).then(|| u.iter().map(|x| x / r).collect())
}

/// Projection of `onto` on the direction of `from`: `(from . onto) / |from|`,
/// 0 when `from` is the origin.
pub(crate) fn projection(from: &[f64], onto: &[f64]) -> f64 {
    let r = norm(from);
    if r > 0.0 {
        dot(from, onto) / r
    } else {
        0.0
    }
}

/// Log-odds of the edge `i -> j`.
pub fn edge_logit(state: &LatentState, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::invalid("edge log-odds undefined for i == j"));
    }
    if i >= state.n() || j >= state.n() {
        return Err(Error::Dimension(format!(
            "vertex pair ({i}, {j}) outside a state of {} vertices",
            state.n()
        )));
    }
    Ok(state.capacity[i] + projection(state.position(i), state.position(j)))
}

/// Bernoulli log-likelihood of the whole adjacency matrix.
///
/// Uses `log p(y) = y * eta - log(1 + e^eta)`, so the sum splits into a
/// dense softplus term over all ordered pairs and a sparse term over edges.
pub fn log_likelihood(net: &DirectedNetwork, state: &LatentState) -> Result<f64> {
    if net.n() != state.n() {
        return Err(Error::Dimension(format!(
            "network has {} vertices, state has {}",
            net.n(),
            state.n()
        )));
    }
    Ok((0..net.n())
        .map(|i| row_log_likelihood(net, state, i))
        .sum())
}

/// Contribution of row `i` (edges leaving `i`).
pub(crate) fn row_log_likelihood(net: &DirectedNetwork, state: &LatentState, i: usize) -> f64 {
    row_log_likelihood_with(net, state, i, state.capacity[i], state.position(i))
}

/// Row `i` evaluated with a substituted capacity and position for `i`.
pub(crate) fn row_log_likelihood_with(
    net: &DirectedNetwork,
    state: &LatentState,
    i: usize,
    capacity: f64,
    position: &[f64],
) -> f64 {
    let dir = direction(position);
    let eta = |j: usize| match &dir {
        Some(d) => capacity + dot(d, state.position(j)),
        None => capacity,
    };
    let dense: f64 = (0..state.n())
        .filter(|&j| j != i)
        .map(|j| softplus(eta(j)))
        .sum();
    let sparse: f64 = net.out_neighbors(i).iter().map(|&j| eta(j)).sum();
    sparse - dense
}

/// Contribution of column `i` (edges entering `i`) with `u_i` replaced by
/// `position`.
pub(crate) fn column_log_likelihood_with(
    net: &DirectedNetwork,
    state: &LatentState,
    i: usize,
    position: &[f64],
) -> f64 {
    let mut total = 0.0;
    let incoming = net.in_neighbors(i);
    let mut next_edge = 0;
    for j in (0..state.n()).filter(|&j| j != i) {
        let eta = state.capacity[j] + projection(state.position(j), position);
        total -= softplus(eta);
        if next_edge < incoming.len() && incoming[next_edge] == j {
            total += eta;
            next_edge += 1;
        }
    }
    total
}

/// Capacities, susceptibilities, similarities and spectrum positions derived
/// from a latent state.
#[derive(Clone, Debug, PartialEq)]
pub struct ReparamView {
    /// `I_j = |u_j|`.
    pub susceptibility: Vec<f64>,
    /// Row-major `n x n` cosine similarities; 0 where either position is the
    /// origin, 1 on the diagonal for nonzero positions.
    pub similarity: Vec<f64>,
    /// Row-major `n x dim` unit directions; zero rows where `u_i = 0`.
    pub spectrum: Vec<f64>,
    /// `true` where `u_i = 0` and the spectrum row is a placeholder.
    pub at_origin: Vec<bool>,
    n: usize,
    dim: usize,
}

impl ReparamView {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self, i: usize, j: usize) -> f64 {
        self.similarity[i * self.n + j]
    }

    pub fn spectrum_row(&self, i: usize) -> &[f64] {
        &self.spectrum[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn reparameterize(state: &LatentState) -> ReparamView {
    let (n, dim) = (state.n(), state.dim());
    let susceptibility: Vec<f64> = (0..n).map(|i| norm(state.position(i))).collect();
    let mut spectrum = vec![0.0; n * dim];
    let mut at_origin = vec![false; n];
    for i in 0..n {
        match direction(state.position(i)) {
            Some(d) => spectrum[i * dim..(i + 1) * dim].copy_from_slice(&d),
            None => at_origin[i] = true,
        }
    }
    let mut similarity = vec![0.0; n * n];
    for i in 0..n {
        if at_origin[i] {
            continue;
        }
        for j in i..n {
            if at_origin[j] {
                continue;
            }
            let c = (dot(state.position(i), state.position(j))
                / (susceptibility[i] * susceptibility[j]))
                .clamp(-1.0, 1.0);
            similarity[i * n + j] = c;
            similarity[j * n + i] = c;
        }
    }
    ReparamView {
        susceptibility,
        similarity,
        spectrum,
        at_origin,
        n,
        dim,
    }
}

/// Pearson correlation between capacities and susceptibilities, one value
/// per draw; `None` where either vector is constant within the draw.
pub fn posterior_correlation_oi(draws: &[LatentState]) -> Result<Vec<Option<f64>>> {
    if draws.len() < 2 {
        return Err(Error::invalid("need at least 2 draws"));
    }
    if draws[0].n() < 2 {
        return Err(Error::invalid("need at least 2 vertices"));
    }
    Ok(draws
        .iter()
        .map(|s| {
            let suscept: Vec<f64> = (0..s.n()).map(|i| norm(s.position(i))).collect();
            pearson(s.capacity(), &suscept)
        })
        .collect())
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx.sqrt() * syy.sqrt()))
}
