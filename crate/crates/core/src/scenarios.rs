//! Simulation design for the diffusion experiments.
//!
//! A scenario fixes how influencing capacities and susceptibilities are
//! drawn, how strongly the synthetic network splits into two communities,
//! and how the two initiators are picked. Networks are drawn from the
//! projection model's edge law `P(i -> j) = expit(O_i + tau_ij I_j)` with
//! similarities generated per pair from a Beta law whose sign depends on
//! whether `i` and `j` share a group.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma as StatGamma};

use crate::diffusion::{
    cascade_summaries, run_cascade, DiffusionParams, Engine, SimilarityMatrix, Stance, StoppingRule,
};
use crate::error::{Error, Result};
use crate::graph::{modularity, DirectedNetwork, Partition};
use crate::model::{expit, logit};
use crate::rng::{substream2, SimRng};

/// Shape and rate of the capacity law before the `-k*` shift (mean 4).
pub const CAPACITY_GAMMA: (f64, f64) = (3.0, 0.75);
/// Shape and rate of the susceptibility law (mean 2).
pub const SUSCEPTIBILITY_GAMMA: (f64, f64) = (2.8, 1.4);
/// Pre-shift capacity used when all individuals share one value.
pub const CONSTANT_CAPACITY: f64 = 4.0;
pub const CONSTANT_SUSCEPTIBILITY: f64 = 2.0;

pub const LOW_MODULARITY_MAX: f64 = 0.001;
pub const HIGH_MODULARITY_MIN: f64 = 0.05;
pub const MAX_NETWORK_ATTEMPTS: usize = 50;
/// kappa values tried, in order, when a high-modularity network misses its
/// band.
pub const HIGH_KAPPA_GRID: [f64; 9] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];

const K_BRACKET: (f64, f64) = (-20.0, 20.0);
const CALIBRATION_TOLERANCE: f64 = 1e-4;
const CAPACITY_INTERVALS: usize = 500;
const CAPACITY_UPPER: f64 = 50.0;
const SUSCEPTIBILITY_INTERVALS: usize = 240;
const SUSCEPTIBILITY_UPPER: f64 = 36.0;
const BETA_NODES: usize = 64;
const CURVE_STEP: f64 = 0.02;

/// `(node, weight)` pairs with weights summing to one.
type WeightedNodes = Vec<(f64, f64)>;
type CalibrationKey = (usize, CapacityDist, SusceptibilityDist, u64, u64);
static CALIBRATIONS: OnceLock<Mutex<HashMap<CalibrationKey, f64>>> = OnceLock::new();

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityDist {
    ConstantCalibrated,
    GammaShifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SusceptibilityDist {
    #[serde(rename = "constant_2")]
    Constant2,
    Gamma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModularityRegime {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitiatorRule {
    Random,
    MaxCapacity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub o_dist: CapacityDist,
    pub i_dist: SusceptibilityDist,
    pub modularity_regime: ModularityRegime,
    pub initiator_rule: InitiatorRule,
    /// Starting kappa for the similarity generator.
    pub kappa: f64,
    /// Expected average total degree the offset `k*` is tuned to.
    pub target_degree: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(
        n: usize,
        o_dist: CapacityDist,
        i_dist: SusceptibilityDist,
        modularity_regime: ModularityRegime,
        initiator_rule: InitiatorRule,
        seed: u64,
    ) -> Self {
        Self {
            n,
            o_dist,
            i_dist,
            modularity_regime,
            initiator_rule,
            kappa: default_kappa(modularity_regime),
            target_degree: 10.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::invalid("a scenario needs at least 4 individuals"));
        }
        if self.initiator_rule == InitiatorRule::MaxCapacity
            && self.o_dist == CapacityDist::ConstantCalibrated
        {
            return Err(Error::invalid(
                "max_capacity initiators need non-constant capacities",
            ));
        }
        check_kappa(self.kappa)?;
        if !(self.target_degree > 0.0 && self.target_degree < 2.0 * (self.n - 1) as f64) {
            return Err(Error::invalid(format!(
                "target degree {} unreachable with {} individuals",
                self.target_degree, self.n
            )));
        }
        Ok(())
    }
}

pub fn default_kappa(regime: ModularityRegime) -> f64 {
    match regime {
        ModularityRegime::Low => 0.0,
        ModularityRegime::High => 0.5,
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::invalid(format!("kappa {kappa} outside [0, 1)")));
    }
    Ok(())
}

fn gamma(shape: f64, rate: f64) -> Gamma<f64> {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters")
}

/// Capacities before the `-k*` shift.
pub fn sample_base_capacities<R: Rng + ?Sized>(
    n: usize,
    dist: CapacityDist,
    rng: &mut R,
) -> Vec<f64> {
    match dist {
        CapacityDist::ConstantCalibrated => vec![CONSTANT_CAPACITY; n],
        CapacityDist::GammaShifted => {
            let g = gamma(CAPACITY_GAMMA.0, CAPACITY_GAMMA.1);
            (0..n).map(|_| g.sample(rng)).collect()
        }
    }
}

/// `O_i = G_i - k*`, with `G_i = 4` or `G_i ~ Gamma(3, rate 3/4)`.
pub fn sample_capacities<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    k_star: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut o = sample_base_capacities(spec.n, spec.o_dist, rng);
    for x in &mut o {
        *x -= k_star;
    }
    o
}

pub fn sample_susceptibilities<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Vec<f64> {
    match spec.i_dist {
        SusceptibilityDist::Constant2 => vec![CONSTANT_SUSCEPTIBILITY; spec.n],
        SusceptibilityDist::Gamma => {
            let g = gamma(SUSCEPTIBILITY_GAMMA.0, SUSCEPTIBILITY_GAMMA.1);
            (0..spec.n).map(|_| g.sample(rng)).collect()
        }
    }
}

/// Two equal halves: the first `n/2` vertices form group 0.
pub fn two_groups(n: usize) -> Partition {
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    Partition::from_labels(&labels)
}

/// Per unordered pair `B ~ Beta(1 - kappa, 1)`; `tau = 1 - 2B` inside a
/// group and `-1 + 2B` across groups.
pub fn sample_tau_matrix<R: Rng + ?Sized>(
    n: usize,
    kappa: f64,
    groups: &Partition,
    rng: &mut R,
) -> Result<SimilarityMatrix> {
    check_kappa(kappa)?;
    if groups.len() != n {
        return Err(Error::Dimension(format!(
            "group labels cover {} of {n} individuals",
            groups.len()
        )));
    }
    let beta = Beta::new(1.0 - kappa, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let mut tau = SimilarityMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let b = beta.sample(rng);
            let value = if groups.label(i) == groups.label(j) {
                1.0 - 2.0 * b
            } else {
                -1.0 + 2.0 * b
            };
            tau.set_pair(i, j, value);
        }
    }
    Ok(tau)
}

/// `(2/n) sum_{i != j} expit(base_i - k + tau_ij I_j)`: the expected total
/// degree per vertex for fixed draws.
pub fn expected_average_degree(
    base: &[f64],
    susceptibility: &[f64],
    tau: &SimilarityMatrix,
    k: f64,
) -> f64 {
    let n = base.len();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    s += expit(base[i] - k + tau.get(i, j) * susceptibility[j]);
                }
            }
            s
        })
        .sum();
    2.0 * total / n as f64
}

/// Bisection for the `k` where the decreasing function `degree(k)` hits
/// `target`, on the bracket `[-20, 20]`.
pub fn solve_offset(target: f64, degree: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = K_BRACKET;
    let (f_lo, f_hi) = (degree(lo), degree(hi));
    if !(f_lo >= target && f_hi <= target) {
        return Err(Error::Numeric(format!(
            "no k* in [{lo}, {hi}] gives average degree {target}: degree ranges over [{f_hi}, {f_lo}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = degree(mid);
        if (f - target).abs() <= CALIBRATION_TOLERANCE || hi - lo < 1e-12 {
            return Ok(mid);
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Simpson nodes on `[0, upper]` with weights proportional to `density`,
/// normalized to sum to one.
fn simpson_nodes(intervals: usize, upper: f64, density: impl Fn(f64) -> f64) -> WeightedNodes {
    let h = upper / intervals as f64;
    let mut nodes: Vec<(f64, f64)> = (0..=intervals)
        .map(|k| {
            let c = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let x = k as f64 * h;
            (x, c * density(x))
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let total: f64 = nodes.iter().map(|&(_, w)| w).sum();
    for node in &mut nodes {
        node.1 /= total;
    }
    nodes
}

fn gamma_density(shape_rate: (f64, f64)) -> impl Fn(f64) -> f64 {
    let law = StatGamma::new(shape_rate.0, shape_rate.1).expect("positive gamma parameters");
    move |x| law.pdf(x)
}

/// Quadrature nodes for the law of `G = O_i + k*`.
fn capacity_nodes(dist: CapacityDist) -> WeightedNodes {
    match dist {
        CapacityDist::ConstantCalibrated => vec![(CONSTANT_CAPACITY, 1.0)],
        CapacityDist::GammaShifted => simpson_nodes(
            CAPACITY_INTERVALS,
            CAPACITY_UPPER,
            gamma_density(CAPACITY_GAMMA),
        ),
    }
}

/// Weighted values of `tau_ij I_j` for pairs in the same group and in
/// different groups. `B ~ Beta(1 - kappa, 1)` sits on midpoint quantiles
/// `u^(1/(1-kappa))`; the susceptibility law on Simpson nodes.
fn similarity_nodes(spec: &ScenarioSpec, kappa: f64) -> (WeightedNodes, WeightedNodes) {
    let b: Vec<f64> = (0..BETA_NODES)
        .map(|k| ((k as f64 + 0.5) / BETA_NODES as f64).powf(1.0 / (1.0 - kappa)))
        .collect();
    let sus = match spec.i_dist {
        SusceptibilityDist::Constant2 => vec![(CONSTANT_SUSCEPTIBILITY, 1.0)],
        SusceptibilityDist::Gamma => simpson_nodes(
            SUSCEPTIBILITY_INTERVALS,
            SUSCEPTIBILITY_UPPER,
            gamma_density(SUSCEPTIBILITY_GAMMA),
        ),
    };
    let weight = 1.0 / b.len() as f64;
    let mut same = Vec::with_capacity(b.len() * sus.len());
    let mut cross = Vec::with_capacity(b.len() * sus.len());
    for &bk in &b {
        for &(ik, w) in &sus {
            same.push(((1.0 - 2.0 * bk) * ik, w * weight));
            cross.push(((-1.0 + 2.0 * bk) * ik, w * weight));
        }
    }
    (same, cross)
}

/// `x -> E expit(x + s)` tabulated on a uniform grid and read back by
/// linear interpolation.
struct EdgeCurve {
    start: f64,
    values: Vec<f64>,
}

impl EdgeCurve {
    fn new(shifts: &[(f64, f64)], lo: f64, hi: f64) -> Self {
        let m = ((hi - lo) / CURVE_STEP).ceil() as usize + 1;
        let values = (0..m)
            .into_par_iter()
            .map(|k| {
                let x = lo + k as f64 * CURVE_STEP;
                shifts.iter().map(|&(s, w)| w * expit(x + s)).sum::<f64>()
            })
            .collect();
        EdgeCurve { start: lo, values }
    }

    fn at(&self, x: f64) -> f64 {
        let pos = ((x - self.start) / CURVE_STEP).clamp(0.0, (self.values.len() - 1) as f64);
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

/// Expected average total degree `2 E[#edges] / n` as a function of `k`,
/// integrating the capacity, similarity and susceptibility laws by
/// quadrature.
pub fn expected_degree_curve(spec: &ScenarioSpec, kappa: f64) -> Result<impl Fn(f64) -> f64> {
    check_kappa(kappa)?;
    let n = spec.n as f64;
    let sizes = [spec.n - spec.n / 2, spec.n / 2];
    let same_pairs: f64 = sizes
        .iter()
        .map(|&s| s as f64 * (s as f64 - 1.0).max(0.0))
        .sum();
    let cross_pairs = n * (n - 1.0) - same_pairs;
    let g = capacity_nodes(spec.o_dist);
    let (same, cross) = similarity_nodes(spec, kappa);
    let g_lo = g.first().map_or(0.0, |n| n.0);
    let g_hi = g.last().map_or(0.0, |n| n.0);
    let (lo, hi) = (g_lo - K_BRACKET.1, g_hi - K_BRACKET.0);
    let same_curve = EdgeCurve::new(&same, lo, hi);
    let cross_curve = EdgeCurve::new(&cross, lo, hi);
    Ok(move |k: f64| {
        let mut total = 0.0;
        for &(gi, w) in &g {
            total +=
                w * (same_pairs * same_curve.at(gi - k) + cross_pairs * cross_curve.at(gi - k));
        }
        2.0 * total / n
    })
}

/// Offset `k*` at which the spec's expected average degree, at the given
/// kappa, equals its target. The objective is a deterministic quadrature of
/// the generative law, so it is monotone and needs no seed.
pub fn calibrate_k_star_at(spec: &ScenarioSpec, kappa: f64) -> Result<f64> {
    let key = (
        spec.n,
        spec.o_dist,
        spec.i_dist,
        kappa.to_bits(),
        spec.target_degree.to_bits(),
    );
    let cache = CALIBRATIONS.get_or_init(Default::default);
    if let Some(&k) = cache.lock().expect("calibration cache").get(&key) {
        return Ok(k);
    }
    let degree = expected_degree_curve(spec, kappa)?;
    let k = solve_offset(spec.target_degree, degree)?;
    log::debug!("calibrated k* = {k:.4} at kappa {kappa} for n = {}", spec.n);
    cache.lock().expect("calibration cache").insert(key, k);
    Ok(k)
}

pub fn calibrate_k_star(spec: &ScenarioSpec) -> Result<f64> {
    spec.validate()?;
    calibrate_k_star_at(spec, spec.kappa)
}

/// Closed-form `k*` when all capacities equal `base` and similarities vanish.
pub fn k_star_closed_form(n: usize, base: f64, target_degree: f64) -> f64 {
    base - logit(target_degree / (2.0 * (n - 1) as f64))
}

#[derive(Clone, Debug)]
pub struct ScenarioNetwork {
    pub net: DirectedNetwork,
    pub groups: Partition,
    /// Modularity of the planted two-group partition.
    pub modularity: f64,
}

impl ScenarioNetwork {
    pub fn average_degree(&self) -> f64 {
        2.0 * self.net.edge_count() as f64 / self.net.n() as f64
    }
}

/// One draw of the edge set with `P(i -> j) = expit(O_i + tau_ij I_j)`.
pub fn generate_scenario_network<R: Rng + ?Sized>(
    capacity: &[f64],
    susceptibility: &[f64],
    tau: &SimilarityMatrix,
    groups: &Partition,
    rng: &mut R,
) -> Result<ScenarioNetwork> {
    let n = capacity.len();
    if susceptibility.len() != n || tau.n() != n || groups.len() != n {
        return Err(Error::Dimension("scenario parameters disagree on n".into()));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j
                && rng.random::<f64>() < expit(capacity[i] + tau.get(i, j) * susceptibility[j])
            {
                edges.push((i, j));
            }
        }
    }
    let net = DirectedNetwork::new(n, edges)?;
    let modularity = modularity(&net, groups)?;
    Ok(ScenarioNetwork {
        net,
        groups: groups.clone(),
        modularity,
    })
}

fn in_band(regime: ModularityRegime, q: f64) -> bool {
    match regime {
        ModularityRegime::Low => q < LOW_MODULARITY_MAX,
        ModularityRegime::High => q > HIGH_MODULARITY_MIN,
    }
}

/// A synthetic population whose network sits in the spec's modularity band.
#[derive(Clone, Debug)]
pub struct ScenarioRealization {
    pub params: DiffusionParams,
    pub groups: Partition,
    pub kappa: f64,
    pub k_star: f64,
    pub modularity: f64,
    pub average_degree: f64,
    pub attempts: usize,
}

/// Draws parameters and networks until the planted two-group modularity
/// falls in the regime's band. The low regime redraws at the spec's kappa;
/// the high regime moves kappa up [`HIGH_KAPPA_GRID`] after every miss and
/// recalibrates `k*` whenever kappa changes.
pub fn realize_scenario<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<ScenarioRealization> {
    spec.validate()?;
    let groups = two_groups(spec.n);
    let mut kappa = spec.kappa;
    let mut k_star = calibrate_k_star_at(spec, kappa)?;
    let mut seen = Vec::new();
    for attempt in 1..=MAX_NETWORK_ATTEMPTS {
        let capacity = sample_capacities(spec, k_star, rng);
        let sus = sample_susceptibilities(spec, rng);
        let tau = sample_tau_matrix(spec.n, kappa, &groups, rng)?;
        let drawn = generate_scenario_network(&capacity, &sus, &tau, &groups, rng)?;
        if in_band(spec.modularity_regime, drawn.modularity) {
            let average_degree = drawn.average_degree();
            return Ok(ScenarioRealization {
                params: DiffusionParams::new(capacity, sus, tau, drawn.net)?,
                groups,
                kappa,
                k_star,
                modularity: drawn.modularity,
                average_degree,
                attempts: attempt,
            });
        }
        seen.push((kappa, drawn.modularity));
        if spec.modularity_regime == ModularityRegime::High {
            if let Some(&next) = HIGH_KAPPA_GRID.iter().find(|&&g| g > kappa) {
                kappa = next;
                k_star = calibrate_k_star_at(spec, kappa)?;
            }
        }
    }
    let tail: Vec<String> = seen
        .iter()
        .rev()
        .take(5)
        .map(|(k, q)| format!("kappa {k}: Q = {q:.4}"))
        .collect();
    Err(Error::Numeric(format!(
        "{MAX_NETWORK_ATTEMPTS} networks missed the {:?} modularity band; last tries {}",
        spec.modularity_regime,
        tail.join(", ")
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Initiators {
    pub s_seed: usize,
    pub r_seed: usize,
}

impl Initiators {
    pub fn initial_states(&self, n: usize) -> Vec<Stance> {
        let mut s = vec![Stance::Unknown; n];
        s[self.s_seed] = Stance::Support;
        s[self.r_seed] = Stance::Reject;
        s
    }
}

fn argmax_lowest(capacity: &[f64], among: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &v in among {
        if best.is_none_or(|b| capacity[v] > capacity[b]) {
            best = Some(v);
        }
    }
    best
}

/// Seeds per the spec's rule. The low regime picks globally; the high regime
/// picks the Support seed in group 0 and the Reject seed in group 1.
pub fn select_initiators<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    capacity: &[f64],
    groups: &Partition,
    rng: &mut R,
) -> Result<Initiators> {
    let n = capacity.len();
    if n < 2 || groups.len() != n {
        return Err(Error::Dimension(format!(
            "{n} capacities and {} group labels",
            groups.len()
        )));
    }
    match (spec.modularity_regime, spec.initiator_rule) {
        (ModularityRegime::Low, InitiatorRule::Random) => {
            let pick = sample_indices(rng, n, 2);
            Ok(Initiators {
                s_seed: pick.index(0),
                r_seed: pick.index(1),
            })
        }
        (ModularityRegime::Low, InitiatorRule::MaxCapacity) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| capacity[b].total_cmp(&capacity[a]).then(a.cmp(&b)));
            Ok(Initiators {
                s_seed: order[0],
                r_seed: order[1],
            })
        }
        (ModularityRegime::High, rule) => {
            let (g0, g1) = (groups.members(0), groups.members(1));
            if g0.is_empty() || g1.is_empty() || groups.k() != 2 {
                return Err(Error::invalid(
                    "per-community seeding needs exactly two groups",
                ));
            }
            let pick = |members: &[usize], rng: &mut R| match rule {
                InitiatorRule::Random => members[rng.random_range(0..members.len())],
                InitiatorRule::MaxCapacity => argmax_lowest(capacity, members).expect("non-empty"),
            };
            let s_seed = pick(&g0, rng);
            let r_seed = pick(&g1, rng);
            Ok(Initiators { s_seed, r_seed })
        }
    }
}

/// Settings shared by every cell of the experiment grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "low_kappa")]
    pub kappa_low: f64,
    #[serde(default = "high_kappa")]
    pub kappa_high: f64,
    #[serde(default = "ten")]
    pub target_degree: f64,
    #[serde(default)]
    pub stopping: StoppingRule,
    #[serde(default)]
    pub engine: Engine,
}

fn low_kappa() -> f64 {
    default_kappa(ModularityRegime::Low)
}
fn high_kappa() -> f64 {
    default_kappa(ModularityRegime::High)
}
fn ten() -> f64 {
    10.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            replicates: 4,
            seed: 0,
            kappa_low: low_kappa(),
            kappa_high: high_kappa(),
            target_degree: 10.0,
            stopping: StoppingRule::default(),
            engine: Engine::Race,
        }
    }
}

/// The valid factor combinations in a fixed order; `max_capacity` is
/// skipped when capacities are constant, leaving 12 of 16 cells.
pub fn enumerate_specs(config: &GridConfig) -> Vec<ScenarioSpec> {
    let mut specs = Vec::new();
    for o_dist in [CapacityDist::ConstantCalibrated, CapacityDist::GammaShifted] {
        for i_dist in [SusceptibilityDist::Constant2, SusceptibilityDist::Gamma] {
            for regime in [ModularityRegime::Low, ModularityRegime::High] {
                for rule in [InitiatorRule::Random, InitiatorRule::MaxCapacity] {
                    if rule == InitiatorRule::MaxCapacity
                        && o_dist == CapacityDist::ConstantCalibrated
                    {
                        continue;
                    }
                    let mut spec =
                        ScenarioSpec::new(config.n, o_dist, i_dist, regime, rule, config.seed);
                    spec.kappa = match regime {
                        ModularityRegime::Low => config.kappa_low,
                        ModularityRegime::High => config.kappa_high,
                    };
                    spec.target_degree = config.target_degree;
                    specs.push(spec);
                }
            }
        }
    }
    specs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub spec_id: usize,
    pub replicate: usize,
    pub o_dist: CapacityDist,
    pub i_dist: SusceptibilityDist,
    pub modularity_regime: ModularityRegime,
    pub initiator_rule: InitiatorRule,
    pub total_time: f64,
    pub reach: f64,
    pub realized_modularity: f64,
    pub realized_avg_degree: f64,
}

/// One replicate of one scenario: realize the population, seed, cascade.
pub fn run_experiment(
    spec: &ScenarioSpec,
    spec_id: usize,
    replicate: usize,
    config: &GridConfig,
    rng: &mut SimRng,
) -> Result<ExperimentRecord> {
    let world = realize_scenario(spec, rng)?;
    let seeds = select_initiators(spec, &world.params.capacity, &world.groups, rng)?;
    let trace = run_cascade(
        &world.params,
        seeds.initial_states(spec.n),
        &config.stopping,
        config.engine,
        rng,
    )?;
    let summary = cascade_summaries(&trace);
    Ok(ExperimentRecord {
        spec_id,
        replicate,
        o_dist: spec.o_dist,
        i_dist: spec.i_dist,
        modularity_regime: spec.modularity_regime,
        initiator_rule: spec.initiator_rule,
        total_time: summary.total_time,
        reach: summary.reach,
        realized_modularity: world.modularity,
        realized_avg_degree: world.average_degree,
    })
}

/// Every valid scenario times `replicates`, each replicate on the substream
/// `(seed, spec id, replicate)`, run in parallel and returned in grid order.
pub fn run_experiment_grid(config: &GridConfig) -> Result<Vec<ExperimentRecord>> {
    if config.replicates == 0 {
        return Err(Error::invalid("grid needs at least one replicate"));
    }
    config.stopping.validate()?;
    let specs = enumerate_specs(config);
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..config.replicates).map(move |r| (s, r)))
        .collect();
    jobs.par_iter()
        .map(|&(s, r)| {
            let mut rng = substream2(config.seed, s as u32, r as u32);
            let record = run_experiment(&specs[s], s, r, config, &mut rng);
            if let Ok(rec) = &record {
                log::info!(
                    "scenario {s} replicate {r}: time {:.3}, reach {:.3}, Q {:.4}",
                    rec.total_time,
                    rec.reach,
                    rec.realized_modularity
                );
            }
            record
        })
        .collect()
}
