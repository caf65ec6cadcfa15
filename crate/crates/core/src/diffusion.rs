//! Four-state idea diffusion over an influence network.
//!
//! Every individual is Unknown (I), Undecided (U), Support (S) or Reject (R).
//! Along an edge `u -> v`:
//!
//! - any informed `u` (U, S or R) informs an Unknown `v`, moving it to U after
//!   an `Exp(e^{O_u})` time;
//! - a committed `u` (S or R) influences `v` in U, S or R with a different
//!   stance after an `Exp(e^{O_u + tau_uv I_v})` time: an Undecided `v` adopts
//!   the stance of `u`, a `v` holding the opposite stance falls back to U.
//!
//! The next jump is the earliest of all pending times. Two engines draw it:
//! the reference engine samples one exponential per candidate and takes the
//! minimum; the race engine samples the total-rate holding time and picks the
//! winner with probability proportional to its rate. The two are equal in
//! distribution because the minimum of independent exponentials is
//! exponential with the summed rate and is attained by each clock with
//! probability proportional to its rate.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedNetwork;
use crate::model::{reparameterize, LatentState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stance {
    #[serde(rename = "I")]
    Unknown,
    #[serde(rename = "U")]
    Undecided,
    #[serde(rename = "S")]
    Support,
    #[serde(rename = "R")]
    Reject,
}

impl Stance {
    pub const ALL: [Stance; 4] = [
        Stance::Unknown,
        Stance::Undecided,
        Stance::Support,
        Stance::Reject,
    ];

    pub fn code(self) -> char {
        match self {
            Stance::Unknown => 'I',
            Stance::Undecided => 'U',
            Stance::Support => 'S',
            Stance::Reject => 'R',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        Stance::ALL.into_iter().find(|s| s.code() == c)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_committed(self) -> bool {
        matches!(self, Stance::Support | Stance::Reject)
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Symmetric `n x n` similarity matrix; the diagonal is never read.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!(
                "similarity matrix needs {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if a != b {
                    return Err(Error::invalid(format!(
                        "similarity not symmetric at ({i}, {j})"
                    )));
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(Error::invalid(format!("similarity {a} outside [-1, 1]")));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub(crate) fn set_pair(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.n + j] = value;
        self.values[j * self.n + i] = value;
    }

    /// Entries above the diagonal, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j, self.get(i, j))))
    }
}

/// Everything that drives the jump rates.
#[derive(Clone, Debug)]
pub struct DiffusionParams {
    pub capacity: Vec<f64>,
    pub susceptibility: Vec<f64>,
    pub similarity: SimilarityMatrix,
    pub network: DirectedNetwork,
}

impl DiffusionParams {
    pub fn new(
        capacity: Vec<f64>,
        susceptibility: Vec<f64>,
        similarity: SimilarityMatrix,
        network: DirectedNetwork,
    ) -> Result<Self> {
        let n = network.n();
        if capacity.len() != n || susceptibility.len() != n || similarity.n() != n {
            return Err(Error::Dimension(format!(
                "network has {n} vertices; got {} capacities, {} susceptibilities, {}x{} similarities",
                capacity.len(),
                susceptibility.len(),
                similarity.n(),
                similarity.n()
            )));
        }
        if let Some(bad) = susceptibility.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::invalid(format!("negative susceptibility {bad}")));
        }
        Ok(Self {
            capacity,
            susceptibility,
            similarity,
            network,
        })
    }

    /// Rates taken from a fitted (or true) latent state.
    pub fn from_state(state: &LatentState, network: DirectedNetwork) -> Result<Self> {
        let view = reparameterize(state);
        let n = view.n();
        let mut similarity = SimilarityMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                similarity.set_pair(i, j, view.tau(i, j));
            }
        }
        Self::new(
            state.capacity().to_vec(),
            view.susceptibility,
            similarity,
            network,
        )
    }

    pub fn n(&self) -> usize {
        self.network.n()
    }

    pub fn inform_rate(&self, source: usize) -> f64 {
        self.capacity[source].exp()
    }

    pub fn influence_rate(&self, source: usize, target: usize) -> f64 {
        (self.capacity[source] + self.similarity.get(source, target) * self.susceptibility[target])
            .exp()
    }

    pub fn rate(&self, t: &Transition) -> f64 {
        match t.kind {
            TransitionKind::Inform => self.inform_rate(t.source),
            TransitionKind::Influence => self.influence_rate(t.source, t.target),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Inform,
    Influence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub source: usize,
    pub target: usize,
    pub kind: TransitionKind,
}

/// What edge `source -> target` can do given the two current stances.
pub fn edge_candidate(source: Stance, target: Stance) -> Option<TransitionKind> {
    match (source, target) {
        (Stance::Unknown, _) => None,
        (_, Stance::Unknown) => Some(TransitionKind::Inform),
        (Stance::Undecided, _) => None,
        (s, t) if s != t => Some(TransitionKind::Influence),
        _ => None,
    }
}

/// Every transition available in `states`, ordered by source then target.
pub fn candidate_transitions(states: &[Stance], params: &DiffusionParams) -> Vec<Transition> {
    let net = &params.network;
    let mut out = Vec::new();
    for u in 0..net.n() {
        if states[u] == Stance::Unknown {
            continue;
        }
        for &v in net.out_neighbors(u) {
            if let Some(kind) = edge_candidate(states[u], states[v]) {
                out.push(Transition {
                    source: u,
                    target: v,
                    kind,
                });
            }
        }
    }
    out
}

fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    if rate.is_infinite() {
        return 0.0;
    }
    Exp::new(rate).expect("positive finite rate").sample(rng)
}

/// Time for `source` to inform a neighbor: `Exp(e^{O_source})`.
pub fn sample_inform_time<R: Rng + ?Sized>(
    source: usize,
    params: &DiffusionParams,
    rng: &mut R,
) -> f64 {
    exponential(params.inform_rate(source), rng)
}

/// Time for `source` to influence `target`: `Exp(e^{O_source + tau I_target})`.
pub fn sample_influence_time<R: Rng + ?Sized>(
    source: usize,
    target: usize,
    params: &DiffusionParams,
    rng: &mut R,
) -> f64 {
    exponential(params.influence_rate(source, target), rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub transition: Transition,
    pub dt: f64,
}

/// One exponential clock per candidate; the earliest wins. `None` when no
/// candidate has a finite time.
pub fn next_jump_reference<R: Rng + ?Sized>(
    states: &[Stance],
    params: &DiffusionParams,
    rng: &mut R,
) -> Option<Jump> {
    let mut best: Option<Jump> = None;
    for t in candidate_transitions(states, params) {
        let dt = match t.kind {
            TransitionKind::Inform => sample_inform_time(t.source, params, rng),
            TransitionKind::Influence => sample_influence_time(t.source, t.target, params, rng),
        };
        if dt < best.map_or(f64::INFINITY, |b| b.dt) {
            best = Some(Jump { transition: t, dt });
        }
    }
    best
}

/// Holding time from the total rate, winner drawn proportionally to its
/// rate.
pub fn next_jump_race<R: Rng + ?Sized>(
    states: &[Stance],
    params: &DiffusionParams,
    rng: &mut R,
) -> Option<Jump> {
    let candidates = candidate_transitions(states, params);
    let rates: Vec<f64> = candidates.iter().map(|t| params.rate(t)).collect();
    let total: f64 = rates.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let dt = exponential(total, rng);
    let mut x = rng.random::<f64>() * total;
    let mut winner = None;
    for (t, &r) in candidates.iter().zip(&rates) {
        if r > 0.0 {
            winner = Some(*t);
            if x < r {
                break;
            }
            x -= r;
        }
    }
    winner.map(|transition| Jump { transition, dt })
}

/// Applies the jump and returns `(old, new)` stance of the target.
pub fn apply_jump(
    states: &mut [Stance],
    transition: &Transition,
    params: &DiffusionParams,
) -> Result<(Stance, Stance)> {
    let (u, v) = (transition.source, transition.target);
    if u >= states.len() || v >= states.len() || !params.network.has_edge(u, v) {
        return Err(Error::Invariant(format!("jump along non-edge {u} -> {v}")));
    }
    let (su, sv) = (states[u], states[v]);
    if edge_candidate(su, sv) != Some(transition.kind) {
        return Err(Error::Invariant(format!(
            "{:?} {u} -> {v} not available with stances {su} -> {sv}",
            transition.kind
        )));
    }
    let new = match sv {
        Stance::Unknown => Stance::Undecided,
        Stance::Undecided => su,
        Stance::Support | Stance::Reject => Stance::Undecided,
    };
    states[v] = new;
    Ok((sv, new))
}

/// When a cascade counts as settled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Allowed drift of every group count, as a fraction of `n`.
    pub stable_band: f64,
    /// Consecutive stable jumps needed to stop; `None` means `3n`.
    pub stable_jumps_required: Option<usize>,
    /// Safety cap on the number of jumps, as a multiple of `n`.
    pub jump_cap_factor: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            stable_band: 0.05,
            stable_jumps_required: None,
            jump_cap_factor: 10,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.stable_band > 0.0 && self.stable_band <= 1.0) {
            return Err(Error::invalid("stable band must lie in (0, 1]"));
        }
        if self.stable_jumps_required == Some(0) {
            return Err(Error::invalid("stable jump count must be at least 1"));
        }
        if self.jump_cap_factor == 0 {
            return Err(Error::invalid("jump cap factor must be at least 1"));
        }
        Ok(())
    }

    fn required(&self, n: usize) -> usize {
        self.stable_jumps_required.unwrap_or(3 * n).max(1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Reference,
    #[default]
    Race,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No transition left.
    Exhausted,
    /// Group counts settled for the required number of jumps.
    Stable,
    /// Hit the jump cap.
    JumpCap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub dt: f64,
    pub elapsed: f64,
    pub source: usize,
    pub target: usize,
    pub old_state: Stance,
    pub new_state: Stance,
    /// Group sizes after the jump, indexed by [`Stance::index`].
    pub counts: [usize; 4],
}

/// Running cascade bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeState {
    pub states: Vec<Stance>,
    pub elapsed: f64,
    pub counts: [usize; 4],
    pub stable_streak: usize,
    window: [usize; 4],
}

impl CascadeState {
    pub fn new(states: Vec<Stance>) -> Self {
        let counts = count_stances(&states);
        Self {
            states,
            elapsed: 0.0,
            counts,
            stable_streak: 0,
            window: counts,
        }
    }

    fn record(&mut self, target: usize, old: Stance, new: Stance, dt: f64, band: f64) {
        self.elapsed += dt;
        self.counts[old.index()] -= 1;
        self.counts[new.index()] += 1;
        debug_assert_eq!(self.states[target], new);
        let settled = self
            .counts
            .iter()
            .zip(&self.window)
            .all(|(&c, &w)| (c as f64 - w as f64).abs() <= band);
        if settled {
            self.stable_streak += 1;
        } else {
            self.stable_streak = 0;
            self.window = self.counts;
        }
    }
}

pub fn count_stances(states: &[Stance]) -> [usize; 4] {
    let mut c = [0; 4];
    for s in states {
        c[s.index()] += 1;
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeTrace {
    pub initial_counts: [usize; 4],
    pub rows: Vec<TraceRow>,
    pub final_states: Vec<Stance>,
    pub stop_reason: StopReason,
}

/// Binary sum tree over per-edge rates: O(log m) update and proportional
/// selection, exact recomputation of every internal node on update.
struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(len: usize) -> Self {
        let size = len.next_power_of_two().max(1);
        Self {
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn set(&mut self, k: usize, value: f64) {
        let mut i = k + self.size;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    fn find(&self, mut x: f64) -> usize {
        let mut i = 1;
        while i < self.size {
            let (left, right) = (self.nodes[2 * i], self.nodes[2 * i + 1]);
            if right <= 0.0 || (left > 0.0 && x < left) {
                i *= 2;
            } else {
                x -= left;
                i = 2 * i + 1;
            }
        }
        i - self.size
    }
}

/// Incremental race engine: candidate rates live in a sum tree and only the
/// edges touching the vertex that just jumped are refreshed.
struct RaceScheduler<'a> {
    params: &'a DiffusionParams,
    edges: Vec<(usize, usize)>,
    out_offset: Vec<usize>,
    inform: Vec<f64>,
    influence: Vec<f64>,
    tree: SumTree,
}

impl<'a> RaceScheduler<'a> {
    fn new(params: &'a DiffusionParams, states: &[Stance]) -> Self {
        let net = &params.network;
        let edges: Vec<(usize, usize)> = net.edges().collect();
        let mut out_offset = Vec::with_capacity(net.n() + 1);
        let mut acc = 0;
        for u in 0..net.n() {
            out_offset.push(acc);
            acc += net.out_degree(u);
        }
        out_offset.push(acc);
        let inform = (0..net.n()).map(|u| params.inform_rate(u)).collect();
        let influence = edges
            .iter()
            .map(|&(u, v)| params.influence_rate(u, v))
            .collect();
        let mut sched = Self {
            params,
            tree: SumTree::new(edges.len()),
            edges,
            out_offset,
            inform,
            influence,
        };
        for k in 0..sched.edges.len() {
            sched.refresh(k, states);
        }
        sched
    }

    fn rate(&self, k: usize, states: &[Stance]) -> (Option<TransitionKind>, f64) {
        let (u, v) = self.edges[k];
        match edge_candidate(states[u], states[v]) {
            Some(TransitionKind::Inform) => (Some(TransitionKind::Inform), self.inform[u]),
            Some(TransitionKind::Influence) => (Some(TransitionKind::Influence), self.influence[k]),
            None => (None, 0.0),
        }
    }

    fn refresh(&mut self, k: usize, states: &[Stance]) {
        let (_, r) = self.rate(k, states);
        self.tree.set(k, r);
    }

    fn vertex_changed(&mut self, v: usize, states: &[Stance]) {
        for k in self.out_offset[v]..self.out_offset[v + 1] {
            self.refresh(k, states);
        }
        let net = &self.params.network;
        for &u in net.in_neighbors(v) {
            let row = net.out_neighbors(u);
            let pos = row.binary_search(&v).expect("in-neighbor has the edge");
            self.refresh(self.out_offset[u] + pos, states);
        }
    }

    fn next<R: Rng + ?Sized>(&self, states: &[Stance], rng: &mut R) -> Option<Jump> {
        let total = self.tree.total();
        if !(total > 0.0) {
            return None;
        }
        let dt = exponential(total, rng);
        let k = self.tree.find(rng.random::<f64>() * total);
        let (kind, r) = self.rate(k, states);
        let kind = kind.filter(|_| r > 0.0)?;
        let (source, target) = self.edges[k];
        Some(Jump {
            transition: Transition {
                source,
                target,
                kind,
            },
            dt,
        })
    }
}

/// Runs a cascade from `initial` until no transition is left, the group
/// counts settle, or the jump cap is reached.
pub fn run_cascade<R: Rng + ?Sized>(
    params: &DiffusionParams,
    initial: Vec<Stance>,
    stopping: &StoppingRule,
    engine: Engine,
    rng: &mut R,
) -> Result<CascadeTrace> {
    stopping.validate()?;
    let n = params.n();
    if initial.len() != n {
        return Err(Error::Dimension(format!(
            "{} initial stances for {n} vertices",
            initial.len()
        )));
    }
    let band = stopping.stable_band * n as f64;
    let required = stopping.required(n);
    let cap = stopping.jump_cap_factor * n;

    let mut cascade = CascadeState::new(initial);
    let initial_counts = cascade.counts;
    let mut scheduler = match engine {
        Engine::Race => Some(RaceScheduler::new(params, &cascade.states)),
        Engine::Reference => None,
    };
    let mut rows = Vec::new();

    let stop_reason = loop {
        if cascade.stable_streak >= required {
            break StopReason::Stable;
        }
        if rows.len() >= cap {
            log::warn!("cascade hit the jump cap of {cap} jumps on {n} vertices");
            break StopReason::JumpCap;
        }
        let jump = match &scheduler {
            Some(s) => s.next(&cascade.states, rng),
            None => next_jump_reference(&cascade.states, params, rng),
        };
        let Some(jump) = jump else {
            break StopReason::Exhausted;
        };
        let t = jump.transition;
        let (old, new) = apply_jump(&mut cascade.states, &t, params)?;
        if let Some(s) = scheduler.as_mut() {
            s.vertex_changed(t.target, &cascade.states);
        }
        cascade.record(t.target, old, new, jump.dt, band);
        rows.push(TraceRow {
            dt: jump.dt,
            elapsed: cascade.elapsed,
            source: t.source,
            target: t.target,
            old_state: old,
            new_state: new,
            counts: cascade.counts,
        });
    };

    Ok(CascadeTrace {
        initial_counts,
        rows,
        final_states: cascade.states,
        stop_reason,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CascadeSummary {
    /// Sum of all jump times.
    pub total_time: f64,
    /// Share of individuals in S or R at termination.
    pub reach: f64,
    pub n_jumps: usize,
    pub stop_reason: StopReason,
}

pub fn cascade_summaries(trace: &CascadeTrace) -> CascadeSummary {
    let n = trace.final_states.len();
    let committed = trace
        .final_states
        .iter()
        .filter(|s| s.is_committed())
        .count();
    CascadeSummary {
        total_time: trace.rows.iter().map(|r| r.dt).sum(),
        reach: if n == 0 {
            0.0
        } else {
            committed as f64 / n as f64
        },
        n_jumps: trace.rows.len(),
        stop_reason: trace.stop_reason,
    }
}
