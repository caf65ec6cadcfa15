//! The `influnet` command line.
//!
//! Every subcommand reads its inputs, writes its artifacts into `--out`
//! (created if missing) and logs to standard error. Exit codes: 0 success,
//! 2 usage, configuration, input or schema error, 3 numerical failure,
//! 4 internal invariant breach.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};

use crate::analysis::{nested_anova, AnovaReport, Response, ANOVA_CODING};
use crate::diffusion::{
    cascade_summaries, run_cascade, DiffusionParams, Engine, Stance, StoppingRule,
};
use crate::error::{Error, Result};
use crate::graph::{
    fast_greedy_communities, giant_component, load_edge_list, DirectedNetwork, EdgeListFormat,
    GraphStatistic, HeaderMode, NetworkSummary,
};
use crate::io::{
    read_draws_csv, read_grid_csv, read_json, read_state_csv, sha256_hex, sidecar_path,
    state_sidecar, write_draws_csv, write_grid_csv, write_json, write_ppc_csv, write_state_csv,
    write_trace_csv, StateSidecar, SummaryDocument, SCHEMA_VERSION,
};
use crate::mcmc::{
    compute_dic, effective_sample_size, posterior_mean_state, run_sampler, Dic, SamplerConfig,
};
use crate::model::Hyperparams;
use crate::ppc::{
    coverage_experiment, posterior_predictive_check, sample_prior_state, Coverage, PpcResult,
};
use crate::rng::substream;
use crate::scenarios::{run_experiment_grid, GridConfig};

#[derive(Parser, Debug)]
#[command(
    name = "influnet",
    version,
    about = "Latent-space influence networks and idea-diffusion cascades"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output on standard error (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HeaderArg {
    Auto,
    Present,
    Absent,
}

#[derive(Args, Debug)]
struct EdgeInput {
    /// Edge list `source,target`, one directed edge per line.
    edges: PathBuf,
    /// Field delimiter of the edge list.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Whether the first line is a header.
    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    header: HeaderArg,
    /// Keep only the largest weakly connected component.
    #[arg(long)]
    giant: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EngineArg {
    Reference,
    Race,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Reference => Engine::Reference,
            EngineArg::Race => Engine::Race,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Descriptive statistics and communities of the giant component.
    Stats {
        #[command(flatten)]
        input: EdgeInput,
        /// Describe the whole input instead of its giant component.
        #[arg(long)]
        whole_network: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Posterior sampling of the projection model.
    Fit {
        #[command(flatten)]
        input: EdgeInput,
        /// TOML file with [prior] and [sampler] sections.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Posterior predictive check of graph statistics.
    Ppc {
        #[command(flatten)]
        input: EdgeInput,
        /// Draws table written by `fit`.
        #[arg(long)]
        draws: PathBuf,
        /// Statistic to check (repeatable; default all).
        #[arg(long = "statistic")]
        statistics: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Interval coverage on networks simulated from prior draws.
    Coverage {
        /// TOML file with [prior] and [sampler] sections.
        #[arg(long)]
        config: PathBuf,
        /// Number of individuals.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[command(flatten)]
        common: Common,
    },
    /// One cascade over a network with a fitted or given latent state.
    Diffuse {
        #[command(flatten)]
        input: EdgeInput,
        /// State table (`id,O,u_1..u_p`) with its JSON sidecar.
        #[arg(long)]
        state: PathBuf,
        /// Vertex starting in state S (repeatable).
        #[arg(long = "support", required = true)]
        support: Vec<String>,
        /// Vertex starting in state R (repeatable).
        #[arg(long = "reject")]
        reject: Vec<String>,
        #[arg(long, value_enum, default_value_t = EngineArg::Race)]
        engine: EngineArg,
        /// Allowed drift of the group counts, as a fraction of n.
        #[arg(long, default_value_t = 0.05)]
        band: f64,
        #[command(flatten)]
        common: Common,
    },
    /// The full factorial grid of diffusion scenarios.
    Grid {
        /// Individuals per simulated network.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        replicates: usize,
        #[arg(long, value_enum, default_value_t = EngineArg::Race)]
        engine: EngineArg,
        #[arg(long, default_value_t = crate::scenarios::default_kappa(crate::scenarios::ModularityRegime::Low))]
        kappa_low: f64,
        #[arg(long, default_value_t = crate::scenarios::default_kappa(crate::scenarios::ModularityRegime::High))]
        kappa_high: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Nested ANOVA of a grid's log time and log reach.
    Anova {
        /// Grid table written by `grid`.
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Accepts TOML integers where a real is expected.
fn real<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        I(i64),
        F(f64),
    }
    Ok(match Num::deserialize(d)? {
        Num::I(i) => i as f64,
        Num::F(f) => f,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    #[serde(deserialize_with = "real")]
    pub a_omega: f64,
    #[serde(deserialize_with = "real")]
    pub b_omega: f64,
    #[serde(deserialize_with = "real")]
    pub a_sigma: f64,
    #[serde(deserialize_with = "real")]
    pub b_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub n_samples: usize,
    pub warmup: usize,
    pub thin: usize,
    #[serde(deserialize_with = "real")]
    pub proposal_sd_capacity: f64,
    #[serde(deserialize_with = "real")]
    pub proposal_sd_position: f64,
    pub adapt: bool,
    #[serde(deserialize_with = "real")]
    pub target_accept_capacity: f64,
    #[serde(deserialize_with = "real")]
    pub target_accept_position: f64,
    pub dim: usize,
}

/// Contents of a fit configuration file:
///
/// ```toml
/// [prior]
/// a_omega = 1
/// b_omega = 1
/// a_sigma = 1
/// b_sigma = 1
///
/// [sampler]
/// n_samples = 5000
/// warmup = 5000
/// thin = 10
/// proposal_sd_capacity = 0.5
/// proposal_sd_position = 0.5
/// adapt = true
/// target_accept_capacity = 0.44
/// target_accept_position = 0.234
/// dim = 2
/// ```
///
/// Every key is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub prior: PriorSection,
    pub sampler: SamplerSection,
}

impl FitConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: FitConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {}", e.message())))?;
        cfg.hyperparams()?;
        cfg.sampler_config(0).validate()?;
        Ok(cfg)
    }

    pub fn hyperparams(&self) -> Result<Hyperparams> {
        let p = &self.prior;
        Hyperparams::new(p.a_omega, p.b_omega, p.a_sigma, p.b_sigma)
    }

    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            n_samples: s.n_samples,
            warmup: s.warmup,
            thin: s.thin,
            proposal_sd_capacity: s.proposal_sd_capacity,
            proposal_sd_position: s.proposal_sd_position,
            adapt: s.adapt,
            target_accept_capacity: s.target_accept_capacity,
            target_accept_position: s.target_accept_position,
            seed,
            dim: s.dim,
            prior_only: false,
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::Undefined(_) => 3,
        Error::Invariant(_) => 4,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 4;
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Stats {
            input,
            whole_network,
            common,
        } => cmd_stats(&input, whole_network, &common),
        Command::Fit {
            input,
            config,
            common,
        } => cmd_fit(&input, &config, &common),
        Command::Ppc {
            input,
            draws,
            statistics,
            common,
        } => cmd_ppc(&input, &draws, &statistics, &common),
        Command::Coverage {
            config,
            n,
            repetitions,
            level,
            common,
        } => cmd_coverage(&config, n, repetitions, level, &common),
        Command::Diffuse {
            input,
            state,
            support,
            reject,
            engine,
            band,
            common,
        } => cmd_diffuse(
            &input,
            &state,
            &support,
            &reject,
            engine.into(),
            band,
            &common,
        ),
        Command::Grid {
            n,
            replicates,
            engine,
            kappa_low,
            kappa_high,
            common,
        } => {
            let config = GridConfig {
                n,
                replicates,
                seed: common.seed,
                kappa_low,
                kappa_high,
                engine: engine.into(),
                ..GridConfig::default()
            };
            cmd_grid(&config, &common)
        }
        Command::Anova { grid, common } => cmd_anova(&grid, &common),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(BufWriter::new(f))
}

fn prepare_out(common: &Common) -> Result<()> {
    fs::create_dir_all(&common.out)?;
    Ok(())
}

fn load_network(input: &EdgeInput) -> Result<DirectedNetwork> {
    if !input.delimiter.is_ascii() {
        return Err(Error::invalid("delimiter must be a single ASCII character"));
    }
    let format = EdgeListFormat {
        header: match input.header {
            HeaderArg::Auto => HeaderMode::Auto,
            HeaderArg::Present => HeaderMode::Present,
            HeaderArg::Absent => HeaderMode::Absent,
        },
        delimiter: input.delimiter as u8,
    };
    let net = load_edge_list(open(&input.edges)?, format)?;
    if net.n() == 0 {
        return Err(Error::invalid(format!(
            "{} has no edges",
            input.edges.display()
        )));
    }
    let net = if input.giant {
        giant_component(&net)?
    } else {
        net
    };
    log::info!("loaded {} vertices, {} edges", net.n(), net.edge_count());
    Ok(net)
}

#[derive(Serialize)]
struct Membership<'a> {
    id: &'a str,
    community: usize,
}

#[derive(Serialize)]
struct CommunityBlock<'a> {
    count: usize,
    modularity: f64,
    membership: Vec<Membership<'a>>,
}

#[derive(Serialize)]
struct StatsDocument<'a> {
    schema_version: &'static str,
    input_vertices: usize,
    input_edges: usize,
    whole_network: bool,
    summary: NetworkSummary,
    communities: CommunityBlock<'a>,
}

fn cmd_stats(input: &EdgeInput, whole_network: bool, common: &Common) -> Result<()> {
    prepare_out(common)?;
    let full = load_network(&EdgeInput {
        giant: false,
        edges: input.edges.clone(),
        ..*input
    })?;
    let giant = if whole_network {
        full.clone()
    } else {
        giant_component(&full)?
    };
    let communities = fast_greedy_communities(&giant);
    let doc = StatsDocument {
        schema_version: SCHEMA_VERSION,
        input_vertices: full.n(),
        input_edges: full.edge_count(),
        whole_network,
        summary: NetworkSummary::compute(&giant),
        communities: CommunityBlock {
            count: communities.partition.k(),
            modularity: communities.modularity,
            membership: giant
                .labels()
                .iter()
                .enumerate()
                .map(|(v, id)| Membership {
                    id,
                    community: communities.partition.label(v),
                })
                .collect(),
        },
    };
    write_json(&common.out.join("stats.json"), &doc)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcceptanceBlock {
    pub capacity_mean: f64,
    pub position_mean: f64,
    pub capacity: Vec<f64>,
    pub position: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EssBlock {
    pub omega2: Option<f64>,
    pub sigma2: Option<f64>,
    pub loglik: Option<f64>,
}

/// JSON sidecar of a draws table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitManifest {
    pub schema_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: FitConfig,
    pub vertex_ids: Vec<String>,
    pub n_edges: usize,
    pub n_draws: usize,
    pub acceptance: AcceptanceBlock,
    pub ess: EssBlock,
    pub dic: Option<DicBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DicBlock {
    pub dic: f64,
    pub p_d: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
}

impl From<Dic> for DicBlock {
    fn from(d: Dic) -> Self {
        Self {
            dic: d.dic,
            p_d: d.p_d,
            mean_deviance: d.mean_deviance,
            deviance_at_mean: d.deviance_at_mean,
        }
    }
}

fn ess_or_none(trace: &[f64]) -> Option<f64> {
    effective_sample_size(trace).ok()
}

fn read_config(path: &Path) -> Result<(FitConfig, String)> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok((FitConfig::parse(&text)?, sha256_hex(text.as_bytes())))
}

fn cmd_fit(input: &EdgeInput, config_path: &Path, common: &Common) -> Result<()> {
    let (config, hash) = read_config(config_path)?;
    let net = load_network(input)?;
    prepare_out(common)?;
    let hyper = config.hyperparams()?;
    let sampler = config.sampler_config(common.seed);
    log::info!(
        "sampling {} sweeps ({} warmup) on {} vertices",
        sampler.total_sweeps(),
        sampler.warmup,
        net.n()
    );
    let fit = run_sampler(&net, &hyper, &sampler)?;
    let (acc_o, acc_u) = fit.mean_acceptance();
    log::info!("mean acceptance: capacity {acc_o:.3}, position {acc_u:.3}");

    let dic = match compute_dic(&fit.draws, &net) {
        Ok(d) => Some(DicBlock::from(d)),
        Err(e) => {
            log::warn!("DIC not available: {e}");
            None
        }
    };
    let omega: Vec<f64> = fit.draws.iter().map(|d| d.omega2).collect();
    let sigma: Vec<f64> = fit.draws.iter().map(|d| d.sigma2).collect();
    let manifest = FitManifest {
        schema_version: SCHEMA_VERSION.into(),
        seed: common.seed,
        config_sha256: hash,
        config,
        vertex_ids: net.labels().to_vec(),
        n_edges: net.edge_count(),
        n_draws: fit.draws.len(),
        acceptance: AcceptanceBlock {
            capacity_mean: acc_o,
            position_mean: acc_u,
            capacity: fit.acceptance_capacity.clone(),
            position: fit.acceptance_position.clone(),
        },
        ess: EssBlock {
            omega2: ess_or_none(&omega),
            sigma2: ess_or_none(&sigma),
            loglik: ess_or_none(&fit.log_lik_trace),
        },
        dic,
    };

    let draws_path = common.out.join("draws.csv");
    write_draws_csv(create(&draws_path)?, &fit)?;
    write_json(&sidecar_path(&draws_path), &manifest)?;

    let mean = posterior_mean_state(&fit.draws)?;
    let state_path = common.out.join("state.csv");
    write_state_csv(create(&state_path)?, &mean, net.labels())?;
    write_json(&sidecar_path(&state_path), &state_sidecar(&mean))?;
    Ok(())
}

#[derive(Serialize)]
struct PpcSummary<'a> {
    statistic: &'a str,
    observed: Option<f64>,
    tail_probability: Option<f64>,
    missing: usize,
    replicate_mean: Option<f64>,
}

#[derive(Serialize)]
struct PpcDocument<'a> {
    schema_version: &'static str,
    seed: u64,
    n_draws: usize,
    statistics: Vec<PpcSummary<'a>>,
}

fn summarize(r: &PpcResult) -> PpcSummary<'_> {
    let valid: Vec<f64> = r.replicates.iter().flatten().copied().collect();
    PpcSummary {
        statistic: r.statistic.name(),
        observed: r.observed,
        tail_probability: r.tail_probability,
        missing: r.missing,
        replicate_mean: (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64),
    }
}

fn cmd_ppc(input: &EdgeInput, draws_path: &Path, names: &[String], common: &Common) -> Result<()> {
    let manifest: FitManifest = read_json(&sidecar_path(draws_path))?;
    let table = read_draws_csv(open(draws_path)?)?;
    let net = load_network(input)?;
    if manifest.vertex_ids != net.labels() {
        return Err(Error::Schema(format!(
            "draws cover {} vertices that do not match the {} vertices of {}",
            manifest.vertex_ids.len(),
            net.n(),
            input.edges.display()
        )));
    }
    let statistics: Vec<GraphStatistic> = if names.is_empty() {
        GraphStatistic::ALL.to_vec()
    } else {
        names.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    prepare_out(common)?;
    let results = posterior_predictive_check(&table.draws, &net, &statistics, common.seed)?;
    let path = common.out.join("ppc.csv");
    write_ppc_csv(create(&path)?, &results)?;
    let doc = PpcDocument {
        schema_version: SCHEMA_VERSION,
        seed: common.seed,
        n_draws: table.draws.len(),
        statistics: results.iter().map(summarize).collect(),
    };
    write_json(&sidecar_path(&path), &doc)
}

#[derive(Serialize)]
struct CoverageDocument {
    schema_version: &'static str,
    seed: u64,
    config_sha256: String,
    n: usize,
    level: f64,
    repetitions: Vec<Coverage>,
    mean_coverage_capacity: f64,
    mean_coverage_position: f64,
}

fn cmd_coverage(
    config_path: &Path,
    n: usize,
    repetitions: usize,
    level: f64,
    common: &Common,
) -> Result<()> {
    let (config, hash) = read_config(config_path)?;
    if n < 2 || repetitions == 0 {
        return Err(Error::invalid(
            "coverage needs n >= 2 and at least one repetition",
        ));
    }
    prepare_out(common)?;
    let hyper = config.hyperparams()?;
    let mut results = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        let mut rng = substream(common.seed, r as u64);
        let truth = sample_prior_state(n, config.sampler.dim, &hyper, &mut rng)?;
        let sampler = config.sampler_config(rand::Rng::random(&mut rng));
        let cov = coverage_experiment(&truth, &hyper, &sampler, level)?;
        log::info!(
            "repetition {r}: capacity {:.3}, position {:.3}",
            cov.coverage_capacity,
            cov.coverage_position
        );
        results.push(cov);
    }
    let mean = |f: fn(&Coverage) -> f64| results.iter().map(f).sum::<f64>() / results.len() as f64;
    let doc = CoverageDocument {
        schema_version: SCHEMA_VERSION,
        seed: common.seed,
        config_sha256: hash,
        n,
        level,
        mean_coverage_capacity: mean(|c| c.coverage_capacity),
        mean_coverage_position: mean(|c| c.coverage_position),
        repetitions: results,
    };
    write_json(&common.out.join("coverage.json"), &doc)
}

fn cmd_diffuse(
    input: &EdgeInput,
    state_path: &Path,
    support: &[String],
    reject: &[String],
    engine: Engine,
    band: f64,
    common: &Common,
) -> Result<()> {
    let sidecar: StateSidecar = read_json(&sidecar_path(state_path))?;
    let (state, ids) = read_state_csv(open(state_path)?, &sidecar)?;
    let net = load_network(input)?;

    let row_of: std::collections::HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();
    let order =
        net.labels()
            .iter()
            .map(|l| {
                row_of.get(l.as_str()).copied().ok_or_else(|| {
                    Error::Schema(format!("vertex `{l}` missing from the state table"))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
    let capacity = order.iter().map(|&k| state.capacity()[k]).collect();
    let positions = order
        .iter()
        .flat_map(|&k| state.position(k).to_vec())
        .collect();
    let aligned = crate::model::LatentState::new(
        capacity,
        positions,
        state.dim(),
        state.omega2,
        state.sigma2,
    )?;
    let params = DiffusionParams::from_state(&aligned, net.clone())?;

    let vertex = |id: &String| {
        net.labels()
            .iter()
            .position(|l| l == id)
            .ok_or_else(|| Error::invalid(format!("initiator `{id}` is not in the network")))
    };
    let mut initial = vec![Stance::Unknown; net.n()];
    for (ids, stance) in [(support, Stance::Support), (reject, Stance::Reject)] {
        for id in ids {
            let v = vertex(id)?;
            if initial[v] != Stance::Unknown {
                return Err(Error::invalid(format!("initiator `{id}` listed twice")));
            }
            initial[v] = stance;
        }
    }

    prepare_out(common)?;
    let stopping = StoppingRule {
        stable_band: band,
        ..StoppingRule::default()
    };
    let mut rng = crate::rng::seeded(common.seed);
    let trace = run_cascade(&params, initial, &stopping, engine, &mut rng)?;
    let summary = cascade_summaries(&trace);
    log::info!(
        "{} jumps, reach {:.3}, stopped: {:?}",
        summary.n_jumps,
        summary.reach,
        summary.stop_reason
    );
    let path = common.out.join("trace.csv");
    write_trace_csv(create(&path)?, &trace, net.labels())?;
    write_json(
        &sidecar_path(&path),
        &SummaryDocument {
            schema_version: SCHEMA_VERSION,
            summary: &summary,
        },
    )
}

#[derive(Serialize, Deserialize)]
struct GridDocument {
    schema_version: String,
    config: GridConfig,
    n_records: usize,
}

fn cmd_grid(config: &GridConfig, common: &Common) -> Result<()> {
    prepare_out(common)?;
    let records = run_experiment_grid(config)?;
    let path = common.out.join("grid.csv");
    write_grid_csv(create(&path)?, &records)?;
    write_json(
        &sidecar_path(&path),
        &GridDocument {
            schema_version: SCHEMA_VERSION.into(),
            config: config.clone(),
            n_records: records.len(),
        },
    )
}

#[derive(Serialize)]
struct AnovaDocument {
    schema_version: &'static str,
    coding: &'static str,
    log_total_time: AnovaReport,
    log_reach: AnovaReport,
}

fn cmd_anova(grid: &Path, common: &Common) -> Result<()> {
    let _: GridDocument = read_json(&sidecar_path(grid))?;
    let records = read_grid_csv(open(grid)?)?;
    prepare_out(common)?;
    let doc = AnovaDocument {
        schema_version: SCHEMA_VERSION,
        coding: ANOVA_CODING,
        log_total_time: nested_anova(&records, Response::LogTotalTime)?,
        log_reach: nested_anova(&records, Response::LogReach)?,
    };
    write_json(&common.out.join("anova.json"), &doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = "[prior]\na_omega = 1\nb_omega = 1\na_sigma = 1\nb_sigma = 1\n\n[sampler]\nn_samples = 10\nwarmup = 5\nthin = 1\nproposal_sd_capacity = 0.5\nproposal_sd_position = 0.5\nadapt = true\ntarget_accept_capacity = 0.44\ntarget_accept_position = 0.234\ndim = 2\n";

    #[test]
    fn config_accepts_integer_hyperparameters() {
        let c = FitConfig::parse(CONFIG).unwrap();
        assert_eq!(c.hyperparams().unwrap(), Hyperparams::default());
        assert_eq!(c.sampler_config(9).seed, 9);
    }

    #[test]
    fn missing_key_is_named() {
        let text = CONFIG.replace("b_sigma = 1\n", "");
        match FitConfig::parse(&text) {
            Err(Error::Invalid(m)) => assert!(m.contains("b_sigma"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_hyperparameter_rejected() {
        let text = CONFIG.replace("a_omega = 1", "a_omega = 0");
        assert!(FitConfig::parse(&text).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let text = CONFIG.replace("dim = 2", "dim = 2\nburnin = 4");
        assert!(FitConfig::parse(&text).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), 2);
        assert_eq!(exit_code(&Error::Schema("x".into())), 2);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
        assert_eq!(exit_code(&Error::Invariant("x".into())), 4);
        assert_eq!(main_with_args(["influnet", "no-such-command"]), 2);
        assert_eq!(main_with_args(["influnet", "--help"]), 0);
    }
}
