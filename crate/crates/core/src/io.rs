//! File formats shared by the command line and the examples.
//!
//! Tables are CSV. Each CSV written by a command is paired with a JSON file
//! of the same stem (`draws.csv` / `draws.json`) carrying `schema_version`
//! plus whatever the table needs to be read back. Readers accept any
//! `1.x` version and reject other majors.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{CascadeSummary, CascadeTrace};
use crate::error::{Error, Result};
use crate::mcmc::PosteriorSamples;
use crate::model::LatentState;
use crate::ppc::PpcResult;
use crate::scenarios::ExperimentRecord;

pub const SCHEMA_VERSION: &str = "1.0";
const SCHEMA_MAJOR: &str = "1";

pub fn check_schema_version(found: &str) -> Result<()> {
    let major = found.split('.').next().unwrap_or_default();
    if major != SCHEMA_MAJOR {
        return Err(Error::Schema(format!(
            "unsupported schema_version {found:?}; this build reads {SCHEMA_MAJOR}.x"
        )));
    }
    Ok(())
}

/// `dir/name.csv` -> `dir/name.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<String>,
}

/// Reads a versioned JSON document, checking `schema_version` first.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let probe: VersionProbe = serde_json::from_str(&text)?;
    match probe.schema_version {
        Some(v) => check_schema_version(&v)?,
        None => {
            return Err(Error::Schema(format!(
                "{} has no schema_version",
                path.display()
            )))
        }
    }
    Ok(serde_json::from_str(&text)?)
}

fn check_header(found: &csv::StringRecord, expected: &[String]) -> Result<()> {
    for (k, want) in expected.iter().enumerate() {
        match found.get(k) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::Schema(format!(
                    "column {}: expected `{want}`, found `{got}`",
                    k + 1
                )))
            }
            None => return Err(Error::Schema(format!("missing column `{want}`"))),
        }
    }
    if found.len() > expected.len() {
        return Err(Error::Schema(format!(
            "unexpected column `{}`",
            &found[expected.len()]
        )));
    }
    Ok(())
}

fn parse_f64(field: &str, column: &str, row: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        line: row as u64 + 2,
        message: format!("column `{column}`: `{field}` is not a number"),
    })
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn draws_header(n: usize, dim: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|i| format!("O_{i}")).collect();
    for i in 1..=n {
        for k in 1..=dim {
            h.push(format!("u_{i}_{k}"));
        }
    }
    h.extend(["omega2", "sigma2", "loglik"].map(String::from));
    h
}

pub fn write_draws_csv<W: Write>(out: W, samples: &PosteriorSamples) -> Result<()> {
    let first = samples
        .draws
        .first()
        .ok_or_else(|| Error::invalid("no draws to write"))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(draws_header(first.n(), first.dim()))?;
    for (d, ll) in samples.draws.iter().zip(&samples.log_lik_trace) {
        let row = d
            .capacity()
            .iter()
            .chain(d.positions())
            .chain([&d.omega2, &d.sigma2, ll])
            .map(|&x| fmt(x));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DrawsTable {
    pub draws: Vec<LatentState>,
    pub log_lik: Vec<f64>,
}

/// Reads a draws table; `n` and the dimension are recovered from the header.
pub fn read_draws_csv<R: Read>(input: R) -> Result<DrawsTable> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = r.headers()?.clone();
    let n = header.iter().take_while(|h| h.starts_with("O_")).count();
    if n == 0 {
        return Err(Error::Schema("draws table has no `O_` columns".into()));
    }
    let rest = header.len().saturating_sub(n + 3);
    if rest % n != 0 {
        return Err(Error::Schema(format!(
            "{} position columns do not split over {n} vertices",
            rest
        )));
    }
    let dim = rest / n;
    let expected = draws_header(n, dim);
    check_header(&header, &expected)?;

    let mut draws = Vec::new();
    let mut log_lik = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .zip(&expected)
            .map(|(f, c)| parse_f64(f, c, row))
            .collect::<Result<Vec<f64>>>()?;
        let o = vals[..n].to_vec();
        let u = vals[n..n + n * dim].to_vec();
        let tail = &vals[n + n * dim..];
        draws.push(LatentState::new(o, u, dim, tail[0], tail[1])?);
        log_lik.push(tail[2]);
    }
    if draws.is_empty() {
        return Err(Error::invalid("draws table has no rows"));
    }
    Ok(DrawsTable { draws, log_lik })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSidecar {
    pub schema_version: String,
    pub omega2: f64,
    pub sigma2: f64,
    pub p: usize,
}

/// Writes `id,O,u_1..u_p`; `ids` label the rows.
pub fn write_state_csv<W: Write>(out: W, state: &LatentState, ids: &[String]) -> Result<()> {
    if ids.len() != state.n() {
        return Err(Error::Dimension(format!(
            "{} ids for {} vertices",
            ids.len(),
            state.n()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "O".to_string()];
    header.extend((1..=state.dim()).map(|k| format!("u_{k}")));
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone(), fmt(state.capacity()[i])];
        row.extend(state.position(i).iter().map(|&x| fmt(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn state_sidecar(state: &LatentState) -> StateSidecar {
    StateSidecar {
        schema_version: SCHEMA_VERSION.into(),
        omega2: state.omega2,
        sigma2: state.sigma2,
        p: state.dim(),
    }
}

/// Reads a state table against its sidecar; returns the state and row ids.
pub fn read_state_csv<R: Read>(
    input: R,
    sidecar: &StateSidecar,
) -> Result<(LatentState, Vec<String>)> {
    check_schema_version(&sidecar.schema_version)?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut expected = vec!["id".to_string(), "O".to_string()];
    expected.extend((1..=sidecar.p).map(|k| format!("u_{k}")));
    check_header(r.headers()?, &expected)?;
    let (mut ids, mut o, mut u) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        o.push(parse_f64(&rec[1], "O", row)?);
        for k in 0..sidecar.p {
            u.push(parse_f64(&rec[2 + k], &expected[2 + k], row)?);
        }
    }
    let state = LatentState::new(o, u, sidecar.p, sidecar.omega2, sidecar.sigma2)?;
    Ok((state, ids))
}

pub const TRACE_HEADER: [&str; 11] = [
    "jump_index",
    "dt",
    "elapsed",
    "source",
    "target",
    "old_state",
    "new_state",
    "n_I",
    "n_U",
    "n_S",
    "n_R",
];

/// One row per jump; `source` and `target` are written through `ids`.
pub fn write_trace_csv<W: Write>(out: W, trace: &CascadeTrace, ids: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for (k, row) in trace.rows.iter().enumerate() {
        let c = row.counts;
        w.write_record([
            (k + 1).to_string(),
            fmt(row.dt),
            fmt(row.elapsed),
            ids[row.source].clone(),
            ids[row.target].clone(),
            row.old_state.to_string(),
            row.new_state.to_string(),
            c[0].to_string(),
            c[1].to_string(),
            c[2].to_string(),
            c[3].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryDocument<'a> {
    pub schema_version: &'static str,
    #[serde(flatten)]
    pub summary: &'a CascadeSummary,
}

pub const GRID_HEADER: [&str; 10] = [
    "spec_id",
    "replicate",
    "o_dist",
    "i_dist",
    "modularity_regime",
    "initiator_rule",
    "total_time",
    "reach",
    "realized_modularity",
    "realized_avg_degree",
];

pub fn write_grid_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(GRID_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let expected: Vec<String> = GRID_HEADER.iter().map(|s| s.to_string()).collect();
    check_header(r.headers()?, &expected)?;
    let mut out = Vec::new();
    for (row, rec) in r.deserialize().enumerate() {
        let rec: ExperimentRecord = rec.map_err(|e| Error::Parse {
            line: row as u64 + 2,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_ppc_csv<W: Write>(out: W, results: &[PpcResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "replicate_index", "value"])?;
    for res in results {
        for (k, v) in res.replicates.iter().enumerate() {
            w.write_record([
                res.statistic.name().to_string(),
                (k + 1).to_string(),
                v.map(fmt).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
