//! On-disk formats: dataset bundles, estimate tables, encoder state, code
//! files, and sweep outputs.
//!
//! All text formats write floats with Rust's shortest round-trip `Display`,
//! so a written value parses back to the identical bits and equal inputs
//! produce byte-identical files. All writes go through a temp file in the
//! destination directory followed by a rename; existing files are never
//! overwritten unless `force` is passed.
//!
//! A dataset bundle is a directory of four files:
//! * `edges.txt`: one `u v` edge per line, canonical order;
//! * `X.csv`: covariate matrix, header `x0,...`;
//! * `units.csv`: header `id,t,y_factual,y0,y1,ite_true,propensity`;
//! * `gen_config.json`: the generating configuration.
//!
//! Ground-truth columns (`y0`, `y1`, `ite_true`, `propensity`) exist for
//! evaluation only; the estimation path reads codes, treatments, and
//! factual outcomes.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::datagen::{GenConfig, NetDataset};
use crate::error::{Error, Result};
use crate::estimator::EffectEstimate;
use crate::experiment::SweepOutcome;
use crate::graph::Graph;
use crate::graphenc::RoleVectors;
use crate::hv::Hypervector;
use crate::rhpt::RhptEncoder;

pub const EDGES_FILE: &str = "edges.txt";
pub const COVARIATES_FILE: &str = "X.csv";
pub const UNITS_FILE: &str = "units.csv";
pub const GEN_CONFIG_FILE: &str = "gen_config.json";

const ENCODER_MAGIC: &[u8; 8] = b"HDNETENC";
const CODES_MAGIC: &[u8; 8] = b"HDNETHV\0";
const FORMAT_VERSION: u32 = 1;

/// Refuse to clobber an existing path unless forced.
fn ensure_writable(path: &Path, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::AlreadyExists(path.display().to_string()));
    }
    Ok(())
}

/// Write bytes to a sibling temp file, then rename over the target. The
/// rename makes the write all-or-nothing on the same filesystem.
pub fn atomic_write(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    ensure_writable(path, force)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::param("path", format!("{} has no file name", path.display())))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    let ctx = || format!("writing {}", path.display());
    fs::write(&tmp, bytes).map_err(|e| Error::io(ctx(), e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(ctx(), e)
    })?;
    Ok(())
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T, force: bool) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(format!("serializing {}", path.display()), e))?;
    text.push('\n');
    atomic_write(path, text.as_bytes(), force)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

fn malformed(what: &str, path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        what: what.into(),
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(field: &str, what: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| malformed(what, path, format!("line {line}: invalid number {field:?}")))
}

/// Write a generated dataset as a bundle directory.
pub fn write_dataset_bundle(
    dir: &Path,
    ds: &NetDataset,
    cfg: &GenConfig,
    force: bool,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;

    let mut edges = Vec::new();
    ds.graph
        .write_edge_list(&mut edges)
        .map_err(|e| Error::io("rendering edge list", e))?;
    atomic_write(&dir.join(EDGES_FILE), &edges, force)?;

    let d = ds.x.first().map_or(0, Vec::len);
    let mut x_csv = Vec::new();
    {
        let mut w = BufWriter::new(&mut x_csv);
        let header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        writeln!(w, "{}", header.join(",")).map_err(|e| Error::io("rendering X.csv", e))?;
        for row in &ds.x {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", fields.join(",")).map_err(|e| Error::io("rendering X.csv", e))?;
        }
    }
    atomic_write(&dir.join(COVARIATES_FILE), &x_csv, force)?;

    let mut units = Vec::new();
    {
        let mut w = BufWriter::new(&mut units);
        writeln!(w, "id,t,y_factual,y0,y1,ite_true,propensity")
            .map_err(|e| Error::io("rendering units.csv", e))?;
        for i in 0..ds.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i,
                u8::from(ds.treated[i]),
                ds.y_factual[i],
                ds.y0[i],
                ds.y1[i],
                ds.ite_true[i],
                ds.propensity[i]
            )
            .map_err(|e| Error::io("rendering units.csv", e))?;
        }
    }
    atomic_write(&dir.join(UNITS_FILE), &units, force)?;

    write_json_pretty(&dir.join(GEN_CONFIG_FILE), cfg, force)
}

/// Load and cross-validate a bundle directory.
pub fn load_dataset_bundle(dir: &Path) -> Result<(NetDataset, GenConfig)> {
    let cfg: GenConfig = read_json(&dir.join(GEN_CONFIG_FILE))?;

    let x_path = dir.join(COVARIATES_FILE);
    let x = {
        let file =
            fs::File::open(&x_path).map_err(|e| Error::io(format!("opening {}", x_path.display()), e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| malformed("covariate table", &x_path, "empty file"))?;
        let header = header.map_err(|e| Error::io("reading X.csv", e))?;
        let d = header.split(',').count();
        if d == 0 || !header.starts_with("x0") {
            return Err(malformed("covariate table", &x_path, "bad header"));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io("reading X.csv", e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d {
                return Err(malformed(
                    "covariate table",
                    &x_path,
                    format!("line {line_no}: expected {d} columns, got {}", fields.len()),
                ));
            }
            let mut row = Vec::with_capacity(d);
            for f in fields {
                row.push(parse_f64(f, "covariate table", &x_path, line_no)?);
            }
            rows.push(row);
        }
        rows
    };

    let units_path = dir.join(UNITS_FILE);
    let (treated, y_factual, y0, y1, ite_true, propensity) = {
        let file = fs::File::open(&units_path)
            .map_err(|e| Error::io(format!("opening {}", units_path.display()), e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| malformed("unit table", &units_path, "empty file"))?;
        let header = header.map_err(|e| Error::io("reading units.csv", e))?;
        if header != "id,t,y_factual,y0,y1,ite_true,propensity" {
            return Err(malformed(
                "unit table",
                &units_path,
                format!("unexpected header {header:?}"),
            ));
        }
        let mut treated = Vec::new();
        let mut y_factual = Vec::new();
        let mut y0 = Vec::new();
        let mut y1 = Vec::new();
        let mut ite_true = Vec::new();
        let mut propensity = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io("reading units.csv", e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(malformed(
                    "unit table",
                    &units_path,
                    format!("line {line_no}: expected 7 columns, got {}", fields.len()),
                ));
            }
            let id: usize = fields[0].parse().map_err(|_| {
                malformed(
                    "unit table",
                    &units_path,
                    format!("line {line_no}: invalid id {:?}", fields[0]),
                )
            })?;
            if id != treated.len() {
                return Err(malformed(
                    "unit table",
                    &units_path,
                    format!("line {line_no}: ids must be consecutive from 0, got {id}"),
                ));
            }
            treated.push(match fields[1] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(malformed(
                        "unit table",
                        &units_path,
                        format!("line {line_no}: treatment must be 0 or 1, got {other:?}"),
                    ))
                }
            });
            y_factual.push(parse_f64(fields[2], "unit table", &units_path, line_no)?);
            y0.push(parse_f64(fields[3], "unit table", &units_path, line_no)?);
            y1.push(parse_f64(fields[4], "unit table", &units_path, line_no)?);
            ite_true.push(parse_f64(fields[5], "unit table", &units_path, line_no)?);
            propensity.push(parse_f64(fields[6], "unit table", &units_path, line_no)?);
        }
        (treated, y_factual, y0, y1, ite_true, propensity)
    };

    let n = treated.len();
    if n == 0 {
        return Err(malformed("unit table", &units_path, "no units"));
    }
    if x.len() != n {
        return Err(malformed(
            "dataset bundle",
            dir,
            format!("{} covariate rows but {} units", x.len(), n),
        ));
    }
    if cfg.n != n {
        return Err(malformed(
            "dataset bundle",
            dir,
            format!("config says n = {} but tables have {} units", cfg.n, n),
        ));
    }
    if x[0].len() != cfg.d {
        return Err(malformed(
            "dataset bundle",
            dir,
            format!("config says d = {} but X.csv has {} columns", cfg.d, x[0].len()),
        ));
    }

    let edges_path = dir.join(EDGES_FILE);
    let file = fs::File::open(&edges_path)
        .map_err(|e| Error::io(format!("opening {}", edges_path.display()), e))?;
    let graph = Graph::from_edge_list(n, BufReader::new(file))?;

    for i in 0..n {
        let expect = if treated[i] { y1[i] } else { y0[i] };
        if y_factual[i] != expect {
            return Err(malformed(
                "unit table",
                &units_path,
                format!("unit {i}: factual outcome disagrees with its arm"),
            ));
        }
        if ite_true[i] != y1[i] - y0[i] {
            return Err(malformed(
                "unit table",
                &units_path,
                format!("unit {i}: stored effect is not y1 - y0"),
            ));
        }
    }

    Ok((
        NetDataset {
            x,
            graph,
            treated,
            y_factual,
            y0,
            y1,
            ite_true,
            propensity,
        },
        cfg,
    ))
}

/// One row of an estimates table, covering in-sample and held-out units.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub id: u32,
    pub treated: bool,
    pub y: f64,
    pub y1_hat: f64,
    pub y0_hat: f64,
    pub ite_hat: f64,
}

/// Merge estimates with the dataset's observed columns, sorted by unit id.
pub fn estimate_rows(
    ds: &NetDataset,
    estimates: &[&EffectEstimate],
) -> Result<Vec<EstimateRow>> {
    let mut rows = Vec::new();
    for est in estimates {
        for (row, &id) in est.ids.iter().enumerate() {
            let i = id as usize;
            if i >= ds.len() {
                return Err(Error::NodeOutOfRange {
                    node: id,
                    nodes: ds.len(),
                });
            }
            rows.push(EstimateRow {
                id,
                treated: ds.treated[i],
                y: ds.y_factual[i],
                y1_hat: est.y1_hat[row],
                y0_hat: est.y0_hat[row],
                ite_hat: est.ite_hat[row],
            });
        }
    }
    rows.sort_by_key(|r| r.id);
    Ok(rows)
}

/// Write an estimates table: CSV rows, then one trailing `# {json}` line of
/// run metadata.
pub fn write_estimates_csv(
    path: &Path,
    rows: &[EstimateRow],
    metadata: &serde_json::Value,
    force: bool,
) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut w = BufWriter::new(&mut out);
        writeln!(w, "id,t,y,y1_hat,y0_hat,ite_hat").map_err(|e| Error::io("rendering estimates", e))?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.id,
                u8::from(r.treated),
                r.y,
                r.y1_hat,
                r.y0_hat,
                r.ite_hat
            )
            .map_err(|e| Error::io("rendering estimates", e))?;
        }
        let meta = serde_json::to_string(metadata)
            .map_err(|e| Error::json("serializing estimate metadata", e))?;
        writeln!(w, "# {meta}").map_err(|e| Error::io("rendering estimates", e))?;
    }
    atomic_write(path, &out, force)
}

/// Read back an estimates table and its metadata line.
pub fn read_estimates_csv(path: &Path) -> Result<(Vec<EstimateRow>, serde_json::Value)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut rows = Vec::new();
    let mut metadata = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if idx == 0 {
            if line != "id,t,y,y1_hat,y0_hat,ite_hat" {
                return Err(malformed("estimates table", path, "unexpected header"));
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            metadata = Some(serde_json::from_str(rest).map_err(|e| {
                Error::json(format!("parsing metadata in {}", path.display()), e)
            })?);
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(malformed(
                "estimates table",
                path,
                format!("line {line_no}: expected 6 columns"),
            ));
        }
        rows.push(EstimateRow {
            id: fields[0].parse().map_err(|_| {
                malformed("estimates table", path, format!("line {line_no}: bad id"))
            })?,
            treated: fields[1] == "1",
            y: parse_f64(fields[2], "estimates table", path, line_no)?,
            y1_hat: parse_f64(fields[3], "estimates table", path, line_no)?,
            y0_hat: parse_f64(fields[4], "estimates table", path, line_no)?,
            ite_hat: parse_f64(fields[5], "estimates table", path, line_no)?,
        });
    }
    let metadata =
        metadata.ok_or_else(|| malformed("estimates table", path, "missing metadata line"))?;
    Ok((rows, metadata))
}

/// Persist encoder hyperplanes plus role vectors as one binary state file.
pub fn save_encoder_state(
    path: &Path,
    encoder: &RhptEncoder,
    roles: &RoleVectors,
    force: bool,
) -> Result<()> {
    roles.validate()?;
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(ENCODER_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(encoder.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(encoder.code_dim() as u32).to_le_bytes());
    out.extend_from_slice(&encoder.lambda().to_le_bytes());
    out.extend_from_slice(&encoder.seed().to_le_bytes());
    for v in encoder.normals() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in encoder.offsets() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for psi in [&roles.psi0, &roles.psi1, &roles.psi2] {
        psi.write_to(&mut out)
            .map_err(|e| Error::io("rendering encoder state", e))?;
    }
    atomic_write(path, &out, force)
}

pub fn load_encoder_state(path: &Path) -> Result<(RhptEncoder, RoleVectors)> {
    let file =
        fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut r = BufReader::new(file);
    let bad = |reason: &str| malformed("encoder state", path, reason);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io("reading encoder magic", e))?;
    if &magic != ENCODER_MAGIC {
        return Err(bad("wrong magic bytes"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)
        .map_err(|e| Error::io("reading encoder version", e))?;
    if u32::from_le_bytes(u32buf) != FORMAT_VERSION {
        return Err(bad("unsupported version"));
    }
    r.read_exact(&mut u32buf)
        .map_err(|e| Error::io("reading encoder dims", e))?;
    let d = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)
        .map_err(|e| Error::io("reading encoder dims", e))?;
    let beta = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)
        .map_err(|e| Error::io("reading encoder lambda", e))?;
    let lambda = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf)
        .map_err(|e| Error::io("reading encoder seed", e))?;
    let seed = u64::from_le_bytes(f64buf);

    if d == 0 || beta == 0 {
        return Err(bad("zero dimensions"));
    }
    let mut q = Vec::with_capacity(beta * d);
    for _ in 0..beta * d {
        r.read_exact(&mut f64buf)
            .map_err(|e| Error::io("reading encoder normals", e))?;
        q.push(f64::from_le_bytes(f64buf));
    }
    let mut gamma = Vec::with_capacity(beta);
    for _ in 0..beta {
        r.read_exact(&mut f64buf)
            .map_err(|e| Error::io("reading encoder offsets", e))?;
        gamma.push(f64::from_le_bytes(f64buf));
    }
    let encoder = RhptEncoder::from_parts(d, beta, lambda, seed, q, gamma)?;
    let psi0 = Hypervector::read_from(&mut r)?;
    let psi1 = Hypervector::read_from(&mut r)?;
    let psi2 = Hypervector::read_from(&mut r)?;
    let roles = RoleVectors { psi0, psi1, psi2 };
    roles.validate()?;
    if roles.dim() != beta {
        return Err(bad("role dimension disagrees with code dimension"));
    }
    Ok((encoder, roles))
}

/// Write a code file: magic, count, then each vector in wire format
/// (little-endian u32 dimension, then packed little-endian u64 words).
pub fn write_codes(path: &Path, codes: &[Hypervector], force: bool) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(CODES_MAGIC);
    out.extend_from_slice(&(codes.len() as u32).to_le_bytes());
    for c in codes {
        c.write_to(&mut out)
            .map_err(|e| Error::io("rendering codes", e))?;
    }
    atomic_write(path, &out, force)
}

pub fn read_codes(path: &Path) -> Result<Vec<Hypervector>> {
    let file =
        fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io("reading codes magic", e))?;
    if &magic != CODES_MAGIC {
        return Err(malformed("code file", path, "wrong magic bytes"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)
        .map_err(|e| Error::io("reading code count", e))?;
    let count = u32::from_le_bytes(u32buf) as usize;
    let mut codes = Vec::with_capacity(count);
    for _ in 0..count {
        codes.push(Hypervector::read_from(&mut r)?);
    }
    Ok(codes)
}

pub const RAW_SWEEP_FILE: &str = "raw.csv";
pub const TIMINGS_SWEEP_FILE: &str = "timings.csv";
pub const AGGREGATED_SWEEP_FILE: &str = "aggregated.csv";

/// Write the three sweep tables into a directory. `raw.csv` carries only
/// deterministic columns; wall-clock measurements live in `timings.csv`.
pub fn write_sweep_outcome(dir: &Path, outcome: &SweepOutcome, force: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;

    let mut raw = String::from("cell,seed,eps_ate_in,eps_pehe_in,eps_ate_out,eps_pehe_out\n");
    for r in &outcome.rows {
        raw.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cell, r.seed, r.eps_ate_in, r.eps_pehe_in, r.eps_ate_out, r.eps_pehe_out
        ));
    }
    atomic_write(&dir.join(RAW_SWEEP_FILE), raw.as_bytes(), force)?;

    let mut tim = String::from("cell,seed,encode_ms,match_ms,total_ms\n");
    for t in &outcome.timings {
        tim.push_str(&format!(
            "{},{},{},{},{}\n",
            t.cell, t.seed, t.encode_ms, t.match_ms, t.total_ms
        ));
    }
    atomic_write(&dir.join(TIMINGS_SWEEP_FILE), tim.as_bytes(), force)?;

    let mut agg = String::from(
        "cell,runs,eps_ate_in_mean,eps_ate_in_se,eps_pehe_in_mean,eps_pehe_in_se,\
         eps_ate_out_mean,eps_ate_out_se,eps_pehe_out_mean,eps_pehe_out_se\n",
    );
    for a in &outcome.aggregates {
        agg.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            a.cell,
            a.runs,
            a.eps_ate_in_mean,
            a.eps_ate_in_se,
            a.eps_pehe_in_mean,
            a.eps_pehe_in_se,
            a.eps_ate_out_mean,
            a.eps_ate_out_se,
            a.eps_pehe_out_mean,
            a.eps_pehe_out_se
        ));
    }
    atomic_write(&dir.join(AGGREGATED_SWEEP_FILE), agg.as_bytes(), force)
}
