//! Study directories, manifests and CSV helpers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abm::SimOutcome;
use crate::design::DesignMatrix;
use crate::emulator::TrainingData;
use crate::error::{Error, Result};
use crate::population::{N_SVI_BINS, SVI_BIN_LABELS};
use crate::stats;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Csv {
        file: file_label(path),
        line,
        msg: e.to_string(),
    }
}

pub(crate) fn csv_msg(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Csv {
        file: file_label(path),
        line,
        msg: msg.into(),
    }
}

/// Parses every field of a record as `f64`.
pub(crate) fn parse_record(path: &Path, line: u64, rec: &csv::StringRecord) -> Result<Vec<f64>> {
    rec.iter()
        .enumerate()
        .map(|(i, f)| {
            f.trim().parse::<f64>().map_err(|_| {
                csv_msg(
                    path,
                    line,
                    format!("field {} = {f:?} is not a number", i + 1),
                )
            })
        })
        .collect()
}

pub const STUDY_SCHEMA_VERSION: u32 = 1;

pub const DESIGN_FILE: &str = "design.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const DAILY_FILE: &str = "daily.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    crate::population::hex_digest(bytes)
}

/// Hash of a file's bytes, or an error naming it.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    Ok(sha256_hex(&bytes))
}

/// Provenance for a study or artifact. `run_id` hashes everything except
/// the timestamp, so rewriting identical content reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub input_hashes: BTreeMap<String, String>,
    pub artifact_hashes: BTreeMap<String, String>,
    pub created_unix: u64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        Self {
            schema_version: STUDY_SCHEMA_VERSION,
            run_id: String::new(),
            command: command.into(),
            config,
            seeds,
            input_hashes: BTreeMap::new(),
            artifact_hashes: BTreeMap::new(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn with_input(mut self, name: &str, path: &Path) -> Result<Self> {
        self.input_hashes.insert(name.to_string(), file_hash(path)?);
        Ok(self)
    }

    pub fn compute_run_id(&self) -> String {
        // serde_json::Value maps are sorted, so this is canonical.
        let v = serde_json::json!({
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "input_hashes": self.input_hashes,
            "artifact_hashes": self.artifact_hashes,
            "tool_version": self.tool_version,
        });
        sha256_hex(v.to_string().as_bytes())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        check_version(&v, STUDY_SCHEMA_VERSION)?;
        Ok(serde_json::from_value(v)?)
    }
}

/// Rejects a JSON artifact whose `schema_version` differs from `supported`.
pub(crate) fn check_version(v: &serde_json::Value, supported: u32) -> Result<()> {
    let found = v
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::InvalidConfig("artifact has no schema_version".into()))?
        as u32;
    if found != supported {
        return Err(Error::SchemaVersion { found, supported });
    }
    Ok(())
}

/// One simulated replicate at one design row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub row_id: usize,
    pub replicate: usize,
    pub n_agents: usize,
    pub cumulative_infections: u64,
    pub cumulative_diagnoses: u64,
    pub attack_svi: [f64; N_SVI_BINS],
    pub svi_variance: f64,
    pub boosted_fraction: f64,
}

impl OutcomeRow {
    pub fn from_outcome(row_id: usize, replicate: usize, o: &SimOutcome) -> Self {
        Self {
            row_id,
            replicate,
            n_agents: o.n_agents,
            cumulative_infections: o.cumulative_infections,
            cumulative_diagnoses: o.cumulative_diagnoses,
            attack_svi: o.attack_rate_by_svi,
            svi_variance: o.svi_variance,
            boosted_fraction: o.boosted_fraction,
        }
    }

    pub fn attack_rate(&self) -> f64 {
        self.cumulative_infections as f64 / self.n_agents as f64
    }
}

const OUTCOME_HEADER: [&str; 11] = [
    "row_id",
    "replicate",
    "n_agents",
    "cumulative_infections",
    "cumulative_diagnoses",
    "attack_svi_0",
    "attack_svi_1",
    "attack_svi_2",
    "attack_svi_3",
    "svi_variance",
    "boosted_fraction",
];

/// Replicated outcomes keyed by design row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeTable {
    pub rows: Vec<OutcomeRow>,
}

impl OutcomeTable {
    pub fn new(rows: Vec<OutcomeRow>) -> Self {
        Self { rows }
    }

    /// Sorted distinct row ids.
    pub fn row_ids(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.rows.iter().map(|r| r.row_id).collect();
        set.into_iter().collect()
    }

    /// Rows grouped by row id, replicates in order.
    pub fn grouped(&self) -> BTreeMap<usize, Vec<&OutcomeRow>> {
        let mut m: BTreeMap<usize, Vec<&OutcomeRow>> = BTreeMap::new();
        for r in &self.rows {
            m.entry(r.row_id).or_default().push(r);
        }
        for v in m.values_mut() {
            v.sort_by_key(|r| r.replicate);
        }
        m
    }

    /// Checks for duplicate (row_id, replicate) pairs and a uniform replicate
    /// count, which is returned.
    pub fn replicates(&self) -> Result<usize> {
        let mut seen = BTreeSet::new();
        for r in &self.rows {
            if !seen.insert((r.row_id, r.replicate)) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate outcome for row_id {} replicate {}",
                    r.row_id, r.replicate
                )));
            }
        }
        let g = self.grouped();
        let mut counts = g.values().map(Vec::len);
        let Some(first) = counts.next() else {
            return Err(Error::Empty("outcome table".into()));
        };
        if counts.any(|c| c != first) {
            return Err(Error::InvalidConfig(
                "replicate counts differ between design rows".into(),
            ));
        }
        Ok(first)
    }

    pub fn n_agents(&self) -> Result<usize> {
        let n = self
            .rows
            .first()
            .map(|r| r.n_agents)
            .ok_or_else(|| Error::Empty("outcome table".into()))?;
        if self.rows.iter().any(|r| r.n_agents != n) {
            return Err(Error::InvalidConfig("outcomes mix population sizes".into()));
        }
        Ok(n)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| Error::InvalidConfig(e.to_string());
        w.write_record(OUTCOME_HEADER).map_err(wrap)?;
        for r in &self.rows {
            let mut rec = vec![
                r.row_id.to_string(),
                r.replicate.to_string(),
                r.n_agents.to_string(),
                r.cumulative_infections.to_string(),
                r.cumulative_diagnoses.to_string(),
            ];
            rec.extend(r.attack_svi.iter().map(f64::to_string));
            rec.push(r.svi_variance.to_string());
            rec.push(r.boosted_fraction.to_string());
            w.write_record(&rec).map_err(wrap)?;
        }
        w.into_inner()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv_bytes()?)
    }

    /// Reads outcomes; columns are matched by name so their order is free.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
        let mut idx = [0usize; 11];
        for (k, name) in OUTCOME_HEADER.iter().enumerate() {
            idx[k] = headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| csv_msg(path, 1, format!("missing column `{name}`")))?;
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let v = parse_record(path, line, &rec)?;
            let int = |k: usize| -> Result<u64> {
                let x = v[idx[k]];
                if x < 0.0 || x.fract() != 0.0 {
                    return Err(csv_msg(
                        path,
                        line,
                        format!("`{}` must be a non-negative integer", OUTCOME_HEADER[k]),
                    ));
                }
                Ok(x as u64)
            };
            rows.push(OutcomeRow {
                row_id: int(0)? as usize,
                replicate: int(1)? as usize,
                n_agents: int(2)? as usize,
                cumulative_infections: int(3)?,
                cumulative_diagnoses: int(4)?,
                attack_svi: [v[idx[5]], v[idx[6]], v[idx[7]], v[idx[8]]],
                svi_variance: v[idx[9]],
                boosted_fraction: v[idx[10]],
            });
        }
        Ok(Self { rows })
    }

    /// Pairs outcomes with design rows (matched by row id) for emulator fitting.
    pub fn training_data(&self, row_ids: &[usize], design: &DesignMatrix) -> Result<TrainingData> {
        check_row_ids(row_ids, self)?;
        self.replicates()?;
        let g = self.grouped();
        let n_agents = self.n_agents()?;
        let mut attack_rate = Vec::with_capacity(row_ids.len());
        let mut svi_variance = Vec::with_capacity(row_ids.len());
        for id in row_ids {
            let reps = &g[id];
            attack_rate.push(reps.iter().map(|r| r.attack_rate()).collect());
            svi_variance.push(reps.iter().map(|r| r.svi_variance).collect());
        }
        Ok(TrainingData {
            design: design.clone(),
            n_agents,
            attack_rate,
            svi_variance,
        })
    }
}

fn check_row_ids(design_ids: &[usize], outcomes: &OutcomeTable) -> Result<()> {
    let d: BTreeSet<usize> = design_ids.iter().copied().collect();
    if d.len() != design_ids.len() {
        return Err(Error::RowIdMismatch("design has duplicate row ids".into()));
    }
    let o: BTreeSet<usize> = outcomes.rows.iter().map(|r| r.row_id).collect();
    if let Some(id) = d.difference(&o).next() {
        return Err(Error::RowIdMismatch(format!(
            "design row {id} has no outcomes"
        )));
    }
    if let Some(id) = o.difference(&d).next() {
        return Err(Error::RowIdMismatch(format!(
            "outcome row {id} is not in the design"
        )));
    }
    Ok(())
}

/// Daily series sidecar: one line per (row_id, replicate, day).
pub fn write_daily_csv(path: &Path, runs: &[(usize, usize, &SimOutcome)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::InvalidConfig(e.to_string());
    w.write_record([
        "row_id",
        "replicate",
        "day",
        "new_infections",
        "diagnoses",
        "tests",
        "positives",
    ])
    .map_err(wrap)?;
    for (row_id, rep, o) in runs {
        for d in 0..o.daily_diagnoses.len() {
            w.write_record([
                row_id.to_string(),
                rep.to_string(),
                d.to_string(),
                o.daily_new_infections[d].to_string(),
                o.daily_diagnoses[d].to_string(),
                o.daily_tests[d].to_string(),
                o.daily_positives[d].to_string(),
            ])
            .map_err(wrap)?;
        }
    }
    write_atomic(
        path,
        &w.into_inner()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?,
    )
}

/// Sidecar path next to an outcomes file: `x.csv` → `x.daily.csv`.
pub fn daily_sidecar_path(outcomes: &Path) -> std::path::PathBuf {
    let stem = outcomes
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    outcomes.with_file_name(format!("{stem}.daily.csv"))
}

#[derive(Debug, Clone)]
pub struct Study {
    pub row_ids: Vec<usize>,
    pub design: DesignMatrix,
    pub outcomes: OutcomeTable,
    pub manifest: RunManifest,
    pub replicates: usize,
}

impl Study {
    pub fn training_data(&self) -> Result<TrainingData> {
        self.outcomes.training_data(&self.row_ids, &self.design)
    }
}

/// Writes `design.csv`, `outcomes.csv` and `manifest.json` into a temporary
/// sibling directory and renames it to `dir`. Returns the completed manifest.
pub fn write_study(
    dir: &Path,
    design: &DesignMatrix,
    outcomes: &OutcomeTable,
    manifest: &RunManifest,
) -> Result<RunManifest> {
    let ids: Vec<usize> = (0..design.n()).collect();
    check_row_ids(&ids, outcomes)?;
    outcomes.replicates()?;

    let parent = dir
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "study".into());
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let tmp = parent.join(format!(".{name}.tmp{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let result = (|| {
        design.write_csv(&tmp.join(DESIGN_FILE), false)?;
        outcomes.write_csv(&tmp.join(OUTCOMES_FILE))?;
        let mut m = manifest.clone();
        m.schema_version = STUDY_SCHEMA_VERSION;
        m.artifact_hashes
            .insert(DESIGN_FILE.into(), file_hash(&tmp.join(DESIGN_FILE))?);
        m.artifact_hashes
            .insert(OUTCOMES_FILE.into(), file_hash(&tmp.join(OUTCOMES_FILE))?);
        m.run_id = m.compute_run_id();
        write_atomic(&tmp.join(MANIFEST_FILE), m.to_json()?.as_bytes())?;
        Ok(m)
    })();
    let m = match result {
        Ok(m) => m,
        Err(e) => {
            let _ = std::fs::remove_dir_all(&tmp);
            return Err(e);
        }
    };
    if dir.exists() {
        let old = parent.join(format!(".{name}.old{}", std::process::id()));
        std::fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
        std::fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
        let _ = std::fs::remove_dir_all(&old);
    } else {
        std::fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(m)
}

pub fn load_study(dir: &Path) -> Result<Study> {
    let manifest = RunManifest::from_json(&read_text(&dir.join(MANIFEST_FILE))?)?;
    let (row_ids, design) = DesignMatrix::read_csv(&dir.join(DESIGN_FILE))?;
    let outcomes = OutcomeTable::read_csv(&dir.join(OUTCOMES_FILE))?;
    check_row_ids(&row_ids, &outcomes)?;
    let replicates = outcomes.replicates()?;
    log::info!(
        "loaded study {} with {} rows × {replicates} replicates",
        dir.display(),
        design.n()
    );
    Ok(Study {
        row_ids,
        design,
        outcomes,
        manifest,
        replicates,
    })
}

/// Replicate statistics at the status-quo policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub replicates: usize,
    pub n_agents: usize,
    pub infections_mean: f64,
    pub infections_sd: f64,
    pub attack_rate_mean: f64,
    pub svi_variance_mean: f64,
    pub svi_variance_sd: f64,
    pub diagnoses_mean: f64,
    pub attack_svi: Vec<SviAttack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SviAttack {
    pub label: String,
    pub mean: f64,
}

impl BaselineSummary {
    pub fn from_rows(rows: &[&OutcomeRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("baseline outcomes".into()));
        }
        let inf: Vec<f64> = rows
            .iter()
            .map(|r| r.cumulative_infections as f64)
            .collect();
        let svi: Vec<f64> = rows.iter().map(|r| r.svi_variance).collect();
        let diag: Vec<f64> = rows.iter().map(|r| r.cumulative_diagnoses as f64).collect();
        let n_agents = rows[0].n_agents;
        Ok(Self {
            replicates: rows.len(),
            n_agents,
            infections_mean: stats::mean(&inf),
            infections_sd: stats::sample_sd(&inf),
            attack_rate_mean: stats::mean(&inf) / n_agents as f64,
            svi_variance_mean: stats::mean(&svi),
            svi_variance_sd: stats::sample_sd(&svi),
            diagnoses_mean: stats::mean(&diag),
            attack_svi: SVI_BIN_LABELS
                .iter()
                .enumerate()
                .map(|(b, l)| SviAttack {
                    label: l.to_string(),
                    mean: stats::mean(&rows.iter().map(|r| r.attack_svi[b]).collect::<Vec<_>>()),
                })
                .collect(),
        })
    }

    pub fn from_outcomes(outcomes: &[SimOutcome]) -> Result<Self> {
        let rows: Vec<OutcomeRow> = outcomes
            .iter()
            .enumerate()
            .map(|(r, o)| OutcomeRow::from_outcome(0, r, o))
            .collect();
        Self::from_rows(&rows.iter().collect::<Vec<_>>())
    }

    /// Uses the study rows whose design point is the all-zero policy.
    pub fn from_study(study: &Study) -> Result<Self> {
        let g = study.outcomes.grouped();
        let rows: Vec<&OutcomeRow> = study
            .row_ids
            .iter()
            .zip(study.design.rows())
            .filter(|(_, x)| x.iter().all(|v| *v == 0.0))
            .flat_map(|(id, _)| g.get(id).into_iter().flatten().copied())
            .collect();
        if rows.is_empty() {
            return Err(Error::Empty(
                "study has no baseline (all-zero) design row".into(),
            ));
        }
        Self::from_rows(&rows)
    }
}
