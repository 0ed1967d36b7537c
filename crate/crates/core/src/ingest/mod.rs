//! Normalization of legacy sources into canonical transactions.
//!
//! Each data row becomes its own transaction through the constraint engine.
//! Rows that cannot be mapped without guessing, or whose transaction is
//! rejected, are quarantined with a reason; nothing is coerced silently.
//! Natural-key upserts make re-running a file a no-op.

pub mod cells;
pub mod ctg;
pub mod realign;
mod rows;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::constraint::{apply_transaction, Op};
use crate::store::CanonicalStore;
use crate::time::Timestamp;

pub use cells::{
    normalize_cell, parse_apgar, parse_bool, reconcile_flag_value, Apgar, BoolEncoding, ColumnPolicy, Episode, Flag,
    Normalized, Reconciled, Typed, ValueKind, Vocabulary,
};
pub use ctg::{ingest_ctg, CtgOutcome, CtgRow};
pub use realign::{realign_ehr_row, Domain, Realigned};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    FirstTrimesterSheet,
    DeliverySheet,
    EhrExport,
    CtgExport,
}

impl SourceKind {
    pub const ALL: [SourceKind; 4] =
        [SourceKind::FirstTrimesterSheet, SourceKind::DeliverySheet, SourceKind::EhrExport, SourceKind::CtgExport];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::FirstTrimesterSheet => "first_trimester_sheet",
            SourceKind::DeliverySheet => "delivery_sheet",
            SourceKind::EhrExport => "ehr_export",
            SourceKind::CtgExport => "ctg_export",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_lowercase().replace('-', "_");
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.as_str().rsplit_once('_').is_some_and(|(head, _)| head == s))
            .ok_or_else(|| IngestError::InvalidConfig(format!("unknown source kind `{s}`")))
    }
}

/// Where a source-local identifier points in the canonical store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrosswalkTarget {
    Patient { tc: String },
    Newborn { tc: String, first_exam_date: NaiveDate, birth_time: Timestamp },
}

/// Identifies the delivery a CTG export belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtgSettings {
    pub patient_tc: String,
    pub first_exam_date: NaiveDate,
    pub start_time: Timestamp,
    #[serde(default = "default_hz")]
    pub sample_hz: f64,
}

fn default_hz() -> f64 {
    4.0
}

fn default_marker() -> String {
    "Newborn Section".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub source_kind: SourceKind,
    /// Normalized header label → target field.
    #[serde(default)]
    pub header_synonyms: BTreeMap<String, String>,
    /// Target field → policy.
    #[serde(default)]
    pub column_policies: BTreeMap<String, ColumnPolicy>,
    #[serde(default)]
    pub id_crosswalk: BTreeMap<String, CrosswalkTarget>,
    #[serde(default)]
    pub ctg: Option<CtgSettings>,
    #[serde(default = "default_marker")]
    pub section_marker: String,
}

/// Lowercases, drops punctuation, collapses whitespace.
pub fn normalize_label(label: &str) -> String {
    let cleaned: String = label
        .trim_start_matches('\u{feff}')
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_lowercase().next().unwrap_or(c) } else { ' ' })
        .collect();
    let cleaned = cleaned.replace(['à', 'á'], "a").replace(['è', 'é'], "e").replace('ì', "i").replace('ò', "o").replace('ù', "u");
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl SourceConfig {
    /// The built-in configuration for a source kind.
    pub fn for_kind(kind: SourceKind) -> Self {
        let mut config = SourceConfig {
            source_kind: kind,
            header_synonyms: BTreeMap::new(),
            column_policies: BTreeMap::new(),
            id_crosswalk: BTreeMap::new(),
            ctg: None,
            section_marker: default_marker(),
        };
        for spec in rows::columns(kind) {
            config.column_policies.insert(spec.target.to_string(), spec.policy.clone());
            config.header_synonyms.insert(normalize_label(spec.target), spec.target.to_string());
            for s in spec.synonyms {
                config.header_synonyms.insert(normalize_label(s), spec.target.to_string());
            }
        }
        config
    }

    /// Fills anything the user config left out from the built-in defaults.
    /// User entries win.
    pub fn with_defaults(mut self) -> Self {
        let base = SourceConfig::for_kind(self.source_kind);
        for (k, v) in base.header_synonyms {
            self.header_synonyms.entry(k).or_insert(v);
        }
        for (k, v) in base.column_policies {
            self.column_policies.entry(k).or_insert(v);
        }
        self.header_synonyms = self.header_synonyms.into_iter().map(|(k, v)| (normalize_label(&k), v)).collect();
        self
    }

    /// Every configured column must name a known target.
    pub fn validate(&self) -> Result<(), IngestError> {
        let known: Vec<&str> = rows::columns(self.source_kind).iter().map(|c| c.target).collect();
        for target in self.header_synonyms.values().chain(self.column_policies.keys()) {
            if !known.contains(&target.as_str()) {
                return Err(IngestError::InvalidConfig(format!(
                    "`{target}` is not a target of {} sources",
                    self.source_kind
                )));
            }
        }
        if self.source_kind == SourceKind::CtgExport && self.ctg.is_none() {
            return Err(IngestError::InvalidConfig("ctg_export sources need a `ctg` section".into()));
        }
        Ok(())
    }

    fn target_of(&self, header: &str) -> Option<&str> {
        self.header_synonyms.get(&normalize_label(header)).map(String::as_str)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("unknown header layout: {0}")]
    UnknownLayout(String),
    #[error("invalid ingestion config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedRow {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub cells: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub row: usize,
    pub field: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairNote {
    pub row: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedColumn {
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub source_kind: Option<SourceKind>,
    pub header: Vec<String>,
    pub rows: usize,
    pub accepted: usize,
    pub repaired: usize,
    pub quarantined: Vec<QuarantinedRow>,
    pub conflicts: Vec<ConflictRecord>,
    /// One entry per repaired row, listing every transformation applied.
    pub repairs: Vec<RepairNote>,
    pub records_inserted: usize,
    pub records_updated: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quarantined_columns: Vec<QuarantinedColumn>,
    /// Rows with no observed value (CTG only); counted as accepted.
    #[serde(default)]
    pub skipped_empty: usize,
}

impl IngestionReport {
    /// accepted + repaired + quarantined = rows.
    pub fn reconciles(&self) -> bool {
        self.accepted + self.repaired + self.quarantined.len() == self.rows
    }

    pub fn records_written(&self) -> usize {
        self.records_inserted + self.records_updated
    }

    /// The quarantined rows as CSV: input columns plus `reason`.
    pub fn quarantine_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let mut header = self.header.clone();
        header.push("reason".into());
        w.write_record(&header).expect("in-memory write");
        for q in &self.quarantined {
            let mut cells = q.cells.clone();
            cells.resize(self.header.len(), String::new());
            cells.push(q.reason.clone());
            w.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

#[allow(clippy::byte_char_slices)]
fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().next().unwrap_or_default();
    [b',', b';', b'\t']
        .into_iter()
        .max_by_key(|d| first.bytes().filter(|b| b == d).count())
        .unwrap_or(b',')
}

/// Header plus data rows, delimiter auto-detected among comma, semicolon, tab.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), IngestError> {
    let text = text.trim_start_matches('\u{feff}');
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> =
        reader.headers().map_err(|e| IngestError::Csv(e.to_string()))?.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(IngestError::UnknownLayout("missing header row".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Column index of each target present in the header.
pub(crate) fn resolve_header(header: &[String], config: &SourceConfig) -> Result<BTreeMap<String, usize>, IngestError> {
    let mut out = BTreeMap::new();
    for (i, h) in header.iter().enumerate() {
        if let Some(target) = config.target_of(h) {
            if let Some(prev) = out.insert(target.to_string(), i) {
                return Err(IngestError::UnknownLayout(format!(
                    "columns `{}` and `{h}` both map to `{target}`",
                    header[prev]
                )));
            }
        }
    }
    Ok(out)
}

/// Runs a whole source through the constraint engine row by row.
pub fn run_ingestion(
    text: &str,
    config: &SourceConfig,
    store: &CanonicalStore,
) -> Result<(CanonicalStore, IngestionReport), IngestError> {
    let config = config.clone().with_defaults();
    config.validate()?;
    let (header, data) = read_table(text)?;
    let columns = resolve_header(&header, &config)?;
    let mut report = IngestionReport {
        source_kind: Some(config.source_kind),
        header: header.clone(),
        rows: data.len(),
        ..Default::default()
    };

    if config.source_kind == SourceKind::CtgExport {
        let store = ctg::run(&header, &data, &columns, &config, store, &mut report)?;
        return Ok((store, report));
    }

    let layout = rows::layout(config.source_kind, &columns)?;
    let mut current = store.clone();
    for (i, raw) in data.iter().enumerate() {
        let row_no = i + 1;
        let quarantine = |report: &mut IngestionReport, reason: String| {
            report.quarantined.push(QuarantinedRow { row: row_no, cells: raw.clone(), reason });
        };
        let row = rows::Row { cells: raw, columns: &columns, config: &config };
        let mapped = match rows::map_row(layout, &row, &current) {
            Ok(m) => m,
            Err(reason) => {
                quarantine(&mut report, reason);
                continue;
            }
        };
        if !mapped.conflicts.is_empty() {
            let reason = mapped
                .conflicts
                .iter()
                .map(|c| format!("{} conflict: {}", c.field, c.values.join(" vs ")))
                .collect::<Vec<_>>()
                .join("; ");
            report.conflicts.extend(mapped.conflicts.into_iter().map(|c| ConflictRecord { row: row_no, ..c }));
            quarantine(&mut report, reason);
            continue;
        }
        match apply_transaction(&current, &mapped.tx) {
            Ok(next) => {
                current = next;
                for op in &mapped.tx.ops {
                    match op {
                        Op::Insert { .. } => report.records_inserted += 1,
                        Op::Update { .. } => report.records_updated += 1,
                        Op::Delete { .. } => {}
                    }
                }
                if mapped.repairs.is_empty() {
                    report.accepted += 1;
                } else {
                    report.repaired += 1;
                    report.repairs.push(RepairNote { row: row_no, notes: mapped.repairs });
                }
            }
            Err(e) => {
                let reason = match &e {
                    crate::constraint::TxError::Rejected(v) => {
                        v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
                    }
                    other => other.to_string(),
                };
                quarantine(&mut report, reason);
            }
        }
    }
    Ok((current, report))
}

/// [`run_ingestion`] over a file on disk.
pub fn run_ingestion_file(
    path: &Path,
    config: &SourceConfig,
    store: &CanonicalStore,
) -> Result<(CanonicalStore, IngestionReport), IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    run_ingestion(&text, config, store)
}
