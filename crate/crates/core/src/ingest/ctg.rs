//! Cardiotocography exports: one tracing per file, one row per sample.
//!
//! Maternal channels go to `measurement`; each fetal heart rate column is
//! attached to a newborn through the id crosswalk. A fetal column the
//! crosswalk cannot place is dropped as a whole and reported, never guessed.

use std::collections::{BTreeMap, BTreeSet};

use super::cells::{normalize_cell, Normalized, Typed};
use super::{
    normalize_label, IngestError, IngestionReport, QuarantinedColumn, QuarantinedRow, SourceConfig, CrosswalkTarget,
};
use crate::constraint::{apply_transaction, Op, Transaction, TxError};
use crate::model::{Measurement, NewbornMeasurement, PregnancyId, TaxCode, Tracing, TracingId};
use crate::store::{CanonicalStore, Record, Sequence};
use crate::time::Timestamp;

/// One parsed sample. Fetal values are keyed by source column label.
#[derive(Debug, Clone, PartialEq)]
pub struct CtgRow {
    pub ts: Timestamp,
    pub maternal_heart_rate: Option<i32>,
    pub maternal_tocography: Option<f64>,
    pub fetal: BTreeMap<String, i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtgOutcome {
    pub transaction: Transaction,
    pub tracing_id: TracingId,
    pub measurements: usize,
    pub newborn_measurements: usize,
    pub skipped_empty: usize,
    pub quarantined_columns: Vec<QuarantinedColumn>,
}

fn is_fetal(label: &str) -> bool {
    let l = normalize_label(label);
    l.starts_with("fhr") || l.starts_with("fetal heart rate") || l.starts_with("fc fetale")
}

/// Builds the tracing transaction for parsed samples. Existing tracings
/// (same pregnancy and start) and identical samples are reused.
pub fn ingest_ctg(rows: &[CtgRow], config: &SourceConfig, store: &CanonicalStore) -> Result<CtgOutcome, IngestError> {
    let settings = config.ctg.as_ref().ok_or_else(|| IngestError::InvalidConfig("missing `ctg` section".into()))?;
    let tc = TaxCode::new(&settings.patient_tc);
    let pregnancy = store.pregnancy_by_natural_key(&tc, settings.first_exam_date).ok_or_else(|| {
        IngestError::InvalidConfig(format!("no pregnancy for patient {tc} with first exam on {}", settings.first_exam_date))
    })?;
    let pregnancy_id: PregnancyId = pregnancy.id;

    let mut tx = Transaction::new();
    let tracing_id = match store
        .tracings()
        .values()
        .find(|t| t.pregnancy_id == pregnancy_id && t.start_time == settings.start_time)
    {
        Some(t) => t.tracing_id,
        None => {
            let id = store.next_id(Sequence::Tracing);
            tx.insert(Tracing { tracing_id: id, pregnancy_id, start_time: settings.start_time });
            id
        }
    };

    let labels: BTreeSet<&String> = rows.iter().flat_map(|r| r.fetal.keys()).collect();
    let mut resolved: BTreeMap<&str, Timestamp> = BTreeMap::new();
    let mut quarantined_columns = Vec::new();
    for label in labels {
        let target = config
            .id_crosswalk
            .get(label.as_str())
            .or_else(|| config.id_crosswalk.iter().find(|(k, _)| normalize_label(k) == normalize_label(label)).map(|(_, v)| v));
        let reason = match target {
            None => Some("no crosswalk entry for this fetal channel".to_string()),
            Some(CrosswalkTarget::Patient { .. }) => Some("crosswalk points to a patient, not a newborn".into()),
            Some(CrosswalkTarget::Newborn { tc: ntc, first_exam_date, birth_time }) => {
                if TaxCode::new(ntc) != tc || *first_exam_date != settings.first_exam_date {
                    Some("crosswalk points to a newborn of a different pregnancy".into())
                } else if !store.newborns().contains_key(&(pregnancy_id, *birth_time)) {
                    Some(format!("no newborn born at {birth_time} for this pregnancy"))
                } else {
                    resolved.insert(label.as_str(), *birth_time);
                    None
                }
            }
        };
        if let Some(reason) = reason {
            quarantined_columns.push(QuarantinedColumn { column: label.clone(), reason });
        }
    }

    let push = |tx: &mut Transaction, record: Record| match store.get(&record.key()) {
        Some(old) if old == record => {}
        Some(_) => {
            tx.update(record);
        }
        None => {
            tx.insert(record);
        }
    };
    let (mut measurements, mut newborn_measurements, mut skipped_empty) = (0, 0, 0);
    for row in rows {
        let fetal: Vec<(Timestamp, i32)> =
            row.fetal.iter().filter_map(|(l, v)| resolved.get(l.as_str()).map(|b| (*b, *v))).collect();
        if row.maternal_heart_rate.is_none() && row.maternal_tocography.is_none() && fetal.is_empty() {
            skipped_empty += 1;
            continue;
        }
        let m = Measurement {
            tracing_id,
            ts: row.ts,
            maternal_heart_rate: row.maternal_heart_rate,
            maternal_tocography: row.maternal_tocography,
        };
        push(&mut tx, m.into());
        measurements += 1;
        for (birth_time, fhr) in fetal {
            let nm = NewbornMeasurement { tracing_id, ts: row.ts, pregnancy_id, birth_time, fetal_heart_rate: fhr };
            push(&mut tx, nm.into());
            newborn_measurements += 1;
        }
    }
    Ok(CtgOutcome { transaction: tx, tracing_id, measurements, newborn_measurements, skipped_empty, quarantined_columns })
}

fn parse_row(
    i: usize,
    raw: &[String],
    columns: &BTreeMap<String, usize>,
    fetal: &[(usize, String)],
    config: &SourceConfig,
) -> Result<CtgRow, String> {
    let settings = config.ctg.as_ref().expect("validated config");
    let cell = |idx: usize| raw.get(idx).map(String::as_str).unwrap_or("");
    let get = |target: &str| -> Result<Option<Typed>, String> {
        let Some(&idx) = columns.get(target) else { return Ok(None) };
        match normalize_cell(cell(idx), &config.column_policies[target]) {
            Normalized::Missing => Ok(None),
            Normalized::Value(v) => Ok(Some(v)),
            Normalized::Conflict { token, reason } => Err(format!("{target}: `{token}` {reason}")),
        }
    };
    let ts = match get("time")? {
        Some(Typed::Text(t)) => match t.replace(',', ".").parse::<f64>() {
            Ok(s) if s.is_finite() => settings.start_time.plus_millis((s * 1000.0).round() as i64),
            _ => Timestamp::parse(&t).map_err(|e| format!("time: {e}"))?,
        },
        Some(other) => return Err(format!("time: unexpected {other:?}")),
        None if columns.contains_key("time") => return Err("time is missing".into()),
        None => settings.start_time.plus_millis((i as f64 * 1000.0 / settings.sample_hz).round() as i64),
    };
    let maternal_heart_rate = match get("maternal_heart_rate")? {
        None => None,
        Some(Typed::Int(v)) => Some(i32::try_from(v).map_err(|_| format!("maternal_heart_rate: {v} out of range"))?),
        Some(other) => return Err(format!("maternal_heart_rate: unexpected {other:?}")),
    };
    let maternal_tocography = match get("maternal_tocography")? {
        None => None,
        Some(Typed::Decimal(v)) => Some(v),
        Some(Typed::Int(v)) => Some(v as f64),
        Some(other) => return Err(format!("maternal_tocography: unexpected {other:?}")),
    };
    let mut out = BTreeMap::new();
    for (idx, label) in fetal {
        let t = cell(*idx).trim();
        if super::cells::is_universal_missing(t) {
            continue;
        }
        let v = t.parse::<i32>().map_err(|_| format!("{label}: `{t}` is not an integer"))?;
        out.insert(label.clone(), v);
    }
    Ok(CtgRow { ts, maternal_heart_rate, maternal_tocography, fetal: out })
}

pub(crate) fn run(
    header: &[String],
    data: &[Vec<String>],
    columns: &BTreeMap<String, usize>,
    config: &SourceConfig,
    store: &CanonicalStore,
    report: &mut IngestionReport,
) -> Result<CanonicalStore, IngestError> {
    let fetal: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter(|(i, h)| !columns.values().any(|c| c == i) && (is_fetal(h) || config.id_crosswalk.contains_key(h.trim())))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    if !columns.contains_key("maternal_heart_rate") && !columns.contains_key("maternal_tocography") && fetal.is_empty() {
        return Err(IngestError::UnknownLayout("CTG export has no heart rate or tocography column".into()));
    }

    let mut parsed = Vec::new();
    let mut parsed_rows = Vec::new();
    for (i, raw) in data.iter().enumerate() {
        match parse_row(i, raw, columns, &fetal, config) {
            Ok(r) => {
                parsed.push(r);
                parsed_rows.push(i);
            }
            Err(reason) => report.quarantined.push(QuarantinedRow { row: i + 1, cells: raw.clone(), reason }),
        }
    }
    let outcome = ingest_ctg(&parsed, config, store)?;
    report.quarantined_columns = outcome.quarantined_columns.clone();

    match apply_transaction(store, &outcome.transaction) {
        Ok(next) => {
            for op in &outcome.transaction.ops {
                match op {
                    Op::Insert { .. } => report.records_inserted += 1,
                    Op::Update { .. } => report.records_updated += 1,
                    Op::Delete { .. } => {}
                }
            }
            report.accepted += parsed.len();
            report.skipped_empty = outcome.skipped_empty;
            Ok(next)
        }
        Err(e) => {
            let reason = match &e {
                TxError::Rejected(v) => v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
                other => other.to_string(),
            };
            for i in parsed_rows {
                report.quarantined.push(QuarantinedRow { row: i + 1, cells: data[i].clone(), reason: reason.clone() });
            }
            report.quarantined.sort_by_key(|q| q.row);
            Ok(store.clone())
        }
    }
}
