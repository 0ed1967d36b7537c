//! Realignment of EHR rows whose section cells drifted out of their columns.
//!
//! The export repeats a sentinel label (the section name) inside the data.
//! When the sentinel sits `k` cells away from its own column the whole
//! section is shifted back by `k` and every cell is re-checked against its
//! column domain. A shift that does not produce a fully in-domain row is
//! refused and the row quarantined.

use serde::Serialize;

use super::cells::is_universal_missing;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Domain {
    /// The sentinel column: holds the marker label or nothing.
    Marker,
    Int { min: i64, max: i64, required: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Realigned {
    /// Cells in column order (`None` is missing) and the shift applied.
    Aligned { cells: Vec<Option<String>>, shift: i64 },
    Quarantine { reason: String },
}

fn check(cells: &[Option<String>], marker: &str, domains: &[Domain]) -> Result<(), String> {
    for (i, (cell, domain)) in cells.iter().zip(domains).enumerate() {
        match (domain, cell) {
            (Domain::Marker, None) => {}
            (Domain::Marker, Some(c)) if c.eq_ignore_ascii_case(marker) => {}
            (Domain::Marker, Some(c)) => return Err(format!("column {i} holds `{c}` where the section label belongs")),
            (Domain::Int { required: true, .. }, None) => return Err(format!("column {i} is empty but required")),
            (Domain::Int { .. }, None) => {}
            (Domain::Int { min, max, .. }, Some(c)) => match c.parse::<i64>() {
                Ok(v) if (*min..=*max).contains(&v) => {}
                Ok(v) => return Err(format!("column {i} value {v} outside {min}–{max}")),
                Err(_) => return Err(format!("column {i} value `{c}` is not an integer")),
            },
        }
    }
    Ok(())
}

/// Realigns one row of section cells. `domains[i]` describes column `i`;
/// exactly one domain is [`Domain::Marker`].
pub fn realign_ehr_row(row: &[String], marker: &str, domains: &[Domain]) -> Realigned {
    let home = domains.iter().position(|d| matches!(d, Domain::Marker)).expect("one marker column");
    let cell = |s: &String| (!is_universal_missing(s) || s.trim().eq_ignore_ascii_case(marker)).then(|| s.trim().to_string());
    let cells: Vec<Option<String>> = (0..domains.len()).map(|i| row.get(i).and_then(cell)).collect();
    let found = cells.iter().position(|c| c.as_deref().is_some_and(|c| c.eq_ignore_ascii_case(marker)));

    match found {
        Some(at) if at == home => match check(&cells, marker, domains) {
            Ok(()) => Realigned::Aligned { cells, shift: 0 },
            Err(e) => Realigned::Quarantine { reason: format!("section label in place but {e}") },
        },
        Some(at) => {
            let k = at as i64 - home as i64;
            let shifted: Vec<Option<String>> = (0..domains.len() as i64)
                .map(|i| {
                    let src = i + k;
                    if (0..cells.len() as i64).contains(&src) {
                        cells[src as usize].clone()
                    } else {
                        None
                    }
                })
                .collect();
            match check(&shifted, marker, domains) {
                Ok(()) => Realigned::Aligned { cells: shifted, shift: -k },
                Err(e) => Realigned::Quarantine {
                    reason: format!("section label found {k:+} columns from its place; after shifting by {}: {e}", -k),
                },
            }
        }
        None => match check(&cells, marker, domains) {
            Ok(()) => Realigned::Aligned { cells, shift: 0 },
            Err(e) => Realigned::Quarantine { reason: format!("section label absent and {e}") },
        },
    }
}
