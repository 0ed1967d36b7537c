//! Reference answers for the stored queries, computed by walking the typed
//! store directly. Shares no code with the SQL engine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use peripartum_core::model::{DeliverySubtype, DeliveryType, Patient, Pregnancy};
use peripartum_core::{CanonicalStore, Value};
use rust_decimal::{Decimal, RoundingStrategy};

pub type Rows = Vec<Vec<Value>>;

/// Whether row order is part of the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Significant,
    Irrelevant,
}

fn pct(part: usize, whole: usize) -> Value {
    if whole == 0 {
        return Value::Null;
    }
    let q = Decimal::from(part as i64 * 100) / Decimal::from(whole as i64);
    Value::Decimal(q.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero))
}

pub fn c_sections_in_year(s: &CanonicalStore, year: i32) -> Rows {
    let in_year = |pid: i64| s.deliveries().get(&pid).filter(|d| d.delivery_date.year() == year);
    let programmed = s.programmed_c_sections().keys().filter(|pid| in_year(**pid).is_some()).count();
    let emergency = s
        .deliveries_with_labor()
        .keys()
        .filter(|pid| in_year(**pid).is_some_and(|d| d.delivery_type == DeliveryType::EmergencyCSection))
        .count();
    vec![vec![Value::Int((programmed + emergency) as i64)]]
}

fn mother(s: &CanonicalStore, pid: i64) -> Option<&Patient> {
    let pr = s.pregnancies().get(&pid)?;
    s.patients().get(&pr.patient_tc)
}

pub fn ph_below(s: &CanonicalStore, threshold: f64) -> Rows {
    let mut out = Vec::new();
    for n in s.newborns().values() {
        let Some(ph) = n.ph else { continue };
        if ph >= threshold {
            continue;
        }
        let (Some(d), Some(p)) = (s.deliveries().get(&n.pregnancy_id), mother(s, n.pregnancy_id)) else { continue };
        out.push((d.delivery_date, p.name.clone()));
    }
    out.sort();
    out.into_iter().map(|(date, name)| vec![Value::Text(name), Value::Date(date)]).collect()
}

pub fn c_section_motivations(s: &CanonicalStore) -> Rows {
    let mut set: BTreeSet<Option<String>> = BTreeSet::new();
    for c in s.programmed_c_sections().values() {
        set.insert(Some(c.motivation.clone()));
    }
    for d in s.deliveries_with_labor().values() {
        if d.delivery_subtype == DeliverySubtype::EmergencyCSection {
            set.insert(d.motivation.clone());
        }
    }
    set.into_iter().map(|m| vec![m.map_or(Value::Null, Value::Text)]).collect()
}

pub fn laceration_stats(s: &CanonicalStore) -> Rows {
    let total = s.deliveries_with_labor().len();
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for d in s.deliveries_with_labor().values() {
        *counts.entry(d.laceration.as_str()).or_default() += 1;
    }
    let mut groups: Vec<(&str, usize)> = counts.into_iter().collect();
    groups.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    groups
        .into_iter()
        .map(|(lac, n)| vec![Value::text(lac), Value::Int(n as i64), pct(n, total)])
        .collect()
}

pub fn induced_deliveries(s: &CanonicalStore) -> Rows {
    let induced: BTreeSet<i64> = s.inductions().values().map(|i| i.pregnancy_id).collect();
    let deliveries = s.deliveries().len();
    let hit = s.deliveries().keys().filter(|pid| induced.contains(pid)).count();
    vec![vec![Value::Int(hit as i64), pct(hit, deliveries)]]
}

pub fn avg_induction_interval(s: &CanonicalStore) -> Rows {
    let mut seconds = Vec::new();
    for i in s.inductions().values() {
        if let Some(d) = s.deliveries_with_labor().get(&i.pregnancy_id) {
            let ms = d.expulsion_time.epoch_millis() - i.administration_time.epoch_millis();
            seconds.push(ms as f64 / 1000.0);
        }
    }
    if seconds.is_empty() {
        return vec![vec![Value::Null]];
    }
    let mean = seconds.iter().sum::<f64>() / seconds.len() as f64;
    vec![vec![Value::Float(mean / 3600.0)]]
}

pub fn inductions_per_patient(s: &CanonicalStore, year: i32) -> Rows {
    let mut per: BTreeMap<String, (String, String, i64)> = BTreeMap::new();
    for d in s.deliveries().values() {
        if d.delivery_date.year() != year {
            continue;
        }
        let Some(p) = mother(s, d.pregnancy_id) else { continue };
        let n = s.inductions().values().filter(|i| i.pregnancy_id == d.pregnancy_id).count() as i64;
        if n == 0 {
            continue;
        }
        let e = per.entry(p.tc.as_str().to_string()).or_insert((p.name.clone(), p.surname.clone(), 0));
        e.2 += n;
    }
    per.into_iter()
        .map(|(tc, (name, surname, n))| vec![Value::Text(tc), Value::Text(name), Value::Text(surname), Value::Int(n)])
        .collect()
}

/// Case-insensitive LIKE, via a regular expression.
fn ilike(text: &str, pattern: &str) -> bool {
    let mut re = String::from("(?is)^");
    let mut chars = pattern.chars();
    while let Some(c) = chars.next() {
        match c {
            '%' => re.push_str(".*"),
            '_' => re.push('.'),
            '\\' => {
                if let Some(n) = chars.next() {
                    re.push_str(&regex::escape(&n.to_string()));
                }
            }
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    re.push('$');
    regex::Regex::new(&re).expect("valid pattern").is_match(text)
}

fn patient_cells(p: &Patient) -> Vec<Value> {
    vec![Value::text(p.tc.as_str()), Value::text(&p.name), Value::text(&p.surname), Value::Date(p.birth_date)]
}

fn pregnancy_cells(pr: &Pregnancy) -> Vec<Value> {
    vec![
        Value::Int(pr.id),
        Value::text(pr.patient_tc.as_str()),
        Value::Date(pr.first_exam_date),
        Value::Int(pr.parity_full_term.into()),
        Value::Int(pr.parity_premature.into()),
        Value::Int(pr.parity_abortions.into()),
        Value::Int(pr.parity_live_births.into()),
        Value::Int(pr.maternal_age_at_conception.into()),
        pr.art_used.map_or(Value::Null, Value::Bool),
        pr.prior_pregnancy_conditions.clone().map_or(Value::Null, Value::Text),
        pr.last_menstruation_date.map_or(Value::Null, Value::Date),
        pr.expected_delivery_date.map_or(Value::Null, Value::Date),
    ]
}

pub fn ctg_related_patients(s: &CanonicalStore, pattern: &str) -> Rows {
    let mut out = Vec::new();
    for pr in s.pregnancies().values() {
        if !s.deliveries().contains_key(&pr.id) {
            continue;
        }
        let Some(p) = s.patients().get(&pr.patient_tc) else { continue };
        let programmed = s.programmed_c_sections().get(&pr.id).is_some_and(|c| ilike(&c.motivation, pattern));
        let labor = s
            .deliveries_with_labor()
            .get(&pr.id)
            .and_then(|d| d.motivation.as_deref())
            .is_some_and(|m| ilike(m, pattern));
        if programmed || labor {
            out.push(((p.tc.as_str().to_string(), pr.id), [patient_cells(p), pregnancy_cells(pr)].concat()));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.into_iter().map(|(_, row)| row).collect()
}

/// Reference answer for a stored query under the given arguments (string
/// form, defaults applied by the caller).
pub fn answer(s: &CanonicalStore, name: &str, args: &BTreeMap<String, String>) -> (Rows, Order) {
    let arg = |k: &str| args.get(k).map(String::as_str);
    match name {
        "c_sections_in_year" => {
            (c_sections_in_year(s, arg("year").map_or(2024, |y| y.parse().unwrap())), Order::Significant)
        }
        "ph_below" => (ph_below(s, arg("threshold").map_or(7.1, |t| t.parse().unwrap())), Order::Significant),
        "c_section_motivations" => (c_section_motivations(s), Order::Irrelevant),
        "laceration_stats" => (laceration_stats(s), Order::Significant),
        "induced_deliveries" => (induced_deliveries(s), Order::Significant),
        "avg_induction_interval" => (avg_induction_interval(s), Order::Significant),
        "inductions_per_patient" => {
            (inductions_per_patient(s, arg("year").map_or(2025, |y| y.parse().unwrap())), Order::Significant)
        }
        "ctg_related_patients" => (ctg_related_patients(s, arg("pattern").unwrap_or("%CTG%")), Order::Significant),
        other => panic!("no oracle for {other}"),
    }
}

/// Cell equality: exact for integers, decimals, text and dates; relative
/// 1e-9 for doubles.
pub fn cells_match(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => {
            x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs())
        }
        (Value::Decimal(x), Value::Decimal(y)) => x == y,
        _ => a == b,
    }
}

fn sort_key(row: &[Value]) -> String {
    row.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join("\u{1}")
}

/// Compares engine output with the oracle, returning a description of the
/// first difference.
pub fn compare(got: &[Vec<Value>], want: &[Vec<Value>], order: Order) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("row count {} != {}", got.len(), want.len()));
    }
    let (mut got, mut want) = (got.to_vec(), want.to_vec());
    if order == Order::Irrelevant {
        got.sort_by_key(|r| sort_key(r));
        want.sort_by_key(|r| sort_key(r));
    }
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        if g.len() != w.len() || !g.iter().zip(w).all(|(a, b)| cells_match(a, b)) {
            return Err(format!("row {i}: got {g:?}, want {w:?}"));
        }
    }
    Ok(())
}
