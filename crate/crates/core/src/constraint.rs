//! Transaction-scoped integrity checking.
//!
//! A transaction is applied to a private copy of the store; every check then
//! runs once, at commit, over the post-image. Checks are scoped to the keys
//! the transaction touched (plus the parents of old and new records), and the
//! same functions run over the whole store when given [`Scope::All`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::*;
use crate::store::{CanonicalStore, Record, RecordKey};
use crate::validate::validate_fields;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    /// Every pregnancy has an examination or a delivery.
    Cr1PregnancyFollowup,
    /// At most one first- and one second-trimester examination per pregnancy.
    Cr2TrimesterUniqueness,
    /// Test results are coherent with the test's declared type.
    Cr3ResultTypeCoherence,
    /// Every delivery is exactly one of programmed C-section or labor.
    Cr4DeliverySpecialization,
    /// Every CTG measurement carries at least one value.
    Cr5MeasurementNonempty,
}

impl RuleId {
    pub const ALL: [RuleId; 5] = [
        RuleId::Cr1PregnancyFollowup,
        RuleId::Cr2TrimesterUniqueness,
        RuleId::Cr3ResultTypeCoherence,
        RuleId::Cr4DeliverySpecialization,
        RuleId::Cr5MeasurementNonempty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::Cr1PregnancyFollowup => "CR1_pregnancy_followup",
            RuleId::Cr2TrimesterUniqueness => "CR2_trimester_uniqueness",
            RuleId::Cr3ResultTypeCoherence => "CR3_result_type_coherence",
            RuleId::Cr4DeliverySpecialization => "CR4_delivery_specialization",
            RuleId::Cr5MeasurementNonempty => "CR5_measurement_nonempty",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown rule id `{0}`")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s) || r.as_str()[..3].eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

/// What a violation breaks: one of the five rules or a structural check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    Field,
    PrimaryKey,
    Unique,
    ForeignKey,
    Consistency,
    Rule(RuleId),
}

impl Check {
    pub fn as_str(self) -> &'static str {
        match self {
            Check::Field => "field",
            Check::PrimaryKey => "primary_key",
            Check::Unique => "unique",
            Check::ForeignKey => "foreign_key",
            Check::Consistency => "consistency",
            Check::Rule(r) => r.as_str(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Check {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Check {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Ok(match text.as_str() {
            "field" => Check::Field,
            "primary_key" => Check::PrimaryKey,
            "unique" => Check::Unique,
            "foreign_key" => Check::ForeignKey,
            "consistency" => Check::Consistency,
            other => Check::Rule(other.parse().map_err(serde::de::Error::custom)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Check,
    pub subject: RecordKey,
    pub message: String,
}

impl Violation {
    fn new(rule: Check, subject: RecordKey, message: impl Into<String>) -> Self {
        Violation { rule, subject, message: message.into() }
    }

    pub fn rule_id(&self) -> Option<RuleId> {
        match self.rule {
            Check::Rule(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

/// JSON report consumed by the CLI and the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    Insert { record: Record },
    Update { record: Record },
    Delete { key: RecordKey },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub ops: Vec<Op>,
}

impl Transaction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: impl Into<Record>) -> &mut Self {
        self.ops.push(Op::Insert { record: record.into() });
        self
    }

    pub fn update(&mut self, record: impl Into<Record>) -> &mut Self {
        self.ops.push(Op::Update { record: record.into() });
        self
    }

    pub fn delete(&mut self, key: RecordKey) -> &mut Self {
        self.ops.push(Op::Delete { key });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }
}

impl FromIterator<Op> for Transaction {
    fn from_iter<I: IntoIterator<Item = Op>>(iter: I) -> Self {
        Transaction { ops: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TxError {
    /// The transaction itself is ill-formed (e.g. updates a missing key).
    #[error("malformed transaction: {}", .0.join("; "))]
    Malformed(Vec<String>),
    /// The post-image breaks integrity; the store is left unchanged.
    #[error("transaction rejected with {} violation(s)", .0.len())]
    Rejected(Vec<Violation>),
}

impl TxError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            TxError::Rejected(v) => v,
            TxError::Malformed(_) => &[],
        }
    }
}

/// The set of keys a check looks at.
#[derive(Debug, Clone, PartialEq)]
pub enum Scope {
    All,
    Keys(BTreeSet<RecordKey>),
}

impl Scope {
    pub fn keys(keys: impl IntoIterator<Item = RecordKey>) -> Self {
        Scope::Keys(keys.into_iter().collect())
    }

    fn select<K: Ord + Clone, V>(
        &self,
        all: &im::OrdMap<K, V>,
        pick: impl Fn(&RecordKey) -> Option<&K>,
    ) -> Vec<K> {
        match self {
            Scope::All => all.keys().cloned().collect(),
            Scope::Keys(keys) => keys.iter().filter_map(|k| pick(k).cloned()).collect(),
        }
    }

    fn set(&self) -> Option<&BTreeSet<RecordKey>> {
        match self {
            Scope::All => None,
            Scope::Keys(k) => Some(k),
        }
    }
}

macro_rules! pick {
    ($variant:ident) => {
        |k: &RecordKey| match k {
            RecordKey::$variant(inner) => Some(inner),
            _ => None,
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResultTypeError {
    #[error("test type is empty")]
    EmptyType,
    #[error("`{0}` is not a decimal number")]
    NotNumeric(String),
    #[error("`{result}` is not one of {allowed:?}")]
    NotEnumerated { result: String, allowed: Vec<String> },
}

fn is_decimal(text: &str) -> bool {
    let t = text.trim();
    let t = t.strip_prefix(['+', '-']).unwrap_or(t);
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], Some(&t[i + 1..])),
        None => (t, None),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    let mantissa_ok = digits(int) && digits(frac) && !(int.is_empty() && frac.is_empty());
    let exponent_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && digits(e)
    });
    mantissa_ok && exponent_ok
}

/// Checks a stored result against its test's type list: `["string"]` accepts
/// anything, `["numeric"]` accepts decimal numbers, any other list enumerates
/// the admissible values exactly (case-sensitive).
pub fn check_result_type(test_type: &[String], result: &str) -> Result<(), ResultTypeError> {
    match test_type {
        [] => Err(ResultTypeError::EmptyType),
        [only] if only == "string" => Ok(()),
        [only] if only == "numeric" => {
            if is_decimal(result) {
                Ok(())
            } else {
                Err(ResultTypeError::NotNumeric(result.to_string()))
            }
        }
        allowed => {
            if allowed.iter().any(|v| v == result) {
                Ok(())
            } else {
                Err(ResultTypeError::NotEnumerated { result: result.to_string(), allowed: allowed.to_vec() })
            }
        }
    }
}

/// Violations of one rule among the keys in scope. Pure in (store, scope).
pub fn check_rule(rule: RuleId, store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    match rule {
        RuleId::Cr1PregnancyFollowup => check_followup(store, scope),
        RuleId::Cr2TrimesterUniqueness => check_trimesters(store, scope),
        RuleId::Cr3ResultTypeCoherence => check_result_types(store, scope),
        RuleId::Cr4DeliverySpecialization => check_specialization(store, scope),
        RuleId::Cr5MeasurementNonempty => check_measurements(store, scope),
    }
}

fn check_followup(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let examined: HashSet<PregnancyId> = store.examinations().values().map(|e| e.pregnancy_id).collect();
    scope
        .select(store.pregnancies(), pick!(Pregnancy))
        .into_iter()
        .filter(|id| store.pregnancies().contains_key(id))
        .filter(|id| !examined.contains(id) && !store.deliveries().contains_key(id))
        .map(|id| {
            Violation::new(
                Check::Rule(RuleId::Cr1PregnancyFollowup),
                RecordKey::Pregnancy(id),
                format!("pregnancy id={id} has neither an examination nor a delivery"),
            )
        })
        .collect()
}

fn check_trimesters(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let ids = scope.select(store.pregnancies(), pick!(Pregnancy));
    let wanted: HashSet<PregnancyId> = ids.iter().copied().collect();
    let mut counts: BTreeMap<(PregnancyId, ExaminationKind), usize> = BTreeMap::new();
    for exam in store.examinations().values() {
        if matches!(exam.examination_kind, ExaminationKind::FirstTrimester | ExaminationKind::SecondTrimester)
            && wanted.contains(&exam.pregnancy_id)
        {
            *counts.entry((exam.pregnancy_id, exam.examination_kind)).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|((id, kind), n)| {
            Violation::new(
                Check::Rule(RuleId::Cr2TrimesterUniqueness),
                RecordKey::Pregnancy(id),
                format!("pregnancy id={id} has {n} {kind} examinations (at most one allowed)"),
            )
        })
        .collect()
}

fn check_result_types(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let mut keys: BTreeSet<(ExaminationId, TestId)> =
        scope.select(store.examination_tests(), pick!(ExaminationTest)).into_iter().collect();
    if let Some(set) = scope.set() {
        let tests: HashSet<TestId> = set.iter().filter_map(pick!(Test)).copied().collect();
        if !tests.is_empty() {
            keys.extend(store.examination_tests().keys().filter(|(_, t)| tests.contains(t)).copied());
        }
    }
    let mut out = Vec::new();
    for key in keys {
        let Some(et) = store.examination_tests().get(&key) else { continue };
        let Some(test) = store.tests().get(&et.test_id) else { continue };
        if let Err(err) = check_result_type(&test.result_type, &et.result) {
            out.push(Violation::new(
                Check::Rule(RuleId::Cr3ResultTypeCoherence),
                RecordKey::ExaminationTest(key),
                format!(
                    "examination_test(examination_id={}, test_id={}): result for test `{}` incoherent: {err}",
                    key.0, key.1, test.name
                ),
            ));
        }
    }
    out
}

fn check_specialization(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let rule = Check::Rule(RuleId::Cr4DeliverySpecialization);
    let mut out = Vec::new();
    for id in scope.select(store.deliveries(), pick!(Delivery)) {
        let Some(delivery) = store.deliveries().get(&id) else { continue };
        let subject = RecordKey::Delivery(id);
        let pcs = store.programmed_c_sections().contains_key(&id);
        let labor = store.deliveries_with_labor().get(&id);
        match (pcs, labor) {
            (true, Some(_)) => out.push(Violation::new(
                rule,
                subject,
                format!("delivery pregnancy_id={id} has both a programmed_c_section and a delivery_with_labor"),
            )),
            (false, None) => out.push(Violation::new(
                rule,
                subject,
                format!("delivery pregnancy_id={id} has neither a programmed_c_section nor a delivery_with_labor"),
            )),
            (true, None) if delivery.delivery_type != DeliveryType::ProgrammedCSection => out.push(Violation::new(
                rule,
                subject,
                format!(
                    "delivery pregnancy_id={id} is a programmed C-section but delivery_type is {}",
                    delivery.delivery_type
                ),
            )),
            (false, Some(l)) if delivery.delivery_type != l.delivery_subtype.delivery_type() => {
                out.push(Violation::new(
                    rule,
                    subject,
                    format!(
                        "delivery pregnancy_id={id} has delivery_type {} but labor subtype {}",
                        delivery.delivery_type, l.delivery_subtype
                    ),
                ))
            }
            _ => {}
        }
    }
    out
}

fn check_measurements(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    scope
        .select(store.measurements(), pick!(Measurement))
        .into_iter()
        .filter_map(|key| store.measurements().get(&key).map(|m| (key, m)))
        .filter(|(_, m)| {
            m.maternal_heart_rate.is_none()
                && m.maternal_tocography.is_none()
                && store.newborn_measurements_at(m.tracing_id, m.ts).next().is_none()
        })
        .map(|(key, _)| {
            Violation::new(
                Check::Rule(RuleId::Cr5MeasurementNonempty),
                RecordKey::Measurement(key),
                format!("measurement(tracing_id={}, ts={}) records no value", key.0, key.1),
            )
        })
        .collect()
}

/// Records that reference `key` directly.
pub fn children(store: &CanonicalStore, key: &RecordKey) -> Vec<RecordKey> {
    match key {
        RecordKey::Patient(tc) => store.pregnancies_of(tc).map(|p| RecordKey::Pregnancy(p.id)).collect(),
        RecordKey::Pregnancy(id) => {
            let mut out: Vec<RecordKey> = store
                .condition_links()
                .keys()
                .filter(|(p, _)| p == id)
                .map(|k| RecordKey::ConditionLink(*k))
                .collect();
            out.extend(store.examinations_of(*id).map(|e| RecordKey::Examination(e.id)));
            if store.deliveries().contains_key(id) {
                out.push(RecordKey::Delivery(*id));
            }
            out
        }
        RecordKey::Condition(id) => store
            .condition_links()
            .keys()
            .filter(|(_, c)| c == id)
            .map(|k| RecordKey::ConditionLink(*k))
            .collect(),
        RecordKey::Examination(id) => store
            .examination_tests()
            .keys()
            .filter(|(e, _)| e == id)
            .map(|k| RecordKey::ExaminationTest(*k))
            .collect(),
        RecordKey::Test(id) => store
            .examination_tests()
            .keys()
            .filter(|(_, t)| t == id)
            .map(|k| RecordKey::ExaminationTest(*k))
            .collect(),
        RecordKey::Delivery(id) => {
            let mut out = Vec::new();
            if store.programmed_c_sections().contains_key(id) {
                out.push(RecordKey::ProgrammedCSection(*id));
            }
            if store.deliveries_with_labor().contains_key(id) {
                out.push(RecordKey::DeliveryWithLabor(*id));
            }
            out.extend(store.newborns_of(*id).map(|n| RecordKey::Newborn((n.pregnancy_id, n.birth_time))));
            out.extend(
                store.tracings().values().filter(|t| t.pregnancy_id == *id).map(|t| RecordKey::Tracing(t.tracing_id)),
            );
            out
        }
        RecordKey::DeliveryWithLabor(id) => {
            store.inductions_of(*id).map(|i| RecordKey::Induction((i.pregnancy_id, i.administration_time))).collect()
        }
        RecordKey::Newborn((p, b)) => store
            .newborn_measurements()
            .keys()
            .filter(|(_, _, np, nb)| np == p && nb == b)
            .map(|k| RecordKey::NewbornMeasurement(*k))
            .collect(),
        RecordKey::Tracing(id) => {
            let mut out: Vec<RecordKey> =
                store.measurements_of(*id).map(|m| RecordKey::Measurement((m.tracing_id, m.ts))).collect();
            out.extend(
                store
                    .newborn_measurements()
                    .keys()
                    .filter(|(t, _, _, _)| t == id)
                    .map(|k| RecordKey::NewbornMeasurement(*k)),
            );
            out
        }
        RecordKey::Measurement((t, ts)) => store
            .newborn_measurements_at(*t, *ts)
            .map(|m| RecordKey::NewbornMeasurement((m.tracing_id, m.ts, m.pregnancy_id, m.birth_time)))
            .collect(),
        RecordKey::ConditionLink(_)
        | RecordKey::ExaminationTest(_)
        | RecordKey::ProgrammedCSection(_)
        | RecordKey::Induction(_)
        | RecordKey::NewbornMeasurement(_) => Vec::new(),
    }
}

fn scoped_keys(store: &CanonicalStore, scope: &Scope) -> Vec<RecordKey> {
    match scope {
        Scope::All => store.keys().collect(),
        Scope::Keys(keys) => keys.iter().cloned().collect(),
    }
}

fn check_fields(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let mut out = Vec::new();
    for key in scoped_keys(store, scope) {
        if let Some(record) = store.get(&key) {
            for err in validate_fields(&record) {
                out.push(Violation::new(Check::Field, key.clone(), format!("{key}: {err}")));
            }
        }
    }
    out
}

fn check_unique(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    fn duplicates<K: Clone + Ord, N: std::hash::Hash + Eq>(
        keys: Vec<K>,
        all: impl Iterator<Item = (K, N)>,
        natural: impl Fn(&K) -> Option<N>,
    ) -> Vec<(K, usize)> {
        let mut counts: HashMap<N, usize> = HashMap::new();
        for (_, n) in all {
            *counts.entry(n).or_default() += 1;
        }
        keys.into_iter()
            .filter_map(|k| {
                let n = natural(&k)?;
                let c = counts.get(&n).copied().unwrap_or(0);
                (c > 1).then_some((k, c))
            })
            .collect()
    }

    let mut out = Vec::new();
    let pregnancies = store.pregnancies();
    for (id, n) in duplicates(
        scope.select(pregnancies, pick!(Pregnancy)),
        pregnancies.values().map(|p| (p.id, (p.patient_tc.clone(), p.first_exam_date))),
        |id| pregnancies.get(id).map(|p| (p.patient_tc.clone(), p.first_exam_date)),
    ) {
        let p = &pregnancies[&id];
        out.push(Violation::new(
            Check::Unique,
            RecordKey::Pregnancy(id),
            format!(
                "pregnancy id={id}: (patient_tc={}, first_exam_date={}) shared by {n} pregnancies",
                p.patient_tc, p.first_exam_date
            ),
        ));
    }
    let conditions = store.conditions();
    for (id, n) in duplicates(
        scope.select(conditions, pick!(Condition)),
        conditions.values().map(|c| (c.id, c.name.to_lowercase())),
        |id| conditions.get(id).map(|c| c.name.to_lowercase()),
    ) {
        out.push(Violation::new(
            Check::Unique,
            RecordKey::Condition(id),
            format!("condition id={id}: name `{}` used by {n} conditions", conditions[&id].name),
        ));
    }
    let tests = store.tests();
    for (id, n) in duplicates(
        scope.select(tests, pick!(Test)),
        tests.values().map(|t| (t.id, t.name.clone())),
        |id| tests.get(id).map(|t| t.name.clone()),
    ) {
        out.push(Violation::new(
            Check::Unique,
            RecordKey::Test(id),
            format!("test id={id}: name `{}` used by {n} tests", tests[&id].name),
        ));
    }
    out
}

fn check_foreign_keys(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let mut out = Vec::new();
    for key in scoped_keys(store, scope) {
        match store.get(&key) {
            Some(record) => {
                for parent in record.parents() {
                    if !store.contains(&parent) {
                        out.push(Violation::new(
                            Check::ForeignKey,
                            key.clone(),
                            format!("{key} references missing {parent}"),
                        ));
                    }
                }
                if let Record::NewbornMeasurement(m) = &record {
                    if let Some(t) = store.tracings().get(&m.tracing_id) {
                        if t.pregnancy_id != m.pregnancy_id {
                            out.push(Violation::new(
                                Check::ForeignKey,
                                key.clone(),
                                format!(
                                    "{key}: tracing {} belongs to pregnancy {} not {}",
                                    m.tracing_id, t.pregnancy_id, m.pregnancy_id
                                ),
                            ));
                        }
                    }
                }
            }
            None => {
                for child in children(store, &key) {
                    out.push(Violation::new(
                        Check::ForeignKey,
                        child.clone(),
                        format!("{child} references deleted {key}"),
                    ));
                }
            }
        }
    }
    out
}

fn check_consistency(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let mut pregnancies: BTreeSet<PregnancyId> = scope.select(store.pregnancies(), pick!(Pregnancy)).into_iter().collect();
    let mut exams: BTreeSet<ExaminationId> = scope.select(store.examinations(), pick!(Examination)).into_iter().collect();
    let mut inductions: BTreeSet<_> = scope.select(store.inductions(), pick!(Induction)).into_iter().collect();
    if let Some(set) = scope.set() {
        for key in set {
            match key {
                RecordKey::Patient(tc) => pregnancies.extend(store.pregnancies_of(tc).map(|p| p.id)),
                RecordKey::Pregnancy(id) => exams.extend(store.examinations_of(*id).map(|e| e.id)),
                RecordKey::DeliveryWithLabor(id) => {
                    inductions.extend(store.inductions_of(*id).map(|i| (i.pregnancy_id, i.administration_time)))
                }
                _ => {}
            }
        }
    }

    let mut out = Vec::new();
    for id in pregnancies {
        let Some(p) = store.pregnancies().get(&id) else { continue };
        let Some(patient) = store.patients().get(&p.patient_tc) else { continue };
        if patient.birth_date >= p.first_exam_date {
            out.push(Violation::new(
                Check::Consistency,
                RecordKey::Pregnancy(id),
                format!(
                    "pregnancy id={id}: first_exam_date {} not after patient birth_date {}",
                    p.first_exam_date, patient.birth_date
                ),
            ));
        }
    }
    for id in exams {
        let Some(e) = store.examinations().get(&id) else { continue };
        let Some(p) = store.pregnancies().get(&e.pregnancy_id) else { continue };
        if e.exam_date < p.first_exam_date {
            out.push(Violation::new(
                Check::Consistency,
                RecordKey::Examination(id),
                format!(
                    "examination id={id}: exam_date {} precedes pregnancy first_exam_date {}",
                    e.exam_date, p.first_exam_date
                ),
            ));
        }
    }
    for key in inductions {
        let Some(i) = store.inductions().get(&key) else { continue };
        let Some(d) = store.deliveries_with_labor().get(&i.pregnancy_id) else { continue };
        if i.administration_time > d.expulsion_time {
            out.push(Violation::new(
                Check::Consistency,
                RecordKey::Induction(key),
                format!(
                    "induction(pregnancy_id={}, administration_time={}) after expulsion_time {}",
                    key.0, key.1, d.expulsion_time
                ),
            ));
        }
    }
    out
}

/// All checks over the keys in scope, structural checks first, then the five
/// rules in order.
pub fn check_all(store: &CanonicalStore, scope: &Scope) -> Vec<Violation> {
    let mut out = check_fields(store, scope);
    out.extend(check_unique(store, scope));
    out.extend(check_foreign_keys(store, scope));
    out.extend(check_consistency(store, scope));
    for rule in RuleId::ALL {
        out.extend(check_rule(rule, store, scope));
    }
    out
}

/// Every violation in the store.
pub fn full_scan(store: &CanonicalStore) -> Vec<Violation> {
    check_all(store, &Scope::All)
}

/// Applies the ops without any integrity check. Returns the post-image, the
/// touched keys (records plus parents of old and new versions), and any
/// primary-key problems found on the way.
fn stage(store: &CanonicalStore, tx: &Transaction) -> Result<(CanonicalStore, BTreeSet<RecordKey>, Vec<Violation>), TxError> {
    let mut next = store.clone();
    let mut touched = BTreeSet::new();
    let mut malformed = Vec::new();
    let mut violations = Vec::new();
    for (i, op) in tx.ops.iter().enumerate() {
        match op {
            Op::Insert { record } => {
                let key = record.key();
                if next.contains(&key) {
                    violations.push(Violation::new(
                        Check::PrimaryKey,
                        key.clone(),
                        format!("{key} already exists"),
                    ));
                    continue;
                }
                if let Some((seq, id)) = record.sequence_id() {
                    if id <= next.high_water(seq) {
                        violations.push(Violation::new(
                            Check::PrimaryKey,
                            key.clone(),
                            format!("{key}: synthetic id {id} was already issued (next is {})", next.next_id(seq)),
                        ));
                        continue;
                    }
                }
                touched.extend(record.parents());
                touched.insert(key);
                next.put(record.clone());
            }
            Op::Update { record } => {
                let key = record.key();
                match next.put(record.clone()) {
                    Some(old) => {
                        touched.extend(old.parents());
                        touched.extend(record.parents());
                        touched.insert(key);
                    }
                    None => {
                        next.take(&key);
                        malformed.push(format!("op {i}: update of nonexistent {key}"));
                    }
                }
            }
            Op::Delete { key } => match next.take(key) {
                Some(old) => {
                    touched.extend(old.parents());
                    touched.insert(key.clone());
                }
                None => malformed.push(format!("op {i}: delete of nonexistent {key}")),
            },
        }
    }
    if malformed.is_empty() {
        Ok((next, touched, violations))
    } else {
        Err(TxError::Malformed(malformed))
    }
}

/// Commits `tx` against `store`. On success returns the new store; on any
/// violation returns the complete list and `store` is untouched.
pub fn apply_transaction(store: &CanonicalStore, tx: &Transaction) -> Result<CanonicalStore, TxError> {
    let (next, touched, mut violations) = stage(store, tx)?;
    violations.extend(check_all(&next, &Scope::Keys(touched)));
    if violations.is_empty() {
        Ok(next)
    } else {
        Err(TxError::Rejected(violations))
    }
}

/// The transaction that turns `before` into `after`: inserts and updates in
/// catalog order, then deletes in reverse so children go first.
pub fn diff(before: &CanonicalStore, after: &CanonicalStore) -> Transaction {
    let mut tx = Transaction::new();
    for record in after.records() {
        match before.get(&record.key()) {
            None => {
                tx.insert(record);
            }
            Some(old) if old != record => {
                tx.update(record);
            }
            Some(_) => {}
        }
    }
    let gone: Vec<RecordKey> = before.keys().filter(|k| !after.contains(k)).collect();
    for key in gone.into_iter().rev() {
        tx.delete(key);
    }
    tx
}

/// Applies `tx` with no integrity checks. Only for building deliberately
/// broken stores in tests and diagnostics.
pub fn force_apply(store: &CanonicalStore, tx: &Transaction) -> Result<CanonicalStore, TxError> {
    let (next, _, _) = stage(store, tx)?;
    Ok(next)
}
