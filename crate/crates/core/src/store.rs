//! The canonical store: one persistent ordered map per relation.
//!
//! `CanonicalStore` is an immutable value in practice: mutation happens only
//! on a private copy inside the constraint engine, and copies share structure.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use im::OrdMap;
use serde::{Deserialize, Serialize};

use crate::model::*;
use crate::time::Timestamp;
use crate::value::Value;

/// A record type stored in its own relation.
pub trait Entity: Clone + PartialEq + fmt::Debug {
    type Key: Ord + Clone + fmt::Debug;
    const RELATION: &'static str;

    fn key(&self) -> Self::Key;
    /// Cells in catalog column order.
    fn to_row(&self) -> Vec<Value>;
    /// Keys of the records this one references.
    fn parents(&self) -> Vec<RecordKey>;
}

fn json_value(details: &BTreeMap<String, String>) -> Value {
    Value::Text(serde_json::to_string(details).unwrap_or_default())
}

impl Entity for Patient {
    type Key = TaxCode;
    const RELATION: &'static str = "patient";
    fn key(&self) -> TaxCode {
        self.tc.clone()
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.tc.as_str().into(),
            self.name.as_str().into(),
            self.surname.as_str().into(),
            self.birth_date.into(),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        Vec::new()
    }
}

impl Entity for Condition {
    type Key = ConditionId;
    const RELATION: &'static str = "condition";
    fn key(&self) -> ConditionId {
        self.id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![self.id.into(), self.name.as_str().into()]
    }
    fn parents(&self) -> Vec<RecordKey> {
        Vec::new()
    }
}

impl Entity for Test {
    type Key = TestId;
    const RELATION: &'static str = "test";
    fn key(&self) -> TestId {
        self.id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![self.id.into(), self.name.as_str().into(), Value::TextArray(self.result_type.clone())]
    }
    fn parents(&self) -> Vec<RecordKey> {
        Vec::new()
    }
}

impl Entity for Pregnancy {
    type Key = PregnancyId;
    const RELATION: &'static str = "pregnancy";
    fn key(&self) -> PregnancyId {
        self.id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.id.into(),
            self.patient_tc.as_str().into(),
            self.first_exam_date.into(),
            self.parity_full_term.into(),
            self.parity_premature.into(),
            self.parity_abortions.into(),
            self.parity_live_births.into(),
            self.maternal_age_at_conception.into(),
            Value::opt(self.art_used),
            Value::opt(self.prior_pregnancy_conditions.clone()),
            Value::opt(self.last_menstruation_date),
            Value::opt(self.expected_delivery_date),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Patient(self.patient_tc.clone())]
    }
}

impl Entity for ConditionLink {
    type Key = (PregnancyId, ConditionId);
    const RELATION: &'static str = "pregnancy_condition";
    fn key(&self) -> Self::Key {
        (self.pregnancy_id, self.condition_id)
    }
    fn to_row(&self) -> Vec<Value> {
        vec![self.pregnancy_id.into(), self.condition_id.into(), Value::opt(self.therapy.clone())]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Pregnancy(self.pregnancy_id), RecordKey::Condition(self.condition_id)]
    }
}

impl Entity for Examination {
    type Key = ExaminationId;
    const RELATION: &'static str = "examination";
    fn key(&self) -> ExaminationId {
        self.id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.id.into(),
            self.pregnancy_id.into(),
            self.examination_kind.as_str().into(),
            self.exam_date.into(),
            self.gestational_age_days.into(),
            json_value(&self.details),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Pregnancy(self.pregnancy_id)]
    }
}

impl Entity for ExaminationTest {
    type Key = (ExaminationId, TestId);
    const RELATION: &'static str = "examination_test";
    fn key(&self) -> Self::Key {
        (self.examination_id, self.test_id)
    }
    fn to_row(&self) -> Vec<Value> {
        vec![self.examination_id.into(), self.test_id.into(), self.result.as_str().into()]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Examination(self.examination_id), RecordKey::Test(self.test_id)]
    }
}

impl Entity for Delivery {
    type Key = PregnancyId;
    const RELATION: &'static str = "delivery";
    fn key(&self) -> PregnancyId {
        self.pregnancy_id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.pregnancy_id.into(),
            self.delivery_date.into(),
            self.gestational_age_days.into(),
            self.robson_score.into(),
            self.placental_expulsion.as_str().into(),
            Value::opt(self.analgesia.clone()),
            self.estimated_blood_loss_ml.into(),
            self.delivery_type.as_str().into(),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Pregnancy(self.pregnancy_id)]
    }
}

impl Entity for ProgrammedCSection {
    type Key = PregnancyId;
    const RELATION: &'static str = "programmed_c_section";
    fn key(&self) -> PregnancyId {
        self.pregnancy_id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![self.pregnancy_id.into(), self.motivation.as_str().into()]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Delivery(self.pregnancy_id)]
    }
}

impl Entity for DeliveryWithLabor {
    type Key = PregnancyId;
    const RELATION: &'static str = "delivery_with_labor";
    fn key(&self) -> PregnancyId {
        self.pregnancy_id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.pregnancy_id.into(),
            self.delivery_subtype.as_str().into(),
            Value::opt(self.motivation.clone()),
            self.laceration.as_str().into(),
            self.episiotomy.into(),
            Value::opt(self.episiotomy_motivation.clone()),
            self.labor_start_time.into(),
            self.expulsion_time.into(),
            Value::opt(self.operative_instrument.map(|i| i.as_str())),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Delivery(self.pregnancy_id)]
    }
}

impl Entity for Induction {
    type Key = (PregnancyId, Timestamp);
    const RELATION: &'static str = "induction";
    fn key(&self) -> Self::Key {
        (self.pregnancy_id, self.administration_time)
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.pregnancy_id.into(),
            self.administration_time.into(),
            self.method.as_str().into(),
            Value::opt(self.drug_dosage.clone()),
            Value::opt(self.completion_rate),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::DeliveryWithLabor(self.pregnancy_id)]
    }
}

impl Entity for Newborn {
    type Key = (PregnancyId, Timestamp);
    const RELATION: &'static str = "newborn";
    fn key(&self) -> Self::Key {
        (self.pregnancy_id, self.birth_time)
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.pregnancy_id.into(),
            self.birth_time.into(),
            self.weight_g.into(),
            Value::opt(self.length_cm),
            self.apgar_1.into(),
            self.apgar_5.into(),
            Value::opt(self.apgar_10),
            Value::opt(self.ph),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Delivery(self.pregnancy_id)]
    }
}

impl Entity for Tracing {
    type Key = TracingId;
    const RELATION: &'static str = "tracing";
    fn key(&self) -> TracingId {
        self.tracing_id
    }
    fn to_row(&self) -> Vec<Value> {
        vec![self.tracing_id.into(), self.pregnancy_id.into(), self.start_time.into()]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Delivery(self.pregnancy_id)]
    }
}

impl Entity for Measurement {
    type Key = (TracingId, Timestamp);
    const RELATION: &'static str = "measurement";
    fn key(&self) -> Self::Key {
        (self.tracing_id, self.ts)
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.tracing_id.into(),
            self.ts.into(),
            Value::opt(self.maternal_heart_rate),
            Value::opt(self.maternal_tocography),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![RecordKey::Tracing(self.tracing_id)]
    }
}

impl Entity for NewbornMeasurement {
    type Key = (TracingId, Timestamp, PregnancyId, Timestamp);
    const RELATION: &'static str = "newborn_measurement";
    fn key(&self) -> Self::Key {
        (self.tracing_id, self.ts, self.pregnancy_id, self.birth_time)
    }
    fn to_row(&self) -> Vec<Value> {
        vec![
            self.tracing_id.into(),
            self.ts.into(),
            self.pregnancy_id.into(),
            self.birth_time.into(),
            self.fetal_heart_rate.into(),
        ]
    }
    fn parents(&self) -> Vec<RecordKey> {
        vec![
            RecordKey::Measurement((self.tracing_id, self.ts)),
            RecordKey::Newborn((self.pregnancy_id, self.birth_time)),
            RecordKey::Tracing(self.tracing_id),
        ]
    }
}

/// Identity sequences. Issued ids are never reused, even after deletion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    Pregnancy,
    Condition,
    Examination,
    Test,
    Tracing,
}

macro_rules! relations {
    ($($variant:ident : $ty:ty => $field:ident),+ $(,)?) => {
        /// A record of any relation.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(tag = "relation", content = "record", rename_all = "snake_case")]
        pub enum Record {
            $($variant($ty)),+
        }

        /// Primary key of a record of any relation.
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(tag = "relation", content = "key", rename_all = "snake_case")]
        pub enum RecordKey {
            $($variant(<$ty as Entity>::Key)),+
        }

        impl Record {
            pub fn key(&self) -> RecordKey {
                match self { $(Record::$variant(r) => RecordKey::$variant(r.key())),+ }
            }

            pub fn relation(&self) -> &'static str {
                match self { $(Record::$variant(_) => <$ty as Entity>::RELATION),+ }
            }

            pub fn to_row(&self) -> Vec<Value> {
                match self { $(Record::$variant(r) => r.to_row()),+ }
            }

            pub fn parents(&self) -> Vec<RecordKey> {
                match self { $(Record::$variant(r) => r.parents()),+ }
            }
        }

        $(
            impl From<$ty> for Record {
                fn from(r: $ty) -> Self {
                    Record::$variant(r)
                }
            }
        )+

        impl RecordKey {
            pub fn relation(&self) -> &'static str {
                match self { $(RecordKey::$variant(_) => <$ty as Entity>::RELATION),+ }
            }
        }

        /// All relations in catalog declaration order.
        pub const RELATION_NAMES: &[&str] = &[$(<$ty as Entity>::RELATION),+];

        #[derive(Debug, Clone, Default, PartialEq)]
        pub struct CanonicalStore {
            $(pub(crate) $field: OrdMap<<$ty as Entity>::Key, $ty>,)+
            pub(crate) high_water: BTreeMap<Sequence, i64>,
        }

        impl CanonicalStore {
            $(
                pub fn $field(&self) -> &OrdMap<<$ty as Entity>::Key, $ty> {
                    &self.$field
                }
            )+

            pub fn get(&self, key: &RecordKey) -> Option<Record> {
                match key {
                    $(RecordKey::$variant(k) => self.$field.get(k).cloned().map(Record::$variant)),+
                }
            }

            pub fn contains(&self, key: &RecordKey) -> bool {
                match key {
                    $(RecordKey::$variant(k) => self.$field.contains_key(k)),+
                }
            }

            /// Inserts or replaces, returning the previous record. Bypasses all
            /// checks; the constraint engine is the only intended caller.
            pub(crate) fn put(&mut self, record: Record) -> Option<Record> {
                self.bump_sequence(&record);
                match record {
                    $(Record::$variant(r) => self.$field.insert(r.key(), r).map(Record::$variant)),+
                }
            }

            pub(crate) fn take(&mut self, key: &RecordKey) -> Option<Record> {
                match key {
                    $(RecordKey::$variant(k) => self.$field.remove(k).map(Record::$variant)),+
                }
            }

            /// Rows of a relation in key order, cells in catalog column order.
            pub fn rows(&self, relation: &str) -> Option<Vec<Vec<Value>>> {
                match relation {
                    $(<$ty as Entity>::RELATION => Some(self.$field.values().map(Entity::to_row).collect()),)+
                    _ => None,
                }
            }

            pub fn relation_len(&self, relation: &str) -> Option<usize> {
                match relation {
                    $(<$ty as Entity>::RELATION => Some(self.$field.len()),)+
                    _ => None,
                }
            }

            pub fn total_records(&self) -> usize {
                0 $(+ self.$field.len())+
            }

            pub fn is_empty(&self) -> bool {
                self.total_records() == 0
            }

            /// Every record, relations in catalog order, records in key order.
            pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
                std::iter::empty()
                    $(.chain(self.$field.values().cloned().map(Record::$variant)))+
            }

            pub fn keys(&self) -> impl Iterator<Item = RecordKey> + '_ {
                std::iter::empty()
                    $(.chain(self.$field.keys().cloned().map(RecordKey::$variant)))+
            }

            pub fn snapshot(&self) -> StoreSnapshot {
                StoreSnapshot {
                    $($field: self.$field.values().cloned().collect(),)+
                    high_water: self.high_water.clone(),
                }
            }

            pub fn from_snapshot(snapshot: StoreSnapshot) -> Self {
                CanonicalStore {
                    $($field: snapshot.$field.into_iter().map(|r| (r.key(), r)).collect(),)+
                    high_water: snapshot.high_water,
                }
            }
        }

        /// Serialized form of a store: each relation as a key-ordered list.
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        pub struct StoreSnapshot {
            $(#[serde(default)] pub $field: Vec<$ty>,)+
            #[serde(default)]
            pub high_water: BTreeMap<Sequence, i64>,
        }
    };
}

relations! {
    Patient: Patient => patients,
    Condition: Condition => conditions,
    Test: Test => tests,
    Pregnancy: Pregnancy => pregnancies,
    ConditionLink: ConditionLink => condition_links,
    Examination: Examination => examinations,
    ExaminationTest: ExaminationTest => examination_tests,
    Delivery: Delivery => deliveries,
    ProgrammedCSection: ProgrammedCSection => programmed_c_sections,
    DeliveryWithLabor: DeliveryWithLabor => deliveries_with_labor,
    Induction: Induction => inductions,
    Newborn: Newborn => newborns,
    Tracing: Tracing => tracings,
    Measurement: Measurement => measurements,
    NewbornMeasurement: NewbornMeasurement => newborn_measurements,
}

impl Record {
    /// The identity sequence and id this record draws, if any.
    pub fn sequence_id(&self) -> Option<(Sequence, i64)> {
        match self {
            Record::Pregnancy(r) => Some((Sequence::Pregnancy, r.id)),
            Record::Condition(r) => Some((Sequence::Condition, r.id)),
            Record::Examination(r) => Some((Sequence::Examination, r.id)),
            Record::Test(r) => Some((Sequence::Test, r.id)),
            Record::Tracing(r) => Some((Sequence::Tracing, r.tracing_id)),
            _ => None,
        }
    }
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation())?;
        match self {
            RecordKey::Patient(tc) => write!(f, "tc={tc}"),
            RecordKey::Condition(id) | RecordKey::Test(id) | RecordKey::Examination(id) => write!(f, "id={id}"),
            RecordKey::Pregnancy(id) => write!(f, "id={id}"),
            RecordKey::Tracing(id) => write!(f, "tracing_id={id}"),
            RecordKey::Delivery(id) | RecordKey::ProgrammedCSection(id) | RecordKey::DeliveryWithLabor(id) => {
                write!(f, "pregnancy_id={id}")
            }
            RecordKey::ConditionLink((p, c)) => write!(f, "pregnancy_id={p}, condition_id={c}"),
            RecordKey::ExaminationTest((e, t)) => write!(f, "examination_id={e}, test_id={t}"),
            RecordKey::Induction((p, t)) => write!(f, "pregnancy_id={p}, administration_time={t}"),
            RecordKey::Newborn((p, t)) => write!(f, "pregnancy_id={p}, birth_time={t}"),
            RecordKey::Measurement((tr, ts)) => write!(f, "tracing_id={tr}, ts={ts}"),
            RecordKey::NewbornMeasurement((tr, ts, p, b)) => {
                write!(f, "tracing_id={tr}, ts={ts}, pregnancy_id={p}, birth_time={b}")
            }
        }?;
        f.write_str(")")
    }
}

impl CanonicalStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn bump_sequence(&mut self, record: &Record) {
        if let Some((seq, id)) = record.sequence_id() {
            let hw = self.high_water.entry(seq).or_insert(0);
            *hw = (*hw).max(id);
        }
    }

    pub fn high_water(&self, seq: Sequence) -> i64 {
        self.high_water.get(&seq).copied().unwrap_or(0)
    }

    /// First id not yet issued by `seq`.
    pub fn next_id(&self, seq: Sequence) -> i64 {
        self.high_water(seq) + 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("store snapshot serializes")
    }

    pub fn pregnancy_by_natural_key(&self, tc: &TaxCode, first_exam_date: NaiveDate) -> Option<&Pregnancy> {
        self.pregnancies.values().find(|p| &p.patient_tc == tc && p.first_exam_date == first_exam_date)
    }

    pub fn pregnancies_of(&self, tc: &TaxCode) -> impl Iterator<Item = &Pregnancy> {
        let tc = tc.clone();
        self.pregnancies.values().filter(move |p| p.patient_tc == tc)
    }

    pub fn examinations_of(&self, pregnancy_id: PregnancyId) -> impl Iterator<Item = &Examination> {
        self.examinations.values().filter(move |e| e.pregnancy_id == pregnancy_id)
    }

    pub fn condition_by_name(&self, name: &str) -> Option<&Condition> {
        self.conditions.values().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn test_by_name(&self, name: &str) -> Option<&Test> {
        self.tests.values().find(|t| t.name == name)
    }

    pub fn newborns_of(&self, pregnancy_id: PregnancyId) -> impl Iterator<Item = &Newborn> {
        self.newborns
            .range((pregnancy_id, Timestamp::MIN)..=(pregnancy_id, Timestamp::MAX))
            .map(|(_, n)| n)
    }

    pub fn inductions_of(&self, pregnancy_id: PregnancyId) -> impl Iterator<Item = &Induction> {
        self.inductions
            .range((pregnancy_id, Timestamp::MIN)..=(pregnancy_id, Timestamp::MAX))
            .map(|(_, i)| i)
    }

    pub fn newborn_measurements_at(&self, tracing_id: TracingId, ts: Timestamp) -> impl Iterator<Item = &NewbornMeasurement> {
        self.newborn_measurements
            .range((tracing_id, ts, i64::MIN, Timestamp::MIN)..=(tracing_id, ts, i64::MAX, Timestamp::MAX))
            .map(|(_, m)| m)
    }

    pub fn measurements_of(&self, tracing_id: TracingId) -> impl Iterator<Item = &Measurement> {
        self.measurements
            .range((tracing_id, Timestamp::MIN)..=(tracing_id, Timestamp::MAX))
            .map(|(_, m)| m)
    }
}

impl Serialize for CanonicalStore {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.snapshot().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CanonicalStore {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        StoreSnapshot::deserialize(deserializer).map(CanonicalStore::from_snapshot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_catalog;
    use crate::sample::sample_store;

    #[test]
    fn rows_match_catalog_arity() {
        let catalog = build_catalog();
        let store = sample_store();
        for relation in &catalog.relations {
            let rows = store.rows(&relation.name).expect("relation known to store");
            assert!(!rows.is_empty(), "sample store populates {}", relation.name);
            for row in rows {
                assert_eq!(row.len(), relation.columns.len(), "{}", relation.name);
            }
        }
        assert_eq!(RELATION_NAMES.len(), catalog.relations.len());
    }

    #[test]
    fn snapshot_round_trip() {
        let store = sample_store();
        let json = store.to_json();
        let back: CanonicalStore = serde_json::from_str(&json).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn record_json_is_tagged_by_relation() {
        let store = sample_store();
        let record = Record::Patient(store.patients().values().next().unwrap().clone());
        let json = serde_json::to_value(&record).unwrap();
        assert_eq!(json["relation"], "patient");
        let key = serde_json::to_value(record.key()).unwrap();
        assert_eq!(key["relation"], "patient");
    }

    #[test]
    fn sequences_track_high_water() {
        let store = sample_store();
        assert!(store.next_id(Sequence::Pregnancy) > *store.pregnancies().keys().max().unwrap());
    }
}
