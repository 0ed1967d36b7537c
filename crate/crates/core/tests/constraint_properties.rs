use std::collections::BTreeSet;
use std::sync::OnceLock;

use peripartum_core::constraint::{check_rule, force_apply, full_scan, Check, Op, RuleId, Scope, Transaction, TxError};
use peripartum_core::model::DeliveryType;
use peripartum_core::store::{CanonicalStore, RecordKey};
use peripartum_core::synth::{conforming_counterpart, generate, inject_violation, SynthConfig};
use peripartum_core::apply_transaction;
use proptest::prelude::*;

fn stores() -> &'static Vec<CanonicalStore> {
    static STORES: OnceLock<Vec<CanonicalStore>> = OnceLock::new();
    STORES.get_or_init(|| (0..6).map(|seed| generate(&SynthConfig::new(seed, 15)).unwrap()).collect())
}

#[derive(Debug, Clone)]
enum Step {
    Delete(usize),
    Inject(usize, u64),
    Conform(usize, u64),
    Touch(usize),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        any::<usize>().prop_map(Step::Delete),
        (0..5usize, any::<u64>()).prop_map(|(r, s)| Step::Inject(r, s)),
        (0..5usize, any::<u64>()).prop_map(|(r, s)| Step::Conform(r, s)),
        any::<usize>().prop_map(Step::Touch),
    ]
}

fn build(store: &CanonicalStore, steps: &[Step]) -> Transaction {
    let keys: Vec<RecordKey> = store.keys().collect();
    let mut ops = Vec::new();
    for s in steps {
        match s {
            Step::Delete(i) => ops.push(Op::Delete { key: keys[i % keys.len()].clone() }),
            Step::Touch(i) => {
                let record = store.get(&keys[i % keys.len()]).unwrap();
                ops.push(Op::Update { record });
            }
            Step::Inject(r, seed) => ops.extend(inject_violation(store, RuleId::ALL[*r], *seed).unwrap().ops),
            Step::Conform(r, seed) => ops.extend(conforming_counterpart(store, RuleId::ALL[*r], *seed).unwrap().ops),
        }
    }
    Transaction { ops }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn commit_yields_clean_store_or_nothing(which in 0..6usize, steps in prop::collection::vec(step(), 0..4)) {
        let store = &stores()[which];
        let before = store.to_json();
        let tx = build(store, &steps);
        match apply_transaction(store, &tx) {
            Ok(next) => prop_assert!(full_scan(&next).is_empty()),
            Err(TxError::Rejected(v)) => prop_assert!(!v.is_empty()),
            Err(TxError::Malformed(m)) => prop_assert!(!m.is_empty()),
        }
        prop_assert_eq!(store.to_json(), before);
    }

    #[test]
    fn scoped_checks_agree_with_full_scan(
        which in 0..6usize,
        steps in prop::collection::vec(step(), 1..4),
        picks in prop::collection::vec(any::<usize>(), 1..40),
    ) {
        let store = &stores()[which];
        let Ok(broken) = force_apply(store, &build(store, &steps)) else { return Ok(()) };
        let keys: Vec<RecordKey> = broken.keys().collect();
        let scope: BTreeSet<RecordKey> = picks.iter().map(|i| keys[i % keys.len()].clone()).collect();
        for rule in RuleId::ALL {
            let full: BTreeSet<_> = check_rule(rule, &broken, &Scope::All).into_iter().collect();
            let scoped: BTreeSet<_> = check_rule(rule, &broken, &Scope::Keys(scope.clone())).into_iter().collect();
            prop_assert!(scoped.is_subset(&full), "{rule}: scoped found extra violations");
            for v in full.iter().filter(|v| scope.contains(&v.subject)) {
                prop_assert!(scoped.contains(v), "{rule}: scoped check missed {v}");
            }
        }
    }

    #[test]
    fn cr4_implies_delivery_type_consistency(which in 0..6usize, steps in prop::collection::vec(step(), 0..4)) {
        let store = &stores()[which];
        let Ok(s) = force_apply(store, &build(store, &steps)) else { return Ok(()) };
        let flagged: BTreeSet<RecordKey> = check_rule(RuleId::Cr4DeliverySpecialization, &s, &Scope::All)
            .into_iter()
            .map(|v| v.subject)
            .collect();
        for (id, d) in s.deliveries().iter() {
            if !flagged.contains(&RecordKey::Delivery(*id)) {
                prop_assert_eq!(
                    d.delivery_type == DeliveryType::ProgrammedCSection,
                    s.programmed_c_sections().contains_key(id)
                );
            }
        }
    }
}

#[test]
fn every_rule_has_a_rejected_and_a_committed_case() {
    let store = &stores()[0];
    for rule in RuleId::ALL {
        let bad = inject_violation(store, rule, 5).unwrap();
        let err = apply_transaction(store, &bad).unwrap_err();
        assert!(err.violations().iter().all(|v| v.rule == Check::Rule(rule)), "{rule}: {err:?}");
        let good = conforming_counterpart(store, rule, 5).unwrap();
        assert!(apply_transaction(store, &good).is_ok(), "{rule}");
    }
}
