//! Offline answers for the eight reference questions.

use std::sync::Arc;
use std::time::Instant;

use peripartum_core::build_catalog;
use peripartum_core::synth::{generate, SynthConfig};
use peripartum_nl2sql::{ExchangeStage, PromptOptions, Session, StubModel};
use peripartum_sql::corpus;
use peripartum_sql::guardrail::Limits;

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn session(seed: u64) -> Session {
    Session::new(
        Arc::new(build_catalog()),
        generate(&SynthConfig::new(seed, 200)).unwrap(),
        Arc::new(StubModel::builtin()),
        &PromptOptions::default(),
        Limits::default(),
    )
}

#[test]
fn one_flagged_and_seven_clean() {
    let s = session(11);
    let start = Instant::now();
    let mut flagged = Vec::new();
    let mut clean = 0;
    for entry in corpus::model_outputs() {
        let ex = s.answer(entry.question);
        assert!(ex.error.is_none(), "{}: {:?}", entry.id, ex.error);
        assert!(ex.result.is_some(), "{}", entry.id);
        if ex.flagged("L1") {
            flagged.push(entry.id);
        } else {
            clean += 1;
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(flagged, ["c_section_motivations"]);
    assert_eq!(clean, 7);
}

#[test]
fn stub_reproduces_reference_sql() {
    let s = session(1);
    for entry in corpus::model_outputs() {
        let ex = s.answer(entry.question);
        assert_eq!(squash(ex.sql.as_deref().unwrap()), squash(entry.sql), "{}", entry.id);
    }
}

#[test]
fn motivations_answer_runs_with_warning() {
    let s = session(2);
    let ex = s.answer("Retrieve all motivations for C-sections, both programmed and with labor.");
    assert!(ex.flagged("L1"));
    let rows = &ex.result.as_ref().unwrap().rows;
    // The unfiltered union also returns non-C-section labor motivations.
    let corrected = s.run_edited("", corpus::MOTIVATIONS_CORRECTED);
    assert!(!corrected.flagged("L1"));
    assert!(rows.len() >= corrected.result.unwrap().rows.len());
}

#[test]
fn answering_never_changes_the_store() {
    let s = session(3);
    let before = s.store().clone();
    for entry in corpus::model_outputs() {
        s.answer(entry.question);
    }
    s.run_edited("", "DELETE FROM patient");
    assert_eq!(s.store(), &before);
}

#[test]
fn stub_answers_are_deterministic() {
    for entry in corpus::model_outputs() {
        let a = session(4).answer(entry.question).without_timing();
        let b = session(4).answer(entry.question).without_timing();
        assert_eq!(a, b);
    }
}

#[test]
fn unknown_question_is_a_translation_error() {
    let ex = session(5).answer("Which midwife was on shift?");
    assert_eq!(ex.error.unwrap().stage, ExchangeStage::Translate);
}
