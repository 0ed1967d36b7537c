//! Lints for query mistakes that run without error but answer the wrong
//! question.
//!
//! * L1: selecting `delivery_with_labor.motivation` without restricting
//!   `delivery_subtype`, which mixes operative-delivery reasons into
//!   C-section reasons.
//! * L2: a predicate comparing two column expressions of different type
//!   classes or different key families.
//! * L3: an EXISTS whose only correlation is a foreign-key equality, which a
//!   join expresses directly.

use peripartum_core::catalog::{Catalog, KeyFamily};
use serde::{Deserialize, Serialize};

use crate::ast::Span;
use crate::plan::TypeClass;
use crate::resolve::ResolvedPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LintRule {
    #[serde(rename = "L1_missing_subtype_filter")]
    MissingSubtypeFilter,
    #[serde(rename = "L2_join_key_type_mismatch")]
    JoinKeyTypeMismatch,
    #[serde(rename = "L3_exists_replaceable_by_join")]
    ExistsReplaceableByJoin,
}

impl LintRule {
    pub fn code(self) -> &'static str {
        match self {
            LintRule::MissingSubtypeFilter => "L1",
            LintRule::JoinKeyTypeMismatch => "L2",
            LintRule::ExistsReplaceableByJoin => "L3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LintFinding {
    pub rule: LintRule,
    pub location: Span,
    pub message: String,
    pub severity: Severity,
}

const SUBTYPE_TABLE: &str = "delivery_with_labor";

pub fn lint(plan: &ResolvedPlan, catalog: &Catalog) -> Vec<LintFinding> {
    let mut out = Vec::new();
    let facts = &plan.facts;

    for s in &facts.selects {
        let motivation = s.projected.iter().find(|p| p.origin.0 == SUBTYPE_TABLE && p.origin.1 == "motivation");
        let filtered = s.predicate_columns.iter().any(|(r, c)| r == SUBTYPE_TABLE && c == "delivery_subtype");
        if let (Some(p), false) = (motivation, filtered) {
            out.push(LintFinding {
                rule: LintRule::MissingSubtypeFilter,
                location: p.span,
                message: "delivery_with_labor.motivation is selected without a predicate on delivery_subtype, so \
                          reasons for operative and natural deliveries are mixed in; add e.g. \
                          WHERE delivery_subtype = 'emergency_c_section'"
                    .into(),
                severity: Severity::Warning,
            });
        }
    }

    for c in &facts.comparisons {
        if c.left.constant || c.right.constant {
            continue;
        }
        let (lc, rc) = (c.left.ty.class(), c.right.ty.class());
        let type_clash = lc != rc && lc != TypeClass::Null && rc != TypeClass::Null;
        let (lf, rf) = (c.left.key_family, c.right.key_family);
        let family_clash = lf != rf && lf != KeyFamily::Plain && rf != KeyFamily::Plain;
        if type_clash || family_clash {
            out.push(LintFinding {
                rule: LintRule::JoinKeyTypeMismatch,
                location: c.span,
                message: format!(
                    "{} {} {} compares {} ({}) with {} ({}); the values can never correspond",
                    c.left.text,
                    c.op.as_str(),
                    c.right.text,
                    c.left.ty.name(),
                    lf.as_str(),
                    c.right.ty.name(),
                    rf.as_str()
                ),
                severity: Severity::Error,
            });
        }
    }

    for e in &facts.exists {
        if e.negated {
            continue;
        }
        let Some(correlated) = &e.correlated else { continue };
        let [only] = correlated.as_slice() else { continue };
        let Some(((ir, ic), (or, oc))) = &only.equality else { continue };
        if catalog.is_foreign_key(ir, ic, or, oc) || catalog.is_foreign_key(or, oc, ir, ic) {
            out.push(LintFinding {
                rule: LintRule::ExistsReplaceableByJoin,
                location: e.span,
                message: format!(
                    "EXISTS is correlated only by the foreign key {or}.{oc} = {ir}.{ic}; a JOIN on that key would suffice"
                ),
                severity: Severity::Info,
            });
        }
    }
    out
}
