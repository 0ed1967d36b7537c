//! Schema-aware context prompt: directives, the full DDL and, optionally,
//! notes on facts the integrity rules enforce but the DDL cannot express.

use peripartum_core::{emit_ddl, Catalog};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Append per-table notes stating rule-enforced facts.
    pub include_comments: bool,
    pub directives: Vec<String>,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions { include_comments: false, directives: default_directives() }
    }
}

impl PromptOptions {
    pub fn with_comments(include_comments: bool) -> Self {
        PromptOptions { include_comments, ..Self::default() }
    }
}

pub fn default_directives() -> Vec<String> {
    [
        "Generate read-only SQL: a single SELECT statement, never INSERT, UPDATE, DELETE or DDL.",
        "Target dialect: PostgreSQL.",
        "Answer with exactly one SQL query inside a ```sql fenced code block.",
        "Use only the tables and columns defined in the schema below.",
    ]
    .map(String::from)
    .to_vec()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextPrompt {
    pub ddl_text: String,
    pub directives: Vec<String>,
    /// Schema notes, empty unless requested.
    pub comments: Vec<String>,
    pub rendered: String,
}

/// Facts guaranteed by the integrity rules, keyed by the relation they
/// describe. Only notes for relations present in the catalog are used.
const SCHEMA_NOTES: &[(&str, &str)] = &[
    (
        "patient",
        "tc is the patient's tax code; only pregnancy.patient_tc refers to it, every clinical table joins through pregnancy.id",
    ),
    ("pregnancy", "every pregnancy has at least one examination or a delivery"),
    ("examination", "at most one first_trimester and one second_trimester examination per pregnancy"),
    ("examination_test", "result always conforms to the result_type of the referenced test"),
    (
        "delivery",
        "one delivery per pregnancy; each delivery is specialised by exactly one row in either programmed_c_section or delivery_with_labor, never both",
    ),
    ("programmed_c_section", "each programmed C-section is linked to exactly one delivery through pregnancy_id"),
    (
        "delivery_with_labor",
        "each labor delivery is linked to exactly one delivery through pregnancy_id; it covers natural, operative and emergency C-section deliveries, so filter on delivery_subtype = 'emergency_c_section' to select emergency C-sections only",
    ),
    ("measurement", "each CTG measurement carries at least one maternal or fetal value"),
];

pub fn build_context_prompt(catalog: &Catalog, options: &PromptOptions) -> ContextPrompt {
    // Catalogs reaching this point were validated on construction.
    let ddl_text = emit_ddl(catalog).expect("catalog foreign keys are acyclic");
    let comments: Vec<String> = if options.include_comments {
        SCHEMA_NOTES
            .iter()
            .filter(|(rel, _)| catalog.relation(rel).is_some())
            .map(|(rel, note)| format!("-- {rel}: {note}"))
            .collect()
    } else {
        Vec::new()
    };

    let mut rendered = String::from(
        "You translate clinicians' questions about a peripartum database into SQL.\n\nInstructions:\n",
    );
    for d in &options.directives {
        rendered.push_str("- ");
        rendered.push_str(d);
        rendered.push('\n');
    }
    rendered.push_str("\nDatabase schema:\n\n");
    rendered.push_str(&ddl_text);
    if !comments.is_empty() {
        if !rendered.ends_with('\n') {
            rendered.push('\n');
        }
        rendered.push_str("\nSchema notes:\n");
        for c in &comments {
            rendered.push_str(c);
            rendered.push('\n');
        }
    }
    ContextPrompt { ddl_text, directives: options.directives.clone(), comments, rendered }
}
