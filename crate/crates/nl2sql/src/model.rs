//! Chat-completion back ends: an OpenAI-compatible HTTP endpoint and a
//! deterministic offline stub.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub const API_KEY_ENV: &str = "NL2SQL_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranslateError {
    #[error("model endpoint unreachable: {message}")]
    Transport { message: String },
    #[error("model endpoint timed out after {seconds} s")]
    Timeout { seconds: u64 },
    #[error("model endpoint answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed model response: {message}")]
    BadResponse { message: String },
    #[error("the model reply contains no SQL statement")]
    NoSql,
}

/// A chat-completion back end.
pub trait Model: Send + Sync {
    /// Returns the reply text for one system + user exchange.
    fn complete(&self, system: &str, user: &str) -> Result<String, TranslateError>;

    fn describe(&self) -> String;
}

/// Lowercase, whitespace collapsed, trailing punctuation stripped.
pub fn normalize_question(q: &str) -> String {
    let collapsed = q.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed.trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace()).to_string()
}

/// Canned replies keyed by normalised question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubModel {
    table: BTreeMap<String, String>,
}

const BUILTIN_TABLE: &str = include_str!("../data/stub_table.json");

impl StubModel {
    /// The shipped table: the eight reference questions and the SQL the
    /// evaluated model produced for them.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_TABLE).expect("shipped stub table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, String> = serde_json::from_str(text)?;
        Ok(StubModel { table: raw.into_iter().map(|(q, sql)| (normalize_question(&q), sql)).collect() })
    }

    pub fn sql_for(&self, question: &str) -> Option<&str> {
        self.table.get(&normalize_question(question)).map(String::as_str)
    }

    pub fn questions(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(String::as_str)
    }
}

impl Model for StubModel {
    fn complete(&self, _system: &str, user: &str) -> Result<String, TranslateError> {
        Ok(match self.sql_for(user) {
            Some(sql) => format!("```sql\n{sql}\n```"),
            None => "I have no query for that question.".to_string(),
        })
    }

    fn describe(&self) -> String {
        format!("stub ({} questions)", self.table.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL; requests go to `<base>/v1/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
    pub temperature: f64,
    /// Bearer token. `None` sends no Authorization header.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl RemoteConfig {
    /// Config with the token taken from the environment.
    pub fn from_env(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            model: model.into(),
            timeout: Duration::from_secs(120),
            temperature: 0.0,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

pub struct RemoteModel {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteModel {
    pub fn new(config: RemoteConfig) -> Result<Self, TranslateError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| TranslateError::Transport { message: e.to_string() })?;
        Ok(RemoteModel { config, client })
    }

    fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

impl Model for RemoteModel {
    fn complete(&self, system: &str, user: &str) -> Result<String, TranslateError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.config.temperature,
        });
        let mut request = self.client.post(self.url()).json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                TranslateError::Timeout { seconds: self.config.timeout.as_secs() }
            } else {
                TranslateError::Transport { message: e.to_string() }
            }
        })?;
        let status = response.status();
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                TranslateError::Timeout { seconds: self.config.timeout.as_secs() }
            } else {
                TranslateError::Transport { message: e.to_string() }
            }
        })?;
        if !status.is_success() {
            return Err(TranslateError::Http { status: status.as_u16(), body: text });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TranslateError::BadResponse { message: e.to_string() })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TranslateError::BadResponse { message: "missing choices[0].message.content".into() })
    }

    fn describe(&self) -> String {
        format!("{} at {}", self.config.model, self.config.base_url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        assert_eq!(normalize_question("  Count   the C-sections.  "), "count the c-sections");
        assert_eq!(normalize_question("What?!"), "what");
    }

    #[test]
    fn stub_has_eight_questions() {
        let stub = StubModel::builtin();
        assert_eq!(stub.questions().count(), 8);
        assert!(stub.sql_for("RETRIEVE all motivations for C-sections, both programmed and with labor").is_some());
    }

    #[test]
    fn stub_miss_gives_prose() {
        let reply = StubModel::builtin().complete("", "how tall is the hospital?").unwrap();
        assert!(crate::extract::extract_sql(&reply).is_none());
    }
}
