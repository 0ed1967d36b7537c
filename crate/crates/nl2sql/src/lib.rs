//! Natural-language questions to guarded SQL: context prompt construction,
//! model back ends (remote or stub), SQL extraction and the answer loop.

pub mod extract;
pub mod gateway;
pub mod model;
pub mod prompt;

pub use extract::extract_sql;
pub use gateway::{ChatExchange, ExchangeStage, Session};
pub use model::{normalize_question, Model, RemoteConfig, RemoteModel, StubModel, TranslateError, API_KEY_ENV};
pub use prompt::{build_context_prompt, ContextPrompt, PromptOptions};
