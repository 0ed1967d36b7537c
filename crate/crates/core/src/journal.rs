//! Append-only JSON-lines journal of committed transactions and NL2SQL
//! exchanges. Replaying it from empty reconstructs the store exactly.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraint::{apply_transaction, Transaction, TxError};
use crate::store::CanonicalStore;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EntryBody {
    Transaction(Transaction),
    /// Opaque to the store; written by the NL2SQL gateway.
    Exchange(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub seq: u64,
    pub ts: Timestamp,
    #[serde(flatten)]
    pub body: EntryBody,
}

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("journal corrupt at line {line} (last valid seq {last_valid_seq}): {reason}")]
    Corrupt { line: usize, last_valid_seq: u64, reason: String },
    #[error("journal entry seq {seq} does not apply: {error}")]
    Replay { seq: u64, error: TxError },
}

#[derive(Debug, thiserror::Error)]
pub enum CommitError {
    #[error(transparent)]
    Rejected(#[from] TxError),
    #[error(transparent)]
    Journal(#[from] JournalError),
}

/// Result of replaying a journal.
#[derive(Debug, Clone, Default)]
pub struct Replay {
    pub store: CanonicalStore,
    pub exchanges: Vec<serde_json::Value>,
    pub last_seq: u64,
    pub transactions: usize,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> JournalError + '_ {
    move |source| JournalError::Io { path: path.to_path_buf(), source }
}

/// Reads and replays every entry. A missing file is an empty journal.
pub fn replay(path: &Path) -> Result<Replay, JournalError> {
    let mut out = Replay::default();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        number += 1;
        let corrupt = |reason: String| JournalError::Corrupt { line: number, last_valid_seq: out.last_seq, reason };
        if !line.ends_with('\n') {
            return Err(corrupt("torn final entry (no newline)".into()));
        }
        if line.trim().is_empty() {
            continue;
        }
        let entry: Entry = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        if entry.seq != out.last_seq + 1 {
            return Err(corrupt(format!("expected seq {}, found {}", out.last_seq + 1, entry.seq)));
        }
        match entry.body {
            EntryBody::Transaction(tx) => {
                out.store = apply_transaction(&out.store, &tx)
                    .map_err(|error| JournalError::Replay { seq: entry.seq, error })?;
                out.transactions += 1;
            }
            EntryBody::Exchange(v) => out.exchanges.push(v),
        }
        out.last_seq = entry.seq;
    }
    Ok(out)
}

/// Cuts the file after the last entry that parses, returning its seq.
pub fn truncate_torn_tail(path: &Path) -> Result<u64, JournalError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let mut keep = 0usize;
    let mut last = 0u64;
    let mut offset = 0usize;
    for chunk in bytes.split_inclusive(|b| *b == b'\n') {
        let end = offset + chunk.len();
        if !chunk.ends_with(b"\n") {
            break;
        }
        let text = String::from_utf8_lossy(chunk);
        if !text.trim().is_empty() {
            match serde_json::from_str::<Entry>(&text) {
                Ok(e) if e.seq == last + 1 => last = e.seq,
                _ => break,
            }
        }
        keep = end;
        offset = end;
    }
    let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
    file.set_len(keep as u64).map_err(io_err(path))?;
    file.sync_all().map_err(io_err(path))?;
    Ok(last)
}

/// An open journal positioned for appending.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
    last_seq: u64,
}

impl Journal {
    /// Replays `path` (creating it if absent) and opens it for appending.
    pub fn open(path: impl AsRef<Path>) -> Result<(Journal, Replay), JournalError> {
        let path = path.as_ref().to_path_buf();
        let replayed = replay(&path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err(&path))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let journal = Journal { path, file, last_seq: replayed.last_seq };
        Ok((journal, replayed))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    fn append(&mut self, body: EntryBody) -> Result<u64, JournalError> {
        let entry = Entry { seq: self.last_seq + 1, ts: Timestamp::now(), body };
        let mut line = serde_json::to_string(&entry).expect("journal entries serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))?;
        self.last_seq = entry.seq;
        Ok(entry.seq)
    }

    /// Checks `tx` against `store`, journals it, and returns the new store.
    /// Nothing is written when the transaction is rejected.
    pub fn commit(&mut self, store: &CanonicalStore, tx: &Transaction) -> Result<CanonicalStore, CommitError> {
        let next = apply_transaction(store, tx)?;
        self.append(EntryBody::Transaction(tx.clone()))?;
        Ok(next)
    }

    pub fn record_exchange(&mut self, exchange: &impl Serialize) -> Result<u64, JournalError> {
        let value = serde_json::to_value(exchange).expect("exchanges serialize");
        self.append(EntryBody::Exchange(value))
    }
}
