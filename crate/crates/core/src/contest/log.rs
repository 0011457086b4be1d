use std::io::{self, BufRead, Write};
use std::sync::Arc;

use parking_lot::Mutex;

use super::{ContestError, OpinionLogEntry};

/// Destination of accepted opinions. Appends happen in opinion id order.
pub trait LogSink: Send {
    fn append(&mut self, entry: &OpinionLogEntry) -> io::Result<()>;
}

/// Discards entries.
#[derive(Debug, Default)]
pub struct NullLog;

impl LogSink for NullLog {
    fn append(&mut self, _entry: &OpinionLogEntry) -> io::Result<()> {
        Ok(())
    }
}

/// Keeps entries in memory; clones share the same buffer.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    entries: Arc<Mutex<Vec<OpinionLogEntry>>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> Vec<OpinionLogEntry> {
        self.entries.lock().clone()
    }

    pub fn take(&self) -> Vec<OpinionLogEntry> {
        std::mem::take(&mut *self.entries.lock())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Renders the buffer in the on-disk JSON-lines format.
    pub fn to_json_lines(&self) -> String {
        let mut out = Vec::new();
        let mut w = JsonLinesLog::new(&mut out);
        for e in self.entries.lock().iter() {
            w.append(e).expect("writing to memory");
        }
        drop(w);
        String::from_utf8(out).expect("json is utf-8")
    }
}

impl LogSink for MemoryLog {
    fn append(&mut self, entry: &OpinionLogEntry) -> io::Result<()> {
        self.entries.lock().push(entry.clone());
        Ok(())
    }
}

/// One JSON object per line, flushed after every entry.
pub struct JsonLinesLog<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesLog<W> {
    pub fn new(out: W) -> Self {
        JsonLinesLog { out }
    }
}

impl<W: Write + Send> LogSink for JsonLinesLog<W> {
    fn append(&mut self, entry: &OpinionLogEntry) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, entry)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

/// Parses a JSON-lines log, checking that opinion ids strictly increase.
pub fn read_log<R: BufRead>(source: R) -> Result<Vec<OpinionLogEntry>, ContestError> {
    let mut entries: Vec<OpinionLogEntry> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: OpinionLogEntry =
            serde_json::from_str(&line).map_err(|e| ContestError::CorruptLog {
                line: line_no,
                message: e.to_string(),
            })?;
        if let Some(prev) = entries.last() {
            if entry.opinion_id <= prev.opinion_id {
                return Err(ContestError::CorruptLog {
                    line: line_no,
                    message: format!(
                        "opinion id {} does not follow {}",
                        entry.opinion_id, prev.opinion_id
                    ),
                });
            }
        }
        entries.push(entry);
    }
    Ok(entries)
}
