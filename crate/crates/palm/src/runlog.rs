//! JSON-lines run log: one trial record per line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use palm_core::driver::{RunHooks, RunState, TrialRecord};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<(), RunLogError> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| RunLogError::Json { line: 0, source: e })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, RunLogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RunLogError::Json { line: i + 1, source: e })?);
    }
    Ok(out)
}

/// Hooks that append each new trial to a log as soon as it is recorded.
pub struct StreamingLog<W: Write> {
    out: W,
    written: usize,
    pub error: Option<io::Error>,
    now: fn() -> u64,
}

impl<W: Write> StreamingLog<W> {
    pub fn new(out: W) -> Self {
        StreamingLog { out, written: 0, error: None, now: unix_millis }
    }

    pub fn get_mut(&mut self) -> &mut W {
        &mut self.out
    }
}

pub fn unix_millis() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl<W: Write> RunHooks for StreamingLog<W> {
    fn now_millis(&self) -> u64 {
        (self.now)()
    }

    fn on_progress(&mut self, state: &RunState) {
        for r in &state.trials[self.written..] {
            let line = serde_json::to_string(r).expect("trial records serialize");
            if let Err(e) = writeln!(self.out, "{line}").and_then(|()| self.out.flush()) {
                self.error.get_or_insert(e);
            }
        }
        self.written = state.trials.len();
    }
}
