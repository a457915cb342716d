use serde::{Deserialize, Serialize};

use super::{apply, ApplyOutcome, EngineError, Transformation};
use crate::model::Dataset;

/// One record of the transformation log. `recorded_at` carries no meaning
/// for replay and is ignored by equality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub transformation: Transformation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded_at: Option<String>,
}

impl PartialEq for LogEntry {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq && self.transformation == other.transformation
    }
}

impl LogEntry {
    pub fn new(seq: u64, transformation: Transformation) -> Self {
        Self { seq, transformation, recorded_at: None }
    }
}

fn step(d: &Dataset, t: &Transformation) -> (Option<Dataset>, ApplyOutcome) {
    match apply(d, t) {
        Ok(next) => (Some(next), ApplyOutcome::Applied),
        Err(e) => (None, ApplyOutcome::SkippedWithWarning { reason: e.to_string() }),
    }
}

/// Folds the log over `source`. Entries that no longer apply are skipped
/// with a warning; replay never aborts.
pub fn replay(source: &Dataset, log: &[LogEntry]) -> (Dataset, Vec<ApplyOutcome>) {
    let mut current = source.clone();
    let mut outcomes = Vec::with_capacity(log.len());
    for entry in log {
        let (next, outcome) = step(&current, &entry.transformation);
        if let Some(next) = next {
            current = next;
        }
        outcomes.push(outcome);
    }
    (current, outcomes)
}

/// A pristine source snapshot, the applied log and the redo stack. The
/// current dataset always equals the replay of the log over the source.
#[derive(Debug, Clone)]
pub struct Session {
    source: Dataset,
    current: Dataset,
    log: Vec<LogEntry>,
    outcomes: Vec<ApplyOutcome>,
    redo: Vec<LogEntry>,
}

impl Session {
    pub fn new(source: Dataset) -> Self {
        Self { current: source.clone(), source, log: Vec::new(), outcomes: Vec::new(), redo: Vec::new() }
    }

    /// Rebuilds a session by replaying a stored log.
    pub fn from_log(source: Dataset, log: Vec<LogEntry>) -> Self {
        let (current, outcomes) = replay(&source, &log);
        Self { source, current, log, outcomes, redo: Vec::new() }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.current
    }

    pub fn source(&self) -> &Dataset {
        &self.source
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn outcomes(&self) -> &[ApplyOutcome] {
        &self.outcomes
    }

    pub fn redo_stack(&self) -> &[LogEntry] {
        &self.redo
    }

    pub fn next_seq(&self) -> u64 {
        self.log.last().map_or(1, |e| e.seq + 1)
    }

    /// Applies a new transformation. Rejected transformations are not logged
    /// and leave the session unchanged. The redo stack is discarded.
    pub fn apply(&mut self, t: Transformation) -> Result<&LogEntry, EngineError> {
        let next = apply(&self.current, &t)?;
        self.current = next;
        self.redo.clear();
        self.log.push(LogEntry::new(self.next_seq(), t));
        self.outcomes.push(ApplyOutcome::Applied);
        Ok(self.log.last().expect("just pushed"))
    }

    /// Removes the last entry and recomputes the dataset from the source.
    pub fn undo(&mut self) -> Result<&LogEntry, EngineError> {
        let entry = self.log.pop().ok_or(EngineError::NothingToUndo)?;
        self.outcomes.pop();
        let (current, _) = replay(&self.source, &self.log);
        self.current = current;
        self.redo.push(entry);
        Ok(self.redo.last().expect("just pushed"))
    }

    pub fn redo(&mut self) -> Result<(&LogEntry, &ApplyOutcome), EngineError> {
        let entry = self.redo.pop().ok_or(EngineError::NothingToRedo)?;
        let (next, outcome) = step(&self.current, &entry.transformation);
        if let Some(next) = next {
            self.current = next;
        }
        self.log.push(entry);
        self.outcomes.push(outcome);
        Ok((self.log.last().expect("just pushed"), self.outcomes.last().expect("just pushed")))
    }

    /// Swaps in a new source and replays the whole log over it.
    pub fn replace_source(&mut self, source: Dataset) -> &[ApplyOutcome] {
        let (current, outcomes) = replay(&source, &self.log);
        self.source = source;
        self.current = current;
        self.outcomes = outcomes;
        self.redo.clear();
        &self.outcomes
    }

    /// Sets the timestamp on the newest entry.
    pub fn stamp_last(&mut self, recorded_at: String) {
        if let Some(e) = self.log.last_mut() {
            e.recorded_at = Some(recorded_at);
        }
    }
}
