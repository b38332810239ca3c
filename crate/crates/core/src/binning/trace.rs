use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Partition, TimeWindow};
use crate::error::{Error, Result};
use crate::stat_tests::IntervalVerdict;

/// Why a split point entered the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Admission {
    /// Both halves passed the Poisson-property test.
    Tested,
    /// The interval failed the test and no tested split was found in the
    /// retry budget; the best-scoring drawn split was used.
    Refined,
    /// Relaxed mode: the interval was longer than `2 eta`.
    Relaxed,
    /// Tikhonov mode: splits are not tested.
    Unconditional,
}

/// One drawn split of `[lower, upper)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub depth: usize,
    pub attempt: usize,
    pub admission: Option<Admission>,
    pub left: Option<IntervalVerdict>,
    pub right: Option<IntervalVerdict>,
}

/// A candidate partition visited by the search. Rejected candidates carry the
/// risks the partition would have had.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub knots: Vec<f64>,
    pub binned_risk: f64,
    pub penalized_risk: Option<f64>,
    /// The quantity the restart loop minimizes.
    pub objective: f64,
    pub accepted: bool,
    /// `None` for the initial single-bin partition.
    pub split: Option<SplitRecord>,
}

/// Every candidate of one restart, in visiting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub method: String,
    pub restart: usize,
    pub entries: Vec<TraceEntry>,
    /// Index of the accepted entry with the lowest objective; earlier wins ties.
    pub best: usize,
}

impl SearchTrace {
    pub fn best_entry(&self) -> &TraceEntry {
        &self.entries[self.best]
    }

    pub fn best_partition(&self, window: TimeWindow) -> Result<Partition> {
        Partition::new(window, self.best_entry().knots.clone())
    }

    /// The final partition of the restart, i.e. the last accepted entry.
    pub fn final_partition(&self, window: TimeWindow) -> Result<Partition> {
        let last = self.entries.iter().rev().find(|e| e.accepted).expect("the initial entry is accepted");
        Partition::new(window, last.knots.clone())
    }

    /// Running minimum of the objective over accepted entries, one value per
    /// accepted entry.
    pub fn running_best(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.entries
            .iter()
            .filter(|e| e.accepted)
            .map(|e| {
                best = best.min(e.objective);
                best
            })
            .collect()
    }
}

#[derive(Serialize)]
struct Line<'a> {
    method: &'a str,
    index: usize,
    #[serde(flatten)]
    entry: &'a TraceEntry,
    best_so_far: bool,
}

/// Writes one JSON object per trace entry.
pub fn write_traces(traces: &[SearchTrace], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for trace in traces {
        for (index, entry) in trace.entries.iter().enumerate() {
            let line = Line { method: &trace.method, index, entry, best_so_far: index == trace.best };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
