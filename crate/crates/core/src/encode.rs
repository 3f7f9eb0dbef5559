//! Trace-to-vector encodings.
//!
//! All layouts are block-major: turn outermost, card innermost in canonical
//! order. The `turn` scheme uses 34-wide blocks (17 play counts then 17 buy
//! counts) and zero-fills turns past the end of the game; the state-based
//! schemes use 17-wide blocks and repeat the final composition through turn 30.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cards::{PlayerTrace, N_CARDS};
use crate::error::{Error, Result};
use crate::par;
use crate::replay::{replay_trace, CompositionTimeline};

pub const MAX_TURNS: usize = 30;
pub const OPENING_TURNS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Turn,
    State,
    Opening,
    Normalized,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Turn, Scheme::State, Scheme::Opening, Scheme::Normalized];

    pub fn dim(self) -> usize {
        match self {
            Scheme::Turn => MAX_TURNS * 2 * N_CARDS,
            Scheme::State | Scheme::Normalized => MAX_TURNS * N_CARDS,
            Scheme::Opening => OPENING_TURNS * N_CARDS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Turn => "turn",
            Scheme::State => "state",
            Scheme::Opening => "opening",
            Scheme::Normalized => "normalized",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Param(format!("unknown scheme {s:?} (turn|state|opening|normalized)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub scheme: Scheme,
    pub trace_id: String,
}

fn check_len(trace: &PlayerTrace, min: usize) -> Result<()> {
    let n = trace.n_turns();
    if n > MAX_TURNS {
        return Err(Error::TraceTooLong { n_turns: n, max: MAX_TURNS });
    }
    if n < min {
        return Err(Error::TraceTooShort { n_turns: n, min });
    }
    Ok(())
}

/// Per-turn play and buy counts, zero past the last turn.
pub fn encode_turn(trace: &PlayerTrace) -> Result<FeatureVector> {
    check_len(trace, 1)?;
    let mut values = vec![0.0; Scheme::Turn.dim()];
    for (t, ev) in trace.turns.iter().enumerate() {
        let block = &mut values[t * 2 * N_CARDS..(t + 1) * 2 * N_CARDS];
        for c in &ev.plays {
            block[c.canonical_index()] += 1.0;
        }
        for c in &ev.buys {
            block[N_CARDS + c.canonical_index()] += 1.0;
        }
    }
    Ok(FeatureVector {
        values,
        scheme: Scheme::Turn,
        trace_id: trace.id(),
    })
}

fn count_blocks(timeline: &CompositionTimeline, n_blocks: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(n_blocks * N_CARDS);
    for t in 1..=n_blocks {
        values.extend(timeline.at_turn(t).counts().iter().map(|&c| f64::from(c)));
    }
    values
}

/// End-of-turn card counts, final state held through turn 30.
pub fn encode_state(trace: &PlayerTrace) -> Result<FeatureVector> {
    check_len(trace, 1)?;
    let timeline = replay_trace(trace)?;
    Ok(FeatureVector {
        values: count_blocks(&timeline, MAX_TURNS),
        scheme: Scheme::State,
        trace_id: trace.id(),
    })
}

/// End-of-turn card counts for the first ten turns only.
pub fn encode_opening(trace: &PlayerTrace) -> Result<FeatureVector> {
    check_len(trace, OPENING_TURNS)?;
    let timeline = replay_trace(trace)?;
    Ok(FeatureVector {
        values: count_blocks(&timeline, OPENING_TURNS),
        scheme: Scheme::Opening,
        trace_id: trace.id(),
    })
}

/// End-of-turn card proportions, final state held through turn 30. Every
/// 17-entry block sums to one.
pub fn encode_normalized(trace: &PlayerTrace) -> Result<FeatureVector> {
    check_len(trace, 1)?;
    let timeline = replay_trace(trace)?;
    let mut values = Vec::with_capacity(Scheme::Normalized.dim());
    for t in 1..=MAX_TURNS {
        let comp = timeline.at_turn(t);
        if comp.total() == 0 {
            return Err(Error::EmptyComposition { turn: t.min(trace.n_turns()) });
        }
        let block = comp.proportions();
        debug_assert!((block.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        values.extend_from_slice(&block);
    }
    Ok(FeatureVector {
        values,
        scheme: Scheme::Normalized,
        trace_id: trace.id(),
    })
}

pub fn encode(trace: &PlayerTrace, scheme: Scheme) -> Result<FeatureVector> {
    match scheme {
        Scheme::Turn => encode_turn(trace),
        Scheme::State => encode_state(trace),
        Scheme::Opening => encode_opening(trace),
        Scheme::Normalized => encode_normalized(trace),
    }
}

/// A row-major feature matrix with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    /// `None` for matrices that did not come from a trace encoder.
    pub scheme: Option<Scheme>,
    pub dim: usize,
    pub data: Vec<f64>,
    pub ids: Vec<String>,
    pub n_turns: Vec<usize>,
    pub labels: Vec<Option<String>>,
}

impl EncodedCorpus {
    pub fn empty(scheme: Option<Scheme>, dim: usize) -> Self {
        EncodedCorpus {
            scheme,
            dim,
            data: Vec::new(),
            ids: Vec::new(),
            n_turns: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Builds a corpus from raw rows, e.g. for synthetic test data.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Option<String>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut corpus = EncodedCorpus::empty(None, dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            corpus.data.extend_from_slice(row);
            corpus.ids.push(format!("row{i}"));
            corpus.n_turns.push(0);
        }
        if labels.len() != rows.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: labels.len() });
        }
        corpus.labels = labels;
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, fv: FeatureVector, n_turns: usize, label: Option<String>) -> Result<()> {
        if fv.values.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: fv.values.len() });
        }
        self.data.extend_from_slice(&fv.values);
        self.ids.push(fv.trace_id);
        self.n_turns.push(n_turns);
        self.labels.push(label);
        Ok(())
    }

    /// Header `trace_id,n_turns,label,f0..f{D-1}`; floats use the shortest
    /// representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["trace_id".to_string(), "n_turns".into(), "label".into()];
        header.extend((0..self.dim).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.dim + 3);
        for i in 0..self.len() {
            record.clear();
            record.push(self.ids[i].clone());
            record.push(self.n_turns[i].to_string());
            record.push(self.labels[i].clone().unwrap_or_default());
            record.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "trace_id" || &headers[1] != "n_turns" || &headers[2] != "label" {
            return Err(Error::format("corpus csv", "expected header trace_id,n_turns,label,f0,..."));
        }
        let dim = headers.len() - 3;
        let scheme = Scheme::ALL.into_iter().find(|s| s.dim() == dim && *s != Scheme::Normalized);
        let mut corpus = EncodedCorpus::empty(scheme, dim);
        for (line, row) in r.records().enumerate() {
            let row = row?;
            let bad = |reason: String| Error::format("corpus csv", format!("row {}: {reason}", line + 1));
            corpus.ids.push(row[0].to_string());
            corpus
                .n_turns
                .push(row[1].parse().map_err(|e| bad(format!("n_turns: {e}")))?);
            corpus.labels.push(Some(row[2].to_string()).filter(|s| !s.is_empty()));
            for v in row.iter().skip(3) {
                corpus.data.push(v.parse().map_err(|e| bad(format!("{v:?}: {e}")))?);
            }
        }
        // State and normalized share a width; block sums of one identify the latter.
        if corpus.dim == Scheme::Normalized.dim() && !corpus.is_empty() {
            let normalized = corpus.data.chunks(N_CARDS).all(|b| (b.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            corpus.scheme = Some(if normalized { Scheme::Normalized } else { Scheme::State });
        }
        Ok(corpus)
    }
}

/// Encodes every trace in order. Failures are collected and reported together.
pub fn encode_corpus(traces: &[PlayerTrace], scheme: Scheme) -> Result<EncodedCorpus> {
    let encoded = par::map(traces, |t| encode(t, scheme));
    let mut corpus = EncodedCorpus::empty(Some(scheme), scheme.dim());
    corpus.data.reserve(traces.len() * scheme.dim());
    let mut failures = Vec::new();
    for (trace, result) in traces.iter().zip(encoded) {
        match result {
            Ok(fv) => corpus.push(fv, trace.n_turns(), trace.label.clone())?,
            Err(e) => failures.push((trace.id(), e)),
        }
    }
    if failures.is_empty() {
        Ok(corpus)
    } else {
        Err(Error::Encode(failures))
    }
}
