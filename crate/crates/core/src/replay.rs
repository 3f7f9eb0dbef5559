//! Folds a trace's events into end-of-turn deck compositions.

use crate::cards::{starting_deck, Composition, PlayerTrace, TurnEvents};
use crate::error::{Error, Result};

/// End-of-turn compositions; `snapshots[t - 1]` is the state after turn `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionTimeline {
    pub origin: Composition,
    pub snapshots: Vec<Composition>,
}

impl CompositionTimeline {
    pub fn n_turns(&self) -> usize {
        self.snapshots.len()
    }

    /// State at the end of `turn` (1-based), holding the final state past the
    /// last turn. Turn 0 is the starting deck.
    pub fn at_turn(&self, turn: usize) -> &Composition {
        if turn == 0 {
            return &self.origin;
        }
        let i = turn.min(self.snapshots.len());
        if i == 0 {
            &self.origin
        } else {
            &self.snapshots[i - 1]
        }
    }

    pub fn last(&self) -> &Composition {
        self.snapshots.last().unwrap_or(&self.origin)
    }
}

/// Adds buys and gains, then removes trashes. Plays never change ownership.
pub fn apply_turn(state: &Composition, events: &TurnEvents) -> Result<Composition> {
    let mut next = *state;
    for &card in events.buys.iter().chain(&events.gains) {
        next.add(card);
    }
    for &card in &events.trashes {
        if !next.remove(card) {
            return Err(Error::InconsistentTrace {
                turn: events.turn,
                card,
            });
        }
    }
    Ok(next)
}

pub fn replay_trace(trace: &PlayerTrace) -> Result<CompositionTimeline> {
    let origin = starting_deck();
    let mut snapshots = Vec::with_capacity(trace.turns.len());
    let mut state = origin;
    for events in &trace.turns {
        state = apply_turn(&state, events)?;
        snapshots.push(state);
    }
    Ok(CompositionTimeline { origin, snapshots })
}
