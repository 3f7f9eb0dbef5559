//! Canonical game-log format: one JSON record per line.
//!
//! ```text
//! {"game_id":"g1","players":["a","b"],"winner":"a","turns":[
//!   {"player":"a","turn":1,"plays":["Copper"],"buys":["Silver"]}, ...]}
//! ```
//!
//! Card arrays may be omitted when empty. Synthetic logs additionally carry a
//! `labels` object (player id to strategy tag) and a `capped` flag for games
//! stopped by the simulator's turn cap.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cards::{check_contiguous, Card, PlayerTrace, TurnEvents};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct GameLog {
    pub game_id: String,
    pub players: Vec<String>,
    /// Per-player turn lists, parallel to `players`.
    pub turns: Vec<Vec<TurnEvents>>,
    pub winner: Option<String>,
    pub labels: BTreeMap<String, String>,
    pub capped: bool,
}

impl GameLog {
    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn player_turns(&self, player: &str) -> Option<&[TurnEvents]> {
        let i = self.players.iter().position(|p| p == player)?;
        Some(&self.turns[i])
    }

    /// The trace of the player in seat `seat`.
    pub fn trace(&self, seat: usize) -> PlayerTrace {
        let player = &self.players[seat];
        PlayerTrace {
            game_id: self.game_id.clone(),
            player_id: player.clone(),
            n_players: self.players.len() as u32,
            won: self.winner.as_ref().map(|w| w == player),
            label: self.labels.get(player).cloned(),
            turns: self.turns[seat].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Default)]
pub struct ParsedLogs {
    pub games: Vec<GameLog>,
    pub errors: Vec<RecordError>,
}

#[derive(Serialize, Deserialize)]
struct GameRecord {
    game_id: String,
    players: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    winner: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "is_false")]
    capped: bool,
    #[serde(default)]
    turns: Vec<TurnRecord>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
struct TurnRecord {
    player: String,
    turn: i64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    plays: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    buys: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    gains: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    trashes: Vec<String>,
}

fn cards(names: Vec<String>) -> std::result::Result<Vec<Card>, String> {
    names
        .into_iter()
        .map(|n| Card::from_name(&n).ok_or_else(|| format!("unknown card {n:?}")))
        .collect()
}

fn names(cards: &[Card]) -> Vec<String> {
    cards.iter().map(|c| c.name().to_string()).collect()
}

fn parse_record(line: &str) -> std::result::Result<GameLog, String> {
    let record: GameRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if record.players.is_empty() {
        return Err("game has no players".into());
    }
    let mut seen = HashSet::new();
    for p in &record.players {
        if !seen.insert(p.as_str()) {
            return Err(format!("duplicate player {p:?}"));
        }
    }

    let mut raw: Vec<Vec<(i64, TurnRecord)>> = record.players.iter().map(|_| Vec::new()).collect();
    for t in record.turns {
        let seat = record
            .players
            .iter()
            .position(|p| *p == t.player)
            .ok_or_else(|| format!("turn names unknown player {:?}", t.player))?;
        if t.turn < 1 {
            return Err(format!("negative or zero turn index {}", t.turn));
        }
        raw[seat].push((t.turn, t));
    }

    let mut turns = Vec::with_capacity(raw.len());
    for (seat, list) in raw.into_iter().enumerate() {
        let player = &record.players[seat];
        if list.is_empty() {
            return Err(format!("player {player:?} has no turns"));
        }
        check_contiguous(list.iter().map(|(t, _)| *t))
            .map_err(|e| format!("non-contiguous turns for {player:?}: {e}"))?;
        let events = list
            .into_iter()
            .map(|(turn, t)| {
                Ok(TurnEvents {
                    turn: turn as u32,
                    plays: cards(t.plays)?,
                    buys: cards(t.buys)?,
                    gains: cards(t.gains)?,
                    trashes: cards(t.trashes)?,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        turns.push(events);
    }

    let min = turns.iter().map(Vec::len).min().unwrap_or(0);
    let max = turns.iter().map(Vec::len).max().unwrap_or(0);
    if max - min > 1 {
        return Err(format!("turn counts differ by more than one ({min}..{max})"));
    }
    if let Some(w) = &record.winner {
        if !record.players.contains(w) {
            return Err(format!("winner {w:?} is not a player"));
        }
    }
    if let Some(k) = record.labels.keys().find(|k| !record.players.contains(k)) {
        return Err(format!("label for unknown player {k:?}"));
    }

    Ok(GameLog {
        game_id: record.game_id,
        players: record.players,
        turns,
        winner: record.winner,
        labels: record.labels,
        capped: record.capped,
    })
}

/// Parses every line of `input`. Malformed records are reported and skipped;
/// only an unreadable stream is fatal.
pub fn parse_log_stream<R: BufRead>(input: R) -> Result<ParsedLogs> {
    let lines = input.lines().collect::<std::io::Result<Vec<_>>>()?;
    let results = par::map_range(lines.len(), |i| {
        let line = lines[i].trim();
        if line.is_empty() {
            None
        } else {
            Some(parse_record(line))
        }
    });
    let mut out = ParsedLogs::default();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            None => {}
            Some(Ok(g)) => out.games.push(g),
            Some(Err(reason)) => out.errors.push(RecordError { line: i + 1, reason }),
        }
    }
    Ok(out)
}

fn to_record(game: &GameLog) -> GameRecord {
    let max = game.turns.iter().map(Vec::len).max().unwrap_or(0);
    let mut turns = Vec::new();
    for t in 0..max {
        for (seat, player) in game.players.iter().enumerate() {
            if let Some(ev) = game.turns[seat].get(t) {
                turns.push(TurnRecord {
                    player: player.clone(),
                    turn: i64::from(ev.turn),
                    plays: names(&ev.plays),
                    buys: names(&ev.buys),
                    gains: names(&ev.gains),
                    trashes: names(&ev.trashes),
                });
            }
        }
    }
    GameRecord {
        game_id: game.game_id.clone(),
        players: game.players.clone(),
        winner: game.winner.clone(),
        labels: game.labels.clone(),
        capped: game.capped,
        turns,
    }
}

/// Writes games in the canonical format, turns interleaved in seat order.
pub fn write_log_stream<W: Write>(games: &[GameLog], mut out: W) -> Result<()> {
    for game in games {
        serde_json::to_writer(&mut out, &to_record(game))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusFilter {
    pub min_players: usize,
    pub min_turns: usize,
    pub max_turns: usize,
}

impl Default for CorpusFilter {
    fn default() -> Self {
        CorpusFilter {
            min_players: 2,
            min_turns: 10,
            max_turns: 30,
        }
    }
}

impl CorpusFilter {
    pub fn validate(&self) -> Result<()> {
        if self.min_players < 1 {
            return Err(Error::Param("min_players must be at least 1".into()));
        }
        if self.min_turns > self.max_turns {
            return Err(Error::Param(format!(
                "min_turns {} exceeds max_turns {}",
                self.min_turns, self.max_turns
            )));
        }
        Ok(())
    }

    pub fn admits(&self, n_players: usize, n_turns: usize) -> bool {
        n_players >= self.min_players && (self.min_turns..=self.max_turns).contains(&n_turns)
    }
}

/// One trace per admitted player, in game then seat order.
pub fn filter_traces(games: &[GameLog], filter: &CorpusFilter) -> Vec<PlayerTrace> {
    let mut out = Vec::new();
    for game in games {
        for seat in 0..game.n_players() {
            if filter.admits(game.n_players(), game.turns[seat].len()) {
                out.push(game.trace(seat));
            }
        }
    }
    out
}

pub fn read_traces<R: BufRead>(input: R) -> Result<Vec<PlayerTrace>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace: PlayerTrace = serde_json::from_str(&line)
            .map_err(|e| Error::format("trace record", format!("line {}: {e}", i + 1)))?;
        trace.validate()?;
        out.push(trace);
    }
    Ok(out)
}

pub fn write_traces<W: Write>(traces: &[PlayerTrace], mut out: W) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Trace counts per game length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    pub bins: BTreeMap<usize, usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n_turns", "count"])?;
        for (k, v) in &self.bins {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["n_turns", "count"] {
            return Err(Error::format("histogram csv", "expected header n_turns,count"));
        }
        let mut bins = BTreeMap::new();
        for row in r.records() {
            let row = row?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::format("histogram csv", format!("{s:?}: {e}")))
            };
            *bins.entry(parse(&row[0])?).or_insert(0) += parse(&row[1])?;
        }
        Ok(Histogram { bins })
    }
}

pub fn turn_length_histogram(traces: &[PlayerTrace]) -> Histogram {
    let mut bins = BTreeMap::new();
    for t in traces {
        *bins.entry(t.n_turns()).or_insert(0) += 1;
    }
    Histogram { bins }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idle_game(id: &str, turns_per_player: &[u32]) -> GameLog {
        GameLog {
            game_id: id.into(),
            players: (0..turns_per_player.len()).map(|i| format!("p{i}")).collect(),
            turns: turns_per_player
                .iter()
                .map(|&n| (1..=n).map(TurnEvents::empty).collect())
                .collect(),
            winner: None,
            labels: BTreeMap::new(),
            capped: false,
        }
    }

    fn parse_str(s: &str) -> ParsedLogs {
        parse_log_stream(s.as_bytes()).unwrap()
    }

    #[test]
    fn parses_two_player_record() {
        let mut buf = Vec::new();
        write_log_stream(&[idle_game("g", &[12, 12])], &mut buf).unwrap();
        let parsed = parse_str(std::str::from_utf8(&buf).unwrap());
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.games.len(), 1);
        assert_eq!(parsed.games[0].n_players(), 2);
        assert_eq!(parsed.games[0].turns[1].len(), 12);
    }

    #[test]
    fn omitted_arrays_and_explicit_events() {
        let line = r#"{"game_id":"x","players":["a"],"winner":"a","turns":[{"player":"a","turn":1,"plays":["Copper","Copper"],"buys":["Silver"]},{"player":"a","turn":2,"trashes":[],"gains":["Silver"]}]}"#;
        let parsed = parse_str(line);
        assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
        let g = &parsed.games[0];
        assert_eq!(g.turns[0][0].plays, vec![Card::Copper, Card::Copper]);
        assert_eq!(g.turns[0][0].buys, vec![Card::Silver]);
        assert_eq!(g.turns[0][1].gains, vec![Card::Silver]);
        assert_eq!(g.winner.as_deref(), Some("a"));
    }

    #[test]
    fn unknown_card_is_a_record_error() {
        let good = r#"{"game_id":"ok","players":["a"],"turns":[{"player":"a","turn":1}]}"#;
        let bad = r#"{"game_id":"x","players":["a"],"turns":[{"player":"a","turn":1,"buys":["Chapel"]}]}"#;
        let parsed = parse_str(&format!("{good}\n{bad}\n{good}\n"));
        assert_eq!(parsed.games.len(), 2);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 2);
        assert!(parsed.errors[0].reason.contains("unknown card"));
    }

    #[test]
    fn lowercase_card_name_rejected() {
        let bad = r#"{"game_id":"x","players":["a"],"turns":[{"player":"a","turn":1,"buys":["silver"]}]}"#;
        assert_eq!(parse_str(bad).errors.len(), 1);
    }

    #[test]
    fn structural_errors() {
        let cases = [
            (r#"{"game_id":"x","players":["a"],"turns":[{"player":"a","turn":-1}]}"#, "negative"),
            (r#"{"game_id":"x","players":["a"],"turns":[{"player":"a","turn":1},{"player":"a","turn":3}]}"#, "non-contiguous"),
            (r#"{"game_id":"x","players":["a"],"turns":[{"player":"b","turn":1}]}"#, "unknown player"),
            (r#"{"game_id":"x","players":["a","b"],"turns":[{"player":"a","turn":1}]}"#, "no turns"),
            (r#"{"game_id":"x","players":["a"],"winner":"z","turns":[{"player":"a","turn":1}]}"#, "winner"),
            (r#"{"game_id":"x","players":["a","b"],"turns":[{"player":"a","turn":1},{"player":"a","turn":2},{"player":"a","turn":3},{"player":"b","turn":1}]}"#, "differ"),
            ("not json", "expected"),
        ];
        for (line, needle) in cases {
            let parsed = parse_str(line);
            assert_eq!(parsed.errors.len(), 1, "{line}");
            assert!(parsed.errors[0].reason.contains(needle), "{}", parsed.errors[0].reason);
        }
    }

    #[test]
    fn empty_stream() {
        let parsed = parse_str("");
        assert!(parsed.games.is_empty());
        assert!(parsed.errors.is_empty());
        let mut buf = Vec::new();
        write_log_stream(&[], &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn filter_defaults() {
        let f = CorpusFilter::default();
        assert!(filter_traces(&[idle_game("solo", &[15])], &f).is_empty());
        let two = filter_traces(&[idle_game("two", &[10, 10])], &f);
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].game_id, "two");
        assert_eq!(two[1].player_id, "p1");
        assert!(filter_traces(&[idle_game("long", &[31, 31, 31])], &f).is_empty());
        // per-player length: the seat with 31 turns is dropped, the one with 30 kept
        assert_eq!(filter_traces(&[idle_game("edge", &[31, 30])], &f).len(), 1);
    }

    #[test]
    fn filter_validation() {
        assert!(CorpusFilter { min_players: 0, ..Default::default() }.validate().is_err());
        assert!(CorpusFilter { min_turns: 31, ..Default::default() }.validate().is_err());
        assert!(CorpusFilter::default().validate().is_ok());
    }

    #[test]
    fn histogram_counts() {
        assert!(turn_length_histogram(&[]).is_empty());
        let games = [idle_game("a", &[10, 10]), idle_game("b", &[20])];
        let traces: Vec<_> = games.iter().flat_map(|g| (0..g.n_players()).map(|s| g.trace(s))).collect();
        let h = turn_length_histogram(&traces);
        assert_eq!(h.bins, BTreeMap::from([(10, 2), (20, 1)]));

        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(std::str::from_utf8(&buf).unwrap(), "n_turns,count\n10,2\n20,1\n");
        assert_eq!(Histogram::read_csv(&buf[..]).unwrap(), h);
    }

    #[test]
    fn traces_round_trip() {
        let mut g = idle_game("g", &[3, 3]);
        g.labels.insert("p0".into(), "bigmoney".into());
        g.winner = Some("p1".into());
        let traces = vec![g.trace(0), g.trace(1)];
        assert_eq!(traces[0].won, Some(false));
        assert_eq!(traces[0].label.as_deref(), Some("bigmoney"));
        let mut buf = Vec::new();
        write_traces(&traces, &mut buf).unwrap();
        assert_eq!(read_traces(&buf[..]).unwrap(), traces);
    }

    fn arb_card() -> impl Strategy<Value = Card> {
        (0..17usize).prop_map(|i| Card::ALL[i])
    }

    fn arb_turn(turn: u32) -> impl Strategy<Value = TurnEvents> {
        let list = || proptest::collection::vec(arb_card(), 0..4);
        (list(), list(), list(), list()).prop_map(move |(plays, buys, gains, trashes)| TurnEvents {
            turn,
            plays,
            buys,
            gains,
            trashes,
        })
    }

    fn arb_game() -> impl Strategy<Value = GameLog> {
        (1usize..4, 1u32..8, any::<bool>(), "[a-z]{1,6}").prop_flat_map(|(n, len, won, id)| {
            let per_player = (0..n)
                .map(|seat| {
                    let l = if seat == 0 { len + 1 } else { len };
                    (1..=l).map(arb_turn).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>();
            per_player.prop_map(move |turns| GameLog {
                game_id: id.clone(),
                players: (0..n).map(|i| format!("p{i}")).collect(),
                turns,
                winner: won.then(|| "p0".to_string()),
                labels: BTreeMap::from([("p0".to_string(), "x".to_string())]),
                capped: !won,
            })
        })
    }

    proptest! {
        #[test]
        fn write_parse_round_trip(games in proptest::collection::vec(arb_game(), 0..20)) {
            let mut buf = Vec::new();
            write_log_stream(&games, &mut buf).unwrap();
            let parsed = parse_log_stream(&buf[..]).unwrap();
            prop_assert!(parsed.errors.is_empty());
            prop_assert_eq!(parsed.games, games);
        }

        #[test]
        fn widening_the_window_never_drops(games in proptest::collection::vec(arb_game(), 0..10),
                                           lo in 1usize..5, hi in 5usize..9, widen in 0usize..3) {
            let narrow = CorpusFilter { min_players: 1, min_turns: lo, max_turns: hi };
            let wide = CorpusFilter { min_players: 1, min_turns: lo.saturating_sub(widen), max_turns: hi + widen };
            let a: Vec<String> = filter_traces(&games, &narrow).iter().map(PlayerTrace::id).collect();
            let wide_traces = filter_traces(&games, &wide);
            let b: HashSet<String> = wide_traces.iter().map(PlayerTrace::id).collect();
            prop_assert!(a.iter().all(|id| b.contains(id)));
            prop_assert_eq!(turn_length_histogram(&wide_traces).total(), wide_traces.len());
        }
    }
}
