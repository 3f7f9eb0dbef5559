//! The closed 17-card universe, deck compositions and per-turn trace records.
//!
//! Feature layout everywhere in the crate follows [`Card::ALL`]: the seven
//! universal cards first, then the ten kingdom cards alphabetically.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const N_CARDS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Card {
    Copper,
    Silver,
    Gold,
    Estate,
    Duchy,
    Province,
    Curse,
    Cellar,
    Market,
    Militia,
    Mine,
    Moat,
    Remodel,
    Smithy,
    Village,
    Woodcutter,
    Workshop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CardClass {
    Treasure,
    Victory,
    Action,
    Curse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CardInfo {
    pub cost: u32,
    pub class: CardClass,
    pub coin_value: u32,
    pub victory_points: i32,
}

const fn info(cost: u32, class: CardClass, coin_value: u32, victory_points: i32) -> CardInfo {
    CardInfo {
        cost,
        class,
        coin_value,
        victory_points,
    }
}

use CardClass::{Action, Treasure, Victory};

/// Base-game constants, indexed canonically.
const CARD_TABLE: [CardInfo; N_CARDS] = [
    info(0, Treasure, 1, 0),        // Copper
    info(3, Treasure, 2, 0),        // Silver
    info(6, Treasure, 3, 0),        // Gold
    info(2, Victory, 0, 1),         // Estate
    info(5, Victory, 0, 3),         // Duchy
    info(8, Victory, 0, 6),         // Province
    info(0, CardClass::Curse, 0, -1), // Curse
    info(2, Action, 0, 0),          // Cellar
    info(5, Action, 0, 0),          // Market
    info(4, Action, 0, 0),          // Militia
    info(5, Action, 0, 0),          // Mine
    info(2, Action, 0, 0),          // Moat
    info(4, Action, 0, 0),          // Remodel
    info(4, Action, 0, 0),          // Smithy
    info(3, Action, 0, 0),          // Village
    info(3, Action, 0, 0),          // Woodcutter
    info(3, Action, 0, 0),          // Workshop
];

const NAMES: [&str; N_CARDS] = [
    "Copper",
    "Silver",
    "Gold",
    "Estate",
    "Duchy",
    "Province",
    "Curse",
    "Cellar",
    "Market",
    "Militia",
    "Mine",
    "Moat",
    "Remodel",
    "Smithy",
    "Village",
    "Woodcutter",
    "Workshop",
];

impl Card {
    /// Every card in canonical order.
    pub const ALL: [Card; N_CARDS] = [
        Card::Copper,
        Card::Silver,
        Card::Gold,
        Card::Estate,
        Card::Duchy,
        Card::Province,
        Card::Curse,
        Card::Cellar,
        Card::Market,
        Card::Militia,
        Card::Mine,
        Card::Moat,
        Card::Remodel,
        Card::Smithy,
        Card::Village,
        Card::Woodcutter,
        Card::Workshop,
    ];

    /// The ten kingdom cards of this card set.
    pub const KINGDOM: [Card; 10] = [
        Card::Cellar,
        Card::Market,
        Card::Militia,
        Card::Mine,
        Card::Moat,
        Card::Remodel,
        Card::Smithy,
        Card::Village,
        Card::Woodcutter,
        Card::Workshop,
    ];

    #[inline]
    pub fn canonical_index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Card> {
        Card::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        NAMES[self.canonical_index()]
    }

    /// Exact, case-sensitive lookup by canonical name.
    pub fn from_name(name: &str) -> Option<Card> {
        NAMES.iter().position(|n| *n == name).map(|i| Card::ALL[i])
    }

    pub fn info(self) -> CardInfo {
        CARD_TABLE[self.canonical_index()]
    }

    pub fn cost(self) -> u32 {
        self.info().cost
    }

    pub fn class(self) -> CardClass {
        self.info().class
    }

    pub fn is_action(self) -> bool {
        self.class() == CardClass::Action
    }

    pub fn is_treasure(self) -> bool {
        self.class() == CardClass::Treasure
    }
}

pub fn card_cost(card: Card) -> u32 {
    card.cost()
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Card {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Card::from_name(s).ok_or_else(|| Error::UnknownCard(s.to_string()))
    }
}

impl Serialize for Card {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Card {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        Card::from_name(&name).ok_or_else(|| serde::de::Error::custom(format!("unknown card {name:?}")))
    }
}

/// Every card a player owns, regardless of zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Composition {
    counts: [u32; N_CARDS],
}

pub const STARTING_COPPERS: u32 = 7;
pub const STARTING_ESTATES: u32 = 3;

/// The 7 Copper + 3 Estate seed deck.
pub fn starting_deck() -> Composition {
    let mut deck = Composition::default();
    deck[Card::Copper] = STARTING_COPPERS;
    deck[Card::Estate] = STARTING_ESTATES;
    deck
}

impl Composition {
    pub fn from_counts(counts: [u32; N_CARDS]) -> Self {
        Composition { counts }
    }

    pub fn counts(&self) -> &[u32; N_CARDS] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn count(&self, card: Card) -> u32 {
        self[card]
    }

    pub fn add(&mut self, card: Card) {
        self[card] += 1;
    }

    /// Removes one copy; returns false (leaving the composition untouched) if none are owned.
    pub fn remove(&mut self, card: Card) -> bool {
        match self[card].checked_sub(1) {
            Some(c) => {
                self[card] = c;
                true
            }
            None => false,
        }
    }

    /// Share of each card in canonical order. All zeros for an empty composition.
    pub fn proportions(&self) -> [f64; N_CARDS] {
        let total = self.total();
        let mut out = [0.0; N_CARDS];
        if total == 0 {
            return out;
        }
        let total = f64::from(total);
        for (o, &c) in out.iter_mut().zip(&self.counts) {
            *o = f64::from(c) / total;
        }
        out
    }

    pub fn proportion(&self, card: Card) -> f64 {
        match self.total() {
            0 => 0.0,
            t => f64::from(self[card]) / f64::from(t),
        }
    }

    /// Total coin value of owned treasures.
    pub fn treasure_value(&self) -> u32 {
        Card::ALL
            .iter()
            .map(|&c| c.info().coin_value * self[c])
            .sum()
    }

    pub fn victory_points(&self) -> i32 {
        Card::ALL
            .iter()
            .map(|&c| c.info().victory_points * self[c] as i32)
            .sum()
    }
}

impl Index<Card> for Composition {
    type Output = u32;

    fn index(&self, card: Card) -> &u32 {
        &self.counts[card.canonical_index()]
    }
}

impl IndexMut<Card> for Composition {
    fn index_mut(&mut self, card: Card) -> &mut u32 {
        &mut self.counts[card.canonical_index()]
    }
}

/// What one player did on one of their turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnEvents {
    pub turn: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plays: Vec<Card>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buys: Vec<Card>,
    /// Acquisitions other than buys (Workshop, Mine, Remodel).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gains: Vec<Card>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trashes: Vec<Card>,
}

impl TurnEvents {
    pub fn empty(turn: u32) -> Self {
        TurnEvents {
            turn,
            plays: Vec::new(),
            buys: Vec::new(),
            gains: Vec::new(),
            trashes: Vec::new(),
        }
    }
}

/// One player's events for a single game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerTrace {
    pub game_id: String,
    pub player_id: String,
    pub n_players: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub won: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub turns: Vec<TurnEvents>,
}

impl PlayerTrace {
    /// `game_id/player_id`, unique within a corpus.
    pub fn id(&self) -> String {
        format!("{}/{}", self.game_id, self.player_id)
    }

    pub fn n_turns(&self) -> usize {
        self.turns.len()
    }

    /// Checks that turns are non-empty and numbered 1, 2, ... without gaps.
    pub fn validate(&self) -> crate::Result<()> {
        if self.turns.is_empty() {
            return Err(Error::format("trace", format!("{} has no turns", self.id())));
        }
        check_contiguous(self.turns.iter().map(|t| i64::from(t.turn)))
            .map_err(|reason| Error::format("trace", format!("{}: {reason}", self.id())))
    }
}

pub(crate) fn check_contiguous(turns: impl Iterator<Item = i64>) -> Result<(), String> {
    for (expected, turn) in (1i64..).zip(turns) {
        if turn < 1 {
            return Err(format!("turn index {turn} is not positive"));
        }
        if turn != expected {
            return Err(format!("expected turn {expected}, found turn {turn}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_indices() {
        assert_eq!(Card::Copper.canonical_index(), 0);
        assert_eq!(Card::Curse.canonical_index(), 6);
        assert_eq!(Card::Workshop.canonical_index(), 16);
        for (i, c) in Card::ALL.iter().enumerate() {
            assert_eq!(c.canonical_index(), i);
            assert_eq!(Card::from_index(i), Some(*c));
            assert_eq!(Card::from_name(c.name()), Some(*c));
        }
        assert_eq!(Card::from_index(17), None);
    }

    #[test]
    fn costs_match_base_game() {
        assert_eq!(card_cost(Card::Copper), 0);
        assert_eq!(card_cost(Card::Province), 8);
        assert_eq!(card_cost(Card::Smithy), 4);
        assert_eq!(card_cost(Card::Silver), 3);
        assert_eq!(card_cost(Card::Mine), 5);
    }

    #[test]
    fn classes_and_coin_values() {
        assert_eq!(Card::Copper.info().coin_value, 1);
        assert_eq!(Card::Silver.info().coin_value, 2);
        assert_eq!(Card::Gold.info().coin_value, 3);
        for c in [Card::Estate, Card::Duchy, Card::Province] {
            assert_eq!(c.class(), CardClass::Victory);
        }
        assert_eq!(Card::Curse.class(), CardClass::Curse);
        for c in Card::KINGDOM {
            assert_eq!(c.class(), CardClass::Action);
            assert_eq!(c.info().coin_value, 0);
        }
    }

    #[test]
    fn starting_deck_proportions() {
        let deck = starting_deck();
        assert_eq!(deck.total(), 10);
        assert_eq!(deck.proportion(Card::Copper), 0.7);
        assert_eq!(deck.proportion(Card::Village), 0.0);
        let mut expected = [0.0; N_CARDS];
        expected[0] = 0.7;
        expected[3] = 0.3;
        assert_eq!(deck.proportions(), expected);
    }

    #[test]
    fn names_are_case_sensitive() {
        assert_eq!(Card::from_name("village"), None);
        assert!(matches!("Chapel".parse::<Card>(), Err(Error::UnknownCard(_))));
        let err = serde_json::from_str::<Card>("\"Chapel\"").unwrap_err();
        assert!(err.to_string().contains("unknown card"));
    }

    #[test]
    fn remove_refuses_underflow() {
        let mut deck = starting_deck();
        assert!(!deck.remove(Card::Gold));
        assert_eq!(deck, starting_deck());
        assert!(deck.remove(Card::Copper));
        assert_eq!(deck[Card::Copper], 6);
    }

    #[test]
    fn contiguity() {
        assert!(check_contiguous([1, 2, 3].into_iter()).is_ok());
        assert!(check_contiguous([1, 3].into_iter()).is_err());
        assert!(check_contiguous([-1].into_iter()).is_err());
    }

    proptest! {
        #[test]
        fn proportions_sum_to_one(counts in proptest::array::uniform17(0u32..50)) {
            let comp = Composition::from_counts(counts);
            prop_assume!(comp.total() > 0);
            let s: f64 = comp.proportions().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn proportions_scale_invariant(counts in proptest::array::uniform17(0u32..20), k in 1u32..10) {
            let comp = Composition::from_counts(counts);
            prop_assume!(comp.total() > 0);
            let scaled = Composition::from_counts(counts.map(|c| c * k));
            // c*k / (t*k) rounds to the same double as c / t: both are the
            // correctly rounded value of the same rational.
            prop_assert_eq!(comp.proportions(), scaled.proportions());
        }
    }
}
