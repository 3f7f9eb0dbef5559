use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cards::{Card, CardClass, Composition};
use crate::error::{Error, Result};

/// Card supply piles, indexed canonically.
pub type Supply = [u32; crate::cards::N_CARDS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    MaxCopies(u32),
    MinTurn(u32),
    ProvincesLeftAtMost(u32),
    MoneyAtLeast(u32),
    /// Owned copies stay below `owned(card) / per + plus`.
    Ratio { card: Card, per: u32, plus: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyRule {
    pub card: Card,
    #[serde(default)]
    pub conditions: Vec<Condition>,
}

impl BuyRule {
    fn new(card: Card) -> Self {
        BuyRule { card, conditions: Vec::new() }
    }

    fn when(mut self, c: Condition) -> Self {
        self.conditions.push(c);
        self
    }
}

/// What a policy can see when it decides what to acquire.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub owned: &'a Composition,
    pub supply: &'a Supply,
    pub turn: u32,
}

impl Context<'_> {
    fn available(&self, card: Card) -> bool {
        self.supply[card.canonical_index()] > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPolicy {
    pub name: String,
    pub buy_priority: Vec<BuyRule>,
    /// Actions are played in this order while actions remain.
    pub play_order: Vec<Card>,
    /// Provinces are skipped until owned treasure is worth this many coins.
    pub province_threshold: u32,
    /// Chance that a buy is replaced by a uniformly random affordable card.
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Non-terminal actions first, then draw, then the rest.
pub const STANDARD_PLAY_ORDER: [Card; 10] = [
    Card::Village,
    Card::Market,
    Card::Cellar,
    Card::Smithy,
    Card::Moat,
    Card::Militia,
    Card::Mine,
    Card::Remodel,
    Card::Workshop,
    Card::Woodcutter,
];

pub const ARCHETYPES: [&str; 5] = ["bigmoney", "mine", "village", "market", "idle"];

fn endgame(rules: &mut Vec<BuyRule>) {
    rules.push(BuyRule::new(Card::Duchy).when(Condition::ProvincesLeftAtMost(4)));
    rules.push(BuyRule::new(Card::Estate).when(Condition::ProvincesLeftAtMost(2)));
}

impl StrategyPolicy {
    fn with_rules(name: &str, province_threshold: u32, buy_priority: Vec<BuyRule>) -> Self {
        StrategyPolicy {
            name: name.into(),
            buy_priority,
            play_order: STANDARD_PLAY_ORDER.to_vec(),
            province_threshold,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Treasure and victory cards only.
    pub fn big_money() -> Self {
        let mut rules = vec![BuyRule::new(Card::Province)];
        endgame(&mut rules);
        rules.push(BuyRule::new(Card::Gold));
        rules.push(BuyRule::new(Card::Duchy).when(Condition::ProvincesLeftAtMost(6)));
        rules.push(BuyRule::new(Card::Silver));
        Self::with_rules("bigmoney", 15, rules)
    }

    /// Money plus several Mines to upgrade treasure in hand.
    pub fn mine() -> Self {
        let mut rules = vec![BuyRule::new(Card::Province)];
        endgame(&mut rules);
        rules.push(BuyRule::new(Card::Mine).when(Condition::MaxCopies(4)).when(Condition::Ratio {
            card: Card::Gold,
            per: 1,
            plus: 2,
        }));
        rules.push(BuyRule::new(Card::Gold));
        rules.push(BuyRule::new(Card::Silver));
        Self::with_rules("mine", 15, rules)
    }

    /// Village/Smithy draw engine.
    pub fn village_smithy() -> Self {
        let mut rules = vec![BuyRule::new(Card::Province)];
        endgame(&mut rules);
        rules.push(BuyRule::new(Card::Gold));
        rules.push(BuyRule::new(Card::Smithy).when(Condition::MaxCopies(4)).when(Condition::Ratio {
            card: Card::Village,
            per: 2,
            plus: 1,
        }));
        rules.push(BuyRule::new(Card::Village).when(Condition::MaxCopies(8)));
        rules.push(BuyRule::new(Card::Silver));
        Self::with_rules("village", 14, rules)
    }

    /// Markets at five, money otherwise.
    pub fn market() -> Self {
        let mut rules = vec![BuyRule::new(Card::Province)];
        endgame(&mut rules);
        rules.push(BuyRule::new(Card::Market).when(Condition::MaxCopies(10)));
        rules.push(BuyRule::new(Card::Gold));
        rules.push(BuyRule::new(Card::Silver));
        Self::with_rules("market", 14, rules)
    }

    /// Never buys and never plays anything.
    pub fn idle() -> Self {
        StrategyPolicy {
            name: "idle".into(),
            buy_priority: Vec::new(),
            play_order: Vec::new(),
            province_threshold: 0,
            epsilon: 0.0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "bigmoney" => Ok(Self::big_money()),
            "mine" => Ok(Self::mine()),
            "village" => Ok(Self::village_smithy()),
            "market" => Ok(Self::market()),
            "idle" => Ok(Self::idle()),
            other => Err(Error::Param(format!(
                "unknown archetype {other:?} (expected one of {})",
                ARCHETYPES.join(", ")
            ))),
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn is_passive(&self) -> bool {
        self.buy_priority.is_empty() && self.play_order.is_empty()
    }

    fn rule_allows(&self, rule: &BuyRule, ctx: &Context) -> bool {
        let owned = ctx.owned.count(rule.card);
        if rule.card == Card::Province && ctx.owned.treasure_value() < self.province_threshold {
            return false;
        }
        rule.conditions.iter().all(|c| match *c {
            Condition::MaxCopies(n) => owned < n,
            Condition::MinTurn(t) => ctx.turn >= t,
            Condition::ProvincesLeftAtMost(n) => ctx.supply[Card::Province.canonical_index()] <= n,
            Condition::MoneyAtLeast(m) => ctx.owned.treasure_value() >= m,
            Condition::Ratio { card, per, plus } => owned < ctx.owned.count(card) / per.max(1) + plus,
        })
    }

    /// Highest-priority card costing at most `budget` that the rules allow.
    pub fn choose_gain(&self, budget: u32, ctx: &Context) -> Option<Card> {
        self.buy_priority
            .iter()
            .find(|r| r.card.cost() <= budget && ctx.available(r.card) && self.rule_allows(r, ctx))
            .map(|r| r.card)
    }

    /// Buy decision, with an `epsilon` chance of an arbitrary affordable card.
    pub fn choose_buy<R: Rng>(&self, coins: u32, ctx: &Context, rng: &mut R) -> Option<Card> {
        if self.buy_priority.is_empty() {
            return None;
        }
        if self.epsilon > 0.0 && rng.random_bool(self.epsilon.min(1.0)) {
            let options: Vec<Card> = Card::ALL
                .into_iter()
                .filter(|c| c.cost() >= 2 && c.cost() <= coins && c.class() != CardClass::Curse && ctx.available(*c))
                .collect();
            if !options.is_empty() {
                return Some(options[rng.random_range(0..options.len())]);
            }
        }
        self.choose_gain(coins, ctx)
    }
}
