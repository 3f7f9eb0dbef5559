//! SVG scatter plots and histograms.
//!
//! Output is a standalone SVG document built by string formatting with fixed
//! precision, so identical inputs give identical bytes.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cards::{Card, PlayerTrace};
use crate::encode::MAX_TURNS;
use crate::error::{Error, Result};
use crate::log_io::Histogram;
use crate::par;
use crate::replay::replay_trace;
use crate::tsne::Embedding;

/// Which end-of-turn state a card channel reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnRef {
    /// 1-based turn; past the end of a trace the final state holds.
    Turn(usize),
    Final,
}

/// What a scatter plot's color encodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ColorChannel {
    TraceLength,
    /// Summed deck proportion of `cards`.
    CardProportion { cards: Vec<Card>, at: TurnRef },
}

impl ColorChannel {
    pub fn card(card: Card, at: TurnRef) -> Result<Self> {
        Self::group(vec![card], at)
    }

    pub fn group(cards: Vec<Card>, at: TurnRef) -> Result<Self> {
        let ch = ColorChannel::CardProportion { cards, at };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if let ColorChannel::CardProportion { cards, at } = self {
            if cards.is_empty() {
                return Err(Error::Param("card channel needs at least one card".into()));
            }
            for (i, c) in cards.iter().enumerate() {
                if cards[..i].contains(c) {
                    return Err(Error::Param(format!("card {c} listed twice in channel")));
                }
            }
            if let TurnRef::Turn(t) = at {
                if !(1..=MAX_TURNS).contains(t) {
                    return Err(Error::Param(format!("channel turn {t} outside 1..={MAX_TURNS}")));
                }
            }
        }
        Ok(())
    }

    /// Human-readable caption for legends.
    pub fn describe(&self) -> String {
        match self {
            ColorChannel::TraceLength => "trace length (turns)".into(),
            ColorChannel::CardProportion { cards, at } => {
                let names: Vec<&str> = cards.iter().map(|c| c.name()).collect();
                let when = match at {
                    TurnRef::Turn(t) => format!("after turn {t}"),
                    TurnRef::Final => "at game end".into(),
                };
                format!("proportion of {} {when}", names.join("+"))
            }
        }
    }
}

impl fmt::Display for ColorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorChannel::TraceLength => f.write_str("length"),
            ColorChannel::CardProportion { cards, at } => {
                let names: Vec<&str> = cards.iter().map(|c| c.name()).collect();
                write!(f, "card:{}@", names.join("+"))?;
                match at {
                    TurnRef::Turn(t) => write!(f, "{t}"),
                    TurnRef::Final => f.write_str("final"),
                }
            }
        }
    }
}

/// Parses `length` or `card:<Name>[+<Name>...]@<turn|final>`.
impl FromStr for ColorChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Param(format!("bad color channel {s:?}: {why}"));
        if s == "length" {
            return Ok(ColorChannel::TraceLength);
        }
        let body = s.strip_prefix("card:").ok_or_else(|| bad("expected `length` or `card:<Name>@<turn|final>`"))?;
        let (names, when) = body.rsplit_once('@').ok_or_else(|| bad("missing @<turn|final>"))?;
        let at = if when.eq_ignore_ascii_case("final") {
            TurnRef::Final
        } else {
            TurnRef::Turn(when.parse().map_err(|_| bad("turn must be a positive integer or `final`"))?)
        };
        let cards = names
            .split('+')
            .map(|n| Card::from_name(n).ok_or_else(|| bad(&format!("unknown card {n:?}"))))
            .collect::<Result<Vec<_>>>()?;
        ColorChannel::group(cards, at).map_err(|e| bad(&e.to_string()))
    }
}

impl TryFrom<String> for ColorChannel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ColorChannel> for String {
    fn from(c: ColorChannel) -> String {
        c.to_string()
    }
}

/// One color value per embedded point, looked up by trace id.
pub fn channel_values(embedding: &Embedding, traces: &[PlayerTrace], channel: &ColorChannel) -> Result<Vec<f64>> {
    channel.validate()?;
    let by_id: HashMap<String, &PlayerTrace> = traces.iter().map(|t| (t.id(), t)).collect();
    let found = embedding
        .ids
        .iter()
        .map(|id| by_id.get(id).copied().ok_or_else(|| Error::MissingTrace(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    par::map(&found, |trace| trace_value(trace, channel)).into_iter().collect()
}

/// The channel value for a single trace.
pub fn trace_value(trace: &PlayerTrace, channel: &ColorChannel) -> Result<f64> {
    match channel {
        ColorChannel::TraceLength => Ok(trace.n_turns() as f64),
        ColorChannel::CardProportion { cards, at } => {
            let timeline = replay_trace(trace)?;
            let turn = match *at {
                TurnRef::Turn(t) => t,
                TurnRef::Final => trace.n_turns(),
            };
            let comp = timeline.at_turn(turn);
            if comp.total() == 0 {
                return Err(Error::EmptyComposition { turn: turn.min(trace.n_turns()) });
            }
            let props = comp.proportions();
            Ok(cards.iter().map(|c| props[c.canonical_index()]).sum())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotSpec {
    pub width: u32,
    pub height: u32,
    pub point_radius: f64,
    pub margin: f64,
    pub title: String,
    /// Legend caption; the value range is appended.
    pub legend: String,
    /// Gradient endpoints for the minimum and maximum value.
    pub low_color: [u8; 3],
    pub high_color: [u8; 3],
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            width: 640,
            height: 640,
            point_radius: 3.0,
            margin: 24.0,
            title: String::new(),
            legend: String::new(),
            low_color: [255, 237, 160],
            high_color: [189, 0, 38],
        }
    }
}

const TITLE_BAND: f64 = 28.0;
const LEGEND_BAND: f64 = 44.0;

impl PlotSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Param("plot dimensions must be positive".into()));
        }
        if !(self.point_radius > 0.0) || !(self.margin >= 0.0) {
            return Err(Error::Param("point radius must be positive and margin non-negative".into()));
        }
        let (x0, x1, y0, y1) = self.plot_area();
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::Param(format!("plot {}x{} too small for its margins", self.width, self.height)));
        }
        Ok(())
    }

    /// Drawable region `(x0, x1, y0, y1)` between the title and legend bands.
    pub fn plot_area(&self) -> (f64, f64, f64, f64) {
        (
            self.margin,
            f64::from(self.width) - self.margin,
            self.margin + TITLE_BAND,
            f64::from(self.height) - self.margin - LEGEND_BAND,
        )
    }

    /// Linear blend between the gradient stops at `t` in `[0, 1]`.
    pub fn color_at(&self, t: f64) -> String {
        let t = t.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
        let [r, g, b] = [0, 1, 2].map(|k| mix(self.low_color[k], self.high_color[k]));
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e12 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

/// Maps `[lo, hi]` onto `[a, b]`; a degenerate range maps to the midpoint.
pub fn rescale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn header(spec: &PlotSpec, out: &mut String) {
    let (w, h) = (spec.width, spec.height);
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    if !spec.title.is_empty() {
        writeln!(
            out,
            r#"<text class="title" x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            f64::from(w) / 2.0,
            spec.margin + 18.0,
            escape(&spec.title)
        )
        .unwrap();
    }
}

/// Scatter plot of `embedding` colored by `values` on a two-stop gradient.
pub fn render_scatter(embedding: &Embedding, values: &[f64], spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    let pts = &embedding.points;
    if pts.is_empty() {
        return Err(Error::EmptyPlot("embedding"));
    }
    if values.len() != pts.len() {
        return Err(Error::DimensionMismatch {
            expected: pts.len(),
            found: values.len(),
        });
    }
    let (x0, x1, y0, y1) = spec.plot_area();
    let (xlo, xhi) = bounds(pts.iter().map(|p| p[0]));
    let (ylo, yhi) = bounds(pts.iter().map(|p| p[1]));
    let (vlo, vhi) = bounds(values.iter().copied());
    let r = spec.point_radius;

    let mut out = String::with_capacity(96 * pts.len() + 1024);
    header(spec, &mut out);
    out.push_str("<g class=\"points\">\n");
    for (p, &v) in pts.iter().zip(values) {
        let cx = rescale(p[0], xlo, xhi, x0 + r, x1 - r);
        let cy = rescale(p[1], ylo, yhi, y0 + r, y1 - r);
        let t = if vhi > vlo { (v - vlo) / (vhi - vlo) } else { 0.5 };
        writeln!(out, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{r}" fill="{}"/>"#, spec.color_at(t)).unwrap();
    }
    out.push_str("</g>\n");

    // legend: gradient bar with the value range
    let ly = f64::from(spec.height) - spec.margin - LEGEND_BAND + 12.0;
    let lw = ((x1 - x0) / 3.0).max(1.0);
    writeln!(
        out,
        r#"<defs><linearGradient id="ramp"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
        hex(spec.low_color),
        hex(spec.high_color)
    )
    .unwrap();
    out.push_str("<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    writeln!(out, r#"<rect x="{x0:.2}" y="{ly:.2}" width="{lw:.2}" height="10" fill="url(#ramp)"/>"#).unwrap();
    let caption = if spec.legend.is_empty() { String::new() } else { format!("{}: ", spec.legend) };
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{}{} to {}</text>"#,
        x0 + lw + 8.0,
        ly + 10.0,
        escape(&caption),
        fmt_value(vlo),
        fmt_value(vhi)
    )
    .unwrap();
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Bar chart of trace lengths, one bar per occupied bin in turn order.
pub fn render_histogram(hist: &Histogram, spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    if hist.is_empty() {
        return Err(Error::EmptyPlot("histogram"));
    }
    let (x0, x1, y0, y1) = spec.plot_area();
    let max = hist.bins.values().copied().max().unwrap_or(1).max(1) as f64;
    let slot = (x1 - x0) / hist.bins.len() as f64;
    let bar = slot * 0.8;
    let fill = hex(spec.high_color);

    let mut out = String::with_capacity(160 * hist.bins.len() + 1024);
    header(spec, &mut out);
    out.push_str("<g class=\"bars\">\n");
    for (k, (&turns, &count)) in hist.bins.iter().enumerate() {
        let h = count as f64 / max * (y1 - y0);
        let x = x0 + k as f64 * slot + (slot - bar) / 2.0;
        writeln!(
            out,
            r#"<rect data-turns="{turns}" data-count="{count}" x="{x:.3}" y="{:.3}" width="{bar:.3}" height="{h:.3}" fill="{fill}"/>"#,
            y1 - h
        )
        .unwrap();
    }
    out.push_str("</g>\n<g class=\"axis\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">\n");
    for (k, &turns) in hist.bins.keys().enumerate() {
        writeln!(out, r#"<text x="{:.3}" y="{:.3}">{turns}</text>"#, x0 + (k as f64 + 0.5) * slot, y1 + 14.0).unwrap();
    }
    out.push_str("</g>\n");
    let caption = if spec.legend.is_empty() { "turns per trace".to_string() } else { spec.legend.clone() };
    writeln!(
        out,
        r#"<text class="legend" x="{x0:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{} (max count {})</text>"#,
        y1 + 34.0,
        escape(&caption),
        max as usize
    )
    .unwrap();
    out.push_str("</svg>\n");
    Ok(out)
}
