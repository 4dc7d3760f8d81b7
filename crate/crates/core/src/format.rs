//! Text formats: the model file grammar, traces and logs, and alignment
//! reports as a two-row table or JSON.
//!
//! Model files look like
//!
//! ```text
//! stochastic labeled petri net
//! places 4
//! initial marking
//! 1 0 0 0
//! transitions 1
//! label a        # or `silent`
//! weight 2.5     # decimal or p/q
//! inputs 0       # 0-based place indices, repeats are arc weights
//! outputs 1 1
//! ```
//!
//! `#` starts a comment everywhere except on `label` lines, where it is part
//! of the activity name unless the line starts with it.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::alignment::Alignment;
use crate::net::{Label, NetBuilder, NetError, PlaceId, StochasticNet, Weight};
use crate::product::MoveKind;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: weight must be positive")]
    NonPositiveWeight { line: usize },
    #[error("line {line}: place index {index} out of range (net has {places} places)")]
    DanglingIndex { line: usize, index: usize, places: usize },
    #[error("invalid net: {0}")]
    Net(#[from] NetError),
}

const HEADER: &str = "stochastic labeled petri net";

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let trimmed = raw.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    return None;
                }
                let content = if trimmed.starts_with("label ") || trimmed == "label" {
                    trimmed
                } else {
                    trimmed.split('#').next().unwrap().trim_end()
                };
                Some((i + 1, content))
            })
            .collect();
        Self { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |(n, _)| *n)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), FormatError> {
        let l = self.lines.get(self.pos).copied().ok_or_else(|| FormatError::Syntax {
            line: self.last_line(),
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(l)
    }

    /// Next line, which must start with `keyword`; returns the rest.
    fn keyword(&mut self, keyword: &str) -> Result<(usize, &'a str), FormatError> {
        let (n, line) = self.next(&format!("`{keyword}`"))?;
        match line.strip_prefix(keyword) {
            Some(rest) if rest.is_empty() || rest.starts_with(char::is_whitespace) => Ok((n, rest.trim())),
            _ => Err(syntax(n, format!("expected `{keyword}`, found `{line}`"))),
        }
    }
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_count(line: usize, s: &str, what: &str) -> Result<usize, FormatError> {
    s.parse()
        .map_err(|_| syntax(line, format!("expected {what}, found `{s}`")))
}

/// Parses a decimal (`12`, `0.25`, `1e-3`) or a fraction (`3/4`) exactly.
pub fn parse_weight(s: &str) -> Option<BigRational> {
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits_only = |x: &str| x.chars().all(|c| c.is_ascii_digit());
    let unsigned_int = int.strip_prefix(['-', '+']).unwrap_or(int);
    if !digits_only(unsigned_int) || !digits_only(frac) || (unsigned_int.is_empty() && frac.is_empty()) {
        return None;
    }
    let numer: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Writes a weight as an integer, a finite decimal, or `p/q`.
pub fn format_weight(w: &BigRational) -> String {
    if w.is_integer() {
        return w.numer().to_string();
    }
    let mut d = w.denom().clone();
    let (mut twos, mut fives) = (0usize, 0usize);
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if d != BigInt::from(1) {
        return format!("{}/{}", w.numer(), w.denom());
    }
    let places = twos.max(fives);
    let scaled = w * BigRational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = digits.split_at(digits.len() - places);
    let sign = if w.is_negative() { "-" } else { "" };
    format!("{sign}{int}.{frac}")
}

pub fn parse_slpn(text: &str) -> Result<StochasticNet, FormatError> {
    let mut lines = Lines::new(text);
    let (n, header) = lines.next("header")?;
    if header != HEADER {
        return Err(syntax(n, format!("expected `{HEADER}`")));
    }
    let (n, rest) = lines.keyword("places")?;
    let places = parse_count(n, rest, "a place count")?;
    let (n, rest) = lines.keyword("initial marking")?;
    let mut marking: Vec<u32> = Vec::with_capacity(places);
    let mut pending = rest.to_owned();
    let mut line_no = n;
    loop {
        for tok in pending.split_whitespace() {
            let v = tok
                .parse::<u32>()
                .map_err(|_| syntax(line_no, format!("expected a token count, found `{tok}`")))?;
            marking.push(v);
        }
        if marking.len() >= places {
            break;
        }
        let (n, l) = lines.next("initial marking counts")?;
        line_no = n;
        pending = l.to_owned();
    }
    if marking.len() != places {
        return Err(syntax(
            line_no,
            format!("initial marking has {} entries, expected {places}", marking.len()),
        ));
    }

    let (n, rest) = lines.keyword("transitions")?;
    let count = parse_count(n, rest, "a transition count")?;
    let mut b = NetBuilder::new();
    let ids = b.add_places(places);
    for (p, tokens) in ids.iter().zip(&marking) {
        b.mark(*p, *tokens);
    }

    let indices = |line: usize, rest: &str| -> Result<Vec<PlaceId>, FormatError> {
        rest.split_whitespace()
            .map(|tok| {
                let index = parse_count(line, tok, "a place index")?;
                if index >= places {
                    return Err(FormatError::DanglingIndex { line, index, places });
                }
                Ok(ids[index])
            })
            .collect()
    };

    for i in 0..count {
        let (n, line) = lines.next("`label` or `silent`")?;
        let label = if line == "silent" {
            Label::Silent
        } else if let Some(name) = line.strip_prefix("label ") {
            let name = name.trim();
            if name.is_empty() {
                return Err(syntax(n, "empty label"));
            }
            Label::Activity(name.to_owned())
        } else {
            return Err(syntax(n, format!("expected `label <name>` or `silent`, found `{line}`")));
        };
        let (n, rest) = lines.keyword("weight")?;
        let weight = parse_weight(rest).ok_or_else(|| syntax(n, format!("bad weight `{rest}`")))?;
        if !weight.is_positive() {
            return Err(FormatError::NonPositiveWeight { line: n });
        }
        let (n, rest) = lines.keyword("inputs")?;
        let inputs = indices(n, rest)?;
        let (n, rest) = lines.keyword("outputs")?;
        let outputs = indices(n, rest)?;
        b.add_transition(format!("t{}", i + 1), label, Weight::from_ratio(weight), &inputs, &outputs);
    }
    if let Some((n, l)) = lines.lines.get(lines.pos) {
        return Err(syntax(*n, format!("unexpected trailing content `{l}`")));
    }
    Ok(b.build()?)
}

pub fn write_slpn(net: &StochasticNet) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "places {}", net.num_places()).unwrap();
    writeln!(s, "initial marking").unwrap();
    let counts: Vec<String> = net.initial_marking().counts().iter().map(u32::to_string).collect();
    writeln!(s, "{}", counts.join(" ")).unwrap();
    writeln!(s, "transitions {}", net.num_transitions()).unwrap();
    let arcs = |arcs: &[(PlaceId, u32)]| {
        arcs.iter()
            .flat_map(|(p, w)| std::iter::repeat_n(p.0.to_string(), *w as usize))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for t in net.transitions() {
        match &t.label {
            Label::Activity(a) => writeln!(s, "label {a}").unwrap(),
            Label::Silent => writeln!(s, "silent").unwrap(),
        }
        writeln!(s, "weight {}", format_weight(t.weight.exact())).unwrap();
        writeln!(s, "inputs {}", arcs(&t.inputs)).unwrap();
        writeln!(s, "outputs {}", arcs(&t.outputs)).unwrap();
    }
    // keep `inputs ` / `outputs ` tidy when empty
    s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n"
}

/// Comma-separated activities; `\,` is a literal comma and `\\` a backslash.
/// Activities are trimmed; blank input is the empty trace.
pub fn parse_trace(text: &str) -> Vec<String> {
    if text.trim().is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(next) => cur.push(next),
                None => cur.push('\\'),
            },
            ',' => out.push(std::mem::take(&mut cur).trim().to_owned()),
            _ => cur.push(c),
        }
    }
    out.push(cur.trim().to_owned());
    out
}

pub fn format_trace(trace: &[String]) -> String {
    trace
        .iter()
        .map(|a| a.replace('\\', "\\\\").replace(',', "\\,"))
        .collect::<Vec<_>>()
        .join(",")
}

/// One trace per line; blank lines and `#` lines are skipped.
pub fn parse_log(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(parse_trace)
        .collect()
}

/// An alignment with the context needed to print it.
#[derive(Debug, Clone)]
pub struct AlignmentReport<'a> {
    pub alignment: &'a Alignment,
    pub model: &'a StochasticNet,
    pub expanded: usize,
    pub runtime_ms: f64,
    pub node_budget: usize,
    pub cap: i64,
    /// Include the exact probability as a fraction.
    pub rational: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Serialize)]
struct JsonMove<'a> {
    kind: &'static str,
    activity: Option<&'a str>,
    transition: Option<&'a str>,
}

#[derive(Serialize)]
struct JsonStats {
    expanded: usize,
    runtime_ms: f64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    alpha: f64,
    cost: u32,
    probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    probability_exact: Option<String>,
    log10_probability: f64,
    loss: f64,
    moves: Vec<JsonMove<'a>>,
    stats: JsonStats,
}

pub fn render(report: &AlignmentReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => render_table(report),
        OutputFormat::Json => render_json(report),
    }
}

fn render_json(r: &AlignmentReport) -> String {
    let a = r.alignment;
    let doc = JsonReport {
        alpha: a.alpha,
        cost: a.cost,
        probability: a.probability.value(),
        probability_exact: r.rational.then(|| a.probability.exact.to_string()),
        log10_probability: a.probability.log10,
        loss: a.loss,
        moves: a
            .moves
            .iter()
            .map(|m| JsonMove {
                kind: m.kind.name(),
                activity: m.activity.as_deref(),
                transition: m.model_transition.map(|t| r.model.transition(t).name.as_str()),
            })
            .collect(),
        stats: JsonStats {
            expanded: r.expanded,
            runtime_ms: r.runtime_ms,
        },
    };
    serde_json::to_string(&doc).expect("report serialises")
}

const GAP: &str = "≫";

fn render_table(r: &AlignmentReport) -> String {
    let a = r.alignment;
    let mut out = String::new();
    if !a.moves.is_empty() {
        let cells: Vec<(String, String)> = a
            .moves
            .iter()
            .map(|m| {
                let top = match m.kind {
                    MoveKind::Trace | MoveKind::Sync => m.activity.clone().unwrap_or_default(),
                    _ => GAP.to_owned(),
                };
                let bottom = m
                    .model_transition
                    .map_or_else(|| GAP.to_owned(), |t| r.model.transition(t).name.clone());
                (top, bottom)
            })
            .collect();
        let width = |s: &str| s.chars().count();
        let mut top = String::from("trace |");
        let mut bottom = String::from("model |");
        for (t, b) in &cells {
            let w = width(t).max(width(b));
            write!(top, " {t}{} |", " ".repeat(w - width(t))).unwrap();
            write!(bottom, " {b}{} |", " ".repeat(w - width(b))).unwrap();
        }
        writeln!(out, "{top}").unwrap();
        writeln!(out, "{bottom}").unwrap();
    }
    writeln!(
        out,
        "alpha {}  cost {}  probability {:.6e}  log10 {:.6}  loss {:.6}",
        a.alpha,
        a.cost,
        a.probability.value(),
        a.probability.log10,
        a.loss
    )
    .unwrap();
    if r.rational {
        writeln!(out, "probability (exact) {}", a.probability.exact).unwrap();
    }
    writeln!(
        out,
        "expanded {}  runtime {:.1} ms  node budget {}  cap {}",
        r.expanded, r.runtime_ms, r.node_budget, r.cap
    )
    .unwrap();
    out
}
