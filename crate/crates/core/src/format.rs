//! Line-oriented text format for influence diagrams.
//!
//! ```text
//! @variables
//! C1 chance f,t
//! D decision d0,d1
//! @arcs
//! C1 -> D
//! @cpt C1 |
//! 0.6 0.4
//! @utility U | D C1
//! 5 1 2 8
//! @order
//! D
//! ```
//!
//! A `@cpt` block has one line per parent configuration (first parent
//! slowest) holding the distribution of the head variables. Several heads
//! before the bar give one joint table. A `@utility` block is a single run
//! of numbers in the same row-major layout and may span lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{DiagramBuilder, InfluenceDiagram, ROW_TOLERANCE};
use crate::potential::VarId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Variables,
    Arcs,
    Cpt,
    Utility,
    Order,
}

struct CptBlock {
    line: usize,
    heads: Vec<VarId>,
    tail: Vec<VarId>,
    rows: Vec<(usize, Vec<f64>)>,
}

struct UtilityBlock {
    line: usize,
    name: String,
    vars: Vec<VarId>,
    values: Vec<f64>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Parser {
    builder: DiagramBuilder,
    names: BTreeMap<String, VarId>,
    var_lines: Vec<usize>,
    cards: Vec<usize>,
    decision: Vec<bool>,
    arcs: Vec<(usize, VarId, VarId)>,
    cpts: Vec<CptBlock>,
    utilities: Vec<UtilityBlock>,
    order: Option<(usize, Vec<VarId>)>,
}

impl Parser {
    fn var(&self, line: usize, name: &str) -> Result<VarId> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| err(line, format!("unknown variable `{name}`")))
    }

    fn vars(&self, line: usize, list: &str) -> Result<Vec<VarId>> {
        list.split_whitespace().map(|n| self.var(line, n)).collect()
    }

    fn variable(&mut self, line: usize, text: &str) -> Result<()> {
        let mut it = text.splitn(3, char::is_whitespace);
        let name = it.next().unwrap_or_default();
        let kind = it.next().map(str::trim).unwrap_or_default();
        let states: Vec<&str> = it
            .next()
            .unwrap_or_default()
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if self.names.contains_key(name) {
            return Err(err(line, format!("duplicate variable name `{name}`")));
        }
        if states.is_empty() {
            return Err(err(line, format!("variable `{name}` has no states")));
        }
        let id = match kind {
            "chance" => self.builder.chance(name, &states),
            "decision" => self.builder.decision(name, &states),
            other => return Err(err(line, format!("expected `chance` or `decision`, found `{other}`"))),
        };
        self.names.insert(name.to_string(), id);
        self.var_lines.push(line);
        self.cards.push(states.len());
        self.decision.push(kind == "decision");
        Ok(())
    }

    fn arc(&mut self, line: usize, text: &str) -> Result<()> {
        let (from, to) = text
            .split_once("->")
            .ok_or_else(|| err(line, "expected `parent -> child`"))?;
        let from = self.var(line, from.trim())?;
        let to = self.var(line, to.trim())?;
        self.arcs.push((line, from, to));
        Ok(())
    }

    fn header_vars(&self, line: usize, rest: &str) -> Result<(Vec<VarId>, Vec<VarId>)> {
        let (left, right) = rest
            .split_once('|')
            .ok_or_else(|| err(line, "expected `|` between the table variables and its parents"))?;
        Ok((self.vars(line, left)?, self.vars(line, right)?))
    }

    fn numbers(line: usize, text: &str) -> Result<Vec<f64>> {
        text.split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(line, format!("`{t}` is not a finite number")))
            })
            .collect()
    }

    fn size(&self, vars: &[VarId]) -> usize {
        vars.iter().map(|&v| self.cards[v]).product()
    }

    fn check_cpt(&self, b: &CptBlock) -> Result<()> {
        let rows = self.size(&b.tail);
        let width = self.size(&b.heads);
        if b.rows.len() != rows {
            let at = b.rows.last().map_or(b.line, |r| r.0);
            return Err(err(at, format!("table has {} rows, expected {rows}", b.rows.len())));
        }
        for (r, (line, values)) in b.rows.iter().enumerate() {
            if values.len() != width {
                return Err(err(*line, format!("row {r} has {} entries, expected {width}", values.len())));
            }
            if values.iter().any(|&x| x < 0.0) {
                return Err(err(*line, format!("row {r} contains a negative probability")));
            }
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(err(*line, format!("row {r} sums to {sum} (expected 1)")));
            }
        }
        Ok(())
    }

    /// Compares the arcs into every variable with the table parents.
    fn check_arcs(&self) -> Result<()> {
        let mut table_parents: Vec<Option<(usize, BTreeSet<VarId>)>> = vec![None; self.cards.len()];
        for b in &self.cpts {
            for (i, &h) in b.heads.iter().enumerate() {
                let pa: BTreeSet<VarId> = b.tail.iter().chain(&b.heads[..i]).copied().collect();
                table_parents[h] = Some((b.line, pa));
            }
        }
        let mut arcs_into: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); self.cards.len()];
        for &(line, from, to) in &self.arcs {
            if !arcs_into[to].insert(from) {
                return Err(err(line, "duplicate arc"));
            }
            if self.decision[to] {
                continue;
            }
            if let Some((_, pa)) = &table_parents[to] {
                if !pa.contains(&from) {
                    return Err(err(
                        line,
                        Error::ArcMismatch {
                            var: self.name(to),
                            detail: format!("`{}` is not a parent in its table", self.name(from)),
                        }
                        .to_string(),
                    ));
                }
            }
        }
        for (v, tp) in table_parents.iter().enumerate() {
            if let Some((line, pa)) = tp {
                if let Some(&p) = pa.difference(&arcs_into[v]).next() {
                    return Err(err(
                        *line,
                        Error::ArcMismatch {
                            var: self.name(v),
                            detail: format!("missing arc `{} -> {}`", self.name(p), self.name(v)),
                        }
                        .to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn name(&self, v: VarId) -> String {
        self.names
            .iter()
            .find(|(_, &id)| id == v)
            .map(|(n, _)| n.clone())
            .unwrap_or_default()
    }

    /// Best line to blame for an error raised by the diagram builder.
    fn blame(&self, e: &Error, last_line: usize) -> usize {
        let var_line = |name: &str| self.names.get(name).map(|&v| self.var_lines[v]);
        let cpt_line = |name: &str| {
            self.cpts
                .iter()
                .rev()
                .find(|b| b.heads.iter().any(|&h| self.name(h) == name))
                .map(|b| b.line)
        };
        let line = match e {
            Error::DuplicateCpt(n) | Error::NotChance(n) => cpt_line(n),
            Error::NotDecision(_) | Error::OrderInconsistent(_) => self.order.as_ref().map(|o| o.0),
            Error::MissingCpt(n) | Error::Cycle(n) | Error::NoStates(n) => var_line(n),
            Error::DuplicateState { var, .. } => var_line(var),
            _ => None,
        };
        line.unwrap_or(last_line)
    }

    fn finish(mut self, last_line: usize) -> Result<InfluenceDiagram> {
        for b in &self.cpts {
            self.check_cpt(b)?;
        }
        for u in &self.utilities {
            let n = self.size(&u.vars);
            if u.values.len() != n {
                return Err(err(
                    u.line,
                    format!("utility `{}` has {} entries, expected {n}", u.name, u.values.len()),
                ));
            }
        }
        self.check_arcs()?;
        for &(_, from, to) in &self.arcs {
            if self.decision[to] {
                self.builder.informs(from, to);
            }
        }
        for b in &self.cpts {
            let table: Vec<f64> = b.rows.iter().flat_map(|r| r.1.iter().copied()).collect();
            self.builder.cpt(&b.heads, &b.tail, table);
        }
        for u in &self.utilities {
            self.builder.utility(&u.name, &u.vars, u.values.clone());
        }
        if let Some((_, o)) = &self.order {
            self.builder.order(o);
        }
        self.builder.build().map_err(|e| {
            let line = self.blame(&e, last_line);
            err(line, e.to_string())
        })
    }
}

/// Parses a model file. Every error carries the offending line number.
pub fn parse_model(text: &str) -> Result<InfluenceDiagram> {
    let mut p = Parser::default();
    let mut section: Option<Section> = None;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        if let Some(directive) = content.strip_prefix('@') {
            let (word, rest) = directive
                .split_once(char::is_whitespace)
                .unwrap_or((directive, ""));
            let next = match word {
                "variables" => Section::Variables,
                "arcs" => Section::Arcs,
                "cpt" => Section::Cpt,
                "utility" => Section::Utility,
                "order" => Section::Order,
                other => return Err(err(line, format!("unknown section `@{other}`"))),
            };
            if let Some(cur) = section {
                let repeatable = matches!(next, Section::Cpt | Section::Utility);
                if next < cur || (next == cur && !repeatable) {
                    return Err(err(line, format!("section `@{word}` out of order")));
                }
            }
            match next {
                Section::Cpt => {
                    let (heads, tail) = p.header_vars(line, rest)?;
                    if heads.is_empty() {
                        return Err(err(line, "table without head variables"));
                    }
                    p.cpts.push(CptBlock {
                        line,
                        heads,
                        tail,
                        rows: Vec::new(),
                    });
                }
                Section::Utility => {
                    let (name, vars) = rest
                        .split_once('|')
                        .ok_or_else(|| err(line, "expected `@utility <name> | <vars>`"))?;
                    let name = name.trim();
                    if name.is_empty() || name.contains(char::is_whitespace) {
                        return Err(err(line, "utility name must be a single word"));
                    }
                    p.utilities.push(UtilityBlock {
                        line,
                        name: name.to_string(),
                        vars: p.vars(line, vars)?,
                        values: Vec::new(),
                    });
                }
                Section::Order => {
                    let names = p.vars(line, rest)?;
                    p.order = Some((line, names));
                }
                _ if !rest.trim().is_empty() => {
                    return Err(err(line, format!("unexpected text after `@{word}`")));
                }
                _ => {}
            }
            section = Some(next);
            continue;
        }
        match section {
            None => return Err(err(line, "content before the first section")),
            Some(Section::Variables) => p.variable(line, content)?,
            Some(Section::Arcs) => p.arc(line, content)?,
            Some(Section::Cpt) => {
                let row = Parser::numbers(line, content)?;
                p.cpts.last_mut().expect("inside a table").rows.push((line, row));
            }
            Some(Section::Utility) => {
                let values = Parser::numbers(line, content)?;
                p.utilities.last_mut().expect("inside a utility").values.extend(values);
            }
            Some(Section::Order) => {
                let more = p.vars(line, content)?;
                p.order.as_mut().expect("inside the order").1.extend(more);
            }
        }
    }
    p.finish(last_line)
}

/// Writes a diagram in the format read by [`parse_model`].
pub fn serialize_model(id: &InfluenceDiagram) -> String {
    let name = |v: VarId| id.name(v);
    let names = |vs: &[VarId]| vs.iter().map(|&v| id.name(v)).collect::<Vec<_>>().join(" ");
    let nums = |xs: &[f64]| xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
    let mut out = String::new();

    out.push_str("@variables\n");
    for v in id.variables() {
        let kind = if v.is_decision() { "decision" } else { "chance" };
        let _ = writeln!(out, "{} {} {}", v.name, kind, v.states.join(","));
    }

    let arcs: Vec<(VarId, VarId)> = (0..id.num_vars())
        .flat_map(|v| id.parents(v).iter().map(move |&p| (p, v)))
        .collect();
    if !arcs.is_empty() {
        out.push_str("@arcs\n");
        for (p, c) in arcs {
            let _ = writeln!(out, "{} -> {}", name(p), name(c));
        }
    }

    for f in id.families() {
        let mut listed = f.tail.clone();
        listed.extend_from_slice(&f.heads);
        let table = f.potential.values_in_order(&listed);
        let width: usize = f.heads.iter().map(|&h| id.card(h)).product();
        let _ = writeln!(out, "@cpt {} | {}", names(&f.heads), names(&f.tail));
        trim_trailing_space(&mut out);
        for row in table.chunks(width) {
            let _ = writeln!(out, "{}", nums(row));
        }
    }

    for u in id.utilities() {
        let table = u.potential.values_in_order(&u.listed);
        let _ = writeln!(out, "@utility {} | {}", u.name, names(&u.listed));
        trim_trailing_space(&mut out);
        let width = u.listed.last().map_or(1, |&v| id.card(v));
        for row in table.chunks(width) {
            let _ = writeln!(out, "{}", nums(row));
        }
    }

    if !id.decision_order().is_empty() {
        let _ = writeln!(out, "@order\n{}", names(id.decision_order()));
    }
    out
}

/// Drops a space left before the final newline by an empty variable list.
fn trim_trailing_space(out: &mut String) {
    if out.ends_with(" \n") {
        out.truncate(out.len() - 2);
        out.push('\n');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX61: &str = "\
# two correlated chance variables and one decision
@variables
C1 chance f,t
C2 chance f,t
D decision d0,d1
@arcs
C1 -> C2
C1 -> D
@cpt C1 C2 |
0.2 0.3 0.4 0.1
@utility U1 | C1
10 0
@utility U2 | D C2
5 1
2 8
";

    fn parse_err(text: &str) -> (usize, String) {
        match parse_model(text) {
            Err(Error::Parse { line, message }) => (line, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_the_small_example() {
        let id = parse_model(EX61).unwrap();
        assert_eq!(id.num_vars(), 3);
        assert_eq!(id.families().len(), 1);
        assert_eq!(id.families()[0].heads, vec![0, 1]);
        assert_eq!(id.partition().sets[0], vec![0]);
        assert_eq!(id.decision_order(), &[2]);
    }

    #[test]
    fn round_trip() {
        let id = parse_model(EX61).unwrap();
        let text = serialize_model(&id);
        let again = parse_model(&text).unwrap();
        assert_eq!(id, again);
        assert_eq!(text, serialize_model(&again));
    }

    #[test]
    fn unnormalized_row_names_its_line() {
        let text = "@variables\nA chance a,b\nB chance a,b\n@arcs\nA -> B\n@cpt A |\n0.5 0.5\n@cpt B | A\n0.5 0.5\n0.5 0.4\n";
        let (line, msg) = parse_err(text);
        assert_eq!(line, 10);
        assert!(msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn order_required_for_two_decisions() {
        let text = "@variables\nD1 decision a,b\nD2 decision a,b\n@utility U | D1 D2\n1 2 3 4\n";
        let (_, msg) = parse_err(text);
        assert!(msg.contains("order"), "{msg}");
    }

    #[test]
    fn arcs_must_match_tables() {
        let missing = "@variables\nA chance a,b\nB chance a,b\n@cpt A |\n0.5 0.5\n@cpt B | A\n0.5 0.5\n0.5 0.5\n";
        let (line, msg) = parse_err(missing);
        assert_eq!(line, 6);
        assert!(msg.contains("missing arc"), "{msg}");

        let extra = "@variables\nA chance a,b\nB chance a,b\n@arcs\nB -> A\n@cpt A |\n0.5 0.5\n@cpt B |\n0.5 0.5\n";
        let (line, _) = parse_err(extra);
        assert_eq!(line, 5);
    }

    #[test]
    fn other_diagnostics() {
        let (line, _) = parse_err("@variables\nA chance a,b\nA chance a,b\n");
        assert_eq!(line, 3);
        let (line, _) = parse_err("@variables\nA maybe a,b\n");
        assert_eq!(line, 2);
        let (line, _) = parse_err("@variables\nA chance a,b\n@cpt A |\n0.5 x\n");
        assert_eq!(line, 4);
        let (line, _) = parse_err("@variables\nA chance a,b\n@utility U | A\n1 2 3\n");
        assert_eq!(line, 3);
        let (line, _) = parse_err("@arcs\n@variables\n");
        assert_eq!(line, 2);
        let (line, msg) = parse_err("@variables\nA chance a,b\n");
        assert_eq!(line, 2);
        assert!(msg.contains("no conditional probability table"), "{msg}");
    }
}
