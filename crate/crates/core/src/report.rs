//! Solver dispatch and the reports printed by the command line tool.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::hugin::solve_hugin;
use crate::jtree::{strong_tree, StrongJunctionTree};
use crate::lazy::{past_domain, solve_lazy, LazyOptions};
use crate::model::{Evidence, InfluenceDiagram};
use crate::oracle::{brute_force_solve, solve_ve, DEFAULT_CAP};
use crate::potential::OpCounter;
use crate::strategy::Strategy;

/// Largest MEU difference `compare` tolerates between engines.
pub const AGREEMENT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Engine {
    Lazy,
    Hugin,
    Ve,
    Brute,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Lazy, Engine::Hugin, Engine::Ve, Engine::Brute];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Lazy => "lazy",
            Engine::Hugin => "hugin",
            Engine::Ve => "ve",
            Engine::Brute => "brute",
        }
    }
}

/// Rounds to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn sig9<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Divisions {
    pub introduced: u64,
    pub executed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleRow {
    /// States of the rule's parents, in the order of `parents`.
    pub when: Vec<String>,
    pub choice: String,
    pub tie: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    pub decision: String,
    pub parents: Vec<String>,
    pub rows: Vec<RuleRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub engine: &'static str,
    #[serde(serialize_with = "sig9")]
    pub meu: f64,
    pub rules: Vec<RuleReport>,
    pub ops: OpCounter,
    pub divisions: Divisions,
    /// Cost of forming the initial clique tables (HUGIN only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compile_ops: Option<OpCounter>,
    #[serde(skip)]
    pub tree: Option<StrongJunctionTree>,
}

fn rule_reports(id: &InfluenceDiagram, strategy: &Strategy) -> Vec<RuleReport> {
    strategy
        .rules
        .iter()
        .map(|r| {
            let var = id.variable(r.decision);
            let rows = (0..r.domain.size())
                .map(|cell| {
                    let states = r.domain.decode(cell);
                    RuleRow {
                        when: r
                            .domain
                            .vars()
                            .iter()
                            .zip(states)
                            .map(|(&v, s)| id.variable(v).states[s].clone())
                            .collect(),
                        choice: var.states[r.choices[cell]].clone(),
                        tie: r.ties[cell],
                    }
                })
                .collect();
            RuleReport {
                decision: var.name.clone(),
                parents: r.domain.vars().iter().map(|&v| id.name(v).to_string()).collect(),
                rows,
            }
        })
        .collect()
}

/// Runs one engine. `opts` only affects the lazy engine.
pub fn run_engine(id: &InfluenceDiagram, ev: &Evidence, engine: Engine, opts: LazyOptions) -> Result<SolveReport> {
    let (strategy, ops, divisions, compile_ops, tree) = match engine {
        Engine::Lazy => {
            let s = solve_lazy(id, ev, opts)?;
            let d = Divisions {
                introduced: s.stats.divisions_introduced,
                executed: s.stats.divisions_executed,
            };
            (s.strategy, s.ops, d, None, s.tree)
        }
        Engine::Hugin => {
            let s = solve_hugin(id, ev)?;
            let d = Divisions {
                introduced: s.ops.divisions,
                executed: s.ops.divisions,
            };
            (s.strategy, s.ops, d, Some(s.compile_ops), s.tree)
        }
        Engine::Ve => {
            let s = solve_ve(id, ev)?;
            let d = Divisions {
                introduced: s.stats.divisions_introduced,
                executed: s.stats.divisions_executed,
            };
            (s.strategy, s.ops, d, None, strong_tree(id))
        }
        Engine::Brute => {
            id.check_evidence(ev)?;
            let tree = strong_tree(id);
            let b = brute_force_solve(id, ev, DEFAULT_CAP)?;
            let domains: Vec<_> = id
                .decision_order()
                .iter()
                .map(|&d| past_domain(id, &tree, ev, d))
                .collect();
            let mut strategy = b.project(id, &domains)?;
            strategy.meu = b.meu;
            (strategy, OpCounter::new(), Divisions::default(), None, tree)
        }
    };
    Ok(SolveReport {
        engine: engine.name(),
        meu: strategy.meu,
        rules: rule_reports(id, &strategy),
        ops,
        divisions,
        compile_ops,
        tree: Some(tree),
    })
}

fn fmt_ops(o: &OpCounter) -> String {
    format!(
        "{} (mul {}, add {}, div {}, max {})",
        o.total(),
        o.multiplies,
        o.additions,
        o.divisions,
        o.max_comparisons
    )
}

/// Human-readable rendering of one report.
pub fn render_text(r: &SolveReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "engine     {}", r.engine);
    let _ = writeln!(out, "meu        {}", round_sig(r.meu));
    let _ = writeln!(out, "ops        {}", fmt_ops(&r.ops));
    if let Some(c) = &r.compile_ops {
        let _ = writeln!(out, "compile    {}", fmt_ops(c));
    }
    let _ = writeln!(
        out,
        "divisions  introduced {}, executed {}",
        r.divisions.introduced, r.divisions.executed
    );
    for rule in &r.rules {
        if rule.parents.is_empty() {
            let _ = writeln!(out, "rule {}", rule.decision);
        } else {
            let _ = writeln!(out, "rule {} | {}", rule.decision, rule.parents.join(" "));
        }
        for row in &rule.rows {
            let cond: Vec<String> = rule
                .parents
                .iter()
                .zip(&row.when)
                .map(|(p, s)| format!("{p}={s}"))
                .collect();
            let cond = if cond.is_empty() { "*".to_string() } else { cond.join(" ") };
            let tie = if row.tie { "  (tie)" } else { "" };
            let _ = writeln!(out, "  {cond} -> {}{tie}", row.choice);
        }
    }
    out
}

/// Stable JSON rendering of one report.
pub fn render_json(r: &SolveReport) -> String {
    serde_json::to_string_pretty(r).expect("reports serialize")
}

/// Outcome of running every engine on one query.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub reports: Vec<SolveReport>,
    pub max_disagreement: f64,
}

impl Comparison {
    pub fn agrees(&self) -> bool {
        self.max_disagreement <= AGREEMENT_TOLERANCE
    }

    pub fn report(&self, engine: Engine) -> Option<&SolveReport> {
        self.reports.iter().find(|r| r.engine == engine.name())
    }
}

pub fn compare(id: &InfluenceDiagram, ev: &Evidence, opts: LazyOptions) -> Result<Comparison> {
    let reports = Engine::ALL
        .iter()
        .map(|&e| run_engine(id, ev, e, opts))
        .collect::<Result<Vec<_>>>()?;
    let lo = reports.iter().map(|r| r.meu).fold(f64::INFINITY, f64::min);
    let hi = reports.iter().map(|r| r.meu).fold(f64::NEG_INFINITY, f64::max);
    Ok(Comparison {
        reports,
        max_disagreement: hi - lo,
    })
}

/// Table with one row per engine.
pub fn render_comparison(c: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<7} {:>16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "engine", "meu", "mul", "add", "div", "max", "total", "compile"
    );
    for r in &c.reports {
        let compile = r.compile_ops.map_or("-".to_string(), |o| o.total().to_string());
        let _ = writeln!(
            out,
            "{:<7} {:>16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}",
            r.engine,
            round_sig(r.meu),
            r.ops.multiplies,
            r.ops.additions,
            r.ops.divisions,
            r.ops.max_comparisons,
            r.ops.total(),
            compile
        );
    }
    let verdict = if c.agrees() { "agree" } else { "DISAGREE" };
    let _ = writeln!(out, "engines {verdict} (max difference {:e})", c.max_disagreement);
    out
}
