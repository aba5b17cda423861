//! Reference solvers used to check the junction-tree engines: exhaustive
//! expectimax over the full joint, strategy enumeration for tiny diagrams,
//! and plain variable elimination.

use std::collections::HashMap;

use crate::eliminate::{EliminationOptions, EliminationStats, Eliminator, LiveSet, Term};
use crate::error::{Error, Result};
use crate::jtree::{relevant_past, strong_tree};
use crate::model::{Evidence, InfluenceDiagram};
use crate::potential::{ArgmaxRecord, Domain, OpCounter, VarId};
use crate::strategy::{DecisionRule, Strategy};

pub const DEFAULT_CAP: u128 = 10_000_000;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Optimal alternatives of a decision at one configuration of its full past.
#[derive(Clone, Debug, PartialEq)]
pub struct PastEntry {
    pub optimal: Vec<usize>,
    /// Probability of the observed part of the past (times P(e)).
    pub mass: f64,
}

/// Decision rule over everything observed or decided before the decision.
#[derive(Clone, Debug, PartialEq)]
pub struct FullPastRule {
    pub decision: VarId,
    pub domain: Domain,
    pub entries: Vec<Option<PastEntry>>,
}

#[derive(Clone, Debug)]
pub struct BruteSolution {
    pub meu: f64,
    /// Probability of the evidence.
    pub mass: f64,
    pub full_rules: Vec<FullPastRule>,
}

impl BruteSolution {
    /// Projects each full-past rule onto `domains[i]`, a subset of the
    /// full past. Fails if the optimal choice depends on anything else.
    pub fn project(&self, id: &InfluenceDiagram, domains: &[Domain]) -> Result<Strategy> {
        let mut rules = Vec::with_capacity(self.full_rules.len());
        for (full, dom) in self.full_rules.iter().zip(domains) {
            let card = id.card(full.decision);
            let offsets = dom.offsets_in(&full.domain);
            let mut allowed: Vec<Option<Vec<bool>>> = vec![None; dom.size()];
            for (cell, entry) in full.entries.iter().enumerate() {
                let Some(e) = entry else { continue };
                if e.mass <= 0.0 {
                    continue;
                }
                let slot = allowed[offsets[cell]].get_or_insert_with(|| vec![true; card]);
                for (s, ok) in slot.iter_mut().enumerate() {
                    *ok &= e.optimal.contains(&s);
                }
            }
            let mut choices = Vec::with_capacity(dom.size());
            let mut ties = Vec::with_capacity(dom.size());
            for a in allowed {
                let a = a.unwrap_or_else(|| vec![true; card]);
                let first = a
                    .iter()
                    .position(|&x| x)
                    .ok_or_else(|| Error::ProjectionUndefined(id.name(full.decision).to_string()))?;
                choices.push(first);
                ties.push(a.iter().filter(|&&x| x).count() > 1);
            }
            rules.push(DecisionRule {
                decision: full.decision,
                domain: dom.clone(),
                choices,
                ties,
            });
        }
        Ok(Strategy { meu: self.meu, rules })
    }
}

fn check_cap(id: &InfluenceDiagram, cap: u128) -> Result<()> {
    let size = id.state_space();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(())
}

/// Variables in temporal order, ties by id.
fn temporal_order(id: &InfluenceDiagram) -> Vec<VarId> {
    let mut vs: Vec<VarId> = (0..id.num_vars()).collect();
    vs.sort_by_key(|&v| (id.partition().rank(v), v));
    vs
}

fn weight(id: &InfluenceDiagram, a: &[usize]) -> f64 {
    id.families().iter().map(|f| f.potential.value_at(a)).product()
}

fn utility(id: &InfluenceDiagram, a: &[usize]) -> f64 {
    id.utilities().iter().map(|u| u.potential.value_at(a)).sum()
}

struct Expectimax<'a> {
    id: &'a InfluenceDiagram,
    ev: &'a Evidence,
    order: Vec<VarId>,
    pasts: Vec<Domain>,
    rules: HashMap<VarId, Vec<Option<PastEntry>>>,
}

impl Expectimax<'_> {
    /// Returns (probability mass, mass-weighted utility) below `depth`.
    fn visit(&mut self, depth: usize, a: &mut Vec<usize>) -> (f64, f64) {
        if depth == self.order.len() {
            let w = weight(self.id, a);
            return (w, if w == 0.0 { 0.0 } else { w * utility(self.id, a) });
        }
        let v = self.order[depth];
        if let Some(s) = self.ev.get(v) {
            a[v] = s;
            return self.visit(depth + 1, a);
        }
        let card = self.id.card(v);
        if !self.id.is_decision(v) {
            let (mut m, mut u) = (0.0, 0.0);
            for s in 0..card {
                a[v] = s;
                let (dm, du) = self.visit(depth + 1, a);
                m += dm;
                u += du;
            }
            return (m, u);
        }
        let mut results = Vec::with_capacity(card);
        for s in 0..card {
            a[v] = s;
            results.push(self.visit(depth + 1, a));
        }
        let best = results
            .iter()
            .map(|r| r.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let optimal: Vec<usize> = (0..card).filter(|&s| tied(results[s].1, best)).collect();
        let mass = results[0].0;
        let j = self.id.decision_order().iter().position(|&d| d == v).expect("ordered decision");
        let cell = self.pasts[j].offset_of(a);
        self.rules.get_mut(&v).expect("rule table")[cell] = Some(PastEntry { optimal, mass });
        (mass, best)
    }
}

/// Domain of everything observed or decided before `d`, minus evidence.
pub fn full_past(id: &InfluenceDiagram, ev: &Evidence, d: VarId) -> Domain {
    let p = id.partition();
    let vars: Vec<VarId> = (0..id.num_vars())
        .filter(|&v| p.precedes(v, d) && !ev.contains(v))
        .collect();
    id.domain_of(&vars)
}

/// Exact MEU by expectimax over every joint configuration, visiting the
/// variables in temporal order. Records the optimal alternatives of every
/// decision for every configuration of its full past.
pub fn brute_force_solve(id: &InfluenceDiagram, ev: &Evidence, cap: u128) -> Result<BruteSolution> {
    id.check_evidence(ev)?;
    check_cap(id, cap)?;
    let pasts: Vec<Domain> = id.decision_order().iter().map(|&d| full_past(id, ev, d)).collect();
    let rules = id
        .decision_order()
        .iter()
        .zip(&pasts)
        .map(|(&d, p)| (d, vec![None; p.size()]))
        .collect();
    let mut x = Expectimax {
        id,
        ev,
        order: temporal_order(id),
        pasts: pasts.clone(),
        rules,
    };
    let mut a = vec![0; id.num_vars()];
    let (mass, total) = x.visit(0, &mut a);
    if mass <= 0.0 {
        return Err(Error::Evidence("the evidence has probability zero".into()));
    }
    let full_rules = id
        .decision_order()
        .iter()
        .zip(pasts)
        .map(|(&d, domain)| FullPastRule {
            decision: d,
            domain,
            entries: x.rules.remove(&d).expect("rule table"),
        })
        .collect();
    Ok(BruteSolution {
        meu: total / mass,
        mass,
        full_rules,
    })
}

/// Expected utility of following `strategy`, conditional on the evidence.
pub fn expected_utility(id: &InfluenceDiagram, ev: &Evidence, strategy: &Strategy, cap: u128) -> Result<f64> {
    check_cap(id, cap)?;
    let chance: Vec<VarId> = id.chance_vars().filter(|&v| !ev.contains(v)).collect();
    let order = temporal_order(id);
    let mut a = vec![0; id.num_vars()];
    for (&v, &s) in ev.iter() {
        a[v] = s;
    }
    let (mut mass, mut total) = (0.0, 0.0);
    loop {
        for &v in &order {
            if id.is_decision(v) {
                let rule = strategy
                    .rule(v)
                    .ok_or_else(|| Error::Internal(format!("no rule for `{}`", id.name(v))))?;
                a[v] = rule.choice(&a);
            }
        }
        let w = weight(id, &a);
        if w != 0.0 {
            mass += w;
            total += w * utility(id, &a);
        }
        // Odometer over the free chance variables.
        let mut k = chance.len();
        loop {
            if k == 0 {
                if mass <= 0.0 {
                    return Err(Error::Evidence("the evidence has probability zero".into()));
                }
                return Ok(total / mass);
            }
            k -= 1;
            let v = chance[k];
            a[v] += 1;
            if a[v] < id.card(v) {
                break;
            }
            a[v] = 0;
        }
    }
}

/// Best expected utility over every strategy of full-past rules. Only
/// feasible for tiny diagrams; `cap` bounds the number of strategies.
pub fn enumerate_strategies(id: &InfluenceDiagram, ev: &Evidence, cap: u128) -> Result<f64> {
    let decisions = id.decision_order();
    let pasts: Vec<Domain> = decisions.iter().map(|&d| full_past(id, ev, d)).collect();
    let count = decisions
        .iter()
        .zip(&pasts)
        .try_fold(1u128, |acc, (&d, p)| {
            (id.card(d) as u128).checked_pow(p.size() as u32).and_then(|n| acc.checked_mul(n))
        })
        .unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::CapExceeded { size: count, cap });
    }
    let mut rules: Vec<DecisionRule> = decisions
        .iter()
        .zip(&pasts)
        .map(|(&d, p)| DecisionRule::arbitrary(d, p.clone(), id.card(d)))
        .collect();
    let mut best = f64::NEG_INFINITY;
    loop {
        let s = Strategy {
            meu: 0.0,
            rules: rules.clone(),
        };
        best = best.max(expected_utility(id, ev, &s, DEFAULT_CAP)?);
        // Odometer over every entry of every rule table.
        let mut advanced = false;
        'outer: for r in rules.iter_mut().rev() {
            let card = id.card(r.decision);
            for c in r.choices.iter_mut().rev() {
                *c += 1;
                if *c < card {
                    advanced = true;
                    break 'outer;
                }
                *c = 0;
            }
        }
        if !advanced {
            return Ok(best);
        }
    }
}

#[derive(Clone, Debug)]
pub struct VeSolution {
    pub strategy: Strategy,
    pub ops: OpCounter,
    pub stats: EliminationStats,
}

/// Variable elimination over the whole diagram in the given order, with
/// every division executed when introduced and no pruning.
pub fn bucket_eliminate(
    id: &InfluenceDiagram,
    order: &[VarId],
    ev: &Evidence,
) -> Result<(f64, Vec<ArgmaxRecord>, OpCounter, EliminationStats)> {
    id.check_evidence(ev)?;
    let p = id.partition();
    if order.windows(2).any(|w| p.rank(w[0]) < p.rank(w[1])) {
        return Err(Error::OrderInconsistent("elimination order violates the information constraints".into()));
    }
    let mut el = Eliminator::new(EliminationOptions {
        immediate_division: true,
        ..Default::default()
    });
    let mut live = LiveSet::default();
    for f in id.families() {
        let pot = f.potential.restrict(ev.as_map());
        live.probs.push(el.factor(pot));
    }
    for u in id.utilities() {
        live.terms.push(Term::new(u.potential.restrict(ev.as_map())));
    }
    let mut records = Vec::new();
    for &v in order {
        if ev.contains(v) {
            continue;
        }
        if id.is_decision(v) {
            records.push(el.eliminate_decision(&mut live, v, id.card(v))?);
        } else {
            el.eliminate_chance(&mut live, v, id.card(v), false)?;
        }
    }
    let meu = el.finish(live, false)?;
    Ok((meu, records, el.ctr, el.stats))
}

/// Variable elimination in the strong order, with rules spread over each
/// decision's relevant past.
pub fn solve_ve(id: &InfluenceDiagram, ev: &Evidence) -> Result<VeSolution> {
    let tree = strong_tree(id);
    let (meu, records, ops, stats) = bucket_eliminate(id, &tree.order, ev)?;
    let mut rules = Vec::with_capacity(records.len());
    for &d in id.decision_order() {
        let vd: Vec<VarId> = relevant_past(&tree, id.partition(), d)
            .into_iter()
            .filter(|&v| !ev.contains(v))
            .collect();
        let rec = records
            .iter()
            .find(|r| r.decision == d)
            .cloned()
            .ok_or_else(|| Error::Internal(format!("`{}` was not eliminated", id.name(d))))?;
        rules.push(DecisionRule::from_record(rec, id.domain_of(&vd))?);
    }
    Ok(VeSolution {
        strategy: Strategy { meu, rules },
        ops,
        stats,
    })
}
