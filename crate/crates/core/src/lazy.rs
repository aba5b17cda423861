//! Lazy propagation in a strong junction tree.
//!
//! Clique potentials are kept as uncombined sets. Messages are collected
//! from the leaves toward the strong root; each message is computed by
//! eliminating the variables outside the separator one at a time from only
//! the potentials relevant to it.

use std::collections::{BTreeMap, BTreeSet};

use crate::eliminate::{EliminationOptions, EliminationStats, Eliminator, LiveSet, SumEvent, Term};
use crate::error::Result;
use crate::jtree::{assign_potentials, relevant_past, strong_tree, CliqueBinding, StrongJunctionTree};
use crate::model::{Evidence, InfluenceDiagram, UndirectedGraph};
use crate::potential::{OpCounter, Potential, VarId};
use crate::relevance::{classify_barren, relevant_probabilities};
use crate::strategy::{DecisionRule, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LazyOptions {
    /// Relevance pruning and barren removal.
    pub prune: bool,
    /// Execute every division when it is introduced.
    pub force_divide: bool,
    pub structural_unity: bool,
    /// Visit children in descending rather than ascending clique number.
    pub reverse_children: bool,
    /// Keep a trace of every chance elimination in the solution.
    pub trace: bool,
}

impl Default for LazyOptions {
    fn default() -> Self {
        LazyOptions {
            prune: true,
            force_divide: false,
            structural_unity: true,
            reverse_children: false,
            trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LazySolution {
    pub strategy: Strategy,
    pub ops: OpCounter,
    pub stats: EliminationStats,
    pub trace: Vec<SumEvent>,
    pub tree: StrongJunctionTree,
}

struct Collector<'a> {
    id: &'a InfluenceDiagram,
    ev: &'a Evidence,
    tree: &'a StrongJunctionTree,
    binding: CliqueBinding,
    opts: LazyOptions,
    el: Eliminator,
    rules: BTreeMap<VarId, DecisionRule>,
}

pub fn solve_lazy(id: &InfluenceDiagram, ev: &Evidence, opts: LazyOptions) -> Result<LazySolution> {
    id.check_evidence(ev)?;
    let tree = strong_tree(id);
    let binding = assign_potentials(id, &tree)?;
    let el = Eliminator::new(EliminationOptions {
        immediate_division: opts.force_divide,
        structural_unity: opts.structural_unity,
        distribute: true,
        trace: opts.trace,
    });
    let mut c = Collector {
        id,
        ev,
        tree: &tree,
        binding,
        opts,
        el,
        rules: BTreeMap::new(),
    };
    let live = c.collect(tree.root())?;
    let meu = c.el.finish(live, !ev.is_empty())?;

    let mut rules = Vec::with_capacity(id.decision_order().len());
    for &d in id.decision_order() {
        let rule = match c.rules.remove(&d) {
            Some(r) => r,
            None => DecisionRule::arbitrary(d, past_domain(id, &tree, ev, d), id.card(d)),
        };
        rules.push(rule);
    }
    Ok(LazySolution {
        strategy: Strategy { meu, rules },
        ops: c.el.ctr,
        stats: c.el.stats,
        trace: c.el.trace,
        tree,
    })
}

/// Rule domain of `d`: its relevant past without evidence variables.
pub fn past_domain(
    id: &InfluenceDiagram,
    tree: &StrongJunctionTree,
    ev: &Evidence,
    d: VarId,
) -> crate::potential::Domain {
    let vd: Vec<VarId> = relevant_past(tree, id.partition(), d)
        .into_iter()
        .filter(|&v| !ev.contains(v))
        .collect();
    id.domain_of(&vd)
}

impl Collector<'_> {
    fn collect(&mut self, c: usize) -> Result<LiveSet> {
        let mut live = LiveSet::default();
        for &i in &self.binding.families[c] {
            let p = self.id.families()[i].potential.restrict(self.ev.as_map());
            live.probs.push(self.el.factor(p));
        }
        for &i in &self.binding.utilities[c] {
            let u = self.id.utilities()[i].potential.restrict(self.ev.as_map());
            live.terms.push(Term::new(u));
        }
        let mut children = self.tree.children(c);
        if self.opts.reverse_children {
            children.reverse();
        }
        for ch in children {
            let msg = self.collect(ch)?;
            live.probs.extend(msg.probs);
            live.terms.extend(msg.terms);
        }

        let is_root = self.tree.parent[c].is_none();
        let sep: Vec<VarId> = if is_root {
            Vec::new()
        } else {
            self.tree.separators[c]
                .iter()
                .copied()
                .filter(|&v| !self.ev.contains(v))
                .collect()
        };
        if self.opts.prune {
            let mut targets = sep.clone();
            targets.extend(observations_of_pending(self.id, &live, &sep));
            prune(&mut live, &targets);
        }
        live.probs.retain(|f| !f.pot.is_unity());

        let allow_drop = is_root && self.ev.is_empty();
        loop {
            let pending: BTreeSet<VarId> = live.vars().into_iter().filter(|v| !sep.contains(v)).collect();
            if pending.is_empty() {
                break;
            }
            let y = choose_next(self.id, &pending, &live, &sep);
            if self.id.is_decision(y) {
                let rec = self.el.eliminate_decision(&mut live, y, self.id.card(y))?;
                let dom = past_domain(self.id, self.tree, self.ev, y);
                self.rules.insert(y, DecisionRule::from_record(rec, dom)?);
            } else {
                self.el.eliminate_chance(&mut live, y, self.id.card(y), allow_drop)?;
            }
        }
        Ok(live)
    }
}

/// Pending chance variables observed before a pending decision. They are
/// conditioned on by that decision, so they can be neither barren nor
/// irrelevant.
fn observations_of_pending(id: &InfluenceDiagram, live: &LiveSet, sep: &[VarId]) -> Vec<VarId> {
    let part = id.partition();
    let pending: Vec<VarId> = live.vars().into_iter().filter(|v| !sep.contains(v)).collect();
    let latest_decision = pending
        .iter()
        .filter(|&&v| id.is_decision(v))
        .map(|&v| part.rank(v))
        .max();
    match latest_decision {
        Some(r) => pending
            .into_iter()
            .filter(|&v| !id.is_decision(v) && part.rank(v) < r)
            .collect(),
        None => Vec::new(),
    }
}

/// Drops probability factors irrelevant to `targets` and the live utility
/// terms. Utility terms are always kept.
fn prune(live: &mut LiveSet, targets: &[VarId]) {
    let term_vars: Vec<Vec<VarId>> = live.terms.iter().map(|t| t.vars().into_iter().collect()).collect();
    let term_refs: Vec<&[VarId]> = term_vars.iter().map(|v| v.as_slice()).collect();
    let probs: Vec<&Potential> = live.probs.iter().map(|f| f.pot.as_ref()).collect();
    let keep = relevant_probabilities(&probs, &term_refs, targets);
    let mut it = keep.into_iter();
    live.probs.retain(|_| it.next().unwrap_or(true));
}

/// Picks the next variable to eliminate from `pending`.
///
/// Only variables of the latest remaining temporal rank are eligible.
/// Probabilistic barren ones go first, unless some other eligible variable
/// shrinks a utility without touching a probabilistic barren variable;
/// otherwise minimum fill-in on the live domain graph, then lowest id.
pub fn choose_next(id: &InfluenceDiagram, pending: &BTreeSet<VarId>, live: &LiveSet, sep: &[VarId]) -> VarId {
    let part = id.partition();
    let top = pending.iter().map(|&v| part.rank(v)).max().expect("non-empty");
    let feasible: Vec<VarId> = pending.iter().copied().filter(|&v| part.rank(v) == top).collect();
    if feasible.len() == 1 {
        return feasible[0];
    }

    let probs: Vec<&Potential> = live.probs.iter().map(|f| f.pot.as_ref()).collect();
    let term_vars: Vec<BTreeSet<VarId>> = live.terms.iter().map(|t| t.vars()).collect();
    let term_refs: Vec<Vec<VarId>> = term_vars.iter().map(|s| s.iter().copied().collect()).collect();
    let term_slices: Vec<&[VarId]> = term_refs.iter().map(|v| v.as_slice()).collect();
    let required: BTreeSet<VarId> = sep.iter().copied().collect();
    let (_, pb) = classify_barren(&probs, &term_slices, &required);

    let pb_feasible: Vec<VarId> = feasible.iter().copied().filter(|v| pb.contains(v)).collect();
    if let Some(&first_pb) = pb_feasible.first() {
        let shrinks_utility = feasible.iter().copied().find(|&y| {
            !pb.contains(&y)
                && term_vars.iter().any(|t| t.contains(&y))
                && !probs
                    .iter()
                    .filter(|p| p.contains(y))
                    .any(|p| p.vars().iter().any(|&x| x != y && pb.contains(&x)))
        });
        return shrinks_utility.unwrap_or(first_pb);
    }

    let n = id.num_vars();
    let mut g = UndirectedGraph::new(n);
    for p in &probs {
        g.connect_all(p.vars());
    }
    for t in &term_refs {
        g.connect_all(t);
    }
    let alive: BTreeSet<VarId> = live.vars();
    let fill = |v: VarId| {
        let ns: Vec<VarId> = g.neighbors(v).iter().copied().filter(|u| alive.contains(u)).collect();
        let mut f = 0;
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                if !g.has_edge(a, b) {
                    f += 1;
                }
            }
        }
        f
    };
    *feasible
        .iter()
        .min_by_key(|&&v| (fill(v), v))
        .expect("non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DiagramBuilder;

    fn ex61() -> InfluenceDiagram {
        let mut b = DiagramBuilder::new();
        let c1 = b.chance("C1", &["f", "t"]);
        let c2 = b.chance("C2", &["f", "t"]);
        let d = b.decision("D", &["d0", "d1"]);
        b.cpt(&[c1, c2], &[], vec![0.2, 0.3, 0.4, 0.1]);
        b.utility("U1", &[c1], vec![10.0, 0.0]);
        b.utility("U2", &[d, c2], vec![5.0, 1.0, 2.0, 8.0]);
        b.informs(c1, d).order(&[d]);
        b.build().unwrap()
    }

    #[test]
    fn example_meu_rule_and_counts() {
        let id = ex61();
        let s = solve_lazy(&id, &Evidence::new(), LazyOptions::default()).unwrap();
        assert!((s.strategy.meu - 9.9).abs() < 1e-9);
        let r = &s.strategy.rules[0];
        assert_eq!(r.domain.vars(), &[0]);
        assert_eq!(r.choices, vec![1, 0]);
        assert_eq!(s.ops.total(), 21);
        assert_eq!(s.ops.divisions, 0);
    }

    #[test]
    fn forced_division_keeps_meu() {
        let id = ex61();
        let opts = LazyOptions {
            force_divide: true,
            ..Default::default()
        };
        let s = solve_lazy(&id, &Evidence::new(), opts).unwrap();
        assert!((s.strategy.meu - 9.9).abs() < 1e-9);
        assert_eq!(s.ops.divisions, 4);
    }

    #[test]
    fn lone_decision() {
        let mut b = DiagramBuilder::new();
        let d = b.decision("D", &["a", "b"]);
        b.utility("U", &[d], vec![1.0, 3.0]);
        let id = b.build().unwrap();
        let s = solve_lazy(&id, &Evidence::new(), LazyOptions::default()).unwrap();
        assert_eq!(s.strategy.meu, 3.0);
        assert_eq!(s.strategy.rules[0].choices, vec![1]);
    }

    #[test]
    fn evidence_collapses_rule_domain() {
        let id = ex61();
        let ev = id.evidence(&[("C1", "f")]).unwrap();
        let s = solve_lazy(&id, &ev, LazyOptions::default()).unwrap();
        // Given C1=f: P(C2) = (0.4, 0.6); EU(d0) = 10 + 2.6, EU(d1) = 10 + 5.6.
        assert!((s.strategy.meu - 15.6).abs() < 1e-9);
        let r = &s.strategy.rules[0];
        assert!(r.domain.is_empty());
        assert_eq!(r.choices, vec![1]);
    }

    #[test]
    fn barren_decision_is_arbitrary() {
        let mut b = DiagramBuilder::new();
        let a = b.chance("A", &["0", "1"]);
        let d = b.decision("D", &["x", "y"]);
        b.cpt(&[a], &[], vec![0.5, 0.5]);
        b.utility("U", &[a], vec![2.0, 4.0]);
        b.informs(a, d);
        let id = b.build().unwrap();
        let s = solve_lazy(&id, &Evidence::new(), LazyOptions::default()).unwrap();
        assert!((s.strategy.meu - 3.0).abs() < 1e-12);
        assert!(s.strategy.rules[0].is_arbitrary());
    }
}
