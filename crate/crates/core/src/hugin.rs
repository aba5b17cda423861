//! Eager junction-tree baseline: every clique combines its potentials into
//! one probability and one utility table before any message is sent.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::jtree::{assign_potentials, strong_tree, StrongJunctionTree};
use crate::lazy::past_domain;
use crate::model::{Evidence, InfluenceDiagram};
use crate::potential::{Domain, OpCounter, Potential, VarId};
use crate::strategy::{DecisionRule, Strategy};

#[derive(Clone, Debug)]
pub struct HuginSolution {
    pub strategy: Strategy,
    /// Cost of forming the initial clique tables.
    pub compile_ops: OpCounter,
    /// Cost of message passing and root elimination.
    pub ops: OpCounter,
    pub tree: StrongJunctionTree,
}

/// Initial clique tables.
#[derive(Clone, Debug)]
pub struct CliqueTables {
    pub phi: Vec<Potential>,
    pub psi: Vec<Potential>,
}

fn clique_domain(id: &InfluenceDiagram, tree: &StrongJunctionTree, ev: &Evidence, c: usize) -> Domain {
    let vars: Vec<VarId> = tree.cliques[c].iter().copied().filter(|&v| !ev.contains(v)).collect();
    id.domain_of(&vars)
}

/// Multiplies bound CPTs and adds bound utilities over each clique domain.
pub fn compile_cliques(
    id: &InfluenceDiagram,
    tree: &StrongJunctionTree,
    ev: &Evidence,
    ctr: &mut OpCounter,
) -> Result<CliqueTables> {
    let binding = assign_potentials(id, tree)?;
    let mut phi = Vec::with_capacity(tree.len());
    let mut psi = Vec::with_capacity(tree.len());
    for c in 0..tree.len() {
        let dom = clique_domain(id, tree, ev, c);
        let mut p: Option<Potential> = None;
        for &i in &binding.families[c] {
            let f = id.families()[i].potential.restrict(ev.as_map()).extend(&dom);
            p = Some(match p {
                None => f,
                Some(acc) => acc.multiply(&f, ctr)?,
            });
        }
        let n = dom.size();
        phi.push(p.unwrap_or_else(|| Potential::probability(dom.clone(), Vec::new(), vec![1.0; n])));

        let mut u: Option<Potential> = None;
        for &i in &binding.utilities[c] {
            let f = id.utilities()[i].potential.restrict(ev.as_map()).extend(&dom);
            u = Some(match u {
                None => f,
                Some(acc) => acc.add(&f, ctr)?,
            });
        }
        psi.push(u.unwrap_or_else(|| Potential::zero_utility(dom)));
    }
    Ok(CliqueTables { phi, psi })
}

struct Propagator<'a> {
    id: &'a InfluenceDiagram,
    ev: &'a Evidence,
    tree: &'a StrongJunctionTree,
    tables: CliqueTables,
    ctr: OpCounter,
    rules: BTreeMap<VarId, DecisionRule>,
}

pub fn solve_hugin(id: &InfluenceDiagram, ev: &Evidence) -> Result<HuginSolution> {
    id.check_evidence(ev)?;
    let tree = strong_tree(id);
    let mut compile_ops = OpCounter::new();
    let tables = compile_cliques(id, &tree, ev, &mut compile_ops)?;
    let mut p = Propagator {
        id,
        ev,
        tree: &tree,
        tables,
        ctr: OpCounter::new(),
        rules: BTreeMap::new(),
    };
    let (z, v) = p.collect(tree.root())?;
    let meu = match z {
        Some(z) => v.divide(&z, &mut p.ctr)?,
        None => v,
    }
    .scalar()
    .ok_or_else(|| Error::Internal("root elimination left variables".into()))?;

    let mut rules = Vec::with_capacity(id.decision_order().len());
    for &d in id.decision_order() {
        let rule = match p.rules.remove(&d) {
            Some(r) => r,
            None => DecisionRule::arbitrary(d, past_domain(id, &tree, ev, d), id.card(d)),
        };
        rules.push(rule);
    }
    Ok(HuginSolution {
        strategy: Strategy { meu, rules },
        compile_ops,
        ops: p.ctr,
        tree,
    })
}

impl Propagator<'_> {
    /// Absorbs all child messages into clique `c` and marginalizes it onto
    /// its separator. At the root the probability marginal is only
    /// computed when evidence makes it differ from one.
    fn collect(&mut self, c: usize) -> Result<(Option<Potential>, Potential)> {
        let mut phi = self.tables.phi[c].clone();
        let mut psi = self.tables.psi[c].clone();
        for ch in self.tree.children(c) {
            let (fs, ps) = self.collect(ch)?;
            let fs = fs.expect("non-root cliques send a probability marginal");
            phi = phi.multiply(&fs, &mut self.ctr)?;
            let q = ps.divide(&fs, &mut self.ctr)?;
            psi = psi.add(&q, &mut self.ctr)?;
        }
        let mut rho = phi.multiply(&psi, &mut self.ctr)?;

        let is_root = self.tree.parent[c].is_none();
        let need_phi = !is_root || !self.ev.is_empty();
        let sep = &self.tree.separators[c];
        let members = &self.tree.cliques[c];
        let order: Vec<VarId> = self
            .tree
            .order
            .iter()
            .copied()
            .filter(|v| members.contains(v) && !sep.contains(v) && !self.ev.contains(*v))
            .collect();
        for v in order {
            if self.id.is_decision(v) {
                phi = phi.slice(v, 0);
                let (r, rec) = rho.max_out(v, &mut self.ctr)?;
                rho = r;
                let dom = past_domain(self.id, self.tree, self.ev, v);
                self.rules.insert(v, DecisionRule::from_record(rec, dom)?);
            } else {
                if need_phi {
                    phi = phi.sum_out(v, &mut self.ctr)?;
                }
                rho = rho.sum_out(v, &mut self.ctr)?;
            }
        }
        Ok((need_phi.then_some(phi), rho))
    }
}
