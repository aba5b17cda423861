//! Influence diagrams: variables, tables, the decision order and the
//! graph-theoretic views derived from them.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::potential::{Domain, Potential, VarId};

pub(crate) const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Chance,
    Decision,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub kind: VarKind,
    pub states: Vec<String>,
}

impl Variable {
    pub fn card(&self) -> usize {
        self.states.len()
    }

    pub fn is_decision(&self) -> bool {
        self.kind == VarKind::Decision
    }
}

/// A probability table over one or more head variables given a tail.
///
/// Ordinary diagrams have one head per table; a joint family (several
/// heads) expresses a joint distribution given as a single table.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub heads: Vec<VarId>,
    pub tail: Vec<VarId>,
    pub potential: Potential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utility {
    pub name: String,
    /// Variables in the order the table was given.
    pub listed: Vec<VarId>,
    pub potential: Potential,
}

/// A validated influence diagram. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceDiagram {
    variables: Vec<Variable>,
    parents: Vec<Vec<VarId>>,
    families: Vec<Family>,
    utilities: Vec<Utility>,
    decision_order: Vec<VarId>,
    partition: InformationPartition,
}

impl InfluenceDiagram {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn card(&self, v: VarId) -> usize {
        self.variables[v].card()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.variables[v].name
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Direct parents as given: probabilistic for chance variables,
    /// informational for decisions. No-forgetting arcs are not included.
    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.parents[v]
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn utilities(&self) -> &[Utility] {
        &self.utilities
    }

    pub fn decision_order(&self) -> &[VarId] {
        &self.decision_order
    }

    pub fn partition(&self) -> &InformationPartition {
        &self.partition
    }

    pub fn is_decision(&self, v: VarId) -> bool {
        self.variables[v].is_decision()
    }

    pub fn chance_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Chance)
            .map(|v| v.id)
    }

    pub fn domain_of(&self, vars: &[VarId]) -> Domain {
        Domain::new(vars.iter().map(|&v| (v, self.card(v))))
    }

    /// Total number of joint configurations of all variables.
    pub fn state_space(&self) -> u128 {
        self.variables.iter().map(|v| v.card() as u128).product()
    }

    /// Parses `NAME=state` style evidence against this diagram.
    pub fn evidence(&self, pairs: &[(&str, &str)]) -> Result<Evidence> {
        let mut ev = Evidence::new();
        for &(var, state) in pairs {
            let v = self
                .lookup(var)
                .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
            let s = self.variables[v]
                .states
                .iter()
                .position(|x| x == state)
                .ok_or_else(|| Error::Evidence(format!("`{var}` has no state `{state}`")))?;
            ev.insert(v, s);
        }
        self.check_evidence(&ev)?;
        Ok(ev)
    }

    /// Rejects evidence on decisions, out-of-range states, and variables
    /// that are not observed before the first decision.
    pub fn check_evidence(&self, ev: &Evidence) -> Result<()> {
        for (&v, &s) in ev.iter() {
            let var = self
                .variables
                .get(v)
                .ok_or_else(|| Error::Evidence(format!("no variable with id {v}")))?;
            if var.is_decision() {
                return Err(Error::Evidence(format!("`{}` is a decision", var.name)));
            }
            if s >= var.card() {
                return Err(Error::Evidence(format!("state {s} out of range for `{}`", var.name)));
            }
            let k = self.partition.set_of(v);
            if k > 0 && !self.decision_order.is_empty() {
                return Err(Error::Evidence(format!(
                    "`{}` belongs to information set {k} and cannot be instantiated before the decisions are taken",
                    var.name
                )));
            }
        }
        Ok(())
    }
}

/// Observed states keyed by chance variable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence(BTreeMap<VarId, usize>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: VarId, state: usize) {
        self.0.insert(v, state);
    }

    pub fn get(&self, v: VarId) -> Option<usize> {
        self.0.get(&v).copied()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.contains_key(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &usize)> {
        self.0.iter()
    }

    pub fn as_map(&self) -> &BTreeMap<VarId, usize> {
        &self.0
    }
}

impl FromIterator<(VarId, usize)> for Evidence {
    fn from_iter<T: IntoIterator<Item = (VarId, usize)>>(iter: T) -> Self {
        Evidence(iter.into_iter().collect())
    }
}

/// The sets I₀ … Iₙ interleaved with the decisions D₁ … Dₙ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InformationPartition {
    /// `sets[k]` holds the chance variables observed after decision k and
    /// before decision k+1; the last set is never observed.
    pub sets: Vec<Vec<VarId>>,
    pub decisions: Vec<VarId>,
    rank: Vec<usize>,
}

impl InformationPartition {
    /// Position in the temporal order: Iₖ has rank 2k, Dₖ has rank 2k−1.
    /// Variables are eliminated from the highest rank down.
    pub fn rank(&self, v: VarId) -> usize {
        self.rank[v]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.rank
    }

    /// Index k of the information set holding chance variable `v`.
    pub fn set_of(&self, v: VarId) -> usize {
        self.rank[v] / 2
    }

    /// `a` strictly precedes `b` in the temporal order.
    pub fn precedes(&self, a: VarId, b: VarId) -> bool {
        self.rank[a] < self.rank[b]
    }

    pub fn max_rank(&self) -> usize {
        2 * self.decisions.len()
    }
}

/// Computes the information partition from informational arcs and the
/// decision order. Perfect recall is implied: a variable belongs to the
/// set before the first decision that observes it.
pub fn information_partition(
    num_vars: usize,
    is_decision: impl Fn(VarId) -> bool,
    parents: &[Vec<VarId>],
    decision_order: &[VarId],
) -> InformationPartition {
    let n = decision_order.len();
    let mut rank = vec![2 * n; num_vars];
    for (j, &d) in decision_order.iter().enumerate().rev() {
        rank[d] = 2 * j + 1;
        for &p in &parents[d] {
            if !is_decision(p) {
                rank[p] = rank[p].min(2 * j);
            }
        }
    }
    let mut sets = vec![Vec::new(); n + 1];
    for v in 0..num_vars {
        if !is_decision(v) {
            sets[rank[v] / 2].push(v);
        }
    }
    InformationPartition {
        sets,
        decisions: decision_order.to_vec(),
        rank,
    }
}

/// Simple undirected graph on variable ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<VarId>>,
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        UndirectedGraph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, a: VarId, b: VarId) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn connect_all(&mut self, vars: &[VarId]) {
        for (i, &a) in vars.iter().enumerate() {
            for &b in &vars[i + 1..] {
                self.add_edge(a, b);
            }
        }
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, v: VarId) -> &BTreeSet<VarId> {
        &self.adj[v]
    }

    pub fn edges(&self) -> BTreeSet<(VarId, VarId)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect()
    }
}

/// Moralization: families and utility domains become cliques, informational
/// arcs are dropped, directions are forgotten.
pub fn moral_graph(id: &InfluenceDiagram) -> UndirectedGraph {
    let mut g = UndirectedGraph::new(id.num_vars());
    for f in id.families() {
        g.connect_all(f.potential.vars());
    }
    for u in id.utilities() {
        g.connect_all(u.potential.vars());
    }
    g
}

struct FamilySpec {
    heads: Vec<VarId>,
    tail: Vec<VarId>,
    table: Vec<f64>,
}

struct UtilitySpec {
    name: String,
    vars: Vec<VarId>,
    table: Vec<f64>,
}

/// Incremental construction of an [`InfluenceDiagram`]; all invariants are
/// checked in [`DiagramBuilder::build`].
#[derive(Default)]
pub struct DiagramBuilder {
    variables: Vec<Variable>,
    informational: Vec<Vec<VarId>>,
    families: Vec<FamilySpec>,
    utilities: Vec<UtilitySpec>,
    order: Option<Vec<VarId>>,
}

impl DiagramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn variable(&mut self, name: &str, kind: VarKind, states: &[&str]) -> VarId {
        let id = self.variables.len();
        self.variables.push(Variable {
            id,
            name: name.to_string(),
            kind,
            states: states.iter().map(|s| s.to_string()).collect(),
        });
        self.informational.push(Vec::new());
        id
    }

    pub fn chance(&mut self, name: &str, states: &[&str]) -> VarId {
        self.variable(name, VarKind::Chance, states)
    }

    pub fn decision(&mut self, name: &str, states: &[&str]) -> VarId {
        self.variable(name, VarKind::Decision, states)
    }

    /// Informational arc `from -> decision`.
    pub fn informs(&mut self, from: VarId, decision: VarId) -> &mut Self {
        if !self.informational[decision].contains(&from) {
            self.informational[decision].push(from);
        }
        self
    }

    /// Table P(heads | tail). Laid out with the tail variables first
    /// (first slowest) followed by the heads; the last head varies fastest.
    pub fn cpt(&mut self, heads: &[VarId], tail: &[VarId], table: Vec<f64>) -> &mut Self {
        self.families.push(FamilySpec {
            heads: heads.to_vec(),
            tail: tail.to_vec(),
            table,
        });
        self
    }

    /// Utility over `vars`, laid out in the listed order, first slowest.
    pub fn utility(&mut self, name: &str, vars: &[VarId], table: Vec<f64>) -> &mut Self {
        self.utilities.push(UtilitySpec {
            name: name.to_string(),
            vars: vars.to_vec(),
            table,
        });
        self
    }

    pub fn order(&mut self, decisions: &[VarId]) -> &mut Self {
        self.order = Some(decisions.to_vec());
        self
    }

    pub fn build(&self) -> Result<InfluenceDiagram> {
        let vars = &self.variables;
        let nv = vars.len();
        let mut names = BTreeSet::new();
        for v in vars {
            if !names.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.states.is_empty() {
                return Err(Error::NoStates(v.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for s in &v.states {
                if !seen.insert(s.as_str()) {
                    return Err(Error::DuplicateState {
                        var: v.name.clone(),
                        state: s.clone(),
                    });
                }
            }
        }
        let card = |v: VarId| vars[v].card();
        let in_range = |v: VarId| -> Result<()> {
            if v < nv {
                Ok(())
            } else {
                Err(Error::UnknownVariable(format!("#{v}")))
            }
        };

        let mut parents: Vec<Vec<VarId>> = vec![Vec::new(); nv];
        let mut headed = vec![false; nv];
        let mut families = Vec::with_capacity(self.families.len());
        for spec in &self.families {
            for &v in spec.heads.iter().chain(&spec.tail) {
                in_range(v)?;
            }
            let owner = spec
                .heads
                .iter()
                .map(|&h| vars[h].name.as_str())
                .collect::<Vec<_>>()
                .join(",");
            for &h in &spec.heads {
                if vars[h].is_decision() {
                    return Err(Error::NotChance(vars[h].name.clone()));
                }
                if std::mem::replace(&mut headed[h], true) {
                    return Err(Error::DuplicateCpt(vars[h].name.clone()));
                }
            }
            let listed: Vec<(VarId, usize)> = spec
                .tail
                .iter()
                .chain(&spec.heads)
                .map(|&v| (v, card(v)))
                .collect();
            let expected: usize = listed.iter().map(|p| p.1).product();
            if spec.table.len() != expected {
                return Err(Error::TableSize {
                    owner,
                    expected,
                    got: spec.table.len(),
                });
            }
            let row: usize = spec.heads.iter().map(|&h| card(h)).product();
            for (r, chunk) in spec.table.chunks(row).enumerate() {
                if chunk.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err(Error::NegativeProbability { owner, row: r });
                }
                let sum: f64 = chunk.iter().sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::RowNotNormalized { owner, row: r, sum });
                }
            }
            for (i, &h) in spec.heads.iter().enumerate() {
                let mut pa: Vec<VarId> = spec.tail.clone();
                pa.extend_from_slice(&spec.heads[..i]);
                parents[h] = pa;
            }
            let (domain, table) = Domain::canonical_table(&listed, &spec.table);
            families.push(Family {
                heads: spec.heads.clone(),
                tail: spec.tail.clone(),
                potential: Potential::probability(domain, spec.heads.clone(), table),
            });
        }
        for v in vars {
            if v.kind == VarKind::Chance && !headed[v.id] {
                return Err(Error::MissingCpt(v.name.clone()));
            }
        }

        let mut utilities = Vec::with_capacity(self.utilities.len());
        for spec in &self.utilities {
            for &v in &spec.vars {
                in_range(v)?;
            }
            let listed: Vec<(VarId, usize)> = spec.vars.iter().map(|&v| (v, card(v))).collect();
            let expected: usize = listed.iter().map(|p| p.1).product();
            if spec.table.len() != expected {
                return Err(Error::TableSize {
                    owner: spec.name.clone(),
                    expected,
                    got: spec.table.len(),
                });
            }
            let (domain, table) = Domain::canonical_table(&listed, &spec.table);
            utilities.push(Utility {
                name: spec.name.clone(),
                listed: spec.vars.clone(),
                potential: Potential::utility(domain, table),
            });
        }

        let decisions: Vec<VarId> = vars.iter().filter(|v| v.is_decision()).map(|v| v.id).collect();
        let order = match &self.order {
            Some(o) => o.clone(),
            None if decisions.len() <= 1 => decisions.clone(),
            None => {
                return Err(Error::OrderInconsistent(
                    "no decision order given for several decisions".into(),
                ))
            }
        };
        for &d in &order {
            in_range(d)?;
            if !vars[d].is_decision() {
                return Err(Error::NotDecision(vars[d].name.clone()));
            }
        }
        let listed: BTreeSet<VarId> = order.iter().copied().collect();
        if listed.len() != order.len() || listed.len() != decisions.len() {
            return Err(Error::OrderInconsistent(
                "order must list every decision exactly once".into(),
            ));
        }
        for &d in &decisions {
            for &p in &self.informational[d] {
                in_range(p)?;
            }
            parents[d] = self.informational[d].clone();
        }
        let pos: BTreeMap<VarId, usize> = order.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        for &d in &decisions {
            for &p in &parents[d] {
                if vars[p].is_decision() && pos[&p] >= pos[&d] {
                    return Err(Error::OrderInconsistent(format!(
                        "`{}` informs `{}` but is not ordered before it",
                        vars[p].name, vars[d].name
                    )));
                }
            }
        }

        // Acyclicity, including the implied no-forgetting chain of decisions.
        let mut succ: Vec<Vec<VarId>> = vec![Vec::new(); nv];
        for (v, pa) in parents.iter().enumerate() {
            for &p in pa {
                succ[p].push(v);
            }
        }
        for w in order.windows(2) {
            succ[w[0]].push(w[1]);
        }
        if let Some(v) = find_cycle(&succ) {
            return Err(Error::Cycle(vars[v].name.clone()));
        }

        let partition =
            information_partition(nv, |v| vars[v].is_decision(), &parents, &order);
        Ok(InfluenceDiagram {
            variables: vars.clone(),
            parents,
            families,
            utilities,
            decision_order: order,
            partition,
        })
    }
}

fn find_cycle(succ: &[Vec<VarId>]) -> Option<VarId> {
    // Kahn's algorithm; any vertex left over lies on or behind a cycle.
    let n = succ.len();
    let mut indeg = vec![0usize; n];
    for s in succ {
        for &t in s {
            indeg[t] += 1;
        }
    }
    let mut stack: Vec<VarId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &t in &succ[v] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                stack.push(t);
            }
        }
    }
    if seen == n {
        None
    } else {
        (0..n).find(|&v| indeg[v] > 0)
    }
}
