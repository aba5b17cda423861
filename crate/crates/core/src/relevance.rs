//! d-separation on the domain graph induced by a set of potentials, and
//! barren-variable classification.

use std::collections::{BTreeSet, VecDeque};

use crate::potential::{Potential, VarId};

/// Directed graph over variables plus synthetic observed sink nodes.
///
/// Node ids below `num_vars` are variables; the rest are sinks.
#[derive(Clone, Debug, Default)]
pub struct DomainGraph {
    num_vars: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    observed: Vec<bool>,
}

impl DomainGraph {
    pub fn new(num_vars: usize) -> Self {
        DomainGraph {
            num_vars,
            parents: vec![Vec::new(); num_vars],
            children: vec![Vec::new(); num_vars],
            observed: vec![false; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_arc(&mut self, from: usize, to: usize) {
        if from != to && !self.children[from].contains(&to) {
            self.children[from].push(to);
            self.parents[to].push(from);
        }
    }

    /// Adds an observed node with an arc from each of `from`.
    pub fn add_sink(&mut self, from: &[VarId]) -> usize {
        let s = self.parents.len();
        self.parents.push(Vec::new());
        self.children.push(Vec::new());
        self.observed.push(true);
        for &v in from {
            self.add_arc(v, s);
        }
        s
    }

    pub fn observe(&mut self, v: usize) {
        self.observed[v] = true;
    }

    /// The domain graph of a set of probability and utility potentials.
    ///
    /// A probability potential with a single head contributes tail→head
    /// arcs. Potentials that cannot be read as one conditional (several or
    /// no head variables, utilities) are tied together by an observed sink,
    /// which keeps every pair of their variables d-connected.
    pub fn from_potentials<'a>(
        num_vars: usize,
        potentials: impl IntoIterator<Item = &'a Potential>,
        utility_domains: impl IntoIterator<Item = &'a [VarId]>,
    ) -> Self {
        let mut g = DomainGraph::new(num_vars);
        for p in potentials {
            if p.is_probability() && p.head().len() == 1 && !p.has_evidence_in_head() {
                let h = p.head()[0];
                for t in p.tail() {
                    g.add_arc(t, h);
                }
            } else if !p.vars().is_empty() {
                g.add_sink(p.vars());
            }
        }
        for dom in utility_domains {
            if !dom.is_empty() {
                g.add_sink(dom);
            }
        }
        g
    }

    /// Variables reachable from `sources` along active trails.
    ///
    /// Linear in the size of the graph. Observed nodes are never reported,
    /// and observed sources are ignored.
    pub fn reachable(&self, sources: impl IntoIterator<Item = usize>) -> BTreeSet<VarId> {
        let n = self.parents.len();
        // Ancestors of observed nodes (including themselves) open colliders.
        let mut opens = self.observed.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&v| self.observed[v]).collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !opens[p] {
                    opens[p] = true;
                    stack.push(p);
                }
            }
        }

        // Visited flags per (node, arrived-from-child) and (node, arrived-from-parent).
        let mut up = vec![false; n];
        let mut down = vec![false; n];
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<(usize, bool)> = VecDeque::new();
        for s in sources {
            if s < n && !self.observed[s] {
                queue.push_back((s, true));
            }
        }
        while let Some((v, from_child)) = queue.pop_front() {
            let seen = if from_child { &mut up[v] } else { &mut down[v] };
            if std::mem::replace(seen, true) {
                continue;
            }
            if !self.observed[v] && v < self.num_vars {
                out.insert(v);
            }
            if from_child {
                if !self.observed[v] {
                    queue.extend(self.parents[v].iter().map(|&p| (p, true)));
                    queue.extend(self.children[v].iter().map(|&c| (c, false)));
                }
            } else {
                if !self.observed[v] {
                    queue.extend(self.children[v].iter().map(|&c| (c, false)));
                }
                if opens[v] {
                    queue.extend(self.parents[v].iter().map(|&p| (p, true)));
                }
            }
        }
        out
    }
}

/// Every variable d-connected to some target given the instantiated set,
/// on the domain graph induced by `potentials`. Targets that are not
/// instantiated are included.
pub fn d_connected_targets<'a>(
    potentials: impl IntoIterator<Item = &'a Potential>,
    targets: &BTreeSet<VarId>,
    instantiated: &BTreeSet<VarId>,
) -> BTreeSet<VarId> {
    let potentials: Vec<&Potential> = potentials.into_iter().collect();
    let num_vars = potentials
        .iter()
        .flat_map(|p| p.vars().iter().copied())
        .chain(targets.iter().copied())
        .chain(instantiated.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    let mut g = DomainGraph::from_potentials(num_vars, potentials.iter().copied(), []);
    for &v in instantiated {
        g.observe(v);
    }
    g.reachable(targets.iter().copied())
}

/// Largest subset of `candidates` closed under "all children barren":
/// a variable survives only if every probability potential it appears in
/// has a non-empty head made entirely of surviving variables.
fn barren_fixpoint(probs: &[&Potential], mut b: BTreeSet<VarId>) -> BTreeSet<VarId> {
    loop {
        let mut changed = false;
        for p in probs {
            let removable = !p.head().is_empty()
                && !p.has_evidence_in_head()
                && p.head().iter().all(|h| b.contains(h));
            if !removable {
                for v in p.vars() {
                    changed |= b.remove(v);
                }
            }
        }
        if !changed {
            return b;
        }
    }
}

/// Returns `(barren, probabilistic_barren)`.
///
/// Barren variables are outside `required`, have only barren descendants
/// and no directed path to a utility. Probabilistic barren variables are
/// barren when the utilities are ignored.
pub fn classify_barren(
    probs: &[&Potential],
    utility_domains: &[&[VarId]],
    required: &BTreeSet<VarId>,
) -> (BTreeSet<VarId>, BTreeSet<VarId>) {
    let in_utility: BTreeSet<VarId> = utility_domains.iter().flat_map(|d| d.iter().copied()).collect();
    let all: BTreeSet<VarId> = probs
        .iter()
        .flat_map(|p| p.vars().iter().copied())
        .chain(in_utility.iter().copied())
        .filter(|v| !required.contains(v))
        .collect();
    let prob_barren = barren_fixpoint(probs, all.clone());
    let barren = barren_fixpoint(probs, all.difference(&in_utility).copied().collect());
    debug_assert!(barren.is_subset(&prob_barren));
    (barren, prob_barren)
}

/// Which probability potentials are needed to compute a message over
/// `separator` that weights the given utility terms.
///
/// Keeps potentials with a variable d-connected to the separator or to a
/// utility variable, then repeatedly drops potentials whose head variables
/// are all barren.
pub fn relevant_probabilities(
    probs: &[&Potential],
    utility_domains: &[&[VarId]],
    separator: &[VarId],
) -> Vec<bool> {
    let num_vars = probs
        .iter()
        .flat_map(|p| p.vars().iter().copied())
        .chain(utility_domains.iter().flat_map(|d| d.iter().copied()))
        .chain(separator.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    let g = DomainGraph::from_potentials(num_vars, probs.iter().copied(), utility_domains.iter().copied());
    let targets = separator
        .iter()
        .copied()
        .chain(utility_domains.iter().flat_map(|d| d.iter().copied()));
    let connected = g.reachable(targets);
    let mut keep: Vec<bool> = probs
        .iter()
        .map(|p| p.vars().iter().any(|v| connected.contains(v)))
        .collect();

    let kept: Vec<&Potential> = probs
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect();
    let required: BTreeSet<VarId> = separator.iter().copied().collect();
    let (barren, _) = classify_barren(&kept, utility_domains, &required);
    for (p, k) in probs.iter().zip(keep.iter_mut()) {
        if *k && !p.head().is_empty() && !p.has_evidence_in_head() && p.head().iter().all(|h| barren.contains(h)) {
            *k = false;
        }
    }
    keep
}
