//! Strong elimination orders, strong junction trees and potential binding.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{InfluenceDiagram, InformationPartition, UndirectedGraph};
use crate::potential::VarId;

/// Number of fill edges eliminating `v` would add among `alive` vertices.
fn fill_in(g: &UndirectedGraph, alive: &[bool], v: VarId) -> usize {
    let ns: Vec<VarId> = g.neighbors(v).iter().copied().filter(|&u| alive[u]).collect();
    let mut fill = 0;
    for (i, &a) in ns.iter().enumerate() {
        for &b in &ns[i + 1..] {
            if !g.has_edge(a, b) {
                fill += 1;
            }
        }
    }
    fill
}

fn eliminate(g: &mut UndirectedGraph, alive: &mut [bool], v: VarId) -> Vec<VarId> {
    let ns: Vec<VarId> = g.neighbors(v).iter().copied().filter(|&u| alive[u]).collect();
    g.connect_all(&ns);
    alive[v] = false;
    ns
}

/// Elimination order respecting the information constraints: the block of
/// highest rank first, min-fill inside a block, lowest id on ties.
pub fn strong_elimination_order(moral: &UndirectedGraph, partition: &InformationPartition) -> Vec<VarId> {
    let n = moral.num_vertices();
    let mut g = moral.clone();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for rank in (0..=partition.max_rank()).rev() {
        let mut block: BTreeSet<VarId> = (0..n).filter(|&v| partition.rank(v) == rank).collect();
        while !block.is_empty() {
            let v = *block
                .iter()
                .min_by_key(|&&v| (fill_in(&g, &alive, v), v))
                .expect("non-empty block");
            block.remove(&v);
            eliminate(&mut g, &mut alive, v);
            order.push(v);
        }
    }
    order
}

/// Junction tree whose parents always carry higher clique numbers; the
/// last clique is the strong root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrongJunctionTree {
    pub cliques: Vec<Vec<VarId>>,
    /// Parent clique toward the root, `None` for the root.
    pub parent: Vec<Option<usize>>,
    /// Separator with the parent; empty for the root.
    pub separators: Vec<Vec<VarId>>,
    pub order: Vec<VarId>,
}

impl StrongJunctionTree {
    pub fn root(&self) -> usize {
        self.cliques.len() - 1
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Children of clique `c` in ascending clique number.
    pub fn children(&self, c: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parent[i] == Some(c)).collect()
    }

    pub fn depth(&self, mut c: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent[c] {
            c = p;
            d += 1;
        }
        d
    }

    /// Position of each variable in the elimination order.
    pub fn positions(&self, num_vars: usize) -> Vec<usize> {
        let mut pos = vec![usize::MAX; num_vars];
        for (i, &v) in self.order.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }

    /// The clique containing `v` that is closest to the root.
    pub fn top_clique(&self, v: VarId) -> Option<usize> {
        (0..self.len())
            .filter(|&c| self.cliques[c].contains(&v))
            .min_by_key(|&c| (self.depth(c), c))
    }

    /// Indented text rendering, one clique per line.
    pub fn dump(&self, id: &InfluenceDiagram) -> String {
        let names = |vs: &[VarId]| vs.iter().map(|&v| id.name(v)).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let mut stack = vec![(self.root(), 0usize)];
        while let Some((c, depth)) = stack.pop() {
            let _ = write!(out, "{}C{} {{{}}}", "  ".repeat(depth), c, names(&self.cliques[c]));
            if self.parent[c].is_some() {
                let _ = write!(out, " sep {{{}}}", names(&self.separators[c]));
            }
            out.push('\n');
            for ch in self.children(c).into_iter().rev() {
                stack.push((ch, depth + 1));
            }
        }
        out
    }
}

/// Triangulates by `order` and links the maximal elimination cliques.
///
/// The elimination clique of `v` is `v` with its neighbours still alive
/// when it goes. A non-maximal one is absorbed by the clique of an earlier
/// variable `w` whose first later neighbour is `v` and whose clique is
/// exactly one larger. Cliques are numbered by the position of the last
/// variable they absorb; each attaches to the clique that absorbs the first
/// later neighbour of that variable, so parents always have higher numbers.
pub fn build_strong_tree(moral: &UndirectedGraph, order: &[VarId]) -> StrongJunctionTree {
    let n = moral.num_vertices();
    let mut g = moral.clone();
    let mut alive = vec![true; n];
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }

    let mut elim: Vec<Vec<VarId>> = Vec::with_capacity(order.len());
    let mut next: Vec<Option<VarId>> = Vec::with_capacity(order.len());
    for &v in order {
        let later = eliminate(&mut g, &mut alive, v);
        next.push(later.iter().copied().min_by_key(|&u| pos[u]));
        let mut c = later;
        c.push(v);
        c.sort_unstable();
        elim.push(c);
    }

    // host[i]: clique (by formation index) holding the clique of order[i].
    let mut host: Vec<usize> = Vec::with_capacity(order.len());
    let mut formed: Vec<usize> = Vec::new();
    let mut last_own: Vec<usize> = Vec::new();
    for i in 0..order.len() {
        let v = order[i];
        let absorber = (0..i).find(|&j| next[j] == Some(v) && elim[j].len() == elim[i].len() + 1);
        let h = match absorber {
            Some(j) => host[j],
            None => {
                formed.push(i);
                last_own.push(i);
                formed.len() - 1
            }
        };
        last_own[h] = i;
        host.push(h);
    }

    if formed.is_empty() {
        return StrongJunctionTree {
            cliques: vec![Vec::new()],
            parent: vec![None],
            separators: vec![Vec::new()],
            order: order.to_vec(),
        };
    }

    let mut rank: Vec<usize> = (0..formed.len()).collect();
    rank.sort_by_key(|&h| last_own[h]);
    let mut number = vec![0; formed.len()];
    for (k, &h) in rank.iter().enumerate() {
        number[h] = k;
    }
    let m = formed.len();
    let root = m - 1;
    let mut cliques = vec![Vec::new(); m];
    let mut parent = vec![None; m];
    let mut separators = vec![Vec::new(); m];
    for h in 0..m {
        let k = number[h];
        cliques[k] = elim[formed[h]].clone();
        let top = last_own[h];
        let sep: Vec<VarId> = elim[top].iter().copied().filter(|&x| x != order[top]).collect();
        if k == root {
            continue;
        }
        parent[k] = Some(match next[top] {
            Some(u) => number[host[pos[u]]],
            None => root,
        });
        separators[k] = sep;
    }
    StrongJunctionTree {
        cliques,
        parent,
        separators,
        order: order.to_vec(),
    }
}

/// Strong tree of a diagram built from its moral graph.
pub fn strong_tree(id: &InfluenceDiagram) -> StrongJunctionTree {
    let moral = crate::model::moral_graph(id);
    let order = strong_elimination_order(&moral, id.partition());
    build_strong_tree(&moral, &order)
}

/// Model potentials bound to their home cliques, uncombined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueBinding {
    /// Indices into `id.families()` per clique.
    pub families: Vec<Vec<usize>>,
    /// Indices into `id.utilities()` per clique.
    pub utilities: Vec<Vec<usize>>,
}

fn home(tree: &StrongJunctionTree, vars: &[VarId]) -> Option<usize> {
    (0..tree.len()).find(|&c| vars.iter().all(|v| tree.cliques[c].binary_search(v).is_ok()))
}

/// Binds every CPT and utility to the lowest-numbered clique containing it.
pub fn assign_potentials(id: &InfluenceDiagram, tree: &StrongJunctionTree) -> Result<CliqueBinding> {
    let mut b = CliqueBinding {
        families: vec![Vec::new(); tree.len()],
        utilities: vec![Vec::new(); tree.len()],
    };
    for (i, f) in id.families().iter().enumerate() {
        let c = home(tree, f.potential.vars())
            .ok_or_else(|| Error::Internal(format!("no clique holds the table of `{}`", id.name(f.heads[0]))))?;
        b.families[c].push(i);
    }
    for (i, u) in id.utilities().iter().enumerate() {
        let c = home(tree, u.potential.vars())
            .ok_or_else(|| Error::Internal(format!("no clique holds utility `{}`", u.name)))?;
        b.utilities[c].push(i);
    }
    Ok(b)
}

/// Members of the clique closest to the root containing `d` that precede
/// `d` in the temporal order. This is the domain of the decision rule.
pub fn relevant_past(tree: &StrongJunctionTree, partition: &InformationPartition, d: VarId) -> Vec<VarId> {
    match tree.top_clique(d) {
        Some(c) => tree.cliques[c]
            .iter()
            .copied()
            .filter(|&v| partition.precedes(v, d))
            .collect(),
        None => Vec::new(),
    }
}

/// Checks the running intersection property; returns the first violation.
pub fn check_running_intersection(tree: &StrongJunctionTree) -> std::result::Result<(), String> {
    let path_to_root = |mut c: usize| {
        let mut p = vec![c];
        while let Some(q) = tree.parent[c] {
            p.push(q);
            c = q;
        }
        p
    };
    for a in 0..tree.len() {
        for b in a + 1..tree.len() {
            let pa = path_to_root(a);
            let pb = path_to_root(b);
            let meet = *pa.iter().find(|c| pb.contains(c)).expect("tree is connected");
            let path: Vec<usize> = pa
                .iter()
                .take_while(|&&c| c != meet)
                .chain(pb.iter().take_while(|&&c| c != meet))
                .chain([&meet])
                .copied()
                .collect();
            for &v in &tree.cliques[a] {
                if tree.cliques[b].contains(&v) {
                    if let Some(&c) = path.iter().find(|&&c| !tree.cliques[c].contains(&v)) {
                        return Err(format!("variable {v} of cliques {a},{b} missing from clique {c}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Checks the strong property on every edge: no variable a child clique
/// eliminates may succeed, in the temporal order, a separator variable.
pub fn check_strong(tree: &StrongJunctionTree, partition: &InformationPartition) -> std::result::Result<(), String> {
    for c in 0..tree.len() {
        if tree.parent[c].is_none() {
            continue;
        }
        let sep = &tree.separators[c];
        for &x in tree.cliques[c].iter().filter(|v| !sep.contains(v)) {
            if let Some(&s) = sep.iter().find(|&&s| partition.precedes(x, s)) {
                return Err(format!("clique {c}: {x} is eliminated before separator member {s} it precedes"));
            }
        }
    }
    Ok(())
}

/// Checks that replaying the order on the filled graph adds no edge.
pub fn check_chordal(moral: &UndirectedGraph, order: &[VarId]) -> bool {
    let n = moral.num_vertices();
    let mut filled = moral.clone();
    let mut alive = vec![true; n];
    for &v in order {
        eliminate(&mut filled, &mut alive, v);
    }
    let mut alive = vec![true; n];
    order.iter().all(|&v| {
        let ok = fill_in(&filled, &alive, v) == 0;
        alive[v] = false;
        ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{information_partition, moral_graph, DiagramBuilder};

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

    fn flat(n: usize) -> InformationPartition {
        information_partition(n, |_| false, &vec![Vec::new(); n], &[])
    }

    #[test]
    fn example_order_is_c2_d_c1() {
        let id = ex61();
        let order = strong_elimination_order(&moral_graph(&id), id.partition());
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn disconnected_block_in_id_order() {
        let g = UndirectedGraph::new(4);
        assert_eq!(strong_elimination_order(&g, &flat(4)), vec![0, 1, 2, 3]);
    }

    #[test]
    fn four_cycle_needs_one_fill_edge() {
        let mut g = UndirectedGraph::new(4);
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            g.add_edge(a, b);
        }
        let alive = vec![true; 4];
        assert!((0..4).all(|v| fill_in(&g, &alive, v) == 1));
        let order = strong_elimination_order(&g, &flat(4));
        assert_eq!(order[0], 0);
        let tree = build_strong_tree(&g, &order);
        assert_eq!(tree.cliques, vec![vec![0, 1, 3], vec![1, 2, 3]]);
        assert!(check_chordal(&g, &order));
    }

    #[test]
    fn chain_tree_roots_at_last_clique() {
        let mut g = UndirectedGraph::new(3);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        let tree = build_strong_tree(&g, &[2, 1, 0]);
        assert_eq!(tree.cliques, vec![vec![1, 2], vec![0, 1]]);
        assert_eq!(tree.root(), 1);
        assert_eq!(tree.separators[0], vec![1]);
    }

    #[test]
    fn complete_graph_gives_single_clique() {
        let mut g = UndirectedGraph::new(3);
        g.connect_all(&[0, 1, 2]);
        let tree = build_strong_tree(&g, &[0, 1, 2]);
        assert_eq!(tree.cliques, vec![vec![0, 1, 2]]);
        assert_eq!(tree.parent, vec![None]);
    }

    #[test]
    fn example_tree_binding_and_past() {
        let id = ex61();
        let tree = strong_tree(&id);
        assert_eq!(tree.cliques, vec![vec![0, 1, 2]]);
        let b = assign_potentials(&id, &tree).unwrap();
        assert_eq!(b.utilities[0], vec![0, 1]);
        assert_eq!(relevant_past(&tree, id.partition(), 2), vec![0]);
        assert!(check_running_intersection(&tree).is_ok());
        assert!(check_strong(&tree, id.partition()).is_ok());
    }

    #[test]
    fn two_decision_chain_past() {
        // A -> D1 -> B -> D2, U(B, D2).
        let mut b = DiagramBuilder::new();
        let a = b.chance("A", &["0", "1"]);
        let d1 = b.decision("D1", &["0", "1"]);
        let bb = b.chance("B", &["0", "1"]);
        let d2 = b.decision("D2", &["0", "1"]);
        b.cpt(&[a], &[], vec![0.4, 0.6]);
        b.cpt(&[bb], &[a, d1], vec![0.9, 0.1, 0.2, 0.8, 0.5, 0.5, 0.3, 0.7]);
        b.utility("U", &[bb, d2], vec![1.0, 0.0, 0.0, 1.0]);
        b.informs(a, d1).informs(bb, d2).order(&[d1, d2]);
        let id = b.build().unwrap();
        let tree = strong_tree(&id);
        let p = id.partition();
        assert_eq!(relevant_past(&tree, p, d2), vec![bb]);
        let v1 = relevant_past(&tree, p, d1);
        assert!(v1.iter().all(|&v| p.precedes(v, d1)));
        assert!(check_strong(&tree, p).is_ok());
        assert!(check_running_intersection(&tree).is_ok());
    }
}
