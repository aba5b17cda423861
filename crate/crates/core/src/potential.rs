//! Dense probability and utility potentials over discrete variables.
//!
//! Tables are stored row-major over the domain, whose variables are always
//! kept sorted by id; the first variable varies slowest. Every arithmetic
//! operation charges an [`OpCounter`] so solvers can be compared by the
//! number of scalar operations they perform.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

pub type VarId = usize;

/// Tally of scalar arithmetic, one unit per multiply, add, divide or
/// pairwise max-comparison. Copies, lookups and slicing are free.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct OpCounter {
    #[serde(rename = "mul")]
    pub multiplies: u64,
    #[serde(rename = "add")]
    pub additions: u64,
    #[serde(rename = "div")]
    pub divisions: u64,
    #[serde(rename = "max")]
    pub max_comparisons: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.multiplies + self.additions + self.divisions + self.max_comparisons
    }
}

impl Add for OpCounter {
    type Output = OpCounter;

    fn add(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            multiplies: self.multiplies + rhs.multiplies,
            additions: self.additions + rhs.additions,
            divisions: self.divisions + rhs.divisions,
            max_comparisons: self.max_comparisons + rhs.max_comparisons,
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        *self = *self + rhs;
    }
}

impl Sub for OpCounter {
    type Output = OpCounter;

    fn sub(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            multiplies: self.multiplies - rhs.multiplies,
            additions: self.additions - rhs.additions,
            divisions: self.divisions - rhs.divisions,
            max_comparisons: self.max_comparisons - rhs.max_comparisons,
        }
    }
}

impl fmt::Display for OpCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mul={} add={} div={} max={} total={}",
            self.multiplies,
            self.additions,
            self.divisions,
            self.max_comparisons,
            self.total()
        )
    }
}

/// A set of variables with their cardinalities, sorted by variable id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Domain {
    vars: Vec<VarId>,
    cards: Vec<usize>,
}

impl Domain {
    pub fn new(pairs: impl IntoIterator<Item = (VarId, usize)>) -> Self {
        let sorted: BTreeMap<VarId, usize> = pairs.into_iter().collect();
        Domain {
            vars: sorted.keys().copied().collect(),
            cards: sorted.values().copied().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Number of table cells.
    pub fn size(&self) -> usize {
        self.cards.iter().product()
    }

    pub fn position(&self, v: VarId) -> Option<usize> {
        self.vars.binary_search(&v).ok()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.position(v).is_some()
    }

    pub fn card_of(&self, v: VarId) -> Option<usize> {
        self.position(v).map(|p| self.cards[p])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.vars.iter().copied().zip(self.cards.iter().copied())
    }

    pub fn union(&self, other: &Domain) -> Domain {
        Domain::new(self.pairs().chain(other.pairs()))
    }

    pub fn without(&self, v: VarId) -> Domain {
        Domain::new(self.pairs().filter(|&(u, _)| u != v))
    }

    pub fn is_subset(&self, other: &Domain) -> bool {
        self.vars.iter().all(|&v| other.contains(v))
    }

    /// Row-major strides, first variable slowest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.len()];
        for k in (0..self.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.cards[k + 1];
        }
        strides
    }

    /// For every cell of `outer` (a superset of `self`), the offset of the
    /// matching cell in a table laid out over `self`.
    pub fn offsets_in(&self, outer: &Domain) -> Vec<usize> {
        let own = self.strides();
        let step: Vec<usize> = outer
            .vars
            .iter()
            .map(|&v| self.position(v).map_or(0, |p| own[p]))
            .collect();
        let n = outer.size();
        let mut out = Vec::with_capacity(n);
        let mut idx = vec![0usize; outer.len()];
        let mut off = 0usize;
        for _ in 0..n {
            out.push(off);
            for k in (0..outer.len()).rev() {
                idx[k] += 1;
                off += step[k];
                if idx[k] < outer.cards[k] {
                    break;
                }
                off -= step[k] * outer.cards[k];
                idx[k] = 0;
            }
        }
        out
    }

    /// Offset of the cell selected by a full assignment indexed by variable id.
    pub fn offset_of(&self, assignment: &[usize]) -> usize {
        self.vars
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&v, &c)| acc * c + assignment[v])
    }

    /// Decodes a cell offset into per-variable state indices (domain order).
    pub fn decode(&self, mut offset: usize) -> Vec<usize> {
        let mut states = vec![0; self.len()];
        for k in (0..self.len()).rev() {
            states[k] = offset % self.cards[k];
            offset /= self.cards[k];
        }
        states
    }

    /// Reorders a table laid out over `listed` (first slowest) into the
    /// canonical sorted layout.
    pub fn canonical_table(listed: &[(VarId, usize)], table: &[f64]) -> (Domain, Vec<f64>) {
        let domain = Domain::new(listed.iter().copied());
        let src = Domain {
            vars: listed.iter().map(|p| p.0).collect(),
            cards: listed.iter().map(|p| p.1).collect(),
        };
        // Walk the canonical layout; compute matching offsets in the listed layout.
        let src_strides = src.strides();
        let mut out = Vec::with_capacity(domain.size());
        for cell in 0..domain.size() {
            let states = domain.decode(cell);
            let mut off = 0;
            for (k, &v) in src.vars.iter().enumerate() {
                let p = domain.position(v).expect("listed var in domain");
                off += states[p] * src_strides[k];
            }
            out.push(table[off]);
        }
        (domain, out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Probability,
    Utility,
}

/// Maximizing alternatives of a decision, one per configuration of the
/// remaining domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgmaxRecord {
    pub decision: VarId,
    pub domain: Domain,
    pub choices: Vec<usize>,
    pub ties: Vec<bool>,
}

/// A probability or utility table.
///
/// Probability potentials carry a head (the variables they are a
/// distribution over); the rest of the domain is the tail. A unity
/// potential is identically one and has no table at all.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    kind: Kind,
    domain: Domain,
    head: Vec<VarId>,
    table: Option<Vec<f64>>,
    evidence_in_head: bool,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl Potential {
    pub fn probability(domain: Domain, head: Vec<VarId>, table: Vec<f64>) -> Self {
        debug_assert_eq!(domain.size(), table.len());
        let mut head = head;
        head.sort_unstable();
        head.dedup();
        Potential {
            kind: Kind::Probability,
            domain,
            head,
            table: Some(table),
            evidence_in_head: false,
        }
    }

    pub fn utility(domain: Domain, table: Vec<f64>) -> Self {
        debug_assert_eq!(domain.size(), table.len());
        Potential {
            kind: Kind::Utility,
            domain,
            head: Vec::new(),
            table: Some(table),
            evidence_in_head: false,
        }
    }

    pub fn unity(domain: Domain) -> Self {
        Potential {
            kind: Kind::Probability,
            domain,
            head: Vec::new(),
            table: None,
            evidence_in_head: false,
        }
    }

    pub fn zero_utility(domain: Domain) -> Self {
        let n = domain.size();
        Self::utility(domain, vec![0.0; n])
    }

    pub fn scalar_utility(value: f64) -> Self {
        Self::utility(Domain::empty(), vec![value])
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn is_probability(&self) -> bool {
        self.kind == Kind::Probability
    }

    pub fn is_utility(&self) -> bool {
        self.kind == Kind::Utility
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn vars(&self) -> &[VarId] {
        self.domain.vars()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.domain.contains(v)
    }

    pub fn head(&self) -> &[VarId] {
        &self.head
    }

    pub fn tail(&self) -> Vec<VarId> {
        self.vars()
            .iter()
            .copied()
            .filter(|v| self.head.binary_search(v).is_err())
            .collect()
    }

    pub fn is_unity(&self) -> bool {
        self.table.is_none()
    }

    /// True once evidence has instantiated one of the head variables.
    pub fn has_evidence_in_head(&self) -> bool {
        self.evidence_in_head
    }

    pub fn table(&self) -> Option<&[f64]> {
        self.table.as_deref()
    }

    /// Cell values, materializing ones for a unity potential.
    pub fn values(&self) -> Vec<f64> {
        match &self.table {
            Some(t) => t.clone(),
            None => vec![1.0; self.domain.size()],
        }
    }

    /// Cell values laid out row-major over `listed`, first variable slowest.
    /// `listed` must be a permutation of the domain variables.
    pub fn values_in_order(&self, listed: &[VarId]) -> Vec<f64> {
        let values = self.values();
        let strides = self.domain.strides();
        let cards: Vec<usize> = listed
            .iter()
            .map(|&v| self.domain.card_of(v).expect("listed variable in domain"))
            .collect();
        let pos: Vec<usize> = listed
            .iter()
            .map(|&v| self.domain.position(v).expect("listed variable in domain"))
            .collect();
        let mut out = Vec::with_capacity(values.len());
        let mut states = vec![0; listed.len()];
        for _ in 0..values.len() {
            let off: usize = states.iter().zip(&pos).map(|(&s, &p)| s * strides[p]).sum();
            out.push(values[off]);
            for k in (0..states.len()).rev() {
                states[k] += 1;
                if states[k] < cards[k] {
                    break;
                }
                states[k] = 0;
            }
        }
        out
    }

    /// Value of the single cell of a potential with empty domain.
    pub fn scalar(&self) -> Option<f64> {
        if !self.domain.is_empty() {
            return None;
        }
        Some(self.table.as_ref().map_or(1.0, |t| t[0]))
    }

    /// Value at a full assignment indexed by variable id.
    pub fn value_at(&self, assignment: &[usize]) -> f64 {
        match &self.table {
            Some(t) => t[self.domain.offset_of(assignment)],
            None => 1.0,
        }
    }

    fn binary(&self, other: &Potential, f: impl Fn(f64, f64) -> f64) -> (Domain, Vec<f64>) {
        let domain = self.domain.union(&other.domain);
        let a = self.values();
        let b = other.values();
        let ia = self.domain.offsets_in(&domain);
        let ib = other.domain.offsets_in(&domain);
        let table = ia.iter().zip(&ib).map(|(&i, &j)| f(a[i], b[j])).collect();
        (domain, table)
    }

    /// Pointwise product. A unity operand is the identity and costs nothing.
    pub fn multiply(&self, other: &Potential, ctr: &mut OpCounter) -> Result<Potential> {
        if self.is_utility() && other.is_utility() {
            return Err(Error::UtilityProduct);
        }
        if self.is_unity() {
            return Ok(other.clone());
        }
        if other.is_unity() {
            return Ok(self.clone());
        }
        let (domain, table) = self.binary(other, |x, y| x * y);
        ctr.multiplies += table.len() as u64;
        if self.is_probability() && other.is_probability() {
            let mut head = self.head.clone();
            head.extend_from_slice(&other.head);
            let mut p = Potential::probability(domain, head, table);
            p.evidence_in_head = self.evidence_in_head || other.evidence_in_head;
            Ok(p)
        } else {
            Ok(Potential::utility(domain, table))
        }
    }

    /// Pointwise sum of two utility potentials.
    pub fn add(&self, other: &Potential, ctr: &mut OpCounter) -> Result<Potential> {
        if !self.is_utility() || !other.is_utility() {
            return Err(Error::KindMismatch { expected: "utility" });
        }
        let (domain, table) = self.binary(other, |x, y| x + y);
        ctr.additions += table.len() as u64;
        Ok(Potential::utility(domain, table))
    }

    /// Utility divided by probability, with 0/0 = 0.
    pub fn divide(&self, den: &Potential, ctr: &mut OpCounter) -> Result<Potential> {
        if !self.is_utility() {
            return Err(Error::KindMismatch { expected: "utility" });
        }
        if !den.is_probability() {
            return Err(Error::KindMismatch { expected: "probability" });
        }
        if den.is_unity() {
            return Ok(self.clone());
        }
        let (domain, table) = self.binary(den, |n, d| {
            if d == 0.0 {
                if n == 0.0 {
                    0.0
                } else {
                    f64::NAN
                }
            } else {
                n / d
            }
        });
        if table.iter().any(|x| x.is_nan()) {
            return Err(Error::DivisionByZero);
        }
        ctr.divisions += table.len() as u64;
        Ok(Potential::utility(domain, table))
    }

    fn reduce(&self, x: VarId) -> Result<(Domain, Vec<Vec<usize>>)> {
        let pos = self.domain.position(x).ok_or(Error::NotInDomain(x))?;
        let card = self.domain.cards[pos];
        let rest = self.domain.without(x);
        let strides = self.domain.strides();
        let base = rest.offsets_in(&self.domain);
        // Cells of `self` with x = 0, mapped to their result cell.
        let mut groups = vec![Vec::with_capacity(card); rest.size()];
        for (cell, &r) in base.iter().enumerate() {
            if (cell / strides[pos]).is_multiple_of(card) {
                groups[r] = (0..card).map(|s| cell + s * strides[pos]).collect();
            }
        }
        Ok((rest, groups))
    }

    /// Sums out `x`, charging `|x| - 1` additions per result cell.
    pub fn sum_out(&self, x: VarId, ctr: &mut OpCounter) -> Result<Potential> {
        let (rest, groups) = self.reduce(x)?;
        let values = self.values();
        let table: Vec<f64> = groups
            .iter()
            .map(|g| g.iter().map(|&i| values[i]).sum())
            .collect();
        let card = self.domain.card_of(x).unwrap_or(1);
        ctr.additions += (table.len() * (card - 1)) as u64;
        let mut out = match self.kind {
            Kind::Probability => {
                let head = self.head.iter().copied().filter(|&h| h != x).collect();
                Potential::probability(rest, head, table)
            }
            Kind::Utility => Potential::utility(rest, table),
        };
        out.evidence_in_head = self.evidence_in_head;
        Ok(out)
    }

    /// True when summing `x` out of this probability potential is known to
    /// give one everywhere: `x` is its only head variable and no head
    /// variable has been instantiated by evidence.
    pub fn sums_to_unity_over(&self, x: VarId) -> bool {
        self.is_probability() && !self.evidence_in_head && self.head == [x]
    }

    /// Like [`Potential::sum_out`], but returns an unallocated unity
    /// potential without arithmetic when the structural unity rule applies.
    pub fn sum_out_structural(&self, x: VarId, ctr: &mut OpCounter) -> Result<Potential> {
        if !self.contains(x) {
            return Err(Error::NotInDomain(x));
        }
        if self.sums_to_unity_over(x) {
            return Ok(Potential::unity(self.domain.without(x)));
        }
        self.sum_out(x, ctr)
    }

    /// Maximizes decision `d` out of a utility potential, recording the
    /// lowest-index maximizing alternative per remaining configuration.
    pub fn max_out(&self, d: VarId, ctr: &mut OpCounter) -> Result<(Potential, ArgmaxRecord)> {
        if !self.is_utility() {
            return Err(Error::KindMismatch { expected: "utility" });
        }
        let (rest, groups) = self.reduce(d)?;
        let values = self.values();
        let mut table = Vec::with_capacity(groups.len());
        let mut choices = Vec::with_capacity(groups.len());
        let mut ties = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut best = 0;
            for s in 1..g.len() {
                if values[g[s]] > values[g[best]] {
                    best = s;
                }
            }
            let top = values[g[best]];
            table.push(top);
            choices.push(best);
            ties.push(
                g.iter()
                    .enumerate()
                    .any(|(s, &i)| s != best && tied(values[i], top)),
            );
        }
        let card = self.domain.card_of(d).unwrap_or(1);
        ctr.max_comparisons += (table.len() * (card - 1)) as u64;
        let record = ArgmaxRecord {
            decision: d,
            domain: rest.clone(),
            choices,
            ties,
        };
        Ok((Potential::utility(rest, table), record))
    }

    /// Slices evidence variables out of the domain. Free of arithmetic.
    pub fn restrict(&self, evidence: &BTreeMap<VarId, usize>) -> Potential {
        let mut out = self.clone();
        for (&v, &s) in evidence {
            if out.contains(v) {
                out = out.slice(v, s);
            }
        }
        out
    }

    /// Fixes `v` to state `s` and drops it from the domain.
    pub fn slice(&self, v: VarId, s: usize) -> Potential {
        let Some(pos) = self.domain.position(v) else {
            return self.clone();
        };
        let rest = self.domain.without(v);
        let table = self.table.as_ref().map(|t| {
            let strides = self.domain.strides();
            let offsets = rest.offsets_in(&self.domain);
            // offsets_in over the full domain repeats each rest-cell; collect
            // those whose v-coordinate is s.
            let mut out = vec![0.0; rest.size()];
            for (cell, &r) in offsets.iter().enumerate() {
                if (cell / strides[pos]) % self.domain.cards[pos] == s {
                    out[r] = t[cell];
                }
            }
            out
        });
        let in_head = self.head.contains(&v);
        Potential {
            kind: self.kind,
            domain: rest,
            head: self.head.iter().copied().filter(|&h| h != v).collect(),
            table,
            evidence_in_head: self.evidence_in_head || in_head,
        }
    }

    /// Broadcasts onto a superset domain. Free of arithmetic.
    pub fn extend(&self, outer: &Domain) -> Potential {
        let domain = self.domain.union(outer);
        let table = self.table.as_ref().map(|t| {
            self.domain
                .offsets_in(&domain)
                .into_iter()
                .map(|i| t[i])
                .collect()
        });
        Potential {
            kind: self.kind,
            domain,
            head: self.head.clone(),
            table,
            evidence_in_head: self.evidence_in_head,
        }
    }

    /// Drops the table of a probability potential, turning it into unity.
    /// Used only when a caller has proven the table is identically one.
    pub fn into_unity(self) -> Potential {
        Potential::unity(self.domain)
    }

    /// Largest deviation of any cell from one.
    pub fn max_deviation_from_one(&self) -> f64 {
        self.table
            .as_ref()
            .map_or(0.0, |t| t.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max))
    }
}
