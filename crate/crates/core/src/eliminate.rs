//! One step of variable elimination over uncombined potential sets.
//!
//! The live state is a set of probability factors and a set of utility
//! terms. A term is a utility potential that may carry pending divisors:
//! probability factors it still has to be divided by. Divisors are tracked
//! by identity so that a later multiplication by the same factor cancels
//! the division instead of performing it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use serde::Serialize;

use crate::error::Result;
use crate::potential::{ArgmaxRecord, Domain, OpCounter, Potential, VarId};

pub type PotId = usize;

#[derive(Clone, Debug)]
pub struct Factor {
    pub id: PotId,
    pub pot: Rc<Potential>,
    /// Taken from the model rather than produced by an elimination.
    pub from_model: bool,
}

#[derive(Clone, Debug)]
pub struct Term {
    pub pot: Potential,
    /// Pending divisors, sorted by id.
    pub divisors: Vec<Factor>,
}

impl Term {
    pub fn new(pot: Potential) -> Self {
        Term {
            pot,
            divisors: Vec::new(),
        }
    }

    /// Variables of the quotient: the table's own plus its divisors'.
    pub fn vars(&self) -> BTreeSet<VarId> {
        self.pot
            .vars()
            .iter()
            .chain(self.divisors.iter().flat_map(|d| d.pot.vars()))
            .copied()
            .collect()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.pot.contains(v) || self.divisors.iter().any(|d| d.pot.contains(v))
    }
}

#[derive(Clone, Debug, Default)]
pub struct LiveSet {
    pub probs: Vec<Factor>,
    pub terms: Vec<Term>,
}

impl LiveSet {
    pub fn vars(&self) -> BTreeSet<VarId> {
        self.probs
            .iter()
            .flat_map(|f| f.pot.vars().iter().copied())
            .chain(self.terms.iter().flat_map(|t| t.vars()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EliminationOptions {
    /// Divide as soon as a division is introduced, on the term's domain.
    pub immediate_division: bool,
    /// Skip sums that are known to be identically one.
    pub structural_unity: bool,
    /// Allow distributing probabilities over utility summands.
    pub distribute: bool,
    /// Record a [`SumEvent`] for every chance elimination.
    pub trace: bool,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        EliminationOptions {
            immediate_division: false,
            structural_unity: true,
            distribute: true,
            trace: false,
        }
    }
}

/// The probability side of one chance-variable elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumEvent {
    pub var: VarId,
    /// Per factor mentioning the variable: model origin and head variables.
    pub factors: Vec<(bool, Vec<VarId>)>,
    /// Some head was instantiated by evidence.
    pub evidence_in_head: bool,
    /// The unity rule applied and the marginal was not computed.
    pub skipped: bool,
    /// The marginal table was computed.
    pub allocated: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EliminationStats {
    pub divisions_introduced: u64,
    pub divisions_executed: u64,
    pub divisions_cancelled: u64,
    pub unity_skips: u64,
    /// Sums the unity rule applies to but that were computed anyway
    /// because the rule was disabled.
    pub unity_checked: u64,
    pub unity_max_deviation: f64,
    /// Marginals discarded because nothing left downstream needs them.
    pub marginals_dropped: u64,
    pub distributed: u64,
}

/// Divisors left pending and divisors cancelled, by id.
type GroupKey = (Vec<PotId>, Vec<PotId>);

/// Canonical fold order: smaller tables first, then by variables.
fn fold_key(p: &Potential) -> (usize, Vec<VarId>) {
    (p.domain().size(), p.vars().to_vec())
}

fn sum_all(mut pots: Vec<Potential>, ctr: &mut OpCounter) -> Result<Potential> {
    pots.sort_by_key(fold_key);
    let mut it = pots.into_iter();
    let first = it.next().expect("at least one term");
    it.try_fold(first, |acc, p| acc.add(&p, ctr))
}

fn sum_out_cost(domain: &Domain, y: VarId) -> usize {
    match domain.card_of(y) {
        Some(c) => domain.size() / c * (c - 1),
        None => 0,
    }
}

/// Performs eliminations and owns the counters they charge.
#[derive(Debug, Default)]
pub struct Eliminator {
    pub opts: EliminationOptions,
    pub ctr: OpCounter,
    pub stats: EliminationStats,
    pub trace: Vec<SumEvent>,
    next_id: PotId,
}

impl Eliminator {
    pub fn new(opts: EliminationOptions) -> Self {
        Eliminator {
            opts,
            ..Default::default()
        }
    }

    /// Registers a model table.
    pub fn factor(&mut self, pot: Potential) -> Factor {
        let mut f = self.derived(pot);
        f.from_model = true;
        f
    }

    fn derived(&mut self, pot: Potential) -> Factor {
        let id = self.next_id;
        self.next_id += 1;
        Factor {
            id,
            pot: Rc::new(pot),
            from_model: false,
        }
    }

    fn product(&mut self, fs: &[&Factor], memo: &mut HashMap<Vec<PotId>, Potential>) -> Result<Potential> {
        let mut key: Vec<PotId> = fs.iter().map(|f| f.id).collect();
        key.sort_unstable();
        if let Some(p) = memo.get(&key) {
            return Ok(p.clone());
        }
        let mut sorted: Vec<&Factor> = fs.to_vec();
        sorted.sort_by_key(|f| (fold_key(&f.pot), f.id));
        let mut acc = (*sorted[0].pot).clone();
        for f in &sorted[1..] {
            acc = acc.multiply(&f.pot, &mut self.ctr)?;
        }
        memo.insert(key, acc.clone());
        Ok(acc)
    }

    fn divide(&mut self, t: &Potential, den: &Potential) -> Result<Potential> {
        self.stats.divisions_executed += 1;
        t.divide(den, &mut self.ctr)
    }

    /// Eliminates chance variable `y`.
    ///
    /// `allow_drop` permits dropping the probability marginal instead of
    /// dividing by it when every live term mentions `y`; the caller grants
    /// it only where no other utility can still need that marginal.
    pub fn eliminate_chance(&mut self, live: &mut LiveSet, y: VarId, card: usize, allow_drop: bool) -> Result<()> {
        let (phi_y, rest): (Vec<Factor>, Vec<Factor>) =
            std::mem::take(&mut live.probs).into_iter().partition(|f| f.pot.contains(y));
        let (psi_y, n_y): (Vec<Term>, Vec<Term>) =
            std::mem::take(&mut live.terms).into_iter().partition(|t| t.contains(y));
        live.probs = rest;
        live.terms = n_y;

        let mut memo = HashMap::new();
        let heads: BTreeSet<VarId> = phi_y.iter().flat_map(|f| f.pot.head().iter().copied()).collect();
        let unity_rule = !phi_y.is_empty()
            && heads.len() == 1
            && heads.contains(&y)
            && phi_y.iter().all(|f| !f.pot.has_evidence_in_head());
        let all: Vec<&Factor> = phi_y.iter().collect();
        let phi_star = if phi_y.is_empty() {
            None
        } else if unity_rule && self.opts.structural_unity {
            self.stats.unity_skips += 1;
            None
        } else {
            let prod = self.product(&all, &mut memo)?;
            let s = prod.sum_out(y, &mut self.ctr)?;
            if unity_rule {
                self.stats.unity_checked += 1;
                self.stats.unity_max_deviation = self.stats.unity_max_deviation.max(s.max_deviation_from_one());
            }
            Some(s)
        };

        if self.opts.trace {
            self.trace.push(SumEvent {
                var: y,
                factors: phi_y.iter().map(|f| (f.from_model, f.pot.head().to_vec())).collect(),
                evidence_in_head: phi_y.iter().any(|f| f.pot.has_evidence_in_head()),
                skipped: unity_rule && self.opts.structural_unity,
                allocated: phi_star.is_some(),
            });
        }

        let drop_marginal = allow_drop
            && phi_star.is_some()
            && live.terms.is_empty()
            && live
                .probs
                .iter()
                .all(|f| f.pot.tail().iter().all(|v| !heads.contains(v)));
        let phi_star = phi_star.map(|p| self.derived(p));

        // Cancel divisors present in Φ_Y; execute the ones that mention y.
        let phi_ids: BTreeSet<PotId> = phi_y.iter().map(|f| f.id).collect();
        let mut groups: BTreeMap<GroupKey, (Vec<Factor>, Vec<Potential>)> = BTreeMap::new();
        for term in psi_y {
            let mut pot = term.pot;
            let mut left = Vec::new();
            let mut cancelled = BTreeSet::new();
            for div in term.divisors {
                if phi_ids.contains(&div.id) {
                    self.stats.divisions_cancelled += 1;
                    cancelled.insert(div.id);
                } else if div.pot.contains(y) {
                    pot = self.divide(&pot, &div.pot)?;
                } else {
                    left.push(div);
                }
            }
            let f: Vec<PotId> = phi_ids.difference(&cancelled).copied().collect();
            let key = (f, left.iter().map(|d| d.id).collect());
            groups.entry(key).or_insert_with(|| (left, Vec::new())).1.push(pot);
        }

        for ((f_ids, _), (left, terms)) in groups {
            let fs: Vec<&Factor> = phi_y.iter().filter(|p| f_ids.contains(&p.id)).collect();
            let p = if fs.is_empty() {
                None
            } else {
                Some(self.product(&fs, &mut memo)?)
            };
            let outputs = self.combine_group(terms, p.as_ref(), y, card)?;
            for mut o in outputs {
                let mut divisors = left.clone();
                if let Some(phi) = &phi_star {
                    if !drop_marginal {
                        self.stats.divisions_introduced += 1;
                        if self.opts.immediate_division {
                            o = self.divide(&o, &phi.pot)?;
                        } else {
                            divisors.push(phi.clone());
                            divisors.sort_by_key(|d| d.id);
                        }
                    }
                }
                live.terms.push(Term { pot: o, divisors });
            }
        }

        if let Some(phi) = phi_star {
            if drop_marginal {
                self.stats.marginals_dropped += 1;
            } else {
                live.probs.push(phi);
            }
        }
        Ok(())
    }

    /// Σ_y p · Σ terms, either combined or distributed per term,
    /// whichever costs fewer cell operations.
    fn combine_group(
        &mut self,
        mut terms: Vec<Potential>,
        p: Option<&Potential>,
        y: VarId,
        card: usize,
    ) -> Result<Vec<Potential>> {
        terms.sort_by_key(fold_key);
        let pdom = p.map(|p| p.domain().clone()).unwrap_or_default();
        let with_p = |d: &Domain| -> (usize, Domain) {
            let u = d.union(&pdom);
            let mul = if p.is_some() { u.size() } else { 0 };
            (mul, u)
        };

        let split: usize = terms
            .iter()
            .map(|t| {
                let (mul, u) = with_p(t.domain());
                mul + sum_out_cost(&u, y)
            })
            .sum();
        let mut union = terms[0].domain().clone();
        let mut adds = 0;
        for t in &terms[1..] {
            union = union.union(t.domain());
            adds += union.size();
        }
        let (mul, u) = with_p(&union);
        let combined = adds + mul + sum_out_cost(&u, y);

        let distribute = self.opts.distribute && terms.len() > 1 && split < combined;
        let parts = if distribute {
            self.stats.distributed += 1;
            terms.into_iter().map(|t| vec![t]).collect()
        } else {
            vec![terms]
        };
        let mut out = Vec::with_capacity(parts.len());
        for part in parts {
            let mut acc = sum_all(part, &mut self.ctr)?;
            if let Some(p) = p {
                acc = p.multiply(&acc, &mut self.ctr)?;
            }
            // A summand constant in y (y only occurred in a cancelled
            // divisor) still sums over every state of y.
            if !acc.contains(y) {
                acc = acc.extend(&Domain::new([(y, card)]));
            }
            out.push(acc.sum_out(y, &mut self.ctr)?);
        }
        Ok(out)
    }

    /// Eliminates decision `d` by maximization.
    ///
    /// Probability factors mentioning `d` no longer depend on it once every
    /// later variable is gone, so they are fixed at the first alternative.
    /// Returns the maximizing alternatives; if no utility depends on `d`
    /// the rule is the first alternative everywhere, flagged as a tie.
    pub fn eliminate_decision(&mut self, live: &mut LiveSet, d: VarId, card: usize) -> Result<ArgmaxRecord> {
        for f in live.probs.iter_mut().filter(|f| f.pot.contains(d)) {
            f.pot = Rc::new(f.pot.slice(d, 0));
        }
        let (psi_d, n_d): (Vec<Term>, Vec<Term>) =
            std::mem::take(&mut live.terms).into_iter().partition(|t| t.contains(d));
        live.terms = n_d;
        let arbitrary = ArgmaxRecord {
            decision: d,
            domain: Domain::empty(),
            choices: vec![0],
            ties: vec![card > 1],
        };
        if psi_d.is_empty() {
            return Ok(arbitrary);
        }

        // Divisors no longer depend on d. Each one either becomes common
        // to every term, by multiplying it into the terms that lack it, or is
        // executed on the terms that carry it, whichever costs fewer cells.
        // A common divisor stays pending through the maximization.
        let mut terms: Vec<(Potential, Vec<Factor>)> = psi_d
            .into_iter()
            .map(|t| {
                let divs = t
                    .divisors
                    .into_iter()
                    .map(|mut div| {
                        if div.pot.contains(d) {
                            div.pot = Rc::new(div.pot.slice(d, 0));
                        }
                        div
                    })
                    .collect();
                (t.pot, divs)
            })
            .collect();
        let mut all: Vec<Factor> = Vec::new();
        for (_, divs) in &terms {
            for div in divs {
                if !all.iter().any(|k| k.id == div.id) {
                    all.push(div.clone());
                }
            }
        }
        all.sort_by_key(|f| f.id);
        let mut kept: Vec<Factor> = Vec::new();
        for div in all {
            let cost = |(pot, _): &(Potential, Vec<Factor>)| pot.domain().union(div.pot.domain()).size();
            let has = |t: &(Potential, Vec<Factor>)| t.1.iter().any(|k| k.id == div.id);
            let execute: usize = terms.iter().filter(|t| has(t)).map(cost).sum();
            let widen: usize = terms.iter().filter(|t| !has(t)).map(cost).sum();
            for t in terms.iter_mut() {
                let carries = has(t);
                t.1.retain(|k| k.id != div.id);
                if widen <= execute {
                    if !carries {
                        t.0 = t.0.multiply(&div.pot, &mut self.ctr)?;
                    }
                } else if carries {
                    t.0 = self.divide(&t.0, &div.pot)?;
                }
            }
            if widen <= execute {
                kept.push(div);
            }
        }
        let quotients: Vec<Potential> = terms.into_iter().map(|t| t.0).collect();
        kept.sort_by_key(|f| f.id);
        let sum = sum_all(quotients, &mut self.ctr)?;
        let (pot, record) = if sum.contains(d) {
            sum.max_out(d, &mut self.ctr)?
        } else {
            let n = sum.domain().size();
            let rec = ArgmaxRecord {
                decision: d,
                domain: sum.domain().clone(),
                choices: vec![0; n],
                ties: vec![card > 1; n],
            };
            (sum, rec)
        };
        live.terms.push(Term { pot, divisors: kept });
        Ok(record)
    }

    /// Adds up the scalar terms left after every variable is eliminated.
    /// Scalar divisors are only executed when `normalize` is set; without
    /// evidence every remaining probability mass is one.
    pub fn finish(&mut self, live: LiveSet, normalize: bool) -> Result<f64> {
        if live.terms.is_empty() {
            return Ok(0.0);
        }
        // Terms sharing their divisors are added before dividing once.
        let mut groups: BTreeMap<Vec<PotId>, (Vec<Factor>, Vec<Potential>)> = BTreeMap::new();
        for t in live.terms {
            let key = if normalize {
                t.divisors.iter().map(|d| d.id).collect()
            } else {
                Vec::new()
            };
            let entry = groups.entry(key).or_insert_with(|| (t.divisors, Vec::new()));
            entry.1.push(t.pot);
        }
        let mut values = Vec::with_capacity(groups.len());
        for (key, (divisors, pots)) in groups {
            let mut pot = sum_all(pots, &mut self.ctr)?;
            if !key.is_empty() {
                for div in &divisors {
                    pot = self.divide(&pot, &div.pot)?;
                }
            }
            values.push(pot);
        }
        let total = sum_all(values, &mut self.ctr)?;
        total
            .scalar()
            .ok_or_else(|| crate::error::Error::Internal("variables left after elimination".into()))
    }
}
