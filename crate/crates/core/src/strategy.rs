//! Decision rules and strategies.

use crate::error::{Error, Result};
use crate::potential::{ArgmaxRecord, Domain, VarId};

/// Chosen alternative of one decision for every configuration of its
/// rule domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRule {
    pub decision: VarId,
    pub domain: Domain,
    pub choices: Vec<usize>,
    /// Set where another alternative is equally good.
    pub ties: Vec<bool>,
}

impl DecisionRule {
    /// First alternative everywhere, flagged: any alternative is optimal.
    pub fn arbitrary(decision: VarId, domain: Domain, card: usize) -> Self {
        let n = domain.size();
        DecisionRule {
            decision,
            domain,
            choices: vec![0; n],
            ties: vec![card > 1; n],
        }
    }

    /// Spreads an argmax table over `domain`, which must contain the
    /// record's own domain.
    pub fn from_record(record: ArgmaxRecord, domain: Domain) -> Result<Self> {
        if !record.domain.is_subset(&domain) {
            return Err(Error::Internal(format!(
                "rule for decision {} depends on {:?}, outside its relevant past {:?}",
                record.decision,
                record.domain.vars(),
                domain.vars()
            )));
        }
        let offsets = record.domain.offsets_in(&domain);
        Ok(DecisionRule {
            decision: record.decision,
            choices: offsets.iter().map(|&o| record.choices[o]).collect(),
            ties: offsets.iter().map(|&o| record.ties[o]).collect(),
            domain,
        })
    }

    /// Alternative chosen under a full assignment indexed by variable id.
    pub fn choice(&self, assignment: &[usize]) -> usize {
        self.choices[self.domain.offset_of(assignment)]
    }

    pub fn is_arbitrary(&self) -> bool {
        self.ties.iter().all(|&t| t)
    }
}

/// One rule per decision in temporal order, plus the expected utility.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub meu: f64,
    pub rules: Vec<DecisionRule>,
}

impl Strategy {
    pub fn rule(&self, d: VarId) -> Option<&DecisionRule> {
        self.rules.iter().find(|r| r.decision == d)
    }
}
