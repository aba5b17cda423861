//! Seeded random influence diagrams for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{DiagramBuilder, Evidence, InfluenceDiagram};
use crate::potential::VarId;

#[derive(Clone, Copy, Debug)]
pub struct RandomConfig {
    pub max_chance: usize,
    pub max_arity: usize,
    pub max_decisions: usize,
    pub max_utilities: usize,
    pub max_parents: usize,
    /// Chance of drawing evidence on a variable observed before the first decision.
    pub evidence_rate: f64,
    /// Chance that a CPT row is deterministic.
    pub deterministic_rate: f64,
    /// Chance that two consecutive chance variables share one joint table.
    pub joint_rate: f64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            max_chance: 6,
            max_arity: 3,
            max_decisions: 2,
            max_utilities: 3,
            max_parents: 3,
            evidence_rate: 0.0,
            deterministic_rate: 0.0,
            joint_rate: 0.15,
        }
    }
}

fn row(rng: &mut ChaCha8Rng, n: usize, deterministic_rate: f64) -> Vec<f64> {
    if rng.gen_bool(deterministic_rate) {
        let mut r = vec![0.0; n];
        r[rng.gen_range(0..n)] = 1.0;
        return r;
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn pick_subset(rng: &mut ChaCha8Rng, from: &[VarId], max: usize) -> Vec<VarId> {
    let k = rng.gen_range(0..=max.min(from.len()));
    let mut v: Vec<VarId> = from.choose_multiple(rng, k).copied().collect();
    v.sort_unstable();
    v
}

/// A random diagram and matching evidence (possibly empty).
pub fn random_diagram(seed: u64, cfg: &RandomConfig) -> (InfluenceDiagram, Evidence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_chance = rng.gen_range(1..=cfg.max_chance);
    let n_dec = rng.gen_range(0..=cfg.max_decisions);
    let n_util = rng.gen_range(1..=cfg.max_utilities);

    // Decisions are interleaved at random positions of a topological sequence.
    let mut kinds = vec![false; n_chance];
    kinds.extend(vec![true; n_dec]);
    kinds.shuffle(&mut rng);

    let mut b = DiagramBuilder::new();
    let mut ids: Vec<VarId> = Vec::new();
    let mut cards: Vec<usize> = Vec::new();
    let mut decisions = Vec::new();
    let mut chance_seen = Vec::new();
    let mut i = 0;
    while i < kinds.len() {
        let card = rng.gen_range(2..=cfg.max_arity);
        let labels: Vec<String> = (0..card).map(|s| format!("s{s}")).collect();
        let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
        if kinds[i] {
            let d = b.decision(&format!("D{}", decisions.len() + 1), &labels);
            for p in pick_subset(&mut rng, &chance_seen, 2) {
                b.informs(p, d);
            }
            decisions.push(d);
            ids.push(d);
            cards.push(card);
            i += 1;
            continue;
        }
        let earlier = ids.clone();
        let tail = pick_subset(&mut rng, &earlier, cfg.max_parents);
        let tail_size: usize = tail.iter().map(|&p| cards[p]).product();
        let joint = i + 1 < kinds.len() && !kinds[i + 1] && rng.gen_bool(cfg.joint_rate);
        let x = b.chance(&format!("X{}", chance_seen.len()), &labels);
        ids.push(x);
        cards.push(card);
        chance_seen.push(x);
        let mut heads = vec![x];
        let mut head_size = card;
        if joint {
            let c2 = rng.gen_range(2..=cfg.max_arity);
            let labels: Vec<String> = (0..c2).map(|s| format!("s{s}")).collect();
            let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
            let y = b.chance(&format!("X{}", chance_seen.len()), &labels);
            ids.push(y);
            cards.push(c2);
            chance_seen.push(y);
            heads.push(y);
            head_size *= c2;
            i += 1;
        }
        let table: Vec<f64> = (0..tail_size)
            .flat_map(|_| row(&mut rng, head_size, cfg.deterministic_rate))
            .collect();
        b.cpt(&heads, &tail, table);
        i += 1;
    }
    b.order(&decisions);

    for k in 0..n_util {
        let dom = {
            let k = rng.gen_range(1..=3.min(ids.len()));
            let mut v: Vec<VarId> = ids.choose_multiple(&mut rng, k).copied().collect();
            v.sort_unstable();
            v
        };
        let size: usize = dom.iter().map(|&v| cards[v]).product();
        let table = (0..size).map(|_| rng.gen_range(-10.0..10.0)).collect();
        b.utility(&format!("U{k}"), &dom, table);
    }

    let id = b.build().expect("generated diagrams are valid");
    let mut ev = Evidence::new();
    let observed: Vec<VarId> = if id.decision_order().is_empty() {
        id.chance_vars().collect()
    } else {
        id.partition().sets[0].clone()
    };
    if !observed.is_empty() && rng.gen_bool(cfg.evidence_rate) {
        let v = *observed.choose(&mut rng).expect("non-empty");
        ev.insert(v, rng.gen_range(0..id.card(v)));
    }
    (id, ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = RandomConfig {
            evidence_rate: 0.5,
            ..Default::default()
        };
        for seed in 0..20 {
            let (a, ea) = random_diagram(seed, &cfg);
            let (b, eb) = random_diagram(seed, &cfg);
            assert_eq!(a, b);
            assert_eq!(ea, eb);
            assert!(a.chance_vars().count() <= 6);
            assert!(a.decision_order().len() <= 2);
            assert!((1..=3).contains(&a.utilities().len()));
            a.check_evidence(&ea).unwrap();
        }
    }
}
