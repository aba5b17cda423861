use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lazyid::format::{parse_model, serialize_model};
use lazyid::jtree::{check_chordal, strong_tree};
use lazyid::lazy::{solve_lazy, LazyOptions};
use lazyid::model::moral_graph;
use lazyid::oracle::{brute_force_solve, bucket_eliminate, enumerate_strategies, DEFAULT_CAP};
use lazyid::random::{random_diagram, RandomConfig};
use lazyid::{Evidence, InfluenceDiagram};

fn config(evidence_rate: f64, joint_rate: f64) -> RandomConfig {
    RandomConfig {
        evidence_rate,
        joint_rate,
        ..Default::default()
    }
}

fn domains(id: &InfluenceDiagram) -> Vec<Vec<usize>> {
    id.families()
        .iter()
        .map(|f| f.potential.vars().to_vec())
        .chain(id.utilities().iter().map(|u| u.potential.vars().to_vec()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn format_round_trips(seed in any::<u64>(), joint in 0.0..0.5f64) {
        let (id, ev) = random_diagram(seed, &config(0.3, joint));
        let text = serialize_model(&id);
        let back = parse_model(&text).expect("serialized models parse");
        prop_assert_eq!(&back, &id);
        prop_assert_eq!(serialize_model(&back), text);
        let a = solve_lazy(&id, &ev, LazyOptions::default()).unwrap();
        let b = solve_lazy(&back, &ev, LazyOptions::default()).unwrap();
        prop_assert_eq!(a.strategy.meu, b.strategy.meu);
    }

    #[test]
    fn moral_graph_is_union_of_domain_cliques(seed in any::<u64>()) {
        let (id, _) = random_diagram(seed, &config(0.0, 0.15));
        let g = moral_graph(&id);
        let doms = domains(&id);
        for d in &doms {
            for (i, &a) in d.iter().enumerate() {
                for &b in &d[i + 1..] {
                    prop_assert!(g.has_edge(a, b));
                }
            }
        }
        for (a, b) in g.edges() {
            prop_assert!(doms.iter().any(|d| d.contains(&a) && d.contains(&b)));
        }
    }

    #[test]
    fn moralization_is_monotone(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (id, _) = random_diagram(seed, &config(0.0, 0.15));
        let before = moral_graph(&id).edges();
        let mut text = serialize_model(&id);
        let n = id.num_vars();
        let a = pick.index(n);
        let b = (a + 1) % n;
        let vars = if a == b { vec![a] } else { vec![a.min(b), a.max(b)] };
        let names: Vec<&str> = vars.iter().map(|&v| id.name(v)).collect();
        let cells: usize = vars.iter().map(|&v| id.card(v)).product();
        let order_at = text.find("@order").unwrap_or(text.len());
        let extra = format!("@utility Extra | {}\n{}\n", names.join(" "), vec!["1"; cells].join(" "));
        text.insert_str(order_at, &extra);
        let bigger = parse_model(&text).expect("extended model parses");
        let after = moral_graph(&bigger).edges();
        prop_assert!(before.is_subset(&after));
        if vars.len() == 2 {
            prop_assert!(after.contains(&(vars[0], vars[1])));
        }
    }

    #[test]
    fn partition_respects_information(seed in any::<u64>()) {
        let (id, _) = random_diagram(seed, &config(0.0, 0.15));
        let p = id.partition();
        let mut seen = vec![0usize; id.num_vars()];
        for (k, set) in p.sets.iter().enumerate() {
            for &v in set {
                prop_assert!(!id.is_decision(v));
                prop_assert_eq!(p.rank(v), 2 * k);
                seen[v] += 1;
            }
        }
        for (v, &count) in seen.iter().enumerate() {
            prop_assert_eq!(count, usize::from(!id.is_decision(v)));
        }
        for (j, &d) in id.decision_order().iter().enumerate() {
            prop_assert_eq!(p.rank(d), 2 * j + 1);
            for &q in id.parents(d) {
                prop_assert!(p.precedes(q, d));
            }
        }
    }

    #[test]
    fn strong_order_is_perfect_and_temporal(seed in any::<u64>()) {
        let (id, _) = random_diagram(seed, &config(0.0, 0.15));
        let tree = strong_tree(&id);
        prop_assert!(check_chordal(&moral_graph(&id), &tree.order));
        let p = id.partition();
        prop_assert!(tree.order.windows(2).all(|w| p.rank(w[0]) >= p.rank(w[1])));
        prop_assert_eq!(tree.order.len(), id.num_vars());
    }

    #[test]
    fn elimination_order_within_a_block_is_irrelevant(seed in any::<u64>(), shuffle in any::<u64>()) {
        let (id, ev) = random_diagram(seed, &config(0.3, 0.15));
        let base = strong_tree(&id).order;
        let p = id.partition();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        let mut order = Vec::with_capacity(base.len());
        for block in base.chunk_by(|a, b| p.rank(*a) == p.rank(*b)) {
            let mut block = block.to_vec();
            block.shuffle(&mut rng);
            order.extend(block);
        }
        let (a, ..) = bucket_eliminate(&id, &base, &ev).unwrap();
        let (b, ..) = bucket_eliminate(&id, &order, &ev).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn strategy_enumeration_matches_backward_induction(seed in any::<u64>()) {
        let cfg = RandomConfig {
            max_chance: 3,
            max_arity: 2,
            max_decisions: 2,
            max_utilities: 2,
            ..Default::default()
        };
        let (id, _) = random_diagram(seed, &cfg);
        let ev = Evidence::new();
        let best = enumerate_strategies(&id, &ev, 1 << 16);
        prop_assume!(best.is_ok());
        let best = best.unwrap();
        let brute = brute_force_solve(&id, &ev, DEFAULT_CAP).unwrap().meu;
        let lazy = solve_lazy(&id, &ev, LazyOptions::default()).unwrap().strategy.meu;
        prop_assert!((best - brute).abs() <= 1e-9);
        prop_assert!((best - lazy).abs() <= 1e-9);
    }
}
