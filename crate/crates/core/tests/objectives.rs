use std::collections::HashMap;

use aquafront::inp::{parse_inp, InpOptions};
use aquafront::instances;
use aquafront::network::{DesignVector, OptionTable, PipeOption};
use aquafront::objectives::{evaluate_indices, uniformity, Evaluator};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(scale: f64) -> OptionTable {
    OptionTable::new(
        [0.1, 0.2, 0.3, 0.5]
            .iter()
            .map(|&d| PipeOption {
                diameter: d * scale,
                unit_cost: 1.0,
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn every_evaluation_counts_once() {
    let net = instances::tiny_loop();
    let evaluator = Evaluator::new(&net);
    let designs = instances::enumerate_designs(&net);
    for (k, d) in designs.iter().enumerate() {
        evaluator.evaluate_indices(d);
        assert_eq!(evaluator.count(), k as u64 + 1);
    }
    evaluator.evaluate(&DesignVector::from_indices(&[0, 0, 0]));
    assert_eq!(evaluator.count(), designs.len() as u64 + 1);
}

#[test]
fn feasible_resilience_never_exceeds_one() {
    let tiny = instances::tiny_loop();
    for d in instances::enumerate_designs(&tiny) {
        let e = evaluate_indices(&tiny, &d);
        if e.feasible {
            assert!(e.resilience <= 1.0, "{d:?}: {}", e.resilience);
        }
    }
    let net = instances::two_loop8();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..2000 {
        let d: Vec<usize> = (0..8).map(|_| rng.random_range(0..8)).collect();
        let e = evaluate_indices(&net, &d);
        if e.feasible {
            assert!(e.resilience <= 1.0);
        }
    }
}

#[test]
fn infeasible_designs_keep_their_true_cost() {
    let net = instances::tiny_loop();
    let e = evaluate_indices(&net, &[0, 0, 0]);
    assert!(!e.feasible);
    // 800·20 + 1200·20 + 600·20
    assert_eq!(e.cost, 52_000.0);
    assert!(e.total_head_deficit > 0.0);
}

proptest! {
    #[test]
    fn uniformity_ignores_a_common_diameter_scale(idx in prop::collection::vec(0usize..4, 3), scale in 0.5f64..3.0) {
        let text = "[JUNCTIONS]\n H 0 0.01\n A 0 0.01\n B 0 0.01\n[RESERVOIRS]\n R 50\n[PIPES]\n P1 R H 100 1 100\n P2 H A 100 1 100\n P3 H B 100 1 100\n";
        let base = parse_inp(text, &InpOptions::default()).unwrap();
        let a = base.with_option_tables(vec![table(1.0)], &HashMap::new(), 0).unwrap();
        let b = base.with_option_tables(vec![table(scale)], &HashMap::new(), 0).unwrap();
        let ua = uniformity(&a, &idx, 0);
        let ub = uniformity(&b, &idx, 0);
        prop_assert!((ua - ub).abs() <= 1e-12);
        prop_assert!(ua > 0.0 && ua <= 1.0);
    }
}
