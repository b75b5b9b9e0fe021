mod common;

use aquafront::archive::{ArchiveParams, ArchivedSolution, HypergridArchive, InsertOutcome};
use common::{pairwise_violations, pareto};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solution(cost: f64, resilience: f64, feasible: bool) -> ArchivedSolution {
    let mut eval = common::feasible(cost, resilience);
    if !feasible {
        eval = common::infeasible(cost, 1.0);
    }
    ArchivedSolution {
        indices: vec![cost as usize],
        eval,
    }
}

fn random_candidate<R: Rng>(rng: &mut R) -> ArchivedSolution {
    solution(
        rng.random_range(0..400) as f64,
        rng.random_range(0..400) as f64 / 400.0,
        rng.random_bool(0.9),
    )
}

fn params(max_occupancy: usize) -> ArchiveParams {
    ArchiveParams {
        cell_widths: [25.0, 0.0625],
        origin: [0.0, 0.0],
        max_occupancy,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stream_of_inserts_stays_sound(seed in any::<u64>(), occupancy in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut archive = HypergridArchive::new(params(occupancy));
        for _ in 0..500 {
            let before = archive.snapshot();
            let candidate = random_candidate(&mut rng);
            let outcome = archive.try_insert(candidate.clone());
            match outcome {
                InsertOutcome::Inserted { removed } => {
                    prop_assert_eq!(archive.len() + removed, before.len() + 1);
                    prop_assert!(archive.iter().any(|s| s == &candidate));
                    // Exactly the members the candidate dominates were removed.
                    let gone = before.iter().filter(|s| pareto(candidate.objectives(), s.objectives())).count();
                    prop_assert_eq!(gone, removed);
                }
                _ => prop_assert_eq!(&archive.snapshot(), &before),
            }
            if outcome == InsertOutcome::Dominated {
                prop_assert!(before.iter().any(|s| pareto(s.objectives(), candidate.objectives())));
            }
            if outcome == InsertOutcome::Duplicate {
                prop_assert!(before.iter().any(|s| s.objectives() == candidate.objectives()));
            }
            if outcome == InsertOutcome::NotFeasible {
                prop_assert!(!candidate.eval.feasible);
            }
            prop_assert!(archive.check_invariants().is_ok());
        }
        prop_assert_eq!(pairwise_violations(&archive.snapshot()), (0, 0));
        prop_assert!(archive.iter().all(|s| s.eval.feasible));
    }

    #[test]
    fn contents_do_not_depend_on_insertion_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stream: Vec<ArchivedSolution> = (0..300).map(|_| random_candidate(&mut rng)).collect();
        // One solution per objective vector so the set is well defined.
        stream.sort_by(|a, b| a.objectives().partial_cmp(&b.objectives()).unwrap());
        stream.dedup_by(|a, b| a.objectives() == b.objectives());
        let mut forward = HypergridArchive::new(params(1000));
        for s in &stream {
            forward.try_insert(s.clone());
        }
        for i in (1..stream.len()).rev() {
            let j = rng.random_range(0..=i);
            stream.swap(i, j);
        }
        let mut shuffled = HypergridArchive::new(params(1000));
        for s in &stream {
            shuffled.try_insert(s.clone());
        }
        prop_assert_eq!(forward.rejected_full_count(), 0);
        prop_assert_eq!(forward.snapshot(), shuffled.snapshot());
    }
}

fn frequencies(archive: &HypergridArchive, groups: &[std::ops::Range<f64>], draws: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = vec![0usize; groups.len()];
    for _ in 0..draws {
        let cost = archive.select_roulette(&mut rng).unwrap().eval.cost;
        let g = groups.iter().position(|r| r.contains(&cost)).unwrap();
        hits[g] += 1;
    }
    hits.iter().map(|&h| h as f64 / draws as f64).collect()
}

/// Cell `k` of width 10 along cost receives `occupancy[k]` points on a
/// rising diagonal, so every point is non-dominated.
fn archive_with_cells(occupancy: &[usize]) -> HypergridArchive {
    let mut archive = HypergridArchive::new(ArchiveParams {
        cell_widths: [10.0, 10.0],
        origin: [0.0, 0.0],
        max_occupancy: 64,
    });
    for (cell, &n) in occupancy.iter().enumerate() {
        for i in 0..n {
            let cost = cell as f64 * 10.0 + i as f64 + 0.5;
            let outcome = archive.try_insert(solution(cost, cost / 100.0, true));
            assert!(matches!(outcome, InsertOutcome::Inserted { removed: 0 }));
        }
    }
    archive
}

#[test]
fn roulette_weights_cells_by_inverse_occupancy() {
    let archive = archive_with_cells(&[1, 9]);
    let f = frequencies(&archive, &[0.0..10.0, 10.0..20.0], 100_000);
    assert!((f[0] - 0.9).abs() <= 0.01 && (f[1] - 0.1).abs() <= 0.01, "{f:?}");

    let archive = archive_with_cells(&[1, 2, 4]);
    let f = frequencies(&archive, &[0.0..10.0, 10.0..20.0, 20.0..30.0], 100_000);
    let expected = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
    for (got, want) in f.iter().zip(expected) {
        assert!((got - want).abs() <= 0.01, "{f:?}");
    }
}

#[test]
fn roulette_on_empty_archive_fails() {
    let archive = HypergridArchive::new(params(4));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(archive.select_roulette(&mut rng).is_err());
}
