//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use aquafront::archive::{ArchiveParams, ArchivedSolution, HypergridArchive, InsertOutcome};
use aquafront::hydraulics::{headloss_hw, solve_steady_state, HydraulicState};
use aquafront::instances;
use aquafront::metrics::{compare_fronts, front_from_solutions, front_to_csv, hypervolume_2d, CompareOptions};
use aquafront::network::{DesignVector, GeneBounds, PipeNetwork};
use aquafront::nsga2::{fast_nondominated_sort, polynomial_mutation, polynomial_mutation_gene, sbx_crossover, OperatorParams};
use aquafront::orchestrator::{run_all, run_single, LsSchedule, RunConfig, Scheme};
use common::{brute_compare, brute_front0, pairwise_violations, pareto, random_evaluations, random_front};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closed-form head tolerance (m).
const HEAD_TOL: f64 = 1e-6;
/// Junction mass-balance tolerance (m³/s).
const MASS_TOL: f64 = 1e-6;
/// Midpoint-preservation tolerance for SBX (absolute, genes are O(10)).
const MIDPOINT_TOL: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn max_junction_imbalance(net: &PipeNetwork, state: &HydraulicState) -> f64 {
    let mut balance: Vec<f64> = net.junctions().iter().map(|j| -j.demand).collect();
    let links = net
        .pipes()
        .iter()
        .map(|p| (p.from, p.to))
        .zip(&state.pipe_flows)
        .chain(net.pumps().iter().map(|p| (p.from, p.to)).zip(&state.pump_flows));
    for ((from, to), &q) in links {
        if let Some(j) = net.junction_position(from) {
            balance[j] -= q;
        }
        if let Some(j) = net.junction_position(to) {
            balance[j] += q;
        }
    }
    balance.iter().fold(0.0, |m, b| m.max(b.abs()))
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let one = instances::one_pipe();
    let s = solve_steady_state(&one, &[0]).unwrap();
    let err_one = (s.head_of(&one, "J1").unwrap() - (100.0 - headloss_hw(0.1, 1000.0, 130.0, 0.3).unwrap())).abs();

    let par = instances::parallel_pipes();
    let s = solve_steady_state(&par, &[0, 0]).unwrap();
    let err_par = (s.head_of(&par, "J1").unwrap() - (80.0 - headloss_hw(0.1, 1500.0, 120.0, 0.3).unwrap())).abs();

    let mut worst_mass: f64 = 0.0;
    let mut solves = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for net in [instances::one_pipe(), instances::parallel_pipes(), instances::tiny_loop(), instances::two_loop8()] {
        let designs: Vec<Vec<usize>> = if net.design_len() == 8 {
            (0..1000).map(|_| (0..8).map(|_| rng.random_range(0..8)).collect()).collect()
        } else {
            instances::enumerate_designs(&net)
        };
        for d in designs {
            let state = solve_steady_state(&net, &d).unwrap();
            worst_mass = worst_mass.max(max_junction_imbalance(&net, &state));
            solves += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        err_one <= HEAD_TOL && err_par <= HEAD_TOL && worst_mass <= MASS_TOL && elapsed < Duration::from_secs(1),
        format!(
            "one-pipe head error {err_one:.2e} m, parallel {err_par:.2e} m, worst mass residual {worst_mass:.2e} m3/s over {solves} solves, {elapsed:.2?}"
        ),
    )
}

fn tiny_config(scheme: Scheme, seed: u64) -> RunConfig {
    RunConfig {
        scheme,
        population_size: 20,
        generations: 200,
        runs: 5,
        seed,
        ..RunConfig::default()
    }
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let net = instances::tiny_loop();
    let truth = common::exhaustive_front(&net);
    let mut complete = 0;
    let trials = 20;
    for seed in 0..trials {
        let merged = run_all(&tiny_config(Scheme::B, seed), &net).unwrap();
        let found: Vec<[f64; 2]> = merged.nd_set.iter().map(|s| s.objectives()).collect();
        if found == truth {
            complete += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        complete * 100 >= 95 * trials && elapsed < Duration::from_secs(30),
        format!(
            "exact front ({} points) recovered in {complete}/{trials} trials, {elapsed:.2?}",
            truth.len()
        ),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut archive = HypergridArchive::new(ArchiveParams {
        cell_widths: [1000.0 / 64.0, 1.0 / 64.0],
        origin: [0.0, 0.0],
        max_occupancy: 8,
    });
    let mut mirror: Vec<ArchivedSolution> = Vec::new();
    let mut changed_on_reject = 0usize;
    let mut bad_pairs = (0usize, 0usize);
    let mut outcomes = [0usize; 5];
    let inserts = 1_000_000;
    for i in 0..inserts {
        // Candidates scatter below a concave curve on a grid, so duplicates,
        // dominated points and crowded cells all occur.
        let x = rng.random_range(0..20_000) as f64 / 20.0;
        let y = ((x / 1000.0).sqrt() - rng.random::<f64>().powi(3) * 0.3).max(0.0);
        let y = (y * 4096.0).round() / 4096.0;
        let mut eval = common::feasible(x, y);
        if rng.random_bool(0.05) {
            eval = common::infeasible(x, 1.0);
        }
        let candidate = ArchivedSolution {
            indices: vec![i % 7],
            eval,
        };
        let outcome = archive.try_insert(candidate);
        let slot = match outcome {
            InsertOutcome::Inserted { .. } => 0,
            InsertOutcome::Dominated => 1,
            InsertOutcome::Duplicate => 2,
            InsertOutcome::CellFull => 3,
            InsertOutcome::NotFeasible => 4,
        };
        outcomes[slot] += 1;
        if slot == 0 {
            mirror = archive.snapshot();
        } else if archive.len() != mirror.len() || !archive.iter().zip(&mirror).all(|(a, b)| a == b) {
            changed_on_reject += 1;
        }
        if i % 10_000 == 9_999 {
            let (d, u) = pairwise_violations(&archive.snapshot());
            bad_pairs.0 += d;
            bad_pairs.1 += u;
        }
    }
    verdict(
        bad_pairs == (0, 0) && changed_on_reject == 0 && outcomes.iter().all(|&c| c > 0),
        format!(
            "{inserts} inserts (inserted/dominated/duplicate/cell-full/infeasible = {outcomes:?}), final size {}, dominated pairs {}, duplicate pairs {}, archive changed on rejection {changed_on_reject} times",
            archive.len(),
            bad_pairs.0,
            bad_pairs.1
        ),
    )
}

fn criterion_4() -> Verdict {
    let net = instances::tiny_loop();
    let mut same_pop = 0;
    let mut covered = 0;
    let seeds = 10;
    for seed in 0..seeds {
        let a = run_single(&tiny_config(Scheme::A, seed), &net, 0).unwrap();
        let b = run_single(&tiny_config(Scheme::B, seed), &net, 0).unwrap();
        if a.final_population == b.final_population {
            same_pop += 1;
        }
        let all_covered = a.nd_set.iter().all(|s| {
            b.nd_set
                .iter()
                .any(|t| t.objectives() == s.objectives() || pareto(t.objectives(), s.objectives()))
        });
        if all_covered {
            covered += 1;
        }
    }
    verdict(
        same_pop == seeds && covered == seeds,
        format!("identical populations {same_pop}/{seeds}, A front covered by B archive {covered}/{seeds}"),
    )
}

fn criterion_5() -> Verdict {
    let net = instances::two_loop8();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for scheme in [Scheme::A, Scheme::B, Scheme::C, Scheme::D] {
        for (pop, gens, schedule) in [
            (20, 40, LsSchedule { start_gen: 10, dense_until: 20, dense_period: 5, sparse_period: 10 }),
            (10, 100, LsSchedule { start_gen: 1, dense_until: 50, dense_period: 25, sparse_period: 30 }),
        ] {
            let config = RunConfig {
                scheme,
                population_size: pop,
                generations: gens,
                runs: 1,
                link_interval: 7,
                coupling_start_gen: 14,
                ls_schedule: schedule,
                seed: 5,
                ..RunConfig::default()
            };
            let stats = run_single(&config, &net, 0).unwrap().stats;
            let expected = (pop * (gens + 1)) as u64 + stats.ls_evaluations;
            checked += 1;
            if stats.fe_total != expected {
                mismatches.push(format!("{scheme}: {} vs {expected}", stats.fe_total));
            }
        }
    }
    let passes = LsSchedule::default().passes_up_to(10_000);
    verdict(
        mismatches.is_empty() && passes == 46,
        format!("{checked} runs, identity mismatches {mismatches:?}, default schedule passes over 10000 generations = {passes}"),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut identity_failures = 0;
    let mut oracle_mismatches = 0;
    let pairs = 1000;
    for _ in 0..pairs {
        let pool: Vec<[f64; 2]> = (0..rng.random_range(0..40))
            .map(|_| [rng.random_range(0..60) as f64 * 10.0, rng.random_range(0..60) as f64 / 64.0])
            .collect();
        let n1 = rng.random_range(0..40);
        let n2 = rng.random_range(0..40);
        let pf1 = random_front(&mut rng, &pool, n1);
        let pf2 = random_front(&mut rng, &pool, n2);
        let report = compare_fronts(&pf1, &pf2, &CompareOptions::default()).unwrap();
        if report.check_identities().is_err() {
            identity_failures += 1;
        }
        if report != brute_compare(&pf1, &pf2) {
            oracle_mismatches += 1;
        }
    }
    verdict(
        identity_failures == 0 && oracle_mismatches == 0,
        format!("{pairs} front pairs, identity failures {identity_failures}, brute-force mismatches {oracle_mismatches}"),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bounds = GeneBounds { upper: vec![1.0, 3.0, 7.0, 15.0, 0.0] };
    let params = OperatorParams {
        crossover_prob: 1.0,
        ..OperatorParams::defaults_for(5)
    };
    let mut out_of_bounds = 0;
    let mut midpoint_breaks = 0;
    let calls = 1_000_000;
    for _ in 0..calls {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { bounds.upper.iter().map(|&u| rng.random::<f64>() * u).collect() };
        let p1 = DesignVector::new(draw(&mut rng), &bounds).unwrap();
        let p2 = DesignVector::new(draw(&mut rng), &bounds).unwrap();
        let (c1, c2) = sbx_crossover(&p1, &p2, &bounds, &params, &mut rng);
        let m = polynomial_mutation(&c1, &bounds, &params, &mut rng);
        if !(bounds.contains(c1.genes()) && bounds.contains(c2.genes()) && bounds.contains(m.genes())) {
            out_of_bounds += 1;
        }
        for k in 0..bounds.len() {
            let (a, b) = (c1.genes()[k], c2.genes()[k]);
            let u = bounds.upper[k];
            let clipped = a == 0.0 || b == 0.0 || a == u || b == u;
            if !clipped && ((a + b) - (p1.genes()[k] + p2.genes()[k])).abs() > MIDPOINT_TOL {
                midpoint_breaks += 1;
            }
        }
    }

    let no_mutation = OperatorParams {
        mutation_prob: 0.0,
        ..params
    };
    let d = DesignVector::new(vec![0.3, 2.5, 6.9, 15.0, 0.0], &bounds).unwrap();
    let identity = (0..10_000).all(|_| polynomial_mutation(&d, &bounds, &no_mutation, &mut rng) == d);
    let zero_delta = (0..10_000).all(|_| {
        let upper = rng.random_range(0.5..20.0);
        let y = rng.random::<f64>() * upper;
        (polynomial_mutation_gene(y, upper, 0.5, 7.0) - y).abs() <= 1e-12 * upper
    });

    let mut sort_mismatches = 0;
    let populations = 500;
    for _ in 0..populations {
        let n = rng.random_range(1..=50);
        let evals = random_evaluations(&mut rng, n);
        let mut first = fast_nondominated_sort(&evals)[0].clone();
        first.sort_unstable();
        if first != brute_front0(&evals) {
            sort_mismatches += 1;
        }
    }
    verdict(
        out_of_bounds == 0 && midpoint_breaks == 0 && identity && zero_delta && sort_mismatches == 0,
        format!(
            "{calls} operator calls: out of bounds {out_of_bounds}, midpoint breaks {midpoint_breaks}; p_m=0 identity {identity}; u=0.5 zero step {zero_delta}; sort mismatches {sort_mismatches}/{populations}"
        ),
    )
}

fn criterion_8() -> Verdict {
    let net = instances::two_loop8();
    let config = RunConfig {
        scheme: Scheme::D,
        population_size: 30,
        generations: 120,
        runs: 3,
        link_interval: 20,
        coupling_start_gen: 40,
        ls_schedule: LsSchedule {
            start_gen: 50,
            dense_until: 80,
            dense_period: 10,
            sparse_period: 20,
        },
        seed: 8,
        ..RunConfig::default()
    };
    let outputs: Vec<String> = (0..3)
        .map(|_| front_to_csv(&front_from_solutions(&run_all(&config, &net).unwrap().nd_set)))
        .collect();
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        identical,
        format!("3 repetitions, {} bytes each, identical {identical}", outputs[0].len()),
    )
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let net = instances::two_loop8();
    let max_cost: f64 = net
        .pipes()
        .iter()
        .enumerate()
        .map(|(k, p)| net.option_table_of(k).options().last().unwrap().unit_cost * p.length)
        .sum();
    let reference = [max_cost, 0.0];
    let budget = 200_000;
    let pop = 200;
    let generations = budget / pop - 1;
    let trials = 20;
    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in 0..trials {
        let hv = |scheme| {
            let config = RunConfig {
                scheme,
                population_size: pop,
                generations,
                runs: 1,
                seed: 900 + seed,
                ..RunConfig::default()
            };
            let result = run_single(&config, &net, 0).unwrap();
            assert_eq!(result.stats.fe_total, budget as u64);
            let pts: Vec<[f64; 2]> = result.nd_set.iter().map(|s| s.objectives()).collect();
            hypervolume_2d(&pts, reference).unwrap()
        };
        let (a, b) = (hv(Scheme::A), hv(Scheme::B));
        if b >= a {
            wins += 1;
        }
        ratios.push(b / a);
    }
    let elapsed = start.elapsed();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    verdict(
        wins >= 18 && elapsed < Duration::from_secs(300),
        format!("B >= A hypervolume in {wins}/{trials} trials (mean B/A {mean_ratio:.6}), {elapsed:.2?}"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("hydraulic solver vs closed form", criterion_1),
        ("exact front on the 64-design network", criterion_2),
        ("archive soundness over 1e6 inserts", criterion_3),
        ("archive is storage only in scheme B", criterion_4),
        ("evaluation accounting identity", criterion_5),
        ("comparison report identities", criterion_6),
        ("operator and sort correctness", criterion_7),
        ("byte-identical repeated runs", criterion_8),
        ("archive improves hypervolume at 200k evaluations", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", k + 1, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
