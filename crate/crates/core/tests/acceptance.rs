//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured figure next to its pinned tolerance (run with
//! `--nocapture` to see the lines on success).

mod common;

use std::time::Instant;

use common::*;
use rand::prelude::*;
use recombinator::correlations::{
    correlations_from_moments, moebius_partition, moments_from_correlations, partitions_of,
    site_correlation, MomentTable, SetPartition,
};
use recombinator::dynamics::{
    equilibrium, full_rhs, integrate_rk4, integrate_rk4_at, solve_combined, ModelSpec,
};
use recombinator::measure::{Cylinder, Measure};
use recombinator::recombination::{
    decay_check, kpoint_function, ld_count, linkage_disequilibria, recombine_link,
    recombine_set, solve_recombination, span_link_set, t_operator, CoefficientTable,
    RecombinationRates, RecombinationSolver,
};
use recombinator::selection::MeanFitnessTrace;
use recombinator::type_space::{LinkSet, TypeSpace};

fn report(id: &str, label: &str, pass: bool, detail: &str) {
    println!("criterion {id} {label}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_01_recombination_closed_form_vs_oracle() {
    let started = Instant::now();
    let mut rng = rng(101);
    let times = tenth_grid_to(50);
    let mut max_dev = 0.0f64;
    for _ in 0..25 {
        let space = random_space(&mut rng);
        let model = recombination_only(&space, &mut rng);
        let solver = RecombinationSolver::new(model.initial(), model.rates()).unwrap();
        let oracle = integrate_rk4_at(&model, &times, 1e-3).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let closed = solver.state_at(t).unwrap();
            max_dev = max_dev.max(max_abs_diff(closed.weights(), oracle.states[i].weights()));
        }
    }
    let elapsed = started.elapsed();
    let pass = max_dev < 1e-6 && elapsed.as_secs_f64() < 30.0;
    report(
        "01",
        "pure recombination closed form vs RK4 oracle",
        pass,
        &format!("max deviation {max_dev:.3e} < 1e-6, runtime {elapsed:.2?} < 30s"),
    );
    assert!(pass, "max deviation {max_dev:.3e}, runtime {elapsed:?}");
}

#[test]
fn criterion_02_combined_closed_form_vs_oracle() {
    // Faithful to the stated protocol: random irreducible mutation plus
    // random additive fitness drawn from [0,1]. The tensor ansatz behind the
    // combined solver requires the per-site semigroup factors to commute
    // with the recombinators, which holds only for factors that are
    // multiples of Markov matrices; fitness that varies within a site
    // breaks that, so this criterion records an honest failure rather than
    // a loosened tolerance. The mutation-only half of the protocol is
    // asserted alongside to pin down exactly where the boundary lies.
    let mut rng = rng(102);
    let times = tenth_grid_to(50);

    let mut mutation_only_dev = 0.0f64;
    let mut full_dev = 0.0f64;
    for k in 0..25 {
        let space = random_space(&mut rng);
        let initial = random_probability(&space, &mut rng);
        let rates = random_rates(&space, &mut rng);
        let mutation = random_mutation(&space, &mut rng);
        let fitness = random_fitness(&space, &mut rng);

        let mr_model = ModelSpec::new(
            space.clone(),
            rates.clone(),
            Some(mutation.clone()),
            None,
            initial.clone(),
        )
        .unwrap();
        // Mutation + recombination is inside the exact regime; keep it tight.
        if k < 10 {
            let closed = solve_combined(&mr_model, &times).unwrap();
            let oracle = integrate_rk4_at(&mr_model, &times, 1e-3).unwrap();
            mutation_only_dev = mutation_only_dev.max(max_state_deviation(&closed, &oracle));
        }

        let model =
            ModelSpec::new(space, rates, Some(mutation), Some(fitness), initial).unwrap();
        let closed = solve_combined(&model, &times).unwrap();
        let oracle = integrate_rk4_at(&model, &times, 1e-3).unwrap();
        full_dev = full_dev.max(max_state_deviation(&closed, &oracle));
    }

    let pass = full_dev < 1e-6 && mutation_only_dev < 1e-6;
    report(
        "02",
        "combined closed form vs RK4 oracle (mutation + fitness)",
        pass,
        &format!(
            "max deviation {full_dev:.3e} vs 1e-6 with varying fitness \
             (mutation+recombination alone: {mutation_only_dev:.3e} < 1e-6)"
        ),
    );
    assert!(
        pass,
        "combined ansatz deviates from the true flow by {full_dev:.3e} with \
         within-site-varying fitness (the semigroup factors are not multiples of \
         Markov matrices, so they do not commute with the recombinators); \
         mutation+recombination deviation is {mutation_only_dev:.3e}"
    );
}

#[test]
fn criterion_03_coefficient_identities() {
    let mut rng = rng(103);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n_links = rng.random_range(1..=6usize);
        let rates = RecombinationRates::new(
            (0..n_links).map(|_| rng.random_range(0.1..2.0)).collect(),
        )
        .unwrap();
        let t = rng.random_range(0.0..3.0);
        let s = rng.random_range(0.0..3.0);
        let at = CoefficientTable::at(t, &rates).unwrap();
        let a_s = CoefficientTable::at(s, &rates).unwrap();
        let a_ts = CoefficientTable::at(t + s, &rates).unwrap();
        let full = LinkSet::full(n_links);

        // Normalization and positivity.
        let sum: f64 = at.a_values().iter().sum();
        worst = worst.max((sum - 1.0).abs());
        assert!(at.a_values().iter().all(|&a| a >= 0.0));

        for k in full.subsets() {
            // b_K as a subset sum of the a_G.
            let summed: f64 = k.subsets().map(|g| at.a(g)).sum();
            worst = worst.max((at.b(k) - summed).abs());

            // Semigroup convolution a_G(t+s) = sum_{H u K = G} a_H(t) a_K(s).
            let mut conv = 0.0;
            for h in k.subsets() {
                for j in h.subsets() {
                    conv += at.a(h) * a_s.a(k.minus(h).union(j));
                }
            }
            worst = worst.max((a_ts.a(k) - conv).abs());
        }
    }
    let pass = worst < 1e-12;
    report("03", "coefficient identities", pass, &format!("worst residual {worst:.3e} < 1e-12"));
    assert!(pass, "worst residual {worst:.3e}");
}

#[test]
fn criterion_04_recombinator_algebra() {
    let mut rng = rng(104);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        // Up to 3 links.
        let n_sites = rng.random_range(2..=4usize);
        let cards: Vec<usize> = (0..n_sites).map(|_| rng.random_range(2..=3usize)).collect();
        let space = TypeSpace::new(&cards).unwrap();
        let omega = random_positive(&space, &mut rng);
        let rates = random_rates(&space, &mut rng);
        let t = rng.random_range(0.1..1.5);

        for alpha in 0..space.n_links() {
            let r_a = recombine_link(&omega, alpha).unwrap();
            // Idempotence.
            let r_aa = recombine_link(&r_a, alpha).unwrap();
            worst = worst.max(max_abs_diff(r_a.weights(), r_aa.weights()));
            // Commutativity.
            for beta in 0..space.n_links() {
                let ab = recombine_link(&recombine_link(&omega, beta).unwrap(), alpha).unwrap();
                let ba = recombine_link(&recombine_link(&omega, alpha).unwrap(), beta).unwrap();
                worst = worst.max(max_abs_diff(ab.weights(), ba.weights()));
            }
        }

        // Lattice action R_G R_H = R_{G u H}.
        for g in space.all_link_sets() {
            for h in space.all_link_sets() {
                let gh = recombine_set(&recombine_set(&omega, h).unwrap(), g).unwrap();
                let union = recombine_set(&omega, g.union(h)).unwrap();
                worst = worst.max(max_abs_diff(gh.weights(), union.weights()));
            }
        }

        // Cut-and-forget: marginals outside the cut are untouched.
        for alpha in 0..space.n_links() {
            for beta in alpha..space.n_links() {
                let r_b = recombine_link(&omega, beta).unwrap();
                let lead: Vec<usize> = (0..=alpha).collect();
                let m1 = r_b.marginal(&lead).unwrap();
                let m2 = omega.marginal(&lead).unwrap();
                worst = worst.max(max_abs_diff(m1.weights(), m2.weights()));
            }
            for beta in 0..=alpha {
                let r_b = recombine_link(&omega, beta).unwrap();
                let trail: Vec<usize> = (alpha + 1..space.n_sites()).collect();
                let m1 = r_b.marginal(&trail).unwrap();
                let m2 = omega.marginal(&trail).unwrap();
                worst = worst.max(max_abs_diff(m1.weights(), m2.weights()));
            }
        }

        // Linearity on the solution simplex:
        // R_a(sum_G a_G(t) R_G(nu)) = sum_G a_G(t) R_{G u {a}}(nu).
        let table = CoefficientTable::at(t, &rates).unwrap();
        let mixed = solve_recombination(&omega, t, &rates).unwrap();
        for alpha in 0..space.n_links() {
            let lhs = recombine_link(&mixed, alpha).unwrap();
            let mut rhs = vec![0.0; space.total_size()];
            for g in space.all_link_sets() {
                let shifted = recombine_set(&omega, g.with_link(alpha)).unwrap();
                for (o, x) in rhs.iter_mut().zip(shifted.weights()) {
                    *o += table.a(g) * x;
                }
            }
            worst = worst.max(max_abs_diff(lhs.weights(), &rhs));
        }

        // The forward flow commutes with every composite recombinator.
        for g in space.all_link_sets() {
            let flow_then_r = recombine_set(&solve_recombination(&omega, t, &rates).unwrap(), g)
                .unwrap();
            let r_then_flow =
                solve_recombination(&recombine_set(&omega, g).unwrap(), t, &rates).unwrap();
            worst = worst.max(max_abs_diff(flow_then_r.weights(), r_then_flow.weights()));
        }
    }
    let pass = worst < 1e-12;
    report("04", "recombinator algebra", pass, &format!("worst residual {worst:.3e} < 1e-12"));
    assert!(pass, "worst residual {worst:.3e}");
}

#[test]
fn criterion_05_ld_decoupling_and_zero_rule() {
    let mut rng = rng(105);

    // Decoupling: T_G(omega_t) = b_G(t) T_G(omega_0) for every G.
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let space = random_space(&mut rng);
        let model = recombination_only(&space, &mut rng);
        for t in [0.3, 1.0, 2.5] {
            for g in space.all_link_sets() {
                let (evolved, predicted) =
                    decay_check(model.initial(), g, t, model.rates()).unwrap();
                worst = worst.max(max_abs_diff(evolved.weights(), predicted.weights()));
            }
        }
    }

    // Zero rule: the value vanishes exactly when the complement reaches
    // outside the cylinder's span.
    let space = TypeSpace::new(&[2, 3, 2, 2]).unwrap();
    let mut zero_worst = 0.0f64;
    let mut found = 0;
    while found < 20 {
        let nu = random_probability(&space, &mut rng);
        let n_assigned = rng.random_range(1..=3usize);
        let mut sites: Vec<usize> = (0..space.n_sites()).collect();
        sites.shuffle(&mut rng);
        let mut sites: Vec<usize> = sites[..n_assigned].to_vec();
        sites.sort_unstable();
        let assignments: Vec<(usize, usize)> = sites
            .iter()
            .map(|&s| (s, rng.random_range(0..space.cardinality(s))))
            .collect();
        let g = LinkSet::from_bits(
            rng.random_range(0..(1u32 << space.n_links())),
            space.n_links(),
        )
        .unwrap();
        let (first, last) = (sites[0], sites[sites.len() - 1]);
        let violates = g.complement().links().any(|l| l < first || l >= last);
        if !violates {
            continue;
        }
        found += 1;
        let cyl = Cylinder::new(&space, &assignments).unwrap();
        zero_worst = zero_worst.max(kpoint_function(&nu, g, &cyl).unwrap().abs());
    }

    let pass = worst < 1e-10 && zero_worst < 1e-12;
    report(
        "05",
        "linkage disequilibria decouple",
        pass,
        &format!("decay residual {worst:.3e} < 1e-10, zero-rule residual {zero_worst:.3e} < 1e-12"),
    );
    assert!(pass, "decay {worst:.3e}, zero rule {zero_worst:.3e}");
}

#[test]
fn criterion_06_correlation_equals_kpoint_function() {
    let mut rng = rng(106);
    let mut worst = 0.0f64;
    for cards in [vec![2usize, 2, 2], vec![2, 3, 2]] {
        let space = TypeSpace::new(&cards).unwrap();

        // Counting identity: sum over all site subsets of prod (M_i - 1).
        let mut count = 0usize;
        for mask in 0..(1u32 << space.n_sites()) {
            let mut prod = 1usize;
            for site in 0..space.n_sites() {
                if mask & (1 << site) != 0 {
                    prod *= space.cardinality(site) - 1;
                }
            }
            count += prod;
        }
        assert_eq!(count, space.total_size());
        assert_eq!(ld_count(&space), space.total_size());

        for _ in 0..5 {
            let omega = random_probability(&space, &mut rng);
            for first in 0..space.n_sites() {
                for last in first..space.n_sites() {
                    let sites: Vec<usize> = (first..=last).collect();
                    if sites.len() > 3 {
                        continue;
                    }
                    let g = span_link_set(&space, first, last);
                    // Every value assignment, not only the retained ones.
                    let mut values: Vec<usize> = vec![0; sites.len()];
                    loop {
                        let assignments: Vec<(usize, usize)> =
                            sites.iter().zip(&values).map(|(&s, &v)| (s, v)).collect();
                        let cyl = Cylinder::new(&space, &assignments).unwrap();
                        let lhs = site_correlation(&omega, &sites, &values).unwrap();
                        let rhs = kpoint_function(&omega, g, &cyl).unwrap();
                        worst = worst.max((lhs - rhs).abs());
                        let mut done = true;
                        for k in (0..sites.len()).rev() {
                            values[k] += 1;
                            if values[k] < space.cardinality(sites[k]) {
                                done = false;
                                break;
                            }
                            values[k] = 0;
                        }
                        if done {
                            break;
                        }
                    }
                    let table = linkage_disequilibria(&omega, &sites).unwrap();
                    let expected: usize =
                        sites.iter().map(|&s| space.cardinality(s) - 1).product();
                    assert_eq!(table.entries.len(), expected);
                }
            }
        }
    }
    let pass = worst < 1e-12;
    report(
        "06",
        "partition correlations equal k-point functions",
        pass,
        &format!("max difference {worst:.3e} < 1e-12, counts match the state count"),
    );
    assert!(pass, "max difference {worst:.3e}");
}

#[test]
fn criterion_07_mean_fitness_is_a_lyapunov_function() {
    let mut rng = rng(107);
    let mut worst_drop = 0.0f64;
    let mut worst_variance_mismatch = 0.0f64;
    let dt = 1e-3;
    for _ in 0..20 {
        let space = random_space(&mut rng);
        let initial = random_probability(&space, &mut rng);
        let fitness = random_fitness(&space, &mut rng);
        let model = ModelSpec::new(
            space.clone(),
            random_rates(&space, &mut rng),
            None,
            Some(fitness.clone()),
            initial,
        )
        .unwrap();
        let traj = integrate_rk4(&model, 2.0, dt).unwrap();
        let values: Vec<f64> = traj
            .states
            .iter()
            .map(|s| fitness.mean_fitness(s).unwrap())
            .collect();
        let trace = MeanFitnessTrace::new(traj.times.clone(), values.clone()).unwrap();
        assert!(trace.is_nondecreasing(1e-10));
        for w in values.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        // Centered differences against the variance identity, plus the
        // variance's own nonnegativity.
        for i in (50..traj.len() - 1).step_by(50) {
            let fd = (values[i + 1] - values[i - 1]) / (2.0 * dt);
            let var = fitness.variance(&traj.states[i]).unwrap();
            assert!(var >= -1e-12);
            worst_variance_mismatch = worst_variance_mismatch.max((fd - var).abs());
        }
    }
    let pass = worst_drop < 1e-10 && worst_variance_mismatch < 1e-6;
    report(
        "07",
        "mean fitness nondecreasing with variance derivative",
        pass,
        &format!(
            "largest drop {worst_drop:.3e} < 1e-10, derivative mismatch \
             {worst_variance_mismatch:.3e} < 1e-6"
        ),
    );
    assert!(pass, "drop {worst_drop:.3e}, mismatch {worst_variance_mismatch:.3e}");
}

#[test]
fn criterion_08_diploid_reduction() {
    let mut rng = rng(108);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let space = random_space(&mut rng);
        let fitness = random_fitness(&space, &mut rng);
        let omega = random_positive(&space, &mut rng)
            .scaled(rng.random_range(0.5..3.0))
            .unwrap();
        let hap = fitness.rhs(&omega).unwrap();
        let dip = fitness.diploid_rhs(&omega).unwrap();
        worst = worst.max(max_abs_diff(hap.weights(), dip.weights()));
    }
    let pass = worst < 1e-12;
    report(
        "08",
        "diploid right-hand side reduces to the haploid one",
        pass,
        &format!("max difference {worst:.3e} < 1e-12"),
    );
    assert!(pass, "max difference {worst:.3e}");
}

#[test]
fn criterion_09_product_equilibria() {
    let mut rng = rng(109);
    let mut worst_distance = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut worst_product_defect = 0.0f64;
    for _ in 0..5 {
        let space = random_space(&mut rng);
        let initial = random_probability(&space, &mut rng);
        let rates = RecombinationRates::new(
            (0..space.n_links()).map(|_| rng.random_range(0.5..1.5)).collect(),
        )
        .unwrap();
        // Strictly positive off-diagonals keep every site operator
        // irreducible, with or without the fitness part.
        let mutation = random_mutation(&space, &mut rng);
        let fitness = random_fitness(&space, &mut rng);
        let model = ModelSpec::new(
            space.clone(),
            rates,
            Some(mutation),
            Some(fitness),
            initial,
        )
        .unwrap();
        let report = equilibrium(&model).unwrap();
        assert!(report.reducible_sites.is_empty());
        worst_residual = worst_residual.max(report.rhs_residual);

        // Complete product measure: every T_G with G != L annihilates it.
        for g in space.all_link_sets() {
            if g.is_full() {
                continue;
            }
            worst_product_defect = worst_product_defect
                .max(t_operator(&report.measure, g).unwrap().variation_norm());
        }

        let traj = solve_combined(&model, &[0.0, 50.0]).unwrap();
        let distance = traj.states[1]
            .as_signed()
            .sub(report.measure.as_signed())
            .variation_norm();
        worst_distance = worst_distance.max(distance);
    }
    let pass = worst_distance < 1e-6 && worst_residual < 1e-8 && worst_product_defect < 1e-10;
    report(
        "09",
        "long-time states reach the product equilibrium",
        pass,
        &format!(
            "distance at t=50 {worst_distance:.3e} < 1e-6, stationarity residual \
             {worst_residual:.3e} < 1e-8, product defect {worst_product_defect:.3e}"
        ),
    );
    assert!(
        pass,
        "distance {worst_distance:.3e}, residual {worst_residual:.3e}, \
         product defect {worst_product_defect:.3e}"
    );
}

#[test]
fn criterion_10_partition_transforms() {
    let mut rng = rng(110);

    // Moebius sum law, exhaustively for up to 5 elements.
    for k in 1..=5usize {
        let all: Vec<SetPartition> = partitions_of(k).unwrap().collect();
        for a in &all {
            for c in &all {
                if !c.is_refinement_of(a) {
                    continue;
                }
                let sum: i64 = all
                    .iter()
                    .filter(|b| c.is_refinement_of(b) && b.is_refinement_of(a))
                    .map(|b| moebius_partition(b, a))
                    .sum();
                assert_eq!(sum, if a == c { 1 } else { 0 }, "k={k}");
            }
        }
    }

    // Transform roundtrip on random tables.
    let mut worst = 0.0f64;
    for k in 1..=5usize {
        for _ in 0..5 {
            let f = MomentTable::from_fn(k, |_| rng.random_range(-2.0..2.0)).unwrap();
            let back =
                moments_from_correlations(&correlations_from_moments(&f).unwrap()).unwrap();
            for mask in 1..(1u32 << k) {
                worst = worst.max((back.get(mask) - f.get(mask)).abs());
            }
        }
    }

    // The five three-element expansion coefficients, read off symbolically
    // from the Moebius function: +1 (whole set), +2 (singletons), -1 for the
    // three pair splits; and the inverse expansion weighs every partition
    // with +1 by construction.
    let top = SetPartition::trivial(3);
    assert_eq!(moebius_partition(&top, &top), 1);
    assert_eq!(moebius_partition(&SetPartition::singletons(3), &top), 2);
    let mut minus_ones = 0;
    for p in partitions_of(3).unwrap() {
        let mu = moebius_partition(&p, &top);
        if mu == -1 {
            assert_eq!(p.n_blocks(), 2);
            minus_ones += 1;
        }
    }
    assert_eq!(minus_ones, 3);

    let pass = worst < 1e-12;
    report(
        "10",
        "partition moebius law and transform roundtrip",
        pass,
        &format!("roundtrip error {worst:.3e} < 1e-12, expansion coefficients (+1,+2,-1,-1,-1)"),
    );
    assert!(pass, "roundtrip error {worst:.3e}");
}

#[test]
fn criterion_11_two_locus_sanity() {
    let space = TypeSpace::new(&[2, 2]).unwrap();
    let omega0 = Measure::new(space.clone(), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
    let rates = RecombinationRates::new(vec![1.0]).unwrap();
    let model = ModelSpec::new(space.clone(), rates.clone(), None, None, omega0.clone()).unwrap();

    // Closed form: D(t) = 0.25 e^{-t} and entry (0,0) = 0.375 at t = ln 2.
    let mut worst_closed = 0.0f64;
    for t in [0.0, 0.25, 2.0f64.ln(), 1.5, 4.0] {
        let state = solve_recombination(&omega0, t, &rates).unwrap();
        let table = linkage_disequilibria(&state, &[0, 1]).unwrap();
        worst_closed = worst_closed.max((table.entries[0].1 - 0.25 * (-t).exp()).abs());
    }
    let at_ln2 = solve_recombination(&omega0, 2.0f64.ln(), &rates).unwrap();
    worst_closed = worst_closed.max((at_ln2.weights()[0] - 0.375).abs());

    // Oracle: same facts at RK4 accuracy.
    let ln2 = 2.0f64.ln();
    let steps = (ln2 / 1e-3).floor();
    let dt = ln2 / steps; // land exactly on ln 2
    let traj = integrate_rk4(&model, ln2, dt).unwrap();
    let last = traj.states.last().unwrap();
    let mut worst_oracle = (last.weights()[0] - 0.375f64).abs();
    let table = linkage_disequilibria(last, &[0, 1]).unwrap();
    worst_oracle = worst_oracle.max((table.entries[0].1 - 0.25 * (-ln2).exp()).abs());

    let pass = worst_closed < 1e-9 && worst_oracle < 1e-6;
    report(
        "11",
        "two-locus decay sanity",
        pass,
        &format!("closed-form error {worst_closed:.3e} < 1e-9, oracle error {worst_oracle:.3e} < 1e-6"),
    );
    assert!(pass, "closed {worst_closed:.3e}, oracle {worst_oracle:.3e}");
}

#[test]
fn full_rhs_mass_vanishes_on_random_models() {
    // Shared plumbing for several criteria; checked separately so a failure
    // points at the right-hand side rather than a solver.
    let mut rng = rng(112);
    for _ in 0..10 {
        let space = random_space(&mut rng);
        let model = ModelSpec::new(
            space.clone(),
            random_rates(&space, &mut rng),
            Some(random_mutation(&space, &mut rng)),
            Some(random_fitness(&space, &mut rng)),
            random_probability(&space, &mut rng),
        )
        .unwrap();
        let omega = random_positive(&space, &mut rng);
        assert!(full_rhs(&model, &omega).unwrap().mass().abs() < 1e-12);
    }
}
