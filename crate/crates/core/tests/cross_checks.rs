//! Independent-route cross-checks: closed forms vs constructed tables,
//! LP certificates vs direct enumeration, Monte Carlo vs quantum
//! predictions, boosted intervals vs lab-frame intervals.

use bellaudit::bell::{
    chain_phases, chained_expression, chsh, evaluate, local_bound_by_enumeration,
    quantum_chained_value,
};
use bellaudit::correlations::CorrelationTable;
use bellaudit::franson::{quantum_postselected_table, simulate_run, FransonConfig};
use bellaudit::lhv::{build_comm_model, local_polytope_membership, CommDirection, Membership};
use bellaudit::numeric::RngStream;
use bellaudit::spacetime::{
    interval_squared, lorentz_boost, Event, EventKind, Side, SPEED_OF_LIGHT,
};

/// Ideal quantum table over the given phases: E(x,y) = cos(alpha_x + beta_y).
fn phase_table(alphas: &[f64], betas: &[f64]) -> CorrelationTable {
    CorrelationTable::from_fn(alphas.len(), betas.len(), 2, 2, |x, y, a, b| {
        let sign = if a == b { 1.0 } else { -1.0 };
        (1.0 + sign * (alphas[x] + betas[y]).cos()) / 4.0
    })
    .unwrap()
}

#[test]
fn chained_closed_form_matches_explicit_tables() {
    for n in 2..=6 {
        let expr = chained_expression(n).unwrap();
        let (alphas, betas) = chain_phases(n).unwrap();
        let via_table = evaluate(&expr, &phase_table(&alphas, &betas)).unwrap();
        let closed = quantum_chained_value(n).unwrap();
        assert!(
            (via_table - closed).abs() < 1e-9,
            "n = {n}: table route {via_table} vs closed form {closed}"
        );
    }
}

#[test]
fn pr_box_breaks_chsh_and_the_local_polytope_in_the_same_breath() {
    let pr = CorrelationTable::pr_box();
    let expr = chsh();
    // Direct route: CHSH = 4 against the enumerated bound 2 (16 strategies).
    let value = evaluate(&expr, &pr).unwrap();
    assert!((value - 4.0).abs() < 1e-12);
    let bound = local_bound_by_enumeration(&expr).unwrap();
    assert!((bound - 2.0).abs() < 1e-12);
    // LP route: infeasible with a certificate that separates by its own
    // enumeration check.
    match local_polytope_membership(&pr).unwrap() {
        Membership::Infeasible(cert) => {
            assert!(cert.value_on_table > cert.max_over_strategies + 1e-7);
            assert!(cert.max_over_strategies <= cert.threshold + 1e-7);
        }
        Membership::Feasible(_) => panic!("the PR box is not local"),
    }
}

#[test]
fn one_way_communication_explains_the_tsirelson_table() {
    // CHSH phases at the quantum maximum: S = 2 sqrt 2. The chain phase
    // recipe aligns with the chained coefficient layout, which is CHSH with
    // the x rows swapped — so swap them back.
    let (mut alphas, betas) = chain_phases(2).unwrap();
    alphas.reverse();
    let table = phase_table(&alphas, &betas);
    let s = evaluate(&chsh(), &table).unwrap();
    assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);

    for direction in [CommDirection::AReceivesFromB, CommDirection::BReceivesFromA] {
        let model = build_comm_model(&table, direction).unwrap();
        let back = model.predict(2, 2).unwrap();
        assert!(
            table.max_abs_difference(&back).unwrap() < 1e-12,
            "direction {direction:?}"
        );
    }
}

#[test]
fn boosts_preserve_a_thousand_random_intervals() {
    let mut rng = RngStream::new(0x1BEC, 0);
    let mut checked = 0u32;
    while checked < 1000 {
        let e1 = Event::new(
            "e1",
            EventKind::Outcome,
            Side::A,
            [
                (rng.next_f64() - 0.5) * 2e4,
                (rng.next_f64() - 0.5) * 2e4,
                (rng.next_f64() - 0.5) * 2e4,
            ],
            rng.next_f64() * 1e-4,
        );
        let e2 = Event::new(
            "e2",
            EventKind::Outcome,
            Side::B,
            [
                (rng.next_f64() - 0.5) * 2e4,
                (rng.next_f64() - 0.5) * 2e4,
                (rng.next_f64() - 0.5) * 2e4,
            ],
            rng.next_f64() * 1e-4,
        );
        let s2 = interval_squared(&e1, &e2);
        let dt = e1.time - e2.time;
        let mut dx2 = 0.0;
        for k in 0..3 {
            let d = e1.position[k] - e2.position[k];
            dx2 += d * d;
        }
        let magnitude = (SPEED_OF_LIGHT * dt) * (SPEED_OF_LIGHT * dt) + dx2;
        // Near-null pairs are dominated by cancellation noise; the interval
        // there is *defined* by the tolerance band, not measured.
        if s2.abs() < 1e-3 * magnitude {
            continue;
        }
        checked += 1;
        let dir = [
            rng.next_f64() - 0.5,
            rng.next_f64() - 0.5,
            rng.next_f64() - 0.5,
        ];
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let speed = rng.next_f64() * 0.99;
        let beta = [
            dir[0] / norm * speed,
            dir[1] / norm * speed,
            dir[2] / norm * speed,
        ];
        let b1 = lorentz_boost(&e1, beta).unwrap();
        let b2 = lorentz_boost(&e2, beta).unwrap();
        let s2b = interval_squared(&b1, &b2);
        assert!(
            (s2b - s2).abs() / s2.abs().max(1.0) < 1e-9,
            "pair {checked}: {s2} -> {s2b} under beta {beta:?}"
        );
    }
}

#[test]
fn kept_subensembles_track_the_quantum_table_across_random_configs() {
    let mut rng = RngStream::new(0x20C0, 0);
    for trial in 0..20 {
        let nx = 1 + rng.next_below(3) as usize;
        let ny = 1 + rng.next_below(2) as usize;
        let config = FransonConfig {
            delta_t: 1.2e-9,
            fiber_length_a: 17_500.0,
            fiber_length_b: 17_500.0,
            refractive_index: 1.468,
            phases_a: (0..nx)
                .map(|_| rng.next_f64() * std::f64::consts::TAU)
                .collect(),
            phases_b: (0..ny)
                .map(|_| rng.next_f64() * std::f64::consts::TAU)
                .collect(),
            visibility: rng.next_f64(),
            detector_efficiency: 0.5 + rng.next_f64() * 0.5,
            coincidence_window: 0.6e-9,
            n_pairs: 100_000,
            seed: rng.next_u64(),
        };
        let summary = simulate_run(&config, 4).unwrap();
        let quantum = quantum_postselected_table(&config).unwrap();
        for (x, row) in summary.counts.iter().enumerate() {
            for (y, cell) in row.iter().enumerate() {
                let total: u64 = cell.iter().flatten().sum();
                assert!(total > 0, "trial {trial}: empty cell ({x},{y})");
                for a in 0..2 {
                    for b in 0..2 {
                        let p = quantum.prob(x, y, a, b).unwrap();
                        let freq = cell[a][b] as f64 / total as f64;
                        let sigma = (p * (1.0 - p) / total as f64).sqrt();
                        assert!(
                            (freq - p).abs() <= 4.0 * sigma + 1e-12,
                            "trial {trial} cell ({x},{y},{a},{b}): {freq} vs {p} ± {sigma}"
                        );
                    }
                }
            }
        }
    }
}
