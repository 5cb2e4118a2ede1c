use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use matround_core::baselines::brute_force_best;
use matround_core::matroid::Matroid;
use matround_core::numeric::ToleranceModel;
use matround_core::schedules::{self, assign_parts, DegreeConstraint, LinearRow, PartLabel, ScheduleParams};
use matround_core::walk::{Structure, WalkConfig};

fn random_rows(r: &mut ChaCha8Rng, m: usize, y: &[f64], p: f64) -> Vec<LinearRow> {
    (0..m)
        .map(|_| {
            let a: Vec<f64> = y.iter().map(|_| if r.gen::<f64>() < p { 1.0 } else { 0.0 }).collect();
            let b = a.iter().zip(y).map(|(a, y)| a * y).sum();
            LinearRow { a, b }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn labels_are_the_argmin(b in prop::collection::vec(0.0f64..5000.0, 1..40), n in 2usize..2000, delta in 1usize..64) {
        let p = ScheduleParams::default();
        let a_max = vec![1.0; b.len()];
        let labels = assign_parts(&b, &a_max, n, delta, &p);
        prop_assert_eq!(&labels, &assign_parts(&b, &a_max, n, delta, &p));
        for (part, menu) in &labels {
            let v = menu.values();
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let first = v.iter().position(|x| *x == min).unwrap();
            prop_assert_eq!(*part, [PartLabel::M1, PartLabel::M2, PartLabel::M3, PartLabel::M4][first]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn full_rounding_is_integral_and_never_beats_the_oracle(seed in 0u64..10_000) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = r.gen_range(6..=12);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
        let m = r.gen_range(1..=5);
        let rows = random_rows(&mut r, m, &y, 0.5);
        let out = schedules::round_full(&y, &rows, &Structure::Free, &WalkConfig::practical(), &ScheduleParams::default(), seed).unwrap();
        prop_assert!(out.x.iter().all(|v| *v == 0.0 || *v == 1.0));
        let a: Vec<Vec<f64>> = rows.iter().map(|r| r.a.clone()).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
        let (opt, _) = brute_force_best(&a, &b, None).unwrap();
        prop_assert!(out.report.max_violation() >= opt - 1e-9);
        prop_assert_eq!(out.report.rows.len(), rows.len());
        prop_assert!(out.report.rows.iter().all(|r| r.ratio().is_finite()));
    }
}

#[test]
fn every_iteration_meets_the_lambda_condition() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let n = 128;
    let y: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    let rows = random_rows(&mut r, 128, &y, 0.3);
    let out = schedules::round_full(&y, &rows, &Structure::Free, &WalkConfig::practical(), &ScheduleParams::default(), 5).unwrap();
    assert!(!out.iterations.is_empty());
    for it in &out.iterations {
        assert!(it.lambda_sum < it.lambda_bound, "{} >= {}", it.lambda_sum, it.lambda_bound);
        assert!(it.walk.truncations <= it.fractional_before);
    }
    // geometric shrinkage of the fractional support
    assert!(out.iterations.windows(2).all(|w| w[1].fractional_before <= w[0].fractional_after));
}

#[test]
fn m1_rows_stay_within_a_constant_of_sqrt_j() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let n = 128;
    let y: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    let rows = random_rows(&mut r, 128, &y, 0.5);
    let out = schedules::round_full(&y, &rows, &Structure::Free, &WalkConfig::practical(), &ScheduleParams::default(), 11).unwrap();
    let c = out
        .report
        .rows
        .iter()
        .filter(|r| r.part == PartLabel::M1)
        .map(|r| r.violation / ((r.constraint_id + 1) as f64).sqrt())
        .fold(0.0, f64::max);
    println!("measured M1 constant {c:.3}");
    assert!(c <= 25.0);
}

#[test]
fn degmat_cost_row_barely_moves_while_walking() {
    // 24 parts of size 4, one element each: y = 1/4 everywhere, f = 96
    let n = 96;
    let parts: Vec<Vec<usize>> = (0..24).map(|p| (4 * p..4 * p + 4).collect()).collect();
    let m = Matroid::partition(n, parts, vec![1; 24]).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let costs: Vec<f64> = (0..n).map(|_| r.gen_range(0..10) as f64).collect();
    let y = vec![0.25; n];
    let cons: Vec<DegreeConstraint> = (0..24)
        .map(|_| {
            let set: Vec<usize> = (0..n).filter(|_| r.gen::<f64>() < 0.2).collect();
            let bound = set.len() as f64 * 0.25;
            DegreeConstraint { set, bound }
        })
        .collect();
    let lp: f64 = costs.iter().sum::<f64>() * 0.25;
    for seed in 0..3 {
        let out = schedules::degmat(&costs, &cons, &m, &y, &WalkConfig::practical(), &ScheduleParams::default(), seed).unwrap();
        assert!(!out.iterations.is_empty());
        let drift = (costs.iter().zip(&out.almost_integral).map(|(c, x)| c * x).sum::<f64>() - lp).abs();
        assert!(drift < 1.0, "drift {drift}");
        assert!(out.cost <= lp + 1.0);
        assert_eq!(out.base.len(), 24);
        assert!(m.is_independent(&out.base));
        assert!(m.in_base_polytope(&out.almost_integral, &ToleranceModel::default()).unwrap());
    }
}

#[test]
fn multicrit_only_returns_bases() {
    for seed in 0..8u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let m = Matroid::graphic(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3), (2, 4), (3, 0), (4, 1), (0, 1), (2, 3)]).unwrap();
        let costs: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| r.gen_range(1..10) as f64).collect()).collect();
        let budgets = vec![12.0, 12.0];
        if let Ok(out) = schedules::multicrit(&m, &costs, &budgets, 0.5, &WalkConfig::practical(), &ScheduleParams::default(), seed) {
            assert_eq!(out.base.len(), m.full_rank());
            assert!(m.is_independent(&out.base));
            let excess = costs
                .iter()
                .zip(&budgets)
                .map(|(c, b)| (out.base.iter().map(|&e| c[e]).sum::<f64>() / b - 1.0) / 0.5)
                .fold(0.0, f64::max);
            assert!((excess - out.measured_c).abs() < 1e-9);
        }
    }
}

#[test]
fn multicrit_reports_infeasible_budgets() {
    let m = Matroid::uniform(3, 2);
    let err = schedules::multicrit(&m, &[vec![10.0, 10.0, 10.0]], &[1.0], 0.5, &WalkConfig::practical(), &ScheduleParams::default(), 0);
    assert!(matches!(err, Err(schedules::ScheduleError::Infeasible(_))));
}

#[test]
fn group_sparse_variant_changes_m4_multipliers() {
    let p = ScheduleParams::default();
    let plain = schedules::lambda_for(PartLabel::M4, 1, 100, 4, 4.0, &p);
    let grouped = schedules::lambda_for(PartLabel::M4, 1, 100, 4, 2.0 * 4.0, &p);
    assert_eq!(plain.finite().unwrap() * 2f64.sqrt(), grouped.finite().unwrap());
}
