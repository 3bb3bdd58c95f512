mod common;

use commit_core::metrics::{
    activity_matrix, conversation_starts, cox_fit, death_day, gini, gini_counts,
    km_survivor_counts, log_message_summary, logistic_fit, median, message_counts,
    partial_log_likelihood, score_and_information, survival_times, two_day_fulfillment,
    ActivityMatrix, ActivityRow, CoxObservation, Design, MetricError,
};
use commit_core::time::{days, hours};
use commit_core::Condition;
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn matrix_of(rows: Vec<Vec<bool>>) -> ActivityMatrix {
    let study_days = rows.first().map_or(21, |r| r.len() as u32);
    ActivityMatrix {
        study_days,
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(i, active)| ActivityRow {
                group_id: "g".into(),
                member_id: format!("m{i}").as_str().into(),
                condition: if i % 2 == 0 { Condition::Commit } else { Condition::Control },
                group_size: 1,
                active,
            })
            .collect(),
    }
}

#[test]
fn activity_marks_posting_days() {
    let log = posting_group("g", &[("a", &[(0, 1), (0, 5), (2, 3), (9, 23)]), ("b", &[])]);
    let m = activity_matrix(log.state(), 21);
    let a = &m.rows[0];
    let days: Vec<usize> = (0..21).filter(|&d| a.active[d]).collect();
    assert_eq!(days, vec![0, 2, 9]);
    assert_eq!(a.active_days(), 3);
    assert!(m.rows[1].active.iter().all(|x| !x));
}

#[test]
fn activity_recount_matches_random_logs() {
    let mut r = rng(7);
    for g in 0..20 {
        let members = r.random_range(1..=10);
        let plan: Vec<(String, Vec<(i64, i64)>)> = (0..members)
            .map(|i| {
                let n = r.random_range(0..30);
                let posts = (0..n).map(|_| (r.random_range(0..21), r.random_range(0..24))).collect();
                (format!("m{i}"), posts)
            })
            .collect();
        let refs: Vec<(&str, &[(i64, i64)])> =
            plan.iter().map(|(m, p)| (m.as_str(), p.as_slice())).collect();
        let log = posting_group(&format!("g{g}"), &refs);
        let m = activity_matrix(log.state(), 21);
        for ((_, posts), row) in plan.iter().zip(&m.rows) {
            for d in 0..21 {
                assert_eq!(row.active[d as usize], posts.iter().any(|p| p.0 == d));
            }
        }
    }
}

#[test]
fn survival_matches_direct_scan() {
    let mut r = rng(11);
    for _ in 0..1000 {
        let n = r.random_range(1..=10);
        let p = r.random_range(0.05..0.95);
        let rows: Vec<Vec<bool>> = (0..n).map(|_| random_activity(&mut r, 21, p)).collect();
        let m = matrix_of(rows.clone());
        let mut prev: Option<Vec<u32>> = None;
        for w in [3u32, 5, 7, 9, 11] {
            let data = survival_times(&m, w);
            for (row, rec) in rows.iter().zip(&data.rows) {
                let oracle = death_day_scan(row, w as usize);
                assert_eq!(rec.death_day, oracle);
                assert_eq!(rec.duration, oracle.map_or(21, |d| d + 1));
            }
            let deaths: Vec<_> = data.rows.iter().map(|r| r.death_day).collect();
            assert_eq!(km_survivor_counts(&data), km_brute(&deaths, 21));
            let durations: Vec<u32> = data.rows.iter().map(|r| r.duration).collect();
            if let Some(p) = &prev {
                assert!(p.iter().zip(&durations).all(|(a, b)| b >= a));
            }
            prev = Some(durations);
        }
    }
}

#[test]
fn gini_matches_pairwise_formula() {
    let mut r = rng(3);
    for _ in 0..1000 {
        let n = r.random_range(1..=30);
        let mut x: Vec<f64> = (0..n).map(|_| r.random_range(0..50) as f64).collect();
        if x.iter().all(|v| *v == 0.0) {
            x[0] = 1.0;
        }
        let g = gini(&x).unwrap();
        assert!((g - gini_pairwise(&x)).abs() < 1e-9);
        assert!((0.0..1.0).contains(&g));
    }
    assert!((gini_counts(&[5, 0, 0, 0, 0]).unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(gini_counts(&[0, 0]), Err(MetricError::NoContributions));
}

proptest! {
    #[test]
    fn gini_is_scale_invariant(x in prop::collection::vec(0u32..100, 1..40), c in 0.01f64..1000.0) {
        prop_assume!(x.iter().any(|v| *v > 0));
        let a: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v * c).collect();
        prop_assert!((gini(&a).unwrap() - gini(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn death_day_scan_agrees(active in prop::collection::vec(any::<bool>(), 0..40), w in 1u32..15) {
        prop_assert_eq!(death_day(&active, w), death_day_scan(&active, w as usize));
    }
}

#[test]
fn cox_matches_grid_search_on_small_fixtures() {
    let fixed = vec![
        obs(1.0, true, 0.0),
        obs(2.0, true, 1.0),
        obs(3.0, true, 0.0),
        obs(4.0, false, 1.0),
    ];
    let fit = cox_fit(&fixed).unwrap();
    assert!((fit.beta - cox_grid_argmax(&fixed, -5.0, 5.0, 1e-4)).abs() < 1e-3);

    let mut r = rng(19);
    let mut checked = 0;
    while checked < 40 {
        let n = r.random_range(4..=8);
        let o: Vec<CoxObservation> = (0..n)
            .map(|_| obs(r.random_range(1..=6) as f64, r.random_bool(0.7), r.random_range(0..2) as f64))
            .collect();
        let Ok(fit) = cox_fit(&o) else { continue };
        let grid = cox_grid_argmax(&o, -6.0, 6.0, 1e-4);
        // monotone likelihoods have no interior maximum
        if !fit.converged || grid.abs() > 5.9 {
            continue;
        }
        assert!((fit.beta - grid).abs() < 1e-3, "beta {} grid {grid} on {o:?}", fit.beta);
        assert!((partial_log_likelihood(&o, 0.37) - breslow_ll(&o, 0.37)).abs() < 1e-9);
        checked += 1;
    }
}

#[test]
fn cox_symmetric_data_gives_zero() {
    let base = [(2.0, true), (3.0, false), (5.0, true), (5.0, true), (8.0, false)];
    let o: Vec<CoxObservation> = base
        .iter()
        .flat_map(|&(t, e)| [obs(t, e, 0.0), obs(t, e, 1.0)])
        .collect();
    assert!(cox_fit(&o).unwrap().beta.abs() < 1e-6);
}

#[test]
fn cox_recovers_known_hazard_ratio() {
    let o = synthetic_cohort(2024, 200, 0.5);
    let fit = cox_fit(&o).unwrap();
    assert!(fit.converged);
    assert!((fit.beta - 0.5f64.ln()).abs() < 0.15, "beta {}", fit.beta);
    assert!(fit.hazard_ratio < 1.0);
    assert!(fit.r_squared > 0.0 && fit.r_squared < fit.max_r_squared);
}

#[test]
fn cox_score_matches_finite_differences() {
    let o = synthetic_cohort(5, 60, 0.7);
    let fit = cox_fit(&o).unwrap();
    let (u, _) = score_and_information(&o, fit.beta);
    assert!(u.abs() < 1e-6);
    let h = 1e-5;
    for b in [-0.8, 0.1, 1.3] {
        let (u, info) = score_and_information(&o, b);
        let fd = (breslow_ll(&o, b + h) - breslow_ll(&o, b - h)) / (2.0 * h);
        assert!((u - fd).abs() < 1e-5, "score {u} vs {fd}");
        let (up, _) = score_and_information(&o, b + h);
        let (um, _) = score_and_information(&o, b - h);
        assert!((info + (up - um) / (2.0 * h)).abs() < 1e-4);
    }
}

#[test]
fn cox_without_events_is_an_error() {
    let o = [obs(1.0, false, 0.0), obs(2.0, false, 1.0)];
    assert_eq!(cox_fit(&o), Err(MetricError::NoEvents));
}

#[test]
fn logistic_recovers_log_odds_ratio() {
    let fit = logistic_fit(&two_by_two(30, 10, 15, 25)).unwrap();
    let c = fit.coefficient("condition").unwrap().estimate;
    assert!((c - 5f64.ln()).abs() < 1e-6);
    let mut r = rng(23);
    for _ in 0..50 {
        let [a, b, c, d] = [0; 4].map(|_| r.random_range(1..60usize));
        let fit = logistic_fit(&two_by_two(a, b, c, d)).unwrap();
        let oracle = ((a * d) as f64 / (b * c) as f64).ln();
        assert!((fit.coefficient("condition").unwrap().estimate - oracle).abs() < 1e-6);
    }
}

fn null_design(seed: u64) -> Design {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..500).map(|i| vec![1.0, (i % 2) as f64]).collect();
    let y: Vec<f64> = (0..500).map(|_| r.random_bool(0.4) as u8 as f64).collect();
    Design::from_rows(&["intercept", "condition"], &rows, &y).unwrap()
}

#[test]
fn logistic_null_effect_is_small() {
    // the standard error here is about 0.18, so 0.2 is a tight bound for
    // any single draw; see the calibration test below
    let fit = logistic_fit(&null_design(2)).unwrap();
    assert!(fit.coefficient("condition").unwrap().estimate.abs() < 0.2);
}

#[test]
fn logistic_null_effect_is_calibrated() {
    let estimates: Vec<(f64, f64)> = (0..20)
        .map(|seed| {
            let fit = logistic_fit(&null_design(seed)).unwrap();
            let c = fit.coefficient("condition").unwrap();
            (c.estimate, c.standard_error.unwrap())
        })
        .collect();
    let mean = estimates.iter().map(|e| e.0).sum::<f64>() / 20.0;
    assert!(mean.abs() < 0.1, "mean {mean}");
    let within = estimates.iter().filter(|(b, se)| b.abs() < 2.0 * se).count();
    assert!(within >= 18, "{within} of 20 within two standard errors");
}

#[test]
fn logistic_identical_outcomes_error() {
    let d = two_by_two(5, 0, 7, 0);
    assert_eq!(logistic_fit(&d), Err(MetricError::Separation));
}

#[test]
fn conversation_starts_rules() {
    // a at 0h, b at 1h (reply), a at 14h (13h gap, start), b at 26h (12h gap, start)
    let log = posting_group("g", &[("a", &[(0, 0), (0, 14)]), ("b", &[(0, 1), (1, 2)])]);
    let starts = conversation_starts(log.state(), hours(12), None);
    assert_eq!(starts[0].1, 2);
    assert_eq!(starts[1].1, 1);
}

#[test]
fn conversation_starts_bounded_by_messages() {
    let mut r = rng(31);
    for g in 0..50 {
        let plan: Vec<(String, Vec<(i64, i64)>)> = (0..r.random_range(1..6))
            .map(|i| {
                let posts = (0..r.random_range(0..15))
                    .map(|_| (r.random_range(0..21), r.random_range(0..24)))
                    .collect();
                (format!("m{i}"), posts)
            })
            .collect();
        let refs: Vec<(&str, &[(i64, i64)])> =
            plan.iter().map(|(m, p)| (m.as_str(), p.as_slice())).collect();
        let log = posting_group(&format!("g{g}"), &refs);
        let starts = conversation_starts(log.state(), hours(12), None);
        let counts = message_counts(log.state(), None);
        for (s, c) in starts.iter().zip(&counts) {
            assert!(s.1 <= c.1);
        }
        let total: u64 = counts.iter().map(|c| c.1).sum();
        if total > 0 {
            assert!(starts.iter().map(|s| s.1).sum::<u64>() >= 1);
        }
    }
}

#[test]
fn two_day_buckets_match_brute_force() {
    let daily: Vec<(i64, i64)> = (0..21).map(|d| (d, 10)).collect();
    let mut r = rng(41);
    let random: Vec<(i64, i64)> = (0..25).map(|_| (r.random_range(0..21), r.random_range(0..24))).collect();
    let log = posting_group("g", &[("daily", &daily), ("silent", &[]), ("random", &random)]);
    let periods = two_day_fulfillment(log.state(), hours(48), days(21));
    assert_eq!(periods[0].counts.len(), 11);
    assert!(periods[0].counts[..10].iter().all(|&c| c >= 2));
    assert_eq!(periods[0].median, 2.0);
    assert_eq!(periods[1].median, 0.0);
    let mut brute = vec![0u64; 11];
    for (d, _) in &random {
        brute[(*d / 2) as usize] += 1;
    }
    assert_eq!(periods[2].counts, brute);
    let as_f: Vec<f64> = brute.iter().map(|&c| c as f64).collect();
    assert_eq!(Some(periods[2].median), median(&as_f));
}

#[test]
fn message_summary_medians_match_sorting() {
    let log = posting_group(
        "g",
        &[("a", &[(0, 1); 8]), ("b", &[]), ("c", &[(1, 1), (2, 2)]), ("d", &[(3, 3)])],
    );
    let counts = message_counts(log.state(), None);
    let s = log_message_summary(&counts);
    assert_eq!(s.members[0].messages, 8);
    let mut sorted: Vec<u64> = counts.iter().map(|c| c.1).collect();
    sorted.sort();
    assert_eq!(s.median_messages, Some((sorted[1] + sorted[2]) as f64 / 2.0));
    let mut logs: Vec<f64> = sorted.iter().map(|&c| (c as f64 + 1.0).ln()).collect();
    logs.sort_by(f64::total_cmp);
    assert_eq!(s.median_log_messages, Some((logs[1] + logs[2]) / 2.0));
}

