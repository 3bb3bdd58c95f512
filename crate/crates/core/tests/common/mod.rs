//! Brute-force oracles and fixture builders shared by the integration tests.
#![allow(dead_code)]

use commit_core::metrics::{CoxObservation, Design};
use commit_core::time::{self, days, hours, Timestamp};
use commit_core::{Condition, Event, GroupConfig, GroupLog, GroupState, MessageKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

pub fn epoch() -> Timestamp {
    time::parse("2024-03-01T00:00:00.000Z").unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`, straight from the definition.
pub fn gini_pairwise(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

/// First day whose trailing `w`-day window is entirely inactive.
pub fn death_day_scan(active: &[bool], w: usize) -> Option<u32> {
    (0..active.len())
        .find(|&d| d + 1 >= w && active[d + 1 - w..=d].iter().all(|a| !a))
        .map(|d| d as u32)
}

pub fn km_brute(deaths: &[Option<u32>], study_days: u32) -> Vec<usize> {
    let mut out = Vec::new();
    for d in 0..study_days {
        let mut alive = 0;
        for death in deaths {
            match death {
                Some(x) if *x <= d => {}
                _ => alive += 1,
            }
        }
        out.push(alive);
    }
    out
}

/// Breslow partial log-likelihood written as the textbook double sum.
pub fn breslow_ll(obs: &[CoxObservation], beta: f64) -> f64 {
    let mut times: Vec<f64> = obs.iter().filter(|o| o.event).map(|o| o.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut ll = 0.0;
    for t in times {
        let dying: Vec<&CoxObservation> = obs.iter().filter(|o| o.event && o.time == t).collect();
        let risk: f64 = obs.iter().filter(|o| o.time >= t).map(|o| (beta * o.x).exp()).sum();
        for o in &dying {
            ll += beta * o.x;
        }
        ll -= dying.len() as f64 * risk.ln();
    }
    ll
}

/// Grid maximiser of `breslow_ll` over `[lo, hi]`.
pub fn cox_grid_argmax(obs: &[CoxObservation], lo: f64, hi: f64, step: f64) -> f64 {
    let steps = ((hi - lo) / step).round() as i64;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=steps {
        let b = lo + i as f64 * step;
        let ll = breslow_ll(obs, b);
        if ll > best.0 {
            best = (ll, b);
        }
    }
    best.1
}

pub fn random_activity(r: &mut impl Rng, days: usize, p: f64) -> Vec<bool> {
    (0..days).map(|_| r.random_bool(p)).collect()
}

/// A CONTROL group whose members post at the given (day, hour) offsets
/// from the epoch. Posts are applied in time order through a real log.
pub fn posting_group(id: &str, posts: &[(&str, &[(i64, i64)])]) -> GroupLog {
    posting_group_with(id, Condition::Control, posts)
}

pub fn posting_group_with(id: &str, condition: Condition, posts: &[(&str, &[(i64, i64)])]) -> GroupLog {
    let cfg = GroupConfig::new(id, id, condition, epoch());
    let mut log = GroupLog::create(cfg, epoch()).unwrap();
    for (m, _) in posts {
        log.execute(epoch(), |s| s.join(&(*m).into(), m, epoch())).unwrap();
    }
    let mut all: Vec<(Timestamp, &str)> = posts
        .iter()
        .flat_map(|(m, ts)| ts.iter().map(move |(d, h)| (epoch() + days(*d) + hours(*h), *m)))
        .collect();
    all.sort();
    for (t, m) in all {
        let member = m.into();
        if condition == Condition::Commit {
            let k = log.state().cycle_of(t).unwrap();
            log.execute(t, |s| {
                s.commit(&member, k, commit_core::CommitVia::Button, false, t)
            })
            .unwrap();
        }
        log.execute(t, |s| s.post_message(&member, MessageKind::Text, "hi", t))
            .unwrap();
    }
    log
}

pub fn message_times(state: &GroupState) -> Vec<Timestamp> {
    state.messages().iter().map(|m| m.sent_at).collect()
}

pub fn is_message(e: &Event) -> bool {
    matches!(e, Event::Message { .. })
}

pub fn obs(time: f64, event: bool, x: f64) -> CoxObservation {
    CoxObservation { time, event, x }
}

/// Exponential survival times with the given hazard ratio for odd-indexed
/// subjects, censored at 30.
pub fn synthetic_cohort(seed: u64, n: usize, hazard_ratio: f64) -> Vec<CoxObservation> {
    let mut r = rng(seed);
    let base = Exp::new(0.1).unwrap();
    let treated = Exp::new(0.1 * hazard_ratio).unwrap();
    (0..n)
        .map(|i| {
            let x = (i % 2) as f64;
            let t: f64 = if x == 1.0 { treated.sample(&mut r) } else { base.sample(&mut r) };
            // administrative censoring at 30
            obs(t.min(30.0), t < 30.0, x)
        })
        .collect()
}

pub fn two_by_two(a: usize, b: usize, c: usize, d: usize) -> Design {
    // rows x=1: a positive, b negative; x=0: c positive, d negative
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (x, n, yv) in [(1.0, a, 1.0), (1.0, b, 0.0), (0.0, c, 1.0), (0.0, d, 0.0)] {
        for _ in 0..n {
            rows.push(vec![1.0, x]);
            y.push(yv);
        }
    }
    Design::from_rows(&["intercept", "condition"], &rows, &y).unwrap()
}
