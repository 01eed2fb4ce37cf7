//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test -p swucrl --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use swucrl::bounds::{corollary1_bound, optimal_window, theorem1_bound};
use swucrl::evi::{extended_value_iteration, inner_max_transition, ConfidenceModel};
use swucrl::harness::{proposition1_property_test, run_experiment, AggregateResult, DiameterMode, ExperimentSpec};
use swucrl::solvers::{diameter, optimal_gain};
use swucrl::window::SlidingWindowBuffer;
use swucrl::{AgentKind, MdpConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Fails the criterion if it ran longer than `limit`.
fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = f();
    let took = start.elapsed();
    v.detail = format!("{} [{:.2?}, limit {:?}]", v.detail, took, limit);
    if took > limit {
        v.pass = false;
    }
    v
}

fn criterion1() -> Verdict {
    let mut r = rng(1);
    let (mut gain_err, mut diam_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (s_n, a_n) = (r.random_range(1..=4), r.random_range(1..=3));
        let c = MdpConfig::random(s_n, a_n, &mut r);
        let gain = match optimal_gain(&c, 1e-10) {
            Ok(g) => g.gain,
            Err(e) => return verdict(false, format!("optimal_gain failed: {e}")),
        };
        for g in brute_gain(&c) {
            gain_err = gain_err.max((gain - g).abs());
        }
        let d = match diameter(&c) {
            Ok(d) => d.diameter,
            Err(e) => return verdict(false, format!("diameter failed: {e}")),
        };
        diam_err = diam_err.max((d - brute_diameter(&c)).abs());
    }
    verdict(
        gain_err <= 1e-6 && diam_err <= 1e-6,
        format!("100 MDPs: max |gain err| {gain_err:.2e}, max |diameter err| {diam_err:.2e} (tol 1e-6)"),
    )
}

fn criterion2() -> Verdict {
    let mut r = rng(2);
    let acc = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (s_n, a_n) = (r.random_range(1..=5), r.random_range(1..=3));
        let c = MdpConfig::random(s_n, a_n, &mut r);
        let exact = optimal_gain(&c, 1e-10).unwrap().gain;
        let evi = extended_value_iteration(&ConfidenceModel::exact(&c), acc).unwrap().optimistic_gain;
        worst = worst.max((evi - exact).abs());
    }
    let mut low = f64::INFINITY;
    for (s_n, a_n) in [(1, 1), (3, 2), (5, 3)] {
        let stats = SlidingWindowBuffer::new(s_n, a_n, 10).snapshot(1);
        let cm = ConfidenceModel::from_stats(&stats, 0.1).unwrap();
        low = low.min(extended_value_iteration(&cm, acc).unwrap().optimistic_gain);
    }
    verdict(
        worst <= acc + 1e-6 && low >= 1.0 - acc,
        format!("zero radii: max |evi - exact| {worst:.2e} (tol {:.0e}); empty counts: min gain {low:.9}", acc + 1e-6),
    )
}

fn criterion3() -> Verdict {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(1..=6);
        let p = random_distribution(&mut r, n);
        let radius = match r.random_range(0..5) {
            0 => 0.0,
            1 => 2.0,
            _ => r.random_range(0.0..2.2),
        };
        let u: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let q = inner_max_transition(&p, radius, &u);
        let got: f64 = q.iter().zip(&u).map(|(a, b)| a * b).sum();
        worst = worst.max((got - lp_inner_max(&p, radius, &u)).abs());
    }
    verdict(worst <= 1e-9, format!("1000 triples: max |objective - LP| {worst:.2e} (tol 1e-9)"))
}

fn experiment(changes: usize) -> AggregateResult {
    let spec = ExperimentSpec {
        states: 5,
        actions: 3,
        horizon: 100_000,
        changes,
        delta: 0.1,
        runs: 50,
        base_seed: 0,
        agents: vec![AgentKind::SwUcrl, AgentKind::Ucrl2R, AgentKind::Ucrl2Rw],
        diameter_mode: DiameterMode::Exact,
        ..Default::default()
    };
    run_experiment(&spec).expect("experiment runs")
}

fn finals(agg: &AggregateResult) -> [(f64, f64); 3] {
    [AgentKind::SwUcrl, AgentKind::Ucrl2Rw, AgentKind::Ucrl2R].map(|k| {
        let a = agg.agent(k).unwrap();
        (a.final_mean(), a.final_stderr())
    })
}

fn criterion4(l4: &AggregateResult, l2: &AggregateResult) -> Verdict {
    let [(sw, sw_se), (rw, _), (r, r_se)] = finals(l4);
    let gap_se = (sw_se * sw_se + r_se * r_se).sqrt();
    let ordered = sw < rw && rw < r && r - sw > gap_se;
    let [(sw2, _), (rw2, _), (r2, _)] = finals(l2);
    let (lo, hi) = (sw2.min(rw2).min(r2), sw2.max(rw2).max(r2));
    let close = hi <= 1.5 * lo;
    let failed = l4.failures.len() + l2.failures.len();
    verdict(
        ordered && close && failed == 0,
        format!(
            "l=4 SW {sw:.0}±{sw_se:.0} RW {rw:.0} R {r:.0}±{r_se:.0} (SW<RW<R, R-SW > {gap_se:.0}: {ordered}); \
             l=2 SW {sw2:.0} RW {rw2:.0} R {r2:.0}, max/min {:.2} (<= 1.5: {close}); failed runs {failed}",
            hi / lo
        ),
    )
}

fn criterion5(runs: &[&AggregateResult]) -> Verdict {
    let audits: Vec<_> = runs.iter().flat_map(|a| &a.audits).filter(|a| a.admissible).collect();
    let total: usize = runs.iter().map(|a| a.audits.len()).sum();
    let bad = audits
        .iter()
        .filter(|a| a.episode_margin < 0.0 || a.weighted_visit_margin < 0.0)
        .count();
    let min_ep = audits.iter().map(|a| a.episode_margin).fold(f64::INFINITY, f64::min);
    let min_wv = audits.iter().map(|a| a.weighted_visit_margin).fold(f64::INFINITY, f64::min);
    let recount = runs.iter().flat_map(|a| &a.audits).all(|a| a.live_sum_matches);
    verdict(
        !audits.is_empty() && bad == 0 && recount,
        format!(
            "{} of {total} SW-UCRL runs admissible; violations {bad}; min margins: episodes {min_ep:.1}, weighted visits {min_wv:.1}; recount matches live sums: {recount}",
            audits.len()
        ),
    )
}

fn criterion6(l4: &AggregateResult) -> Verdict {
    let parts: Vec<String> = l4
        .bumps
        .iter()
        .map(|b| format!("c={} {:.4}->{:.4}", b.change_point, b.before, b.after))
        .collect();
    verdict(
        !l4.bumps.is_empty() && l4.bumps.iter().all(|b| b.holds),
        format!("W={} {}", l4.bump_window, parts.join(", ")),
    )
}

fn criterion7() -> Verdict {
    let report = proposition1_property_test(10_000, 50, 1000, 7).unwrap();
    verdict(
        report.passed(),
        format!("{} sequences, {} violations, max lhs/rhs {:.4}", report.trials, report.violations.len(), report.max_ratio),
    )
}

fn criterion8() -> Verdict {
    let mut worst_ratio = 0.0f64;
    let mut cases = 0;
    for &t in &[1e6, 1e7, 1e8, 1e9] {
        for &l in &[1.0, 2.0, 4.0, 8.0] {
            for &d in &[1.0, 2.5, 5.0] {
                for &(s, a) in &[(5.0, 3.0), (10.0, 4.0), (2.0, 2.0)] {
                    let w = optimal_window(t, l, d, s, a, 0.1);
                    if t / w.sqrt() < 100.0 {
                        continue;
                    }
                    cases += 1;
                    let ratio = theorem1_bound(t, w, l, d, s, a, 0.1) / corollary1_bound(t, l, d, s, a, 0.1);
                    worst_ratio = worst_ratio.max((ratio - 1.0).abs());
                }
            }
        }
    }
    let frozen = frozen_bound_cases();
    let worst_rel = frozen
        .iter()
        .map(|(_, got, want)| ((got - want) / want).abs())
        .fold(0.0f64, f64::max);
    verdict(
        cases > 0 && worst_ratio < 0.03 && worst_rel <= 1e-12,
        format!(
            "{cases} grid points: max |ratio - 1| {worst_ratio:.4} (tol 0.03); {} frozen values: max rel err {worst_rel:.1e} (tol 1e-12)",
            frozen.len()
        ),
    )
}

fn criterion9(runs: &[&AggregateResult]) -> Verdict {
    let audits: Vec<_> = runs.iter().flat_map(|a| &a.audits).collect();
    let over = audits.iter().filter(|a| a.episode_length_margin < 0).count();
    let min_margin = audits.iter().map(|a| a.episode_length_margin).min().unwrap_or(0);
    let longest = audits.iter().map(|a| a.max_episode_length).max().unwrap_or(0);
    verdict(
        !audits.is_empty() && over == 0,
        format!(
            "{} traces: longest episode {longest}, min W - length {min_margin}, runs over W {over}",
            audits.len()
        ),
    )
}

fn criterion10(runs: &[&AggregateResult]) -> Verdict {
    let mut details = Vec::new();
    let mut all_vacuous = true;
    for agg in runs {
        let spec = &agg.spec;
        let d = agg.diameters.iter().copied().fold(f64::INFINITY, f64::min);
        let w = *agg.windows.iter().min().unwrap() as f64;
        let t = spec.horizon as f64;
        let bound = theorem1_bound(t, w, spec.changes as f64, d, spec.states as f64, spec.actions as f64, spec.delta);
        all_vacuous &= bound > t;
        details.push(format!("l={} bound {:.3e} vs T {:.0e}", spec.changes, bound, t));
    }
    verdict(
        all_vacuous,
        format!(
            "regret bound exceeds the largest possible regret, so it is not checked; covered by 5, 8 and 9 ({})",
            details.join(", ")
        ),
    )
}

fn main() {
    let minute = Duration::from_secs(60);
    let mut results: Vec<(&str, Verdict)> = vec![
        ("1 exact solvers vs enumeration", timed(minute, criterion1)),
        ("2 EVI degeneracy", timed(minute, criterion2)),
        ("3 inner maximizer vs LP", timed(minute, criterion3)),
    ];

    let start = Instant::now();
    let l4 = experiment(4);
    let l2 = experiment(2);
    let took = start.elapsed();
    let mut v4 = criterion4(&l4, &l2);
    v4.detail = format!("{} [{took:.2?} for both experiments, limit 30m]", v4.detail);
    v4.pass &= took < Duration::from_secs(1800);
    results.push(("4 regret ordering", v4));
    let both = [&l4, &l2];
    results.push(("5 episode-count and weighted-visit audits", criterion5(&both)));
    results.push(("6 regret rises after changes", criterion6(&l4)));
    results.push(("7 summation inequality", timed(Duration::from_secs(10), criterion7)));
    results.push(("8 bound calculators", criterion8()));
    results.push(("9 episode length within window", criterion9(&both)));
    results.push(("10 regret bound vacuous at experiment scale", criterion10(&both)));

    println!();
    let mut failed = 0;
    for (name, v) in &results {
        println!("[{}] criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("\n{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
