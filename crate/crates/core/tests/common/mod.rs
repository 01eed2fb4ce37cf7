//! Brute-force reference solvers shared by the oracle and acceptance tests.
#![allow(dead_code, clippy::excessive_precision)]

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use swucrl::bounds::*;
use swucrl::MdpConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random MDP; when `sparse`, rows keep a random subset of successors, and
/// action 0 always reaches the next state in a cycle so the MDP stays communicating.
pub fn random_mdp(rng: &mut impl Rng, s_n: usize, a_n: usize, sparse: bool) -> MdpConfig {
    let rewards: Vec<f64> = (0..s_n * a_n).map(|_| rng.random::<f64>()).collect();
    let mut rows = Vec::with_capacity(s_n * a_n * s_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let mut row: Vec<f64> = (0..s_n)
                .map(|_| {
                    if sparse && rng.random_bool(0.6) {
                        0.0
                    } else {
                        rng.random::<f64>() + 1e-3
                    }
                })
                .collect();
            if sparse && a == 0 {
                row[(s + 1) % s_n] += 0.5;
            }
            if row.iter().all(|&p| p == 0.0) {
                row[rng.random_range(0..s_n)] = 1.0;
            }
            let total: f64 = row.iter().sum();
            let mut row: Vec<f64> = row.iter().map(|p| p / total).collect();
            // push rounding into the largest entry so the row sums to 1
            let err = 1.0 - row.iter().sum::<f64>();
            let big = (0..s_n).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
            row[big] += err;
            rows.extend(row);
        }
    }
    MdpConfig::new(s_n, a_n, rewards, rows).unwrap()
}

/// Every deterministic stationary policy.
pub fn policies(s_n: usize, a_n: usize) -> Vec<Vec<usize>> {
    let total = a_n.pow(s_n as u32);
    (0..total)
        .map(|mut code| {
            (0..s_n)
                .map(|_| {
                    let a = code % a_n;
                    code /= a_n;
                    a
                })
                .collect()
        })
        .collect()
}

fn policy_matrix(c: &MdpConfig, pi: &[usize]) -> DMatrix<f64> {
    let n = c.num_states();
    DMatrix::from_fn(n, n, |s, s2| c.row(s, pi[s])[s2])
}

/// Gain vector `P* r` of a fixed policy. `P*` is the limit of powers of the
/// lazy chain `(I + P)/2`, which has the same limiting matrix and is aperiodic.
pub fn policy_gain(c: &MdpConfig, pi: &[usize]) -> Vec<f64> {
    let n = c.num_states();
    let mut m = (DMatrix::identity(n, n) + policy_matrix(c, pi)) * 0.5;
    for _ in 0..64 {
        m = &m * &m;
        // keep rounding drift in the row sums from compounding
        for mut row in m.row_iter_mut() {
            let total = row.sum();
            row /= total;
        }
    }
    let r = DVector::from_fn(n, |s, _| c.reward(s, pi[s]));
    (m * r).iter().copied().collect()
}

/// Optimal gain by enumeration: the best policy gain from each state.
pub fn brute_gain(c: &MdpConfig) -> Vec<f64> {
    let n = c.num_states();
    let mut best = vec![f64::NEG_INFINITY; n];
    for pi in policies(n, c.num_actions()) {
        for (b, g) in best.iter_mut().zip(policy_gain(c, &pi)) {
            *b = b.max(g);
        }
    }
    best
}

/// Expected hitting times of `target` under `pi`; infinite where `target` is
/// not reached with probability one.
pub fn policy_hitting_times(c: &MdpConfig, pi: &[usize], target: usize) -> Vec<f64> {
    let n = c.num_states();
    // states that reach target under pi
    let mut reach = vec![false; n];
    reach[target] = true;
    loop {
        let mut grew = false;
        for s in 0..n {
            if !reach[s] && c.row(s, pi[s]).iter().enumerate().any(|(s2, &p)| p > 0.0 && reach[s2]) {
                reach[s] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    // a state reaching a non-reaching state with positive probability has infinite time too
    loop {
        let mut shrunk = false;
        for s in 0..n {
            if s != target && reach[s] && c.row(s, pi[s]).iter().enumerate().any(|(s2, &p)| p > 0.0 && !reach[s2]) {
                reach[s] = false;
                shrunk = true;
            }
        }
        if !shrunk {
            break;
        }
    }
    let live: Vec<usize> = (0..n).filter(|&s| reach[s] && s != target).collect();
    let mut h = vec![f64::INFINITY; n];
    h[target] = 0.0;
    if live.is_empty() {
        return h;
    }
    let m = live.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    for (i, &s) in live.iter().enumerate() {
        for (j, &s2) in live.iter().enumerate() {
            a[(i, j)] -= c.row(s, pi[s])[s2];
        }
    }
    let sol = a.lu().solve(&DVector::from_element(m, 1.0)).expect("transient system is nonsingular");
    for (i, &s) in live.iter().enumerate() {
        h[s] = sol[i];
    }
    h
}

/// Diameter by enumeration: for every target, the best policy per start state.
pub fn brute_diameter(c: &MdpConfig) -> f64 {
    let n = c.num_states();
    let pols = policies(n, c.num_actions());
    let mut d = 0.0f64;
    for target in 0..n {
        let mut best = vec![f64::INFINITY; n];
        for pi in &pols {
            for (b, h) in best.iter_mut().zip(policy_hitting_times(c, pi, target)) {
                *b = b.min(h);
            }
        }
        d = best.iter().copied().fold(d, f64::max);
    }
    d
}

/// `max q·u` over the simplex intersected with the L1 ball of `radius` around `p_hat`, by LP.
pub fn lp_inner_max(p_hat: &[f64], radius: f64, u: &[f64]) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut total = LinearExpr::empty();
    let mut dev = LinearExpr::empty();
    for (&p, &ui) in p_hat.iter().zip(u) {
        let q = lp.add_var(ui, (0.0, 1.0));
        let plus = lp.add_var(0.0, (0.0, f64::INFINITY));
        let minus = lp.add_var(0.0, (0.0, f64::INFINITY));
        // q - plus + minus = p
        lp.add_constraint([(q, 1.0), (plus, -1.0), (minus, 1.0)], ComparisonOp::Eq, p);
        total.add(q, 1.0);
        dev.add(plus, 1.0);
        dev.add(minus, 1.0);
    }
    lp.add_constraint(total, ComparisonOp::Eq, 1.0);
    lp.add_constraint(dev, ComparisonOp::Le, radius);
    lp.solve().expect("feasible LP").objective()
}

/// Random point of the simplex with a few zero entries.
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut p = vec![0.0; n];
        p[rng.random_range(0..n)] = 1.0;
        return p;
    }
    raw.iter().map(|x| x / total).collect()
}

/// Calculator outputs paired with values frozen from a 50-digit evaluation
/// (tests/oracle/bounds_mpmath.py).
pub fn frozen_bound_cases() -> Vec<(&'static str, f64, f64)> {
    vec![
        ("optimal_window(1e5, 2.0, 1.0, 5.0, 3.0, 0.1)", optimal_window(1e5, 2.0, 1.0, 5.0, 3.0, 0.1), 89119.205499199574849854008563794),
        ("optimal_window(1e5, 4.0, 5.5, 5.0, 3.0, 0.1)", optimal_window(1e5, 4.0, 5.5, 5.0, 3.0, 0.1), 174928.17637607962763170081981944),
        ("optimal_window(1e6, 7.0, 3.7, 10.0, 4.0, 0.05)", optimal_window(1e6, 7.0, 3.7, 10.0, 4.0, 0.05), 800702.09101895213101812758357184),
        ("theorem1_bound(1e5, 1e4, 2.0, 5.0, 5.0, 3.0, 0.1)", theorem1_bound(1e5, 1e4, 2.0, 5.0, 5.0, 3.0, 0.1), 10681845.524368872961355834325068),
        ("theorem1_bound(1e6, 12345.0, 3.0, 2.5, 8.0, 2.0, 0.01)", theorem1_bound(1e6, 12345.0, 3.0, 2.5, 8.0, 2.0, 0.01), 72321339.474904626907860533735066),
        ("corollary1_bound(1e5, 2.0, 2.0, 5.0, 3.0, 0.1)", corollary1_bound(1e5, 2.0, 2.0, 5.0, 3.0, 0.1), 1697860.5217668091215837992785582),
        ("corollary1_bound(1e8, 5.0, 4.25, 20.0, 6.0, 0.2)", corollary1_bound(1e8, 5.0, 4.25, 20.0, 6.0, 0.2), 1368600906.2531279380614967301352),
        ("corollary2_sample_complexity(0.1, 2.0, 2.0, 5.0, 3.0, 0.1)", corollary2_sample_complexity(0.1, 2.0, 2.0, 5.0, 3.0, 0.1), 1884264685942.2731490778408443742),
        ("corollary2_sample_complexity(0.75, 1.0, 1.5, 3.0, 2.0, 0.3)", corollary2_sample_complexity(0.75, 1.0, 1.5, 3.0, 2.0, 0.3), 189940515.73453962719573880274252),
        ("episode_count_bound(1e5, 500.0, 5.0, 3.0)", episode_count_bound(1e5, 500.0, 5.0, 3.0), 24176.681067160705542860699745093),
        ("episode_count_bound(1e5, 56142.0, 5.0, 3.0)", episode_count_bound(1e5, 56142.0, 5.0, 3.0), 446.09706729623837473745614371287),
        ("weighted_visit_bound(1e5, 500.0, 5.0, 3.0)", weighted_visit_bound(1e5, 500.0, 5.0, 3.0), 83630.811007041107834494608324235),
        ("weighted_visit_bound(1e5, 56142.0, 5.0, 3.0)", weighted_visit_bound(1e5, 56142.0, 5.0, 3.0), 8861.8673739229558089699853932178),
    ]
}
