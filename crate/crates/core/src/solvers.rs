//! Exact solvers for stationary MDPs: optimal gain, diameter, and regret
//! scoring of a run against the per-step optimal gain.

use nalgebra::{DMatrix, DVector};

use crate::agents::RunTrace;
use crate::error::{input, Error, Result};
use crate::mdp::{MdpConfig, SwitchingMdp};

/// Self-loop weight mixed into every row for relative value iteration.
pub const APERIODICITY: f64 = 0.01;

pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;

/// Stopping tolerance for hitting-time value iteration.
pub const HITTING_TOL: f64 = 1e-9;

/// Hitting times above this are treated as divergent.
pub const HITTING_CAP: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct GainResult {
    pub gain: f64,
    /// Relative values with `min_s h(s) = 0`.
    pub bias: Vec<f64>,
    pub policy: Vec<usize>,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiameterResult {
    pub diameter: f64,
    /// `hitting_time[from][to]`, minimized over stationary policies.
    pub hitting_time: Vec<Vec<f64>>,
}

pub fn optimal_gain(c: &MdpConfig, eps: f64) -> Result<GainResult> {
    optimal_gain_capped(c, eps, DEFAULT_MAX_SWEEPS)
}

/// Relative value iteration on the kernel `(1-τ)p + τ·I`.
///
/// Every policy keeps its stationary distribution under the transform, so
/// the gain is unchanged; the bias of the original MDP is `(1-τ)` times the
/// transformed one.
pub fn optimal_gain_capped(c: &MdpConfig, eps: f64, max_sweeps: usize) -> Result<GainResult> {
    if !(eps > 0.0) {
        return input(format!("accuracy must be positive, got {eps}"));
    }
    let (n, na) = (c.num_states(), c.num_actions());
    let keep = 1.0 - APERIODICITY;
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0; n];
    let mut span = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let ev: f64 = c.row(s, a).iter().zip(&u).map(|(p, v)| p * v).sum();
                let q = c.reward(s, a) + keep * ev + APERIODICITY * u[s];
                if q > best {
                    best = q;
                    policy[s] = a;
                }
            }
            next[s] = best;
        }
        let (lo, hi) = min_max(next.iter().zip(&u).map(|(a, b)| a - b));
        span = hi - lo;
        let shift = min_max(next.iter().copied()).0;
        for (dst, &v) in u.iter_mut().zip(&next) {
            *dst = v - shift;
        }
        if span < eps {
            let mut bias: Vec<f64> = u.iter().map(|v| keep * v).collect();
            let floor = min_max(bias.iter().copied()).0;
            bias.iter_mut().for_each(|h| *h -= floor);
            return Ok(GainResult {
                gain: 0.5 * (lo + hi),
                bias,
                policy,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "relative value iteration",
        iterations: max_sweeps,
        span,
    })
}

/// Diameter by stochastic shortest paths, one target at a time.
pub fn diameter(c: &MdpConfig) -> Result<DiameterResult> {
    let n = c.num_states();
    let mut hitting_time = vec![vec![0.0; n]; n];
    let mut diameter: f64 = 0.0;
    for target in 0..n {
        let times = hitting_times_to(c, target)?;
        for (from, &h) in times.iter().enumerate() {
            hitting_time[from][target] = h;
            if from != target {
                diameter = diameter.max(h);
            }
        }
    }
    Ok(DiameterResult {
        diameter,
        hitting_time,
    })
}

/// Minimal expected steps from every state to `target`.
pub fn hitting_times_to(c: &MdpConfig, target: usize) -> Result<Vec<f64>> {
    let (n, na) = (c.num_states(), c.num_actions());
    if target >= n {
        return input(format!("target state {target} out of range"));
    }
    if let Some(from) = unreachable_from(c, target) {
        return Err(Error::InfiniteDiameter { from, to: target });
    }

    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut delta = f64::INFINITY;
    for _ in 0..DEFAULT_MAX_SWEEPS {
        for s in 0..n {
            next[s] = if s == target {
                0.0
            } else {
                1.0 + (0..na)
                    .map(|a| expected(c.row(s, a), &h))
                    .fold(f64::INFINITY, f64::min)
            };
        }
        delta = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut h, &mut next);
        if h.iter().any(|&v| v > HITTING_CAP) {
            let from = h.iter().position(|&v| v > HITTING_CAP).unwrap_or(0);
            return Err(Error::InfiniteDiameter { from, to: target });
        }
        if delta < HITTING_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "hitting-time value iteration",
            iterations: DEFAULT_MAX_SWEEPS,
            span: delta,
        });
    }
    Ok(polish_hitting_times(c, target, h))
}

/// Policy iteration started from the value-iteration estimate; each greedy
/// policy is evaluated exactly. Falls back to `h` if a solve misbehaves.
fn polish_hitting_times(c: &MdpConfig, target: usize, mut h: Vec<f64>) -> Vec<f64> {
    let (n, na) = (c.num_states(), c.num_actions());
    let mut policy = vec![0; n];
    for _ in 0..100 {
        let mut changed = false;
        for s in (0..n).filter(|&s| s != target) {
            let current = expected(c.row(s, policy[s]), &h);
            let mut best = (policy[s], current);
            for a in 0..na {
                let v = expected(c.row(s, a), &h);
                if v < best.1 - 1e-12 * (1.0 + best.1.abs()) {
                    best = (a, v);
                }
            }
            if best.0 != policy[s] {
                policy[s] = best.0;
                changed = true;
            }
        }
        let Some(exact) = evaluate_hitting_policy(c, target, &policy) else {
            return h;
        };
        h = exact;
        if !changed {
            break;
        }
    }
    h
}

fn evaluate_hitting_policy(c: &MdpConfig, target: usize, policy: &[usize]) -> Option<Vec<f64>> {
    let n = c.num_states();
    let others: Vec<usize> = (0..n).filter(|&s| s != target).collect();
    let m = others.len();
    if m == 0 {
        return Some(vec![0.0; n]);
    }
    let mut lhs = DMatrix::<f64>::identity(m, m);
    for (i, &s) in others.iter().enumerate() {
        let row = c.row(s, policy[s]);
        for (j, &s2) in others.iter().enumerate() {
            lhs[(i, j)] -= row[s2];
        }
    }
    let sol = lhs.lu().solve(&DVector::from_element(m, 1.0))?;
    if sol.iter().any(|v| !v.is_finite() || *v < 1.0 - 1e-9 || *v > HITTING_CAP) {
        return None;
    }
    let mut h = vec![0.0; n];
    for (i, &s) in others.iter().enumerate() {
        h[s] = sol[i];
    }
    Some(h)
}

/// Some state that cannot reach `target` under any action sequence.
fn unreachable_from(c: &MdpConfig, target: usize) -> Option<usize> {
    let (n, na) = (c.num_states(), c.num_actions());
    let mut reach = vec![false; n];
    reach[target] = true;
    loop {
        let mut grew = false;
        for s in 0..n {
            if !reach[s]
                && (0..na).any(|a| c.row(s, a).iter().zip(&reach).any(|(&p, &r)| r && p > 0.0))
            {
                reach[s] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    reach.iter().position(|r| !r)
}

/// Per-configuration optimal gains, computed once per instance.
pub fn config_gains(m: &SwitchingMdp, eps: f64) -> Result<Vec<f64>> {
    m.configs().iter().map(|c| optimal_gain(c, eps).map(|g| g.gain)).collect()
}

/// `curve[t-1] = Σ_{τ=1..t} (ρ*(τ) − r_τ)`.
pub fn regret_of_trace(trace: &RunTrace, m: &SwitchingMdp, gains: &[f64]) -> Result<Vec<f64>> {
    if trace.steps.len() as u64 != m.horizon() {
        return input(format!(
            "trace has {} steps but the horizon is {}",
            trace.steps.len(),
            m.horizon()
        ));
    }
    if gains.len() != m.configs().len() {
        return input(format!("{} gains for {} configurations", gains.len(), m.configs().len()));
    }
    let mut total = 0.0;
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let t = i as u64 + 1;
            if step.t != t {
                return input(format!("trace step {i} has t = {}, expected {t}", step.t));
            }
            total += gains[m.active_config(t)?] - step.reward;
            Ok(total)
        })
        .collect()
}

#[inline]
fn expected(row: &[f64], values: &[f64]) -> f64 {
    row.iter().zip(values).map(|(p, v)| p * v).sum()
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
