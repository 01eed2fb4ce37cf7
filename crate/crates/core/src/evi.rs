//! Confidence sets around the window estimates and extended value iteration
//! over them.
//!
//! The plausible set holds every MDP whose rewards lie within
//! [`reward_radius`] of `r̂(s,a)` (and inside [0, 1]) and whose transition
//! rows lie within L1 distance [`transition_radius`] of `p̂(·|s,a)`. Extended
//! value iteration maximizes jointly over actions and over that set; the
//! inner maximization over an L1 ball is solved exactly by
//! [`inner_max_transition`].

use crate::error::{input, Error, Result};
use crate::window::EpisodeStats;

pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        input(format!("confidence parameter must lie in (0, 1), got {delta}"))
    }
}

/// `sqrt(7 ln(2·S·A·t_k/δ) / (2·max{1,N}))`.
pub fn reward_radius(count: u64, start: u64, num_states: usize, num_actions: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let log = (2.0 * num_states as f64 * num_actions as f64 * start.max(1) as f64 / delta).ln();
    Ok((7.0 * log / (2.0 * count.max(1) as f64)).sqrt())
}

/// `sqrt(14·S·ln(2·A·t_k/δ) / max{1,N})`, an L1 radius.
pub fn transition_radius(count: u64, start: u64, num_states: usize, num_actions: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let log = (2.0 * num_actions as f64 * start.max(1) as f64 / delta).ln();
    Ok((14.0 * num_states as f64 * log / count.max(1) as f64).sqrt())
}

/// Estimates plus per-`(s,a)` radii describing the plausible set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceModel {
    num_states: usize,
    num_actions: usize,
    reward_hat: Vec<f64>,
    /// Rows with no data are replaced by the uniform distribution.
    transition_hat: Vec<f64>,
    reward_radius: Vec<f64>,
    transition_radius: Vec<f64>,
}

impl ConfidenceModel {
    pub fn from_stats(stats: &EpisodeStats, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let (n, na) = (stats.num_states(), stats.num_actions());
        let mut reward_hat = Vec::with_capacity(n * na);
        let mut transition_hat = Vec::with_capacity(n * na * n);
        let mut r_rad = Vec::with_capacity(n * na);
        let mut p_rad = Vec::with_capacity(n * na);
        for s in 0..n {
            for a in 0..na {
                let count = stats.count(s, a);
                reward_hat.push(stats.reward_hat(s, a));
                if count == 0 {
                    transition_hat.extend(std::iter::repeat_n(1.0 / n as f64, n));
                } else {
                    transition_hat.extend_from_slice(stats.transition_hat(s, a));
                }
                r_rad.push(reward_radius(count, stats.start, n, na, delta)?);
                p_rad.push(transition_radius(count, stats.start, n, na, delta)?);
            }
        }
        Ok(Self {
            num_states: n,
            num_actions: na,
            reward_hat,
            transition_hat,
            reward_radius: r_rad,
            transition_radius: p_rad,
        })
    }

    /// A model from explicit estimates and radii, flat row-major like [`crate::MdpConfig`].
    pub fn from_parts(
        num_states: usize,
        num_actions: usize,
        reward_hat: Vec<f64>,
        transition_hat: Vec<f64>,
        reward_radius: Vec<f64>,
        transition_radius: Vec<f64>,
    ) -> Result<Self> {
        let sa = num_states * num_actions;
        if sa == 0
            || reward_hat.len() != sa
            || reward_radius.len() != sa
            || transition_radius.len() != sa
            || transition_hat.len() != sa * num_states
        {
            return input("confidence model tables have inconsistent shapes");
        }
        if reward_radius.iter().chain(&transition_radius).any(|&r| !(r >= 0.0)) {
            return input("radii must be nonnegative");
        }
        Ok(Self {
            num_states,
            num_actions,
            reward_hat,
            transition_hat,
            reward_radius,
            transition_radius,
        })
    }

    /// Zero-radius model centred on a known MDP.
    pub fn exact(c: &crate::MdpConfig) -> Self {
        let sa = c.num_states() * c.num_actions();
        Self {
            num_states: c.num_states(),
            num_actions: c.num_actions(),
            reward_hat: c.mean_rewards().to_vec(),
            transition_hat: c.transitions().to_vec(),
            reward_radius: vec![0.0; sa],
            transition_radius: vec![0.0; sa],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn reward_hat(&self, s: usize, a: usize) -> f64 {
        self.reward_hat[s * self.num_actions + a]
    }

    pub fn transition_hat(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition_hat[start..start + self.num_states]
    }

    pub fn reward_radius(&self, s: usize, a: usize) -> f64 {
        self.reward_radius[s * self.num_actions + a]
    }

    pub fn transition_radius(&self, s: usize, a: usize) -> f64 {
        self.transition_radius[s * self.num_actions + a]
    }

    pub fn reward_radius_mut(&mut self) -> &mut [f64] {
        &mut self.reward_radius
    }

    pub fn transition_radius_mut(&mut self) -> &mut [f64] {
        &mut self.transition_radius
    }

    /// Optimistic reward `min(1, r̂ + radius)`.
    pub fn optimistic_reward(&self, s: usize, a: usize) -> f64 {
        (self.reward_hat(s, a) + self.reward_radius(s, a)).min(1.0)
    }

    /// Whether a concrete MDP lies inside the plausible set.
    pub fn contains(&self, c: &crate::MdpConfig) -> bool {
        (0..self.num_states).all(|s| {
            (0..self.num_actions).all(|a| {
                let l1: f64 = c
                    .row(s, a)
                    .iter()
                    .zip(self.transition_hat(s, a))
                    .map(|(p, q)| (p - q).abs())
                    .sum();
                (c.reward(s, a) - self.reward_hat(s, a)).abs() <= self.reward_radius(s, a)
                    && l1 <= self.transition_radius(s, a)
            })
        })
    }
}

/// States sorted by value, best first; equal values keep index order.
pub fn order_by_value(u: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[j].total_cmp(&u[i]));
    order
}

/// The maximizer of `Σ q(s')u(s')` over distributions `q` with `‖q − p̂‖₁ ≤ radius`.
pub fn inner_max_transition(p_hat: &[f64], radius: f64, u: &[f64]) -> Vec<f64> {
    let order = order_by_value(u);
    let mut q = vec![0.0; p_hat.len()];
    inner_max_sorted(p_hat, radius, &order, &mut q);
    q
}

/// [`inner_max_transition`] with a precomputed value order, writing into `q`.
///
/// Moves up to `radius/2` mass onto the best state, then takes the excess
/// back from the worst states first.
pub fn inner_max_sorted(p_hat: &[f64], radius: f64, order: &[usize], q: &mut [f64]) {
    q.copy_from_slice(p_hat);
    let Some((&best, rest)) = order.split_first() else {
        return;
    };
    q[best] = (p_hat[best] + 0.5 * radius).min(1.0);
    let mut excess = rest.iter().map(|&s| q[s]).sum::<f64>() + q[best] - 1.0;
    for &s in rest.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        let take = q[s].min(excess);
        q[s] -= take;
        excess -= take;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EviResult {
    pub policy: Vec<usize>,
    pub optimistic_gain: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

pub fn extended_value_iteration(cm: &ConfidenceModel, accuracy: f64) -> Result<EviResult> {
    extended_value_iteration_capped(cm, accuracy, DEFAULT_MAX_SWEEPS)
}

/// Value iteration on the optimistic Bellman operator, stopping once
/// `span(u_{i+1} − u_i) < accuracy`. The gain is the midpoint of the final
/// difference range.
pub fn extended_value_iteration_capped(cm: &ConfidenceModel, accuracy: f64, max_sweeps: usize) -> Result<EviResult> {
    if !(accuracy > 0.0) {
        return input(format!("accuracy must be positive, got {accuracy}"));
    }
    let (n, na) = (cm.num_states, cm.num_actions);
    let rewards: Vec<f64> = (0..n)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| cm.optimistic_reward(s, a))
        .collect();
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0; n];
    let mut q = vec![0.0; n];
    let mut span = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let order = order_by_value(&u);
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                inner_max_sorted(cm.transition_hat(s, a), cm.transition_radius(s, a), &order, &mut q);
                let v = rewards[s * na + a] + q.iter().zip(&u).map(|(p, x)| p * x).sum::<f64>();
                if v > best {
                    best = v;
                    policy[s] = a;
                }
            }
            next[s] = best;
        }
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        let shift = next.iter().copied().fold(f64::INFINITY, f64::min);
        for (dst, &v) in u.iter_mut().zip(&next) {
            *dst = v - shift;
        }
        if span < accuracy {
            return Ok(EviResult {
                policy,
                optimistic_gain: 0.5 * (lo + hi),
                values: u,
                iterations: sweep,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "extended value iteration",
        iterations: max_sweeps,
        span,
    })
}
