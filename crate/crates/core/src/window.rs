//! Sliding window of transitions and the per-episode counts built from it.

use std::collections::VecDeque;

/// One observed step `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// The last `capacity` transitions, with per-`(s,a)` and per-`(s,a,s')`
/// tallies kept in step with the retained entries.
#[derive(Debug, Clone)]
pub struct SlidingWindowBuffer {
    num_states: usize,
    num_actions: usize,
    capacity: usize,
    entries: VecDeque<Transition>,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    successor_counts: Vec<u64>,
}

impl SlidingWindowBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(num_states: usize, num_actions: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        let sa = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            capacity,
            entries: VecDeque::new(),
            counts: vec![0; sa],
            reward_sums: vec![0.0; sa],
            successor_counts: vec![0; sa * num_states],
        }
    }

    /// A buffer that never evicts: full history since the last `clear`.
    pub fn unbounded(num_states: usize, num_actions: usize) -> Self {
        Self::new(num_states, num_actions, usize::MAX)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &Transition> {
        self.entries.iter()
    }

    /// Appends `rec`, evicting the oldest entry once over capacity.
    pub fn push(&mut self, rec: Transition) {
        self.tally(&rec, true);
        self.entries.push_back(rec);
        if self.entries.len() > self.capacity {
            if let Some(old) = self.entries.pop_front() {
                self.tally(&old, false);
            }
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.counts.fill(0);
        self.reward_sums.fill(0.0);
        self.successor_counts.fill(0);
    }

    fn tally(&mut self, rec: &Transition, add: bool) {
        let sa = rec.state * self.num_actions + rec.action;
        let sas = sa * self.num_states + rec.next_state;
        if add {
            self.counts[sa] += 1;
            self.reward_sums[sa] += rec.reward;
            self.successor_counts[sas] += 1;
        } else {
            self.counts[sa] -= 1;
            self.successor_counts[sas] -= 1;
            self.reward_sums[sa] = if self.counts[sa] == 0 {
                0.0
            } else {
                (self.reward_sums[sa] - rec.reward).max(0.0)
            };
        }
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.num_actions + a]
    }

    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        self.reward_sums[s * self.num_actions + a]
    }

    pub fn successor_count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.successor_counts[(s * self.num_actions + a) * self.num_states + next]
    }

    /// Freezes the current tallies as the statistics of an episode starting at `t_k`.
    pub fn snapshot(&self, start: u64) -> EpisodeStats {
        let (n, na) = (self.num_states, self.num_actions);
        let mut reward_hat = vec![0.0; n * na];
        let mut transition_hat = vec![0.0; n * na * n];
        for sa in 0..n * na {
            let denom = self.counts[sa].max(1) as f64;
            reward_hat[sa] = (self.reward_sums[sa] / denom).clamp(0.0, 1.0);
            for s2 in 0..n {
                transition_hat[sa * n + s2] = self.successor_counts[sa * n + s2] as f64 / denom;
            }
        }
        EpisodeStats {
            start,
            num_states: n,
            num_actions: na,
            counts: self.counts.clone(),
            reward_sums: self.reward_sums.clone(),
            successor_counts: self.successor_counts.clone(),
            visits: vec![0; n * na],
            reward_hat,
            transition_hat,
        }
    }
}

/// `N_k`, `R_k`, `P_k` frozen at episode start, the running in-episode
/// visit counts `v_k`, and the empirical estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub start: u64,
    num_states: usize,
    num_actions: usize,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    successor_counts: Vec<u64>,
    visits: Vec<u64>,
    reward_hat: Vec<f64>,
    transition_hat: Vec<f64>,
}

impl EpisodeStats {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn idx(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[self.idx(s, a)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        self.reward_sums[self.idx(s, a)]
    }

    pub fn successor_count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.successor_counts[self.idx(s, a) * self.num_states + next]
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[self.idx(s, a)]
    }

    pub fn reward_hat(&self, s: usize, a: usize) -> f64 {
        self.reward_hat[self.idx(s, a)]
    }

    /// `p̂(·|s,a)`; all zeros when `N_k(s,a) = 0`.
    pub fn transition_hat(&self, s: usize, a: usize) -> &[f64] {
        let start = self.idx(s, a) * self.num_states;
        &self.transition_hat[start..start + self.num_states]
    }

    pub fn record_visit(&mut self, s: usize, a: usize) {
        let i = self.idx(s, a);
        self.visits[i] += 1;
    }

    /// True once `v_k(s,a) >= max{1, N_k(s,a)}`; checked before executing `a` in `s`.
    pub fn should_end(&self, s: usize, a: usize) -> bool {
        let i = self.idx(s, a);
        self.visits[i] >= self.counts[i].max(1)
    }
}
