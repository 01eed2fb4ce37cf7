//! Ground-truth switching MDPs and the seeded environment that steps them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Tolerance on transition-row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// One stationary MDP: mean rewards `r̄(s,a)` and kernel `p(s'|s,a)`.
///
/// Both tables are stored flat and row-major, `(s, a)` and `(s, a, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpConfig {
    num_states: usize,
    num_actions: usize,
    mean_reward: Vec<f64>,
    transition: Vec<f64>,
}

impl MdpConfig {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        mean_reward: Vec<f64>,
        transition: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return input("MDP needs at least one state and one action");
        }
        let sa = num_states * num_actions;
        if mean_reward.len() != sa {
            return input(format!("mean_reward has {} entries, expected {sa}", mean_reward.len()));
        }
        if transition.len() != sa * num_states {
            return input(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                sa * num_states
            ));
        }
        for (i, &r) in mean_reward.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return input(format!(
                    "mean reward {r} at (s={}, a={}) outside [0, 1]",
                    i / num_actions,
                    i % num_actions
                ));
            }
        }
        for (i, row) in transition.chunks(num_states).enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return input(format!("transition row (s={}, a={}) has an entry outside [0, 1]", i / num_actions, i % num_actions));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return input(format!(
                    "transition row (s={}, a={}) sums to {sum}",
                    i / num_actions,
                    i % num_actions
                ));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            mean_reward,
            transition,
        })
    }

    /// Builds a config from `[s][a]` rewards and `[s][a][s']` transitions.
    pub fn from_nested(mean_reward: &[Vec<f64>], transition: &[Vec<Vec<f64>>]) -> Result<Self> {
        let num_states = mean_reward.len();
        let num_actions = mean_reward.first().map_or(0, Vec::len);
        if mean_reward.iter().any(|r| r.len() != num_actions) {
            return input("ragged mean_reward table");
        }
        if transition.len() != num_states
            || transition
                .iter()
                .any(|rows| rows.len() != num_actions || rows.iter().any(|p| p.len() != num_states))
        {
            return input("transition table shape does not match mean_reward");
        }
        let rewards = mean_reward.iter().flatten().copied().collect();
        let kernel = transition.iter().flatten().flatten().copied().collect();
        Self::new(num_states, num_actions, rewards, kernel)
    }

    /// Uniform mean rewards on [0, 1) and flat-Dirichlet transition rows.
    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Self {
        let sa = num_states * num_actions;
        let mean_reward: Vec<f64> = (0..sa).map(|_| rng.random::<f64>()).collect();
        let mut transition = Vec::with_capacity(sa * num_states);
        for _ in 0..sa {
            transition.extend(dirichlet_row(num_states, rng));
        }
        Self {
            num_states,
            num_actions,
            mean_reward,
            transition,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.mean_reward[s * self.num_actions + a]
    }

    /// `p(·|s,a)`.
    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_reward
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    /// Relabels states so that old state `s` becomes `perm[s]`.
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_states;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return input("not a permutation of the state indices");
        }
        let a_n = self.num_actions;
        let mut rewards = vec![0.0; n * a_n];
        let mut kernel = vec![0.0; n * a_n * n];
        for s in 0..n {
            for a in 0..a_n {
                rewards[perm[s] * a_n + a] = self.reward(s, a);
                for (s2, &p) in self.row(s, a).iter().enumerate() {
                    kernel[(perm[s] * a_n + a) * n + perm[s2]] = p;
                }
            }
        }
        Self::new(n, a_n, rewards, kernel)
    }

    fn nested(&self) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let rewards = (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.reward(s, a)).collect())
            .collect();
        let kernel = (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.row(s, a).to_vec()).collect())
            .collect();
        (rewards, kernel)
    }
}

/// A flat-Dirichlet draw: normalized i.i.d. Exp(1) variates.
fn dirichlet_row<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter_mut().for_each(|p| *p /= total);
    } else {
        row.iter_mut().for_each(|p| *p = 1.0 / n as f64);
    }
    row
}

/// Configurations `M_0..M_l` with change points `c_1 < ... < c_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingMdp {
    configs: Vec<MdpConfig>,
    change_points: Vec<u64>,
    horizon: u64,
}

impl SwitchingMdp {
    pub fn new(configs: Vec<MdpConfig>, change_points: Vec<u64>, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return input("horizon must be positive");
        }
        let Some(first) = configs.first() else {
            return input("switching MDP needs at least one configuration");
        };
        let (s, a) = (first.num_states(), first.num_actions());
        if configs.iter().any(|c| c.num_states() != s || c.num_actions() != a) {
            return input("all configurations must share the state and action spaces");
        }
        if configs.len() != change_points.len() + 1 {
            return input(format!(
                "{} configurations but {} change points",
                configs.len(),
                change_points.len()
            ));
        }
        let mut prev = 1;
        for &c in &change_points {
            if c <= prev || c > horizon {
                return input(format!(
                    "change points must satisfy 1 < c_1 < ... < c_l <= T, got {change_points:?} with T = {horizon}"
                ));
            }
            prev = c;
        }
        Ok(Self {
            configs,
            change_points,
            horizon,
        })
    }

    pub fn stationary(config: MdpConfig, horizon: u64) -> Result<Self> {
        Self::new(vec![config], Vec::new(), horizon)
    }

    /// Random instance with `l` changes every `⌈T/l⌉` steps.
    ///
    /// The `i`-th change point is clamped to `T - 1 - (l - i)` so that every
    /// configuration is active for at least one step.
    pub fn random(
        num_states: usize,
        num_actions: usize,
        changes: usize,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        if num_states < 2 || num_actions < 1 {
            return input("random instances need S >= 2 and A >= 1");
        }
        let l = changes as u64;
        if changes > 0 && horizon < l + 2 {
            return input(format!("horizon {horizon} too short for {changes} change points"));
        }
        if horizon == 0 {
            return input("horizon must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let configs = (0..=changes)
            .map(|_| MdpConfig::random(num_states, num_actions, &mut rng))
            .collect();
        let change_points = change_schedule(changes, horizon);
        Self::new(configs, change_points, horizon)
    }

    pub fn configs(&self) -> &[MdpConfig] {
        &self.configs
    }

    pub fn change_points(&self) -> &[u64] {
        &self.change_points
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.configs[0].num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.configs[0].num_actions()
    }

    pub fn num_changes(&self) -> usize {
        self.change_points.len()
    }

    /// Index of the configuration active at step `t`: the largest `i` with `c_i <= t`.
    pub fn active_config(&self, t: u64) -> Result<usize> {
        if t == 0 || t > self.horizon {
            return input(format!("step {t} outside 1..={}", self.horizon));
        }
        Ok(self.change_points.partition_point(|&c| c <= t))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `c_i = min(i·⌈T/l⌉, T - 1 - (l - i))` for `i = 1..=l`.
pub fn change_schedule(changes: usize, horizon: u64) -> Vec<u64> {
    if changes == 0 {
        return Vec::new();
    }
    let l = changes as u64;
    let spacing = horizon.div_ceil(l);
    (1..=l)
        .map(|i| (i * spacing).min(horizon.saturating_sub(1 + l - i)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    mean_reward: Vec<Vec<f64>>,
    transition: Vec<Vec<Vec<f64>>>,
}

/// On-disk instance layout. `T` is optional on read.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(rename = "S")]
    num_states: usize,
    #[serde(rename = "A")]
    num_actions: usize,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    horizon: Option<u64>,
    change_points: Vec<u64>,
    configs: Vec<ConfigFile>,
}

impl From<&SwitchingMdp> for InstanceFile {
    fn from(m: &SwitchingMdp) -> Self {
        Self {
            num_states: m.num_states(),
            num_actions: m.num_actions(),
            horizon: Some(m.horizon),
            change_points: m.change_points.clone(),
            configs: m
                .configs
                .iter()
                .map(|c| {
                    let (mean_reward, transition) = c.nested();
                    ConfigFile {
                        mean_reward,
                        transition,
                    }
                })
                .collect(),
        }
    }
}

impl TryFrom<InstanceFile> for SwitchingMdp {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let configs = file
            .configs
            .iter()
            .map(|c| MdpConfig::from_nested(&c.mean_reward, &c.transition))
            .collect::<Result<Vec<_>>>()?;
        if configs
            .iter()
            .any(|c| c.num_states() != file.num_states || c.num_actions() != file.num_actions)
        {
            return input("configuration shape does not match the declared S and A");
        }
        let horizon = file
            .horizon
            .unwrap_or_else(|| file.change_points.last().map_or(1, |&c| c + 1));
        Self::new(configs, file.change_points, horizon)
    }
}

/// Mutable environment state for one run.
///
/// Randomness comes from ChaCha8 seeded with `seed_from_u64`, so a trace is a
/// deterministic function of the instance, the seed and the action sequence.
#[derive(Debug, Clone)]
pub struct EnvState {
    t: u64,
    state: usize,
    rng: ChaCha8Rng,
}

impl EnvState {
    pub fn new(initial_state: usize, seed: u64) -> Self {
        Self {
            t: 1,
            state: initial_state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The step about to be executed.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Executes action `a` at the current step: Bernoulli reward with the
    /// active configuration's mean, next state drawn from its kernel.
    pub fn step(&mut self, m: &SwitchingMdp, a: usize) -> Result<(f64, usize)> {
        if self.t > m.horizon() {
            return Err(Error::PastHorizon {
                t: self.t,
                horizon: m.horizon(),
            });
        }
        if a >= m.num_actions() {
            return input(format!("action {a} out of range (A = {})", m.num_actions()));
        }
        if self.state >= m.num_states() {
            return input(format!("state {} out of range (S = {})", self.state, m.num_states()));
        }
        let config = &m.configs[m.active_config(self.t)?];
        let reward = if self.rng.random::<f64>() < config.reward(self.state, a) {
            1.0
        } else {
            0.0
        };
        let next = sample_index(config.row(self.state, a), self.rng.random::<f64>());
        self.state = next;
        self.t += 1;
        Ok((reward, next))
    }
}

/// Inverse-CDF sample; `u` in [0, 1).
fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}
