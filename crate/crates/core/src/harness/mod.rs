//! Seeded Monte-Carlo experiments over random switching MDPs.
//!
//! Run `i` draws its instance from `base_seed + i`; every agent in the run
//! sees that instance with its own derived seed. Runs are executed on a
//! worker pool and folded into the aggregate in run-index order, so results
//! do not depend on the number of workers.

mod audit;
mod output;
mod prop1;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{default_restart_schedule, run_agent, AgentConfig, AgentKind};
use crate::bounds;
use crate::error::{input, Error, Result};
use crate::mdp::SwitchingMdp;
use crate::solvers::{config_gains, diameter, regret_of_trace};

pub use audit::{audit_sw_ucrl, RunAudit};
pub use output::emit_outputs;
pub use prop1::{check_sequence, proposition1_property_test, Prop1Report, Prop1Sequence};

/// Accuracy of the reference gains used for regret.
pub const GAIN_EPS: f64 = 1e-9;

/// Fraction of failed runs above which an experiment counts as failed.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiameterMode {
    /// Largest exact diameter over the instance's configurations.
    #[default]
    Exact,
    /// `max(log_A(S) - 3, 1)`, independent of the instance.
    PaperProxy,
}

impl std::str::FromStr for DiameterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "exact" => Ok(Self::Exact),
            "paper_proxy" | "proxy" => Ok(Self::PaperProxy),
            _ => input(format!("unknown diameter mode '{s}' (expected exact or paper_proxy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub states: usize,
    pub actions: usize,
    pub horizon: u64,
    pub changes: usize,
    pub delta: f64,
    pub runs: usize,
    pub base_seed: u64,
    pub agents: Vec<AgentKind>,
    /// Fixed window in place of the rounded `W*`.
    pub window_override: Option<u64>,
    pub diameter_mode: DiameterMode,
    /// Restart steps for UCRL2-R in place of the cubic default.
    pub restart_schedule: Option<Vec<u64>>,
    /// Worker threads; 0 uses all available cores.
    pub jobs: usize,
    pub output_dir: Option<PathBuf>,
    /// Write every trace under `<output_dir>/traces`.
    pub save_traces: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            states: 5,
            actions: 3,
            horizon: 100_000,
            changes: 2,
            delta: 0.1,
            runs: 50,
            base_seed: 0,
            agents: vec![AgentKind::SwUcrl, AgentKind::Ucrl2R, AgentKind::Ucrl2Rw],
            window_override: None,
            diameter_mode: DiameterMode::Exact,
            restart_schedule: None,
            jobs: 0,
            output_dir: None,
            save_traces: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.states == 0 || self.actions == 0 {
            return input("S and A must be at least 1");
        }
        if self.horizon == 0 {
            return input("T must be at least 1");
        }
        if self.changes > 0 && self.horizon < self.changes as u64 + 2 {
            return input(format!("T = {} is too short for {} changes", self.horizon, self.changes));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return input(format!("δ must lie in (0, 1), got {}", self.delta));
        }
        if self.runs == 0 {
            return input("at least one run is required");
        }
        if self.agents.is_empty() {
            return input("agent list is empty");
        }
        let mut seen = self.agents.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.agents.len() {
            return input("agent list has duplicates");
        }
        if self.window_override == Some(0) {
            return input("window must be at least 1");
        }
        if self.save_traces && self.output_dir.is_none() {
            return input("saving traces needs an output directory");
        }
        Ok(())
    }

    pub fn instance_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    pub fn instance(&self, run: usize) -> Result<SwitchingMdp> {
        SwitchingMdp::random(self.states, self.actions, self.changes, self.horizon, self.instance_seed(run))
    }

    /// The seed agent `kind` uses in run `run`.
    pub fn agent_seed(&self, run: usize, kind: AgentKind) -> u64 {
        splitmix64(self.instance_seed(run) ^ splitmix64(kind.tag()))
    }

    /// The window (and UCRL2-RW period) for an instance with diameter `d`.
    pub fn window_for(&self, d: f64) -> u64 {
        self.window_override.unwrap_or_else(|| {
            let w = bounds::optimal_window(
                self.horizon as f64,
                self.changes as f64,
                d,
                self.states as f64,
                self.actions as f64,
                self.delta,
            );
            (w.round() as u64).max(1)
        })
    }

    pub fn agent_config(&self, kind: AgentKind, window: u64) -> AgentConfig {
        match kind {
            AgentKind::SwUcrl => AgentConfig::sw_ucrl(self.delta, window, self.horizon),
            AgentKind::Ucrl2 => AgentConfig::ucrl2(self.delta, self.horizon),
            AgentKind::Ucrl2R => AgentConfig::ucrl2_r(
                self.delta,
                self.restart_schedule
                    .clone()
                    .unwrap_or_else(|| default_restart_schedule(self.changes, self.horizon)),
                self.horizon,
            ),
            AgentKind::Ucrl2Rw => AgentConfig::ucrl2_rw(self.delta, window, self.horizon),
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Diameter plugged into `W*`.
pub fn diameter_for_window(spec: &ExperimentSpec, m: &SwitchingMdp) -> Result<f64> {
    match spec.diameter_mode {
        DiameterMode::PaperProxy => Ok(paper_proxy_diameter(spec.states, spec.actions)),
        DiameterMode::Exact => {
            let mut d = 1.0f64;
            for c in m.configs() {
                d = d.max(diameter(c)?.diameter);
            }
            Ok(d)
        }
    }
}

/// `max(log_A(S) - 3, 1)`; 1 when `A = 1`.
pub fn paper_proxy_diameter(states: usize, actions: usize) -> f64 {
    if actions < 2 {
        return 1.0;
    }
    ((states as f64).ln() / (actions as f64).ln() - 3.0).max(1.0)
}

/// One agent's result in one run.
#[derive(Debug, Clone)]
struct AgentRun {
    regret: Vec<f64>,
    episodes: usize,
    max_episode_length: u64,
    audit: Option<RunAudit>,
}

#[derive(Debug, Clone)]
struct RunOutcome {
    diameter: f64,
    window: u64,
    agents: Vec<AgentRun>,
}

fn run_one(spec: &ExperimentSpec, run: usize) -> Result<RunOutcome> {
    let m = spec.instance(run)?;
    let gains = config_gains(&m, GAIN_EPS)?;
    let d = diameter_for_window(spec, &m)?;
    let window = spec.window_for(d);
    let mut agents = Vec::with_capacity(spec.agents.len());
    for &kind in &spec.agents {
        let cfg = spec.agent_config(kind, window);
        let trace = run_agent(&cfg, &m, spec.agent_seed(run, kind))?;
        let regret = regret_of_trace(&trace, &m, &gains)?;
        let audit = (kind == AgentKind::SwUcrl).then(|| audit_sw_ucrl(&trace, run, &m, spec.delta));
        if spec.save_traces {
            if let Some(dir) = &spec.output_dir {
                trace.save(&dir.join("traces"), &format!("run{run:04}_{}", kind.slug()))?;
            }
        }
        agents.push(AgentRun {
            regret,
            episodes: trace.num_episodes(),
            max_episode_length: trace.max_episode_length(),
            audit,
        });
    }
    Ok(RunOutcome {
        diameter: d,
        window,
        agents,
    })
}

/// Running mean and sum of squared deviations per time step.
#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, xs: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(xs) {
            let d = x - *m;
            *m += d / n;
            *m2 += d * (x - *m);
        }
    }

    fn stderr(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2.iter().map(|&m2| (m2 / (n - 1.0) / n).sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub kind: AgentKind,
    /// Mean cumulative regret after steps `1..=T`.
    pub mean_regret: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Final cumulative regret of each completed run, in run order.
    pub final_regrets: Vec<f64>,
    pub episode_counts: Vec<usize>,
    pub max_episode_lengths: Vec<u64>,
}

impl AgentSummary {
    pub fn final_mean(&self) -> f64 {
        self.mean_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_stderr(&self) -> f64 {
        self.stderr.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub error: String,
}

/// Mean per-step regret of SW-UCRL just before and just after a change point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpCheck {
    pub change_point: u64,
    /// Mean over `[c - W, c)`, clipped to `[1, T]`.
    pub before: f64,
    /// Mean over `[c, c + W]`, clipped to `[1, T]`.
    pub after: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub spec: ExperimentSpec,
    pub agents: Vec<AgentSummary>,
    pub audits: Vec<RunAudit>,
    pub failures: Vec<RunFailure>,
    /// Indices of the runs that completed, ascending.
    pub completed_runs: Vec<usize>,
    pub windows: Vec<u64>,
    pub diameters: Vec<f64>,
    /// Window used for the change-point comparison: the mean window, rounded.
    pub bump_window: u64,
    pub bumps: Vec<BumpCheck>,
}

impl AggregateResult {
    pub fn agent(&self, kind: AgentKind) -> Option<&AgentSummary> {
        self.agents.iter().find(|a| a.kind == kind)
    }

    pub fn failure_fraction(&self) -> f64 {
        self.failures.len() as f64 / self.spec.runs as f64
    }

    pub fn too_many_failures(&self) -> bool {
        self.failure_fraction() > MAX_FAILURE_FRACTION
    }

    pub fn audits_passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed)
    }

    /// True when the audits pass and few enough runs failed.
    pub fn ok(&self) -> bool {
        self.audits_passed() && !self.too_many_failures()
    }
}

/// Runs every agent of `spec` on `spec.runs` random instances.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateResult> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
    let horizon = spec.horizon as usize;
    let mut curves: Vec<Welford> = spec.agents.iter().map(|_| Welford::new(horizon)).collect();
    let mut agg = AggregateResult {
        spec: spec.clone(),
        agents: spec
            .agents
            .iter()
            .map(|&kind| AgentSummary {
                kind,
                mean_regret: Vec::new(),
                stderr: Vec::new(),
                final_regrets: Vec::new(),
                episode_counts: Vec::new(),
                max_episode_lengths: Vec::new(),
            })
            .collect(),
        audits: Vec::new(),
        failures: Vec::new(),
        completed_runs: Vec::new(),
        windows: Vec::new(),
        diameters: Vec::new(),
        bump_window: 0,
        bumps: Vec::new(),
    };

    // Bounded batches keep at most a few regret curves per worker in memory.
    let batch = pool.current_num_threads().max(1) * 2;
    let mut next = 0;
    while next < spec.runs {
        let ids: Vec<usize> = (next..(next + batch).min(spec.runs)).collect();
        let outcomes: Vec<Result<RunOutcome>> = pool.install(|| ids.par_iter().map(|&i| run_one(spec, i)).collect());
        for (run, outcome) in ids.into_iter().zip(outcomes) {
            match outcome {
                Ok(out) => {
                    agg.completed_runs.push(run);
                    agg.windows.push(out.window);
                    agg.diameters.push(out.diameter);
                    for (i, ar) in out.agents.into_iter().enumerate() {
                        curves[i].push(&ar.regret);
                        let summary = &mut agg.agents[i];
                        summary.final_regrets.push(ar.regret.last().copied().unwrap_or(0.0));
                        summary.episode_counts.push(ar.episodes);
                        summary.max_episode_lengths.push(ar.max_episode_length);
                        if let Some(a) = ar.audit {
                            agg.audits.push(a);
                        }
                    }
                }
                Err(e) => {
                    log::error!("run {run} failed: {e}");
                    agg.failures.push(RunFailure {
                        run,
                        error: e.to_string(),
                    });
                }
            }
        }
        next += batch;
    }

    for (summary, w) in agg.agents.iter_mut().zip(&curves) {
        summary.stderr = w.stderr();
        summary.mean_regret = w.mean.clone();
    }
    if !agg.windows.is_empty() {
        let mean_w = agg.windows.iter().map(|&w| w as f64).sum::<f64>() / agg.windows.len() as f64;
        agg.bump_window = (mean_w.round() as u64).max(1);
    }
    if let (Some(sw), Some(first)) = (agg.agent(AgentKind::SwUcrl), agg.completed_runs.first()) {
        let change_points = spec.instance(*first)?.change_points().to_vec();
        agg.bumps = bump_checks(&sw.mean_regret, &change_points, agg.bump_window);
    }
    Ok(agg)
}

/// Compares mean per-step regret after each change point with the stretch before it.
pub fn bump_checks(cumulative: &[f64], change_points: &[u64], window: u64) -> Vec<BumpCheck> {
    let horizon = cumulative.len() as u64;
    // mean per-step regret over steps lo..=hi (1-based, inclusive)
    let mean = |lo: u64, hi: u64| -> f64 {
        if hi < lo {
            return f64::NAN;
        }
        let upto = |t: u64| if t == 0 { 0.0 } else { cumulative[t as usize - 1] };
        (upto(hi) - upto(lo - 1)) / (hi - lo + 1) as f64
    };
    change_points
        .iter()
        .filter(|&&c| c >= 1 && c <= horizon)
        .map(|&c| {
            let before = mean(c.saturating_sub(window).max(1), c - 1);
            let after = mean(c, (c + window).min(horizon));
            BumpCheck {
                change_point: c,
                before,
                after,
                holds: after > before,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proxy_diameter_examples() {
        assert_eq!(paper_proxy_diameter(5, 3), 1.0);
        assert!((paper_proxy_diameter(81, 3) - 1.0).abs() < 1e-12);
        assert!((paper_proxy_diameter(3usize.pow(6), 3) - 3.0).abs() < 1e-12);
        assert_eq!(paper_proxy_diameter(5, 1), 1.0);
    }

    #[test]
    fn exact_mode_on_deterministic_cycle() {
        use crate::mdp::MdpConfig;
        let cycle = MdpConfig::new(2, 1, vec![0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let m = SwitchingMdp::new(vec![cycle.clone(), cycle], vec![5], 10).unwrap();
        let spec = ExperimentSpec::default();
        assert_eq!(diameter_for_window(&spec, &m).unwrap(), 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(ExperimentSpec::default().validate().is_ok());
        let bad = [
            ExperimentSpec {
                runs: 0,
                ..Default::default()
            },
            ExperimentSpec {
                agents: vec![],
                ..Default::default()
            },
            ExperimentSpec {
                agents: vec![AgentKind::Ucrl2, AgentKind::Ucrl2],
                ..Default::default()
            },
            ExperimentSpec {
                delta: 1.0,
                ..Default::default()
            },
            ExperimentSpec {
                horizon: 3,
                changes: 2,
                ..Default::default()
            },
            ExperimentSpec {
                save_traces: true,
                ..Default::default()
            },
        ];
        for spec in bad {
            assert!(matches!(spec.validate(), Err(Error::Input(_))), "{spec:?}");
        }
    }

    #[test]
    fn spec_json_defaults() {
        let spec: ExperimentSpec = serde_json::from_str(r#"{"changes": 4, "diameter_mode": "paper_proxy"}"#).unwrap();
        assert_eq!(spec.changes, 4);
        assert_eq!(spec.diameter_mode, DiameterMode::PaperProxy);
        assert_eq!(spec.horizon, 100_000);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"chnages": 4}"#).is_err());
    }

    #[test]
    fn agent_seeds_differ() {
        let spec = ExperimentSpec::default();
        let seeds: Vec<u64> = AgentKind::ALL.iter().map(|&k| spec.agent_seed(3, k)).collect();
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
        assert_ne!(spec.agent_seed(3, AgentKind::SwUcrl), spec.agent_seed(4, AgentKind::SwUcrl));
    }

    #[test]
    fn welford_matches_two_pass() {
        let rows = [vec![1.0, 2.0], vec![3.0, 2.0], vec![8.0, 2.0]];
        let mut w = Welford::new(2);
        rows.iter().for_each(|r| w.push(r));
        assert!((w.mean[0] - 4.0).abs() < 1e-15);
        // sample variance of 1,3,8 is 13; stderr sqrt(13/3)
        assert!((w.stderr()[0] - (13.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(w.stderr()[1], 0.0);
    }

    #[test]
    fn bump_windows_clip_to_horizon() {
        // per-step regret 0 up to step 5, then 1
        let cum: Vec<f64> = (1..=10).map(|t: i32| (t - 5).max(0) as f64).collect();
        let b = bump_checks(&cum, &[6], 3);
        assert_eq!(b[0].before, 0.0);
        assert_eq!(b[0].after, 1.0);
        assert!(b[0].holds);
        let b = bump_checks(&cum, &[2], 50);
        assert_eq!(b[0].before, 0.0);
        assert!((b[0].after - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_run_all_agents() {
        let spec = ExperimentSpec {
            horizon: 2000,
            changes: 0,
            runs: 2,
            agents: AgentKind::ALL.to_vec(),
            jobs: 2,
            ..Default::default()
        };
        let agg = run_experiment(&spec).unwrap();
        assert!(agg.failures.is_empty());
        assert_eq!(agg.completed_runs, vec![0, 1]);
        // with no changes the window is the horizon and every agent is UCRL2
        assert!(agg.windows.iter().all(|&w| w == 2000));
        for a in &agg.agents {
            assert_eq!(a.mean_regret.len(), 2000);
        }
        assert!(agg.bumps.is_empty());
        assert!(agg.ok());
    }

    #[test]
    fn results_independent_of_jobs() {
        let spec = ExperimentSpec {
            horizon: 800,
            changes: 2,
            runs: 5,
            jobs: 1,
            ..Default::default()
        };
        let one = run_experiment(&spec).unwrap();
        let four = run_experiment(&ExperimentSpec { jobs: 4, ..spec }).unwrap();
        assert_eq!(one.agents, four.agents);
        assert_eq!(one.audits, four.audits);
        assert_eq!(one.windows, four.windows);
    }
}
