//! SW-UCRL and the UCRL2-family baselines behind one run loop.
//!
//! All four agents share the same episode structure: freeze counts from the
//! retained history, build the confidence model, run extended value
//! iteration at accuracy `1/sqrt(t_k)`, then follow the optimistic policy
//! until some state-action pair's in-episode visits reach its frozen count.
//! They differ only in which history is retained:
//!
//! | agent      | history used at `t_k`                             |
//! |------------|---------------------------------------------------|
//! | `SW_UCRL`  | the last `W` steps                                |
//! | `UCRL2`    | everything                                        |
//! | `UCRL2_R`  | everything since the latest scheduled restart     |
//! | `UCRL2_RW` | everything since the latest multiple of `W` steps |
//!
//! Confidence radii always use the absolute step `t_k`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{input, Error, Result};
use crate::evi::{extended_value_iteration, ConfidenceModel};
use crate::mdp::{EnvState, SwitchingMdp};
use crate::window::{SlidingWindowBuffer, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "SW_UCRL")]
    SwUcrl,
    #[serde(rename = "UCRL2")]
    Ucrl2,
    #[serde(rename = "UCRL2_R")]
    Ucrl2R,
    #[serde(rename = "UCRL2_RW")]
    Ucrl2Rw,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [Self::SwUcrl, Self::Ucrl2, Self::Ucrl2R, Self::Ucrl2Rw];

    pub fn name(self) -> &'static str {
        match self {
            Self::SwUcrl => "SW_UCRL",
            Self::Ucrl2 => "UCRL2",
            Self::Ucrl2R => "UCRL2_R",
            Self::Ucrl2Rw => "UCRL2_RW",
        }
    }

    /// Lower-case name used in output file names.
    pub fn slug(self) -> &'static str {
        match self {
            Self::SwUcrl => "sw_ucrl",
            Self::Ucrl2 => "ucrl2",
            Self::Ucrl2R => "ucrl2_r",
            Self::Ucrl2Rw => "ucrl2_rw",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            Self::SwUcrl => 1,
            Self::Ucrl2 => 2,
            Self::Ucrl2R => 3,
            Self::Ucrl2Rw => 4,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "swucrl" => Ok(Self::SwUcrl),
            "ucrl2" => Ok(Self::Ucrl2),
            "ucrl2r" => Ok(Self::Ucrl2R),
            "ucrl2rw" => Ok(Self::Ucrl2Rw),
            _ => input(format!("unknown agent '{s}' (expected SW_UCRL, UCRL2, UCRL2_R or UCRL2_RW)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub delta: f64,
    /// Window size for `SW_UCRL`, restart period for `UCRL2_RW`; ignored otherwise.
    pub window: u64,
    /// Restart steps for `UCRL2_R`.
    pub restart_schedule: Vec<u64>,
    pub horizon: u64,
}

impl AgentConfig {
    pub fn sw_ucrl(delta: f64, window: u64, horizon: u64) -> Self {
        Self::with(AgentKind::SwUcrl, delta, window, Vec::new(), horizon)
    }

    pub fn ucrl2(delta: f64, horizon: u64) -> Self {
        Self::with(AgentKind::Ucrl2, delta, horizon.max(1), Vec::new(), horizon)
    }

    pub fn ucrl2_r(delta: f64, restart_schedule: Vec<u64>, horizon: u64) -> Self {
        Self::with(AgentKind::Ucrl2R, delta, horizon.max(1), restart_schedule, horizon)
    }

    pub fn ucrl2_rw(delta: f64, period: u64, horizon: u64) -> Self {
        Self::with(AgentKind::Ucrl2Rw, delta, period, Vec::new(), horizon)
    }

    fn with(kind: AgentKind, delta: f64, window: u64, restart_schedule: Vec<u64>, horizon: u64) -> Self {
        Self {
            kind,
            delta,
            window,
            restart_schedule,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return input(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.window == 0 {
            return input("window must be at least 1");
        }
        if self.horizon == 0 {
            return input("horizon must be positive");
        }
        Ok(())
    }

    fn restarts_at(&self, t: u64) -> bool {
        match self.kind {
            AgentKind::Ucrl2R => self.restart_schedule.binary_search(&t).is_ok(),
            AgentKind::Ucrl2Rw => t > 1 && (t - 1).is_multiple_of(self.window),
            AgentKind::SwUcrl | AgentKind::Ucrl2 => false,
        }
    }
}

/// Restart steps `⌈i³/l²⌉` for `i = 1, 2, ...` up to `T`.
pub fn default_restart_schedule(changes: usize, horizon: u64) -> Vec<u64> {
    if changes == 0 {
        return Vec::new();
    }
    let l2 = (changes as u128).pow(2);
    let mut out: Vec<u64> = Vec::new();
    for i in 1u128.. {
        let tau = (i.pow(3)).div_ceil(l2);
        if tau > horizon as u128 {
            break;
        }
        if out.last() != Some(&(tau as u64)) {
            out.push(tau as u64);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// 1-based episode index.
    pub episode: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub start: u64,
    pub length: u64,
    pub optimistic_gain: f64,
    pub evi_iterations: usize,
    /// `Σ_{s,a} v_k(s,a) / sqrt(max{1, N_k(s,a)})` for this episode.
    pub weighted_visits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub kind: AgentKind,
    /// Window (SW-UCRL) or restart period (UCRL2-RW).
    pub window: Option<u64>,
    pub steps: Vec<StepRecord>,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunTrace {
    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn max_episode_length(&self) -> u64 {
        self.episodes.iter().map(|e| e.length).max().unwrap_or(0)
    }

    pub fn weighted_visit_sum(&self) -> f64 {
        self.episodes.iter().map(|e| e.weighted_visits).sum()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Step records as CSV with header `t,state,action,reward,episode`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for step in &self.steps {
            w.serialize(step).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<StepRecord>> {
        csv::Reader::from_reader(input)
            .deserialize()
            .map(|r| r.map_err(csv_err))
            .collect()
    }

    pub fn metadata(&self) -> TraceMetadata {
        TraceMetadata {
            agent: self.kind,
            window: self.window,
            steps: self.steps.len() as u64,
            num_episodes: self.episodes.len(),
            episodes: self.episodes.clone(),
        }
    }

    /// Writes `<stem>.csv` and the `<stem>.json` episode sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?))?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.metadata())?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let steps = Self::read_csv(std::fs::File::open(dir.join(format!("{stem}.csv")))?)?;
        let meta: TraceMetadata = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        Ok(Self {
            kind: meta.agent,
            window: meta.window,
            steps,
            episodes: meta.episodes,
        })
    }
}

/// Sidecar JSON written next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub agent: AgentKind,
    pub window: Option<u64>,
    pub steps: u64,
    pub num_episodes: usize,
    pub episodes: Vec<EpisodeRecord>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("malformed trace CSV: {other:?}")),
    }
}

/// Runs one agent for the full horizon from state 0.
pub fn run_agent(cfg: &AgentConfig, m: &SwitchingMdp, seed: u64) -> Result<RunTrace> {
    cfg.validate()?;
    if cfg.horizon != m.horizon() {
        return input(format!(
            "agent horizon {} differs from instance horizon {}",
            cfg.horizon,
            m.horizon()
        ));
    }
    let (n, na) = (m.num_states(), m.num_actions());
    let horizon = m.horizon();

    if cfg.kind == AgentKind::SwUcrl {
        let check = bounds::validate_window(cfg.window as f64, horizon as f64, n as f64, na as f64, cfg.delta);
        if !check.admissible {
            log::warn!("window {} violates the admissibility condition: {:?}", cfg.window, check.violated);
        }
    }
    let mut buffer = match cfg.kind {
        AgentKind::SwUcrl => SlidingWindowBuffer::new(n, na, usize::try_from(cfg.window).unwrap_or(usize::MAX)),
        _ => SlidingWindowBuffer::unbounded(n, na),
    };
    let mut restarts = cfg.restart_schedule.clone();
    restarts.sort_unstable();
    restarts.dedup();
    let cfg = AgentConfig {
        restart_schedule: restarts,
        ..cfg.clone()
    };

    let mut env = EnvState::new(0, seed);
    let mut steps = Vec::with_capacity(horizon as usize);
    let mut episodes = Vec::new();
    let mut t = 1u64;
    while t <= horizon {
        if cfg.restarts_at(t) {
            buffer.clear();
        }
        let episode = episodes.len() + 1;
        let start = t;
        let mut stats = buffer.snapshot(start);
        let evi = ConfidenceModel::from_stats(&stats, cfg.delta)
            .and_then(|cm| extended_value_iteration(&cm, 1.0 / (start as f64).sqrt()))
            .map_err(|e| Error::Episode {
                episode,
                start,
                source: Box::new(e),
            })?;

        let mut weighted = 0.0;
        while t <= horizon && !(t > start && cfg.restarts_at(t)) {
            let s = env.state();
            let a = evi.policy[s];
            if stats.should_end(s, a) {
                break;
            }
            let (reward, next_state) = env.step(m, a)?;
            stats.record_visit(s, a);
            weighted += 1.0 / (stats.count(s, a).max(1) as f64).sqrt();
            buffer.push(Transition {
                state: s,
                action: a,
                reward,
                next_state,
            });
            steps.push(StepRecord {
                t,
                state: s,
                action: a,
                reward,
                episode,
            });
            t += 1;
        }
        episodes.push(EpisodeRecord {
            start,
            length: t - start,
            optimistic_gain: evi.optimistic_gain,
            evi_iterations: evi.iterations,
            weighted_visits: weighted,
        });
    }

    Ok(RunTrace {
        kind: cfg.kind,
        window: matches!(cfg.kind, AgentKind::SwUcrl | AgentKind::Ucrl2Rw).then_some(cfg.window),
        steps,
        episodes,
    })
}
