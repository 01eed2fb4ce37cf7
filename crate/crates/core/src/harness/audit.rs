//! Per-run checks of SW-UCRL's episode-count, weighted-visit and episode-length
//! bounds, recomputed from the step records alone.

use serde::{Deserialize, Serialize};

use crate::agents::RunTrace;
use crate::bounds::{episode_count_bound, validate_window, weighted_visit_bound};
use crate::mdp::SwitchingMdp;

/// Relative tolerance between the recomputed and live weighted-visit sums.
const SUM_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAudit {
    pub run: usize,
    pub window: u64,
    pub admissible: bool,
    pub episodes: usize,
    pub episode_bound: f64,
    /// `episode_bound - episodes`.
    pub episode_margin: f64,
    pub weighted_visits: f64,
    pub weighted_visit_bound: f64,
    /// `weighted_visit_bound - weighted_visits`.
    pub weighted_visit_margin: f64,
    pub max_episode_length: u64,
    /// `W - max_episode_length`.
    pub episode_length_margin: i64,
    /// Whether the live sum recorded during the run matches the recount.
    pub live_sum_matches: bool,
    /// Episode-length cap and recount hold, and for an admissible window
    /// both bounds hold.
    pub passed: bool,
}

/// Recounts `N_k` and `v_k` from the step records of a SW-UCRL trace.
///
/// `N_k(s,a)` is the number of visits in steps `max(1, t_k - W)..t_k - 1` and
/// `v_k(s,a)` the visits within episode `k`, where episodes are read off the
/// step records' episode index.
pub fn audit_sw_ucrl(trace: &RunTrace, run: usize, m: &SwitchingMdp, delta: f64) -> RunAudit {
    let (n_s, n_a) = (m.num_states(), m.num_actions());
    let sa = n_s * n_a;
    let horizon = trace.steps.len();
    let window = trace.window.unwrap_or(horizon as u64).max(1);

    // prefix[t * sa + i]: visits to pair i in steps 1..=t
    let mut prefix = vec![0u32; (horizon + 1) * sa];
    for (t, step) in trace.steps.iter().enumerate() {
        let (prev, cur) = prefix.split_at_mut((t + 1) * sa);
        let cur = &mut cur[..sa];
        cur.copy_from_slice(&prev[t * sa..]);
        cur[step.state * n_a + step.action] += 1;
    }

    let mut starts = Vec::new();
    for (i, step) in trace.steps.iter().enumerate() {
        if i == 0 || step.episode != trace.steps[i - 1].episode {
            starts.push(i);
        }
    }
    starts.push(horizon);

    let mut weighted = 0.0;
    let mut max_len = 0u64;
    for k in 0..starts.len() - 1 {
        let (first, end) = (starts[k], starts[k + 1]);
        max_len = max_len.max((end - first) as u64);
        // step index t_k = first + 1; counts cover steps lo+1..=first
        let lo = first.saturating_sub(window as usize);
        for i in 0..sa {
            let v = prefix[end * sa + i] - prefix[first * sa + i];
            if v > 0 {
                let n = prefix[first * sa + i] - prefix[lo * sa + i];
                weighted += v as f64 / (n.max(1) as f64).sqrt();
            }
        }
    }
    let episodes = starts.len() - 1;

    let (t, w, s, a) = (horizon as f64, window as f64, n_s as f64, n_a as f64);
    let admissible = validate_window(w, t, s, a, delta).admissible;
    let episode_bound = episode_count_bound(t, w, s, a);
    let weighted_bound = weighted_visit_bound(t, w, s, a);
    let live = trace.weighted_visit_sum();
    let live_sum_matches = (live - weighted).abs() <= SUM_RTOL * weighted.max(1.0);
    let episode_margin = episode_bound - episodes as f64;
    let weighted_visit_margin = weighted_bound - weighted;
    let episode_length_margin = window as i64 - max_len as i64;
    let passed = episode_length_margin >= 0
        && live_sum_matches
        && (!admissible || (episode_margin >= 0.0 && weighted_visit_margin >= 0.0));
    RunAudit {
        run,
        window,
        admissible,
        episodes,
        episode_bound,
        episode_margin,
        weighted_visits: weighted,
        weighted_visit_bound: weighted_bound,
        weighted_visit_margin,
        max_episode_length: max_len,
        episode_length_margin,
        live_sum_matches,
        passed,
    }
}
