//! Regret CSVs, audit and summary JSON, and a gnuplot script for an
//! aggregated experiment.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{AggregateResult, BumpCheck, ExperimentSpec, RunAudit, RunFailure};
use crate::agents::AgentKind;
use crate::bounds::{corollary1_bound, theorem1_bound};

#[derive(Serialize)]
struct AuditFile<'a> {
    passed: bool,
    runs: &'a [RunAudit],
}

#[derive(Serialize)]
struct Stats {
    min: f64,
    mean: f64,
    max: f64,
}

impl Stats {
    fn of(xs: impl Iterator<Item = f64> + Clone) -> Option<Self> {
        let n = xs.clone().count();
        if n == 0 {
            return None;
        }
        Some(Self {
            min: xs.clone().fold(f64::INFINITY, f64::min),
            mean: xs.clone().sum::<f64>() / n as f64,
            max: xs.fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Serialize)]
struct AgentLine {
    agent: AgentKind,
    final_regret_mean: f64,
    final_regret_stderr: f64,
    episodes: Option<Stats>,
    max_episode_length: Option<Stats>,
}

#[derive(Serialize)]
struct Overlay {
    /// Mean diameter and window over completed runs, at which the bounds are evaluated.
    diameter: f64,
    window: f64,
    theorem1_bound: f64,
    corollary1_bound: f64,
    /// Whether the regret bound exceeds `T`.
    vacuous: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    spec: &'a ExperimentSpec,
    runs_completed: usize,
    failures: &'a [RunFailure],
    failure_fraction: f64,
    audits_passed: bool,
    windows: Option<Stats>,
    diameters: Option<Stats>,
    agents: Vec<AgentLine>,
    bounds: Option<Overlay>,
    bump_window: u64,
    bumps: &'a [BumpCheck],
}

/// Writes `regret_<agent>.csv`, `audit.json`, `summary.json` and `plot.gp`
/// into `dir`, returning the paths written.
pub fn emit_outputs(agg: &AggregateResult, dir: &Path) -> crate::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    for a in &agg.agents {
        let path = dir.join(format!("regret_{}.csv", a.kind.slug()));
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "t,mean_regret,stderr")?;
        for (t, (m, se)) in a.mean_regret.iter().zip(&a.stderr).enumerate() {
            writeln!(w, "{},{},{}", t + 1, m, se)?;
        }
        w.flush()?;
        written.push(path);
    }

    let path = dir.join("audit.json");
    let audit = AuditFile {
        passed: agg.audits_passed(),
        runs: &agg.audits,
    };
    std::fs::write(&path, serde_json::to_string_pretty(&audit)?)?;
    written.push(path);

    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary(agg))?)?;
    written.push(path);

    let path = dir.join("plot.gp");
    std::fs::write(&path, plot_script(agg))?;
    written.push(path);
    Ok(written)
}

fn summary(agg: &AggregateResult) -> Summary<'_> {
    let spec = &agg.spec;
    let windows = Stats::of(agg.windows.iter().map(|&w| w as f64));
    let diameters = Stats::of(agg.diameters.iter().copied());
    let bounds = match (&windows, &diameters) {
        (Some(w), Some(d)) => {
            let (t, l, s, a) = (
                spec.horizon as f64,
                spec.changes as f64,
                spec.states as f64,
                spec.actions as f64,
            );
            let theorem1 = theorem1_bound(t, w.mean, l, d.mean, s, a, spec.delta);
            Some(Overlay {
                diameter: d.mean,
                window: w.mean,
                theorem1_bound: theorem1,
                corollary1_bound: corollary1_bound(t, l, d.mean, s, a, spec.delta),
                vacuous: theorem1 > t,
            })
        }
        _ => None,
    };
    Summary {
        spec,
        runs_completed: agg.completed_runs.len(),
        failures: &agg.failures,
        failure_fraction: agg.failure_fraction(),
        audits_passed: agg.audits_passed(),
        windows,
        diameters,
        agents: agg
            .agents
            .iter()
            .map(|a| AgentLine {
                agent: a.kind,
                final_regret_mean: a.final_mean(),
                final_regret_stderr: a.final_stderr(),
                episodes: Stats::of(a.episode_counts.iter().map(|&e| e as f64)),
                max_episode_length: Stats::of(a.max_episode_lengths.iter().map(|&e| e as f64)),
            })
            .collect(),
        bounds,
        bump_window: agg.bump_window,
        bumps: &agg.bumps,
    }
}

fn plot_script(agg: &AggregateResult) -> String {
    let spec = &agg.spec;
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot -p plot.gp");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key top left");
    let _ = writeln!(s, "set xlabel 'time step'");
    let _ = writeln!(s, "set ylabel 'cumulative regret'");
    let _ = writeln!(
        s,
        "set title 'S={} A={} T={} l={} delta={} ({} runs)'",
        spec.states,
        spec.actions,
        spec.horizon,
        spec.changes,
        spec.delta,
        agg.completed_runs.len()
    );
    let change_points = agg
        .completed_runs
        .first()
        .and_then(|&r| spec.instance(r).ok())
        .map(|m| m.change_points().to_vec())
        .unwrap_or_default();
    for c in change_points {
        let _ = writeln!(s, "set arrow from {c}, graph 0 to {c}, graph 1 nohead dt 2 lc 'gray'");
    }
    let every = (spec.horizon / 2000).max(1);
    let curves: Vec<String> = agg
        .agents
        .iter()
        .flat_map(|a| {
            let file = format!("regret_{}.csv", a.kind.slug());
            [
                format!("'{file}' every {every}::1 using 1:($2-$3):($2+$3) with filledcurves fs transparent solid 0.2 notitle"),
                format!("'{file}' every {every}::1 using 1:2 with lines lw 2 title '{}'", a.kind.name()),
            ]
        })
        .collect();
    let _ = writeln!(s, "plot \\\n    {}", curves.join(", \\\n    "));
    s
}
