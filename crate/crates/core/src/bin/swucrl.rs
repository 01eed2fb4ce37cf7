use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use swucrl::bounds::BoundInputs;
use swucrl::harness::{emit_outputs, proposition1_property_test, run_experiment, DiameterMode, ExperimentSpec};
use swucrl::solvers::{diameter, optimal_gain};
use swucrl::{AgentKind, Error, SwitchingMdp};

#[derive(Parser)]
#[command(name = "swucrl", version, about = "Sliding-window UCRL experiments on switching MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the regret experiment and write CSVs, audits and a plot script
    Run(RunArgs),
    /// Print the bound calculators' values as JSON
    Bounds(BoundsArgs),
    /// Randomized check of the summation inequality used by the weighted-visit bound
    Proptest(PropArgs),
    /// Print the optimal gain and diameter of every configuration of an instance
    Solve(SolveArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment spec; flags given here override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    changes: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run i uses instance seed base + i
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated agent names, e.g. SW_UCRL,UCRL2_R,UCRL2_RW
    #[arg(long, value_delimiter = ',')]
    agents: Option<Vec<AgentKind>>,
    /// Fixed window instead of the rounded optimal window
    #[arg(long)]
    window: Option<u64>,
    /// exact or paper_proxy
    #[arg(long)]
    diameter_mode: Option<DiameterMode>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every trace under <out>/traces
    #[arg(long)]
    save_traces: bool,
}

impl RunArgs {
    fn spec(&self) -> swucrl::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => ExperimentSpec::default(),
        };
        macro_rules! apply {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { spec.$target = v; })*
            };
        }
        apply!(
            states => states,
            actions => actions,
            horizon => horizon,
            changes => changes,
            delta => delta,
            runs => runs,
            seed => base_seed,
            agents => agents,
            diameter_mode => diameter_mode,
            jobs => jobs,
        );
        if self.window.is_some() {
            spec.window_override = self.window;
        }
        if self.out.is_some() {
            spec.output_dir = self.out.clone();
        }
        spec.save_traces |= self.save_traces;
        if spec.output_dir.is_none() {
            spec.output_dir = Some(PathBuf::from("results"));
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 100_000.0)]
    horizon: f64,
    /// Window to evaluate at; defaults to the rounded optimal window
    #[arg(long)]
    window: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    changes: f64,
    #[arg(long, default_value_t = 1.0)]
    diameter: f64,
    #[arg(long, default_value_t = 5.0)]
    states: f64,
    #[arg(long, default_value_t = 3.0)]
    actions: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Target average per-step regret for the sample-complexity bound
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

#[derive(Args)]
struct PropArgs {
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 50)]
    max_n: usize,
    #[arg(long, default_value_t = 1000)]
    max_val: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Span tolerance for the gain
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
}

#[derive(Serialize)]
struct ConfigSolution {
    gain: f64,
    policy: Vec<usize>,
    diameter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diameter_error: Option<String>,
}

#[derive(Serialize)]
struct Solution {
    change_points: Vec<u64>,
    horizon: u64,
    configs: Vec<ConfigSolution>,
}

enum Outcome {
    Ok,
    AuditFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailed) => ExitCode::from(1),
        Err(e @ (Error::Input(_) | Error::Json(_) | Error::Io(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> swucrl::Result<Outcome> {
    match cmd {
        Command::Run(args) => {
            let spec = args.spec()?;
            spec.validate()?;
            let out = spec.output_dir.clone().unwrap_or_default();
            let agg = run_experiment(&spec)?;
            let files = emit_outputs(&agg, &out)?;
            for a in &agg.agents {
                println!(
                    "{:<9} final regret {:>10.1} ± {:.1}",
                    a.kind.name(),
                    a.final_mean(),
                    a.final_stderr()
                );
            }
            println!(
                "{} of {} runs completed; audits {}; wrote {} files to {}",
                agg.completed_runs.len(),
                spec.runs,
                if agg.audits_passed() { "passed" } else { "FAILED" },
                files.len(),
                out.display()
            );
            Ok(if agg.ok() { Outcome::Ok } else { Outcome::AuditFailed })
        }
        Command::Bounds(b) => {
            if !(b.delta > 0.0 && b.delta < 1.0) || !(b.epsilon > 0.0 && b.epsilon <= 1.0) {
                return Err(Error::Input("δ must lie in (0, 1) and ε in (0, 1]".into()));
            }
            if [b.horizon, b.diameter, b.states, b.actions].iter().any(|&v| !(v > 0.0)) || b.changes < 0.0 {
                return Err(Error::Input("T, D, S and A must be positive and l nonnegative".into()));
            }
            let report = BoundInputs {
                horizon: b.horizon,
                window: b.window,
                changes: b.changes,
                diameter: b.diameter,
                states: b.states,
                actions: b.actions,
                delta: b.delta,
                epsilon: b.epsilon,
            }
            .report();
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(Outcome::Ok)
        }
        Command::Proptest(p) => {
            let report = proposition1_property_test(p.trials, p.max_n, p.max_val, p.seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed() { Outcome::Ok } else { Outcome::AuditFailed })
        }
        Command::Solve(s) => {
            let m = SwitchingMdp::read_json(&s.instance)?;
            let mut configs = Vec::new();
            for c in m.configs() {
                let g = optimal_gain(c, s.eps)?;
                let (diameter, diameter_error) = match diameter(c) {
                    Ok(d) => (Some(d.diameter), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                configs.push(ConfigSolution {
                    gain: g.gain,
                    policy: g.policy,
                    diameter,
                    diameter_error,
                });
            }
            let solution = Solution {
                change_points: m.change_points().to_vec(),
                horizon: m.horizon(),
                configs,
            };
            println!("{}", serde_json::to_string_pretty(&solution)?);
            Ok(Outcome::Ok)
        }
    }
}
