//! Closed-form regret bounds, the optimal window size, and the window
//! admissibility check.
//!
//! Logarithms are natural except the base-2 term in the admissibility check
//! and in the episode-count bound.

use serde::{Deserialize, Serialize};

pub const THEOREM1_CONSTANT: f64 = 66.12;
pub const COROLLARY_CONSTANT: f64 = 38.94;
pub const WINDOW_CONSTANT: f64 = 16.53;
/// Constant of the stationary-phase `E1` term.
pub const E1_CONSTANT: f64 = 4.36;
/// Constant of the stationary-phase `E2` term.
pub const E2_CONSTANT: f64 = 61.76;

/// `D·S·sqrt(A·ln(T/δ))`.
fn scale(horizon: f64, diameter: f64, states: f64, actions: f64, delta: f64) -> f64 {
    diameter * states * (actions * (horizon / delta).ln()).sqrt()
}

/// `W* = ((16.53/l)·T·D·S·sqrt(A·ln(T/δ)))^(2/3)`, with `D` floored at 1.
///
/// With no changes the whole horizon is the window.
pub fn optimal_window(horizon: f64, changes: f64, diameter: f64, states: f64, actions: f64, delta: f64) -> f64 {
    if changes <= 0.0 {
        return horizon;
    }
    let d = diameter.max(1.0);
    (WINDOW_CONSTANT / changes * horizon * scale(horizon, d, states, actions, delta)).powf(2.0 / 3.0)
}

/// `2lW + 66.12·⌈T/sqrt(W)⌉·D·S·sqrt(A·ln(T/δ))`.
pub fn theorem1_bound(
    horizon: f64,
    window: f64,
    changes: f64,
    diameter: f64,
    states: f64,
    actions: f64,
    delta: f64,
) -> f64 {
    2.0 * changes * window
        + THEOREM1_CONSTANT * (horizon / window.sqrt()).ceil() * scale(horizon, diameter, states, actions, delta)
}

/// `38.94·l^(1/3)·T^(2/3)·D^(2/3)·S^(2/3)·(A·ln(T/δ))^(1/3)`.
pub fn corollary1_bound(horizon: f64, changes: f64, diameter: f64, states: f64, actions: f64, delta: f64) -> f64 {
    let third = 1.0 / 3.0;
    COROLLARY_CONSTANT
        * changes.powf(third)
        * (horizon * diameter * states).powf(2.0 * third)
        * (actions * (horizon / delta).ln()).powf(third)
}

/// Steps after which the average per-step regret is at most `ε`:
/// `2α·ln(α/δ)` with `α = 38.94³·l·D²·S²·A/ε³`.
pub fn corollary2_sample_complexity(
    epsilon: f64,
    changes: f64,
    diameter: f64,
    states: f64,
    actions: f64,
    delta: f64,
) -> f64 {
    let alpha = COROLLARY_CONSTANT.powi(3) * changes * diameter.powi(2) * states.powi(2) * actions / epsilon.powi(3);
    2.0 * alpha * (alpha / delta).ln()
}

/// Episode-count bound `⌈T/W⌉·S·A·log₂(8W/(SA))`, meaningful for `W >= SA`.
pub fn episode_count_bound(horizon: f64, window: f64, states: f64, actions: f64) -> f64 {
    let sa = states * actions;
    (horizon / window).ceil() * sa * (8.0 * window / sa).log2()
}

/// Weighted-visit bound `(2√2 + 2)·⌈T/W⌉·sqrt(S·A·W)`.
pub fn weighted_visit_bound(horizon: f64, window: f64, states: f64, actions: f64) -> f64 {
    (2.0 * 2f64.sqrt() + 2.0) * (horizon / window).ceil() * (states * actions * window).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowTerm {
    /// `W >= S·A`
    StateActions,
    /// `W >= A·(log₂(8W/(SA)))²/ln(T/δ)`
    LogSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub admissible: bool,
    pub violated: Vec<WindowTerm>,
}

/// Checks both terms of the window condition at the given `W`.
pub fn validate_window(window: f64, horizon: f64, states: f64, actions: f64, delta: f64) -> WindowCheck {
    let sa = states * actions;
    let mut violated = Vec::new();
    if window < sa {
        violated.push(WindowTerm::StateActions);
    }
    let log_term = actions * (8.0 * window / sa).log2().powi(2) / (horizon / delta).ln();
    if window < log_term {
        violated.push(WindowTerm::LogSquared);
    }
    WindowCheck {
        admissible: violated.is_empty(),
        violated,
    }
}

/// Parameters for a bound report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub horizon: f64,
    pub window: Option<f64>,
    pub changes: f64,
    pub diameter: f64,
    pub states: f64,
    pub actions: f64,
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub optimal_window: f64,
    /// The window the remaining values were evaluated at.
    pub window: f64,
    pub theorem1_bound: f64,
    pub corollary1_bound: f64,
    pub corollary2_sample_complexity: f64,
    pub episode_count_bound: f64,
    pub weighted_visit_bound: f64,
    pub window_check: WindowCheck,
    /// Whether `T >= max(8δ, 2Aδ)`.
    pub horizon_condition: bool,
    /// Whether the regret bound exceeds `T`, the largest possible regret.
    pub vacuous: bool,
}

impl BoundInputs {
    pub fn report(&self) -> BoundReport {
        let BoundInputs {
            horizon,
            changes,
            diameter,
            states,
            actions,
            delta,
            epsilon,
            ..
        } = *self;
        let optimal_window = optimal_window(horizon, changes, diameter, states, actions, delta);
        let window = self.window.unwrap_or_else(|| optimal_window.round().max(1.0));
        let theorem1 = theorem1_bound(horizon, window, changes, diameter, states, actions, delta);
        BoundReport {
            inputs: *self,
            optimal_window,
            window,
            theorem1_bound: theorem1,
            corollary1_bound: corollary1_bound(horizon, changes, diameter, states, actions, delta),
            corollary2_sample_complexity: corollary2_sample_complexity(epsilon, changes, diameter, states, actions, delta),
            episode_count_bound: episode_count_bound(horizon, window, states, actions),
            weighted_visit_bound: weighted_visit_bound(horizon, window, states, actions),
            window_check: validate_window(window, horizon, states, actions, delta),
            horizon_condition: horizon >= (8.0 * delta).max(2.0 * actions * delta),
            vacuous: theorem1 > horizon,
        }
    }
}
