//! Randomized check of the summation inequality behind the weighted-visit
//! bound: for nonnegative integers with `x_1 = 0`, `x_{k+1} = x_k + z_k`,
//! `z_k <= x_k + y_k`, `Y >= y_1 >= y_2 >= ...` and `Z_k = max(1, x_k + y_k)`,
//!
//! `sum_k z_k / sqrt(Z_k) <= sqrt(Y) + (sqrt(2) + 1)·sqrt(sum_k z_k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Slack for floating-point rounding in the comparison.
const TOL: f64 = 1e-12;

/// Values stay below this so sums are exact in `u64` and `f64`; a sequence
/// that would exceed it is cut short.
const LIMIT: u64 = 1 << 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prop1Sequence {
    pub y_cap: u64,
    pub y: Vec<u64>,
    pub z: Vec<u64>,
}

impl Prop1Sequence {
    /// `x_k`, the running sum of earlier `z`.
    pub fn x(&self) -> Vec<u64> {
        let mut acc = 0;
        self.z
            .iter()
            .map(|&z| {
                let x = acc;
                acc += z;
                x
            })
            .collect()
    }
}

/// Returns `(lhs, rhs)` after checking the hypotheses.
pub fn check_sequence(seq: &Prop1Sequence) -> Result<(f64, f64)> {
    if seq.y.len() != seq.z.len() {
        return input("y and z differ in length");
    }
    if seq.y.windows(2).any(|w| w[1] > w[0]) {
        return input("y is not nonincreasing");
    }
    if seq.y.first().is_some_and(|&y| y > seq.y_cap) {
        return input("y exceeds its cap");
    }
    let x = seq.x();
    let mut lhs = 0.0;
    for k in 0..seq.z.len() {
        let total = x[k] + seq.y[k];
        if seq.z[k] > total {
            return input(format!("z_{} = {} exceeds x + y = {total}", k + 1, seq.z[k]));
        }
        lhs += seq.z[k] as f64 / (total.max(1) as f64).sqrt();
    }
    let sum_z: u64 = seq.z.iter().sum();
    let rhs = (seq.y_cap as f64).sqrt() + (2f64.sqrt() + 1.0) * (sum_z as f64).sqrt();
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Violation {
    pub sequence: Prop1Sequence,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub trials: usize,
    pub violations: Vec<Prop1Violation>,
    /// Largest `lhs / rhs` seen over trials with `rhs > 0`.
    pub max_ratio: f64,
}

impl Prop1Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Draws a sequence satisfying the hypotheses, with lengths up to `max_n`
/// and `Y` up to `max_val`. Extreme choices (`z = x + y`, `z = 0`, `y`
/// unchanged) are favoured since they are where the bound is tightest.
pub fn random_sequence<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_val: u64) -> Prop1Sequence {
    let n = rng.random_range(1..=max_n.max(1));
    let y_cap = rng.random_range(0..=max_val.min(LIMIT));
    let mut y_cur = if rng.random_bool(0.5) {
        y_cap
    } else {
        rng.random_range(0..=y_cap)
    };
    let (mut y, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut x = 0u64;
    for _ in 0..n {
        let room = x + y_cur;
        if room > LIMIT {
            break;
        }
        y.push(y_cur);
        let zk = match rng.random_range(0..6) {
            0 | 1 => room,
            2 => 0,
            _ => rng.random_range(0..=room),
        };
        z.push(zk);
        x += zk;
        if rng.random_bool(0.3) {
            y_cur = rng.random_range(0..=y_cur);
        }
    }
    Prop1Sequence { y_cap, y, z }
}

pub fn proposition1_property_test(trials: usize, max_n: usize, max_val: u64, seed: u64) -> Result<Prop1Report> {
    if trials == 0 {
        return input("at least one trial is required");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Prop1Report {
        trials,
        violations: Vec::new(),
        max_ratio: 0.0,
    };
    for _ in 0..trials {
        let seq = random_sequence(&mut rng, max_n, max_val);
        let (lhs, rhs) = check_sequence(&seq)?;
        if rhs > 0.0 {
            report.max_ratio = report.max_ratio.max(lhs / rhs);
        }
        if lhs > rhs * (1.0 + TOL) + TOL {
            report.violations.push(Prop1Violation { sequence: seq, lhs, rhs });
        }
    }
    Ok(report)
}
