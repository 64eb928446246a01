//! Byzantine behaviour: which clients are compromised and what they upload.
//!
//! A fixed fraction of clients is marked malicious for the whole run; a
//! malicious client's uploaded gradient is replaced by the configured attack
//! before anyone else sees it. Attack randomness lives on its own RNG
//! stream so honest uploads are bit-identical whether the attack is on or
//! off.

use crate::error::{Error, Result};
use crate::model::ParamVector;
use crate::rng::{stream, Purpose};
use rand::Rng;
use std::collections::BTreeSet;

/// The three gradient attacks (plus no attack).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttackKind {
    None,
    /// Multiply gradient elements by λ drawn uniformly from `[floor, 1)`.
    GradientScaling { floor: f64 },
    /// Replace the gradient with the all-zeros vector.
    SameValue,
    /// Flip the gradient's sign.
    BackGradient,
}

/// Full adversary configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Percentage of all K clients that are malicious, in [0, 100).
    pub epsilon_percent: f64,
    /// Scaling only: draw a single λ per gradient instead of one per
    /// element (off by default — per-element is the stronger distortion).
    pub per_gradient_lambda: bool,
    /// Whether malicious committee members also attack the gradient they
    /// contribute to scoring (on by default).
    pub attack_committee: bool,
}

impl AttackSpec {
    pub fn none() -> Self {
        AttackSpec {
            kind: AttackKind::None,
            epsilon_percent: 0.0,
            per_gradient_lambda: false,
            attack_committee: true,
        }
    }

    pub fn new(kind: AttackKind, epsilon_percent: f64) -> Self {
        AttackSpec {
            kind,
            epsilon_percent,
            per_gradient_lambda: false,
            attack_committee: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..100.0).contains(&self.epsilon_percent) {
            return Err(Error::Config(format!(
                "malicious fraction must be in [0, 100) percent, got {}",
                self.epsilon_percent
            )));
        }
        if let AttackKind::GradientScaling { floor } = self.kind {
            if !(floor > 0.0 && floor < 1.0) {
                return Err(Error::Config(format!(
                    "gradient-scaling floor must be in (0, 1), got {floor}"
                )));
            }
        }
        Ok(())
    }

    /// True when this spec can change at least one upload.
    pub fn is_active(&self) -> bool {
        self.kind != AttackKind::None && self.epsilon_percent > 0.0
    }
}

/// Number of malicious clients for a population of `k`: round(ε% · k).
pub fn malicious_count(k: usize, epsilon_percent: f64) -> usize {
    ((epsilon_percent / 100.0) * k as f64).round() as usize
}

/// Draw the run-constant malicious set: exactly `round(ε%·K)` distinct ids,
/// deterministic in the seed.
pub fn assign_malicious(k: usize, epsilon_percent: f64, seed: u64) -> Result<BTreeSet<usize>> {
    if !(0.0..100.0).contains(&epsilon_percent) {
        return Err(Error::Config(format!(
            "malicious fraction must be in [0, 100) percent, got {epsilon_percent}"
        )));
    }
    let count = malicious_count(k, epsilon_percent);
    if count >= k && count > 0 {
        return Err(Error::Config(format!(
            "malicious count {count} would compromise all {k} clients"
        )));
    }
    let mut rng = stream(seed, Purpose::MaliciousAssign, 0, 0);
    let picked = rand::seq::index::sample(&mut rng, k, count);
    Ok(picked.into_iter().collect())
}

/// Replace a malicious client's upload according to the attack kind.
///
/// The caller provides the client's attack-purpose RNG stream; only the
/// scaling attack consumes randomness.
pub fn apply_attack(
    gradient: &ParamVector,
    spec: &AttackSpec,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> ParamVector {
    match spec.kind {
        AttackKind::None => gradient.clone(),
        AttackKind::SameValue => ParamVector::zeros(gradient.dim()),
        AttackKind::BackGradient => gradient.scaled(-1.0),
        AttackKind::GradientScaling { floor } => {
            let mut out = gradient.clone();
            if spec.per_gradient_lambda {
                let lambda: f64 = rng.random_range(floor..1.0);
                for v in &mut out.values {
                    *v *= lambda;
                }
            } else {
                for v in &mut out.values {
                    let lambda: f64 = rng.random_range(floor..1.0);
                    *v *= lambda;
                }
            }
            out
        }
    }
}
