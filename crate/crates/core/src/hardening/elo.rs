use crate::sim::InitialConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EloParams {
    pub initial_rating: f64,
    /// Logistic scale; 400 / ln 10 reproduces the base-10 Elo curve.
    pub zeta: f64,
    pub k_default: f64,
    /// Gain for the adjacent configurations (AL, AR).
    pub k_adjacent: f64,
    /// Prioritization exponent for opponent sampling.
    pub beta: f64,
}

impl Default for EloParams {
    fn default() -> Self {
        EloParams {
            initial_rating: 1000.0,
            zeta: 400.0 / std::f64::consts::LN_10,
            k_default: 32.0,
            k_adjacent: 8.0,
            beta: 1.0,
        }
    }
}

impl EloParams {
    pub fn validate(&self) -> Result<(), String> {
        if !self.initial_rating.is_finite() {
            return Err("elo.initial_rating must be finite".into());
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err("elo.zeta must be positive".into());
        }
        if !(self.k_default > 0.0 && self.k_adjacent > 0.0) {
            return Err("elo gains must be positive".into());
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err("elo.beta must be >= 0".into());
        }
        Ok(())
    }

    pub fn k_for(&self, config: InitialConfig) -> f64 {
        if config.is_adjacent() {
            self.k_adjacent
        } else {
            self.k_default
        }
    }
}

/// Expected score of an agent rated `r_agent` against `r_opponent`.
pub fn elo_expected(r_agent: f64, r_opponent: f64, zeta: f64) -> f64 {
    1.0 / (1.0 + ((r_opponent - r_agent) / zeta).exp())
}

/// `r + k (phi - expected)`.
pub fn elo_update(rating: f64, phi: f64, expected: f64, k: f64) -> f64 {
    rating + k * (phi - expected)
}

/// Updates both participants of one game; `phi_a` is 1 when `a` won.
/// Returns the new `(r_a, r_b)`.
pub fn paired_update(r_a: f64, r_b: f64, phi_a: f64, k: f64, zeta: f64) -> (f64, f64) {
    let e_a = elo_expected(r_a, r_b, zeta);
    // Using 1 - e_a for b keeps the two deltas exact negatives of each other.
    let delta = k * (phi_a - e_a);
    (r_a + delta, r_b - delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let z = EloParams::default().zeta;
        assert_eq!(elo_expected(1000.0, 1000.0, z), 0.5);
        let e = elo_expected(1000.0, 1000.0 + z, z);
        assert!((e - 1.0 / (1.0 + std::f64::consts::E)).abs() < 1e-15);
        assert!((e - 0.26894).abs() < 1e-5);
        // Base-10 curve: 400 points of difference is odds 10:1.
        assert!((elo_expected(1400.0, 1000.0, z) - 10.0 / 11.0).abs() < 1e-12);
        assert_eq!(elo_update(1000.0, 1.0, 0.5, 32.0), 1016.0);
    }

    #[test]
    fn adjacent_gain_is_a_quarter() {
        let p = EloParams::default();
        // Measured from 0 so the deltas are not rounded against a large rating.
        let std = elo_update(0.0, 1.0, 0.3, p.k_for(InitialConfig::BL));
        let adj = elo_update(0.0, 1.0, 0.3, p.k_for(InitialConfig::AR));
        assert_eq!(adj * 4.0, std);
    }

    proptest! {
        #[test]
        fn complement(a in -5000.0..5000.0f64, b in -5000.0..5000.0f64) {
            let z = EloParams::default().zeta;
            prop_assert!((elo_expected(a, b, z) + elo_expected(b, a, z) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn paired_update_conserves_sum(a in 0.0..3000.0f64, b in 0.0..3000.0f64, win in any::<bool>()) {
            let z = EloParams::default().zeta;
            let (a2, b2) = paired_update(a, b, if win { 1.0 } else { 0.0 }, 32.0, z);
            prop_assert!(((a2 + b2) - (a + b)).abs() < 1e-12);
            prop_assert_eq!(a2 > a, win);
        }
    }
}
