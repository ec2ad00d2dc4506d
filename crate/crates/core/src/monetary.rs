use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric block-reward schedule `R_h = r0 · λ^h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonetaryPolicy {
    pub r0: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Deflationary,
    Constant,
    Inflationary,
}

impl Default for MonetaryPolicy {
    fn default() -> Self {
        MonetaryPolicy {
            r0: 1.0,
            lambda: 1.0,
        }
    }
}

impl MonetaryPolicy {
    pub fn new(r0: f64, lambda: f64) -> Result<Self> {
        let p = MonetaryPolicy { r0, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::Parameter(format!(
                "r0 must be positive, got {}",
                self.r0
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> PolicyKind {
        if self.lambda < 1.0 {
            PolicyKind::Deflationary
        } else if self.lambda == 1.0 {
            PolicyKind::Constant
        } else {
            PolicyKind::Inflationary
        }
    }

    pub fn block_reward(&self, h: u64) -> f64 {
        if self.lambda == 1.0 {
            return self.r0;
        }
        self.r0 * self.lambda.powf(h as f64)
    }

    /// Cumulative issuance `Σ_{h' ≤ h} R_{h'}`.
    pub fn max_supply(&self, h: u64) -> f64 {
        let n = h as f64 + 1.0;
        if self.lambda == 1.0 {
            return self.r0 * n;
        }
        self.r0 * (1.0 - self.lambda.powf(n)) / (1.0 - self.lambda)
    }

    /// Checks that every reward up to `h_max` is finite.
    pub fn check_horizon(&self, h_max: u64) -> Result<()> {
        let s = self.max_supply(h_max);
        if !s.is_finite() {
            return Err(Error::Parameter(format!(
                "reward schedule r0={} lambda={} overflows before height {h_max}",
                self.r0, self.lambda
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_and_supply_examples() {
        let c = MonetaryPolicy::new(1.0, 1.0).unwrap();
        assert_eq!(c.block_reward(99), 1.0);
        assert_eq!(c.max_supply(99), 100.0);
        assert_eq!(c.kind(), PolicyKind::Constant);

        let d = MonetaryPolicy::new(1.0, 0.5).unwrap();
        assert_eq!(d.block_reward(3), 0.125);
        assert!((d.max_supply(3) - 1.875).abs() < 1e-15);
        assert_eq!(d.kind(), PolicyKind::Deflationary);

        let i = MonetaryPolicy::new(1.0, 1.05).unwrap();
        assert!((i.block_reward(2) - 1.1025).abs() < 1e-14);
        assert!((i.max_supply(2) - 3.1525).abs() < 1e-13);
        assert_eq!(i.kind(), PolicyKind::Inflationary);
    }

    #[test]
    fn supply_increments_are_rewards() {
        for lambda in [0.5, 0.9, 1.0, 1.001, 1.05] {
            let p = MonetaryPolicy::new(2.5, lambda).unwrap();
            for h in 1..400u64 {
                let inc = p.max_supply(h) - p.max_supply(h - 1);
                let r = p.block_reward(h);
                assert!(
                    (inc - r).abs() <= 1e-9 * p.max_supply(h),
                    "lambda={lambda} h={h}"
                );
                assert!(p.max_supply(h) >= p.max_supply(h - 1));
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let p = MonetaryPolicy::new(1.0, 1.05).unwrap();
        assert!(p.check_horizon(10_000).is_ok());
        assert!(p.check_horizon(20_000).is_err());
        assert!(MonetaryPolicy::new(0.0, 1.0).is_err());
    }
}
