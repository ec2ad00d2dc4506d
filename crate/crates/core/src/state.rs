use crate::error::{Error, Result};

/// Token balances of every validator plus supply bookkeeping.
///
/// `max_supply` is everything ever issued (genesis plus block rewards);
/// `burned` is what slashing, defaults and forfeited rewards destroyed.
#[derive(Debug, Clone, PartialEq)]
pub struct StakeState {
    pub stakes: Vec<f64>,
    pub loans: Vec<f64>,
    pub lent: Vec<f64>,
    pub max_supply: f64,
    pub burned: f64,
    pub height: u64,
}

impl StakeState {
    /// Genesis state: supply equals the initial stake.
    pub fn genesis(stakes: Vec<f64>) -> Result<Self> {
        if let Some(bad) = stakes.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!(
                "initial stakes must be finite and >= 0, got {bad}"
            )));
        }
        let n = stakes.len();
        let max_supply = stakes.iter().sum();
        Ok(StakeState {
            stakes,
            loans: vec![0.0; n],
            lent: vec![0.0; n],
            max_supply,
            burned: 0.0,
            height: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.stakes.len()
    }

    pub fn total_stake(&self) -> f64 {
        self.stakes.iter().sum()
    }

    pub fn total_lent(&self) -> f64 {
        self.lent.iter().sum()
    }

    /// Normalized stake share of validator `i`.
    pub fn share(&self, i: usize) -> Result<f64> {
        let total = self.total_stake();
        if total <= 0.0 {
            return Err(Error::Domain("total stake is zero".into()));
        }
        Ok(self.stakes[i] / total)
    }

    /// Issue a block reward into the supply schedule.
    pub fn mint(&mut self, reward: f64) {
        self.max_supply += reward;
    }

    /// Tokens that exist outside the stake and lending balances
    /// (e.g. minted derivative holdings). Zero in the two-asset model.
    pub fn unaccounted(&self) -> f64 {
        self.max_supply - self.burned - self.total_stake() - self.total_lent()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let neg = |v: &[f64]| v.iter().any(|x| !(*x >= 0.0));
        if neg(&self.stakes) || neg(&self.loans) || neg(&self.lent) || !(self.burned >= 0.0) {
            return Err(Error::Internal(format!(
                "negative or NaN balance at height {}",
                self.height
            )));
        }
        let held = self.total_stake() + self.total_lent() + self.burned;
        if held > self.max_supply + 1e-9 * self.max_supply.max(1.0) {
            return Err(Error::Internal(format!(
                "supply overflow at height {}: held {held} > max {}",
                self.height, self.max_supply
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genesis_accounting() {
        let s = StakeState::genesis(vec![3.0, 1.0]).unwrap();
        assert_eq!(s.max_supply, 4.0);
        assert_eq!(s.share(0).unwrap(), 0.75);
        s.check_invariants().unwrap();
        assert!(StakeState::genesis(vec![1.0, -1.0]).is_err());
        let z = StakeState::genesis(vec![0.0, 0.0]).unwrap();
        assert!(z.share(0).is_err());
    }

    #[test]
    fn overflow_detected() {
        let mut s = StakeState::genesis(vec![3.0, 1.0]).unwrap();
        s.stakes[0] += 1.0;
        assert!(matches!(s.check_invariants(), Err(Error::Internal(_))));
        s.mint(1.0);
        s.check_invariants().unwrap();
    }
}
