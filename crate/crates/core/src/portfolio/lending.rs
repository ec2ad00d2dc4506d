use serde::{Deserialize, Serialize};

const MIN_SUPPLY: f64 = 1e-12;

/// Linear utilization-based lending pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LendingMarket {
    pub base_rate: f64,
    pub slope: f64,
    pub supplied: f64,
    pub demanded: f64,
}

impl LendingMarket {
    pub fn utilization(&self) -> f64 {
        (self.demanded / self.supplied.max(MIN_SUPPLY)).min(1.0)
    }
}

/// `clamp(base + slope·U, 0, 1)` with utilization `U` capped at 1.
pub fn compute_borrow_rate(market: &LendingMarket) -> f64 {
    (market.base_rate + market.slope * market.utilization()).clamp(0.0, 1.0)
}
