use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cox-Ingersoll-Ross variance process `dv = (κ − v)dt + ξ√v dB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirParams {
    pub kappa: f64,
    pub xi: f64,
    pub dt: f64,
    pub v0: f64,
}

impl Default for CirParams {
    fn default() -> Self {
        CirParams {
            kappa: 1.0,
            xi: 0.5,
            dt: 1.0,
            v0: 1.0,
        }
    }
}

impl CirParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !(self.xi >= 0.0) || !(self.v0 >= 0.0) {
            return Err(Error::Parameter(format!(
                "CIR parameters must be non-negative (kappa > 0): {self:?}"
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!(
                "CIR step must be positive, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// One full-truncation Euler step. Never returns a negative variance.
pub fn cir_step<R: Rng + ?Sized>(params: &CirParams, v: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    cir_step_with(params, v, z)
}

pub fn cir_step_with(params: &CirParams, v: f64, z: f64) -> f64 {
    let vp = v.max(0.0);
    let next = v + (params.kappa - vp) * params.dt + params.xi * (vp * params.dt).sqrt() * z;
    next.max(0.0)
}
