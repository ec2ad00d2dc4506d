//! TOML configuration. Every key is optional and falls back to the library
//! defaults; unknown sections and keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::sweep::{Axis, SimKind, SweepSpec, DEFAULT_BURN_IN};
use crate::sim3::{Components, DurationMode, Sim3Config};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonetarySection {
    pub r0: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidatorsSection {
    pub n: Option<usize>,
    pub lambda_stake: Option<f64>,
    pub lambda_collateral: Option<f64>,
    pub lambda_borrow: Option<f64>,
    pub lambda_slash: Option<f64>,
    pub iota: Option<f64>,
    pub lambda_risk_dof: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub k: Option<f64>,
    pub phi_max: Option<f64>,
    pub duration_mode: Option<DurationMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub h_max: Option<u64>,
    pub eta: Option<u64>,
    pub seed: Option<u64>,
    pub trajectories: Option<u32>,
    pub sample_stride: Option<u64>,
    pub components: Option<Components>,
    pub supply_includes_lent: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: Option<Axis>,
    pub axis2: Option<Axis>,
    pub burn_in: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LendingSection {
    pub base_rate: Option<f64>,
    pub slope: Option<f64>,
    pub demand: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CirSection {
    pub kappa: Option<f64>,
    pub xi: Option<f64>,
    pub dt: Option<f64>,
    pub v0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub monetary: MonetarySection,
    pub validators: ValidatorsSection,
    pub curve: CurveSection,
    pub sim: SimSection,
    pub sweep: SweepSection,
    pub lending: LendingSection,
    pub cir: CirSection,
}

fn put<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io_with(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Defaults overlaid with the file's values (not yet validated).
    pub fn sim3(&self) -> Sim3Config {
        let mut c = Sim3Config::default();
        let s = &mut c.sim;
        put(&mut s.monetary.r0, self.monetary.r0);
        put(&mut s.monetary.lambda, self.monetary.lambda);
        let v = &self.validators;
        put(&mut s.n, v.n);
        put(&mut s.lambda_stake, v.lambda_stake);
        put(&mut s.lambda_collateral, v.lambda_collateral);
        put(&mut s.lambda_borrow, v.lambda_borrow);
        put(&mut s.lambda_slash, v.lambda_slash);
        put(&mut s.iota, v.iota);
        put(&mut s.k, self.curve.k);
        put(&mut s.phi_max, self.curve.phi_max);
        let m = &self.sim;
        put(&mut s.h_max, m.h_max);
        put(&mut s.eta, m.eta);
        put(&mut s.seed, m.seed);
        put(&mut s.trajectories, m.trajectories);
        put(&mut s.sample_stride, m.sample_stride);
        if v.lambda_risk_dof.is_some() {
            c.lambda_risk_dof = v.lambda_risk_dof;
        }
        put(&mut c.duration_mode, self.curve.duration_mode);
        put(&mut c.components, m.components);
        put(&mut c.supply_includes_lent, m.supply_includes_lent);
        put(&mut c.lending.base_rate, self.lending.base_rate);
        put(&mut c.lending.slope, self.lending.slope);
        put(&mut c.lending.demand, self.lending.demand);
        put(&mut c.cir.kappa, self.cir.kappa);
        put(&mut c.cir.xi, self.cir.xi);
        put(&mut c.cir.dt, self.cir.dt);
        put(&mut c.cir.v0, self.cir.v0);
        c
    }

    /// Sweep over the file's axes, or the built-in grid for `kind`.
    pub fn sweep(&self, kind: SimKind) -> SweepSpec {
        let mut spec = match kind {
            SimKind::Sim2 => SweepSpec::default_sim2(),
            SimKind::Sim3 => SweepSpec::default_sim3(),
        };
        spec.base = self.sim3();
        put(&mut spec.axis1, self.sweep.axis1.clone());
        put(&mut spec.axis2, self.sweep.axis2.clone());
        spec.burn_in = self.sweep.burn_in.unwrap_or(DEFAULT_BURN_IN);
        spec
    }
}
