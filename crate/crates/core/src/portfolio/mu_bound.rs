//! Empirical check of the mean-return stability bound in the safe regime:
//!
//! `(1 − Lσ²/2)·‖μ(t+1) − μ(t)‖₁ ≤ C·(Δstake·(1 + 1/S) + Δlend) + 2ε`
//!
//! The constant `C` comes from an external staking/lending bound and cannot be
//! derived here, so it is fitted per segment as the smallest value for which
//! `|Δμ_s| + |Δμ_ℓ| ≤ C·(Δstake/S + Δlend)` holds at every step.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pricing::PricingCurve;

/// One epoch of an agent's means and the balances that drive them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuObservation {
    pub mu_s: f64,
    pub mu_d: f64,
    pub mu_l: f64,
    pub stake: f64,
    pub supply: f64,
    pub lend: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuBoundReport {
    pub holds: bool,
    pub fitted_c: f64,
    pub violations: usize,
    /// Largest `lhs − rhs` over the segment (≤ 0 when the bound holds).
    pub worst_gap: f64,
}

pub fn mu_bound_check(
    segment: &[MuObservation],
    lipschitz: f64,
    sigma_s2: f64,
    epsilon: f64,
) -> Result<MuBoundReport> {
    if !(lipschitz >= 0.0 && sigma_s2 >= 0.0) {
        return Err(Error::Parameter(
            "Lipschitz constant and variance must be non-negative".into(),
        ));
    }
    if lipschitz * sigma_s2 >= 2.0 {
        return Err(Error::Precondition(format!(
            "L = {lipschitz} is not below 2/σ² = {} (outside the safe regime)",
            2.0 / sigma_s2
        )));
    }
    if segment.len() < 2 {
        return Err(Error::Parameter(
            "segment needs at least two observations".into(),
        ));
    }
    let steps: Vec<(f64, f64, f64, f64)> = segment
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let d_mu = (b.mu_s - a.mu_s).abs() + (b.mu_d - a.mu_d).abs() + (b.mu_l - a.mu_l).abs();
            let d_sl = (b.mu_s - a.mu_s).abs() + (b.mu_l - a.mu_l).abs();
            let d_stake = (b.stake - a.stake).abs();
            let d_lend = (b.lend - a.lend).abs();
            (
                d_mu,
                d_sl,
                d_stake / a.supply + d_lend,
                d_stake * (1.0 + 1.0 / a.supply) + d_lend,
            )
        })
        .collect();
    let fitted_c = steps
        .iter()
        .map(|&(_, d_sl, drive, _)| {
            if drive > 0.0 {
                d_sl / drive
            } else if d_sl > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let factor = 1.0 - lipschitz * sigma_s2 / 2.0;
    let mut violations = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for &(d_mu, _, _, rhs_drive) in &steps {
        let lhs = factor * d_mu;
        let rhs = if rhs_drive > 0.0 {
            fitted_c * rhs_drive
        } else {
            0.0
        } + 2.0 * epsilon;
        let gap = lhs - rhs;
        worst_gap = worst_gap.max(gap);
        if gap > 1e-12 * lhs.abs().max(1.0) {
            violations += 1;
        }
    }
    Ok(MuBoundReport {
        holds: violations == 0,
        fitted_c,
        violations,
        worst_gap,
    })
}

/// A synthetic agent path whose normalized stake `u` wanders inside `[lo, 1]`.
///
/// `μ_s` is the stake share, `μ_ℓ` a utilization-style lending rate and `μ_d`
/// the second-order expected derivative return of the curve between epochs.
pub fn simulate_mu_segment<R: Rng + ?Sized>(
    curve: &PricingCurve,
    lo: f64,
    sigma_s2: f64,
    len: usize,
    rng: &mut R,
) -> Result<Vec<MuObservation>> {
    if !(lo > 0.0 && lo < 1.0) {
        return Err(Error::Domain(format!(
            "interval lower end must lie in (0,1), got {lo}"
        )));
    }
    let supply = 100.0;
    let issue = 10.0;
    let step = Normal::new(0.0, 0.02 * (1.0 - lo)).expect("positive std");
    let mut u: f64 = lo + (1.0 - lo) * rng.random::<f64>();
    let mut lend: f64 = 5.0 * rng.random::<f64>();
    let mut prev_phi = curve.eval(u)?.value();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let next = (u + step.sample(rng)).clamp(lo, 1.0);
        lend = (lend + step.sample(rng) * 10.0).max(0.0);
        let phi = curve.eval(next)?.value();
        let (_, d2) = curve.derivatives(next)?;
        let mu_d = (phi + sigma_s2 / 2.0 * d2) / prev_phi - 1.0;
        let stake = next * issue;
        out.push(MuObservation {
            mu_s: stake / supply,
            mu_d,
            mu_l: 0.02 + 0.01 * lend,
            stake,
            supply,
            lend,
        });
        u = next;
        prev_phi = phi;
    }
    Ok(out)
}
