//! Factor duration and convexity of the derivative price.

use crate::error::{Error, Result};
use crate::pricing::PricingCurve;

/// `D = −φ'(u)/φ(u)` with a unit chain factor. At `u = 1` the left limit is
/// used, so a power law gives `D = k` there.
pub fn duration(curve: &PricingCurve, u: f64) -> Result<f64> {
    let (d1, _) = curve.derivatives(u)?;
    let phi = curve.eval(u)?.value();
    Ok(-d1 / phi)
}

/// `C = φ''(u)/φ(u)` with a unit chain factor.
pub fn convexity(curve: &PricingCurve, u: f64) -> Result<f64> {
    let (_, d2) = curve.derivatives(u)?;
    let phi = curve.eval(u)?.value();
    Ok(d2 / phi)
}

/// Duration and convexity of `r ↦ φ(chain·r + offset)` at the point where the
/// inner argument equals `u`: `chain·D` and `chain²·C`.
pub fn scaled(curve: &PricingCurve, u: f64, chain: f64) -> Result<(f64, f64)> {
    if !chain.is_finite() {
        return Err(Error::Domain(format!(
            "chain factor must be finite, got {chain}"
        )));
    }
    Ok((
        chain * duration(curve, u)?,
        chain * chain * convexity(curve, u)?,
    ))
}
