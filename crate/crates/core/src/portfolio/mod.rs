//! Returns model, mean-variance selection and the closed-form portfolio claims.

pub mod cir;
pub mod duration;
pub mod lending;
pub mod markowitz;
pub mod mu_bound;

pub use nalgebra::DMatrix;

pub use cir::{cir_step, CirParams};
pub use duration::{convexity, duration};
pub use lending::{compute_borrow_rate, LendingMarket};
pub use markowitz::{solve_markowitz, solve_markowitz_long_only, MarkowitzSolution};
pub use mu_bound::{mu_bound_check, simulate_mu_segment, MuBoundReport, MuObservation};

use crate::error::{Error, Result};

/// Per-agent, per-epoch return characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnsModel {
    pub mu_s: f64,
    pub mu_d: f64,
    pub mu_l: f64,
    pub sigma_s2: f64,
    pub sigma_l2: f64,
    /// Factor duration `D`.
    pub duration: f64,
    /// Base return `B`.
    pub base: f64,
    /// Factor convexity `C`.
    pub convexity: f64,
    pub lambda_risk: f64,
}

impl ReturnsModel {
    /// Model whose derivative mean return is `B + σ_s²C/2`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_base(
        mu_s: f64,
        mu_l: f64,
        sigma_s2: f64,
        sigma_l2: f64,
        duration: f64,
        base: f64,
        convexity: f64,
        lambda_risk: f64,
    ) -> Self {
        let mut m = ReturnsModel {
            mu_s,
            mu_d: 0.0,
            mu_l,
            sigma_s2,
            sigma_l2,
            duration,
            base,
            convexity,
            lambda_risk,
        };
        m.mu_d = mean_derivative_return(&m);
        m
    }

    /// `IR = μ_d − D·μ_s`, which equals `B − Dμ_s + σ_s²C/2` for models
    /// built with [`ReturnsModel::from_base`].
    pub fn instantaneous_return(&self) -> f64 {
        self.mu_d - self.duration * self.mu_s
    }

    pub fn mu2(&self) -> [f64; 2] {
        [self.mu_s, self.mu_d]
    }

    pub fn mu3(&self) -> [f64; 3] {
        [self.mu_s, self.mu_d, self.mu_l]
    }

    pub fn cov2(&self) -> DMatrix<f64> {
        two_asset_cov(self.sigma_s2, self.duration)
    }

    pub fn cov3(&self) -> DMatrix<f64> {
        three_asset_cov(self.sigma_s2, self.duration, self.sigma_l2)
    }
}

/// `σ²·[[1, D], [D, D²]]`.
pub fn two_asset_cov(sigma_s2: f64, d: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[sigma_s2, d * sigma_s2, d * sigma_s2, d * d * sigma_s2],
    )
}

/// Stake/derivative block plus an independent lending variance.
pub fn three_asset_cov(sigma_s2: f64, d: f64, sigma_l2: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3, 3);
    m.view_mut((0, 0), (2, 2))
        .copy_from(&two_asset_cov(sigma_s2, d));
    m[(2, 2)] = sigma_l2;
    m
}

/// `μ_d ≈ B + σ_s²·C/2`.
pub fn mean_derivative_return(m: &ReturnsModel) -> f64 {
    m.base + m.sigma_s2 * m.convexity / 2.0
}

fn check_not_unit(d: f64, what: &str) -> Result<()> {
    if (d - 1.0).abs() <= 1e-6 {
        return Err(Error::Singular(format!(
            "{what} is undefined at unit duration (D = {d})"
        )));
    }
    Ok(())
}

/// Closed-form lending weight `(IR/(D−1) + μ_ℓ) / (λ·σ_ℓ²)`.
pub fn lending_weight_closed_form(m: &ReturnsModel) -> Result<f64> {
    check_not_unit(m.duration, "lending weight")?;
    if !(m.sigma_l2 > 0.0 && m.lambda_risk > 0.0) {
        return Err(Error::Parameter(
            "lending weight needs positive σ_ℓ² and λ".into(),
        ));
    }
    Ok((m.instantaneous_return() / (m.duration - 1.0) + m.mu_l) / (m.lambda_risk * m.sigma_l2))
}

/// Two-asset weights in closed form:
/// `w_d = (μ_d − μ_s)/(λσ²(D−1)²) − 1/(D−1)`, `w_s = 1 − w_d`.
pub fn two_asset_weights(m: &ReturnsModel) -> Result<[f64; 2]> {
    check_not_unit(m.duration, "two-asset weights")?;
    let dm1 = m.duration - 1.0;
    let wd = (m.mu_d - m.mu_s) / (m.lambda_risk * m.sigma_s2 * dm1 * dm1) - 1.0 / dm1;
    Ok([1.0 - wd, wd])
}

/// Piecewise `U(D)`: `D/(D−1)` above one, `1/(D−1)` below.
pub fn turnover_factor(d: f64) -> Result<f64> {
    check_not_unit(d, "U(D)")?;
    Ok(if d > 1.0 {
        d / (d - 1.0)
    } else {
        1.0 / (d - 1.0)
    })
}

/// `max(|D/(D−1)|, |1/(1−D)|, 1)`, the claimed 1-norm of the inverse bordered
/// two-asset matrix.
pub fn a_inverse_norm_closed_form(d: f64) -> Result<f64> {
    check_not_unit(d, "inverse norm")?;
    Ok((d / (d - 1.0)).abs().max((1.0 / (1.0 - d)).abs()).max(1.0))
}

/// Numerical `‖A⁻¹‖₁` of the bordered two-asset matrix.
pub fn a_inverse_norm(sigma_s2: f64, d: f64, lambda: f64) -> Result<f64> {
    let k = markowitz::bordered(&two_asset_cov(sigma_s2, d), lambda);
    let inv = k
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("bordered matrix singular at D = {d}")))?;
    Ok(markowitz::norm1(&inv))
}

/// Upper bound on two-asset turnover `‖w(t+1) − w(t)‖₁`:
/// `|U(D_t)|·|Δμ_s + Δμ_d| + |ΔD/((D_{t+1}−1)(D_t−1))|·|μ_s(t+1) + μ_d(t+1) + 1|`.
pub fn turnover_bound(t: &ReturnsModel, t1: &ReturnsModel) -> Result<f64> {
    check_not_unit(t.duration, "turnover bound")?;
    check_not_unit(t1.duration, "turnover bound")?;
    let u = turnover_factor(t.duration)?.abs();
    let dmu = (t1.mu_s - t.mu_s) + (t1.mu_d - t.mu_d);
    let dd = t1.duration - t.duration;
    let x = (dd / ((t1.duration - 1.0) * (t.duration - 1.0))).abs();
    Ok(u * dmu.abs() + x * (t1.mu_s + t1.mu_d + 1.0).abs())
}

/// Largest safe normalized loan size `s* ≈ (k/(k + 2/σ²))^(1/(k+1))`.
pub fn safe_borrow_limit(k: f64, sigma_s2: f64) -> Result<f64> {
    if !(k > 0.0 && sigma_s2 > 0.0) {
        return Err(Error::Parameter(format!(
            "need k > 0 and σ² > 0, got k={k}, σ²={sigma_s2}"
        )));
    }
    Ok((k / (k + 2.0 / sigma_s2)).powf(1.0 / (k + 1.0)))
}
