//! Mean-variance selection under the full-investment constraint.
//!
//! Maximizes `wᵀμ − ½λ wᵀΣw` subject to `Σw = 1` by solving the bordered
//! KKT system `[λΣ 1; 1ᵀ 0][w; γ] = [μ; 1]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition number (1-norm) above which the system is regularized.
pub const MAX_CONDITION: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-8;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkowitzSolution {
    pub weights: Vec<f64>,
    /// Lagrange multiplier of the budget constraint.
    pub multiplier: f64,
    /// Ridge added to the diagonal of Σ, 0 if none was needed.
    pub ridge: f64,
}

impl MarkowitzSolution {
    pub fn utility(&self, mu: &[f64], sigma: &DMatrix<f64>, lambda: f64) -> f64 {
        utility(&self.weights, mu, sigma, lambda)
    }
}

pub fn utility(w: &[f64], mu: &[f64], sigma: &DMatrix<f64>, lambda: f64) -> f64 {
    let w = DVector::from_column_slice(w);
    let ret: f64 = w.iter().zip(mu).map(|(a, b)| a * b).sum();
    ret - 0.5 * lambda * (w.transpose() * sigma * &w)[(0, 0)]
}

/// `[λΣ 1; 1ᵀ 0]`.
pub fn bordered(sigma: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = sigma.nrows();
    let mut k = DMatrix::zeros(n + 1, n + 1);
    k.view_mut((0, 0), (n, n)).copy_from(&(sigma * lambda));
    for i in 0..n {
        k[(i, n)] = 1.0;
        k[(n, i)] = 1.0;
    }
    k
}

/// Induced 1-norm: largest absolute column sum.
pub fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_inputs(mu: &[f64], sigma: &DMatrix<f64>, lambda: f64) -> Result<()> {
    let n = mu.len();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "need at least two assets, got {n}"
        )));
    }
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::Parameter(format!(
            "covariance is {}x{} but there are {n} assets",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!(
            "risk aversion must be positive, got {lambda}"
        )));
    }
    if mu.iter().chain(sigma.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Parameter(
            "non-finite mean or covariance entry".into(),
        ));
    }
    let scale = sigma.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if (sigma - sigma.transpose())
        .iter()
        .any(|x| x.abs() > 1e-12 * scale)
    {
        return Err(Error::Parameter("covariance is not symmetric".into()));
    }
    let trace = sigma.trace();
    let min_eig = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
    if min_eig < -PSD_TOL * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Parameter(format!(
            "covariance is not PSD (eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

/// Solve the bordered system, or `None` if it is singular or too ill-conditioned.
fn try_solve(k: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let inv = k.clone().try_inverse()?;
    let cond = norm1(k) * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return None;
    }
    let x = k.clone().lu().solve(rhs)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Equality-constrained solve; regularizes near-singular systems with a
/// ridge of `1e-8·trace(Σ)/dim`.
pub fn solve_markowitz(mu: &[f64], sigma: &DMatrix<f64>, lambda: f64) -> Result<MarkowitzSolution> {
    check_inputs(mu, sigma, lambda)?;
    solve_unchecked(mu, sigma, lambda)
}

fn solve_unchecked(mu: &[f64], sigma: &DMatrix<f64>, lambda: f64) -> Result<MarkowitzSolution> {
    let n = mu.len();
    let mut rhs = DVector::from_element(n + 1, 1.0);
    rhs.rows_mut(0, n).copy_from_slice(mu);

    let unpack = |x: DVector<f64>, ridge| MarkowitzSolution {
        weights: x.rows(0, n).iter().copied().collect(),
        multiplier: x[n],
        ridge,
    };

    if let Some(x) = try_solve(&bordered(sigma, lambda), &rhs) {
        return Ok(unpack(x, 0.0));
    }
    let trace = sigma.trace();
    let ridge = if trace > 0.0 {
        RIDGE_SCALE * trace / n as f64
    } else {
        RIDGE_SCALE
    };
    let regularized = sigma + DMatrix::identity(n, n) * ridge;
    let k = bordered(&regularized, lambda);
    match k.clone().lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(unpack(x, ridge)),
        _ => Err(Error::Singular(format!(
            "KKT system singular even with ridge {ridge}"
        ))),
    }
}

/// Long-only variant (`w ≥ 0`): enumerates active sets, which is exact and
/// cheap for the two- and three-asset problems used here.
pub fn solve_markowitz_long_only(
    mu: &[f64],
    sigma: &DMatrix<f64>,
    lambda: f64,
) -> Result<MarkowitzSolution> {
    check_inputs(mu, sigma, lambda)?;
    let n = mu.len();
    if n > 12 {
        return Err(Error::Parameter(format!(
            "active-set enumeration limited to 12 assets, got {n}"
        )));
    }
    let mut best: Option<(f64, MarkowitzSolution)> = None;
    for mask in 1u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let w = if free.len() == 1 {
            let mut w = vec![0.0; n];
            w[free[0]] = 1.0;
            MarkowitzSolution {
                weights: w,
                multiplier: f64::NAN,
                ridge: 0.0,
            }
        } else {
            let sub_mu: Vec<f64> = free.iter().map(|&i| mu[i]).collect();
            let sub_sigma =
                DMatrix::from_fn(free.len(), free.len(), |r, c| sigma[(free[r], free[c])]);
            let Ok(sub) = solve_unchecked(&sub_mu, &sub_sigma, lambda) else {
                continue;
            };
            if sub.weights.iter().any(|w| *w < -1e-12) {
                continue;
            }
            let mut w = vec![0.0; n];
            for (j, &i) in free.iter().enumerate() {
                w[i] = sub.weights[j].max(0.0);
            }
            MarkowitzSolution {
                weights: w,
                multiplier: sub.multiplier,
                ridge: sub.ridge,
            }
        };
        let u = w.utility(mu, sigma, lambda);
        if best.as_ref().is_none_or(|(b, _)| u > *b) {
            best = Some((u, w));
        }
    }
    best.map(|(_, w)| w)
        .ok_or_else(|| Error::Singular("no feasible long-only portfolio found".into()))
}
