use crate::error::{Error, Result};
use crate::portfolio::safe_borrow_limit;
use crate::urn::{dispersion_aleph, ruin_probability, TerminalLaw};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRow {
    pub p: f64,
    pub gamma: f64,
    /// Absent where the terminal law does not exist (`p ≥ 1/2`).
    pub beta: Option<f64>,
    pub aleph: Option<f64>,
    pub k: f64,
    pub sigma_s2: f64,
    pub s_star: f64,
}

/// Closed forms over the cartesian product `ps × ks × sigma2s`.
pub fn analytic_report(ps: &[f64], ks: &[f64], sigma2s: &[f64]) -> Result<Vec<AnalyticRow>> {
    if ps.is_empty() || ks.is_empty() || sigma2s.is_empty() {
        return Err(Error::Parameter("analytic grids must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(ps.len() * ks.len() * sigma2s.len());
    for &p in ps {
        let gamma = ruin_probability(p)?;
        let (beta, aleph) = if p < 0.5 {
            let law = TerminalLaw::for_p(p)?;
            (
                Some(law.beta),
                Some(dispersion_aleph(p, law.gamma, law.beta)?),
            )
        } else {
            (None, None)
        };
        for &k in ks {
            for &sigma_s2 in sigma2s {
                rows.push(AnalyticRow {
                    p,
                    gamma,
                    beta,
                    aleph,
                    k,
                    sigma_s2,
                    s_star: safe_borrow_limit(k, sigma_s2)?,
                });
            }
        }
    }
    Ok(rows)
}
