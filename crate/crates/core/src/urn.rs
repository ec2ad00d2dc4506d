//! Slashing-driven Pólya urn dynamics.
//!
//! At each block a producer is drawn with probability proportional to stake.
//! A validator is rewarded (`E1`), untouched (`E2`), slashed by a fraction
//! `ι` of its stake (`E3`) or, when the slash pushes an open loan past its
//! collateral boundary, wiped out (`E4`). Slashed stake is burned.
//!
//! The closed forms for the ruin probability `γ = p/(1-p)` and the terminal
//! stake law `X ~ (1-γ)·Exp(mean β) + γ·δ₀` live here as well, together with
//! Monte Carlo samplers used to check them.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pricing::{validator_price, PricingCurve, ValidatorPricing};
use crate::rng::categorical;
use crate::state::StakeState;

#[derive(Debug, Clone, PartialEq)]
pub struct SlashParams {
    pub p: Vec<f64>,
    pub iota: f64,
}

impl SlashParams {
    pub fn new(p: Vec<f64>, iota: f64) -> Result<Self> {
        if let Some(bad) = p.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
            return Err(Error::Parameter(format!(
                "slash probability must lie in [0,1], got {bad}"
            )));
        }
        if !(iota > 0.0 && iota < 1.0) {
            return Err(Error::Parameter(format!(
                "slash fraction must lie in (0,1), got {iota}"
            )));
        }
        Ok(SlashParams { p, iota })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventOutcome {
    RewardedNotSlashed,
    NotRewardedNotSlashed,
    SlashedNoDefault,
    SlashedDefaulted,
}

/// Which validators can be slashed in a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlashMode {
    /// Only the selected producer may be slashed.
    #[default]
    SelectedOnly,
    /// Every validator draws an independent slash each block.
    Independent,
}

/// One row of the random replacement matrix, realized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplacementDraw {
    pub validator: usize,
    pub delta: f64,
    pub outcome: EventOutcome,
}

/// `(Pr[E1], Pr[E2], Pr[E3], Pr[E4])` for validator `i`.
///
/// `loan` is the validator's open loan, if any; it decides whether a slash
/// defaults.
pub fn event_probabilities(
    state: &StakeState,
    params: &SlashParams,
    loan: Option<&ValidatorPricing>,
    i: usize,
) -> Result<[f64; 4]> {
    let total = state.total_stake();
    if !(total > 0.0) {
        return Err(Error::Domain(
            "event probabilities need positive total stake".into(),
        ));
    }
    let share = state.stakes[i] / total;
    let p = params.p[i];
    let defaults = slash_defaults(state.stakes[i], params.iota, loan);
    let (e3, e4) = if defaults { (0.0, p) } else { (p, 0.0) };
    Ok([(1.0 - p) * share, (1.0 - p) * (1.0 - share), e3, e4])
}

fn slash_defaults(stake: f64, iota: f64, loan: Option<&ValidatorPricing>) -> bool {
    loan.is_some_and(|vp| (1.0 - iota) * stake < vp.default_boundary())
}

fn slash_draw(
    state: &StakeState,
    params: &SlashParams,
    loan: Option<&ValidatorPricing>,
    i: usize,
) -> ReplacementDraw {
    let stake = state.stakes[i];
    if slash_defaults(stake, params.iota, loan) {
        ReplacementDraw {
            validator: i,
            delta: -stake,
            outcome: EventOutcome::SlashedDefaulted,
        }
    } else {
        ReplacementDraw {
            validator: i,
            delta: -params.iota * stake,
            outcome: EventOutcome::SlashedNoDefault,
        }
    }
}

/// Apply one draw. Negative changes are burned.
pub fn apply_replacement(state: &mut StakeState, draw: &ReplacementDraw) -> Result<()> {
    let i = draw.validator;
    if i >= state.n() {
        return Err(Error::Internal(format!("validator {i} out of range")));
    }
    let next = state.stakes[i] + draw.delta;
    // E4 sets the stake to exactly zero; allow rounding slack for E3
    let next = if draw.outcome == EventOutcome::SlashedDefaulted {
        0.0
    } else {
        next
    };
    if next < 0.0 {
        return Err(Error::Internal(format!(
            "draw {draw:?} would leave validator {i} with negative stake {next}"
        )));
    }
    if draw.delta < 0.0 {
        state.burned += state.stakes[i] - next;
    }
    state.stakes[i] = next;
    Ok(())
}

/// What happened in one block of the urn.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub producer: Option<usize>,
    pub draws: Vec<ReplacementDraw>,
}

/// Sample the replacement draws for one block and apply them.
///
/// The block reward is minted into `max_supply` whether or not anybody
/// receives it; a forfeited reward is simply never held by a validator.
pub fn urn_step<R: Rng + ?Sized>(
    state: &mut StakeState,
    params: &SlashParams,
    loans: &[Option<ValidatorPricing>],
    reward: f64,
    mode: SlashMode,
    rng: &mut R,
) -> Result<BlockOutcome> {
    let producer = categorical(rng, &state.stakes);
    let mut draws = Vec::new();
    match mode {
        SlashMode::SelectedOnly => {
            if let Some(v) = producer {
                if rng.random::<f64>() < params.p[v] {
                    draws.push(slash_draw(state, params, loans[v].as_ref(), v));
                } else {
                    draws.push(ReplacementDraw {
                        validator: v,
                        delta: reward,
                        outcome: EventOutcome::RewardedNotSlashed,
                    });
                }
            }
        }
        SlashMode::Independent => {
            let slashed: Vec<bool> = params.p.iter().map(|&p| rng.random::<f64>() < p).collect();
            for (i, &s) in slashed.iter().enumerate() {
                if s && state.stakes[i] > 0.0 {
                    draws.push(slash_draw(state, params, loans[i].as_ref(), i));
                }
            }
            if let Some(v) = producer.filter(|&v| !slashed[v]) {
                draws.push(ReplacementDraw {
                    validator: v,
                    delta: reward,
                    outcome: EventOutcome::RewardedNotSlashed,
                });
            }
        }
    }
    state.mint(reward);
    for d in &draws {
        apply_replacement(state, d)?;
    }
    state.height += 1;
    Ok(BlockOutcome { producer, draws })
}

/// The two-validator selfish-mining replacement matrix `R_h·[[2, -1], [0, 1]]`.
pub fn selfish_mining_matrix(reward: f64) -> [[f64; 2]; 2] {
    [[2.0 * reward, -reward], [0.0, reward]]
}

/// `γ = p/(1-p)`: probability that a validator eventually loses everything.
/// Saturates at 1 for `p ≥ 1/2`.
pub fn ruin_probability(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!(
            "slash probability must lie in [0,1], got {p}"
        )));
    }
    if p >= 0.5 {
        return Ok(1.0);
    }
    Ok(p / (1.0 - p))
}

/// Smallest stake (in reward units) above which the residual ruin probability
/// `γ^m` drops below `tol`, and at least `floor`.
pub fn survival_threshold(p: f64, floor: u32, tol: f64) -> Result<u32> {
    let g = ruin_probability(p)?;
    if g >= 1.0 {
        return Err(Error::Parameter(
            "no survival threshold when ruin is certain".into(),
        ));
    }
    if g == 0.0 {
        return Ok(floor);
    }
    let m = (tol.ln() / g.ln()).ceil() as u32;
    Ok(m.max(floor))
}

/// One single-validator ruin trajectory of the embedded urn chain.
///
/// The validator's stake is counted in reward units. Each time one of its
/// units is drawn it gains a unit with probability `1-p` and loses one to
/// slashing otherwise. Returns `true` if the stake hits zero before reaching
/// `survive_at`.
pub fn ruin_trial<R: Rng + ?Sized>(rng: &mut R, p: f64, initial: u32, survive_at: u32) -> bool {
    let mut balls = initial as i64;
    let top = survive_at as i64;
    while balls > 0 && balls < top {
        if rng.random::<f64>() < p {
            balls -= 1;
        } else {
            balls += 1;
        }
    }
    balls == 0
}

/// Which growth rate scales the terminal stake law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthExponent {
    /// `α = E[R_i] = R(1-p) - ι·p`, the martingale normalizer.
    #[default]
    MeanIncrement,
    /// `α = R - (1+ι)·p`.
    Simplified,
}

/// Parameters of the terminal stake law for one slash probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalLaw {
    pub gamma: f64,
    pub beta: f64,
}

impl TerminalLaw {
    pub fn for_p(p: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::Parameter(format!(
                "terminal law requires 0 <= p < 1/2, got {p}"
            )));
        }
        Ok(TerminalLaw {
            gamma: ruin_probability(p)?,
            beta: (1.0 - p) / (1.0 - 2.0 * p),
        })
    }

    /// `E[X] = (1-γ)β`.
    pub fn mean(&self) -> f64 {
        (1.0 - self.gamma) * self.beta
    }

    /// `E[X²] = 2(1-γ)β²`.
    pub fn second_moment(&self) -> f64 {
        2.0 * (1.0 - self.gamma) * self.beta * self.beta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.gamma {
            return 0.0;
        }
        // shape 1, rate 1/β
        Exp::new(1.0 / self.beta).expect("beta > 0").sample(rng)
    }
}

pub fn growth_exponent(p: f64, reward: f64, iota: f64, which: GrowthExponent) -> f64 {
    match which {
        GrowthExponent::MeanIncrement => reward * (1.0 - p) - iota * p,
        GrowthExponent::Simplified => reward - (1.0 + iota) * p,
    }
}

/// Draw `π(h)_i = e^{α h} X`.
pub fn sample_terminal_stake<R: Rng + ?Sized>(
    rng: &mut R,
    p: f64,
    reward: f64,
    iota: f64,
    h: u64,
    which: GrowthExponent,
) -> Result<f64> {
    if !(reward > 0.0) {
        return Err(Error::Parameter(format!(
            "reward must be positive, got {reward}"
        )));
    }
    let law = TerminalLaw::for_p(p)?;
    let x = law.sample(rng);
    Ok((growth_exponent(p, reward, iota, which) * h as f64).exp() * x)
}

/// `ℵ = β(1 + (1-γ)²)`, the expected norm ratio predicted from the terminal law.
pub fn dispersion_aleph(p: f64, gamma: f64, beta: f64) -> Result<f64> {
    if p < 0.5 {
        let law = TerminalLaw::for_p(p)?;
        if (law.gamma - gamma).abs() > 1e-12 || (law.beta - beta).abs() > 1e-12 * law.beta {
            return Err(Error::Parameter(format!(
                "(gamma={gamma}, beta={beta}) inconsistent with p={p}"
            )));
        }
    }
    Ok(beta * (1.0 + (1.0 - gamma) * (1.0 - gamma)))
}

#[derive(Debug, Clone)]
pub struct RecurrenceSetup {
    pub curve: PricingCurve,
    pub initial: Vec<f64>,
    pub params: SlashParams,
    /// Collateral factor of the monitored validator's loan; `None` means no loan.
    pub collateral: Option<f64>,
    pub monitored: usize,
    pub reward: f64,
    /// Fixed point of the curve being watched (1 for staking curves).
    pub fixed_point: f64,
}

/// Count the blocks whose monitored price lies within `epsilon` of the fixed
/// point (exact hits always count). Exploratory only.
pub fn recurrence_experiment<R: Rng + ?Sized>(
    setup: &RecurrenceSetup,
    horizon: u64,
    epsilon: f64,
    rng: &mut R,
) -> Result<u64> {
    let mut state = StakeState::genesis(setup.initial.clone())?;
    let i = setup.monitored;
    let loan = match setup.collateral {
        Some(c) => Some(ValidatorPricing::new(c, setup.initial[i], 0.0)?),
        None => None,
    };
    let mut loans = vec![None; state.n()];
    loans[i] = loan;
    let mut visits = 0;
    for _ in 0..horizon {
        if state.total_stake() > 0.0 {
            urn_step(
                &mut state,
                &setup.params,
                &loans,
                setup.reward,
                SlashMode::SelectedOnly,
                rng,
            )?;
        }
        let price = match &loan {
            Some(vp) => validator_price(vp, &setup.curve, state.stakes[i])?.value(),
            None => 1.0,
        };
        let d = (price - setup.fixed_point).abs();
        if d < epsilon || d == 0.0 {
            visits += 1;
        }
    }
    Ok(visits)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(5000))]

        #[test]
        fn event_probabilities_sum_to_one(
            stakes in proptest::collection::vec(0.0f64..100.0, 2..8),
            p in 0.0f64..=1.0,
            iota in 0.01f64..0.99,
            c in 0.01f64..0.99,
            issue in 0.1f64..100.0,
            with_loan: bool,
        ) {
            let total: f64 = stakes.iter().sum();
            prop_assume!(total > 0.0);
            let n = stakes.len();
            let state = StakeState::genesis(stakes).unwrap();
            let params = SlashParams::new(vec![p; n], iota).unwrap();
            let vp = ValidatorPricing::new(c, issue, 0.0).unwrap();
            let loan = if with_loan { Some(&vp) } else { None };
            for i in 0..n {
                let pr = event_probabilities(&state, &params, loan, i).unwrap();
                prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(pr.iter().all(|x| *x >= 0.0));
            }
        }
    }
}
