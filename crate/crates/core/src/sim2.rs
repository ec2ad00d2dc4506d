//! Two-component (stake + derivative) agent model.
//!
//! Validators borrow staking derivatives against their stake at epoch
//! boundaries, loans are marked against the epoch-start stake every block,
//! defaulted borrowers are burned, and the stake distribution then evolves by
//! independent slashing plus a stake-weighted block reward.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::metrics::{gini, norm_ratio};
use crate::monetary::MonetaryPolicy;
use crate::pricing::{validator_price, Price, PricingCurve, ValidatorPricing, DEFAULT_PHI_MAX};
use crate::rng::{beta_one, categorical, stream, SimRng};
use crate::state::StakeState;

#[derive(Debug, Clone, PartialEq)]
pub struct Sim2Config {
    pub n: usize,
    pub h_max: u64,
    /// Epoch length in blocks.
    pub eta: u64,
    pub lambda_stake: f64,
    pub lambda_collateral: f64,
    pub lambda_borrow: f64,
    pub lambda_slash: f64,
    pub iota: f64,
    pub monetary: MonetaryPolicy,
    pub k: f64,
    pub phi_max: f64,
    pub seed: u64,
    pub trajectories: u32,
    pub sample_stride: u64,
}

impl Default for Sim2Config {
    fn default() -> Self {
        Sim2Config {
            n: 100,
            h_max: 20_000,
            eta: 10,
            lambda_stake: 1.0,
            lambda_collateral: 1.0,
            lambda_borrow: 0.5,
            lambda_slash: 0.5,
            iota: 0.05,
            monetary: MonetaryPolicy::default(),
            k: 1.0,
            phi_max: DEFAULT_PHI_MAX,
            seed: 0,
            trajectories: 20,
            sample_stride: 100,
        }
    }
}

impl Sim2Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.eta < 1 {
            return bad("eta must be at least 1".into());
        }
        if self.h_max < self.eta {
            return bad(format!(
                "h_max ({}) must be at least eta ({})",
                self.h_max, self.eta
            ));
        }
        if self.sample_stride < 1 {
            return bad("sample_stride must be at least 1".into());
        }
        if !(self.lambda_stake > 0.0) {
            return bad(format!(
                "lambda_stake must be positive, got {}",
                self.lambda_stake
            ));
        }
        for (name, v) in [
            ("lambda_collateral", self.lambda_collateral),
            ("lambda_borrow", self.lambda_borrow),
            ("lambda_slash", self.lambda_slash),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.iota > 0.0 && self.iota < 1.0) {
            return bad(format!("iota must lie in (0,1), got {}", self.iota));
        }
        if !(self.k > 0.0) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if !(self.phi_max > 1.0) {
            return bad(format!("phi_max must exceed 1, got {}", self.phi_max));
        }
        if self.trajectories < 1 {
            return bad("trajectories must be at least 1".into());
        }
        self.monetary
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.monetary.check_horizon(self.h_max)
    }
}

/// Per-validator behavioural parameters and loan bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Validators {
    pub collateral: Vec<f64>,
    pub borrow: Vec<f64>,
    pub slash: Vec<f64>,
    pub defaulted: Vec<bool>,
    /// Stake at the last epoch boundary, against which loans are marked.
    pub snapshot: Vec<f64>,
}

impl Validators {
    pub fn new(collateral: Vec<f64>, borrow: Vec<f64>, slash: Vec<f64>, stakes: &[f64]) -> Self {
        let n = stakes.len();
        Validators {
            collateral,
            borrow,
            slash,
            defaulted: vec![false; n],
            snapshot: stakes.to_vec(),
        }
    }

    pub fn defaulted_fraction(&self) -> f64 {
        self.defaulted.iter().filter(|d| **d).count() as f64 / self.defaulted.len() as f64
    }
}

/// Initial stakes `⌈Exp(λ_stake)⌉` and Beta-distributed parameters, in that order.
pub fn sample_population<R: Rng + ?Sized>(
    cfg: &Sim2Config,
    rng: &mut R,
) -> Result<(StakeState, Validators)> {
    let exp =
        Exp::new(cfg.lambda_stake).map_err(|e| Error::Config(format!("lambda_stake: {e}")))?;
    let stakes: Vec<f64> = (0..cfg.n).map(|_| exp.sample(rng).ceil()).collect();
    let collateral = (0..cfg.n)
        .map(|_| beta_one(rng, cfg.lambda_collateral))
        .collect();
    let borrow = (0..cfg.n)
        .map(|_| beta_one(rng, cfg.lambda_borrow))
        .collect();
    let slash = (0..cfg.n)
        .map(|_| beta_one(rng, cfg.lambda_slash))
        .collect();
    let validators = Validators::new(collateral, borrow, slash, &stakes);
    Ok((StakeState::genesis(stakes)?, validators))
}

/// Epoch-boundary borrowing: each live validator flips a `β_i` coin and, on
/// success, borrows a uniform fraction of its remaining collateral headroom.
pub fn update_borrowers<R: Rng + ?Sized>(state: &mut StakeState, v: &Validators, rng: &mut R) {
    for i in 0..state.n() {
        if v.defaulted[i] || rng.random::<f64>() >= v.borrow[i] {
            continue;
        }
        let stake = state.stakes[i];
        let limit = v.collateral[i] * stake;
        if state.loans[i] < limit {
            let xi: f64 = rng.random();
            let add = xi * (v.collateral[i] - state.loans[i] / stake) * stake;
            state.loans[i] = (state.loans[i] + add).min(limit);
        }
    }
}

/// Price of every validator's derivative against its epoch-start stake.
/// Validators without an open loan are marked at 1.
pub fn mark_loans(state: &StakeState, v: &Validators, curve: &PricingCurve) -> Result<Vec<Price>> {
    (0..state.n())
        .map(|i| {
            if state.loans[i] > 0.0 {
                let vp = ValidatorPricing::new(v.collateral[i], v.snapshot[i], state.loans[i])?;
                validator_price(&vp, curve, state.stakes[i])
            } else {
                Ok(Price::ONE)
            }
        })
        .collect()
}

/// Burn the stake of every validator whose price exceeds `phi_max` and bar it
/// from borrowing again. Returns the number of new defaults.
pub fn clear_defaulted_loans(
    state: &mut StakeState,
    v: &mut Validators,
    prices: &[Price],
    phi_max: f64,
) -> usize {
    let mut count = 0;
    for (i, price) in prices.iter().enumerate() {
        if !price.exceeds(phi_max) {
            continue;
        }
        state.burned += state.stakes[i];
        state.stakes[i] = 0.0;
        state.loans[i] = 0.0;
        v.borrow[i] = 0.0;
        if !v.defaulted[i] {
            v.defaulted[i] = true;
            count += 1;
        }
    }
    count
}

/// One block: independent slashes, then a stake-weighted producer who is paid
/// `reward` unless it was itself slashed. Forfeited rewards are burned.
/// Returns `false` once total stake is zero (the trajectory is extinct).
pub fn update_stake_distribution<R: Rng + ?Sized>(
    state: &mut StakeState,
    slash: &[f64],
    iota: f64,
    reward: f64,
    rng: &mut R,
) -> bool {
    state.mint(reward);
    let slashed: Vec<bool> = slash.iter().map(|&p| rng.random::<f64>() < p).collect();
    let Some(winner) = categorical(rng, &state.stakes) else {
        state.burned += reward;
        return false;
    };
    if slashed[winner] {
        state.burned += reward;
    } else {
        state.stakes[winner] += reward;
    }
    for (i, &s) in slashed.iter().enumerate() {
        if s {
            let cut = iota * state.stakes[i];
            state.stakes[i] -= cut;
            state.burned += cut;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample2 {
    pub h: u64,
    pub gini: f64,
    pub norm_ratio: f64,
    pub supply_ratio: f64,
    pub frac_defaulted: f64,
    pub alive: usize,
}

impl Sample2 {
    pub fn observe(state: &StakeState, v: &Validators) -> Self {
        let total = state.total_stake();
        Sample2 {
            h: state.height,
            gini: gini(&state.stakes),
            norm_ratio: norm_ratio(&state.stakes),
            supply_ratio: if state.max_supply > 0.0 {
                total / state.max_supply
            } else {
                0.0
            },
            frac_defaulted: v.defaulted_fraction(),
            alive: state.stakes.iter().filter(|s| **s > 0.0).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory2Record {
    pub rows: Vec<Sample2>,
    /// Height at which total stake first hit zero, if it did.
    pub extinct_at: Option<u64>,
}

/// Run one trajectory from its own random stream.
pub fn run_trajectory2(cfg: &Sim2Config, seed: u64) -> Result<Trajectory2Record> {
    cfg.validate()?;
    let curve = PricingCurve::power_law(cfg.k)?;
    let mut rng: SimRng = stream(seed);
    let (mut state, mut v) = sample_population(cfg, &mut rng)?;
    let mut rows = Vec::with_capacity((cfg.h_max / cfg.sample_stride + 1) as usize);
    let mut extinct_at = None;
    rows.push(Sample2::observe(&state, &v));
    for h in 0..cfg.h_max {
        if h % cfg.eta == 0 {
            // previous epoch's loans are repaid in full
            state.loans.iter_mut().for_each(|l| *l = 0.0);
            update_borrowers(&mut state, &v, &mut rng);
            v.snapshot.copy_from_slice(&state.stakes);
        }
        let prices = mark_loans(&state, &v, &curve)?;
        clear_defaulted_loans(&mut state, &mut v, &prices, cfg.phi_max);
        let reward = cfg.monetary.block_reward(h);
        if !update_stake_distribution(&mut state, &v.slash, cfg.iota, reward, &mut rng)
            && extinct_at.is_none()
        {
            extinct_at = Some(h);
        }
        state.height = h + 1;
        if state.height % cfg.sample_stride == 0 {
            debug_assert!(state.check_invariants().is_ok());
            rows.push(Sample2::observe(&state, &v));
        }
    }
    Ok(Trajectory2Record { rows, extinct_at })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(lb: f64, ls: f64) -> Sim2Config {
        Sim2Config {
            n: 20,
            h_max: 2000,
            lambda_borrow: lb,
            lambda_slash: ls,
            ..Sim2Config::default()
        }
    }

    fn population(stakes: Vec<f64>, c: f64, beta: f64, p: f64) -> (StakeState, Validators) {
        let n = stakes.len();
        let v = Validators::new(vec![c; n], vec![beta; n], vec![p; n], &stakes);
        (StakeState::genesis(stakes).unwrap(), v)
    }

    #[test]
    fn config_validation() {
        Sim2Config::default().validate().unwrap();
        assert!(Sim2Config {
            n: 1,
            ..Sim2Config::default()
        }
        .validate()
        .is_err());
        assert!(Sim2Config {
            h_max: 5,
            ..Sim2Config::default()
        }
        .validate()
        .is_err());
        assert!(Sim2Config {
            eta: 0,
            ..Sim2Config::default()
        }
        .validate()
        .is_err());
        assert!(Sim2Config {
            iota: 1.0,
            ..Sim2Config::default()
        }
        .validate()
        .is_err());
        let inflation = MonetaryPolicy::new(1.0, 1.05).unwrap();
        assert!(Sim2Config {
            monetary: inflation,
            ..Sim2Config::default()
        }
        .validate()
        .is_err());
        assert!(Sim2Config {
            monetary: inflation,
            h_max: 10_000,
            ..Sim2Config::default()
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn borrowing_examples() {
        let mut rng = stream(1);
        let (mut s, v) = population(vec![10.0, 20.0], 0.5, 0.0, 0.0);
        update_borrowers(&mut s, &v, &mut rng);
        assert_eq!(s.loans, vec![0.0, 0.0]);

        let (mut s, v) = population(vec![10.0, 20.0], 0.5, 1.0, 0.0);
        for _ in 0..50 {
            update_borrowers(&mut s, &v, &mut rng);
        }
        for i in 0..2 {
            assert!(s.loans[i] > 0.0 && s.loans[i] <= 0.5 * s.stakes[i]);
        }
        s.loans = vec![5.0, 10.0];
        update_borrowers(&mut s, &v, &mut rng);
        assert_eq!(s.loans, vec![5.0, 10.0]);
    }

    #[test]
    fn marking_and_clearing() {
        let curve = PricingCurve::power_law(2.0).unwrap();
        let (mut s, mut v) = population(vec![10.0, 10.0, 10.0], 0.5, 1.0, 0.0);
        let prices = mark_loans(&s, &v, &curve).unwrap();
        assert!(prices.iter().all(|p| *p == Price::ONE));

        s.loans = vec![2.0, 2.0, 0.0];
        s.stakes[1] = 4.0;
        s.burned = 6.0;
        let prices = mark_loans(&s, &v, &curve).unwrap();
        assert_eq!(prices[0], Price::ONE);
        assert!(prices[1].exceeds(DEFAULT_PHI_MAX));
        assert_eq!(prices[2], Price::ONE);

        assert_eq!(
            clear_defaulted_loans(&mut s, &mut v, &prices, DEFAULT_PHI_MAX),
            1
        );
        assert_eq!(s.stakes, vec![10.0, 0.0, 10.0]);
        assert_eq!(s.burned, 10.0);
        assert_eq!(v.borrow[1], 0.0);
        assert!(v.defaulted[1]);
        assert_eq!(
            clear_defaulted_loans(&mut s, &mut v, &prices, DEFAULT_PHI_MAX),
            0
        );
        assert_eq!(s.burned, 10.0);
        s.check_invariants().unwrap();
    }

    #[test]
    fn stake_update_examples() {
        let mut rng = stream(2);
        let mut s = StakeState::genesis(vec![1.0, 1.0]).unwrap();
        assert!(update_stake_distribution(
            &mut s,
            &[0.0, 0.0],
            0.05,
            1.0,
            &mut rng
        ));
        let mut sorted = s.stakes.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![1.0, 2.0]);

        let mut s = StakeState::genesis(vec![100.0]).unwrap();
        s.max_supply -= 1.0; // offset the reward that gets burned
        update_stake_distribution(&mut s, &[1.0], 0.05, 1.0, &mut rng);
        assert!((s.stakes[0] - 95.0).abs() < 1e-12);
        assert!((s.burned - 6.0).abs() < 1e-12);

        let mut s = StakeState::genesis(vec![3.0, 5.0]).unwrap();
        let mut last = 1.0;
        for _ in 0..100 {
            update_stake_distribution(&mut s, &[1.0, 1.0], 0.05, 1.0, &mut rng);
            let ratio = s.total_stake() / s.max_supply;
            assert!(ratio < last);
            last = ratio;
        }
    }

    #[test]
    fn no_slash_no_borrow_keeps_full_supply() {
        let cfg = Sim2Config {
            lambda_borrow: 0.0,
            lambda_slash: 0.0,
            ..small(0.0, 0.0)
        };
        let rec = run_trajectory2(&cfg, 7).unwrap();
        assert_eq!(rec.rows.len(), 21);
        for r in &rec.rows {
            assert!((r.supply_ratio - 1.0).abs() < 1e-12);
            assert_eq!(r.frac_defaulted, 0.0);
        }
        assert!(rec.extinct_at.is_none());
    }

    #[test]
    fn trajectory_is_deterministic_and_ordered() {
        let cfg = small(0.9, 0.9);
        let a = run_trajectory2(&cfg, 3).unwrap();
        let b = run_trajectory2(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.windows(2).all(|w| w[0].h < w[1].h));
        for r in &a.rows {
            assert!(r.gini.is_finite() && r.norm_ratio.is_finite() && r.supply_ratio.is_finite());
            assert!((0.0..=1.0).contains(&r.supply_ratio));
        }
        let c = run_trajectory2(&cfg, 4).unwrap();
        assert_ne!(a, c);
    }
}
