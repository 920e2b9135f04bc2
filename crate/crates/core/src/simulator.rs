//! Discrete-event Monte Carlo of the auction stream.
//!
//! Auctions arrive as a Poisson process of rate `mu`. At each arrival the
//! bidder bids `b(age)` against an independent competing price `C ~ q`, wins
//! when `b > C`, pays `C` and resets its age to zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BidPolicy, Model};
use crate::scalar::Scalar;

/// How an episode ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon<T> {
    /// Ends at `T_gamma ~ Exp(gamma)`; the payoff is the total utility earned.
    Discounted,
    /// Fixed length `T`; the payoff is utility per unit time after warmup.
    TimeAverage {
        #[serde(rename = "T")]
        t: T,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig<T> {
    pub seed: u64,
    pub n_reps: usize,
    pub horizon: Horizon<T>,
    /// Start of the tallied window in time-average mode; 5% of `T` when absent.
    #[serde(default)]
    pub warmup: Option<T>,
}

impl<T: Scalar> SimConfig<T> {
    pub fn discounted(seed: u64, n_reps: usize) -> Self {
        Self {
            seed,
            n_reps,
            horizon: Horizon::Discounted,
            warmup: None,
        }
    }

    pub fn time_average(seed: u64, n_reps: usize, t: T) -> Self {
        Self {
            seed,
            n_reps,
            horizon: Horizon::TimeAverage { t },
            warmup: None,
        }
    }

    pub fn warmup_time(&self) -> T {
        match self.horizon {
            Horizon::Discounted => T::zero(),
            Horizon::TimeAverage { t } => self.warmup.unwrap_or(T::lit(0.05) * t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::Config("sim.n_reps must be at least 1".into()));
        }
        if let Horizon::TimeAverage { t } = self.horizon {
            let w = self.warmup_time();
            if !(t.is_finite() && w >= T::zero() && t > w) {
                return Err(Error::Config(format!(
                    "sim.horizon.T must exceed sim.warmup >= 0 (T = {t}, warmup = {w})"
                )));
            }
        } else if self.warmup.is_some() {
            return Err(Error::Config(
                "sim.warmup only applies to the time_average horizon".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats<T> {
    pub payoff: T,
    pub wins: u64,
    pub spend: T,
    pub final_age: T,
}

/// The random stream of one episode: the `episode_index`-th substream of `seed`.
pub fn episode_rng(seed: u64, episode_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode_index);
    rng
}

/// Plays one episode. Deterministic in `(cfg.seed, episode_index)`.
pub fn run_episode<T: Scalar>(
    policy: &BidPolicy<T>,
    model: &Model<T>,
    cfg: &SimConfig<T>,
    episode_index: u64,
) -> Result<EpisodeStats<T>> {
    let mu = model.env.mu.as_f64();
    let mut rng = episode_rng(cfg.seed, episode_index);
    let arrivals = Exp::new(mu).map_err(|_| Error::domain("arrival rate", mu))?;
    let (end, window_start) = match cfg.horizon {
        Horizon::Discounted => {
            model.env.require_discounted()?;
            let g = model.env.gamma.as_f64();
            let stop = Exp::new(g).map_err(|_| Error::domain("discount rate", g))?;
            (stop.sample(&mut rng), 0.0)
        }
        Horizon::TimeAverage { t } => (t.as_f64(), cfg.warmup_time().as_f64()),
    };
    let curve = &model.curve;
    let comp = &model.competition;
    let mut now = 0.0f64;
    let mut last_win = 0.0f64;
    let mut age_acc = 0.0f64;
    let mut payoff = T::zero();
    let mut spend = T::zero();
    let mut wins = 0u64;
    loop {
        let dt = arrivals.sample(&mut rng);
        if now + dt > end {
            break;
        }
        now += dt;
        age_acc += dt;
        let age = now - last_win;
        debug_assert!(
            (age_acc - age).abs() <= 1e-9 * now.max(1.0),
            "age {age} disagrees with summed inter-arrival times {age_acc}"
        );
        let tau = T::lit(age);
        let bid = policy.bid(tau, curve);
        let price = comp.sample_competition(&mut rng);
        if bid > price {
            if now >= window_start {
                payoff = payoff + curve.value(tau) - price;
                spend = spend + price;
                wins += 1;
            }
            last_win = now;
            age_acc = 0.0;
        }
    }
    if let Horizon::TimeAverage { .. } = cfg.horizon {
        payoff = payoff / T::lit(end - window_start);
    }
    Ok(EpisodeStats {
        payoff,
        wins,
        spend,
        final_age: T::lit(end - last_win),
    })
}

/// Plays episodes `0..n_reps` in parallel; results are in episode order.
pub fn run_episodes<T: Scalar>(
    policy: &BidPolicy<T>,
    model: &Model<T>,
    cfg: &SimConfig<T>,
) -> Result<Vec<EpisodeStats<T>>> {
    cfg.validate()?;
    model.env.validate()?;
    policy.validate()?;
    (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|i| run_episode(policy, model, cfg, i))
        .collect()
}

/// Sample mean of episode payoffs with a normal 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate<T> {
    pub mean: T,
    pub std_err: T,
    pub ci95: (T, T),
    pub n_reps: usize,
}

impl<T: Scalar> ValueEstimate<T> {
    pub fn from_samples(xs: &[T]) -> Self {
        let n = xs.len();
        let nf = T::from_usize_lossy(n);
        let mean = xs.iter().fold(T::zero(), |s, &x| s + x) / nf;
        let var = if n > 1 {
            xs.iter().fold(T::zero(), |s, &x| s + (x - mean) * (x - mean)) / T::from_usize_lossy(n - 1)
        } else {
            T::zero()
        };
        let std_err = (var / nf).sqrt();
        let half = T::lit(1.96) * std_err;
        Self {
            mean,
            std_err,
            ci95: (mean - half, mean + half),
            n_reps: n,
        }
    }

    pub fn scaled(self, c: T) -> Self {
        Self {
            mean: self.mean * c,
            std_err: self.std_err * c.abs(),
            ci95: if c >= T::zero() {
                (self.ci95.0 * c, self.ci95.1 * c)
            } else {
                (self.ci95.1 * c, self.ci95.0 * c)
            },
            n_reps: self.n_reps,
        }
    }

    /// True when `x` lies within `k` standard errors of the mean.
    pub fn within_sigmas(&self, x: T, k: T) -> bool {
        (x - self.mean).abs() <= k * self.std_err
    }
}

/// Monte Carlo mean payoff of `policy`.
pub fn estimate_value<T: Scalar>(
    policy: &BidPolicy<T>,
    model: &Model<T>,
    cfg: &SimConfig<T>,
) -> Result<ValueEstimate<T>> {
    let stats = run_episodes(policy, model, cfg)?;
    let payoffs: Vec<T> = stats.iter().map(|s| s.payoff).collect();
    Ok(ValueEstimate::from_samples(&payoffs))
}

/// One policy to simulate in [`compare_policies`].
#[derive(Clone, Debug)]
pub struct PolicyCase<T: Scalar> {
    pub label: String,
    pub policy: BidPolicy<T>,
    pub model: Model<T>,
}

/// One output row: payoff per unit time with its 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub k_kind: String,
    pub mu: f64,
    pub policy: String,
    pub value_per_time: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_reps: usize,
    pub seed: u64,
}

/// Simulates every case with the same configuration. In discounted mode the
/// mean is scaled by `gamma` to a per-time value.
pub fn compare_policies<T: Scalar>(cases: &[PolicyCase<T>], cfg: &SimConfig<T>) -> Result<Vec<Table1Row>> {
    cases
        .iter()
        .map(|case| {
            let mut est = estimate_value(&case.policy, &case.model, cfg)?;
            if let Horizon::Discounted = cfg.horizon {
                est = est.scaled(case.model.env.gamma);
            }
            Ok(Table1Row {
                k_kind: case.model.curve.kind_name().to_string(),
                mu: case.model.env.mu.as_f64(),
                policy: case.label.clone(),
                value_per_time: est.mean.as_f64(),
                ci_low: est.ci95.0.as_f64(),
                ci_high: est.ci95.1.as_f64(),
                n_reps: est.n_reps,
                seed: cfg.seed,
            })
        })
        .collect()
}
