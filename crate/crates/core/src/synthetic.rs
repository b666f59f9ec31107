//! Deterministic synthetic tick streams for tests, examples and golden data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};

use crate::moments::TradeTick;

const NS: f64 = 1e9;

/// Evenly spaced ticks on `[0, duration)` with price `price(t)` and
/// volume `rate(t) * dt`, so the execution flow is `rate(t)` shares/sec.
pub fn regular<P, R>(duration_s: f64, dt_s: f64, price: P, rate: R) -> Vec<TradeTick>
where
    P: Fn(f64) -> f64,
    R: Fn(f64) -> f64,
{
    let count = (duration_s / dt_s).round() as usize;
    (0..count)
        .map(|k| {
            let t = k as f64 * dt_s;
            TradeTick { t: (t * NS).round() as i64, price: price(t), shares: rate(t) * dt_s }
        })
        .collect()
}

/// Parameters of a random-walk stream with Poisson arrivals.
#[derive(Debug, Clone, Copy)]
pub struct RandomWalk {
    pub seed: u64,
    pub count: usize,
    pub start_ns: i64,
    pub mean_gap_s: f64,
    pub start_price: f64,
    pub tick_size: f64,
    /// Standard deviation of the price step, in ticks.
    pub step_ticks: f64,
    pub median_shares: f64,
    /// Probability that an arrival starts a burst of quick trades.
    pub burst_prob: f64,
}

impl Default for RandomWalk {
    fn default() -> Self {
        RandomWalk {
            seed: 1,
            count: 1000,
            start_ns: 0,
            mean_gap_s: 1.0,
            start_price: 100.0,
            tick_size: 0.01,
            step_ticks: 1.0,
            median_shares: 100.0,
            burst_prob: 0.02,
        }
    }
}

impl RandomWalk {
    /// Ticks on a price grid with lognormal sizes and occasional bursts.
    pub fn generate(&self) -> Vec<TradeTick> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let gap = Exp::new(1.0 / self.mean_gap_s).expect("positive gap");
        let step = Normal::new(0.0, self.step_ticks).expect("finite step");
        let size = LogNormal::new(self.median_shares.ln(), 0.8).expect("positive size");
        let mut t = self.start_ns;
        let mut level = (self.start_price / self.tick_size).round();
        let mut burst = 0usize;
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let g = if burst > 0 {
                burst -= 1;
                gap.sample(&mut rng) * 0.02
            } else {
                if rng.gen::<f64>() < self.burst_prob {
                    burst = rng.gen_range(5..40);
                }
                gap.sample(&mut rng)
            };
            t += (g * NS).round().max(1.0) as i64;
            level = (level + step.sample(&mut rng).round()).max(1.0);
            let shares = size.sample(&mut rng).round().max(1.0);
            out.push(TradeTick { t, price: level * self.tick_size, shares });
        }
        out
    }
}
