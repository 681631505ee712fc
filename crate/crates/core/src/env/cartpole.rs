//! Cart-pole dynamics and a 10⁴-bin tabular abstraction.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Provenance, SamplingMode, Transition};
use crate::mdp::{MdpBuilder, Policy, RewardDist, TabularMdp};
use crate::rng::{rng_from_seed, Rng};
use crate::{Error, Result};

pub type State = [f64; 4];

/// Discount of the tabular abstraction.
pub const CARTPOLE_GAMMA: f64 = 0.99;

/// Standard cart-pole constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force: f64,
    pub timestep: f64,
    pub x_limit: f64,
    /// Radians.
    pub theta_limit: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force: 10.0,
            timestep: 0.02,
            x_limit: 2.4,
            theta_limit: 12.0 * std::f64::consts::PI / 180.0,
        }
    }
}

impl Physics {
    /// One Euler step with an explicit horizontal force.
    pub fn step_with_force(&self, state: State, force: f64) -> (State, bool) {
        let [x, x_dot, theta, theta_dot] = state;
        let total_mass = self.cart_mass + self.pole_mass;
        let pole_ml = self.pole_mass * self.half_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_ml * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (self.gravity * sin - cos * temp)
            / (self.half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_ml * theta_acc * cos / total_mass;
        let next = [
            x + self.timestep * x_dot,
            x_dot + self.timestep * x_acc,
            theta + self.timestep * theta_dot,
            theta_dot + self.timestep * theta_acc,
        ];
        (next, self.is_done(&next))
    }

    /// Action 1 pushes right, action 0 pushes left.
    pub fn step(&self, state: State, action: usize) -> (State, bool) {
        let f = if action == 1 { self.force } else { -self.force };
        self.step_with_force(state, f)
    }

    pub fn is_done(&self, s: &State) -> bool {
        s[0].abs() > self.x_limit || s[2].abs() > self.theta_limit
    }
}

/// Uniform box partition of the four state dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleDiscretization {
    pub bins_per_dim: usize,
    /// `[lo, hi]` for cart position, cart velocity, pole angle, pole angular
    /// velocity. Values outside clamp to the edge bins.
    pub dim_ranges: [[f64; 2]; 4],
    #[serde(default)]
    pub physics: Physics,
    pub max_steps: usize,
}

impl Default for CartPoleDiscretization {
    fn default() -> Self {
        let theta = 12.0 * std::f64::consts::PI / 180.0;
        Self {
            bins_per_dim: 10,
            dim_ranges: [[-2.4, 2.4], [-2.0, 2.0], [-theta, theta], [-2.5, 2.5]],
            physics: Physics::default(),
            max_steps: 200,
        }
    }
}

impl CartPoleDiscretization {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_dim == 0 || self.max_steps == 0 {
            return Err(Error::Config("bins_per_dim and max_steps must be positive".into()));
        }
        for [lo, hi] in self.dim_ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("invalid range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.bins_per_dim.pow(4)
    }

    /// Index of the absorbing failure state.
    pub fn terminal_state(&self) -> usize {
        self.num_bins()
    }

    fn dim_bin(&self, d: usize, v: f64) -> usize {
        let [lo, hi] = self.dim_ranges[d];
        let k = self.bins_per_dim;
        let u = ((v - lo) / (hi - lo) * k as f64).floor();
        if u.is_nan() || u < 0.0 {
            0
        } else {
            (u as usize).min(k - 1)
        }
    }

    /// Mixed-radix bin index, dimension 0 least significant.
    pub fn bin(&self, s: &State) -> usize {
        (0..4).rev().fold(0, |acc, d| acc * self.bins_per_dim + self.dim_bin(d, s[d]))
    }

    pub fn bin_coords(&self, bin: usize) -> [usize; 4] {
        let k = self.bins_per_dim;
        [bin % k, (bin / k) % k, (bin / (k * k)) % k, bin / (k * k * k)]
    }

    /// Bin of a continuous state, or the terminal state when `done`.
    pub fn observe(&self, s: &State, done: bool) -> usize {
        if done {
            self.terminal_state()
        } else {
            self.bin(s)
        }
    }

    fn bin_bounds(&self, bin: usize) -> [[f64; 2]; 4] {
        let c = self.bin_coords(bin);
        let k = self.bins_per_dim as f64;
        std::array::from_fn(|d| {
            let [lo, hi] = self.dim_ranges[d];
            let w = (hi - lo) / k;
            [lo + w * c[d] as f64, lo + w * (c[d] + 1) as f64]
        })
    }

    fn jitter(&self, bin: usize, rng: &mut Rng) -> State {
        let b = self.bin_bounds(bin);
        std::array::from_fn(|d| b[d][0] + (b[d][1] - b[d][0]) * rng.random::<f64>())
    }

    /// Standard start distribution: each coordinate uniform in `[−0.05, 0.05]`.
    pub fn initial_state(rng: &mut Rng) -> State {
        std::array::from_fn(|_| rng.random_range(-0.05..0.05))
    }
}

/// Number of start-state draws used to estimate the tabular initial
/// distribution.
const INITIAL_SAMPLES: usize = 10_000;

/// Tabularizes the dynamics: for each `(bin, action)` the next-bin
/// distribution is the empirical frequency over `jitter_samples` uniform
/// points inside the bin, each stepped once. Every non-terminal pair pays 1;
/// the failure state is absorbing with reward 0.
pub fn build_cartpole_mdp(
    cfg: &CartPoleDiscretization,
    jitter_samples: usize,
    seed: u64,
) -> Result<TabularMdp> {
    cfg.validate()?;
    if jitter_samples == 0 {
        return Err(Error::Config("jitter_samples must be at least 1".into()));
    }
    let bins = cfg.num_bins();
    let mut rng = rng_from_seed(seed);
    let mut b = MdpBuilder::new(bins + 1, 2, CARTPOLE_GAMMA);
    let w = 1.0 / jitter_samples as f64;
    let mut row = Vec::with_capacity(jitter_samples);
    for bin in 0..bins {
        for a in 0..2 {
            row.clear();
            for _ in 0..jitter_samples {
                let start = cfg.jitter(bin, &mut rng);
                let (next, done) = cfg.physics.step(start, a);
                row.push((cfg.observe(&next, done), w));
            }
            b.transition(bin, a, row.clone());
            b.reward(bin, a, RewardDist::Point(1.0));
        }
    }
    b.terminal(bins);
    let mut init = vec![0.0; bins + 1];
    for _ in 0..INITIAL_SAMPLES {
        let s = CartPoleDiscretization::initial_state(&mut rng);
        init[cfg.bin(&s)] += 1.0 / INITIAL_SAMPLES as f64;
    }
    let total: f64 = init.iter().sum();
    init.iter_mut().for_each(|p| *p /= total);
    b.initial(init);
    b.build()
}

/// Undiscounted return of one continuous episode (steps survived, capped at
/// `max_steps`) under a policy over bins.
pub fn episode_return(cfg: &CartPoleDiscretization, pi: &Policy, rng: &mut Rng) -> f64 {
    let mut s = CartPoleDiscretization::initial_state(rng);
    for t in 0..cfg.max_steps {
        let a = pi.sample(cfg.bin(&s), rng);
        let (next, done) = cfg.physics.step(s, a);
        if done {
            return (t + 1) as f64;
        }
        s = next;
    }
    cfg.max_steps as f64
}

/// Mean continuous return over `episodes` seeded episodes.
pub fn evaluate_policy(cfg: &CartPoleDiscretization, pi: &Policy, episodes: usize, seed: u64) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be at least 1".into()));
    }
    if pi.num_states() != cfg.num_bins() + 1 {
        return Err(Error::InvalidPolicy("policy does not cover the cart-pole bins".into()));
    }
    let mut rng = rng_from_seed(seed);
    let total: f64 = (0..episodes).map(|_| episode_return(cfg, pi, &mut rng)).sum();
    Ok(total / episodes as f64)
}

/// Pools binned transitions from continuous episodes of `behavior` until `n`
/// are collected. Failures map to the terminal state; the step cap truncates
/// an episode without marking it terminal.
pub fn collect_dataset(cfg: &CartPoleDiscretization, behavior: &Policy, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    'episodes: loop {
        let mut s = CartPoleDiscretization::initial_state(&mut rng);
        for _ in 0..cfg.max_steps {
            let bin = cfg.bin(&s);
            let a = behavior.sample(bin, &mut rng);
            let (next, done) = cfg.physics.step(s, a);
            out.push(Transition { s: bin, a, r: 1.0, s_next: cfg.observe(&next, done) });
            if out.len() == n {
                break 'episodes;
            }
            if done {
                break;
            }
            s = next;
        }
    }
    let prov = Provenance {
        mdp_id: "cartpole".into(),
        behavior_id: "continuous".into(),
        seed,
        mode: SamplingMode::TrajectoryPool { max_steps: cfg.max_steps },
    };
    Ok(Dataset::new(out, prov))
}
