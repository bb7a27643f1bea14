//! Generators for randomized property tests: random finite MDPs, value
//! tables and policies.
//!
//! Transition and policy weights are dyadic rationals (`k / 2^6`). Dyadic
//! weights make every product and partial sum in the expectation arithmetic
//! exact in binary floating point, so algebraic laws (composition
//! associativity, unit laws) can be asserted bit-exactly instead of within a
//! tolerance.

use std::sync::Arc;

use rand::RngCore;

use crate::kernels::{uniform_f64, FiniteDist, Kernel};
use crate::mdp::{Mdp, Policy, Space, ValueFn};

/// Granularity of dyadic weights: denominators are 2^6 = 64.
const DENOM: u32 = 64;

fn rand_below(rng: &mut dyn RngCore, n: usize) -> usize {
    ((uniform_f64(rng) * n as f64) as usize).min(n - 1)
}

/// A random dyadic distribution over a subset of `0..n` with 1–3 outcomes.
pub fn dyadic_dist(rng: &mut dyn RngCore, n: usize) -> FiniteDist<usize> {
    let outcomes = 1 + rand_below(rng, 3.min(n));
    // Split DENOM into `outcomes` positive integer parts.
    let mut cuts: Vec<u32> = (0..outcomes - 1)
        .map(|_| 1 + rand_below(rng, (DENOM - 1) as usize) as u32)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut parts = Vec::with_capacity(cuts.len() + 1);
    let mut prev = 0;
    for c in &cuts {
        parts.push(c - prev);
        prev = *c;
    }
    parts.push(DENOM - prev);

    let mut pairs = Vec::with_capacity(parts.len());
    for part in parts {
        pairs.push((rand_below(rng, n), part as f64 / DENOM as f64));
    }
    FiniteDist::new(pairs).expect("dyadic parts sum to one")
}

/// A random finite MDP over index spaces with stochastic dyadic transitions
/// and rewards uniform in [-1, 1].
pub fn random_finite_mdp(
    rng: &mut dyn RngCore,
    max_states: usize,
    max_actions: usize,
    beta_lo: f64,
    beta_hi: f64,
) -> Mdp<usize, usize> {
    let n = 2 + rand_below(rng, max_states.saturating_sub(1));
    let na = 1 + rand_below(rng, max_actions);
    random_finite_mdp_sized(rng, n, na, beta_lo, beta_hi)
}

/// As [`random_finite_mdp`] but with the state and action counts fixed.
pub fn random_finite_mdp_sized(
    rng: &mut dyn RngCore,
    n: usize,
    na: usize,
    beta_lo: f64,
    beta_hi: f64,
) -> Mdp<usize, usize> {
    let beta = beta_lo + (beta_hi - beta_lo) * uniform_f64(rng);

    let rows: Vec<FiniteDist<usize>> = (0..n * na).map(|_| dyadic_dist(rng, n)).collect();
    let rewards: Vec<f64> = (0..n * na).map(|_| 2.0 * uniform_f64(rng) - 1.0).collect();

    let rows = Arc::new(rows);
    let rewards = Arc::new(rewards);
    let na_t = na;
    let transition = Kernel::stoch(move |&(x, a): &(usize, usize)| rows[x * na_t + a].clone());
    let na_r = na;
    let reward = move |&x: &usize, &a: &usize| rewards[x * na_r + a];
    Mdp::new(
        Space::enumerated((0..n).collect()).expect("non-empty"),
        Space::enumerated((0..na).collect()).expect("non-empty"),
        transition,
        reward,
        beta,
    )
    .expect("generated MDP is valid")
}

/// A random finite MDP with deterministic transitions.
pub fn random_deterministic_mdp(
    rng: &mut dyn RngCore,
    max_states: usize,
    max_actions: usize,
    beta_lo: f64,
    beta_hi: f64,
) -> Mdp<usize, usize> {
    let n = 2 + rand_below(rng, max_states.saturating_sub(1));
    let na = 1 + rand_below(rng, max_actions);
    let beta = beta_lo + (beta_hi - beta_lo) * uniform_f64(rng);

    let nexts: Vec<usize> = (0..n * na).map(|_| rand_below(rng, n)).collect();
    let rewards: Vec<f64> = (0..n * na).map(|_| 2.0 * uniform_f64(rng) - 1.0).collect();

    let nexts = Arc::new(nexts);
    let rewards = Arc::new(rewards);
    let na_t = na;
    let transition = Kernel::det(move |&(x, a): &(usize, usize)| nexts[x * na_t + a]);
    let na_r = na;
    let reward = move |&x: &usize, &a: &usize| rewards[x * na_r + a];
    Mdp::new(
        Space::enumerated((0..n).collect()).expect("non-empty"),
        Space::enumerated((0..na).collect()).expect("non-empty"),
        transition,
        reward,
        beta,
    )
    .expect("generated MDP is valid")
}

/// A random value table over the MDP's states, uniform in [-1, 1].
pub fn random_value_fn(rng: &mut dyn RngCore, m: &Mdp<usize, usize>) -> ValueFn<usize> {
    ValueFn::from_fn(m.state_index().expect("finite").clone(), |_| {
        2.0 * uniform_f64(rng) - 1.0
    })
}

/// A random deterministic table policy.
pub fn random_det_policy(rng: &mut dyn RngCore, m: &Mdp<usize, usize>) -> Policy<usize, usize> {
    let sidx = m.state_index().expect("finite");
    let aidx = m.action_index().expect("finite");
    let table: Vec<usize> = (0..sidx.len()).map(|_| rand_below(rng, aidx.len())).collect();
    Policy::from_action_indices(sidx, aidx, table).expect("table is aligned")
}

/// A random stochastic policy with dyadic action weights.
pub fn random_stoch_policy(rng: &mut dyn RngCore, m: &Mdp<usize, usize>) -> Policy<usize, usize> {
    let n = m.state_index().expect("finite").len();
    let na = m.action_index().expect("finite").len();
    let mut local = rand_chacha::ChaCha12Rng::seed_from_u64(rng.next_u64());
    use rand::SeedableRng;
    let dists: Vec<FiniteDist<usize>> = (0..n).map(|_| dyadic_dist(&mut local, na)).collect();
    let dists = Arc::new(dists);
    Policy::stoch(move |&x: &usize| dists[x].clone())
}
