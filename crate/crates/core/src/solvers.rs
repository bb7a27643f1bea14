//! Dynamic-programming algorithms over finite decision processes: value
//! improvement, policy improvement, policy iteration, value iteration,
//! q-iteration and sample-based Q-learning.
//!
//! Every backup routes through the optic layer: one step of value improvement
//! is `apply_costate(policy_lift(p) ∘ lambda_optic(m), v)`, the fused
//! value-iteration backup reads the q-costate `apply_costate(lambda_optic(m),
//! v)` and maximizes over actions, and q-improvement flips the composition to
//! `lambda_optic(m) ∘ policy_lift(p)`. Iterating these compositions walks the
//! chain whose limit is the optimal value function.
//!
//! Convergence is measured in the sup norm. Sweeps are Jacobi-style (each
//! iteration reads only the previous table), so they are pure maps over the
//! state enumeration and may run on several threads without coordination.

use std::hash::Hash;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::kernels::{uniform_f64, Kernel};
use crate::mdp::{Index, Mdp, Policy, ValueFn};
use crate::optic::{lambda_optic, optic_compose, policy_lift, Optic};

/// Iterative-solver configuration: sup-norm tolerance, iteration budget,
/// RNG seed, and the number of worker threads for state sweeps.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 100_000,
            seed: 0,
            threads: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.threads < 1 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Q-learning configuration.
#[derive(Debug, Clone)]
pub struct QLearnConfig {
    /// Learning rate α ∈ (0, 1).
    pub alpha: f64,
    /// Exploration probability ε ∈ [0, 1].
    pub epsilon: f64,
    pub episodes: usize,
    pub max_steps_per_episode: usize,
    pub seed: u64,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon: 0.1,
            episodes: 5000,
            max_steps_per_episode: 100,
            seed: 0,
        }
    }
}

impl QLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.episodes < 1 || self.max_steps_per_episode < 1 {
            return Err(Error::InvalidArgument(
                "episodes and max_steps_per_episode must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One iteration record: sup-norm value change and the number of states whose
/// policy action changed.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub delta_sup: f64,
    pub policy_changes: usize,
}

/// Per-iteration trace of a solver run, plus a convergence flag.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    records: Vec<IterRecord>,
    converged: bool,
}

impl IterationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, iteration: usize, delta_sup: f64, policy_changes: usize) {
        debug_assert!(delta_sup >= 0.0, "sup-norm entries are non-negative");
        self.records.push(IterRecord {
            iteration,
            delta_sup,
            policy_changes,
        });
    }

    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last_delta(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.delta_sup)
    }

    /// CSV serialization with the fixed header `iteration,delta_sup,policy_changes`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,delta_sup,policy_changes\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{}\n",
                r.iteration, r.delta_sup, r.policy_changes
            ));
        }
        out
    }
}

/// A state-action value table, total over the state×action enumeration.
#[derive(Debug, Clone)]
pub struct QFn<X, A> {
    sidx: Arc<Index<X>>,
    aidx: Arc<Index<A>>,
    values: Vec<f64>,
}

impl<X: Clone + Eq + Hash + Send + Sync + 'static, A: Clone + Eq + Hash + Send + Sync + 'static>
    QFn<X, A>
{
    pub fn zeros(sidx: Arc<Index<X>>, aidx: Arc<Index<A>>) -> Self {
        let values = vec![0.0; sidx.len() * aidx.len()];
        Self { sidx, aidx, values }
    }

    pub fn from_fn(
        sidx: Arc<Index<X>>,
        aidx: Arc<Index<A>>,
        mut f: impl FnMut(&X, &A) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(sidx.len() * aidx.len());
        for x in sidx.items() {
            for a in aidx.items() {
                values.push(f(x, a));
            }
        }
        Self { sidx, aidx, values }
    }

    pub fn state_index(&self) -> &Arc<Index<X>> {
        &self.sidx
    }

    pub fn action_index(&self) -> &Arc<Index<A>> {
        &self.aidx
    }

    pub fn get(&self, x: &X, a: &A) -> f64 {
        let i = self.sidx.get(x).expect("state in enumeration");
        let j = self.aidx.get(a).expect("action in enumeration");
        self.get_idx(i, j)
    }

    pub fn get_idx(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.aidx.len() + action]
    }

    pub fn set_idx(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.aidx.len() + action] = value;
    }

    /// `max_a q(x, a)` at a state index.
    pub fn max_action(&self, state: usize) -> f64 {
        let row = &self.values[state * self.aidx.len()..(state + 1) * self.aidx.len()];
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action index at a state, lowest index on ties.
    pub fn argmax_action(&self, state: usize) -> usize {
        let row = &self.values[state * self.aidx.len()..(state + 1) * self.aidx.len()];
        let mut best = 0;
        for (j, &q) in row.iter().enumerate() {
            if q > row[best] {
                best = j;
            }
        }
        best
    }

    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.sidx.len()).map(|i| self.argmax_action(i)).collect()
    }

    pub fn sup_distance(&self, other: &QFn<X, A>) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// View the table as a costate on the product interface `X×A`.
    pub fn as_fn(&self) -> impl Fn(&(X, A)) -> f64 + Send + Sync + 'static {
        let sidx = self.sidx.clone();
        let aidx = self.aidx.clone();
        let values = self.values.clone();
        let na = aidx.len();
        move |(x, a): &(X, A)| {
            let i = sidx.get(x).expect("state in enumeration");
            let j = aidx.get(a).expect("action in enumeration");
            values[i * na + j]
        }
    }

    /// The induced state-value table `V(x) = max_a q(x, a)`.
    pub fn value_fn(&self) -> ValueFn<X> {
        let vals = (0..self.sidx.len()).map(|i| self.max_action(i)).collect();
        ValueFn::from_values(self.sidx.clone(), vals).expect("aligned by construction")
    }
}

/// Chunked parallel map over a slice; sequential when `threads <= 1`.
fn par_map<T, U, F>(items: &[T], threads: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    if threads <= 1 || items.len() < 2 * threads {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let mut out = Vec::with_capacity(items.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        for h in handles {
            out.extend(h.join().expect("solver sweep worker panicked"));
        }
    });
    out
}

fn count_changes(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Snapshot handed to solver observers after every iteration (and once for
/// the initial state at iteration 0).
pub struct SolveStep<'a, X> {
    pub iteration: usize,
    pub values: &'a ValueFn<X>,
    pub policy_actions: &'a [usize],
    pub delta_sup: f64,
    pub policy_changes: usize,
}

/// One Bellman backup of `v` under the fixed policy `p`: precomposition of
/// the value costate with the policy-lifted process optic.
pub fn value_improvement<X, A>(
    m: &Mdp<X, A>,
    p: &Policy<X, A>,
    v: &ValueFn<X>,
) -> Result<ValueFn<X>>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let sidx = m.state_index()?.clone();
    let composed = optic_compose(&policy_lift(p), &lambda_optic(m)?);
    let f = composed.apply_costate(v.as_fn());
    let vals = sidx.items().iter().map(|x| f(x)).collect();
    ValueFn::from_values(sidx, vals)
}

/// Greedy action indices for `v`, reading the q-costate `λ ∘ V` and breaking
/// argmax ties toward the lowest action index.
fn greedy_sweep<X, A>(
    m: &Mdp<X, A>,
    lam: &Optic<(X, A), (X, A), X>,
    v: &ValueFn<X>,
    threads: usize,
) -> Result<(Vec<f64>, Vec<usize>)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let sidx = m.state_index()?;
    let aidx = m.action_index()?.clone();
    let qf = lam.apply_costate(v.as_fn());
    let out = par_map(sidx.items(), threads, |x| {
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for (j, a) in aidx.items().iter().enumerate() {
            let q = qf(&(x.clone(), a.clone()));
            if q > best {
                best = q;
                best_a = j;
            }
        }
        (best, best_a)
    });
    Ok(out.into_iter().unzip())
}

/// The greedy policy for `v`: `π′(x) = argmax_a (λ ∘ V)(x, a)`.
pub fn policy_improvement<X, A>(m: &Mdp<X, A>, v: &ValueFn<X>) -> Result<Policy<X, A>>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let lam = lambda_optic(m)?;
    let (_, actions) = greedy_sweep(m, &lam, v, 1)?;
    Policy::from_action_indices(m.state_index()?, m.action_index()?, actions)
}

/// The fused optimality backup `T`: `(TV)(x) = max_a (λ ∘ V)(x, a)`. This is
/// the contraction whose fixpoint is the optimal value function.
pub fn bellman_backup<X, A>(m: &Mdp<X, A>, v: &ValueFn<X>) -> Result<ValueFn<X>>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let lam = lambda_optic(m)?;
    let (vals, _) = greedy_sweep(m, &lam, v, 1)?;
    ValueFn::from_values(m.state_index()?.clone(), vals)
}

/// Policy iteration: repeat value improvement to tolerance under the current
/// policy, then one policy improvement; stop when the policy is stable.
pub fn policy_iteration<X, A>(
    m: &Mdp<X, A>,
    p0: &Policy<X, A>,
    v0: &ValueFn<X>,
    cfg: &SolverConfig,
) -> Result<(Policy<X, A>, ValueFn<X>, IterationTrace)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    policy_iteration_with(m, p0, v0, cfg, |_| {})
}

/// [`policy_iteration`] with an observer called after every iteration.
pub fn policy_iteration_with<X, A>(
    m: &Mdp<X, A>,
    p0: &Policy<X, A>,
    v0: &ValueFn<X>,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&SolveStep<X>),
) -> Result<(Policy<X, A>, ValueFn<X>, IterationTrace)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    cfg.validate()?;
    let sidx = m.state_index()?.clone();
    let aidx = m.action_index()?.clone();
    let lam = lambda_optic(m)?;

    let mut v = v0.clone();
    let mut policy = p0.clone();
    let mut pol_actions = p0.to_action_indices(&sidx, &aidx)?;
    let mut trace = IterationTrace::new();
    let mut iter = 0usize;
    observe(&SolveStep {
        iteration: 0,
        values: &v,
        policy_actions: &pol_actions,
        delta_sup: 0.0,
        policy_changes: 0,
    });

    'outer: loop {
        let composed = optic_compose(&policy_lift(&policy), &lam);
        loop {
            if iter >= cfg.max_iters {
                break 'outer;
            }
            let f = composed.apply_costate(v.as_fn());
            let vals = par_map(sidx.items(), cfg.threads, |x| f(x));
            let v2 = ValueFn::from_values(sidx.clone(), vals)?;
            let delta = v2.sup_distance(&v);
            v = v2;
            iter += 1;
            trace.push(iter, delta, 0);
            observe(&SolveStep {
                iteration: iter,
                values: &v,
                policy_actions: &pol_actions,
                delta_sup: delta,
                policy_changes: 0,
            });
            if delta < cfg.tol {
                break;
            }
        }
        if iter >= cfg.max_iters {
            break 'outer;
        }
        let (_, greedy) = greedy_sweep(m, &lam, &v, cfg.threads)?;
        let changes = count_changes(&greedy, &pol_actions);
        pol_actions = greedy.clone();
        policy = Policy::from_action_indices(&sidx, &aidx, greedy)?;
        iter += 1;
        trace.push(iter, 0.0, changes);
        observe(&SolveStep {
            iteration: iter,
            values: &v,
            policy_actions: &pol_actions,
            delta_sup: 0.0,
            policy_changes: changes,
        });
        if changes == 0 {
            trace.converged = true;
            break;
        }
    }
    Ok((policy, v, trace))
}

/// Value iteration: the fused max-backup with the greedy policy read out of
/// the pre-backup value function at every step.
pub fn value_iteration<X, A>(
    m: &Mdp<X, A>,
    v0: &ValueFn<X>,
    cfg: &SolverConfig,
) -> Result<(Policy<X, A>, ValueFn<X>, IterationTrace)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    value_iteration_with(m, v0, cfg, |_| {})
}

/// [`value_iteration`] with an observer called after every iteration.
pub fn value_iteration_with<X, A>(
    m: &Mdp<X, A>,
    v0: &ValueFn<X>,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&SolveStep<X>),
) -> Result<(Policy<X, A>, ValueFn<X>, IterationTrace)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    cfg.validate()?;
    let sidx = m.state_index()?.clone();
    let aidx = m.action_index()?.clone();
    let lam = lambda_optic(m)?;

    let mut v = v0.clone();
    // Before the first readout the reference policy is the canonical argmax
    // of an all-ties table: the first action everywhere.
    let mut pol = vec![0usize; sidx.len()];
    let mut trace = IterationTrace::new();
    observe(&SolveStep {
        iteration: 0,
        values: &v,
        policy_actions: &pol,
        delta_sup: 0.0,
        policy_changes: 0,
    });

    let mut iter = 0usize;
    loop {
        if iter >= cfg.max_iters {
            break;
        }
        let (vals, greedy) = greedy_sweep(m, &lam, &v, cfg.threads)?;
        let v2 = ValueFn::from_values(sidx.clone(), vals)?;
        let delta = v2.sup_distance(&v);
        let changes = count_changes(&greedy, &pol);
        v = v2;
        pol = greedy;
        iter += 1;
        trace.push(iter, delta, changes);
        observe(&SolveStep {
            iteration: iter,
            values: &v,
            policy_actions: &pol,
            delta_sup: delta,
            policy_changes: changes,
        });
        if delta < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    let policy = Policy::from_action_indices(&sidx, &aidx, pol)?;
    Ok((policy, v, trace))
}

/// One q-table backup under `p`: `q′(x,a) = U(x,a) + β·E_{x′} q(x′, π(x′))`,
/// realized as costate application through `λ ∘ π̄` (the composition is
/// flipped relative to value improvement so the optic ends on the product
/// interface).
pub fn q_improvement<X, A>(m: &Mdp<X, A>, p: &Policy<X, A>, q: &QFn<X, A>) -> Result<QFn<X, A>>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    q_improvement_threaded(m, p, q, 1)
}

fn q_improvement_threaded<X, A>(
    m: &Mdp<X, A>,
    p: &Policy<X, A>,
    q: &QFn<X, A>,
    threads: usize,
) -> Result<QFn<X, A>>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let sidx = m.state_index()?.clone();
    let aidx = m.action_index()?.clone();
    let composed = optic_compose(&lambda_optic(m)?, &policy_lift(p));
    let f = composed.apply_costate(q.as_fn());
    let pairs: Vec<(X, A)> = sidx
        .items()
        .iter()
        .flat_map(|x| aidx.items().iter().map(move |a| (x.clone(), a.clone())))
        .collect();
    let values = par_map(&pairs, threads, |xa| f(xa));
    Ok(QFn {
        sidx,
        aidx,
        values,
    })
}

/// State-action value iteration: alternate the greedy readout
/// `π(x) = argmax_a q(x,a)` with [`q_improvement`] under that policy.
pub fn q_value_iteration<X, A>(
    m: &Mdp<X, A>,
    q0: &QFn<X, A>,
    cfg: &SolverConfig,
) -> Result<(Policy<X, A>, QFn<X, A>, IterationTrace)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    q_value_iteration_with(m, q0, cfg, |_| {})
}

/// [`q_value_iteration`] with an observer; snapshot values are the induced
/// state values `max_a q(x, a)`.
pub fn q_value_iteration_with<X, A>(
    m: &Mdp<X, A>,
    q0: &QFn<X, A>,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&SolveStep<X>),
) -> Result<(Policy<X, A>, QFn<X, A>, IterationTrace)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    cfg.validate()?;
    let sidx = m.state_index()?.clone();
    let aidx = m.action_index()?.clone();

    let mut q = q0.clone();
    let mut pol = vec![0usize; sidx.len()];
    let mut trace = IterationTrace::new();
    {
        let v = q.value_fn();
        observe(&SolveStep {
            iteration: 0,
            values: &v,
            policy_actions: &pol,
            delta_sup: 0.0,
            policy_changes: 0,
        });
    }

    let mut iter = 0usize;
    loop {
        if iter >= cfg.max_iters {
            break;
        }
        let greedy = q.greedy_actions();
        let policy = Policy::from_action_indices(&sidx, &aidx, greedy.clone())?;
        let q2 = q_improvement_threaded(m, &policy, &q, cfg.threads)?;
        let delta = q2.sup_distance(&q);
        let changes = count_changes(&greedy, &pol);
        q = q2;
        pol = greedy;
        iter += 1;
        trace.push(iter, delta, changes);
        let v = q.value_fn();
        observe(&SolveStep {
            iteration: iter,
            values: &v,
            policy_actions: &pol,
            delta_sup: delta,
            policy_changes: changes,
        });
        if delta < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    let policy = Policy::from_action_indices(&sidx, &aidx, q.greedy_actions())?;
    Ok((policy, q, trace))
}

/// One sampled transition from a black-box environment.
#[derive(Debug, Clone)]
pub struct StepOutcome<X> {
    pub next: X,
    pub reward: f64,
    /// True when the episode ends with this transition (the agent acted in a
    /// terminal state, collecting its final reward).
    pub done: bool,
}

/// A black-box episodic interface: reset to a start state and sample steps.
/// Implementations expose the state/action enumerations (the axes of a
/// tabular learner) and the discount, but not the transition or reward
/// functions themselves.
pub trait SampleEnv<X, A> {
    fn state_index(&self) -> &Arc<Index<X>>;
    fn action_index(&self) -> &Arc<Index<A>>;
    fn discount(&self) -> f64;
    fn reset(&mut self, rng: &mut dyn RngCore) -> X;
    fn step(&mut self, x: &X, a: &A, rng: &mut dyn RngCore) -> StepOutcome<X>;
}

/// Black-box sampler over a finite MDP, implemented by sampling the process
/// optic: the forward pass draws the (residual, successor) joint and the
/// reward is read off the backward pass at zero continuation.
pub struct MdpSampler<X, A> {
    sidx: Arc<Index<X>>,
    aidx: Arc<Index<A>>,
    discount: f64,
    optic: Optic<(X, A), (X, A), X>,
    terminal: Option<Arc<dyn Fn(&X) -> bool + Send + Sync>>,
}

impl<X, A> MdpSampler<X, A>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    pub fn new(m: &Mdp<X, A>) -> Result<Self> {
        Ok(Self {
            sidx: m.state_index()?.clone(),
            aidx: m.action_index()?.clone(),
            discount: m.discount(),
            optic: lambda_optic(m)?,
            terminal: m.terminal_fn(),
        })
    }
}

impl<X, A> SampleEnv<X, A> for MdpSampler<X, A>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    fn state_index(&self) -> &Arc<Index<X>> {
        &self.sidx
    }

    fn action_index(&self) -> &Arc<Index<A>> {
        &self.aidx
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    /// Exploring starts: uniform over the state enumeration.
    fn reset(&mut self, rng: &mut dyn RngCore) -> X {
        let n = self.sidx.len();
        let i = ((uniform_f64(rng) * n as f64) as usize).min(n - 1);
        self.sidx.items()[i].clone()
    }

    fn step(&mut self, x: &X, a: &A, rng: &mut dyn RngCore) -> StepOutcome<X> {
        let input = (x.clone(), a.clone());
        let (residual, next) = match self.optic.forward() {
            Kernel::Det(f) => f(&input),
            Kernel::Stoch(h) => h(&input).sample(rng).clone(),
            Kernel::Gauss(_) => unreachable!("finite optics never hold Gaussian forwards"),
        };
        let reward = self.optic.backward_at(&residual, 0.0);
        let done = self.terminal.as_ref().is_some_and(|t| t(x));
        StepOutcome { next, reward, done }
    }
}

/// Result of a Q-learning run: the learned table, the per-episode trace
/// (sup-norm of the episode's table updates plus greedy-policy changes), and
/// the per-episode discounted returns.
#[derive(Debug, Clone)]
pub struct QLearnResult<X, A> {
    pub q: QFn<X, A>,
    pub trace: IterationTrace,
    pub episode_returns: Vec<f64>,
}

/// Tabular Q-learning with an ε-greedy behavior policy over a black-box
/// environment, updating `q(x,a) ← (1−α)q(x,a) + α(r + β·max_{a′} q(x′,a′))`.
///
/// Exploring starts: episodes begin at the environment's reset distribution
/// and the first action of each episode is uniform, so every state-action
/// cell keeps receiving direct updates; ε-greedy takes over from the second
/// step. Episodes end on a terminal transition or after
/// `max_steps_per_episode` steps (truncation is logged, not an error).
/// Episode randomness comes from per-episode streams of a seeded RNG, so
/// identical seeds reproduce identical traces.
pub fn q_learning<X, A, E>(env: &mut E, cfg: &QLearnConfig) -> Result<QLearnResult<X, A>>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
    E: SampleEnv<X, A>,
{
    cfg.validate()?;
    let sidx = env.state_index().clone();
    let aidx = env.action_index().clone();
    let beta = env.discount();
    let na = aidx.len();

    let mut q = QFn::zeros(sidx.clone(), aidx.clone());
    let mut trace = IterationTrace::new();
    let mut returns = Vec::with_capacity(cfg.episodes);

    for ep in 0..cfg.episodes {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        rng.set_stream(ep as u64 + 1);

        let greedy_before = q.greedy_actions();
        let mut x = env.reset(&mut rng);
        let mut xi = sidx.position(&x)?;
        let mut ret = 0.0;
        let mut disc = 1.0;
        let mut max_dq = 0.0f64;
        let mut finished = false;

        for step in 0..cfg.max_steps_per_episode {
            let explore = step == 0 || uniform_f64(&mut rng) < cfg.epsilon;
            let aj = if explore {
                ((uniform_f64(&mut rng) * na as f64) as usize).min(na - 1)
            } else {
                q.argmax_action(xi)
            };
            let a = aidx.items()[aj].clone();
            let out = env.step(&x, &a, &mut rng);
            let next_i = sidx.position(&out.next)?;
            let bootstrap = if out.done { 0.0 } else { q.max_action(next_i) };
            let target = out.reward + beta * bootstrap;
            let old = q.get_idx(xi, aj);
            let updated = (1.0 - cfg.alpha) * old + cfg.alpha * target;
            q.set_idx(xi, aj, updated);
            max_dq = max_dq.max((updated - old).abs());
            ret += disc * out.reward;
            disc *= beta;
            if out.done {
                finished = true;
                break;
            }
            x = out.next;
            xi = next_i;
        }
        if !finished {
            log::debug!(
                "episode {ep} truncated at {} steps",
                cfg.max_steps_per_episode
            );
        }
        let changes = count_changes(&greedy_before, &q.greedy_actions());
        trace.push(ep, max_dq, changes);
        returns.push(ret);
    }
    trace.converged = true;
    Ok(QLearnResult {
        q,
        trace,
        episode_returns: returns,
    })
}
