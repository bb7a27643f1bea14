//! Decision-process data model: state/action spaces, policies, value tables.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{FiniteDist, Kernel};

/// A finite enumeration with O(1) position lookup.
///
/// The item order is the canonical order everywhere: argmax tie-breaks,
/// table layouts and CSV emission all follow it.
#[derive(Debug, Clone)]
pub struct Index<T> {
    items: Vec<T>,
    pos: HashMap<T, usize>,
}

impl<T: Clone + Eq + Hash> Index<T> {
    pub fn new(items: Vec<T>) -> Result<Arc<Self>> {
        let mut pos = HashMap::with_capacity(items.len());
        for (i, t) in items.iter().enumerate() {
            if pos.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(
                    "enumeration contains duplicate items".into(),
                ));
            }
        }
        if items.is_empty() {
            return Err(Error::InvalidArgument("enumeration is empty".into()));
        }
        Ok(Arc::new(Self { items, pos }))
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, t: &T) -> Option<usize> {
        self.pos.get(t).copied()
    }

    pub fn position(&self, t: &T) -> Result<usize> {
        self.get(t).ok_or_else(|| {
            Error::InvalidArgument("item does not belong to the enumeration".into())
        })
    }
}

/// A space descriptor: a finite enumeration or a Euclidean space of a given
/// dimension. Euclidean spaces are placeholders for processes that must pass
/// through discretization before the finite solvers apply.
#[derive(Debug, Clone)]
pub enum Space<T> {
    Enumerated(Arc<Index<T>>),
    Euclidean(usize),
}

impl<T: Clone + Eq + Hash> Space<T> {
    pub fn enumerated(items: Vec<T>) -> Result<Self> {
        Ok(Space::Enumerated(Index::new(items)?))
    }

    pub fn index(&self) -> Result<&Arc<Index<T>>> {
        match self {
            Space::Enumerated(ix) => Ok(ix),
            Space::Euclidean(dim) => Err(Error::Unsupported(format!(
                "space is Euclidean (dimension {dim}); discretize it before using finite machinery"
            ))),
        }
    }

    pub fn is_enumerated(&self) -> bool {
        matches!(self, Space::Enumerated(_))
    }
}

type PolicyDetFn<X, A> = Arc<dyn Fn(&X) -> A + Send + Sync>;
type PolicyStochFn<X, A> = Arc<dyn Fn(&X) -> FiniteDist<A> + Send + Sync>;

/// A memoryless policy: deterministic (`X → A`) or stochastic (`X → ΔA`).
#[derive(Clone)]
pub enum Policy<X, A> {
    Det(PolicyDetFn<X, A>),
    Stoch(PolicyStochFn<X, A>),
}

impl<X, A> Policy<X, A> {
    pub fn det(f: impl Fn(&X) -> A + Send + Sync + 'static) -> Self {
        Policy::Det(Arc::new(f))
    }

    pub fn stoch(f: impl Fn(&X) -> FiniteDist<A> + Send + Sync + 'static) -> Self {
        Policy::Stoch(Arc::new(f))
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Policy::Det(_))
    }
}

impl<X: Clone + Eq + Hash + Send + Sync + 'static, A: Clone + Eq + Hash + Send + Sync + 'static>
    Policy<X, A>
{
    /// Deterministic table-backed policy: `actions[i]` is the action index
    /// for the i-th state of `states`.
    pub fn from_action_indices(
        states: &Arc<Index<X>>,
        actions: &Arc<Index<A>>,
        table: Vec<usize>,
    ) -> Result<Self> {
        if table.len() != states.len() {
            return Err(Error::DimensionMismatch {
                context: "policy table vs state enumeration".into(),
                expected: states.len(),
                found: table.len(),
            });
        }
        if let Some(&bad) = table.iter().find(|&&a| a >= actions.len()) {
            return Err(Error::InvalidArgument(format!(
                "policy table references action index {bad} out of {}",
                actions.len()
            )));
        }
        let states = states.clone();
        let actions = actions.clone();
        Ok(Policy::det(move |x: &X| {
            let i = states.get(x).expect("state must belong to the enumeration");
            actions.items()[table[i]].clone()
        }))
    }

    /// The action distribution at a state.
    pub fn action_dist(&self, x: &X) -> FiniteDist<A> {
        match self {
            Policy::Det(f) => FiniteDist::dirac(f(x)),
            Policy::Stoch(f) => f(x),
        }
    }

    /// Materialize the policy as one action index per state. Stochastic
    /// policies are determinized by their most probable action (first-listed
    /// on ties).
    pub fn to_action_indices(
        &self,
        states: &Arc<Index<X>>,
        actions: &Arc<Index<A>>,
    ) -> Result<Vec<usize>> {
        states
            .items()
            .iter()
            .map(|x| match self {
                Policy::Det(f) => actions.position(&f(x)),
                Policy::Stoch(f) => {
                    let dist = f(x);
                    let mut best = 0;
                    let mut best_w = f64::NEG_INFINITY;
                    for (a, w) in dist.support() {
                        let i = actions.position(a)?;
                        if *w > best_w {
                            best_w = *w;
                            best = i;
                        }
                    }
                    Ok(best)
                }
            })
            .collect()
    }
}

impl<X, A> std::fmt::Debug for Policy<X, A> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Policy::Det(_) => write!(f, "Policy::Det"),
            Policy::Stoch(_) => write!(f, "Policy::Stoch"),
        }
    }
}

/// A value function over a finite state enumeration, stored as a total table.
#[derive(Debug, Clone)]
pub struct ValueFn<X> {
    index: Arc<Index<X>>,
    values: Vec<f64>,
}

impl<X: Clone + Eq + Hash + Send + Sync + 'static> ValueFn<X> {
    pub fn constant(index: Arc<Index<X>>, value: f64) -> Self {
        let values = vec![value; index.len()];
        Self { index, values }
    }

    pub fn from_fn(index: Arc<Index<X>>, mut f: impl FnMut(&X) -> f64) -> Self {
        let values = index.items().iter().map(|x| f(x)).collect();
        Self { index, values }
    }

    pub fn from_values(index: Arc<Index<X>>, values: Vec<f64>) -> Result<Self> {
        if values.len() != index.len() {
            return Err(Error::DimensionMismatch {
                context: "value table vs state enumeration".into(),
                expected: index.len(),
                found: values.len(),
            });
        }
        Ok(Self { index, values })
    }

    pub fn index(&self) -> &Arc<Index<X>> {
        &self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a state. Panics if the state is not in the enumeration.
    pub fn get(&self, x: &X) -> f64 {
        self.values[self
            .index
            .get(x)
            .expect("state must belong to the value function's enumeration")]
    }

    /// Sup-norm distance to another table over the same enumeration.
    pub fn sup_distance(&self, other: &ValueFn<X>) -> f64 {
        assert_eq!(
            self.values.len(),
            other.values.len(),
            "value functions must share an enumeration"
        );
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// View the table as a costate (a plain function on states).
    pub fn as_fn(&self) -> impl Fn(&X) -> f64 + Send + Sync + 'static {
        let index = self.index.clone();
        let values = self.values.clone();
        move |x: &X| {
            values[index
                .get(x)
                .expect("state must belong to the value function's enumeration")]
        }
    }
}

type RewardFn<X, A> = Arc<dyn Fn(&X, &A) -> f64 + Send + Sync>;
type TerminalFn<X> = Arc<dyn Fn(&X) -> bool + Send + Sync>;

/// A Markov decision process: state and action spaces, a transition kernel
/// over `(X, A)`, an expected-reward function and a discount factor in (0,1).
///
/// States may optionally be marked terminal: a terminal state's backward pass
/// collects its immediate reward but cuts the discounted continuation, and
/// sampled episodes end after acting once in it.
#[derive(Clone)]
pub struct Mdp<X, A> {
    states: Space<X>,
    actions: Space<A>,
    transition: Kernel<(X, A), X>,
    reward: RewardFn<X, A>,
    discount: f64,
    terminal: Option<TerminalFn<X>>,
}

impl<X, A> std::fmt::Debug for Mdp<X, A> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mdp")
            .field("transition", &self.transition)
            .field("discount", &self.discount)
            .finish_non_exhaustive()
    }
}

impl<X: Clone + Eq + Hash + Send + Sync + 'static, A: Clone + Eq + Hash + Send + Sync + 'static>
    Mdp<X, A>
{
    pub fn new(
        states: Space<X>,
        actions: Space<A>,
        transition: Kernel<(X, A), X>,
        reward: impl Fn(&X, &A) -> f64 + Send + Sync + 'static,
        discount: f64,
    ) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        let enumerated = states.is_enumerated() && actions.is_enumerated();
        match &transition {
            Kernel::Gauss(_) if enumerated => {
                return Err(Error::UnsupportedMixture(
                    "Gaussian transition kernel over enumerated spaces".into(),
                ))
            }
            Kernel::Stoch(_) if !enumerated => {
                return Err(Error::UnsupportedMixture(
                    "finite-stochastic transition kernel over Euclidean spaces".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            states,
            actions,
            transition,
            reward: Arc::new(reward),
            discount,
            terminal: None,
        })
    }

    /// Mark states satisfying `pred` as terminal.
    pub fn with_terminal(mut self, pred: impl Fn(&X) -> bool + Send + Sync + 'static) -> Self {
        self.terminal = Some(Arc::new(pred));
        self
    }

    /// Remove any terminal marking (plain infinite-horizon semantics).
    pub fn without_terminal(mut self) -> Self {
        self.terminal = None;
        self
    }

    pub fn states(&self) -> &Space<X> {
        &self.states
    }

    pub fn actions(&self) -> &Space<A> {
        &self.actions
    }

    /// The state enumeration; errors for continuous (undiscretized) processes.
    pub fn state_index(&self) -> Result<&Arc<Index<X>>> {
        self.states.index()
    }

    pub fn action_index(&self) -> Result<&Arc<Index<A>>> {
        self.actions.index()
    }

    pub fn transition(&self) -> &Kernel<(X, A), X> {
        &self.transition
    }

    pub fn reward(&self, x: &X, a: &A) -> f64 {
        (self.reward)(x, a)
    }

    pub fn reward_fn(&self) -> RewardFn<X, A> {
        self.reward.clone()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn is_terminal(&self, x: &X) -> bool {
        self.terminal.as_ref().is_some_and(|t| t(x))
    }

    pub(crate) fn terminal_fn(&self) -> Option<TerminalFn<X>> {
        self.terminal.clone()
    }

    /// True when both spaces are finite enumerations.
    pub fn is_finite(&self) -> bool {
        self.states.is_enumerated() && self.actions.is_enumerated()
    }
}

/// Re-express a finite MDP over index spaces `0..n` / `0..m`, materializing
/// the transition rows. Returns the indexed process together with printable
/// labels for the original states and actions.
pub fn reindex<X, A>(
    m: &Mdp<X, A>,
    state_label: impl Fn(&X) -> String,
    action_label: impl Fn(&A) -> String,
) -> Result<(Mdp<usize, usize>, Vec<String>, Vec<String>)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let sidx = m.state_index()?.clone();
    let aidx = m.action_index()?.clone();
    let n = sidx.len();
    let na = aidx.len();

    let mut rows: Vec<FiniteDist<usize>> = Vec::with_capacity(n * na);
    for x in sidx.items() {
        for a in aidx.items() {
            let dist = m.transition().apply(&(x.clone(), a.clone()))?;
            let mut pairs = Vec::with_capacity(dist.len());
            for (x2, w) in dist.support() {
                pairs.push((sidx.position(x2)?, *w));
            }
            rows.push(FiniteDist::new(pairs)?);
        }
    }
    let rows = Arc::new(rows);
    let rewards: Vec<f64> = sidx
        .items()
        .iter()
        .flat_map(|x| aidx.items().iter().map(move |a| m.reward(x, a)))
        .collect();
    let terminal_mask: Vec<bool> = sidx.items().iter().map(|x| m.is_terminal(x)).collect();

    let na_copy = na;
    let transition = Kernel::stoch(move |&(i, j): &(usize, usize)| rows[i * na_copy + j].clone());
    let rewards = Arc::new(rewards);
    let reward = move |&i: &usize, &j: &usize| rewards[i * na + j];
    let mut out = Mdp::new(
        Space::enumerated((0..n).collect())?,
        Space::enumerated((0..na).collect())?,
        transition,
        reward,
        m.discount(),
    )?;
    if m.terminal_fn().is_some() {
        out = out.with_terminal(move |&i: &usize| terminal_mask[i]);
    }

    let state_labels = sidx.items().iter().map(state_label).collect();
    let action_labels = aidx.items().iter().map(action_label).collect();
    Ok((out, state_labels, action_labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::dirac;

    #[test]
    fn index_rejects_duplicates_and_empty() {
        assert!(Index::new(vec![1, 2, 2]).is_err());
        assert!(Index::new(Vec::<i32>::new()).is_err());
        let ix = Index::new(vec![4, 5, 6]).unwrap();
        assert_eq!(ix.get(&5), Some(1));
        assert_eq!(ix.get(&7), None);
    }

    #[test]
    fn mdp_validates_discount_and_families() {
        let states = Space::enumerated(vec![0usize, 1]).unwrap();
        let actions = Space::enumerated(vec![0usize]).unwrap();
        let t = Kernel::det(|&(x, _): &(usize, usize)| x);
        assert!(Mdp::new(states.clone(), actions.clone(), t, |_, _| 0.0, 1.0).is_err());

        let g: Kernel<(usize, usize), usize> =
            Kernel::gauss(crate::kernels::GaussKernel::scalar(1.0, 0.0, 0.0));
        assert!(Mdp::new(states, actions, g, |_, _| 0.0, 0.9).is_err());
    }

    #[test]
    fn euclidean_space_refuses_finite_machinery() {
        let s: Space<usize> = Space::Euclidean(3);
        assert!(s.index().is_err());
    }

    #[test]
    fn value_fn_lookup_and_sup_distance() {
        let ix = Index::new(vec![10, 20, 30]).unwrap();
        let v = ValueFn::from_fn(ix.clone(), |x| *x as f64);
        assert_eq!(v.get(&20), 20.0);
        let w = ValueFn::constant(ix, 0.0);
        assert_eq!(v.sup_distance(&w), 30.0);
    }

    #[test]
    fn policy_materialization_round_trips() {
        let states = Index::new(vec![0usize, 1, 2]).unwrap();
        let actions = Index::new(vec!['a', 'b']).unwrap();
        let p = Policy::from_action_indices(&states, &actions, vec![1, 0, 1]).unwrap();
        assert_eq!(p.action_dist(&0).support(), &[('b', 1.0)]);
        assert_eq!(
            p.to_action_indices(&states, &actions).unwrap(),
            vec![1, 0, 1]
        );
    }

    #[test]
    fn stochastic_policy_determinizes_by_mode() {
        let states = Index::new(vec![0usize]).unwrap();
        let actions = Index::new(vec!['a', 'b']).unwrap();
        let p = Policy::stoch(|_: &usize| {
            FiniteDist::new([('a', 0.25), ('b', 0.75)]).unwrap()
        });
        assert_eq!(p.to_action_indices(&states, &actions).unwrap(), vec![1]);
    }

    #[test]
    fn reindex_preserves_dynamics() {
        let states = Space::enumerated(vec!["s", "t"]).unwrap();
        let actions = Space::enumerated(vec!["go"]).unwrap();
        let t = Kernel::stoch(|&(x, _): &(&str, &str)| {
            if x == "s" {
                FiniteDist::new([("s", 0.5), ("t", 0.5)]).unwrap()
            } else {
                dirac("t")
            }
        });
        let m = Mdp::new(states, actions, t, |x, _| if *x == "t" { 1.0 } else { 0.0 }, 0.9)
            .unwrap()
            .with_terminal(|x: &&str| *x == "t");
        let (im, slabels, alabels) = reindex(&m, |x| x.to_string(), |a| a.to_string()).unwrap();
        assert_eq!(slabels, vec!["s", "t"]);
        assert_eq!(alabels, vec!["go"]);
        let row = im.transition().apply(&(0, 0)).unwrap();
        assert_eq!(row.weight(&0), 0.5);
        assert_eq!(row.weight(&1), 0.5);
        assert_eq!(im.reward(&1, &0), 1.0);
        assert!(im.is_terminal(&1));
        assert!(!im.is_terminal(&0));
    }
}
