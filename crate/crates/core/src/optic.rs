//! Concrete optics: a residual space, a forward pass into residual×target,
//! and a backward pass consuming the residual and a continuation value.
//!
//! An optic here is one concrete triple `(M, forward, backward)` — no
//! equivalence-class quotient is computed, and optic equality is only ever
//! observed extensionally through [`apply_costate`]. Composition takes the
//! product of the residuals; costates (optics into the unit interface) are
//! plain functions, and applying an optic to a costate is the representable
//! functor action `x ↦ backward(m, v(y))` where `(m, y) = forward(x)`,
//! extended by expectation over the joint residual/successor distribution in
//! the stochastic case.
//!
//! Value improvement is precomposition with the process optic: see
//! [`lambda_optic`] (process), [`policy_lift`] (policy) and the solvers that
//! iterate them.

use std::hash::Hash;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{gauss_compose, FiniteDist, GaussKernel, Kernel};
use crate::mdp::{Mdp, Policy};

type BackwardFn<M> = Arc<dyn Fn(&M, f64) -> f64 + Send + Sync>;

/// An optic between interface pairs `(X, ℝ) → (Y, ℝ)` with residual `M`, for
/// the deterministic and finite-stochastic families.
///
/// The backward pass is stored pointwise on residual values and lifted to
/// residual distributions by expectation at application time (the linear
/// extension is canonical because the backward domain is free on the
/// residual set).
#[derive(Clone)]
pub struct Optic<X, M, Y> {
    forward: Kernel<X, (M, Y)>,
    backward: BackwardFn<M>,
}

impl<X, M, Y> std::fmt::Debug for Optic<X, M, Y> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Optic")
            .field("forward", &self.forward)
            .finish_non_exhaustive()
    }
}

impl<X, M, Y> Optic<X, M, Y>
where
    X: Send + Sync + 'static,
    M: Clone + Eq + Hash + Send + Sync + 'static,
    Y: Clone + Eq + Hash + Send + Sync + 'static,
{
    /// Build an optic from a forward kernel and a backward pass. The forward
    /// kernel must be deterministic or finite-stochastic; Gaussian forwards
    /// live in [`GaussOptic`].
    pub fn new(
        forward: Kernel<X, (M, Y)>,
        backward: impl Fn(&M, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if matches!(forward, Kernel::Gauss(_)) {
            return Err(Error::Unsupported(
                "finite optics require a deterministic or stochastic forward pass".into(),
            ));
        }
        Ok(Self {
            forward,
            backward: Arc::new(backward),
        })
    }

    pub fn forward(&self) -> &Kernel<X, (M, Y)> {
        &self.forward
    }

    /// Evaluate the backward pass at a residual point.
    pub fn backward_at(&self, m: &M, continuation: f64) -> f64 {
        (self.backward)(m, continuation)
    }

    /// The action of the representable functor: feed the costate `v` through
    /// the optic, producing a costate on the source interface.
    pub fn apply_costate(
        &self,
        v: impl Fn(&Y) -> f64 + Send + Sync + 'static,
    ) -> impl Fn(&X) -> f64 + Send + Sync + 'static {
        let backward = self.backward.clone();
        let forward = self.forward.clone();
        move |x: &X| match &forward {
            Kernel::Det(f) => {
                let (m, y) = f(x);
                backward(&m, v(&y))
            }
            Kernel::Stoch(h) => h(x).expectation(|(m, y)| backward(m, v(y))),
            Kernel::Gauss(_) => unreachable!("validated at construction"),
        }
    }
}

/// The identity optic: unit residual, identity passes.
pub fn identity_optic<X: Clone + Eq + Hash + Send + Sync + 'static>() -> Optic<X, (), X> {
    Optic::new(Kernel::det(|x: &X| ((), x.clone())), |_: &(), r| r)
        .expect("identity optic is always valid")
}

/// Composition of optics: residuals multiply, forward passes chain, and the
/// backward passes apply in reverse order.
pub fn optic_compose<X, M1, Y, M2, Z>(
    o1: &Optic<X, M1, Y>,
    o2: &Optic<Y, M2, Z>,
) -> Optic<X, (M1, M2), Z>
where
    X: Send + Sync + 'static,
    M1: Clone + Eq + Hash + Send + Sync + 'static,
    Y: Clone + Eq + Hash + Send + Sync + 'static,
    M2: Clone + Eq + Hash + Send + Sync + 'static,
    Z: Clone + Eq + Hash + Send + Sync + 'static,
{
    let forward = match (&o1.forward, &o2.forward) {
        (Kernel::Det(f1), Kernel::Det(f2)) => {
            let (f1, f2) = (f1.clone(), f2.clone());
            Kernel::det(move |x: &X| {
                let (m1, y) = f1(x);
                let (m2, z) = f2(&y);
                ((m1, m2), z)
            })
        }
        (f1, f2) => {
            let f1 = as_stoch(f1);
            let f2 = as_stoch(f2);
            Kernel::stoch(move |x: &X| {
                f1(x).bind(|(m1, y)| f2(y).map(|(m2, z)| ((m1.clone(), m2.clone()), z.clone())))
            })
        }
    };
    let (b1, b2) = (o1.backward.clone(), o2.backward.clone());
    Optic {
        forward,
        backward: Arc::new(move |(m1, m2): &(M1, M2), r| b1(m1, b2(m2, r))),
    }
}

/// View a Det/Stoch kernel uniformly as a distribution-valued map.
fn as_stoch<X, T: Clone + Eq + Hash>(
    k: &Kernel<X, T>,
) -> Arc<dyn Fn(&X) -> FiniteDist<T> + Send + Sync>
where
    X: Send + Sync + 'static,
    T: Send + Sync + 'static,
{
    match k {
        Kernel::Det(f) => {
            let f = f.clone();
            Arc::new(move |x| FiniteDist::dirac(f(x)))
        }
        Kernel::Stoch(h) => h.clone(),
        Kernel::Gauss(_) => unreachable!("finite optics never hold Gaussian forwards"),
    }
}

/// Free-function form of [`Optic::apply_costate`].
pub fn apply_costate<X, M, Y>(
    o: &Optic<X, M, Y>,
    v: impl Fn(&Y) -> f64 + Send + Sync + 'static,
) -> impl Fn(&X) -> f64 + Send + Sync + 'static
where
    X: Send + Sync + 'static,
    M: Clone + Eq + Hash + Send + Sync + 'static,
    Y: Clone + Eq + Hash + Send + Sync + 'static,
{
    o.apply_costate(v)
}

/// Convert a finite decision process into its optic
/// `(X×A, ℝ) → (X, ℝ)`.
///
/// The forward pass copies the input into the residual and applies the
/// transition: `(x,a) ↦ ((x,a), f(x,a))`, with the residual copy correlated
/// with the successor in the stochastic case. The backward pass is
/// `((x,a), r) ↦ U(x,a) + β·r`, with the continuation cut at terminal states.
pub fn lambda_optic<X, A>(m: &Mdp<X, A>) -> Result<Optic<(X, A), (X, A), X>>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let forward = match m.transition() {
        Kernel::Det(f) => {
            let f = f.clone();
            Kernel::det(move |xa: &(X, A)| (xa.clone(), f(xa)))
        }
        Kernel::Stoch(h) => {
            let h = h.clone();
            Kernel::stoch(move |xa: &(X, A)| {
                let residual = xa.clone();
                h(xa).map(|x2| (residual.clone(), x2.clone()))
            })
        }
        Kernel::Gauss(_) => {
            return Err(Error::Unsupported(
                "process has a Gaussian transition kernel; use lambda_gauss or discretize".into(),
            ))
        }
    };
    let reward = m.reward_fn();
    let beta = m.discount();
    let terminal = m.terminal_fn();
    Optic::new(forward, move |(x, a): &(X, A), r| {
        let cont = match &terminal {
            Some(t) if t(x) => 0.0,
            _ => r,
        };
        reward(x, a) + beta * cont
    })
}

/// Lift a policy to an optic `(X, ℝ) → (X×A, ℝ)` with unit residual: the
/// forward pass pairs the state with the chosen action and the backward pass
/// is the identity on the continuation.
pub fn policy_lift<X, A>(p: &Policy<X, A>) -> Optic<X, (), (X, A)>
where
    X: Clone + Eq + Hash + Send + Sync + 'static,
    A: Clone + Eq + Hash + Send + Sync + 'static,
{
    let forward = match p {
        Policy::Det(f) => {
            let f = f.clone();
            Kernel::det(move |x: &X| ((), (x.clone(), f(x))))
        }
        Policy::Stoch(f) => {
            let f = f.clone();
            Kernel::stoch(move |x: &X| {
                let state = x.clone();
                f(x).map(|a| ((), (state.clone(), a.clone())))
            })
        }
    };
    Optic::new(forward, |_: &(), r| r).expect("policy lift is always a finite optic")
}

/// An optic in the Gaussian family: both passes are affine maps with Gaussian
/// noise, and spaces are Euclidean dimensions.
///
/// Costate application is only defined for affine costates (represented as
/// `GaussKernel`s into ℝ); nonlinear value functions must pass through
/// discretization instead, since Gaussians are not closed under nonlinear
/// pushforward. Backward passes may carry noise, so applying a costate can
/// yield a value map with nonzero variance; that behavior is exposed as-is.
#[derive(Debug, Clone)]
pub struct GaussOptic {
    residual_dim: usize,
    forward: GaussKernel,
    backward: GaussKernel,
}

impl GaussOptic {
    pub fn new(residual_dim: usize, forward: GaussKernel, backward: GaussKernel) -> Result<Self> {
        if forward.out_dim() < residual_dim {
            return Err(Error::DimensionMismatch {
                context: "GaussOptic forward output vs residual".into(),
                expected: residual_dim,
                found: forward.out_dim(),
            });
        }
        if backward.in_dim() != residual_dim + 1 {
            return Err(Error::DimensionMismatch {
                context: "GaussOptic backward input vs residual+continuation".into(),
                expected: residual_dim + 1,
                found: backward.in_dim(),
            });
        }
        if backward.out_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "GaussOptic backward output".into(),
                expected: 1,
                found: backward.out_dim(),
            });
        }
        Ok(Self {
            residual_dim,
            forward,
            backward,
        })
    }

    pub fn residual_dim(&self) -> usize {
        self.residual_dim
    }

    pub fn in_dim(&self) -> usize {
        self.forward.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.forward.out_dim() - self.residual_dim
    }

    pub fn forward(&self) -> &GaussKernel {
        &self.forward
    }

    pub fn backward(&self) -> &GaussKernel {
        &self.backward
    }

    /// Composition: residual dimensions add, forward passes chain with the
    /// first residual carried through, backward passes apply in reverse.
    pub fn compose(&self, other: &GaussOptic) -> Result<GaussOptic> {
        if self.out_dim() != other.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "GaussOptic composition middle interface".into(),
                expected: other.in_dim(),
                found: self.out_dim(),
            });
        }
        let forward = gauss_compose(&self.forward, &pad_identity(self.residual_dim, &other.forward)?)?;
        let backward = gauss_compose(
            &pad_identity(self.residual_dim, &other.backward)?,
            &self.backward,
        )?;
        GaussOptic::new(self.residual_dim + other.residual_dim, forward, backward)
    }

    /// Apply an affine costate `v : Y → ℝ`, yielding an affine costate on the
    /// source space (possibly with noise inherited from the passes).
    pub fn apply_costate(&self, v: &GaussKernel) -> Result<GaussKernel> {
        if v.in_dim() != self.out_dim() {
            return Err(Error::DimensionMismatch {
                context: "GaussOptic costate input".into(),
                expected: self.out_dim(),
                found: v.in_dim(),
            });
        }
        if v.out_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "GaussOptic costate output".into(),
                expected: 1,
                found: v.out_dim(),
            });
        }
        let mid = pad_identity(self.residual_dim, v)?;
        gauss_compose(&gauss_compose(&self.forward, &mid)?, &self.backward)
    }
}

/// Extend a kernel to act on `[w; x]`, leaving the first `dim` coordinates
/// untouched: `(w, x) ↦ (w, k(x))`.
fn pad_identity(dim: usize, k: &GaussKernel) -> Result<GaussKernel> {
    let (ki, ko) = (k.in_dim(), k.out_dim());
    let mut lin = DMatrix::zeros(dim + ko, dim + ki);
    for i in 0..dim {
        lin[(i, i)] = 1.0;
    }
    lin.view_mut((dim, dim), (ko, ki)).copy_from(k.lin());
    let mut offset = DVector::zeros(dim + ko);
    offset.rows_mut(dim, ko).copy_from(k.offset());
    let mut noise = DMatrix::zeros(dim + ko, dim + ko);
    noise.view_mut((dim, dim), (ko, ko)).copy_from(k.noise_cov());
    GaussKernel::new(lin, offset, noise)
}

/// Gaussian-family process optic: forward copies the input into the residual
/// and applies the affine transition; backward is `((x,a), r) ↦ U(x,a) + β·r`
/// with `U` itself affine.
pub fn lambda_gauss(
    transition: &GaussKernel,
    reward: &GaussKernel,
    beta: f64,
) -> Result<GaussOptic> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discount must lie in (0, 1), got {beta}"
        )));
    }
    if reward.in_dim() != transition.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "lambda_gauss reward input vs transition input".into(),
            expected: transition.in_dim(),
            found: reward.in_dim(),
        });
    }
    if reward.out_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "lambda_gauss reward output".into(),
            expected: 1,
            found: reward.out_dim(),
        });
    }
    let n_in = transition.in_dim();
    let n_out = transition.out_dim();

    // forward: x ↦ (x, f(x)) stacked as [x; f(x)]
    let mut lin = DMatrix::zeros(n_in + n_out, n_in);
    for i in 0..n_in {
        lin[(i, i)] = 1.0;
    }
    lin.view_mut((n_in, 0), (n_out, n_in)).copy_from(transition.lin());
    let mut offset = DVector::zeros(n_in + n_out);
    offset.rows_mut(n_in, n_out).copy_from(transition.offset());
    let mut noise = DMatrix::zeros(n_in + n_out, n_in + n_out);
    noise
        .view_mut((n_in, n_in), (n_out, n_out))
        .copy_from(transition.noise_cov());
    let forward = GaussKernel::new(lin, offset, noise)?;

    // backward: [(x,a); r] ↦ U(x,a) + β·r
    let mut blin = DMatrix::zeros(1, n_in + 1);
    blin.view_mut((0, 0), (1, n_in)).copy_from(reward.lin());
    blin[(0, n_in)] = beta;
    let backward = GaussKernel::new(blin, reward.offset().clone(), reward.noise_cov().clone())?;

    GaussOptic::new(n_in, forward, backward)
}

/// Gaussian-family policy lift: unit residual, forward `x ↦ (x, π(x))`,
/// identity backward.
pub fn policy_lift_gauss(policy: &GaussKernel) -> Result<GaussOptic> {
    let n_x = policy.in_dim();
    let n_a = policy.out_dim();
    let mut lin = DMatrix::zeros(n_x + n_a, n_x);
    for i in 0..n_x {
        lin[(i, i)] = 1.0;
    }
    lin.view_mut((n_x, 0), (n_a, n_x)).copy_from(policy.lin());
    let mut offset = DVector::zeros(n_x + n_a);
    offset.rows_mut(n_x, n_a).copy_from(policy.offset());
    let mut noise = DMatrix::zeros(n_x + n_a, n_x + n_a);
    noise
        .view_mut((n_x, n_x), (n_a, n_a))
        .copy_from(policy.noise_cov());
    let forward = GaussKernel::new(lin, offset, noise)?;
    let backward = GaussKernel::affine(DMatrix::identity(1, 1), DVector::zeros(1))?;
    GaussOptic::new(0, forward, backward)
}
