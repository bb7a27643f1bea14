//! Morphism families used as forward categories: deterministic maps,
//! finite-support stochastic maps, and affine maps with Gaussian noise.
//!
//! The three families deliberately do not unify into one monad. Finite
//! machinery ([`FiniteDist`], [`pushforward`]) rejects Gaussian kernels, and
//! [`kernel_compose`] refuses to mix the Gaussian family with the finite ones.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};

/// Input weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Weights below this are pruned after merging and the distribution renormalized.
pub const WEIGHT_PRUNE: f64 = 1e-15;
/// Symmetry tolerance for covariance matrices.
pub const SYM_TOL: f64 = 1e-9;
/// Eigenvalues above this (negative) threshold count as non-negative.
pub const PSD_TOL: f64 = 1e-9;

/// Uniform draw in [0, 1) from a raw RNG, bit-stable across platforms.
pub(crate) fn uniform_f64(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A finite-support probability distribution.
///
/// Invariants maintained by construction: weights are non-negative and sum to
/// one, duplicate outcomes are merged by weight addition, and weights below
/// [`WEIGHT_PRUNE`] are dropped (with renormalization) so supports do not grow
/// numerical dust across long kernel chains.
///
/// Outcomes are compared by exact equality, so discrete state types
/// (integers, enums, tuples of those) should be used — never floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDist<T> {
    support: Vec<(T, f64)>,
}

impl<T: Clone + Eq + Hash> FiniteDist<T> {
    /// Build a distribution from outcome/weight pairs, merging duplicates.
    pub fn new(pairs: impl IntoIterator<Item = (T, f64)>) -> Result<Self> {
        let mut support: Vec<(T, f64)> = Vec::new();
        let mut slot: HashMap<T, usize> = HashMap::new();
        let mut sum = 0.0;
        for (t, w) in pairs {
            if w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "negative weight {w:e}"
                )));
            }
            sum += w;
            match slot.get(&t) {
                Some(&i) => support[i].1 += w,
                None => {
                    slot.insert(t.clone(), support.len());
                    support.push((t, w));
                }
            }
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum} (must be 1 within {WEIGHT_SUM_TOL:e})"
            )));
        }
        support.retain(|&(_, w)| w >= WEIGHT_PRUNE);
        if support.is_empty() {
            return Err(Error::InvalidDistribution(
                "all weights below prune threshold".into(),
            ));
        }
        let total: f64 = support.iter().map(|&(_, w)| w).sum();
        for entry in &mut support {
            entry.1 /= total;
        }
        Ok(Self { support })
    }

    /// Point mass at `x`.
    pub fn dirac(x: T) -> Self {
        Self {
            support: vec![(x, 1.0)],
        }
    }

    /// Expectation of `f` under the distribution: `Σ_t w(t)·f(t)`.
    pub fn expectation(&self, mut f: impl FnMut(&T) -> f64) -> f64 {
        self.support.iter().map(|(t, w)| w * f(t)).sum()
    }

    /// Pushforward along a plain function; duplicate images merge.
    pub fn map<U: Clone + Eq + Hash>(&self, mut f: impl FnMut(&T) -> U) -> FiniteDist<U> {
        FiniteDist::new(self.support.iter().map(|(t, w)| (f(t), *w)))
            .expect("map of a valid distribution is valid")
    }

    /// Monadic bind: mixture of `f(t)` weighted by `w(t)`.
    pub fn bind<U: Clone + Eq + Hash>(
        &self,
        mut f: impl FnMut(&T) -> FiniteDist<U>,
    ) -> FiniteDist<U> {
        let mut pairs = Vec::new();
        for (t, w) in &self.support {
            for (u, v) in f(t).support {
                pairs.push((u, w * v));
            }
        }
        FiniteDist::new(pairs).expect("bind of valid distributions is valid")
    }

    /// Weight of a specific outcome (zero when absent).
    pub fn weight(&self, t: &T) -> f64 {
        self.support
            .iter()
            .find(|(u, _)| u == t)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn support(&self) -> &[(T, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Sample an outcome by inverse-CDF walk over the support order.
    pub fn sample(&self, rng: &mut dyn RngCore) -> &T {
        let u = uniform_f64(rng);
        let mut acc = 0.0;
        for (t, w) in &self.support {
            acc += w;
            if u < acc {
                return t;
            }
        }
        &self.support.last().expect("non-empty support").0
    }
}

impl<T: Clone + Ord> FiniteDist<T> {
    /// Support sorted by outcome, for order-insensitive comparisons in tests.
    pub fn sorted_support(&self) -> Vec<(T, f64)> {
        let mut s = self.support.clone();
        s.sort_by(|a, b| a.0.cmp(&b.0));
        s
    }
}

/// Point mass at `x`.
pub fn dirac<T: Clone + Eq + Hash>(x: T) -> FiniteDist<T> {
    FiniteDist::dirac(x)
}

/// Expectation of `f` under `d`.
pub fn expectation<T: Clone + Eq + Hash>(d: &FiniteDist<T>, f: impl FnMut(&T) -> f64) -> f64 {
    d.expectation(f)
}

fn check_square(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: format!("{context} (square matrix required)"),
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(())
}

/// Validate symmetry and positive semi-definiteness of a covariance matrix.
fn check_covariance(cov: &DMatrix<f64>, context: &str) -> Result<()> {
    check_square(cov, context)?;
    let mut max_asym = 0.0f64;
    for i in 0..cov.nrows() {
        for j in (i + 1)..cov.ncols() {
            max_asym = max_asym.max((cov[(i, j)] - cov[(j, i)]).abs());
        }
    }
    if max_asym > SYM_TOL {
        return Err(Error::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }
    if cov.nrows() > 0 {
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::NotPositiveSemiDefinite {
                min_eigenvalue: min_eig,
            });
        }
    }
    Ok(())
}

/// Square root of a PSD matrix via symmetric eigendecomposition, with small
/// negative eigenvalues (within tolerance) clamped to zero.
pub(crate) fn psd_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if cov.nrows() == 0 {
        return cov.clone();
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// A Gaussian state: `N(mean, cov)` over a Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_covariance(&cov, "GaussState covariance")?;
        if cov.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "GaussState mean vs covariance".into(),
                expected: mean.len(),
                found: cov.nrows(),
            });
        }
        Ok(Self { mean, cov })
    }

    /// 1-D convenience constructor from mean and variance.
    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(
            DVector::from_vec(vec![mean]),
            DMatrix::from_vec(1, 1, vec![var]),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Draw one sample. Provided for test oracles, not solver paths.
    pub fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let sqrt = psd_sqrt(&self.cov);
        let z = DVector::from_fn(self.dim(), |_, _| standard_normal(rng));
        &self.mean + sqrt * z
    }
}

/// Box–Muller draw from N(0, 1) off a raw RNG.
pub(crate) fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    let u1 = (uniform_f64(rng)).max(f64::MIN_POSITIVE);
    let u2 = uniform_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// An affine map with additive Gaussian noise: `x ↦ N(lin·x + offset, noise_cov)`.
///
/// Only affine maps are representable; nonlinear maps must be rejected or
/// routed through discretization, since Gaussians are not closed under
/// nonlinear pushforward.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussKernel {
    lin: DMatrix<f64>,
    offset: DVector<f64>,
    noise_cov: DMatrix<f64>,
}

impl GaussKernel {
    pub fn new(lin: DMatrix<f64>, offset: DVector<f64>, noise_cov: DMatrix<f64>) -> Result<Self> {
        if lin.nrows() != offset.len() {
            return Err(Error::DimensionMismatch {
                context: "GaussKernel lin rows vs offset".into(),
                expected: lin.nrows(),
                found: offset.len(),
            });
        }
        check_covariance(&noise_cov, "GaussKernel noise covariance")?;
        if noise_cov.nrows() != lin.nrows() {
            return Err(Error::DimensionMismatch {
                context: "GaussKernel noise covariance vs output".into(),
                expected: lin.nrows(),
                found: noise_cov.nrows(),
            });
        }
        Ok(Self {
            lin,
            offset,
            noise_cov,
        })
    }

    /// Noise-free affine map.
    pub fn affine(lin: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let n = lin.nrows();
        Self::new(lin, offset, DMatrix::zeros(n, n))
    }

    /// 1-D kernel `x ↦ N(a·x + b, var)`.
    pub fn scalar(a: f64, b: f64, var: f64) -> Self {
        Self::new(
            DMatrix::from_vec(1, 1, vec![a]),
            DVector::from_vec(vec![b]),
            DMatrix::from_vec(1, 1, vec![var]),
        )
        .expect("scalar kernel is always valid")
    }

    pub fn in_dim(&self) -> usize {
        self.lin.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.lin.nrows()
    }

    pub fn lin(&self) -> &DMatrix<f64> {
        &self.lin
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// Evaluate the mean response at a point (no noise).
    pub fn mean_at(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "GaussKernel input".into(),
                expected: self.in_dim(),
                found: x.len(),
            });
        }
        Ok(&self.lin * x + &self.offset)
    }

    /// Draw one noisy output at a point. Provided for test oracles.
    pub fn sample(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let mean = self.mean_at(x)?;
        let sqrt = psd_sqrt(&self.noise_cov);
        let z = DVector::from_fn(self.out_dim(), |_, _| standard_normal(rng));
        Ok(mean + sqrt * z)
    }
}

/// Pushforward of a Gaussian state along an affine-Gaussian kernel:
/// `mean′ = lin·mean + offset`, `cov′ = lin·cov·linᵀ + noise_cov`.
pub fn gauss_push(s: &GaussState, k: &GaussKernel) -> Result<GaussState> {
    if s.dim() != k.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "gauss_push state vs kernel input".into(),
            expected: k.in_dim(),
            found: s.dim(),
        });
    }
    let mean = &k.lin * s.mean() + &k.offset;
    let cov = &k.lin * s.cov() * k.lin.transpose() + &k.noise_cov;
    GaussState::new(mean, cov)
}

/// Sequential composition of Gaussian kernels (`k1` first, then `k2`).
pub fn gauss_compose(k1: &GaussKernel, k2: &GaussKernel) -> Result<GaussKernel> {
    if k1.out_dim() != k2.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "gauss_compose middle dimension".into(),
            expected: k2.in_dim(),
            found: k1.out_dim(),
        });
    }
    let lin = &k2.lin * &k1.lin;
    let offset = &k2.lin * &k1.offset + &k2.offset;
    let noise = &k2.lin * &k1.noise_cov * k2.lin.transpose() + &k2.noise_cov;
    GaussKernel::new(lin, offset, noise)
}

type DetFn<X, Y> = Arc<dyn Fn(&X) -> Y + Send + Sync>;
type StochFn<X, Y> = Arc<dyn Fn(&X) -> FiniteDist<Y> + Send + Sync>;

/// A morphism from `X` to `Y` in one of the three forward families.
///
/// The `Gauss` variant only makes sense between Euclidean spaces; operations
/// on the finite machinery reject it at runtime rather than linearize or
/// approximate.
pub enum Kernel<X, Y> {
    Det(DetFn<X, Y>),
    Stoch(StochFn<X, Y>),
    Gauss(GaussKernel),
}

impl<X, Y> Kernel<X, Y> {
    pub fn det(f: impl Fn(&X) -> Y + Send + Sync + 'static) -> Self {
        Kernel::Det(Arc::new(f))
    }

    pub fn stoch(f: impl Fn(&X) -> FiniteDist<Y> + Send + Sync + 'static) -> Self {
        Kernel::Stoch(Arc::new(f))
    }

    pub fn gauss(k: GaussKernel) -> Self {
        Kernel::Gauss(k)
    }

    pub fn family(&self) -> &'static str {
        match self {
            Kernel::Det(_) => "deterministic",
            Kernel::Stoch(_) => "stochastic",
            Kernel::Gauss(_) => "gaussian",
        }
    }
}

impl<X, Y: Clone + Eq + Hash> Kernel<X, Y> {
    /// Evaluate the kernel at a point as a finite distribution.
    pub fn apply(&self, x: &X) -> Result<FiniteDist<Y>> {
        match self {
            Kernel::Det(f) => Ok(FiniteDist::dirac(f(x))),
            Kernel::Stoch(f) => Ok(f(x)),
            Kernel::Gauss(_) => Err(Error::Unsupported(
                "cannot evaluate a Gaussian kernel as a finite distribution".into(),
            )),
        }
    }
}

impl<X: Clone + Send + Sync + 'static> Kernel<X, X> {
    /// The deterministic identity kernel.
    pub fn identity() -> Self {
        Kernel::det(|x: &X| x.clone())
    }
}

impl<X, Y> Clone for Kernel<X, Y> {
    fn clone(&self) -> Self {
        match self {
            Kernel::Det(f) => Kernel::Det(f.clone()),
            Kernel::Stoch(f) => Kernel::Stoch(f.clone()),
            Kernel::Gauss(k) => Kernel::Gauss(k.clone()),
        }
    }
}

impl<X, Y> std::fmt::Debug for Kernel<X, Y> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Kernel::{}", match self {
            Kernel::Det(_) => "Det",
            Kernel::Stoch(_) => "Stoch",
            Kernel::Gauss(_) => "Gauss",
        })
    }
}

/// Pushforward of a finite distribution along a deterministic or stochastic
/// kernel (law of total probability). Gaussian kernels are rejected: the
/// finite and continuous machineries do not mix.
pub fn pushforward<X: Clone + Eq + Hash, Y: Clone + Eq + Hash>(
    d: &FiniteDist<X>,
    k: &Kernel<X, Y>,
) -> Result<FiniteDist<Y>> {
    match k {
        Kernel::Det(f) => Ok(d.map(|x| f(x))),
        Kernel::Stoch(f) => Ok(d.bind(|x| f(x))),
        Kernel::Gauss(_) => Err(Error::Unsupported(
            "pushforward of a finite distribution along a Gaussian kernel".into(),
        )),
    }
}

/// Sequential composition `k1` then `k2`. Deterministic kernels compose to a
/// deterministic kernel, any finite/stochastic mix composes to a stochastic
/// kernel, and Gaussian kernels compose among themselves.
pub fn kernel_compose<X, Y, Z>(k1: &Kernel<X, Y>, k2: &Kernel<Y, Z>) -> Result<Kernel<X, Z>>
where
    X: 'static,
    Y: Clone + Eq + Hash + Send + Sync + 'static,
    Z: Clone + Eq + Hash + Send + Sync + 'static,
{
    match (k1, k2) {
        (Kernel::Det(f), Kernel::Det(g)) => {
            let (f, g) = (f.clone(), g.clone());
            Ok(Kernel::det(move |x| g(&f(x))))
        }
        (Kernel::Det(f), Kernel::Stoch(h)) => {
            let (f, h) = (f.clone(), h.clone());
            Ok(Kernel::stoch(move |x| h(&f(x))))
        }
        (Kernel::Stoch(h), Kernel::Det(g)) => {
            let (h, g) = (h.clone(), g.clone());
            Ok(Kernel::stoch(move |x| h(x).map(|y| g(y))))
        }
        (Kernel::Stoch(h1), Kernel::Stoch(h2)) => {
            let (h1, h2) = (h1.clone(), h2.clone());
            Ok(Kernel::stoch(move |x| h1(x).bind(|y| h2(y))))
        }
        (Kernel::Gauss(g1), Kernel::Gauss(g2)) => Ok(Kernel::Gauss(gauss_compose(g1, g2)?)),
        (a, b) => Err(Error::UnsupportedMixture(format!(
            "cannot compose a {} kernel with a {} kernel",
            a.family(),
            b.family()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn dirac_is_point_mass() {
        let d = dirac(3);
        assert_eq!(d.support(), &[(3, 1.0)]);
        let s = dirac("N");
        assert_eq!(s.support(), &[("N", 1.0)]);
    }

    #[test]
    fn dirac_expectation_evaluates_function() {
        let d = dirac(7);
        assert_eq!(d.expectation(|x| (*x as f64) * 2.0), 14.0);
    }

    #[test]
    fn expectation_is_weighted_sum() {
        let d = FiniteDist::new([(0, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(d.expectation(|x| *x as f64), 0.5);
        let d = FiniteDist::new([("a", 0.3), ("b", 0.7)]).unwrap();
        let f = |t: &&str| if *t == "a" { 10.0 } else { 0.0 };
        assert_abs_diff_eq!(d.expectation(f), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn duplicates_merge_by_addition() {
        let d = FiniteDist::new([(1, 0.25), (2, 0.5), (1, 0.25)]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.weight(&1), 0.5);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(FiniteDist::new([(1, 0.5), (2, 0.6)]).is_err());
        assert!(FiniteDist::new([(1, -0.1), (2, 1.1)]).is_err());
        assert!(FiniteDist::<i32>::new([]).is_err());
    }

    #[test]
    fn dust_is_pruned_and_renormalized() {
        let d = FiniteDist::new([(1, 1.0 - 1e-16), (2, 1e-16)]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.weight(&1), 1.0);
    }

    #[test]
    fn pushforward_det_moves_mass() {
        let d = dirac(0);
        let k = Kernel::det(|x: &i32| x + 1);
        let out = pushforward(&d, &k).unwrap();
        assert_eq!(out.support(), &[(1, 1.0)]);
    }

    #[test]
    fn pushforward_constant_map_merges() {
        let d = FiniteDist::new([(0, 0.5), (1, 0.5)]).unwrap();
        let k = Kernel::det(|_: &i32| 0);
        let out = pushforward(&d, &k).unwrap();
        assert_eq!(out.support(), &[(0, 1.0)]);
    }

    #[test]
    fn pushforward_stoch_total_probability() {
        // Hand enumeration: P(0) = 0.5·1 + 0.5·0.5 = 0.75, P(1) = 0.25.
        let d = FiniteDist::new([(0, 0.5), (1, 0.5)]).unwrap();
        let k = Kernel::stoch(|x: &i32| {
            if *x == 0 {
                dirac(0)
            } else {
                FiniteDist::new([(0, 0.5), (1, 0.5)]).unwrap()
            }
        });
        let out = pushforward(&d, &k).unwrap();
        assert_abs_diff_eq!(out.weight(&0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(out.weight(&1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn pushforward_rejects_gauss() {
        let d = dirac(0usize);
        let k: Kernel<usize, usize> = Kernel::gauss(GaussKernel::scalar(1.0, 0.0, 0.0));
        assert!(pushforward(&d, &k).is_err());
    }

    #[test]
    fn gauss_push_affine_transform() {
        // N(0,1) through 2x+3 with no noise is N(3, 4).
        let s = GaussState::scalar(0.0, 1.0).unwrap();
        let k = GaussKernel::scalar(2.0, 3.0, 0.0);
        let out = gauss_push(&s, &k).unwrap();
        assert_abs_diff_eq!(out.mean()[0], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov()[(0, 0)], 4.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_push_adds_independent_noise() {
        let s = GaussState::scalar(5.0, 0.0).unwrap();
        let k = GaussKernel::scalar(1.0, 0.0, 0.25);
        let out = gauss_push(&s, &k).unwrap();
        assert_abs_diff_eq!(out.mean()[0], 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov()[(0, 0)], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn gauss_push_sums_independent_normals() {
        let s = GaussState::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let k = GaussKernel::affine(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::zeros(1),
        )
        .unwrap();
        let out = gauss_push(&s, &k).unwrap();
        assert_abs_diff_eq!(out.mean()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov()[(0, 0)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_push_dimension_mismatch_names_both() {
        let s = GaussState::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let k = GaussKernel::scalar(1.0, 0.0, 0.0);
        let err = gauss_push(&s, &k).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('1') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn covariance_must_be_symmetric_psd() {
        let bad_sym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GaussState::new(DVector::zeros(2), bad_sym).is_err());
        let not_psd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussState::new(DVector::zeros(2), not_psd).is_err());
    }

    #[test]
    fn kernel_compose_det_det_is_function_composition() {
        let f = Kernel::det(|x: &i32| x + 1);
        let g = Kernel::det(|x: &i32| x * 10);
        let c = kernel_compose(&f, &g).unwrap();
        assert_eq!(c.apply(&2).unwrap().support(), &[(30, 1.0)]);
        assert!(matches!(c, Kernel::Det(_)));
    }

    #[test]
    fn kernel_compose_det_then_stoch_is_kleisli_unit() {
        let f = Kernel::det(|x: &i32| x + 1);
        let h = Kernel::stoch(|y: &i32| FiniteDist::new([(*y, 0.5), (0, 0.5)]).unwrap());
        let c = kernel_compose(&f, &h).unwrap();
        let out = c.apply(&1).unwrap();
        assert_eq!(out.weight(&2), 0.5);
        assert_eq!(out.weight(&0), 0.5);
    }

    #[test]
    fn kernel_compose_gauss_matches_two_pushes() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a1 = 2.0 * uniform_f64(&mut rng) - 1.0;
            let a2 = 2.0 * uniform_f64(&mut rng) - 1.0;
            let k1 = GaussKernel::scalar(a1, uniform_f64(&mut rng), uniform_f64(&mut rng));
            let k2 = GaussKernel::scalar(a2, uniform_f64(&mut rng), uniform_f64(&mut rng));
            let c = gauss_compose(&k1, &k2).unwrap();
            let s = GaussState::scalar(uniform_f64(&mut rng), uniform_f64(&mut rng)).unwrap();
            let two = gauss_push(&gauss_push(&s, &k1).unwrap(), &k2).unwrap();
            let one = gauss_push(&s, &c).unwrap();
            assert_abs_diff_eq!(one.mean()[0], two.mean()[0], epsilon = 1e-12);
            assert_abs_diff_eq!(one.cov()[(0, 0)], two.cov()[(0, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_compose_rejects_gauss_stoch_mixture() {
        let g: Kernel<i32, i32> = Kernel::gauss(GaussKernel::scalar(1.0, 0.0, 0.0));
        let h: Kernel<i32, i32> = Kernel::stoch(|x: &i32| dirac(*x));
        assert!(matches!(
            kernel_compose(&g, &h),
            Err(Error::UnsupportedMixture(_))
        ));
        assert!(matches!(
            kernel_compose(&h, &g),
            Err(Error::UnsupportedMixture(_))
        ));
    }

    #[test]
    fn det_identity_is_two_sided_unit() {
        let k = Kernel::stoch(|x: &i32| FiniteDist::new([(*x, 0.75), (-x, 0.25)]).unwrap());
        let id = Kernel::<i32, i32>::identity();
        let left = kernel_compose(&id, &k).unwrap();
        let right = kernel_compose(&k, &id).unwrap();
        for x in [-3, 0, 5] {
            let want = k.apply(&x).unwrap();
            assert_eq!(left.apply(&x).unwrap(), want);
            assert_eq!(right.apply(&x).unwrap(), want);
        }
    }
}
