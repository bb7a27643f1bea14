//! Grid discretization: continuous deterministic or Gaussian decision
//! processes become finite stochastic MDPs, with a continuous state mapped to
//! a distribution over the surrounding grid nodes by multilinear weights.
//! Numerical approximation error is thereby modelled as stochastic
//! uncertainty.
//!
//! Grids are uniform axis-aligned boxes (non-uniform grids are an extension
//! point). Out-of-grid points clamp to the boundary, which keeps the
//! discretized chain closed and realizes floors/caps such as the savings
//! problem's `max{·, 0}`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::{psd_sqrt, FiniteDist, GaussKernel, Kernel};
use crate::mdp::{Mdp, Space};

/// Default cap on `state nodes × action nodes`.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// One uniformly spaced grid axis.
#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl AxisSpec {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "axis lower bound {lo} must be below upper bound {hi}"
            )));
        }
        if nodes < 2 {
            return Err(Error::InvalidArgument(format!(
                "axis needs at least 2 nodes, got {nodes}"
            )));
        }
        Ok(Self { lo, hi, nodes })
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }
}

/// A uniform grid over one space (state or action).
#[derive(Debug, Clone)]
pub struct Grid {
    axes: Vec<AxisSpec>,
}

impl Grid {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        Ok(Self { axes })
    }

    /// Convenience constructor from `(lo, hi, nodes)` triples.
    pub fn from_bounds(axes: &[(f64, f64, usize)]) -> Result<Self> {
        Self::new(
            axes.iter()
                .map(|&(lo, hi, n)| AxisSpec::new(lo, hi, n))
                .collect::<Result<_>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    /// Coordinates of a flat node index (row-major over the axes).
    pub fn node_coords(&self, mut idx: usize) -> Vec<f64> {
        let mut coords = vec![0.0; self.dim()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            let i = idx % axis.nodes;
            idx /= axis.nodes;
            coords[d] = axis.lo + i as f64 * axis.step();
        }
        coords
    }

    fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &i) in self.axes.iter().zip(multi) {
            idx = idx * axis.nodes + i;
        }
        idx
    }

    /// Multilinear interpolation weights over the 2^d corners of the cell
    /// containing `x`. Out-of-range coordinates clamp to the boundary first;
    /// zero-weight corners are dropped, so a point exactly on a node yields a
    /// point mass.
    pub fn locate(&self, x: &[f64]) -> Result<CellWeights> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "locate point vs grid".into(),
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut base = vec![0usize; self.dim()];
        let mut frac = vec![0.0f64; self.dim()];
        for (d, axis) in self.axes.iter().enumerate() {
            let mut xi = x[d];
            if xi < axis.lo || xi > axis.hi {
                log::trace!(
                    "clamping coordinate {xi} on axis {d} to [{}, {}]",
                    axis.lo,
                    axis.hi
                );
                xi = xi.clamp(axis.lo, axis.hi);
            }
            let t = (xi - axis.lo) / axis.step();
            let cell = (t.floor() as usize).min(axis.nodes - 2);
            base[d] = cell;
            frac[d] = (t - cell as f64).clamp(0.0, 1.0);
        }
        let mut entries = Vec::with_capacity(1 << self.dim());
        let mut multi = vec![0usize; self.dim()];
        for corner in 0..(1usize << self.dim()) {
            let mut w = 1.0;
            for d in 0..self.dim() {
                let hi_side = corner >> d & 1 == 1;
                w *= if hi_side { frac[d] } else { 1.0 - frac[d] };
                multi[d] = base[d] + usize::from(hi_side);
            }
            if w > 0.0 {
                entries.push((self.flat_index(&multi), w));
            }
        }
        CellWeights::new(entries, self.dim())
    }

    /// Flat index of the grid node nearest to `x` (after clamping).
    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        let weights = self.locate(x)?;
        Ok(weights
            .entries()
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("cell weights are non-empty")
            .0)
    }

    /// Multilinear interpolant of a node-value table.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Result<f64> {
        if values.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                context: "interpolate table vs grid".into(),
                expected: self.node_count(),
                found: values.len(),
            });
        }
        Ok(self
            .locate(x)?
            .entries()
            .iter()
            .map(|&(i, w)| w * values[i])
            .sum())
    }
}

/// Barycentric-style weights over grid nodes: non-negative, summing to one,
/// at most 2^d entries for a d-dimensional grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights {
    entries: Vec<(usize, f64)>,
}

impl CellWeights {
    fn new(entries: Vec<(usize, f64)>, dim: usize) -> Result<Self> {
        if entries.len() > (1 << dim) {
            return Err(Error::InvalidArgument(format!(
                "cell weights carry {} entries, more than 2^{dim}",
                entries.len()
            )));
        }
        let sum: f64 = entries.iter().map(|&(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-12 || entries.iter().any(|&(_, w)| w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "cell weights sum to {sum}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dist(&self) -> FiniteDist<usize> {
        FiniteDist::new(self.entries.iter().copied())
            .expect("cell weights form a valid distribution")
    }
}

/// Multilinear interpolation weights for `x` over the state grid of `g`.
pub fn locate(g: &GridSpec, x: &[f64]) -> Result<CellWeights> {
    g.state.locate(x)
}

/// State grid plus action grid, with a node budget guarding against
/// accidentally huge products.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub state: Grid,
    pub action: Grid,
    pub budget: usize,
}

impl GridSpec {
    pub fn new(state: Grid, action: Grid) -> Result<Self> {
        Self::with_budget(state, action, DEFAULT_NODE_BUDGET)
    }

    pub fn with_budget(state: Grid, action: Grid, budget: usize) -> Result<Self> {
        let spec = Self {
            state,
            action,
            budget,
        };
        spec.check_budget()?;
        Ok(spec)
    }

    fn check_budget(&self) -> Result<()> {
        let nodes = self
            .state
            .node_count()
            .checked_mul(self.action.node_count())
            .unwrap_or(usize::MAX);
        if nodes > self.budget {
            let dims: Vec<String> = self
                .state
                .axes()
                .iter()
                .map(|a| format!("state:{}", a.nodes))
                .chain(self.action.axes().iter().map(|a| format!("action:{}", a.nodes)))
                .collect();
            return Err(Error::BudgetExceeded {
                nodes,
                budget: self.budget,
                dims: dims.join("×"),
            });
        }
        Ok(())
    }
}

type DetDynFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Continuous transition dynamics `(x, a) ↦ x′`: a deterministic map or an
/// affine-Gaussian kernel on the stacked input `[x; a]`.
#[derive(Clone)]
pub enum Dynamics {
    Det(DetDynFn),
    Gauss(GaussKernel),
}

impl Dynamics {
    pub fn det(f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Dynamics::Det(Arc::new(f))
    }
}

/// Discretize continuous dynamics onto the grid: states and actions become
/// grid nodes, each transition row is the located image of the node pair, and
/// the reward is copied pointwise at the nodes.
///
/// Gaussian dynamics fold the noise in by sigma-point evaluation: the mean
/// and the 2d symmetric offsets at one standard deviation, each located on
/// the grid and mixed with weights 1/(2d+1). This is exact for the mean of
/// affine dynamics and is the documented approximation knob for the spread.
pub fn discretize_mdp(
    dynamics: &Dynamics,
    reward: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    g: &GridSpec,
    discount: f64,
) -> Result<Mdp<usize, usize>> {
    g.check_budget()?;
    let n = g.state.node_count();
    let na = g.action.node_count();
    let d = g.state.dim();

    let mut rows: Vec<FiniteDist<usize>> = Vec::with_capacity(n * na);
    let mut rewards: Vec<f64> = Vec::with_capacity(n * na);
    for i in 0..n {
        let x = g.state.node_coords(i);
        for j in 0..na {
            let a = g.action.node_coords(j);
            let row = match dynamics {
                Dynamics::Det(f) => {
                    let x2 = f(&x, &a);
                    if x2.len() != d {
                        return Err(Error::DimensionMismatch {
                            context: "dynamics output vs state grid".into(),
                            expected: d,
                            found: x2.len(),
                        });
                    }
                    g.state.locate(&x2)?.to_dist()
                }
                Dynamics::Gauss(k) => {
                    let input = DVector::from_iterator(d + g.action.dim(), x.iter().chain(a.iter()).copied());
                    let mean = k.mean_at(&input)?;
                    if mean.len() != d {
                        return Err(Error::DimensionMismatch {
                            context: "Gaussian dynamics output vs state grid".into(),
                            expected: d,
                            found: mean.len(),
                        });
                    }
                    let sqrt = psd_sqrt(k.noise_cov());
                    let w = 1.0 / (2 * d + 1) as f64;
                    let mut pairs: Vec<(usize, f64)> = Vec::new();
                    let mut push_point = |pt: &DVector<f64>| -> Result<()> {
                        for &(node, wt) in g.state.locate(pt.as_slice())?.entries() {
                            pairs.push((node, wt * w));
                        }
                        Ok(())
                    };
                    push_point(&mean)?;
                    for k_dim in 0..d {
                        let offset = sqrt.column(k_dim).into_owned();
                        push_point(&(&mean + &offset))?;
                        push_point(&(&mean - &offset))?;
                    }
                    FiniteDist::new(pairs)?
                }
            };
            rows.push(row);
            rewards.push(reward(&x, &a));
        }
    }

    let rows = Arc::new(rows);
    let rewards = Arc::new(rewards);
    let na_t = na;
    let transition = Kernel::stoch(move |&(i, j): &(usize, usize)| rows[i * na_t + j].clone());
    let na_r = na;
    let reward_table = move |&i: &usize, &j: &usize| rewards[i * na_r + j];
    Mdp::new(
        Space::enumerated((0..n).collect())?,
        Space::enumerated((0..na).collect())?,
        transition,
        reward_table,
        discount,
    )
}
