//! Built-in environments: gridworld, linearized inverted pendulum on a cart,
//! and the consumption/savings problem.
//!
//! Conventions fixed here and used by every consumer:
//! - Gridworld cells are `(col, row)` with `(0, 0)` the top-left corner; the
//!   state enumeration is row-major.
//! - The gridworld action enumeration is Up, Left, Right, Down. Argmax ties
//!   break toward the lowest index, so all-zero ties resolve to Up.
//! - The reward cell is absorbing and terminal: acting there collects its
//!   reward once and cuts the discounted continuation.
//! - The pendulum is a cost-minimization problem; it is mapped to reward by
//!   negation at the solver boundary so all solvers uniformly maximize.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::discretize::{discretize_mdp, Dynamics, Grid, GridSpec};
use crate::error::{Error, Result};
use crate::kernels::{FiniteDist, GaussKernel, Kernel};
use crate::mdp::{Mdp, Space};

/// Gridworld cell, `(col, row)`, `(0, 0)` top-left.
pub type GridPos = (u32, u32);

/// The four cardinal moves. Enumeration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GridAction {
    Up,
    Left,
    Right,
    Down,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Up,
        GridAction::Left,
        GridAction::Right,
        GridAction::Down,
    ];

    pub fn label(self) -> &'static str {
        match self {
            GridAction::Up => "up",
            GridAction::Left => "left",
            GridAction::Right => "right",
            GridAction::Down => "down",
        }
    }
}

/// Rectangular gridworld with a single rewarded (and terminal) cell and an
/// optional rightward wind.
#[derive(Debug, Clone)]
pub struct GridworldSpec {
    pub width: u32,
    pub height: u32,
    pub reward_cell: GridPos,
    /// Probability that the successor is shifted one cell right (after the
    /// chosen move, clamping at the right edge).
    pub wind_epsilon: f64,
    pub discount: f64,
}

impl Default for GridworldSpec {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            reward_cell: (0, 0),
            wind_epsilon: 0.0,
            discount: 0.9,
        }
    }
}

fn grid_move(spec_w: u32, spec_h: u32, x: GridPos, a: GridAction) -> GridPos {
    let (col, row) = x;
    match a {
        GridAction::Up => (col, row.saturating_sub(1)),
        GridAction::Down => (col, (row + 1).min(spec_h - 1)),
        GridAction::Left => (col.saturating_sub(1), row),
        GridAction::Right => ((col + 1).min(spec_w - 1), row),
    }
}

/// Build the gridworld MDP. Moves clamp at the boundary; the reward is 1
/// exactly at the reward cell; wind shifts the successor right with
/// probability ε.
pub fn gridworld(spec: &GridworldSpec) -> Result<Mdp<GridPos, GridAction>> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidArgument("grid dimensions must be positive".into()));
    }
    if spec.reward_cell.0 >= spec.width || spec.reward_cell.1 >= spec.height {
        return Err(Error::InvalidArgument(format!(
            "reward cell {:?} outside a {}x{} grid",
            spec.reward_cell, spec.width, spec.height
        )));
    }
    if !(0.0..=1.0).contains(&spec.wind_epsilon) {
        return Err(Error::InvalidArgument(format!(
            "wind epsilon must lie in [0, 1], got {}",
            spec.wind_epsilon
        )));
    }
    let mut states = Vec::with_capacity((spec.width * spec.height) as usize);
    for row in 0..spec.height {
        for col in 0..spec.width {
            states.push((col, row));
        }
    }
    let (w, h, eps) = (spec.width, spec.height, spec.wind_epsilon);
    let transition = if eps == 0.0 {
        Kernel::det(move |&(x, a): &(GridPos, GridAction)| grid_move(w, h, x, a))
    } else {
        Kernel::stoch(move |&(x, a): &(GridPos, GridAction)| {
            let moved = grid_move(w, h, x, a);
            let blown = ((moved.0 + 1).min(w - 1), moved.1);
            FiniteDist::new([(moved, 1.0 - eps), (blown, eps)])
                .expect("wind mixture is a valid distribution")
        })
    };
    let reward_cell = spec.reward_cell;
    let terminal_cell = spec.reward_cell;
    Mdp::new(
        Space::enumerated(states)?,
        Space::enumerated(GridAction::ALL.to_vec())?,
        transition,
        move |x: &GridPos, _: &GridAction| if *x == reward_cell { 1.0 } else { 0.0 },
        spec.discount,
    )
    .map(|m| m.with_terminal(move |x: &GridPos| *x == terminal_cell))
}

/// Inverted pendulum on a cart, linearized around the upright equilibrium.
#[derive(Debug, Clone)]
pub struct PendulumSpec {
    /// Cart mass [kg].
    pub m_cart: f64,
    /// Pendulum mass [kg].
    pub m_pend: f64,
    /// Pendulum length [m].
    pub length: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
    /// Euler step [s].
    pub dt: f64,
    /// Quadratic state cost weights for (y, ẏ, θ, θ̇).
    pub state_cost: [f64; 4],
    /// Quadratic action cost weight.
    pub action_cost: f64,
}

impl Default for PendulumSpec {
    fn default() -> Self {
        Self {
            m_cart: 1.0,
            m_pend: 0.1,
            length: 0.5,
            gravity: 9.8,
            dt: 0.02,
            state_cost: [1.0, 0.1, 10.0, 0.1],
            action_cost: 0.001,
        }
    }
}

impl PendulumSpec {
    fn validate(&self) -> Result<()> {
        if self.m_cart <= 0.0 || self.m_pend <= 0.0 || self.length <= 0.0 || self.dt <= 0.0 {
            return Err(Error::InvalidArgument(
                "pendulum masses, length and dt must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The linearization matrices: `ẋ = A·x + B·a` with state `(y, ẏ, θ, θ̇)`.
pub fn pendulum_matrices(spec: &PendulumSpec) -> Result<(Matrix4<f64>, Vector4<f64>)> {
    spec.validate()?;
    let (mm, m, l, g) = (spec.m_cart, spec.m_pend, spec.length, spec.gravity);
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0, 0.0,                    0.0,
        0.0, 0.0, -(m * g) / mm,          0.0,
        0.0, 0.0, 0.0,                    1.0,
        0.0, 0.0, (mm + m) * g / (mm * l), 0.0,
    );
    let b = Vector4::new(0.0, 1.0 / mm, 0.0, -1.0 / (mm * l));
    Ok((a, b))
}

/// Per-step stage cost closure for a pendulum spec.
pub type StageCost = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Euler-discretized linearized dynamics `x ↦ x + Δt(A·x + B·a)` and the
/// quadratic stage cost `xᵀdiag(w)x + w_a·a²`.
pub fn pendulum_dynamics(spec: &PendulumSpec) -> Result<(Dynamics, StageCost)> {
    let (a_mat, b_vec) = pendulum_matrices(spec)?;
    let dt = spec.dt;
    let dynamics = Dynamics::det(move |x: &[f64], a: &[f64]| {
        let xs = Vector4::from_column_slice(x);
        let next = xs + dt * (a_mat * xs + b_vec * a[0]);
        next.iter().copied().collect()
    });
    let w = spec.state_cost;
    let wa = spec.action_cost;
    let cost: StageCost = Arc::new(move |x: &[f64], a: &[f64]| {
        let state: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi * xi).sum();
        state + wa * a[0] * a[0]
    });
    Ok((dynamics, cost))
}

/// Discretize the pendulum onto a grid and wrap it as a reward-maximizing
/// MDP (stage costs negated).
pub fn pendulum_mdp(spec: &PendulumSpec, grid: &GridSpec, discount: f64) -> Result<Mdp<usize, usize>> {
    let (dynamics, cost) = pendulum_dynamics(spec)?;
    discretize_mdp(&dynamics, move |x, a| -cost(x, a), grid, discount)
}

/// Consumption/savings problem with normally distributed income.
#[derive(Debug, Clone)]
pub struct SavingsSpec {
    /// Interest rate γ ≥ 0 on the bank balance.
    pub interest: f64,
    /// Mean income μ per step.
    pub income_mean: f64,
    /// Income standard deviation σ ≥ 0.
    pub income_std: f64,
    pub discount: f64,
}

impl Default for SavingsSpec {
    fn default() -> Self {
        Self {
            interest: 0.03,
            income_mean: 1.0,
            income_std: 0.2,
            discount: 0.95,
        }
    }
}

impl SavingsSpec {
    fn validate(&self) -> Result<()> {
        if self.interest < 0.0 || self.income_std < 0.0 {
            return Err(Error::InvalidArgument(
                "interest and income std must be non-negative".into(),
            ));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in (0, 1), got {}",
                self.discount
            )));
        }
        Ok(())
    }
}

/// The two faces of the savings problem.
///
/// `transition_gauss`/`utility_affine` form the unclamped Gaussian-family
/// model (the balance floor and consumption cap are dropped, exactly because
/// max/min are nonlinear and leave the Gaussian family). `dynamics`/`reward`
/// are the clamped nonlinear form meant for the discretizer, whose grid
/// bounds realize the `max{·, 0}` floor.
pub struct SavingsForms {
    /// `(x, a) ↦ (1+γ)x − a + N(μ, σ²)` on the stacked input `[x; a]`.
    pub transition_gauss: GaussKernel,
    /// `U(x, a) = a` as an affine map into ℝ.
    pub utility_affine: GaussKernel,
    /// The same affine-Gaussian dynamics, routed through grid clamping.
    pub dynamics: Dynamics,
    /// Expected utility `E[min(a, x + i)]` under the income distribution.
    pub reward: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

/// Build both forms of the savings model.
pub fn savings_dynamics(spec: &SavingsSpec) -> Result<SavingsForms> {
    spec.validate()?;
    let (gamma, mu, sigma) = (spec.interest, spec.income_mean, spec.income_std);
    let transition_gauss = GaussKernel::new(
        DMatrix::from_row_slice(1, 2, &[1.0 + gamma, -1.0]),
        DVector::from_vec(vec![mu]),
        DMatrix::from_vec(1, 1, vec![sigma * sigma]),
    )?;
    let utility_affine = GaussKernel::affine(
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        DVector::zeros(1),
    )?;
    let dynamics = Dynamics::Gauss(transition_gauss.clone());
    let reward: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync> =
        Arc::new(move |x: &[f64], a: &[f64]| expected_min_income(a[0], x[0], mu, sigma));
    Ok(SavingsForms {
        transition_gauss,
        utility_affine,
        dynamics,
        reward,
    })
}

/// `E[min(a, x + i)]` for `i ~ N(μ, σ)`: the agent consumes `a` but is capped
/// by the available balance-plus-income.
///
/// Uses `min(a, x+i) = a − (c − i)⁺` with `c = a − x` and the closed form
/// `E(c − i)⁺ = (c − μ)Φ((c − μ)/σ) + σφ((c − μ)/σ)`.
pub fn expected_min_income(a: f64, x: f64, mu: f64, sigma: f64) -> f64 {
    let c = a - x;
    if sigma == 0.0 {
        return a - (c - mu).max(0.0);
    }
    let z = (c - mu) / sigma;
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = 0.5 * (1.0 + statrs::function::erf::erf(z / std::f64::consts::SQRT_2));
    a - ((c - mu) * cdf + sigma * phi)
}

/// Discretize the clamped savings model onto a grid.
pub fn savings_mdp(spec: &SavingsSpec, grid: &GridSpec) -> Result<Mdp<usize, usize>> {
    let forms = savings_dynamics(spec)?;
    let reward = forms.reward.clone();
    discretize_mdp(&forms.dynamics, move |x, a| reward(x, a), grid, spec.discount)
}

/// Discount used by the `pendulum-default` preset.
pub const PENDULUM_DEFAULT_DISCOUNT: f64 = 0.9;

/// Grid for the `pendulum-default` preset: 11×11×21×11 state nodes over a
/// box around the upright equilibrium, 11 force levels.
pub fn pendulum_default_grid() -> GridSpec {
    GridSpec::new(
        Grid::from_bounds(&[
            (-0.5, 0.5, 11),
            (-1.0, 1.0, 11),
            (-0.15, 0.15, 21),
            (-1.0, 1.0, 11),
        ])
        .expect("preset grid is valid"),
        Grid::from_bounds(&[(-5.0, 5.0, 11)]).expect("preset grid is valid"),
    )
    .expect("preset grid is within budget")
}

/// Grid for the `savings-default` preset: balances in [0, 50] over 201
/// nodes, consumption in [0, 10] over 51 nodes. The bounded grid caps
/// consumption, which keeps the optimization bounded.
pub fn savings_default_grid() -> GridSpec {
    GridSpec::new(
        Grid::from_bounds(&[(0.0, 50.0, 201)]).expect("preset grid is valid"),
        Grid::from_bounds(&[(0.0, 10.0, 51)]).expect("preset grid is valid"),
    )
    .expect("preset grid is within budget")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn corner_clamps_and_rewards() {
        let m = gridworld(&GridworldSpec::default()).unwrap();
        let next = m.transition().apply(&((0, 0), GridAction::Up)).unwrap();
        assert_eq!(next.support(), &[((0, 0), 1.0)]);
        assert_eq!(m.reward(&(0, 0), &GridAction::Up), 1.0);
    }

    #[test]
    fn interior_move_is_plain() {
        let m = gridworld(&GridworldSpec::default()).unwrap();
        let next = m.transition().apply(&((2, 2), GridAction::Left)).unwrap();
        assert_eq!(next.support(), &[((1, 2), 1.0)]);
        assert_eq!(m.reward(&(2, 2), &GridAction::Left), 0.0);
    }

    #[test]
    fn wind_mixes_move_with_right_shift() {
        let spec = GridworldSpec {
            wind_epsilon: 0.1,
            ..GridworldSpec::default()
        };
        let m = gridworld(&spec).unwrap();
        let next = m.transition().apply(&((1, 1), GridAction::Up)).unwrap();
        assert_abs_diff_eq!(next.weight(&(1, 0)), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(next.weight(&(2, 0)), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn wind_clamps_at_right_edge() {
        let spec = GridworldSpec {
            wind_epsilon: 0.25,
            ..GridworldSpec::default()
        };
        let m = gridworld(&spec).unwrap();
        // Moving right from the right edge: move clamps and wind clamps, so
        // the two outcomes merge into a point mass.
        let next = m.transition().apply(&((3, 1), GridAction::Right)).unwrap();
        assert_eq!(next.support(), &[((3, 1), 1.0)]);
    }

    #[test]
    fn gridworld_rows_are_distributions_and_det_rows_are_point_masses() {
        let m = gridworld(&GridworldSpec::default()).unwrap();
        for x in m.state_index().unwrap().items() {
            for a in GridAction::ALL {
                let d = m.transition().apply(&(*x, a)).unwrap();
                assert_eq!(d.len(), 1);
            }
        }
        let windy = gridworld(&GridworldSpec {
            wind_epsilon: 0.3,
            ..GridworldSpec::default()
        })
        .unwrap();
        for x in windy.state_index().unwrap().items() {
            for a in GridAction::ALL {
                let d = windy.transition().apply(&(*x, a)).unwrap();
                let sum: f64 = d.support().iter().map(|&(_, w)| w).sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pendulum_matrix_entries_from_printed_formulas() {
        let spec = PendulumSpec::default();
        let (a, b) = pendulum_matrices(&spec).unwrap();
        // −mg/M with M=1, m=0.1, g=9.8.
        assert_abs_diff_eq!(a[(1, 2)], -0.98, epsilon = 1e-12);
        // (M+m)g/(ML) with L=0.5.
        assert_abs_diff_eq!(a[(3, 2)], 21.56, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[3], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn pendulum_equilibrium_is_fixpoint_with_zero_cost() {
        let (dyn_, cost) = pendulum_dynamics(&PendulumSpec::default()).unwrap();
        let x0 = [0.0; 4];
        let a0 = [0.0];
        match &dyn_ {
            Dynamics::Det(f) => assert_eq!(f(&x0, &a0), vec![0.0; 4]),
            _ => panic!("pendulum dynamics are deterministic"),
        }
        assert_eq!(cost(&x0, &a0), 0.0);
    }

    #[test]
    fn savings_steady_state_at_zero_interest() {
        let spec = SavingsSpec {
            interest: 0.0,
            income_mean: 2.0,
            income_std: 0.0,
            ..SavingsSpec::default()
        };
        let forms = savings_dynamics(&spec).unwrap();
        // x = 10, a = μ: the balance is unchanged.
        let mean = forms
            .transition_gauss
            .mean_at(&DVector::from_vec(vec![10.0, 2.0]))
            .unwrap();
        assert_abs_diff_eq!(mean[0], 10.0, epsilon = 1e-15);
    }

    #[test]
    fn savings_gauss_form_pushes_income_noise() {
        let spec = SavingsSpec::default();
        let forms = savings_dynamics(&spec).unwrap();
        // State N((x,a), 0) maps to N((1+γ)x − a + μ, σ²).
        let s = crate::kernels::GaussState::new(
            DVector::from_vec(vec![10.0, 3.0]),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let out = crate::kernels::gauss_push(&s, &forms.transition_gauss).unwrap();
        assert_abs_diff_eq!(out.mean()[0], 1.03 * 10.0 - 3.0 + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cov()[(0, 0)], 0.04, epsilon = 1e-12);
    }

    #[test]
    fn clamped_utility_at_empty_balance() {
        // x=0, a=5, deterministic income 2: utility min{5, 2} = 2.
        assert_abs_diff_eq!(expected_min_income(5.0, 0.0, 2.0, 0.0), 2.0, epsilon = 1e-15);
        // And with ample balance the cap is inactive.
        assert_abs_diff_eq!(expected_min_income(1.0, 10.0, 2.0, 0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expected_min_income_matches_quadrature_with_noise() {
        // Brute-force oracle: trapezoid integration over ±8σ.
        let (a, x, mu, sigma): (f64, f64, f64, f64) = (2.0, 0.5, 1.0, 0.4);
        let n = 20000;
        let lo = mu - 8.0 * sigma;
        let hi = mu + 8.0 * sigma;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let i = lo + k as f64 * h;
            let pdf = (-0.5 * ((i - mu) / sigma).powi(2)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let val = a.min(x + i) * pdf;
            acc += if k == 0 || k == n { 0.5 * val } else { val };
        }
        let oracle = acc * h;
        assert_abs_diff_eq!(
            expected_min_income(a, x, mu, sigma),
            oracle,
            epsilon = 1e-8
        );
    }
}
