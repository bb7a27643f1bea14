use nalgebra::Vector4;
use opticdp_core::discretize::{Grid, GridSpec};
use opticdp_core::envs::{pendulum_matrices, pendulum_mdp, PendulumSpec};
use opticdp_core::*;

fn run(tag: &str, grid: &GridSpec, beta: f64, lookahead: bool) {
    let spec = PendulumSpec::default();
    let m = pendulum_mdp(&spec, grid, beta).unwrap();
    let cfg = SolverConfig { tol: 1e-6, threads: 2, ..SolverConfig::default() };
    let v0 = ValueFn::constant(m.state_index().unwrap().clone(), 0.0);
    let t0 = std::time::Instant::now();
    let (policy, v, trace) = value_iteration(&m, &v0, &cfg).unwrap();
    let solve_t = t0.elapsed();
    let actions = policy.to_action_indices(m.state_index().unwrap(), m.action_index().unwrap()).unwrap();
    let j = |x: &[f64]| -> f64 { -grid.state.interpolate(v.values(), x).unwrap() };
    let (a_mat, b_vec) = pendulum_matrices(&spec).unwrap();
    let w = spec.state_cost; let wa = spec.action_cost;
    let cost = |x: &Vector4<f64>, u: f64| -> f64 {
        x.iter().zip(w.iter()).map(|(xi, wi)| wi*xi*xi).sum::<f64>() + wa*u*u
    };
    let mut x = Vector4::new(0.0, 0.0, 0.05, 0.0);
    let mut jh = j(x.as_slice());
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_step = 0;
    let mut n_up = 0;
    let mut min_j = jh; let mut max_theta: f64 = 0.0; let mut max_y: f64 = 0.0; let mut max_yd: f64 = 0.0; let mut max_td: f64 = 0.0;
    for step in 0..100 {
        let force = if lookahead {
            let mut best = f64::NEG_INFINITY; let mut best_u = 0.0;
            for aj in 0..grid.action.node_count() {
                let u = grid.action.node_coords(aj)[0];
                let xn = x + spec.dt * (a_mat * x + b_vec * u);
                let val = -cost(&x, u) + beta * grid.state.interpolate(v.values(), xn.as_slice()).unwrap();
                if val > best { best = val; best_u = u; }
            }
            best_u
        } else {
            let node = grid.state.nearest_node(x.as_slice()).unwrap();
            grid.action.node_coords(actions[node])[0]
        };
        x += spec.dt * (a_mat * x + b_vec * force);
        let jn = j(x.as_slice());
        let ratio = (jn - jh) / jh.abs().max(1e-300);
        if ratio > worst_ratio { worst_ratio = ratio; worst_step = step; }
        if jn > jh + 0.05 * jh.abs() { n_up += 1; }
        jh = jn;
        min_j = min_j.min(jh);
        max_theta = max_theta.max(x[2].abs()); max_y = max_y.max(x[0].abs());
        max_yd = max_yd.max(x[1].abs()); max_td = max_td.max(x[3].abs());
    }
    println!("{tag}: solve {:?} iters {} | worst +{:.2}% @step {} | viol {} | J0->J100 {:.4}->{:.5} minJ {:.5} | max |y| {:.3} |yd| {:.3} |th| {:.4} |td| {:.3}",
        solve_t, trace.iterations(), worst_ratio*100.0, worst_step, n_up, j(&[0.0,0.0,0.05,0.0]), jh, min_j, max_y, max_yd, max_theta, max_td);
}

fn main() {
    let g0 = GridSpec::new(
        Grid::from_bounds(&[(-0.5,0.5,11),(-1.0,1.0,11),(-0.15,0.15,21),(-1.0,1.0,11)]).unwrap(),
        Grid::from_bounds(&[(-5.0,5.0,11)]).unwrap()).unwrap();
    run("g0 nearest", &g0, 0.9, false);
    run("g0 lookahead", &g0, 0.9, true);
    let g1 = GridSpec::new(
        Grid::from_bounds(&[(-0.3,0.3,11),(-0.8,0.8,11),(-0.12,0.12,21),(-0.8,0.8,11)]).unwrap(),
        Grid::from_bounds(&[(-3.0,3.0,11)]).unwrap()).unwrap();
    run("g1 nearest", &g1, 0.9, false);
    run("g1 lookahead", &g1, 0.9, true);
}
