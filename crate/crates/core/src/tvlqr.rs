//! Time-varying LQR tracking of a nominal trajectory.
//!
//! Feedback law: `u_t = ubar_t + K_t (xbar_t - x_t)`, inputs clamped to the
//! plant's bounds.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};

use crate::error::{invalid, Error, Result};
use crate::models::{DiscreteModel, Linearization, TrueModel};
use crate::trajopt::{diag, Trajectory};

/// Row-major tracking weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingWeights {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub qf: Vec<f64>,
}

impl TrackingWeights {
    pub fn scaled_identity(n_x: usize, n_u: usize, q: f64, r: f64, qf: f64) -> Self {
        TrackingWeights { q: diag(&vec![q; n_x]), r: diag(&vec![r; n_u]), qf: diag(&vec![qf; n_x]) }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |m: &[f64]| m.iter().map(|v| alpha * v).collect();
        TrackingWeights { q: s(&self.q), r: s(&self.r), qf: s(&self.qf) }
    }
}

/// Gains `K_1..K_{T-1}` (`n_u x n_x`) and cost-to-go `P_1..P_T`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSchedule {
    pub gains: Vec<Vec<f64>>,
    pub cost_to_go: Vec<Vec<f64>>,
    pub weights: TrackingWeights,
    pub n_x: usize,
    pub n_u: usize,
}

impl GainSchedule {
    pub fn zeros(horizon: usize, n_x: usize, n_u: usize) -> Self {
        GainSchedule {
            gains: vec![vec![0.0; n_u * n_x]; horizon - 1],
            cost_to_go: vec![vec![0.0; n_x * n_x]; horizon],
            weights: TrackingWeights::scaled_identity(n_x, n_u, 0.0, 0.0, 0.0),
            n_x,
            n_u,
        }
    }
}

fn mat(data: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Backward Riccati recursion on precomputed linearizations.
pub fn riccati(lin: &[Linearization], n_x: usize, n_u: usize, weights: &TrackingWeights) -> Result<GainSchedule> {
    if weights.q.len() != n_x * n_x || weights.qf.len() != n_x * n_x || weights.r.len() != n_u * n_u {
        return Err(invalid("tracking weights have the wrong shape"));
    }
    let q = mat(&weights.q, n_x, n_x);
    let r = mat(&weights.r, n_u, n_u);
    let mut p = mat(&weights.qf, n_x, n_x);
    let k_len = lin.len();
    let mut gains = vec![Vec::new(); k_len];
    let mut cost_to_go = vec![Vec::new(); k_len + 1];
    cost_to_go[k_len] = row_major(&p);
    for t in (0..k_len).rev() {
        let a = mat(&lin[t].a, n_x, n_x);
        let b = mat(&lin[t].b, n_x, n_u);
        let btp = b.transpose() * &p;
        let s = &r + &btp * &b;
        let chol = Cholesky::new(s).ok_or(Error::Riccati { step: t })?;
        let k = chol.solve(&(&btp * &a));
        let next = &q + a.transpose() * &p * (&a - &b * &k);
        p = (&next + next.transpose()) * 0.5;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Riccati { step: t });
        }
        gains[t] = row_major(&k);
        cost_to_go[t] = row_major(&p);
    }
    Ok(GainSchedule { gains, cost_to_go, weights: weights.clone(), n_x, n_u })
}

pub fn linearize_along(model: &dyn DiscreteModel, traj: &Trajectory) -> Result<Vec<Linearization>> {
    traj.validate(model.n_x(), model.n_u())?;
    let k = traj.inputs.len();
    model.linearize_batch(&traj.states[..k], &traj.inputs)
}

/// Linearizes `model` along `traj` and runs the Riccati recursion from
/// `P_T = Q_F`.
pub fn synthesize_gains(model: &dyn DiscreteModel, traj: &Trajectory, weights: &TrackingWeights) -> Result<GainSchedule> {
    let lin = linearize_along(model, traj)?;
    riccati(&lin, model.n_x(), model.n_u(), weights)
}

/// Wrap to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use core::f64::consts::PI;
    let mut w = a - 2.0 * PI * libm::floor((a + PI) / (2.0 * PI));
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Minimum over the trajectory of the squared distance to `xg`. With
/// `angle_mask`, masked configuration coordinates are differenced modulo 2pi.
pub fn swingup_cost(states: &[Vec<f64>], xg: &[f64], angle_mask: Option<&[bool]>) -> f64 {
    states
        .iter()
        .map(|x| {
            x.iter()
                .zip(xg)
                .enumerate()
                .map(|(i, (a, b))| {
                    let wrap = angle_mask.is_some_and(|m| i < m.len() && m[i]);
                    let d = if wrap { wrap_angle(a - b) } else { a - b };
                    d * d
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Closed-loop rollout on `plant` from `x0`. The returned trajectory holds
/// the executed states and clamped inputs; its cost is the swing-up cost to
/// the plant's goal.
pub fn track(plant: &TrueModel, x0: &[f64], traj: &Trajectory, gains: &GainSchedule, wrap: bool) -> Result<Trajectory> {
    let (nx, nu) = (plant.n_x(), plant.n_u());
    traj.validate(nx, nu)?;
    if gains.gains.len() != traj.inputs.len() || gains.n_x != nx || gains.n_u != nu {
        return Err(invalid(format!(
            "gain schedule has {} steps for a trajectory with {} inputs",
            gains.gains.len(),
            traj.inputs.len()
        )));
    }
    if x0.len() != nx {
        return Err(invalid("initial state has the wrong dimension"));
    }
    let u_max = &plant.spec.u_max;
    let mut states = vec![x0.to_vec()];
    let mut inputs = Vec::with_capacity(traj.inputs.len());
    for t in 0..traj.inputs.len() {
        let x = &states[t];
        let k = &gains.gains[t];
        let u: Vec<f64> = (0..nu)
            .map(|i| {
                let fb: f64 = (0..nx).map(|j| k[i * nx + j] * (traj.states[t][j] - x[j])).sum();
                (traj.inputs[t][i] + fb).clamp(-u_max[i], u_max[i])
            })
            .collect();
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrackingDiverged { step: t });
        }
        let next = plant.step(x, &u).map_err(|_| Error::TrackingDiverged { step: t })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrackingDiverged { step: t });
        }
        inputs.push(u);
        states.push(next);
    }
    let mask = plant.spec.angle_mask();
    let cost = swingup_cost(&states, &plant.spec.goal, wrap.then_some(&mask[..]));
    Ok(Trajectory { states, inputs, dt: plant.dt(), cost, defect: 0.0, iterations: 0 })
}

/// Scalar multiples of the identity for each tracking weight, visited with
/// `q` outermost and `qf` innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingGrid {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub qf: Vec<f64>,
}

impl Default for TrackingGrid {
    fn default() -> Self {
        TrackingGrid { q: vec![0.1, 1.0, 10.0], r: vec![0.01, 0.1, 1.0], qf: vec![10.0, 100.0] }
    }
}

impl TrackingGrid {
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.q.len() * self.r.len() * self.qf.len());
        for &q in &self.q {
            for &r in &self.r {
                for &qf in &self.qf {
                    out.push((q, r, qf));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub gains: GainSchedule,
    pub executed: Trajectory,
    pub cost: f64,
    pub index: usize,
    /// Swing-up cost per grid point in `points()` order; `None` if that
    /// point failed.
    pub costs: Vec<Option<f64>>,
}

/// Tries every grid point and keeps the lowest swing-up cost. Ties go to the
/// earliest point.
pub fn grid_search(
    plant: &TrueModel,
    model: &dyn DiscreteModel,
    traj: &Trajectory,
    grid: &TrackingGrid,
    wrap: bool,
) -> Result<GridResult> {
    let points = grid.points();
    if points.is_empty() {
        return Err(invalid("tracking grid is empty"));
    }
    let (nx, nu) = (model.n_x(), model.n_u());
    let lin = linearize_along(model, traj)?;
    let mut best: Option<GridResult> = None;
    let mut costs = Vec::with_capacity(points.len());
    let mut failures: Vec<String> = Vec::new();
    for (index, &(q, r, qf)) in points.iter().enumerate() {
        let weights = TrackingWeights::scaled_identity(nx, nu, q, r, qf);
        let outcome = riccati(&lin, nx, nu, &weights).and_then(|g| Ok((track(plant, &traj.states[0], traj, &g, wrap)?, g)));
        match outcome {
            Ok((executed, gains)) => {
                costs.push(Some(executed.cost));
                if best.as_ref().map_or(true, |b| executed.cost < b.cost) {
                    best = Some(GridResult { cost: executed.cost, gains, executed, index, costs: Vec::new() });
                }
            }
            Err(e) => {
                costs.push(None);
                failures.push(format!("Q={q} R={r} Q_F={qf}: {e}"));
            }
        }
    }
    match best {
        Some(mut b) => {
            b.costs = costs;
            Ok(b)
        }
        None => Err(Error::AllDiverged(failures)),
    }
}
