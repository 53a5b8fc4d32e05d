//! Direct transcription trajectory optimization with an augmented
//! Lagrangian on the one-step dynamics defects.
//!
//! Decision variables are ordered per knot as `[u_t, x_{t+1}]` for
//! `t = 1..T-1` (`x_1` is fixed), so the Gauss-Newton Hessian is banded and
//! each Newton step is a banded Cholesky solve. Input boxes are handled by a
//! projected Newton method: variables pinned at a bound with the gradient
//! pointing outward are frozen for that step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::models::{DiscreteModel, Linearization};

/// States `x_1..x_T`, inputs `u_1..u_{T-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub dt: f64,
    pub cost: f64,
    /// `max_t |x_{t+1} - f(x_t, u_t)|_inf` under the model it was built for.
    pub defect: f64,
    pub iterations: usize,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    /// Linear interpolation from `x0` to `xg` with zero inputs.
    pub fn interpolate(x0: &[f64], xg: &[f64], horizon: usize, n_u: usize, dt: f64) -> Self {
        let states = (0..horizon)
            .map(|t| {
                let s = if horizon > 1 { t as f64 / (horizon - 1) as f64 } else { 0.0 };
                x0.iter().zip(xg).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect();
        let inputs = vec![vec![0.0; n_u]; horizon.saturating_sub(1)];
        Trajectory { states, inputs, dt, cost: f64::NAN, defect: f64::NAN, iterations: 0 }
    }

    /// Open-loop rollout of `inputs` from `x0` under `model`.
    pub fn rollout(model: &dyn DiscreteModel, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Self> {
        let mut states = vec![x0.to_vec()];
        for u in inputs {
            let next = model.step(states.last().expect("nonempty"), u)?;
            states.push(next);
        }
        Ok(Trajectory { states, inputs: inputs.to_vec(), dt: model.dt(), cost: f64::NAN, defect: 0.0, iterations: 0 })
    }

    pub fn validate(&self, n_x: usize, n_u: usize) -> Result<()> {
        if self.states.len() < 2 || self.inputs.len() + 1 != self.states.len() {
            return Err(invalid(format!(
                "trajectory needs T >= 2 states and T - 1 inputs, got {} and {}",
                self.states.len(),
                self.inputs.len()
            )));
        }
        if self.states.iter().any(|x| x.len() != n_x) || self.inputs.iter().any(|u| u.len() != n_u) {
            return Err(invalid("trajectory entries have the wrong dimension"));
        }
        Ok(())
    }
}

fn quad(m: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += v[i] * m[i * n + j] * v[j];
        }
    }
    s
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Quadratic tracking cost: terminal term `(x_T - x_g)' Q_F (x_T - x_g)`
/// plus, for `t < T`, `(x_t - x_g)' Q (x_t - x_g) + u_t' R u_t`.
pub fn trajectory_cost(traj: &Trajectory, q: &[f64], r: &[f64], qf: &[f64], xg: &[f64]) -> f64 {
    let t_len = traj.states.len();
    let mut cost = quad(qf, &sub(&traj.states[t_len - 1], xg));
    for t in 0..t_len - 1 {
        cost += quad(q, &sub(&traj.states[t], xg)) + quad(r, &traj.inputs[t]);
    }
    cost
}

/// Row-major `n x n` diagonal matrix.
pub fn diag(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = values[i];
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajoptProblem {
    pub x0: Vec<f64>,
    pub xg: Vec<f64>,
    /// Number of knots `T`.
    pub horizon: usize,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub qf: Vec<f64>,
    pub u_max: Vec<f64>,
}

fn is_symmetric(m: &[f64], n: usize) -> bool {
    (0..n).all(|i| (0..n).all(|j| (m[i * n + j] - m[j * n + i]).abs() <= 1e-12 * (1.0 + m[i * n + j].abs())))
}

/// Cholesky with a tiny shift as PSD test.
fn is_psd(m: &[f64], n: usize) -> bool {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let shifted: Vec<f64> = (0..n * n).map(|k| m[k] + if k % (n + 1) == 0 { 1e-12 * scale } else { 0.0 }).collect();
    crate::mechanics::cholesky(&shifted, n).is_ok()
}

pub const DEFAULT_HORIZON: usize = 101;

impl TrajoptProblem {
    /// Swing-up from `home` to `goal` with the default weights:
    /// `Q = 1e-2 I`, `R = 1e-2 I`, `Q_F = 100 I`.
    pub fn swingup(spec: &crate::systems::SystemSpec, horizon: usize) -> Self {
        let (nx, nu) = (spec.n_x(), spec.n_u());
        TrajoptProblem {
            x0: spec.home.clone(),
            xg: spec.goal.clone(),
            horizon,
            q: diag(&vec![1e-2; nx]),
            r: diag(&vec![1e-2; nu]),
            qf: diag(&vec![100.0; nx]),
            u_max: spec.u_max.clone(),
        }
    }

    /// Linear interpolation initial guess with zero inputs.
    pub fn initial_guess(&self, dt: f64) -> Trajectory {
        Trajectory::interpolate(&self.x0, &self.xg, self.horizon, self.n_u(), dt)
    }

    pub fn n_x(&self) -> usize {
        self.x0.len()
    }

    pub fn n_u(&self) -> usize {
        self.u_max.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nu) = (self.n_x(), self.n_u());
        if self.horizon < 2 {
            return Err(invalid("horizon must be at least 2"));
        }
        if self.xg.len() != nx || self.q.len() != nx * nx || self.qf.len() != nx * nx || self.r.len() != nu * nu {
            return Err(invalid("cost matrices or goal have the wrong shape"));
        }
        for (name, m, n) in [("Q", &self.q, nx), ("Q_F", &self.qf, nx)] {
            if !is_symmetric(m, n) || !is_psd(m, n) {
                return Err(invalid(format!("{name} must be symmetric positive semidefinite")));
            }
        }
        if !is_symmetric(&self.r, nu) || crate::mechanics::cholesky(&self.r, nu).is_err() {
            return Err(invalid("R must be symmetric positive definite"));
        }
        if self.u_max.iter().any(|&u| !(u > 0.0)) {
            return Err(invalid("input bounds must be positive"));
        }
        Ok(())
    }

    pub fn cost(&self, traj: &Trajectory) -> f64 {
        trajectory_cost(traj, &self.q, &self.r, &self.qf, &self.xg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub defect_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Include the multiplier-weighted dynamics curvature in the inner
    /// Hessian. Without it the inner steps are plain Gauss-Newton.
    pub second_order: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            initial_penalty: 1.0,
            penalty_growth: 10.0,
            max_penalty: 1e12,
            defect_tol: 1e-6,
            max_outer: 30,
            max_inner: 100,
            second_order: true,
        }
    }
}

/// Symmetric positive definite band matrix storing `a[i][i - k]` for
/// `k <= bw`.
struct Band {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, bw: usize) -> Self {
        Band { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    /// Adds `v` at `(i, j)`, `i >= j`.
    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i - j > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (i - j)]
        }
    }

    /// In-place banded Cholesky, then forward and back substitution.
    fn solve(mut self, b: &[f64]) -> Option<Vec<f64>> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = self.data[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= self.data[i * w + (i - k)] * self.data[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    self.data[i * w] = libm::sqrt(s);
                } else {
                    self.data[i * w + (i - j)] = s / self.data[j * w];
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.data[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.data[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= self.data[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.data[i * w];
        }
        Some(y)
    }
}

struct Transcription<'a> {
    p: &'a TrajoptProblem,
    model: &'a dyn DiscreteModel,
    nx: usize,
    nu: usize,
    /// Knot count minus one.
    k: usize,
}

impl<'a> Transcription<'a> {
    fn block(&self) -> usize {
        self.nu + self.nx
    }

    fn u_off(&self, t: usize) -> usize {
        t * self.block()
    }

    fn x_off(&self, t: usize) -> usize {
        t * self.block() + self.nu
    }

    fn pack(&self, traj: &Trajectory) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.k * self.block());
        for t in 0..self.k {
            z.extend_from_slice(&traj.inputs[t]);
            z.extend_from_slice(&traj.states[t + 1]);
        }
        z
    }

    fn unpack(&self, z: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut states = vec![self.p.x0.clone()];
        let mut inputs = Vec::with_capacity(self.k);
        for t in 0..self.k {
            inputs.push(z[self.u_off(t)..self.u_off(t) + self.nu].to_vec());
            states.push(z[self.x_off(t)..self.x_off(t) + self.nx].to_vec());
        }
        (states, inputs)
    }

    fn cost_of(&self, z: &[f64]) -> f64 {
        let (states, inputs) = self.unpack(z);
        let traj = Trajectory { states, inputs, dt: 0.0, cost: 0.0, defect: 0.0, iterations: 0 };
        self.p.cost(&traj)
    }

    /// Defects `d_t = x_{t+1} - f(x_t, u_t)`.
    fn defects(&self, z: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (states, inputs) = self.unpack(z);
        let next = self.model.step_batch(&states[..self.k], &inputs)?;
        Ok((0..self.k).map(|t| sub(&states[t + 1], &next[t])).collect())
    }

    fn linearize(&self, z: &[f64]) -> Result<Vec<Linearization>> {
        let (states, inputs) = self.unpack(z);
        self.model.linearize_batch(&states[..self.k], &inputs)
    }

    fn merit(&self, z: &[f64], lambda: &[Vec<f64>], rho: f64) -> Result<f64> {
        let d = self.defects(z)?;
        let mut m = self.cost_of(z);
        for (dt, lt) in d.iter().zip(lambda) {
            for (di, li) in dt.iter().zip(lt) {
                m += li * di + 0.5 * rho * di * di;
            }
        }
        Ok(m)
    }

    fn project(&self, z: &mut [f64]) {
        for t in 0..self.k {
            for j in 0..self.nu {
                let b = self.p.u_max[j];
                let v = &mut z[self.u_off(t) + j];
                *v = v.clamp(-b, b);
            }
        }
    }

    /// Gradient and Gauss-Newton Hessian of the augmented Lagrangian.
    fn gn_system(&self, z: &[f64], lin: &[Linearization], lambda: &[Vec<f64>], rho: f64) -> (Vec<f64>, Band) {
        let (nx, nu, k) = (self.nx, self.nu, self.k);
        let nz = k * self.block();
        let mut g = vec![0.0; nz];
        let mut h = Band::new(nz, self.block() + nx);
        let p = self.p;
        for t in 0..k {
            let (uo, xo) = (self.u_off(t), self.x_off(t));
            let u = &z[uo..uo + nu];
            for i in 0..nu {
                for j in 0..nu {
                    g[uo + i] += 2.0 * p.r[i * nu + j] * u[j];
                    if j <= i {
                        h.add(uo + i, uo + j, 2.0 * p.r[i * nu + j]);
                    }
                }
            }
            let qm = if t + 1 == k { &p.qf } else { &p.q };
            let e = sub(&z[xo..xo + nx], &p.xg);
            for i in 0..nx {
                for j in 0..nx {
                    g[xo + i] += 2.0 * qm[i * nx + j] * e[j];
                    if j <= i {
                        h.add(xo + i, xo + j, 2.0 * qm[i * nx + j]);
                    }
                }
            }
        }
        let (states, _) = self.unpack(z);
        for t in 0..k {
            let lt = &lin[t];
            let d: Vec<f64> = (0..nx).map(|i| states[t + 1][i] - lt.next[i]).collect();
            let w: Vec<f64> = (0..nx).map(|i| lambda[t][i] + rho * d[i]).collect();
            // Columns of J_t = d d_t / d z restricted to its nonzero blocks:
            // x_t -> -A_t (t >= 1), u_t -> -B_t, x_{t+1} -> I.
            let mut cols: Vec<(usize, Vec<f64>)> = Vec::with_capacity(2 * nx + nu);
            if t >= 1 {
                let xo = self.x_off(t - 1);
                for j in 0..nx {
                    cols.push((xo + j, (0..nx).map(|i| -lt.a[i * nx + j]).collect()));
                }
            }
            let uo = self.u_off(t);
            for j in 0..nu {
                cols.push((uo + j, (0..nx).map(|i| -lt.b[i * nu + j]).collect()));
            }
            let xo = self.x_off(t);
            for j in 0..nx {
                cols.push((xo + j, (0..nx).map(|i| if i == j { 1.0 } else { 0.0 }).collect()));
            }
            for (a, (ia, ca)) in cols.iter().enumerate() {
                g[*ia] += ca.iter().zip(&w).map(|(c, wi)| c * wi).sum::<f64>();
                for (ib, cb) in cols.iter().take(a + 1) {
                    let v: f64 = ca.iter().zip(cb).map(|(p, q)| p * q).sum();
                    if v != 0.0 {
                        let (i, j) = if ia >= ib { (*ia, *ib) } else { (*ib, *ia) };
                        h.add(i, j, rho * v);
                    }
                }
            }
        }
        (g, h)
    }

    fn active(&self, z: &[f64], g: &[f64]) -> Vec<bool> {
        let mut act = vec![false; z.len()];
        for t in 0..self.k {
            for j in 0..self.nu {
                let i = self.u_off(t) + j;
                let b = self.p.u_max[j];
                let tol = 1e-12 * (1.0 + b);
                act[i] = (z[i] >= b - tol && g[i] < 0.0) || (z[i] <= -b + tol && g[i] > 0.0);
            }
        }
        act
    }

    /// Adds `sum_t w_t' d^2 d_t` over the `(x_t, u_t)` blocks, with the
    /// second derivatives taken by forward differences of `J_t' w_t`.
    fn add_curvature(&self, z: &[f64], lin: &[Linearization], w: &[Vec<f64>], h: &mut Band) -> Result<()> {
        let (nx, nu, k) = (self.nx, self.nu, self.k);
        let nv = nx + nu;
        let (states, inputs) = self.unpack(z);
        let jtw = |l: &Linearization, wt: &[f64]| -> Vec<f64> {
            let mut g = vec![0.0; nv];
            for i in 0..nx {
                for j in 0..nx {
                    g[j] += l.a[i * nx + j] * wt[i];
                }
                for j in 0..nu {
                    g[nx + j] += l.b[i * nu + j] * wt[i];
                }
            }
            g
        };
        let base: Vec<Vec<f64>> = (0..k).map(|t| jtw(&lin[t], &w[t])).collect();
        let mut blocks = vec![vec![0.0; nv * nv]; k];
        for j in 0..nv {
            let mut xs = states[..k].to_vec();
            let mut us = inputs.clone();
            let mut steps = vec![0.0; k];
            for t in 0..k {
                let v = if j < nx { &mut xs[t][j] } else { &mut us[t][j - nx] };
                steps[t] = 1e-6 * (1.0 + v.abs());
                *v += steps[t];
            }
            let pert = self.model.linearize_batch(&xs, &us)?;
            for t in 0..k {
                let g = jtw(&pert[t], &w[t]);
                for i in 0..nv {
                    // d_t = x_{t+1} - f, so its curvature is minus that of f.
                    blocks[t][i * nv + j] = -(g[i] - base[t][i]) / steps[t];
                }
            }
        }
        for t in 0..k {
            let b = &blocks[t];
            let offset = |i: usize| -> Option<usize> {
                if i < nx {
                    (t >= 1).then(|| self.x_off(t - 1) + i)
                } else {
                    Some(self.u_off(t) + i - nx)
                }
            };
            for i in 0..nv {
                for j in 0..=i {
                    let (Some(oi), Some(oj)) = (offset(i), offset(j)) else { continue };
                    let v = 0.5 * (b[i * nv + j] + b[j * nv + i]);
                    let (r, c) = if oi >= oj { (oi, oj) } else { (oj, oi) };
                    h.add(r, c, v);
                }
            }
        }
        Ok(())
    }

    /// Projected Newton minimization of the augmented Lagrangian. Returns the
    /// number of iterations taken.
    fn inner(&self, z: &mut Vec<f64>, lambda: &[Vec<f64>], rho: f64, opts: &SolverOptions) -> Result<usize> {
        let mut merit = self.merit(z, lambda, rho)?;
        let mut shift = 0.0f64;
        for it in 0..opts.max_inner {
            let lin = self.linearize(z)?;
            let (g, mut h) = self.gn_system(z, &lin, lambda, rho);
            if opts.second_order {
                let w: Vec<Vec<f64>> = (0..self.k)
                    .map(|t| {
                        let d = (0..self.nx).map(|i| z[self.x_off(t) + i] - lin[t].next[i]);
                        d.zip(&lambda[t]).map(|(di, li)| li + rho * di).collect()
                    })
                    .collect();
                self.add_curvature(z, &lin, &w, &mut h)?;
            }
            let act = self.active(z, &g);
            let free_grad = g.iter().zip(&act).fold(0.0f64, |a, (gi, &ai)| if ai { a } else { a.max(gi.abs()) });
            if free_grad <= 1e-10 * (1.0 + rho) {
                return Ok(it);
            }
            let scale = (0..h.n).fold(0.0f64, |a, i| a.max(h.get(i, i).abs())).max(1e-12);
            let rhs: Vec<f64> = (0..g.len()).map(|i| if act[i] { 0.0 } else { -g[i] }).collect();
            let mut accepted = false;
            for _ in 0..12 {
                let mut hm = Band { n: h.n, bw: h.bw, data: h.data.clone() };
                let w = hm.bw + 1;
                for i in 0..hm.n {
                    if act[i] {
                        for j in i.saturating_sub(hm.bw)..=i {
                            hm.data[i * w + (i - j)] = 0.0;
                        }
                        for r in i + 1..hm.n.min(i + w) {
                            hm.data[r * w + (r - i)] = 0.0;
                        }
                        hm.data[i * w] = 1.0;
                    } else {
                        hm.data[i * w] += shift;
                    }
                }
                let Some(step) = hm.solve(&rhs) else {
                    shift = (10.0 * shift).max(1e-10 * scale);
                    continue;
                };
                let mut alpha = 1.0;
                for _ in 0..20 {
                    let mut trial: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
                    self.project(&mut trial);
                    let dz: Vec<f64> = trial.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
                    let slope: f64 = g.iter().zip(&dz).map(|(a, b)| a * b).sum();
                    if let Ok(m) = self.merit(&trial, lambda, rho) {
                        if m.is_finite() && m <= merit + 1e-4 * slope.min(0.0) {
                            let moved = dz.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                            let improvement = merit - m;
                            *z = trial;
                            merit = m;
                            accepted = true;
                            if alpha == 1.0 {
                                shift *= 0.1;
                                if shift < 1e-12 * scale {
                                    shift = 0.0;
                                }
                            }
                            if moved < 1e-13 || improvement <= 1e-15 * (1.0 + merit.abs()) {
                                return Ok(it + 1);
                            }
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if accepted {
                    break;
                }
                shift = (10.0 * shift).max(1e-8 * scale);
            }
            if !accepted {
                return Ok(it + 1);
            }
        }
        Ok(opts.max_inner)
    }
}

fn max_abs(d: &[Vec<f64>]) -> f64 {
    d.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Minimizes the quadratic cost subject to `x_{t+1} = f(x_t, u_t)` and
/// `|u| <= u_max`. `init` supplies the initial guess (its first state is
/// replaced by `x0`).
///
/// Multipliers are updated only when the defect has dropped to a quarter of
/// its previous value; otherwise the penalty grows instead.
pub fn solve_dircol(
    problem: &TrajoptProblem,
    model: &dyn DiscreteModel,
    init: &Trajectory,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    problem.validate()?;
    let (nx, nu) = (problem.n_x(), problem.n_u());
    if model.n_x() != nx || model.n_u() != nu {
        return Err(invalid("model dimensions do not match the problem"));
    }
    init.validate(nx, nu)?;
    if init.horizon() != problem.horizon {
        return Err(invalid(format!("initial guess has {} knots, problem has {}", init.horizon(), problem.horizon)));
    }
    let tr = Transcription { p: problem, model, nx, nu, k: problem.horizon - 1 };
    let mut z = tr.pack(init);
    tr.project(&mut z);
    let mut lambda = vec![vec![0.0; nx]; tr.k];
    let mut rho = opts.initial_penalty;
    let mut target = 0.25 * max_abs(&tr.defects(&z)?);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for outer in 1..=opts.max_outer {
        tr.inner(&mut z, &lambda, rho, opts)?;
        let d = tr.defects(&z)?;
        let defect = max_abs(&d);
        if best.as_ref().map_or(true, |(b, _)| defect < *b) {
            best = Some((defect, z.clone()));
        }
        if defect <= opts.defect_tol {
            let (states, inputs) = tr.unpack(&z);
            let mut traj = Trajectory { states, inputs, dt: model.dt(), cost: 0.0, defect, iterations: outer };
            traj.cost = problem.cost(&traj);
            return Ok(traj);
        }
        if defect <= target {
            for (lt, dt) in lambda.iter_mut().zip(&d) {
                for (l, di) in lt.iter_mut().zip(dt) {
                    *l += rho * di;
                }
            }
            target = 0.25 * defect;
        } else {
            rho = (rho * opts.penalty_growth).min(opts.max_penalty);
            target = target.max(0.25 * defect).min(defect);
        }
    }
    let (defect, zb) = best.expect("at least one outer iteration");
    let (states, inputs) = tr.unpack(&zb);
    let mut traj = Trajectory { states, inputs, dt: model.dt(), cost: 0.0, defect, iterations: opts.max_outer };
    traj.cost = problem.cost(&traj);
    Err(Error::Infeasible { best: alloc::boxed::Box::new(traj), defect, iterations: opts.max_outer })
}
