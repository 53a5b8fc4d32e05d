//! Discrete-time maps `x_{t+1} = f(x_t, u_t)` with exact Jacobians, shared
//! by the learned checkpoints and the analytic systems.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Dual, Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::integrators::Discretization;
use crate::mechanics::MechState;
use crate::systems::SystemSpec;

use super::{ModelCheckpoint, TapeModel};

/// One-step map value and Jacobians at `(x, u)`. `a` is `n_x x n_x`, `b` is
/// `n_x x n_u`, both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub next: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub trait DiscreteModel {
    fn label(&self) -> &'static str;
    fn n_x(&self) -> usize;
    fn n_u(&self) -> usize;
    fn dt(&self) -> f64;

    fn step_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    fn linearize_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> Result<Vec<Linearization>>;

    fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.step_batch(&[x.to_vec()], &[u.to_vec()])?.remove(0))
    }

    fn linearize(&self, x: &[f64], u: &[f64]) -> Result<Linearization> {
        Ok(self.linearize_batch(&[x.to_vec()], &[u.to_vec()])?.remove(0))
    }
}

fn check_batch(xs: &[Vec<f64>], us: &[Vec<f64>], n_x: usize, n_u: usize) -> Result<()> {
    if xs.len() != us.len() {
        return Err(invalid(format!("{} states but {} inputs", xs.len(), us.len())));
    }
    if let Some(x) = xs.iter().find(|x| x.len() != n_x) {
        return Err(invalid(format!("state has {} entries, expected {n_x}", x.len())));
    }
    if let Some(u) = us.iter().find(|u| u.len() != n_u) {
        return Err(invalid(format!("input has {} entries, expected {n_u}", u.len())));
    }
    Ok(())
}

/// The analytic system under its simulator discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueModel {
    pub spec: SystemSpec,
    pub disc: Discretization,
}

impl TrueModel {
    pub fn new(spec: SystemSpec, disc: Discretization) -> Self {
        TrueModel { spec, disc }
    }
}

impl DiscreteModel for TrueModel {
    fn label(&self) -> &'static str {
        "true"
    }

    fn n_x(&self) -> usize {
        self.spec.n_x()
    }

    fn n_u(&self) -> usize {
        self.spec.n_u()
    }

    fn dt(&self) -> f64 {
        self.disc.dt
    }

    fn step_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_batch(xs, us, self.n_x(), self.n_u())?;
        xs.iter().zip(us).map(|(x, u)| self.spec.step(x, u, &self.disc)).collect()
    }

    /// Forward-mode duals, one pass per state and input direction.
    fn linearize_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> Result<Vec<Linearization>> {
        check_batch(xs, us, self.n_x(), self.n_u())?;
        let (nx, nu) = (self.n_x(), self.n_u());
        let mut out = Vec::with_capacity(xs.len());
        for (x, u) in xs.iter().zip(us) {
            let mut a = vec![0.0; nx * nx];
            let mut b = vec![0.0; nx * nu];
            let mut next = Vec::new();
            for dir in 0..nx + nu {
                let xd: Vec<Dual<f64>> =
                    x.iter().enumerate().map(|(i, &v)| Dual::new(v, if i == dir { 1.0 } else { 0.0 })).collect();
                let ud: Vec<Dual<f64>> =
                    u.iter().enumerate().map(|(i, &v)| Dual::new(v, if nx + i == dir { 1.0 } else { 0.0 })).collect();
                let y = self.spec.step(&xd, &ud, &self.disc)?;
                for (i, yi) in y.iter().enumerate() {
                    if dir < nx {
                        a[i * nx + dir] = yi.eps;
                    } else {
                        b[i * nu + dir - nx] = yi.eps;
                    }
                }
                if dir == 0 {
                    next = y.iter().map(|d| d.re).collect();
                }
            }
            out.push(Linearization { next, a, b });
        }
        Ok(out)
    }
}

/// Upper bound on rows per tape when evaluating large batches.
const CHUNK: usize = 512;

fn columns(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

impl ModelCheckpoint {
    fn model_non_finite(&self) -> Error {
        Error::ModelNonFinite { model: self.class().name() }
    }

    fn check_finite_rows(&self, rows: &[Vec<f64>]) -> Result<()> {
        if rows.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(self.model_non_finite())
        }
    }

    /// Continuous-time acceleration.
    pub fn accel(&self, state: &MechState, u: &[f64]) -> Result<Vec<f64>> {
        if self.config.time_mode == super::TimeMode::Discrete {
            return Err(invalid("a discrete-time BBNN has no acceleration"));
        }
        let n = self.config.n_q;
        check_batch(&[state.to_vector()], &[u.to_vec()], 2 * n, self.config.n_u)?;
        let tape = Tape::new();
        let model = TapeModel::bind(&tape, self, 1, false);
        let q: Vec<Var<'_>> = state.q.iter().map(|&v| tape.data_col(vec![v])).collect();
        let qd: Vec<Var<'_>> = state.qdot.iter().map(|&v| tape.data_col(vec![v])).collect();
        let uv: Vec<Var<'_>> = u.iter().map(|&v| tape.data_col(vec![v])).collect();
        let qdd: Vec<f64> = model.accel(&q, &qd, &uv)?.iter().map(|v| v.column_values(1)[0]).collect();
        self.check_finite_rows(core::slice::from_ref(&qdd))?;
        Ok(qdd)
    }

    /// Learned `M(q)` and `dM/dq` of a structured model.
    pub fn mass_matrix(&self, q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let terms = self.terms_at(q, &vec![0.0; q.len()], &vec![0.0; self.config.n_u])?;
        Ok((terms.mass_matrix, terms.mass_jacobian))
    }

    /// Learned `grad V(q)` of a structured model.
    pub fn potential_gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.terms_at(q, &vec![0.0; q.len()], &vec![0.0; self.config.n_u])?.potential_gradient)
    }

    pub fn potential(&self, q: &[f64]) -> Result<f64> {
        self.structured_only()?;
        let tape = Tape::new();
        let model = TapeModel::bind(&tape, self, 1, false);
        let qv: Vec<Var<'_>> = q.iter().map(|&v| tape.data_col(vec![v])).collect();
        Ok(model.potential(&qv).column_values(1)[0])
    }

    pub fn terms_at(&self, q: &[f64], qdot: &[f64], u: &[f64]) -> Result<crate::mechanics::MechTerms<f64>> {
        self.structured_only()?;
        let n = self.config.n_q;
        if q.len() != n || qdot.len() != n || u.len() != self.config.n_u {
            return Err(invalid("terms_at: dimension mismatch"));
        }
        let tape = Tape::new();
        let model = TapeModel::bind(&tape, self, 1, false);
        let col = |v: &f64| tape.data_col(vec![*v]);
        let qv: Vec<Var<'_>> = q.iter().map(col).collect();
        let qdv: Vec<Var<'_>> = qdot.iter().map(col).collect();
        let uv: Vec<Var<'_>> = u.iter().map(col).collect();
        let t = model.terms(&qv, &qdv, &uv);
        let get = |v: &[Var<'_>]| v.iter().map(|x| x.column_values(1)[0]).collect::<Vec<f64>>();
        Ok(crate::mechanics::MechTerms {
            n,
            mass_matrix: get(&t.mass_matrix),
            mass_jacobian: get(&t.mass_jacobian),
            potential_gradient: get(&t.potential_gradient),
            force: get(&t.force),
        })
    }

    fn structured_only(&self) -> Result<()> {
        if self.class() == super::ModelClass::Bbnn {
            return Err(invalid("BBNN has no mechanical structure"));
        }
        Ok(())
    }

    /// One step of the model's discrete-time map with `u` held over `dt`.
    pub fn predict_next_state(&self, state: &MechState, u: &[f64], dt: f64) -> Result<MechState> {
        let mut ckpt_dt = self.clone();
        if dt != self.config.discretization.dt {
            ckpt_dt.config.discretization.dt = dt;
            ckpt_dt.config.discretization.validate()?;
        }
        let x = ckpt_dt.step(&state.to_vector(), u)?;
        Ok(MechState::from_vector(&x)?)
    }
}

impl DiscreteModel for ModelCheckpoint {
    fn label(&self) -> &'static str {
        self.class().name()
    }

    fn n_x(&self) -> usize {
        self.config.n_x()
    }

    fn n_u(&self) -> usize {
        self.config.n_u
    }

    fn dt(&self) -> f64 {
        self.config.discretization.dt
    }

    fn step_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_batch(xs, us, self.n_x(), self.n_u())?;
        let mut out = Vec::with_capacity(xs.len());
        for (xc, uc) in xs.chunks(CHUNK).zip(us.chunks(CHUNK)) {
            let rows = xc.len();
            let tape = Tape::new();
            let model = TapeModel::bind(&tape, self, rows, false);
            let x: Vec<Var<'_>> = columns(xc, self.n_x()).into_iter().map(|c| tape.data_col(c)).collect();
            let u: Vec<Var<'_>> = columns(uc, self.n_u()).into_iter().map(|c| tape.data_col(c)).collect();
            let next = model.step(&x, &u).map_err(|e| match e {
                Error::NonFinite(_) => self.model_non_finite(),
                other => other,
            })?;
            let cols: Vec<Vec<f64>> = next.iter().map(|v| v.column_values(rows)).collect();
            out.extend((0..rows).map(|r| cols.iter().map(|c| c[r]).collect::<Vec<f64>>()));
        }
        self.check_finite_rows(&out)?;
        Ok(out)
    }

    /// Reverse mode on the batched tape: one backward sweep per output
    /// coordinate gives that row of `[A B]` for every batch entry at once.
    fn linearize_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> Result<Vec<Linearization>> {
        check_batch(xs, us, self.n_x(), self.n_u())?;
        let (nx, nu) = (self.n_x(), self.n_u());
        let mut out = Vec::with_capacity(xs.len());
        for (xc, uc) in xs.chunks(CHUNK).zip(us.chunks(CHUNK)) {
            let rows = xc.len();
            let tape = Tape::new();
            let model = TapeModel::bind(&tape, self, rows, false);
            let x: Vec<Var<'_>> = columns(xc, nx).into_iter().map(|c| tape.var_col(c)).collect();
            let u: Vec<Var<'_>> = columns(uc, nu).into_iter().map(|c| tape.var_col(c)).collect();
            let next = model.step(&x, &u).map_err(|e| match e {
                Error::NonFinite(_) => self.model_non_finite(),
                other => other,
            })?;
            let mut lins: Vec<Linearization> = (0..rows)
                .map(|_| Linearization { next: vec![0.0; nx], a: vec![0.0; nx * nx], b: vec![0.0; nx * nu] })
                .collect();
            for (i, yi) in next.iter().enumerate() {
                let vals = yi.column_values(rows);
                let g = tape.gradients(*yi, None);
                let gx: Vec<Vec<f64>> = x.iter().map(|v| g.wrt_or_zero(v, rows)).collect();
                let gu: Vec<Vec<f64>> = u.iter().map(|v| g.wrt_or_zero(v, rows)).collect();
                for (r, lin) in lins.iter_mut().enumerate() {
                    lin.next[i] = vals[r];
                    for j in 0..nx {
                        lin.a[i * nx + j] = gx[j][r];
                    }
                    for j in 0..nu {
                        lin.b[i * nu + j] = gu[j][r];
                    }
                }
            }
            for lin in &lins {
                if !lin.next.iter().chain(&lin.a).chain(&lin.b).all(|v| v.is_finite()) {
                    return Err(self.model_non_finite());
                }
            }
            out.extend(lins);
        }
        Ok(out)
    }
}
