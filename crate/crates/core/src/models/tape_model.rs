//! Batched evaluation of a checkpoint on a reverse-mode tape. Every state,
//! input and intermediate quantity is a `batch x 1` column.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Real, Tape, TapeMlp, Var, Gradients};
use crate::error::{Error, Result};
use crate::mechanics::{self, MechError, MechTerms};

use super::{tri_index, ModelCheckpoint, ModelClass, NetRole, TimeMode};

pub struct TapeModel<'a, 't> {
    ckpt: &'a ModelCheckpoint,
    tape: &'t Tape,
    nets: Vec<TapeMlp<'t>>,
    rows: usize,
}

/// Standardized features and their derivatives with respect to `q`.
struct Features<'t> {
    cols: Vec<Var<'t>>,
    /// `dq[k][p]`: derivative of feature `p < n_encoded` w.r.t. `q_k`.
    dq: Vec<Vec<Var<'t>>>,
}

impl<'a, 't> TapeModel<'a, 't> {
    /// Places the checkpoint's parameters on `tape` for a batch of `rows`.
    pub fn bind(tape: &'t Tape, ckpt: &'a ModelCheckpoint, rows: usize, trainable: bool) -> Self {
        let nets = ckpt.params.iter().map(|p| TapeMlp::bind(tape, p, trainable)).collect();
        TapeModel { ckpt, tape, nets, rows }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Flat parameter gradients, one vector per network.
    pub fn param_grads(&self, grads: &Gradients) -> Vec<Vec<f64>> {
        self.nets
            .iter()
            .zip(&self.ckpt.params)
            .map(|(net, p)| {
                let mut g = Vec::with_capacity(p.num_params());
                net.collect_grad(grads, &mut g);
                g
            })
            .collect()
    }

    fn features(&self, q: &[Var<'t>], qdot: &[Var<'t>], u: &[Var<'t>], with_dq: bool) -> Features<'t> {
        let cfg = &self.ckpt.config;
        let norm = &cfg.normalizer;
        let n = cfg.n_q;
        let mut raw = Vec::with_capacity(cfg.n_features());
        let mut draw: Vec<(usize, Var<'t>)> = Vec::new();
        for (k, &angle) in cfg.angle_mask.iter().enumerate() {
            if angle {
                let (s, c) = (q[k].sin(), q[k].cos());
                draw.push((k, c));
                draw.push((k, -s));
                raw.push(s);
                raw.push(c);
            } else {
                draw.push((k, Var::constant(1.0)));
                raw.push(q[k]);
            }
        }
        raw.extend_from_slice(qdot);
        raw.extend_from_slice(u);
        let cols = raw
            .iter()
            .enumerate()
            .map(|(p, &f)| (f - norm.input_mean[p]) * (1.0 / norm.input_std[p]))
            .collect();
        let dq = if with_dq {
            (0..n)
                .map(|k| {
                    draw.iter()
                        .enumerate()
                        .map(|(p, &(owner, d))| if owner == k { d * (1.0 / norm.input_std[p]) } else { Var::constant(0.0) })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Features { cols, dq }
    }

    fn input(&self, cols: &[Var<'t>]) -> Var<'t> {
        self.tape.concat(cols, self.rows)
    }

    fn scaled_outputs(&self, net: usize, out: Var<'t>) -> Vec<Var<'t>> {
        let scale = &self.ckpt.config.nets[net].output_scale;
        scale.iter().enumerate().map(|(j, &s)| out.col(j) * s).collect()
    }

    fn net_index(&self, role: NetRole) -> usize {
        self.ckpt.config.net(role).expect("network role present by validation")
    }

    /// Output of network `role` and its tangents along each `q_k`.
    fn net_jvp(&self, role: NetRole, f: &Features<'t>) -> (Vec<Var<'t>>, Vec<Vec<Var<'t>>>) {
        let i = self.net_index(role);
        let e = self.ckpt.config.n_encoded();
        let x = self.input(&f.cols[..e]);
        let tangents: Vec<Var<'t>> = f.dq.iter().map(|d| self.input(d)).collect();
        let (y, ty) = self.nets[i].forward_jvp(x, &tangents);
        let ys = self.scaled_outputs(i, y);
        let tys = ty.into_iter().map(|t| self.scaled_outputs(i, t)).collect();
        (ys, tys)
    }

    fn net_forward(&self, role: NetRole, f: &Features<'t>, width: usize) -> Vec<Var<'t>> {
        let i = self.net_index(role);
        let x = self.input(&f.cols[..width]);
        self.scaled_outputs(i, self.nets[i].forward(x))
    }

    /// `M(q)` and `dM/dq` (layout as in [`MechTerms`]).
    fn mass(&self, f: &Features<'t>) -> (Vec<Var<'t>>, Vec<Var<'t>>) {
        let cfg = &self.ckpt.config;
        let n = cfg.n_q;
        if cfg.identity_mass {
            let m = (0..n * n).map(|ij| Var::constant(if ij % (n + 1) == 0 { 1.0 } else { 0.0 })).collect();
            return (m, vec![Var::constant(0.0); n * n * n]);
        }
        let (raw, draw) = self.net_jvp(NetRole::Mass, f);
        let mut l = vec![Var::constant(0.0); n * n];
        let mut dl = vec![vec![Var::constant(0.0); n * n]; n];
        for i in 0..n {
            for j in 0..=i {
                let r = tri_index(i, j);
                if i == j {
                    l[i * n + i] = raw[r].softplus() + cfg.eps;
                    let slope = raw[r].sigmoid();
                    for k in 0..n {
                        dl[k][i * n + i] = slope * draw[k][r];
                    }
                } else {
                    l[i * n + j] = raw[r];
                    for k in 0..n {
                        dl[k][i * n + j] = draw[k][r];
                    }
                }
            }
        }
        let floor = cfg.eps * cfg.eps;
        let mut m = vec![Var::constant(0.0); n * n];
        let mut dm = vec![Var::constant(0.0); n * n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut acc = l[i * n] * l[j * n];
                for c in 1..=j {
                    acc = acc + l[i * n + c] * l[j * n + c];
                }
                if i == j {
                    acc = acc + floor;
                }
                m[i * n + j] = acc;
                m[j * n + i] = acc;
                for k in 0..n {
                    let mut d = dl[k][i * n] * l[j * n] + l[i * n] * dl[k][j * n];
                    for c in 1..=j {
                        d = d + dl[k][i * n + c] * l[j * n + c] + l[i * n + c] * dl[k][j * n + c];
                    }
                    dm[(i * n + j) * n + k] = d;
                    dm[(j * n + i) * n + k] = d;
                }
            }
        }
        (m, dm)
    }

    /// Manipulator-equation terms of a structured model.
    pub fn terms(&self, q: &[Var<'t>], qdot: &[Var<'t>], u: &[Var<'t>]) -> MechTerms<Var<'t>> {
        let cfg = &self.ckpt.config;
        assert!(cfg.class != ModelClass::Bbnn, "BBNN has no mechanical terms");
        let n = cfg.n_q;
        let e = cfg.n_encoded();
        let f = self.features(q, qdot, u, true);
        let (mass_matrix, mass_jacobian) = self.mass(&f);
        let (_, dv) = self.net_jvp(NetRole::Potential, &f);
        let potential_gradient = dv.into_iter().map(|d| d[0]).collect();
        let force = match cfg.class {
            ModelClass::Smm => self.net_forward(NetRole::Force, &f, cfg.n_features()),
            _ => {
                let mut force = self.net_forward(NetRole::Dissipation, &f, e + n);
                let b = self.net_forward(NetRole::Input, &f, e);
                for i in 0..n {
                    for j in 0..cfg.n_u {
                        force[i] = force[i] + b[i * cfg.n_u + j] * u[j];
                    }
                }
                force
            }
        };
        MechTerms { n, mass_matrix, mass_jacobian, potential_gradient, force }
    }

    /// `V(q)` of a structured model.
    pub fn potential(&self, q: &[Var<'t>]) -> Var<'t> {
        let cfg = &self.ckpt.config;
        let zeros = vec![Var::constant(0.0); cfg.n_q + cfg.n_u];
        let f = self.features(q, &zeros[..cfg.n_q], &zeros[cfg.n_q..], false);
        self.net_forward(NetRole::Potential, &f, cfg.n_encoded())[0]
    }

    /// Input Jacobian `B(q)` of an SMM-C model, row-major `n_q x m`.
    pub fn input_jacobian(&self, q: &[Var<'t>]) -> Vec<Var<'t>> {
        let cfg = &self.ckpt.config;
        assert_eq!(cfg.class, ModelClass::SmmC, "input Jacobian is explicit only for SMM-C");
        let zeros = vec![Var::constant(0.0); cfg.n_q + cfg.n_u];
        let f = self.features(q, &zeros[..cfg.n_q], &zeros[cfg.n_q..], false);
        self.net_forward(NetRole::Input, &f, cfg.n_encoded())
    }

    /// Continuous-time acceleration `q''`.
    pub fn accel(&self, q: &[Var<'t>], qdot: &[Var<'t>], u: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        let cfg = &self.ckpt.config;
        if cfg.class == ModelClass::Bbnn {
            assert_eq!(cfg.time_mode, TimeMode::Continuous, "discrete-time BBNN has no acceleration");
            let f = self.features(q, qdot, u, false);
            return Ok(self.net_forward(NetRole::Bbnn, &f, cfg.n_features()));
        }
        let terms = self.terms(q, qdot, u);
        #[cfg(debug_assertions)]
        if !cfg.identity_mass {
            self.debug_check_mass_floor(&terms.mass_matrix);
        }
        mechanics::forward_dynamics(&terms, qdot).map_err(|e| match e {
            MechError::NotPositiveDefinite { pivot, value, qdot, .. } => Error::Mech(MechError::NotPositiveDefinite {
                pivot,
                value,
                q: q.iter().map(Real::primal).collect(),
                qdot,
            }),
            other => Error::Mech(other),
        })
    }

    #[cfg(debug_assertions)]
    fn debug_check_mass_floor(&self, m: &[Var<'t>]) {
        let n = self.ckpt.config.n_q;
        let half_floor = 0.5 * self.ckpt.config.eps * self.ckpt.config.eps;
        let cols: Vec<Vec<f64>> = m.iter().map(|v| v.column_values(self.rows)).collect();
        for r in 0..self.rows {
            let shifted: Vec<f64> =
                (0..n * n).map(|ij| cols[ij][r] - if ij % (n + 1) == 0 { half_floor } else { 0.0 }).collect();
            if cols.iter().all(|c| c[r].is_finite()) {
                debug_assert!(
                    mechanics::cholesky(&shifted, n).is_ok(),
                    "learned mass matrix fell below its eigenvalue floor: {shifted:?}"
                );
            }
        }
    }

    /// State derivative `[q'; q'']`.
    pub fn dynamics(&self, x: &[Var<'t>], u: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        let n = self.ckpt.config.n_q;
        let (q, qdot) = x.split_at(n);
        let qdd = self.accel(q, qdot, u)?;
        let mut dx = qdot.to_vec();
        dx.extend(qdd);
        Ok(dx)
    }

    /// One step of the model's discrete-time map.
    pub fn step(&self, x: &[Var<'t>], u: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        let cfg = &self.ckpt.config;
        if cfg.class == ModelClass::Bbnn && cfg.time_mode == TimeMode::Discrete {
            let (q, qdot) = x.split_at(cfg.n_q);
            let f = self.features(q, qdot, u, false);
            let delta = self.net_forward(NetRole::Bbnn, &f, cfg.n_features());
            return Ok(x.iter().zip(delta).map(|(&a, d)| a + d).collect());
        }
        cfg.discretization.step(|x: &[Var<'t>], u: &[Var<'t>]| self.dynamics(x, u), x, u)
    }
}
