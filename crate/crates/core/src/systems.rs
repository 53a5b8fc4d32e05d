//! Analytic ground-truth dynamics of the benchmark systems.
//!
//! Each system supplies `M(q)`, `V(q)`, `B(q)` and per-coordinate viscous
//! friction `F~ = -b * q'`. Mass-matrix Jacobians and potential gradients are
//! taken with forward-mode duals through the same closed forms, so they are
//! exact to round-off.
//!
//! Conventions: angles are measured from the hanging (stable) configuration;
//! `q = 0` is always the home state. Links are uniform rods with the given
//! centre-of-mass distance and inertia about the centre of mass.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::autodiff::{Dual, Real};
use crate::error::{invalid, Error, Result};
use crate::integrators::{self, Discretization};
use crate::mechanics::{self, MechError, MechState, MechTerms};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemKind {
    /// Single point-mass pendulum; a one-link reference system for tests.
    Pendulum,
    Furuta,
    Cartpole,
    Acrobot,
    /// Cart with two serial poles, actuated at the cart.
    DoubleCartpole,
}

impl SystemKind {
    pub const BENCHMARKS: [SystemKind; 4] =
        [SystemKind::Furuta, SystemKind::Cartpole, SystemKind::Acrobot, SystemKind::DoubleCartpole];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Pendulum => "pendulum",
            SystemKind::Furuta => "furuta",
            SystemKind::Cartpole => "cartpole",
            SystemKind::Acrobot => "acrobot",
            SystemKind::DoubleCartpole => "double_cartpole",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "pendulum" => SystemKind::Pendulum,
            "furuta" => SystemKind::Furuta,
            "cartpole" => SystemKind::Cartpole,
            "acrobot" => SystemKind::Acrobot,
            "double_cartpole" => SystemKind::DoubleCartpole,
            other => return Err(invalid(format!("unknown system '{other}'"))),
        })
    }

    pub fn n_q(self) -> usize {
        match self {
            SystemKind::Pendulum => 1,
            SystemKind::Furuta | SystemKind::Cartpole | SystemKind::Acrobot => 2,
            SystemKind::DoubleCartpole => 3,
        }
    }

    /// Which generalized coordinates are angles (vs. translations).
    pub fn angle_mask(self) -> Vec<bool> {
        match self {
            SystemKind::Pendulum => vec![true],
            SystemKind::Furuta | SystemKind::Acrobot => vec![true, true],
            SystemKind::Cartpole => vec![false, true],
            SystemKind::DoubleCartpole => vec![false, true, true],
        }
    }

    /// Physical parameter names and defaults.
    fn default_params(self) -> Vec<(&'static str, f64)> {
        const G: f64 = 9.81;
        const B: f64 = 0.1;
        let rod = |m: f64, l: f64| m * l * l / 12.0;
        match self {
            SystemKind::Pendulum => vec![("mass", 1.0), ("length", 1.0), ("gravity", G), ("friction", B)],
            SystemKind::Cartpole => vec![
                ("cart_mass", 1.0),
                ("pole_mass", 1.0),
                ("pole_length", 1.0),
                ("pole_com", 0.5),
                ("pole_inertia", rod(1.0, 1.0)),
                ("gravity", G),
                ("friction_cart", B),
                ("friction_pole", B),
            ],
            SystemKind::Furuta => vec![
                ("arm_mass", 1.0),
                ("arm_length", 1.0),
                ("arm_inertia", 1.0 / 3.0),
                ("pendulum_mass", 1.0),
                ("pendulum_length", 1.0),
                ("pendulum_com", 0.5),
                ("pendulum_inertia", rod(1.0, 1.0)),
                ("gravity", G),
                ("friction_arm", B),
                ("friction_pendulum", B),
            ],
            SystemKind::Acrobot => vec![
                ("link1_mass", 1.0),
                ("link1_length", 1.0),
                ("link1_com", 0.5),
                ("link1_inertia", rod(1.0, 1.0)),
                ("link2_mass", 1.0),
                ("link2_length", 1.0),
                ("link2_com", 0.5),
                ("link2_inertia", rod(1.0, 1.0)),
                ("gravity", G),
                ("friction_shoulder", B),
                ("friction_elbow", B),
            ],
            SystemKind::DoubleCartpole => vec![
                ("cart_mass", 1.0),
                ("pole1_mass", 1.0),
                ("pole1_length", 1.0),
                ("pole1_com", 0.5),
                ("pole1_inertia", rod(1.0, 1.0)),
                ("pole2_mass", 1.0),
                ("pole2_length", 1.0),
                ("pole2_com", 0.5),
                ("pole2_inertia", rod(1.0, 1.0)),
                ("gravity", G),
                ("friction_cart", B),
                ("friction_pole1", B),
                ("friction_pole2", B),
            ],
        }
    }

    fn friction_names(self) -> &'static [&'static str] {
        match self {
            SystemKind::Pendulum => &["friction"],
            SystemKind::Cartpole => &["friction_cart", "friction_pole"],
            SystemKind::Furuta => &["friction_arm", "friction_pendulum"],
            SystemKind::Acrobot => &["friction_shoulder", "friction_elbow"],
            SystemKind::DoubleCartpole => &["friction_cart", "friction_pole1", "friction_pole2"],
        }
    }
}

/// A benchmark system with its physical parameters, limits and task states.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub kind: SystemKind,
    params: BTreeMap<String, f64>,
    /// Symmetric input bounds `|u_i| <= u_max[i]`.
    pub u_max: Vec<f64>,
    /// Sampling ranges for each of the `2 n_q` state entries.
    pub state_box: Vec<(f64, f64)>,
    pub goal: Vec<f64>,
    pub home: Vec<f64>,
}

impl SystemSpec {
    pub fn new(kind: SystemKind) -> Self {
        let n = kind.n_q();
        let params = kind.default_params().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let mut state_box: Vec<(f64, f64)> =
            kind.angle_mask().iter().map(|&a| if a { (-PI, PI) } else { (-3.0, 3.0) }).collect();
        state_box.extend(core::iter::repeat((-8.0, 8.0)).take(n));
        let mut goal = vec![0.0; 2 * n];
        match kind {
            SystemKind::Pendulum => goal[0] = PI,
            SystemKind::Cartpole | SystemKind::Furuta => goal[1] = PI,
            SystemKind::Acrobot => goal[0] = PI,
            SystemKind::DoubleCartpole => {
                goal[1] = PI;
                goal[2] = PI;
            }
        }
        SystemSpec { kind, params, u_max: vec![10.0], state_box, goal, home: vec![0.0; 2 * n] }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn n_q(&self) -> usize {
        self.kind.n_q()
    }

    pub fn n_x(&self) -> usize {
        2 * self.kind.n_q()
    }

    pub fn n_u(&self) -> usize {
        self.u_max.len()
    }

    pub fn angle_mask(&self) -> Vec<bool> {
        self.kind.angle_mask()
    }

    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Overrides a physical parameter; unknown names are rejected.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match self.params.get_mut(name) {
            Some(v) => {
                *v = value;
                self.validate()
            }
            None => Err(invalid(format!("system '{}' has no parameter '{name}'", self.name()))),
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        self.set_param(name, value)?;
        Ok(self)
    }

    /// Sets every viscous friction coefficient to zero.
    pub fn frictionless(mut self) -> Self {
        for name in self.kind.friction_names() {
            self.params.insert((*name).to_string(), 0.0);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (k, &v) in &self.params {
            if !v.is_finite() {
                return Err(invalid(format!("parameter {k} is not finite")));
            }
            let positive = k.contains("mass") || k.contains("length") || k.contains("com");
            if positive && v <= 0.0 {
                return Err(invalid(format!("parameter {k} must be positive, got {v}")));
            }
            if (k.contains("inertia") || k.contains("friction")) && v < 0.0 {
                return Err(invalid(format!("parameter {k} must be non-negative, got {v}")));
            }
        }
        if self.u_max.is_empty() || self.u_max.iter().any(|&u| !(u > 0.0)) {
            return Err(invalid("input limits must be positive"));
        }
        let n = self.n_x();
        if self.state_box.len() != n || self.goal.len() != n || self.home.len() != n {
            return Err(invalid("state box, goal and home must have 2 n_q entries"));
        }
        if self.state_box.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(invalid("state box ranges must satisfy lo <= hi"));
        }
        Ok(())
    }

    pub fn friction(&self) -> Vec<f64> {
        self.kind.friction_names().iter().map(|n| self.param(n)).collect()
    }

    /// Mass matrix `M(q)` (row-major).
    pub fn mass_matrix<R: Real>(&self, q: &[R]) -> Vec<R> {
        let p = |name: &str| self.param(name);
        match self.kind {
            SystemKind::Pendulum => vec![R::cst(p("mass") * p("length") * p("length"))],
            SystemKind::Cartpole => {
                let (mc, mp, lc, ip) = (p("cart_mass"), p("pole_mass"), p("pole_com"), p("pole_inertia"));
                let off = q[1].cos() * (mp * lc);
                vec![R::cst(mc + mp), off, off, R::cst(mp * lc * lc + ip)]
            }
            SystemKind::Furuta => {
                let (j1, l1) = (p("arm_inertia"), p("arm_length"));
                let (m2, l2, j2) = (p("pendulum_mass"), p("pendulum_com"), p("pendulum_inertia"));
                let s = q[1].sin();
                let m11 = s * s * (m2 * l2 * l2 + j2) + (j1 + m2 * l1 * l1);
                let m12 = q[1].cos() * (m2 * l1 * l2);
                vec![m11, m12, m12, R::cst(m2 * l2 * l2 + j2)]
            }
            SystemKind::Acrobot => {
                let (m1, lc1, j1) = (p("link1_mass"), p("link1_com"), p("link1_inertia"));
                let (m2, l1, lc2, j2) = (p("link2_mass"), p("link1_length"), p("link2_com"), p("link2_inertia"));
                let (i1, i2) = (m1 * lc1 * lc1 + j1, m2 * lc2 * lc2 + j2);
                let c2 = q[1].cos();
                let m11 = c2 * (2.0 * m2 * l1 * lc2) + (i1 + i2 + m2 * l1 * l1);
                let m12 = c2 * (m2 * l1 * lc2) + i2;
                vec![m11, m12, m12, R::cst(i2)]
            }
            SystemKind::DoubleCartpole => {
                let mc = p("cart_mass");
                let (m1, l1, lc1, j1) = (p("pole1_mass"), p("pole1_length"), p("pole1_com"), p("pole1_inertia"));
                let (m2, lc2, j2) = (p("pole2_mass"), p("pole2_com"), p("pole2_inertia"));
                let m01 = q[1].cos() * (m1 * lc1 + m2 * l1);
                let m02 = q[2].cos() * (m2 * lc2);
                let m12 = (q[1] - q[2]).cos() * (m2 * l1 * lc2);
                vec![
                    R::cst(mc + m1 + m2),
                    m01,
                    m02,
                    m01,
                    R::cst(m1 * lc1 * lc1 + j1 + m2 * l1 * l1),
                    m12,
                    m02,
                    m12,
                    R::cst(m2 * lc2 * lc2 + j2),
                ]
            }
        }
    }

    /// Potential energy `V(q)`.
    pub fn potential<R: Real>(&self, q: &[R]) -> R {
        let p = |name: &str| self.param(name);
        match self.kind {
            SystemKind::Pendulum => q[0].cos() * -(p("mass") * p("gravity") * p("length")),
            SystemKind::Cartpole => q[1].cos() * -(p("pole_mass") * p("gravity") * p("pole_com")),
            SystemKind::Furuta => q[1].cos() * -(p("pendulum_mass") * p("gravity") * p("pendulum_com")),
            SystemKind::Acrobot => {
                let g = p("gravity");
                let (m1, lc1, m2, l1, lc2) =
                    (p("link1_mass"), p("link1_com"), p("link2_mass"), p("link1_length"), p("link2_com"));
                q[0].cos() * -(m1 * g * lc1 + m2 * g * l1) - (q[0] + q[1]).cos() * (m2 * g * lc2)
            }
            SystemKind::DoubleCartpole => {
                let g = p("gravity");
                let (m1, lc1, l1, m2, lc2) =
                    (p("pole1_mass"), p("pole1_com"), p("pole1_length"), p("pole2_mass"), p("pole2_com"));
                q[1].cos() * -(m1 * g * lc1 + m2 * g * l1) - q[2].cos() * (m2 * g * lc2)
            }
        }
    }

    /// Input Jacobian `B(q)` (row-major, `n_q x m`).
    pub fn input_jacobian<R: Real>(&self, _q: &[R]) -> Vec<R> {
        let n = self.n_q();
        let mut b = vec![R::zero(); n];
        let actuated = match self.kind {
            SystemKind::Acrobot => 1,
            _ => 0,
        };
        b[actuated] = R::one();
        b
    }

    /// Manipulator-equation terms at `(q, q', u)`.
    pub fn truth_terms<R: Real>(&self, q: &[R], qdot: &[R], u: &[R]) -> Result<MechTerms<R>> {
        let n = self.n_q();
        check_len("q", n, q.len())?;
        check_len("qdot", n, qdot.len())?;
        check_len("u", self.n_u(), u.len())?;
        let mass_matrix = self.mass_matrix(q);
        let mut mass_jacobian = vec![R::zero(); n * n * n];
        let mut potential_gradient = Vec::with_capacity(n);
        for k in 0..n {
            let qd: Vec<Dual<R>> = (0..n).map(|i| if i == k { Dual::variable(q[i]) } else { Dual::constant(q[i]) }).collect();
            let dm = self.mass_matrix(&qd);
            for (ij, d) in dm.iter().enumerate() {
                mass_jacobian[ij * n + k] = d.eps;
            }
            potential_gradient.push(self.potential(&qd).eps);
        }
        let b = self.input_jacobian(q);
        let friction = self.friction();
        let m = self.n_u();
        let force = (0..n)
            .map(|i| {
                let mut f = qdot[i] * -friction[i];
                for j in 0..m {
                    f = f + b[i * m + j] * u[j];
                }
                f
            })
            .collect();
        Ok(MechTerms { n, mass_matrix, mass_jacobian, potential_gradient, force })
    }

    pub fn truth_accel<R: Real>(&self, q: &[R], qdot: &[R], u: &[R]) -> Result<Vec<R>> {
        let terms = self.truth_terms(q, qdot, u)?;
        mechanics::forward_dynamics(&terms, qdot).map_err(|e| with_state(e, q))
    }

    /// Continuous-time state derivative `[q'; q'']` for `x = [q; q']`.
    pub fn dynamics<R: Real>(&self, x: &[R], u: &[R]) -> Result<Vec<R>> {
        let n = self.n_q();
        check_len("state", 2 * n, x.len())?;
        let (q, qd) = x.split_at(n);
        let qdd = self.truth_accel(q, qd, u)?;
        let mut dx = qd.to_vec();
        dx.extend(qdd);
        Ok(dx)
    }

    /// One discrete step of the true simulator.
    pub fn step<R: Real>(&self, x: &[R], u: &[R], disc: &Discretization) -> Result<Vec<R>> {
        disc.step(|x: &[R], u: &[R]| self.dynamics(x, u), x, u)
    }

    pub fn truth_step(&self, state: &MechState, u: &[f64], disc: &Discretization) -> Result<MechState> {
        let x = self.step(&state.to_vector(), u, disc)?;
        Ok(MechState::from_vector(&x)?)
    }

    pub fn rollout(&self, x0: &[f64], inputs: &[Vec<f64>], disc: &Discretization) -> Result<Vec<Vec<f64>>> {
        integrators::rollout(disc, |x: &[f64], u: &[f64]| self.dynamics(x, u), x0, inputs)
    }

    pub fn kinetic_energy(&self, x: &[f64]) -> f64 {
        let n = self.n_q();
        mechanics::kinetic_energy(&self.mass_matrix(&x[..n]), &x[n..])
    }

    pub fn total_energy(&self, x: &[f64]) -> f64 {
        let n = self.n_q();
        mechanics::total_energy(&self.mass_matrix(&x[..n]), &x[n..], self.potential(&x[..n]))
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Mech(MechError::Shape { what, expected, got }));
    }
    Ok(())
}

fn with_state<R: Real>(e: MechError, q: &[R]) -> Error {
    match e {
        MechError::NotPositiveDefinite { pivot, value, qdot, .. } => Error::Mech(MechError::NotPositiveDefinite {
            pivot,
            value,
            q: q.iter().map(Real::primal).collect(),
            qdot,
        }),
        other => Error::Mech(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for k in SystemKind::BENCHMARKS {
            assert_eq!(SystemKind::from_name(k.name()).unwrap(), k);
        }
        assert!(SystemKind::from_name("quadrotor").is_err());
    }

    #[test]
    fn dimensions() {
        let dims: Vec<usize> = SystemKind::BENCHMARKS.iter().map(|k| k.n_q()).collect();
        assert_eq!(dims, vec![2, 2, 2, 3]);
        for k in SystemKind::BENCHMARKS {
            let s = SystemSpec::new(k);
            assert_eq!(s.n_u(), 1);
            s.validate().unwrap();
        }
    }

    #[test]
    fn parameter_overrides_are_validated() {
        let s = SystemSpec::new(SystemKind::Cartpole);
        assert!(s.clone().with_param("pole_mass", -1.0).is_err());
        assert!(s.clone().with_param("wheel_radius", 1.0).is_err());
        assert_eq!(s.with_param("pole_mass", 0.3).unwrap().param("pole_mass"), 0.3);
    }

    #[test]
    fn cartpole_rests_at_home() {
        let s = SystemSpec::new(SystemKind::Cartpole);
        let qdd = s.truth_accel(&[0.0, 0.0], &[0.0, 0.0], &[0.0]).unwrap();
        assert_eq!(qdd, vec![0.0, 0.0]);
    }

    #[test]
    fn acrobot_is_actuated_at_the_elbow() {
        let s = SystemSpec::new(SystemKind::Acrobot);
        for q in [[0.0, 0.0], [1.0, -2.0], [3.0, 0.5]] {
            assert_eq!(s.input_jacobian(&q), vec![0.0, 1.0]);
        }
    }

    #[test]
    fn truth_terms_shape_errors() {
        let s = SystemSpec::new(SystemKind::Furuta);
        assert!(s.truth_terms(&[0.0], &[0.0, 0.0], &[0.0]).is_err());
        assert!(s.truth_terms(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]).is_err());
    }
}
