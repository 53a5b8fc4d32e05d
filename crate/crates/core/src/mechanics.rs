//! Manipulator-equation assembly: `M(q) q'' = F - C(q, q') q' - G(q)`.
//!
//! All routines are generic over [`Real`] so they run unchanged on plain
//! floats, dual numbers, and batched tape columns.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Real;

/// Symmetry tolerance for mass matrices (absolute, max-norm).
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MechError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("mass matrix not positive definite (pivot {pivot} = {value:e}) at q = {q:?}, qdot = {qdot:?}")]
    NotPositiveDefinite { pivot: usize, value: f64, q: Vec<f64>, qdot: Vec<f64> },
    #[error("non-finite state entry: {0:?}")]
    NonFinite(Vec<f64>),
}

/// Generalized coordinates and velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct MechState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl MechState {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Result<Self, MechError> {
        if q.is_empty() {
            return Err(MechError::Shape { what: "state q", expected: 1, got: 0 });
        }
        if q.len() != qdot.len() {
            return Err(MechError::Shape { what: "state qdot", expected: q.len(), got: qdot.len() });
        }
        if q.iter().chain(&qdot).any(|v| !v.is_finite()) {
            let mut x = q;
            x.extend(qdot);
            return Err(MechError::NonFinite(x));
        }
        Ok(MechState { q, qdot })
    }

    /// Splits a `[q; qdot]` state vector.
    pub fn from_vector(x: &[f64]) -> Result<Self, MechError> {
        if x.len() % 2 != 0 {
            return Err(MechError::Shape { what: "state vector (even length)", expected: x.len() + 1, got: x.len() });
        }
        let n = x.len() / 2;
        MechState::new(x[..n].to_vec(), x[n..].to_vec())
    }

    pub fn n_q(&self) -> usize {
        self.q.len()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = self.q.clone();
        x.extend_from_slice(&self.qdot);
        x
    }
}

/// Terms of the manipulator equation at one configuration.
///
/// `mass_jacobian[(i * n + j) * n + k]` holds `dM_ij / dq_k`.
#[derive(Clone, Debug)]
pub struct MechTerms<R> {
    pub n: usize,
    pub mass_matrix: Vec<R>,
    pub mass_jacobian: Vec<R>,
    pub potential_gradient: Vec<R>,
    pub force: Vec<R>,
}

impl<R: Real> MechTerms<R> {
    pub fn check_shapes(&self) -> Result<(), MechError> {
        let n = self.n;
        let checks = [
            ("mass matrix", n * n, self.mass_matrix.len()),
            ("mass jacobian", n * n * n, self.mass_jacobian.len()),
            ("potential gradient", n, self.potential_gradient.len()),
            ("force", n, self.force.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(MechError::Shape { what, expected, got });
            }
        }
        Ok(())
    }
}

impl MechTerms<f64> {
    /// Max-norm asymmetry of `M` and of every `dM/dq_k` slice.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.mass_matrix[i * n + j] - self.mass_matrix[j * n + i]).abs());
                for k in 0..n {
                    let a = self.mass_jacobian[(i * n + j) * n + k];
                    let b = self.mass_jacobian[(j * n + i) * n + k];
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}

/// Christoffel symbol of the first kind,
/// `0.5 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i)`.
#[inline]
pub fn christoffel<R: Real>(mass_jacobian: &[R], n: usize, i: usize, j: usize, k: usize) -> R {
    let d = |a: usize, b: usize, c: usize| mass_jacobian[(a * n + b) * n + c];
    (d(i, j, k) + d(i, k, j) - d(j, k, i)) * 0.5
}

/// Coriolis and centrifugal force `c_i = sum_jk Gamma_ijk qdot_j qdot_k`.
pub fn coriolis_force<R: Real>(mass_jacobian: &[R], qdot: &[R]) -> Result<Vec<R>, MechError> {
    let n = qdot.len();
    if mass_jacobian.len() != n * n * n {
        return Err(MechError::Shape { what: "mass jacobian", expected: n * n * n, got: mass_jacobian.len() });
    }
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        let mut ci = R::zero();
        for j in 0..n {
            for k in 0..n {
                ci = ci + christoffel(mass_jacobian, n, i, j, k) * qdot[j] * qdot[k];
            }
        }
        c.push(ci);
    }
    Ok(c)
}

/// Lower Cholesky factor (row-major). On failure returns the failing pivot
/// index and its value.
pub fn cholesky<R: Real>(m: &[R], n: usize) -> Result<Vec<R>, (usize, f64)> {
    let mut l = vec![R::zero(); n * n];
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !d.all_positive() || !d.all_finite() {
            return Err((j, d.primal()));
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the lower factor.
pub fn cholesky_solve<R: Real>(l: &[R], b: &[R]) -> Vec<R> {
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] = y[i] - l[i * n + k] * y[k];
        }
        y[i] = y[i] / l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] = y[i] - l[k * n + i] * y[k];
        }
        y[i] = y[i] / l[i * n + i];
    }
    y
}

/// Generalized acceleration `M^{-1} (F - C q' - G)` via a Cholesky solve.
pub fn forward_dynamics<R: Real>(terms: &MechTerms<R>, qdot: &[R]) -> Result<Vec<R>, MechError> {
    terms.check_shapes()?;
    if qdot.len() != terms.n {
        return Err(MechError::Shape { what: "qdot", expected: terms.n, got: qdot.len() });
    }
    let c = coriolis_force(&terms.mass_jacobian, qdot)?;
    let rhs: Vec<R> = (0..terms.n).map(|i| terms.force[i] - c[i] - terms.potential_gradient[i]).collect();
    let l = cholesky(&terms.mass_matrix, terms.n).map_err(|(pivot, value)| MechError::NotPositiveDefinite {
        pivot,
        value,
        q: Vec::new(),
        qdot: qdot.iter().map(Real::primal).collect(),
    })?;
    Ok(cholesky_solve(&l, &rhs))
}

/// `0.5 q'^T M q'`.
pub fn kinetic_energy<R: Real>(mass_matrix: &[R], qdot: &[R]) -> R {
    let n = qdot.len();
    let mut t = R::zero();
    for i in 0..n {
        for j in 0..n {
            t = t + qdot[i] * mass_matrix[i * n + j] * qdot[j];
        }
    }
    t * 0.5
}

pub fn total_energy<R: Real>(mass_matrix: &[R], qdot: &[R], potential: R) -> R {
    kinetic_energy(mass_matrix, qdot) + potential
}
