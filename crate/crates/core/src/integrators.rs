//! Fixed-step explicit integrators turning continuous-time dynamics
//! `x' = f(x, u)` into a discrete-time map with `u` held constant.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::Real;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Scheme {
    Euler,
    Midpoint,
    #[default]
    Rk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Midpoint => "midpoint",
            Scheme::Rk4 => "rk4",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "euler" => Scheme::Euler,
            "midpoint" => Scheme::Midpoint,
            "rk4" => Scheme::Rk4,
            _ => return None,
        })
    }
}

/// Timestep `dt` split into `substeps` equal steps of `scheme`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    pub dt: f64,
    pub substeps: usize,
    pub scheme: Scheme,
}

impl Discretization {
    pub fn rk4(dt: f64) -> Self {
        Discretization { dt, substeps: 1, scheme: Scheme::Rk4 }
    }

    pub fn with_substeps(self, substeps: usize) -> Self {
        Discretization { substeps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("timestep must be positive, got {}", self.dt)));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        Ok(())
    }

    /// One step of length `dt` (all substeps).
    pub fn step<R, F>(&self, mut f: F, x: &[R], u: &[R]) -> Result<Vec<R>>
    where
        R: Real,
        F: FnMut(&[R], &[R]) -> Result<Vec<R>>,
    {
        self.validate()?;
        let h = self.dt / self.substeps as f64;
        let mut x = x.to_vec();
        for _ in 0..self.substeps {
            x = match self.scheme {
                Scheme::Rk4 => rk4_step(&mut f, &x, u, h)?,
                Scheme::Euler => euler_step(&mut f, &x, u, h)?,
                Scheme::Midpoint => midpoint_step(&mut f, &x, u, h)?,
            };
        }
        Ok(x)
    }
}

fn axpy<R: Real>(x: &[R], k: &[R], h: f64) -> Vec<R> {
    x.iter().zip(k).map(|(&a, &b)| a + b * h).collect()
}

fn stage<R, F>(f: &mut F, x: &[R], u: &[R], name: &str) -> Result<Vec<R>>
where
    R: Real,
    F: FnMut(&[R], &[R]) -> Result<Vec<R>>,
{
    let k = f(x, u)?;
    if k.len() != x.len() {
        return Err(invalid(format!("dynamics returned {} entries for a {}-dim state", k.len(), x.len())));
    }
    if !k.iter().all(Real::all_finite) {
        return Err(Error::NonFinite(format!("integrator stage {name}")));
    }
    Ok(k)
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<R, F>(mut f: F, x: &[R], u: &[R], dt: f64) -> Result<Vec<R>>
where
    R: Real,
    F: FnMut(&[R], &[R]) -> Result<Vec<R>>,
{
    if !(dt > 0.0) {
        return Err(invalid(format!("timestep must be positive, got {dt}")));
    }
    let k1 = stage(&mut f, x, u, "k1")?;
    let k2 = stage(&mut f, &axpy(x, &k1, dt / 2.0), u, "k2")?;
    let k3 = stage(&mut f, &axpy(x, &k2, dt / 2.0), u, "k3")?;
    let k4 = stage(&mut f, &axpy(x, &k3, dt), u, "k4")?;
    Ok((0..x.len())
        .map(|i| x[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
        .collect())
}

pub fn euler_step<R, F>(mut f: F, x: &[R], u: &[R], dt: f64) -> Result<Vec<R>>
where
    R: Real,
    F: FnMut(&[R], &[R]) -> Result<Vec<R>>,
{
    let k1 = stage(&mut f, x, u, "k1")?;
    Ok(axpy(x, &k1, dt))
}

pub fn midpoint_step<R, F>(mut f: F, x: &[R], u: &[R], dt: f64) -> Result<Vec<R>>
where
    R: Real,
    F: FnMut(&[R], &[R]) -> Result<Vec<R>>,
{
    let k1 = stage(&mut f, x, u, "k1")?;
    let k2 = stage(&mut f, &axpy(x, &k1, dt / 2.0), u, "k2")?;
    Ok(axpy(x, &k2, dt))
}

/// States `x_1 = x0, x_{t+1} = step(x_t, u_t)`; length `inputs.len() + 1`.
pub fn rollout<F>(disc: &Discretization, mut f: F, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let mut xs = Vec::with_capacity(inputs.len() + 1);
    xs.push(x0.to_vec());
    for (t, u) in inputs.iter().enumerate() {
        let next = disc
            .step(&mut f, &xs[t], u)
            .map_err(|e| Error::Rollout { step: t, source: Box::new(e) })?;
        xs.push(next);
    }
    Ok(xs)
}
