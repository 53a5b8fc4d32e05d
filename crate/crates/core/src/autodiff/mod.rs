//! Automatic differentiation: a reverse-mode matrix tape, forward-mode duals
//! that nest inside it, and MLP building blocks.

mod dual;
pub mod mlp;
mod real;
mod tape;

use alloc::string::String;
use alloc::vec::Vec;

pub use dual::Dual;
pub use mlp::{mlp_apply, param_count, Activation, MlpParams, TapeMlp};
pub use real::Real;
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(&'static str),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("non-finite value at tape node {node} ({op})")]
    NonFinite { node: usize, op: String },
    #[error("function output is {rows}x{cols}, expected a scalar")]
    NotScalar { rows: usize, cols: usize },
}

/// Reverse-mode gradient of a scalar function: one recording sweep and one
/// backward sweep.
pub fn grad<F>(f: F, at: &[f64]) -> Result<Vec<f64>, AdError>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let xs: Vec<Var<'_>> = at.iter().map(|&v| tape.var(v)).collect();
    let y = f(&xs);
    let (rows, cols) = y.shape();
    if rows * cols != 1 {
        return Err(AdError::NotScalar { rows, cols });
    }
    tape.check_finite()?;
    let g = tape.gradients(y, None);
    Ok(xs.iter().map(|x| g.wrt(x).map_or(0.0, |s| s[0])).collect())
}

/// Forward-mode Jacobian `J[i][j] = d f_i / d x_j`, one dual pass per input
/// dimension. With `R = Var` the entries stay on the enclosing tape and can
/// be differentiated again by a backward sweep.
pub fn jacobian<R, F>(f: F, at: &[R]) -> Result<Vec<Vec<R>>, AdError>
where
    R: Real,
    F: Fn(&[Dual<R>]) -> Vec<Dual<R>>,
{
    let n = at.len();
    let mut cols: Vec<Vec<R>> = Vec::with_capacity(n);
    let mut m = None;
    for j in 0..n {
        let xs: Vec<Dual<R>> = at
            .iter()
            .enumerate()
            .map(|(i, &v)| if i == j { Dual::variable(v) } else { Dual::constant(v) })
            .collect();
        let ys = f(&xs);
        if let Some(node) = ys.iter().position(|y| !y.all_finite()) {
            return Err(AdError::NonFinite { node, op: String::from("jacobian output") });
        }
        if *m.get_or_insert(ys.len()) != ys.len() {
            return Err(AdError::Shape { what: "jacobian output", expected: m.unwrap(), got: ys.len() });
        }
        cols.push(ys.into_iter().map(|d| d.eps).collect());
    }
    let m = m.unwrap_or(0);
    Ok((0..m).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

/// Hessian by forward-over-reverse: row `k` is the reverse-mode gradient of
/// the dual tangent `d f / d x_k`; equivalently the Jacobian of [`grad`].
pub fn hessian<F>(f: F, at: &[f64]) -> Result<Vec<Vec<f64>>, AdError>
where
    F: for<'t> Fn(&[Dual<Var<'t>>]) -> Dual<Var<'t>>,
{
    let n = at.len();
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let tape = Tape::new();
        let leaves: Vec<Var<'_>> = at.iter().map(|&v| tape.var(v)).collect();
        let xs: Vec<Dual<Var<'_>>> = leaves
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::new(v, Var::constant(if i == k { 1.0 } else { 0.0 })))
            .collect();
        let y = f(&xs);
        tape.check_finite()?;
        let g = tape.gradients(y.eps, None);
        rows.push(leaves.iter().map(|x| g.wrt(x).map_or(0.0, |s| s[0])).collect());
    }
    Ok(rows)
}
