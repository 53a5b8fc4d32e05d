//! Reverse-mode tape over dense row-major matrices.
//!
//! Every node holds a `rows x cols` block. Scalar arithmetic (the [`Real`]
//! impl for [`Var`]) is elementwise, so a `batch x 1` column behaves like a
//! vector of independent scalars; this is how whole minibatches flow through
//! the mechanics code in one pass. Matrix products exist only in the fused
//! [`Tape::affine`] node used by network layers.
//!
//! Forward-mode tangents of a network are recorded as ordinary nodes
//! ([`Tape::act_jvp`]), so a backward sweep differentiates through them and
//! yields the mixed second derivatives the structured models need.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use super::mlp::Activation;
use super::real::{sigmoid_f64, softplus_f64, Real};
use super::AdError;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Offset(usize),
    Scale(usize, f64),
    Recip(usize),
    Sin(usize),
    Cos(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    Softplus(usize),
    Sigmoid(usize),
    Relu(usize),
    Affine { x: usize, w: usize, b: Option<usize> },
    ActJvp { post: usize, tangent: usize, act: Activation },
    Concat(Vec<usize>),
    Col(usize, usize),
    Sum(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(_) => "neg",
            Op::Offset(_) => "offset",
            Op::Scale(..) => "scale",
            Op::Recip(..) => "recip",
            Op::Sin(_) => "sin",
            Op::Cos(_) => "cos",
            Op::Tanh(_) => "tanh",
            Op::Exp(_) => "exp",
            Op::Ln(_) => "ln",
            Op::Sqrt(_) => "sqrt",
            Op::Softplus(_) => "softplus",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::Affine { .. } => "affine",
            Op::ActJvp { .. } => "act_jvp",
            Op::Concat(_) => "concat",
            Op::Col(..) => "col",
            Op::Sum(_) => "sum",
        }
    }
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    grad: bool,
}

/// A single-threaded recording of a computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a tape node, or a tape-free constant that broadcasts against
/// any shape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    id: usize,
    c: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            None => write!(f, "Var::Const({})", self.c),
            Some(t) => {
                let nodes = t.nodes.borrow();
                let n = &nodes[self.id];
                write!(f, "Var#{}[{}x{} {}]", self.id, n.rows, n.cols, n.op.name())
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, rows: usize, cols: usize, value: Vec<f64>, op: Op, grad: bool) -> Var<'_> {
        debug_assert_eq!(value.len(), rows * cols);
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node { rows, cols, value, op, grad });
        Var { tape: Some(self), id, c: 0.0 }
    }

    /// Row-major leaf. `grad` marks it as a differentiation target.
    pub fn leaf(&self, rows: usize, cols: usize, value: Vec<f64>, grad: bool) -> Var<'_> {
        assert_eq!(value.len(), rows * cols, "leaf data does not match shape");
        self.push(rows, cols, value, Op::Leaf, grad)
    }

    /// Differentiable column vector.
    pub fn var_col(&self, value: Vec<f64>) -> Var<'_> {
        let n = value.len();
        self.leaf(n, 1, value, true)
    }

    /// Non-differentiable column vector (data).
    pub fn data_col(&self, value: Vec<f64>) -> Var<'_> {
        let n = value.len();
        self.leaf(n, 1, value, false)
    }

    /// Scalar leaf (1x1).
    pub fn var(&self, value: f64) -> Var<'_> {
        self.leaf(1, 1, vec![value], true)
    }

    fn grad_of(&self, id: usize) -> bool {
        self.nodes.borrow()[id].grad
    }

    fn shape_of(&self, id: usize) -> (usize, usize) {
        let n = &self.nodes.borrow()[id];
        (n.rows, n.cols)
    }

    fn unary(&self, a: usize, op: Op, f: impl Fn(f64) -> f64) -> Var<'_> {
        let (rows, cols, value, grad) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[a];
            (n.rows, n.cols, n.value.iter().map(|&x| f(x)).collect(), n.grad)
        };
        self.push(rows, cols, value, op, grad)
    }

    fn binary(&self, a: usize, b: usize, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'_> {
        let (rows, cols, value, grad) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a], &nodes[b]);
            assert!(
                na.rows == nb.rows && na.cols == nb.cols,
                "elementwise shape mismatch: {}x{} vs {}x{}",
                na.rows,
                na.cols,
                nb.rows,
                nb.cols
            );
            let value = na.value.iter().zip(&nb.value).map(|(&x, &y)| f(x, y)).collect();
            (na.rows, na.cols, value, na.grad || nb.grad)
        };
        self.push(rows, cols, value, op, grad)
    }

    /// `x * w^T + b` for `x: n x in`, `w: out x in` (row-major), `b: 1 x out`.
    pub fn affine<'t>(&'t self, x: Var<'t>, w: Var<'t>, b: Option<Var<'t>>) -> Var<'t> {
        let (xi, wi) = (self.id_of(x), self.id_of(w));
        let bi = b.map(|b| self.id_of(b));
        let (rows, out, value, grad) = {
            let nodes = self.nodes.borrow();
            let (nx, nw) = (&nodes[xi], &nodes[wi]);
            assert_eq!(nx.cols, nw.cols, "affine: input width {} vs weight width {}", nx.cols, nw.cols);
            let (rows, inp, out) = (nx.rows, nx.cols, nw.rows);
            let mut value = vec![0.0; rows * out];
            let mut grad = nx.grad || nw.grad;
            if let Some(bi) = bi {
                let nb = &nodes[bi];
                assert_eq!(nb.value.len(), out, "affine: bias length");
                for r in 0..rows {
                    value[r * out..(r + 1) * out].copy_from_slice(&nb.value);
                }
                grad |= nb.grad;
            }
            // Y (rows x out) = X (rows x inp) . W^T (inp x out)
            gemm(rows, inp, out, &nx.value, inp, 1, &nw.value, 1, inp, &mut value, out, 1.0);
            (rows, out, value, grad)
        };
        self.push(rows, out, value, Op::Affine { x: xi, w: wi, b: bi }, grad)
    }

    /// Tangent propagation through an activation: `act'(pre) * tangent`,
    /// where `post = act(pre)` is the node produced by [`Var::activate`].
    pub fn act_jvp<'t>(&'t self, post: Var<'t>, tangent: Var<'t>, act: Activation) -> Var<'t> {
        let (pi, ti) = (self.id_of(post), self.id_of(tangent));
        let (rows, cols, value, grad) = {
            let nodes = self.nodes.borrow();
            let (np, nt) = (&nodes[pi], &nodes[ti]);
            assert!(np.rows == nt.rows && np.cols == nt.cols, "act_jvp shape mismatch");
            let value = np.value.iter().zip(&nt.value).map(|(&y, &t)| act_slope(act, y) * t).collect();
            (np.rows, np.cols, value, np.grad || nt.grad)
        };
        self.push(rows, cols, value, Op::ActJvp { post: pi, tangent: ti, act }, grad)
    }

    /// Horizontal concatenation of `rows x c_i` blocks; constants become
    /// `rows x 1` columns.
    pub fn concat<'t>(&'t self, parts: &[Var<'t>], rows: usize) -> Var<'t> {
        let ids: Vec<usize> = parts.iter().map(|p| self.materialize(*p, rows)).collect();
        let (cols, value, grad) = {
            let nodes = self.nodes.borrow();
            let cols: usize = ids.iter().map(|&i| nodes[i].cols).sum();
            let mut value = vec![0.0; rows * cols];
            let mut off = 0;
            let mut grad = false;
            for &i in &ids {
                let n = &nodes[i];
                assert_eq!(n.rows, rows, "concat: row mismatch");
                for r in 0..rows {
                    value[r * cols + off..r * cols + off + n.cols]
                        .copy_from_slice(&n.value[r * n.cols..(r + 1) * n.cols]);
                }
                off += n.cols;
                grad |= n.grad;
            }
            (cols, value, grad)
        };
        self.push(rows, cols, value, Op::Concat(ids), grad)
    }

    fn materialize(&self, v: Var<'_>, rows: usize) -> usize {
        match v.tape {
            Some(t) => {
                debug_assert!(core::ptr::eq(t, self), "var from a different tape");
                v.id
            }
            None => self.push(rows, 1, vec![v.c; rows], Op::Leaf, false).id,
        }
    }

    fn id_of(&self, v: Var<'_>) -> usize {
        match v.tape {
            Some(t) => {
                debug_assert!(core::ptr::eq(t, self), "var from a different tape");
                v.id
            }
            None => panic!("matrix operation on a tape-free constant"),
        }
    }

    /// First node holding a non-finite entry, with its operation name.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .borrow()
            .iter()
            .enumerate()
            .find(|(_, n)| n.value.iter().any(|v| !v.is_finite()))
            .map(|(i, n)| (i, n.op.name()))
    }

    pub fn check_finite(&self) -> Result<(), AdError> {
        match self.first_non_finite() {
            None => Ok(()),
            Some((node, op)) => Err(AdError::NonFinite { node, op: String::from(op) }),
        }
    }

    /// Backward sweep from `output`, seeded with ones (or `seed`).
    pub fn gradients(&self, output: Var<'_>, seed: Option<&[f64]>) -> Gradients {
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(nodes.len(), || None);
        let Some(out) = output.tape.map(|_| output.id) else {
            return Gradients { grads };
        };
        let len = nodes[out].value.len();
        let g0 = match seed {
            Some(s) => {
                assert_eq!(s.len(), len, "seed length");
                s.to_vec()
            }
            None => vec![1.0; len],
        };
        grads[out] = Some(g0);
        for id in (0..=out).rev() {
            let Some(g) = grads[id].take() else { continue };
            if nodes[id].grad {
                backprop(&nodes, id, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        Gradients { grads }
    }
}

fn act_slope(act: Activation, y: f64) -> f64 {
    match act {
        Activation::Tanh => 1.0 - y * y,
        Activation::Softplus => -libm::expm1(-y),
        Activation::Relu => {
            if y > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Identity => 1.0,
    }
}

fn act_curvature(act: Activation, y: f64) -> f64 {
    // d/dy of act_slope(y)
    match act {
        Activation::Tanh => -2.0 * y,
        Activation::Softplus => libm::exp(-y),
        Activation::Relu | Activation::Identity => 0.0,
    }
}

fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], id: usize) -> Option<&'a mut Vec<f64>> {
    if !nodes[id].grad {
        return None;
    }
    let len = nodes[id].value.len();
    Some(grads[id].get_or_insert_with(|| vec![0.0; len]))
}

fn backprop(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let node = &nodes[id];
    let y = &node.value;
    macro_rules! each {
        ($a:expr, |$i:ident| $e:expr) => {
            if let Some(ga) = slot(nodes, grads, $a) {
                for $i in 0..ga.len() {
                    ga[$i] += $e;
                }
            }
        };
    }
    match node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            each!(a, |i| g[i]);
            each!(b, |i| g[i]);
        }
        Op::Sub(a, b) => {
            each!(a, |i| g[i]);
            each!(b, |i| -g[i]);
        }
        Op::Mul(a, b) => {
            let (va, vb) = (&nodes[a].value, &nodes[b].value);
            each!(a, |i| g[i] * vb[i]);
            each!(b, |i| g[i] * va[i]);
        }
        Op::Div(a, b) => {
            let vb = &nodes[b].value;
            each!(a, |i| g[i] / vb[i]);
            each!(b, |i| -g[i] * y[i] / vb[i]);
        }
        Op::Neg(a) => each!(a, |i| -g[i]),
        Op::Offset(a) => each!(a, |i| g[i]),
        Op::Scale(a, c) => each!(a, |i| c * g[i]),
        Op::Recip(a) => {
            let va = &nodes[a].value;
            each!(a, |i| -g[i] * y[i] / va[i]);
        }
        Op::Sin(a) => {
            let va = &nodes[a].value;
            each!(a, |i| g[i] * libm::cos(va[i]));
        }
        Op::Cos(a) => {
            let va = &nodes[a].value;
            each!(a, |i| -g[i] * libm::sin(va[i]));
        }
        Op::Tanh(a) => each!(a, |i| g[i] * (1.0 - y[i] * y[i])),
        Op::Exp(a) => each!(a, |i| g[i] * y[i]),
        Op::Ln(a) => {
            let va = &nodes[a].value;
            each!(a, |i| g[i] / va[i]);
        }
        Op::Sqrt(a) => each!(a, |i| g[i] * 0.5 / y[i]),
        Op::Softplus(a) => each!(a, |i| g[i] * -libm::expm1(-y[i])),
        Op::Sigmoid(a) => each!(a, |i| g[i] * y[i] * (1.0 - y[i])),
        Op::Relu(a) => each!(a, |i| if y[i] > 0.0 { g[i] } else { 0.0 }),
        Op::Affine { x, w, b } => {
            let (nx, nw) = (&nodes[x], &nodes[w]);
            let (rows, inp, out) = (nx.rows, nx.cols, nw.rows);
            if let Some(gx) = slot(nodes, grads, x) {
                // dX (rows x inp) += G (rows x out) . W (out x inp)
                gemm(rows, out, inp, g, out, 1, &nw.value, inp, 1, gx, inp, 1.0);
            }
            if let Some(gw) = slot(nodes, grads, w) {
                // dW (out x inp) += G^T (out x rows) . X (rows x inp)
                gemm(out, rows, inp, g, 1, out, &nx.value, inp, 1, gw, inp, 1.0);
            }
            if let Some(b) = b {
                if let Some(gb) = slot(nodes, grads, b) {
                    for r in 0..rows {
                        for (acc, gi) in gb.iter_mut().zip(&g[r * out..(r + 1) * out]) {
                            *acc += gi;
                        }
                    }
                }
            }
        }
        Op::ActJvp { post, tangent, act } => {
            let (vp, vt) = (&nodes[post].value, &nodes[tangent].value);
            each!(tangent, |i| g[i] * act_slope(act, vp[i]));
            if !matches!(act, Activation::Relu | Activation::Identity) {
                each!(post, |i| g[i] * act_curvature(act, vp[i]) * vt[i]);
            }
        }
        Op::Concat(ref parts) => {
            let (rows, cols) = (node.rows, node.cols);
            let mut off = 0;
            for &p in parts {
                let pc = nodes[p].cols;
                if let Some(gp) = slot(nodes, grads, p) {
                    for r in 0..rows {
                        for c in 0..pc {
                            gp[r * pc + c] += g[r * cols + off + c];
                        }
                    }
                }
                off += pc;
            }
        }
        Op::Col(a, j) => {
            let cols = nodes[a].cols;
            if let Some(ga) = slot(nodes, grads, a) {
                for (r, gi) in g.iter().enumerate() {
                    ga[r * cols + j] += gi;
                }
            }
        }
        Op::Sum(a) => each!(a, |_i| g[0]),
    }
}

/// `C += A . B` with explicit strides (`A: m x k`, `B: k x n`, `C: m x n`
/// row-major with row stride `ldc`).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    ldc: usize,
    beta: f64,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa, "gemm: A too short");
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb, "gemm: B too short");
    assert!(c.len() >= (m - 1) * ldc + n, "gemm: C too short");
    // SAFETY: the asserts above bound every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the swept output with respect to `v`, or `None` when `v`
    /// is a constant or does not influence the output.
    pub fn wrt(&self, v: &Var<'_>) -> Option<&[f64]> {
        v.tape?;
        self.grads.get(v.id)?.as_deref()
    }

    /// Like [`Gradients::wrt`] but returns zeros of length `len` when absent.
    pub fn wrt_or_zero(&self, v: &Var<'_>, len: usize) -> Vec<f64> {
        match self.wrt(v) {
            Some(g) => g.to_vec(),
            None => vec![0.0; len],
        }
    }
}

impl<'t> Var<'t> {
    pub const fn constant(c: f64) -> Self {
        Var { tape: None, id: 0, c }
    }

    pub fn is_const(&self) -> bool {
        self.tape.is_none()
    }

    pub fn tape(&self) -> Option<&'t Tape> {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        match self.tape {
            None => (1, 1),
            Some(t) => t.shape_of(self.id),
        }
    }

    /// Row-major copy of the value; constants yield a single entry.
    pub fn values(&self) -> Vec<f64> {
        match self.tape {
            None => vec![self.c],
            Some(t) => t.nodes.borrow()[self.id].value.clone(),
        }
    }

    /// Value broadcast to `rows` entries (columns only).
    pub fn column_values(&self, rows: usize) -> Vec<f64> {
        match self.tape {
            None => vec![self.c; rows],
            Some(t) => {
                let nodes = t.nodes.borrow();
                let n = &nodes[self.id];
                assert_eq!((n.rows, n.cols), (rows, 1), "column_values on non-column");
                n.value.clone()
            }
        }
    }

    pub fn requires_grad(&self) -> bool {
        match self.tape {
            None => false,
            Some(t) => t.grad_of(self.id),
        }
    }

    /// Column `j` as a `rows x 1` node.
    pub fn col(self, j: usize) -> Var<'t> {
        let t = self.tape.expect("col of a constant");
        let (rows, cols, value, grad) = {
            let nodes = t.nodes.borrow();
            let n = &nodes[self.id];
            assert!(j < n.cols, "column {} out of range {}", j, n.cols);
            if n.cols == 1 {
                drop(nodes);
                return self;
            }
            (n.rows, n.cols, (0..n.rows).map(|r| n.value[r * n.cols + j]).collect(), n.grad)
        };
        let _ = cols;
        t.push(rows, 1, value, Op::Col(self.id, j), grad)
    }

    /// Sum of all entries as a 1x1 node.
    pub fn sum(self) -> Var<'t> {
        match self.tape {
            None => self,
            Some(t) => {
                let (s, grad) = {
                    let nodes = t.nodes.borrow();
                    let n = &nodes[self.id];
                    (n.value.iter().sum::<f64>(), n.grad)
                };
                t.push(1, 1, vec![s], Op::Sum(self.id), grad)
            }
        }
    }

    pub fn activate(self, act: Activation) -> Var<'t> {
        match act {
            Activation::Tanh => Real::tanh(self),
            Activation::Softplus => Real::softplus(self),
            Activation::Relu => Real::relu(self),
            Activation::Identity => self,
        }
    }

    fn unary(self, op: fn(usize) -> Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        match self.tape {
            None => Var::constant(f(self.c)),
            Some(t) => t.unary(self.id, op(self.id), f),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $node:ident, $f:expr, |$a:ident, $c:ident| $lhs_const:expr, |$c2:ident, $b:ident| $rhs_const:expr) => {
        impl<'t> $trait for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                match (self.tape, rhs.tape) {
                    (None, None) => Var::constant($f(self.c, rhs.c)),
                    (Some(_), None) => {
                        let ($a, $c) = (self, rhs.c);
                        $lhs_const
                    }
                    (None, Some(_)) => {
                        let ($c2, $b) = (self.c, rhs);
                        $rhs_const
                    }
                    (Some(t), Some(_)) => t.binary(self.id, rhs.id, Op::$node(self.id, rhs.id), $f),
                }
            }
        }
        impl<'t> $trait<f64> for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: f64) -> Var<'t> {
                $trait::$method(self, Var::constant(rhs))
            }
        }
    };
}

fn offset<'t>(a: Var<'t>, c: f64) -> Var<'t> {
    if c == 0.0 {
        return a;
    }
    a.unary(Op::Offset, move |x| x + c)
}

fn scale<'t>(a: Var<'t>, c: f64) -> Var<'t> {
    if c == 1.0 {
        return a;
    }
    match a.tape {
        None => Var::constant(a.c * c),
        Some(t) => t.unary(a.id, Op::Scale(a.id, c), move |x| c * x),
    }
}

fn recip<'t>(a: Var<'t>, c: f64) -> Var<'t> {
    match a.tape {
        None => Var::constant(c / a.c),
        Some(t) => t.unary(a.id, Op::Recip(a.id), move |x| c / x),
    }
}

binop!(Add, add, Add, |x: f64, y: f64| x + y, |a, c| offset(a, c), |c, b| offset(b, c));
binop!(Sub, sub, Sub, |x: f64, y: f64| x - y, |a, c| offset(a, -c), |c, b| offset(-b, c));
binop!(Mul, mul, Mul, |x: f64, y: f64| x * y, |a, c| scale(a, c), |c, b| scale(b, c));
binop!(Div, div, Div, |x: f64, y: f64| x / y, |a, c| scale(a, 1.0 / c), |c, b| recip(b, c));

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(Op::Neg, |x| -x)
    }
}

impl<'t> Real for Var<'t> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    fn sin(self) -> Self {
        self.unary(Op::Sin, libm::sin)
    }
    fn cos(self) -> Self {
        self.unary(Op::Cos, libm::cos)
    }
    fn tanh(self) -> Self {
        self.unary(Op::Tanh, libm::tanh)
    }
    fn exp(self) -> Self {
        self.unary(Op::Exp, libm::exp)
    }
    fn ln(self) -> Self {
        self.unary(Op::Ln, libm::log)
    }
    fn sqrt(self) -> Self {
        self.unary(Op::Sqrt, libm::sqrt)
    }
    fn softplus(self) -> Self {
        self.unary(Op::Softplus, softplus_f64)
    }
    fn sigmoid(self) -> Self {
        self.unary(Op::Sigmoid, sigmoid_f64)
    }
    fn relu(self) -> Self {
        self.unary(Op::Relu, |x| if x > 0.0 { x } else { 0.0 })
    }
    fn heaviside(self) -> Self {
        match self.tape {
            None => Var::constant(if self.c > 0.0 { 1.0 } else { 0.0 }),
            Some(t) => {
                let (rows, cols, value) = {
                    let nodes = t.nodes.borrow();
                    let n = &nodes[self.id];
                    (n.rows, n.cols, n.value.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect())
                };
                t.leaf(rows, cols, value, false)
            }
        }
    }
    fn primal(&self) -> f64 {
        match self.tape {
            None => self.c,
            Some(t) => t.nodes.borrow()[self.id].value[0],
        }
    }
    fn all_positive(&self) -> bool {
        match self.tape {
            None => self.c > 0.0,
            Some(t) => t.nodes.borrow()[self.id].value.iter().all(|&v| v > 0.0),
        }
    }
    fn all_finite(&self) -> bool {
        match self.tape {
            None => self.c.is_finite(),
            Some(t) => t.nodes.borrow()[self.id].value.iter().all(|v| v.is_finite()),
        }
    }
}
