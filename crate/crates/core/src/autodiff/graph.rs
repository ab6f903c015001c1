use std::borrow::Cow;

use super::matrix::Matrix;
use super::params::{GradStore, ParamId, ParameterStore};
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed primitive set. Composite layers (GRU, GAT, attention) are built
/// from these and never get their own backward rule.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    MatMul,
    /// Adds an `r x 1` column to every column of an `r x c` matrix.
    AddBroadcastColumn,
    Mul,
    Add,
    ConcatRows,
    Tanh,
    Sigmoid,
    LeakyRelu(f64),
    Exp,
    Log,
    RowSoftmax,
    SumColumns,
    MeanColumns,
    RowSelect(Vec<usize>),
    ScalarMul(f64),
    Transpose,
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::AddBroadcastColumn => "add-broadcast-column",
            Primitive::Mul => "elementwise-mul",
            Primitive::Add => "elementwise-add",
            Primitive::ConcatRows => "concat-rows",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::LeakyRelu(_) => "leaky-relu",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::RowSoftmax => "row-softmax",
            Primitive::SumColumns => "sum-columns",
            Primitive::MeanColumns => "mean-columns",
            Primitive::RowSelect(_) => "row-select",
            Primitive::ScalarMul(_) => "scalar-mul",
            Primitive::Transpose => "transpose",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Primitive::MatMul | Primitive::AddBroadcastColumn | Primitive::Mul | Primitive::Add => {
                Some(2)
            }
            Primitive::ConcatRows => None,
            _ => Some(1),
        }
    }
}

#[derive(Clone, Debug)]
enum Record {
    Constant,
    Input,
    Param(ParamId),
    Op(Primitive, Vec<Var>),
}

struct Node<'p> {
    value: Cow<'p, Matrix>,
    record: Record,
    requires_grad: bool,
}

/// A single-use computation graph. Parameters are borrowed from the store, so
/// any number of graphs may read the same store concurrently.
pub struct Graph<'p> {
    store: &'p ParameterStore,
    nodes: Vec<Node<'p>>,
    param_vars: Vec<Option<Var>>,
}

/// Per-node gradients from one backward pass.
pub struct NodeGrads {
    grads: Vec<Option<Matrix>>,
}

impl NodeGrads {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParameterStore) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(512),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParameterStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Matrix>, record: Record, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            record,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Cow::Owned(m), Record::Constant, false)
    }

    /// A leaf that receives a gradient but is not a stored parameter.
    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(Cow::Owned(m), Record::Input, true)
    }

    /// Loads a parameter; repeated loads return the same handle.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(Cow::Borrowed(self.store.value(id)), Record::Param(id), true);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn param_loaded(&self, id: ParamId) -> bool {
        self.param_vars[id.0].is_some()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Value of a 1x1 tensor.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.data()[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Operands of `v`, empty for leaves.
    pub fn operands(&self, v: Var) -> &[Var] {
        match &self.nodes[v.0].record {
            Record::Op(_, ops) => ops,
            _ => &[],
        }
    }

    /// Copies the current value into a new constant, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let m = self.value(v).clone();
        self.constant(m)
    }

    /// Applies one primitive. Operands are never mutated.
    pub fn apply(&mut self, kind: Primitive, operands: &[Var]) -> Result<Var> {
        let name = kind.name();
        if let Some(n) = kind.arity() {
            assert_eq!(operands.len(), n, "{name} arity");
        }
        let value = {
            let val = |i: usize| -> &Matrix { &self.nodes[operands[i].0].value };
            match &kind {
                Primitive::MatMul => {
                    let (a, b) = (val(0), val(1));
                    if a.cols() != b.rows() {
                        return Err(shape_err(name, a, b));
                    }
                    a.matmul(b)
                }
                Primitive::AddBroadcastColumn => {
                    let (m, v) = (val(0), val(1));
                    if v.cols() != 1 || v.rows() != m.rows() {
                        return Err(shape_err(name, m, v));
                    }
                    let mut out = m.clone();
                    let cols = m.cols();
                    for (r, chunk) in out.data_mut().chunks_mut(cols.max(1)).enumerate() {
                        let add = v.data()[r];
                        for x in chunk {
                            *x += add;
                        }
                    }
                    out
                }
                Primitive::Mul | Primitive::Add => {
                    let (a, b) = (val(0), val(1));
                    if a.shape() != b.shape() {
                        return Err(shape_err(name, a, b));
                    }
                    if kind == Primitive::Mul {
                        a.zip_map(b, |x, y| x * y)
                    } else {
                        a.zip_map(b, |x, y| x + y)
                    }
                }
                Primitive::ConcatRows => {
                    let first = val(0);
                    let cols = first.cols();
                    let mut data = Vec::new();
                    let mut rows = 0;
                    for i in 0..operands.len() {
                        let m = val(i);
                        if m.cols() != cols {
                            return Err(shape_err(name, first, m));
                        }
                        rows += m.rows();
                        data.extend_from_slice(m.data());
                    }
                    Matrix::from_vec(rows, cols, data)
                }
                Primitive::Tanh => val(0).map(f64::tanh),
                Primitive::Sigmoid => val(0).map(sigmoid),
                Primitive::LeakyRelu(slope) => {
                    let s = *slope;
                    val(0).map(|x| if x > 0.0 { x } else { s * x })
                }
                Primitive::Exp => val(0).map(f64::exp),
                Primitive::Log => {
                    let a = val(0);
                    if !a.is_finite() || a.data().iter().any(|&x| x < 0.0) {
                        return Err(Error::NonFinite { kind: name });
                    }
                    a.map(f64::ln)
                }
                Primitive::RowSoftmax => row_softmax(val(0)),
                Primitive::SumColumns | Primitive::MeanColumns => {
                    let a = val(0);
                    let div = if kind == Primitive::MeanColumns {
                        a.cols() as f64
                    } else {
                        1.0
                    };
                    let sums: Vec<f64> = (0..a.rows())
                        .map(|r| a.row_slice(r).iter().sum::<f64>() / div)
                        .collect();
                    Matrix::column(&sums)
                }
                Primitive::RowSelect(idx) => {
                    let table = val(0);
                    let mut data = Vec::with_capacity(idx.len() * table.cols());
                    for &i in idx {
                        if i >= table.rows() {
                            return Err(Error::Index {
                                kind: name,
                                index: i,
                                len: table.rows(),
                            });
                        }
                        data.extend_from_slice(table.row_slice(i));
                    }
                    Matrix::from_vec(idx.len(), table.cols(), data)
                }
                Primitive::ScalarMul(s) => {
                    let s = *s;
                    val(0).map(|x| s * x)
                }
                Primitive::Transpose => val(0).transpose(),
            }
        };
        let requires_grad = operands.iter().any(|o| self.nodes[o.0].requires_grad);
        Ok(self.push(
            Cow::Owned(value),
            Record::Op(kind, operands.to_vec()),
            requires_grad,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul, &[a, b])
    }
    pub fn add_broadcast_column(&mut self, m: Var, v: Var) -> Result<Var> {
        self.apply(Primitive::AddBroadcastColumn, &[m, v])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(Primitive::ConcatRows, parts)
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Tanh, &[a])
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sigmoid, &[a])
    }
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.apply(Primitive::LeakyRelu(slope), &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Exp, &[a])
    }
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Log, &[a])
    }
    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::RowSoftmax, &[a])
    }
    pub fn sum_columns(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::SumColumns, &[a])
    }
    pub fn mean_columns(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::MeanColumns, &[a])
    }
    pub fn row_select(&mut self, table: Var, rows: Vec<usize>) -> Result<Var> {
        self.apply(Primitive::RowSelect(rows), &[table])
    }
    pub fn scalar_mul(&mut self, a: Var, s: f64) -> Result<Var> {
        self.apply(Primitive::ScalarMul(s), &[a])
    }
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Transpose, &[a])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scalar_mul(b, -1.0)?;
        self.add(a, nb)
    }

    /// `w · x + b` for a column `x`.
    pub fn linear(&mut self, w: Var, x: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(w, x)?;
        match b {
            Some(b) => self.add(y, b),
            None => Ok(y),
        }
    }

    /// Sum of every entry, as a 1x1 tensor.
    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let rows = self.sum_columns(a)?;
        let n = self.shape(rows).0;
        let ones = self.constant(Matrix::filled(1, n, 1.0));
        self.matmul(ones, rows)
    }

    /// Sum of scalars; errors on an empty slice.
    pub fn sum_scalars(&mut self, xs: &[Var]) -> Result<Var> {
        let stacked = self.concat_rows(xs)?;
        self.sum_all(stacked)
    }

    /// Backpropagates from a 1x1 `loss` and accumulates parameter gradients
    /// into `grads`. Calling it again adds to the same store.
    pub fn backward(&self, loss: Var, grads: &mut GradStore) -> Result<NodeGrads> {
        self.backward_scaled(loss, 1.0, grads)
    }

    /// Like [`Graph::backward`] with the seed gradient set to `scale`.
    pub fn backward_scaled(
        &self,
        loss: Var,
        scale: f64,
        grads: &mut GradStore,
    ) -> Result<NodeGrads> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut node_grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        node_grads[loss.0] = Some(Matrix::filled(1, 1, scale));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = node_grads[idx].take() else {
                continue;
            };
            match &node.record {
                Record::Constant | Record::Input => {
                    node_grads[idx] = Some(g);
                }
                Record::Param(id) => {
                    grads.accumulate(*id, &g);
                    node_grads[idx] = Some(g);
                }
                Record::Op(kind, ops) => {
                    self.propagate(kind, ops, &node.value, &g, &mut node_grads);
                    node_grads[idx] = Some(g);
                }
            }
        }
        Ok(NodeGrads { grads: node_grads })
    }

    fn propagate(
        &self,
        kind: &Primitive,
        ops: &[Var],
        out: &Matrix,
        g: &Matrix,
        node_grads: &mut [Option<Matrix>],
    ) {
        let val = |v: Var| -> &Matrix { &self.nodes[v.0].value };
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        if let Primitive::MatMul = kind {
            let (a, b) = (ops[0], ops[1]);
            if needs(a) {
                match &mut node_grads[a.0] {
                    Some(acc) => acc.add_matmul_t(g, val(b)),
                    slot @ None => *slot = Some(g.matmul_t(val(b))),
                }
            }
            if needs(b) {
                let d = val(a).t_matmul(g);
                match &mut node_grads[b.0] {
                    Some(acc) => acc.add_assign(&d),
                    slot @ None => *slot = Some(d),
                }
            }
            return;
        }
        let mut send = |v: Var, contribution: Matrix| match &mut node_grads[v.0] {
            Some(acc) => acc.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        };
        match kind {
            Primitive::MatMul => unreachable!("handled above"),
            Primitive::AddBroadcastColumn => {
                let (m, v) = (ops[0], ops[1]);
                if needs(m) {
                    send(m, g.clone());
                }
                if needs(v) {
                    let sums: Vec<f64> = (0..g.rows()).map(|r| g.row_slice(r).iter().sum()).collect();
                    send(v, Matrix::column(&sums));
                }
            }
            Primitive::Mul => {
                let (a, b) = (ops[0], ops[1]);
                if needs(a) {
                    send(a, g.zip_map(val(b), |x, y| x * y));
                }
                if needs(b) {
                    send(b, g.zip_map(val(a), |x, y| x * y));
                }
            }
            Primitive::Add => {
                for &o in ops {
                    if needs(o) {
                        send(o, g.clone());
                    }
                }
            }
            Primitive::ConcatRows => {
                let cols = g.cols();
                let mut offset = 0;
                for &o in ops {
                    let rows = val(o).rows();
                    if needs(o) {
                        let slice = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                        send(o, Matrix::from_vec(rows, cols, slice));
                    }
                    offset += rows;
                }
            }
            Primitive::Tanh => send(ops[0], g.zip_map(out, |gi, y| gi * (1.0 - y * y))),
            Primitive::Sigmoid => send(ops[0], g.zip_map(out, |gi, y| gi * y * (1.0 - y))),
            Primitive::LeakyRelu(slope) => {
                let s = *slope;
                send(
                    ops[0],
                    g.zip_map(val(ops[0]), |gi, x| if x > 0.0 { gi } else { s * gi }),
                )
            }
            Primitive::Exp => send(ops[0], g.zip_map(out, |gi, y| gi * y)),
            Primitive::Log => send(ops[0], g.zip_map(val(ops[0]), |gi, x| gi / x)),
            Primitive::RowSoftmax => {
                let mut d = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let y = out.row_slice(r);
                    let gr = g.row_slice(r);
                    let dot: f64 = y
                        .iter()
                        .zip(gr)
                        .filter(|(p, _)| **p != 0.0)
                        .map(|(p, gi)| p * gi)
                        .sum();
                    for c in 0..out.cols() {
                        let p = y[c];
                        if p != 0.0 {
                            d.set(r, c, p * (gr[c] - dot));
                        }
                    }
                }
                send(ops[0], d)
            }
            Primitive::SumColumns | Primitive::MeanColumns => {
                let a = val(ops[0]);
                let div = if *kind == Primitive::MeanColumns {
                    a.cols() as f64
                } else {
                    1.0
                };
                let mut d = Matrix::zeros(a.rows(), a.cols());
                for r in 0..a.rows() {
                    let gr = g.data()[r] / div;
                    for c in 0..a.cols() {
                        d.set(r, c, gr);
                    }
                }
                send(ops[0], d)
            }
            Primitive::RowSelect(idx) => {
                let table = val(ops[0]);
                let mut d = Matrix::zeros(table.rows(), table.cols());
                let cols = table.cols();
                for (k, &i) in idx.iter().enumerate() {
                    let src = &g.data()[k * cols..(k + 1) * cols];
                    let dst = &mut d.data_mut()[i * cols..(i + 1) * cols];
                    for (x, y) in dst.iter_mut().zip(src) {
                        *x += y;
                    }
                }
                send(ops[0], d)
            }
            Primitive::ScalarMul(s) => {
                let s = *s;
                send(ops[0], g.map(|x| s * x))
            }
            Primitive::Transpose => send(ops[0], g.transpose()),
        }
    }
}

fn shape_err(kind: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape {
        kind,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of each row. `-inf` entries map to exactly 0.
pub fn row_softmax(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    let cols = a.cols();
    if cols == 0 {
        return out;
    }
    for row in out.data_mut().chunks_mut(cols) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    out
}
