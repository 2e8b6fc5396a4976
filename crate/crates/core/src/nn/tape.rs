//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Every operation records its inputs and caches its forward value. Parameters are
//! referenced by id and read from the [`ParameterStore`] without copying; a backward
//! pass returns their gradients as a sparse [`Gradients`] map. The tape is append-only,
//! so node order is already a topological order.

use super::{Gradients, Matrix, ParamId, ParameterStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Param(ParamId),
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    /// `a + row`, the 1×c row broadcast over every row of `a`.
    AddRow(Var, Var),
    Mul(Var, Var),
    /// `a ⊙ row`, broadcast like [`Op::AddRow`].
    MulRow(Var, Var),
    /// Row i of `a` times the scalar `s[i]`, with `s: n×1`.
    ScaleRows(Var, Var),
    ScalarMul(Var, f64),
    MatMul(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Relu(Var),
    Sigmoid(Var),
    Sqrt(Var),
    ClampMin(Var, f64),
    Gather(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    /// Per (segment, column) argmax row; `None` for empty segments.
    SegmentMax(Var, Vec<Option<usize>>),
    /// Rows `idx[j]` take `values[j]`; every other row is the 1×c `default`.
    ScatterFill {
        values: Var,
        default: Var,
        idx: Vec<usize>,
    },
    /// `base` with rows `idx[j]` replaced by `values[j]`.
    RowReplace {
        base: Var,
        values: Var,
        idx: Vec<usize>,
    },
    Reshape(Var),
    SumAll(Var),
}

#[derive(Debug)]
struct Node<T> {
    op: Op,
    value: Option<Matrix<T>>,
}

pub struct Tape<'s, T: Scalar> {
    store: &'s ParameterStore<T>,
    nodes: Vec<Node<T>>,
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

impl<'s, T: Scalar> Tape<'s, T> {
    pub fn new(store: &'s ParameterStore<T>) -> Self {
        Self {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'s ParameterStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.store.value(*id),
            (_, Some(m)) => m,
            _ => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn push(&mut self, op: Op, value: Matrix<T>) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(Op::Constant, value)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Matrix<T> {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Matrix::from_vec(va.rows(), va.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), v))
    }

    fn broadcast(&self, op: &'static str, a: Var, row: Var, f: impl Fn(T, T) -> T) -> Result<Matrix<T>> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(shape_err(op, format!("{:?} with row {:?}", va.shape(), vr.shape())));
        }
        let mut out = va.clone();
        let r = vr.row(0);
        for i in 0..out.rows() {
            for (x, &y) in out.row_mut(i).iter_mut().zip(r) {
                *x = f(*x, y);
            }
        }
        Ok(out)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let v = self.broadcast("add_row", a, row, |x, y| x + y)?;
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let v = self.broadcast("mul_row", a, row, |x, y| x * y)?;
        Ok(self.push(Op::MulRow(a, row), v))
    }

    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (va, vs) = (self.value(a), self.value(s));
        if vs.cols() != 1 || vs.rows() != va.rows() {
            return Err(shape_err("scale_rows", format!("{:?} by {:?}", va.shape(), vs.shape())));
        }
        let mut out = va.clone();
        for i in 0..out.rows() {
            let k = vs.get(i, 0);
            out.row_mut(i).iter_mut().for_each(|x| *x = *x * k);
        }
        Ok(self.push(Op::ScaleRows(a, s), out))
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Var {
        let k = T::from_f64_lossy(c);
        let v = self.value(a).map(|x| x * k);
        self.push(Op::ScalarMul(a, c), v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(shape_err("concat_cols", "row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                out.row_mut(i)[c0..c0 + src.len()].copy_from_slice(src);
                c0 += src.len();
            }
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        if parts.iter().any(|&p| self.shape(p).1 != cols) {
            return Err(shape_err("concat_rows", "column counts differ".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let out = Matrix::from_vec(data.len() / cols.max(1), cols, data)?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), out))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(Op::Relu(a), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(T::sqrt);
        self.push(Op::Sqrt(a), v)
    }

    pub fn clamp_min(&mut self, a: Var, min: f64) -> Var {
        let m = T::from_f64_lossy(min);
        let v = self.value(a).map(|x| if x > m { x } else { m });
        self.push(Op::ClampMin(a, min), v)
    }

    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let va = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= va.rows()) {
            return Err(Error::OutOfRange {
                kind: "gather row",
                id: bad,
                limit: va.rows(),
            });
        }
        let mut out = Matrix::zeros(idx.len(), va.cols());
        for (j, &i) in idx.iter().enumerate() {
            out.row_mut(j).copy_from_slice(va.row(i));
        }
        Ok(self.push(Op::Gather(a, idx.to_vec()), out))
    }

    pub fn segment_sum(&mut self, a: Var, seg: &[usize], num_segments: usize) -> Result<Var> {
        let va = self.value(a);
        check_segments("segment_sum", va.rows(), seg, num_segments)?;
        let mut out = Matrix::zeros(num_segments, va.cols());
        for (j, &s) in seg.iter().enumerate() {
            for (o, &x) in out.row_mut(s).iter_mut().zip(va.row(j)) {
                *o = *o + x;
            }
        }
        Ok(self.push(Op::SegmentSum(a, seg.to_vec()), out))
    }

    /// Column-wise maximum per segment; empty segments are zero.
    pub fn segment_max(&mut self, a: Var, seg: &[usize], num_segments: usize) -> Result<Var> {
        let va = self.value(a);
        check_segments("segment_max", va.rows(), seg, num_segments)?;
        let cols = va.cols();
        let mut arg: Vec<Option<usize>> = vec![None; num_segments * cols];
        for (j, &s) in seg.iter().enumerate() {
            let row = va.row(j);
            for c in 0..cols {
                let slot = &mut arg[s * cols + c];
                match slot {
                    Some(best) if va.get(*best, c) >= row[c] => {}
                    _ => *slot = Some(j),
                }
            }
        }
        let mut out = Matrix::zeros(num_segments, cols);
        for s in 0..num_segments {
            for c in 0..cols {
                if let Some(j) = arg[s * cols + c] {
                    out.set(s, c, va.get(j, c));
                }
            }
        }
        Ok(self.push(Op::SegmentMax(a, arg), out))
    }

    pub fn scatter_fill(&mut self, values: Var, idx: &[usize], num_rows: usize, default: Var) -> Result<Var> {
        let (vv, vd) = (self.value(values), self.value(default));
        if vd.rows() != 1 || vd.cols() != vv.cols() || vv.rows() != idx.len() {
            return Err(shape_err(
                "scatter_fill",
                format!("values {:?}, default {:?}, {} indices", vv.shape(), vd.shape(), idx.len()),
            ));
        }
        check_unique_rows("scatter_fill", idx, num_rows)?;
        let mut out = Matrix::zeros(num_rows, vv.cols());
        for i in 0..num_rows {
            out.row_mut(i).copy_from_slice(vd.row(0));
        }
        for (j, &i) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(vv.row(j));
        }
        Ok(self.push(
            Op::ScatterFill {
                values,
                default,
                idx: idx.to_vec(),
            },
            out,
        ))
    }

    pub fn row_replace(&mut self, base: Var, values: Var, idx: &[usize]) -> Result<Var> {
        let (vb, vv) = (self.value(base), self.value(values));
        if vb.cols() != vv.cols() || vv.rows() != idx.len() {
            return Err(shape_err(
                "row_replace",
                format!("base {:?}, values {:?}, {} indices", vb.shape(), vv.shape(), idx.len()),
            ));
        }
        check_unique_rows("row_replace", idx, vb.rows())?;
        let mut out = vb.clone();
        for (j, &i) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(vv.row(j));
        }
        Ok(self.push(
            Op::RowReplace {
                base,
                values,
                idx: idx.to_vec(),
            },
            out,
        ))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let v = self.value(a).clone().reshaped(rows, cols)?;
        Ok(self.push(Op::Reshape(a), v))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Op::SumAll(a), Matrix::scalar(s))
    }

    /// Runs the backward pass from the given `(node, dL/dnode)` seeds and returns the
    /// gradient of every parameter reached.
    pub fn backward(&self, seeds: &[(Var, Matrix<T>)]) -> Result<Gradients<T>> {
        let mut grads: Vec<Option<Matrix<T>>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        for (v, g) in seeds {
            if g.shape() != self.shape(*v) {
                return Err(shape_err(
                    "backward seed",
                    format!("{:?} for node of shape {:?}", g.shape(), self.shape(*v)),
                ));
            }
            acc(&mut grads, *v, g.clone());
        }
        let mut out = Gradients::new(self.store.len());
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Param(id) => out.add_owned(*id, g),
                Op::Constant => {}
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|x| -x));
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, column_sums(&g));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, hadamard(&g, vb));
                    acc(&mut grads, *b, hadamard(&g, va));
                }
                Op::MulRow(a, row) => {
                    let (va, vr) = (self.value(*a), self.value(*row));
                    let mut gr = Matrix::zeros(1, vr.cols());
                    let mut ga = g.clone();
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            let gi = g.get(r, c);
                            gr.data_mut()[c] = gr.data()[c] + gi * va.get(r, c);
                            ga.set(r, c, gi * vr.get(0, c));
                        }
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *row, gr);
                }
                Op::ScaleRows(a, s) => {
                    let (va, vs) = (self.value(*a), self.value(*s));
                    let mut ga = g.clone();
                    let mut gs = Matrix::zeros(vs.rows(), 1);
                    for r in 0..g.rows() {
                        let k = vs.get(r, 0);
                        let mut dot = T::zero();
                        for c in 0..g.cols() {
                            dot = dot + g.get(r, c) * va.get(r, c);
                            ga.set(r, c, g.get(r, c) * k);
                        }
                        gs.set(r, 0, dot);
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *s, gs);
                }
                Op::ScalarMul(a, c) => {
                    let k = T::from_f64_lossy(*c);
                    acc(&mut grads, *a, g.map(|x| x * k));
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let (m, k) = va.shape();
                    let n = vb.cols();
                    let mut ga = Matrix::zeros(m, k);
                    T::gemm_nt(m, n, k, g.data(), vb.data(), T::zero(), ga.data_mut());
                    let mut gb = Matrix::zeros(k, n);
                    T::gemm_tn(k, m, n, va.data(), g.data(), T::zero(), gb.data_mut());
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for &p in parts {
                        let cols = self.shape(p).1;
                        let mut gp = Matrix::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[c0..c0 + cols]);
                        }
                        c0 += cols;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut r0 = 0;
                    for &p in parts {
                        let rows = self.shape(p).0;
                        let slice = g.data()[r0 * g.cols()..(r0 + rows) * g.cols()].to_vec();
                        r0 += rows;
                        acc(&mut grads, p, Matrix::from_vec(rows, g.cols(), slice)?);
                    }
                }
                Op::Relu(a) => {
                    let va = self.value(*a);
                    acc(&mut grads, *a, mask_grad(&g, va, |x| x > T::zero()));
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().expect("cached");
                    let data = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(&gi, &yi)| gi * yi * (T::one() - yi))
                        .collect();
                    acc(&mut grads, *a, Matrix::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::Sqrt(a) => {
                    let y = node.value.as_ref().expect("cached");
                    let two = T::from_f64_lossy(2.0);
                    let data = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(&gi, &yi)| gi / (two * yi))
                        .collect();
                    acc(&mut grads, *a, Matrix::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::ClampMin(a, min) => {
                    let m = T::from_f64_lossy(*min);
                    let va = self.value(*a);
                    acc(&mut grads, *a, mask_grad(&g, va, |x| x > m));
                }
                Op::Gather(a, idx) => {
                    let (rows, cols) = self.shape(*a);
                    let mut ga = Matrix::zeros(rows, cols);
                    for (j, &r) in idx.iter().enumerate() {
                        for (o, &x) in ga.row_mut(r).iter_mut().zip(g.row(j)) {
                            *o = *o + x;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SegmentSum(a, seg) => {
                    let cols = g.cols();
                    let mut ga = Matrix::zeros(seg.len(), cols);
                    for (j, &s) in seg.iter().enumerate() {
                        ga.row_mut(j).copy_from_slice(g.row(s));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SegmentMax(a, arg) => {
                    let (rows, cols) = self.shape(*a);
                    let mut ga = Matrix::zeros(rows, cols);
                    for s in 0..g.rows() {
                        for c in 0..cols {
                            if let Some(j) = arg[s * cols + c] {
                                let cur = ga.get(j, c);
                                ga.set(j, c, cur + g.get(s, c));
                            }
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ScatterFill {
                    values,
                    default,
                    idx,
                } => {
                    let cols = g.cols();
                    let mut gv = Matrix::zeros(idx.len(), cols);
                    let mut covered = vec![false; g.rows()];
                    for (j, &i) in idx.iter().enumerate() {
                        gv.row_mut(j).copy_from_slice(g.row(i));
                        covered[i] = true;
                    }
                    let mut gd = Matrix::zeros(1, cols);
                    for (i, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
                        for (o, &x) in gd.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o = *o + x;
                        }
                    }
                    acc(&mut grads, *values, gv);
                    acc(&mut grads, *default, gd);
                }
                Op::RowReplace { base, values, idx } => {
                    let cols = g.cols();
                    let mut gv = Matrix::zeros(idx.len(), cols);
                    let mut gb = g;
                    for (j, &i) in idx.iter().enumerate() {
                        gv.row_mut(j).copy_from_slice(gb.row(i));
                        gb.row_mut(i).iter_mut().for_each(|x| *x = T::zero());
                    }
                    acc(&mut grads, *values, gv);
                    acc(&mut grads, *base, gb);
                }
                Op::Reshape(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, g.reshaped(r, c)?);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.shape(*a);
                    acc(&mut grads, *a, Matrix::filled(r, c, g.get(0, 0)));
                }
            }
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn hadamard<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

fn mask_grad<T: Scalar>(g: &Matrix<T>, x: &Matrix<T>, pass: impl Fn(T) -> bool) -> Matrix<T> {
    let data = g
        .data()
        .iter()
        .zip(x.data())
        .map(|(&gi, &xi)| if pass(xi) { gi } else { T::zero() })
        .collect();
    Matrix::from_vec(g.rows(), g.cols(), data).expect("same shape")
}

fn column_sums<T: Scalar>(g: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, &x) in out.row_mut(0).iter_mut().zip(g.row(r)) {
            *o = *o + x;
        }
    }
    out
}

fn check_segments(op: &'static str, rows: usize, seg: &[usize], n: usize) -> Result<()> {
    if seg.len() != rows {
        return Err(shape_err(op, format!("{rows} rows, {} segment ids", seg.len())));
    }
    if let Some(&bad) = seg.iter().find(|&&s| s >= n) {
        return Err(Error::OutOfRange {
            kind: "segment",
            id: bad,
            limit: n,
        });
    }
    Ok(())
}

fn check_unique_rows(op: &'static str, idx: &[usize], rows: usize) -> Result<()> {
    let mut seen = vec![false; rows];
    for &i in idx {
        if i >= rows {
            return Err(Error::OutOfRange {
                kind: "row",
                id: i,
                limit: rows,
            });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(shape_err(op, format!("row {i} targeted twice")));
        }
    }
    Ok(())
}
