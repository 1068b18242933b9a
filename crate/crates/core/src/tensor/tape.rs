//! Reverse-mode differentiation over a linear tape of 2-D values.
//!
//! Parameters are referenced in place from the attached [`ParamStore`], so
//! recording a forward pass never copies weights. [`Tape::backward`] walks
//! the tape in reverse and returns one gradient per parameter that took part
//! in the computation.

use rand::Rng;

use super::ops::{
    dropout_mask, log_softmax_row, matmul_acc, matmul_at_acc, matmul_bt_acc, sigmoid_scalar,
    softmax_row,
};
use super::{Gradients, ParamStore, Real, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    OneMinus(Var),
    Scale(Var, T),
    MaskMul(Var, Vec<T>),
    Concat(Vec<Var>, usize),
    Reshape(Var),
    Transpose(Var),
    Softmax(Var),
    LogSoftmax(Var),
    EmbedColumn(Var, usize),
    Pick(Var, usize),
    Sum(Var),
    SumMany(Vec<Var>),
}

#[derive(Debug)]
enum Stored<T> {
    Owned(Vec<T>),
    Param(usize),
}

#[derive(Debug)]
struct Node<T> {
    rows: usize,
    cols: usize,
    value: Stored<T>,
    op: Op<T>,
}

pub struct Tape<'p, T: Real> {
    store: Option<&'p ParamStore<T>>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<Var>>,
}

impl<'p, T: Real> Tape<'p, T> {
    /// A tape whose parameter leaves read from `store`.
    pub fn new(store: &'p ParamStore<T>) -> Self {
        Self {
            store: Some(store),
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    /// A tape with constants only.
    pub fn detached() -> Self {
        Self {
            store: None,
            nodes: Vec::new(),
            param_nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(rows * cols, data.len());
        self.nodes.push(Node {
            rows,
            cols,
            value: Stored::Owned(data),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    fn shape_vec(&self, v: Var) -> Vec<usize> {
        let (r, c) = self.dims(v);
        vec![r, c]
    }

    pub fn value(&self, v: Var) -> &[T] {
        match &self.nodes[v.0].value {
            Stored::Owned(d) => d,
            Stored::Param(id) => self
                .store
                .expect("param node implies a store")
                .by_id(*id)
                .value
                .data(),
        }
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let (r, c) = self.dims(v);
        Tensor::new([r, c], self.value(v).to_vec()).expect("consistent node")
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    pub fn constant(&mut self, t: &Tensor<T>) -> Var {
        let (r, c) = t.dims2();
        self.push(r, c, t.data().to_vec(), Op::Constant)
    }

    /// Leaf for the named parameter. Repeated calls return the same node.
    pub fn param(&mut self, name: &str) -> Result<Var> {
        let store = self.store.ok_or(TensorError::NoParamStore)?;
        let id = store.id(name)?;
        if let Some(v) = self.param_nodes[id] {
            return Ok(v);
        }
        let (r, c) = store.by_id(id).value.dims2();
        self.nodes.push(Node {
            rows: r,
            cols: c,
            value: Stored::Param(id),
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id] = Some(v);
        Ok(v)
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            left: self.shape_vec(a),
            right: self.shape_vec(b),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![T::zero(); m * n];
        matmul_acc(self.value(a), self.value(b), &mut out, m, k, n);
        Ok(self.push(m, n, out, Op::MatMul(a, b)))
    }

    fn zip(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(self.mismatch(name, a, b));
        }
        let (r, c) = self.dims(a);
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(self.push(r, c, out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let (r, c) = self.dims(a);
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        self.push(r, c, out, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid_scalar)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), T::tanh)
    }

    /// `1 - a`, element-wise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.unary(a, Op::OneMinus(a), |x| T::one() - x)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.unary(a, Op::Scale(a, s), |x| x * s)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    /// Inverted dropout. Identity when `rng` is `None` or `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        rng: Option<&mut R>,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::BadDropoutRate(rate));
        }
        let Some(rng) = rng.filter(|_| rate > 0.0) else {
            return Ok(a);
        };
        let (r, c) = self.dims(a);
        let mask: Vec<T> = dropout_mask(r * c, rate, rng);
        let out = self
            .value(a)
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        Ok(self.push(r, c, out, Op::MaskMul(a, mask)))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::Invalid("concat of zero values".into()))?;
        let (r0, c0) = self.dims(first);
        let (rows, cols, data) = match axis {
            0 => {
                let mut rows = 0;
                let mut data = Vec::new();
                for &p in parts {
                    let (r, c) = self.dims(p);
                    if c != c0 {
                        return Err(self.mismatch("concat", first, p));
                    }
                    rows += r;
                    data.extend_from_slice(self.value(p));
                }
                (rows, c0, data)
            }
            1 => {
                let mut cols = 0;
                for &p in parts {
                    let (r, c) = self.dims(p);
                    if r != r0 {
                        return Err(self.mismatch("concat", first, p));
                    }
                    cols += c;
                }
                let mut data = Vec::with_capacity(r0 * cols);
                for i in 0..r0 {
                    for &p in parts {
                        let (_, c) = self.dims(p);
                        data.extend_from_slice(&self.value(p)[i * c..(i + 1) * c]);
                    }
                }
                (r0, cols, data)
            }
            _ => {
                return Err(TensorError::Invalid(format!(
                    "concat axis {axis} not supported"
                )))
            }
        };
        Ok(self.push(rows, cols, data, Op::Concat(parts.to_vec(), axis)))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if r * c != rows * cols {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: vec![r, c],
                right: vec![rows, cols],
            });
        }
        let data = self.value(a).to_vec();
        Ok(self.push(rows, cols, data, Op::Reshape(a)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let src = self.value(a);
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        self.push(c, r, out, Op::Transpose(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let mut out = vec![T::zero(); r * c];
        let src = self.value(a);
        for i in 0..r {
            softmax_row(&src[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c]);
        }
        self.push(r, c, out, Op::Softmax(a))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let mut out = vec![T::zero(); r * c];
        let src = self.value(a);
        for i in 0..r {
            log_softmax_row(&src[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c]);
        }
        self.push(r, c, out, Op::LogSoftmax(a))
    }

    /// Column `id` of a `D × V` table, returned as a `1 × D` row.
    pub fn embed_column(&mut self, table: Var, id: usize) -> Result<Var> {
        let (d, v) = self.dims(table);
        if id >= v {
            return Err(TensorError::OutOfRange {
                op: "embed",
                index: id,
                size: v,
            });
        }
        let src = self.value(table);
        let out = (0..d).map(|r| src[r * v + id]).collect();
        Ok(self.push(1, d, out, Op::EmbedColumn(table, id)))
    }

    /// Element `index` (row-major) as a `1 × 1` value.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if index >= r * c {
            return Err(TensorError::OutOfRange {
                op: "pick",
                index,
                size: r * c,
            });
        }
        let v = self.value(a)[index];
        Ok(self.push(1, 1, vec![v], Op::Pick(a, index)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    /// Sum of equally shaped values.
    pub fn sum_many(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::Invalid("sum of zero values".into()))?;
        let (r, c) = self.dims(first);
        let mut out = vec![T::zero(); r * c];
        for &p in parts {
            if self.dims(p) != (r, c) {
                return Err(self.mismatch("sum_many", first, p));
            }
            for (o, &x) in out.iter_mut().zip(self.value(p)) {
                *o = *o + x;
            }
        }
        Ok(self.push(r, c, out, Op::SumMany(parts.to_vec())))
    }

    /// Gradients of the scalar `loss` with respect to every parameter leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(TensorError::NoForward);
        }
        if self.dims(loss) != (1, 1) {
            return Err(TensorError::NonScalarLoss(self.shape_vec(loss)));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![T::one()]);
        let mut result: Vec<Option<Tensor<T>>> = vec![None; self.param_nodes.len()];

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let out = || match &node.value {
                Stored::Owned(d) => d.as_slice(),
                Stored::Param(_) => unreachable!("only leaves reference parameters"),
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    result[*id] = Some(Tensor::new([node.rows, node.cols], g)?);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.dims(*a);
                    let (_, n) = self.dims(*b);
                    let bv = self.value(*b);
                    matmul_bt_acc(&g, bv, acc(&mut grads, *a, m * k), m, k, n);
                    let av = self.value(*a);
                    matmul_at_acc(av, &g, acc(&mut grads, *b, k * n), m, k, n);
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    add_into(acc(&mut grads, *b, g.len()), &g);
                }
                Op::Sub(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    let gb = acc(&mut grads, *b, g.len());
                    for (o, &x) in gb.iter_mut().zip(&g) {
                        *o = *o - x;
                    }
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, &x), &y) in ga.iter_mut().zip(&g).zip(bv) {
                        *o = *o + x * y;
                    }
                    let gb = acc(&mut grads, *b, g.len());
                    for ((o, &x), &y) in gb.iter_mut().zip(&g).zip(av) {
                        *o = *o + x * y;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = out();
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, &x), &s) in ga.iter_mut().zip(&g).zip(y) {
                        *o = *o + x * s * (T::one() - s);
                    }
                }
                Op::Tanh(a) => {
                    let y = out();
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, &x), &t) in ga.iter_mut().zip(&g).zip(y) {
                        *o = *o + x * (T::one() - t * t);
                    }
                }
                Op::OneMinus(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for (o, &x) in ga.iter_mut().zip(&g) {
                        *o = *o - x;
                    }
                }
                Op::Scale(a, s) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for (o, &x) in ga.iter_mut().zip(&g) {
                        *o = *o + x * *s;
                    }
                }
                Op::MaskMul(a, mask) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, &x), &m) in ga.iter_mut().zip(&g).zip(mask) {
                        *o = *o + x * m;
                    }
                }
                Op::Concat(parts, axis) => {
                    if *axis == 0 {
                        let mut off = 0;
                        for &p in parts {
                            let (r, c) = self.dims(p);
                            add_into(acc(&mut grads, p, r * c), &g[off..off + r * c]);
                            off += r * c;
                        }
                    } else {
                        let total = node.cols;
                        let mut col_off = 0;
                        for &p in parts {
                            let (r, c) = self.dims(p);
                            let gp = acc(&mut grads, p, r * c);
                            for row in 0..r {
                                let src = &g[row * total + col_off..row * total + col_off + c];
                                add_into(&mut gp[row * c..(row + 1) * c], src);
                            }
                            col_off += c;
                        }
                    }
                }
                Op::Reshape(a) => add_into(acc(&mut grads, *a, g.len()), &g),
                Op::Transpose(a) => {
                    let (r, c) = self.dims(*a);
                    let ga = acc(&mut grads, *a, r * c);
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] = ga[i * c + j] + g[j * r + i];
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = out();
                    let (r, c) = (node.rows, node.cols);
                    let ga = acc(&mut grads, *a, r * c);
                    for row in 0..r {
                        let ys = &y[row * c..(row + 1) * c];
                        let gs = &g[row * c..(row + 1) * c];
                        let dot: T = ys.iter().zip(gs).map(|(&p, &q)| p * q).sum();
                        for j in 0..c {
                            ga[row * c + j] = ga[row * c + j] + ys[j] * (gs[j] - dot);
                        }
                    }
                }
                Op::LogSoftmax(a) => {
                    let y = out();
                    let (r, c) = (node.rows, node.cols);
                    let ga = acc(&mut grads, *a, r * c);
                    for row in 0..r {
                        let ys = &y[row * c..(row + 1) * c];
                        let gs = &g[row * c..(row + 1) * c];
                        let total: T = gs.iter().copied().sum();
                        for j in 0..c {
                            ga[row * c + j] = ga[row * c + j] + gs[j] - ys[j].exp() * total;
                        }
                    }
                }
                Op::EmbedColumn(table, id) => {
                    let (d, v) = self.dims(*table);
                    let gt = acc(&mut grads, *table, d * v);
                    for (r, &x) in g.iter().enumerate() {
                        gt[r * v + id] = gt[r * v + id] + x;
                    }
                }
                Op::Pick(a, index) => {
                    let (r, c) = self.dims(*a);
                    let ga = acc(&mut grads, *a, r * c);
                    ga[*index] = ga[*index] + g[0];
                }
                Op::Sum(a) => {
                    let (r, c) = self.dims(*a);
                    let ga = acc(&mut grads, *a, r * c);
                    for o in ga.iter_mut() {
                        *o = *o + g[0];
                    }
                }
                Op::SumMany(parts) => {
                    for &p in parts {
                        add_into(acc(&mut grads, p, g.len()), &g);
                    }
                }
            }
        }
        Ok(Gradients { per_param: result })
    }
}

fn acc<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut [T] {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Partition;

    fn store_with(name: &str, t: Tensor<f64>) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert(name, Partition::Shared, t).unwrap();
        s
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let store = store_with(
            "w",
            Tensor::new([2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap(),
        );
        let mut tape = Tape::new(&store);
        let w = tape.param("w").unwrap();
        let loss = tape.sum(w);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(0).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn square_gradient_is_twice_value() {
        let store = store_with("w", Tensor::row(vec![2.0]));
        let mut tape = Tape::new(&store);
        let w = tape.param("w").unwrap();
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(0).unwrap().data(), &[4.0]);
    }

    #[test]
    fn backward_without_forward_is_an_error() {
        let store = store_with("w", Tensor::row(vec![2.0]));
        let tape = Tape::new(&store);
        assert_eq!(tape.backward(Var(0)).unwrap_err(), TensorError::NoForward);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let store = store_with("w", Tensor::row(vec![2.0, 1.0]));
        let mut tape = Tape::new(&store);
        let w = tape.param("w").unwrap();
        assert!(matches!(
            tape.backward(w),
            Err(TensorError::NonScalarLoss(_))
        ));
    }

    #[test]
    fn param_leaf_is_shared() {
        let store = store_with("w", Tensor::row(vec![1.0]));
        let mut tape = Tape::new(&store);
        let a = tape.param("w").unwrap();
        let b = tape.param("w").unwrap();
        assert_eq!(a, b);
    }

    /// Every op against central differences on a scalar function of one input.
    #[test]
    fn ops_match_finite_differences() {
        let x0 = Tensor::new([2, 3], vec![0.3, -0.7, 1.1, 0.05, -1.4, 0.8]).unwrap();
        let c = Tensor::new([3, 2], vec![0.2, -0.1, 0.4, 0.9, -0.6, 0.3]).unwrap();
        let f = |store: &ParamStore<f64>| -> (f64, Option<Gradients<f64>>) {
            let mut t = Tape::new(store);
            let x = t.param("x").unwrap();
            let cc = t.constant(&c);
            let m = t.matmul(x, cc).unwrap(); // 2x2
            let s = t.sigmoid(m);
            let th = t.tanh(x);
            let om = t.one_minus(th);
            let xt = t.transpose(om); // 3x2
            let m2 = t.matmul(x, xt).unwrap(); // 2x2
            let p = t.mul(s, m2).unwrap();
            let q = t.sub(p, s).unwrap();
            let cat = t.concat(&[q, s], 1).unwrap(); // 2x4
            let cat0 = t.concat(&[cat, cat], 0).unwrap(); // 4x4
            let r = t.reshape(cat0, 1, 16).unwrap();
            let sm = t.softmax(r);
            let ls = t.log_softmax(r);
            let e = t.embed_column(x, 1).unwrap();
            let pe = t.sum(e);
            let a = t.pick(sm, 3).unwrap();
            let b = t.pick(ls, 7).unwrap();
            let sc = t.scale(b, 0.5);
            let total = t.sum_many(&[a, sc, pe]).unwrap();
            let v = t.scalar(total);
            let g = t.backward(total).unwrap();
            (v, Some(g))
        };
        let store = store_with("x", x0.clone());
        let (_, g) = f(&store);
        let g = g.unwrap();
        let analytic = g.get(0).unwrap();
        let h = 1e-6;
        for i in 0..x0.len() {
            let mut plus = x0.clone();
            plus.data_mut()[i] += h;
            let mut minus = x0.clone();
            minus.data_mut()[i] -= h;
            let fp = f(&store_with("x", plus)).0;
            let fm = f(&store_with("x", minus)).0;
            let num = (fp - fm) / (2.0 * h);
            assert!(
                (num - analytic.data()[i]).abs() < 1e-7,
                "coordinate {i}: numeric {num} analytic {}",
                analytic.data()[i]
            );
        }
    }
}
