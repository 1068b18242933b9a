//! Forward kernels. Tensors are treated as 2-D (`rows × cols`); a 1-D tensor
//! is a single row.

use rand::Rng;

use super::{Real, Result, Tensor, TensorError};

fn mismatch<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`.
pub(crate) fn matmul_acc<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out[m×k] += g[m×n] · bᵀ` where `b` is `k×n`.
pub(crate) fn matmul_bt_acc<T: Real>(
    g: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = T::zero();
            for (&gv, &bv) in grow.iter().zip(brow) {
                s = s + gv * bv;
            }
            out[i * k + p] = out[i * k + p] + s;
        }
    }
}

/// `out[k×n] += aᵀ · g` where `a` is `m×k` and `g` is `m×n`.
pub(crate) fn matmul_at_acc<T: Real>(
    a: &[T],
    g: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o = *o + av * gv;
            }
        }
    }
}

pub(crate) fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax of one row, written into `out`.
pub(crate) fn softmax_row<T: Real>(x: &[T], out: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = if v == T::neg_infinity() {
            T::zero()
        } else {
            (v - max).exp()
        };
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

pub(crate) fn log_softmax_row<T: Real>(x: &[T], out: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = x.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = v - lse;
    }
}

pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.dims2();
    let (k2, n) = b.dims2();
    if k != k2 {
        return Err(mismatch("matmul", a, b));
    }
    let mut out = vec![T::zero(); m * n];
    matmul_acc(a.data(), b.data(), &mut out, m, k, n);
    Tensor::new([m, n], out)
}

fn zip_same<T: Real>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(mismatch(op, a, b));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same("add", a, b, |x, y| x + y)
}

pub fn sub<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same("sub", a, b, |x, y| x - y)
}

/// Element-wise (Hadamard) product.
pub fn hadamard<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same("hadamard", a, b, |x, y| x * y)
}

pub fn sigmoid<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    a.map(sigmoid_scalar)
}

pub fn tanh<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    a.map(T::tanh)
}

/// Concatenate 2-D tensors along `axis` (0 = rows, 1 = columns).
pub fn concat<T: Real>(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| TensorError::Invalid("concat of zero tensors".into()))?;
    let (r0, c0) = first.dims2();
    match axis {
        0 => {
            let mut rows = 0;
            let mut data = Vec::new();
            for p in parts {
                let (r, c) = p.dims2();
                if c != c0 {
                    return Err(mismatch("concat", first, p));
                }
                rows += r;
                data.extend_from_slice(p.data());
            }
            Tensor::new([rows, c0], data)
        }
        1 => {
            let mut cols = 0;
            for p in parts {
                let (r, c) = p.dims2();
                if r != r0 {
                    return Err(mismatch("concat", first, p));
                }
                cols += c;
            }
            let mut data = Vec::with_capacity(r0 * cols);
            for i in 0..r0 {
                for p in parts {
                    let (_, c) = p.dims2();
                    data.extend_from_slice(&p.data()[i * c..(i + 1) * c]);
                }
            }
            Tensor::new([r0, cols], data)
        }
        _ => Err(TensorError::Invalid(format!(
            "concat axis {axis} not supported"
        ))),
    }
}

/// Row-wise softmax. Entries equal to `-inf` receive probability zero.
pub fn softmax<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    let (r, c) = a.dims2();
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        softmax_row(&a.data()[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c]);
    }
    Tensor::new(a.shape().to_vec(), out).expect("same shape")
}

pub fn log_softmax<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    let (r, c) = a.dims2();
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        log_softmax_row(&a.data()[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c]);
    }
    Tensor::new(a.shape().to_vec(), out).expect("same shape")
}

/// Gather columns of a `D × V` embedding matrix: returns `ids.len() × D`,
/// one embedded id per row.
pub fn embedding_lookup<T: Real>(table: &Tensor<T>, ids: &[usize]) -> Result<Tensor<T>> {
    let (d, v) = table.dims2();
    let mut data = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= v {
            return Err(TensorError::OutOfRange {
                op: "embedding_lookup",
                index: id,
                size: v,
            });
        }
        data.extend((0..d).map(|r| table.data()[r * v + id]));
    }
    Tensor::new([ids.len(), d], data)
}

/// Inverted-dropout mask: zero with probability `rate`, else `1/(1-rate)`.
pub(crate) fn dropout_mask<T: Real, R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

/// Dropout with rescaling of survivors. With `rng = None` (evaluation mode)
/// or `rate = 0` this is the identity.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    a: &Tensor<T>,
    rate: f64,
    rng: Option<&mut R>,
) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(TensorError::BadDropoutRate(rate));
    }
    match rng {
        Some(rng) if rate > 0.0 => {
            let mask = dropout_mask::<T, R>(a.len(), rate, rng);
            let data = a.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
            Tensor::new(a.shape().to_vec(), data)
        }
        _ => Ok(a.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let s = softmax(&Tensor::<f64>::row(vec![0.0, 0.0, 0.0]));
        for &p in s.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_and_tanh_at_zero() {
        let z = Tensor::<f64>::row(vec![0.0]);
        assert_eq!(sigmoid(&z).data(), &[0.5]);
        assert_eq!(tanh(&z).data(), &[0.0]);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        let t = Tensor::<f32>::row(vec![-1000.0, 1000.0]);
        let s = sigmoid(&t);
        assert_eq!(s.data(), &[0.0, 1.0]);
    }

    #[test]
    fn dropout_rate_zero_is_identity() {
        let t = Tensor::<f32>::row(vec![1.0, -2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(dropout(&t, 0.0, Some(&mut rng)).unwrap(), t);
        assert_eq!(dropout::<f32, ChaCha8Rng>(&t, 0.5, None).unwrap(), t);
    }

    #[test]
    fn dropout_zeroes_or_rescales() {
        let t = Tensor::<f64>::full([1, 2000], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = dropout(&t, 0.2, Some(&mut rng)).unwrap();
        let zeros = d.data().iter().filter(|&&x| x == 0.0).count();
        assert!(d
            .data()
            .iter()
            .all(|&x| x == 0.0 || (x - 1.25).abs() < 1e-12));
        let frac = zeros as f64 / 2000.0;
        assert!((frac - 0.2).abs() < 0.04, "dropped fraction {frac}");
        assert!(dropout(&t, 1.0, Some(&mut rng)).is_err());
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::<f32>::zeros([2, 3]);
        let b = Tensor::<f32>::zeros([2, 3]);
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert_eq!(
            err,
            TensorError::ShapeMismatch {
                op: "matmul",
                left: vec![2, 3],
                right: vec![2, 3]
            }
        );
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::<f64>::new([2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::<f64>::new([2, 1], vec![5.0, 6.0]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[17.0, 39.0]);
    }

    #[test]
    fn concat_along_both_axes() {
        let a = Tensor::<f64>::row(vec![1.0, 2.0]);
        let b = Tensor::<f64>::row(vec![3.0]);
        assert_eq!(concat(&[&a, &b], 1).unwrap().data(), &[1.0, 2.0, 3.0]);
        let c = concat(&[&a, &a], 0).unwrap();
        assert_eq!(c.shape(), &[2, 2]);
        assert!(concat(&[&a, &b], 0).is_err());
    }

    #[test]
    fn embedding_lookup_reads_columns() {
        // D = 2, V = 3
        let w = Tensor::<f64>::new([2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let e = embedding_lookup(&w, &[2, 0]).unwrap();
        assert_eq!(e.data(), &[3.0, 6.0, 1.0, 4.0]);
        assert!(embedding_lookup(&w, &[3]).is_err());
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let t = Tensor::<f64>::row(vec![0.3, -1.2, 2.5, 0.0]);
        let a = log_softmax(&t);
        let b = softmax(&t).map(f64::ln);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }
}
