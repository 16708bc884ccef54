use rand::Rng;

use super::tensor::{Scalar, Tensor2};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::sparse::SparseMatrix;

/// Pre-activations are clamped to `[-SIGMOID_CLAMP, SIGMOID_CLAMP]` before `exp`.
pub const SIGMOID_CLAMP: f64 = 30.0;

pub fn matmul<T: Scalar>(a: &Tensor2<T>, b: &Tensor2<T>) -> Result<Tensor2<T>> {
    matmul_with(a, b, Exec::Auto)
}

pub fn matmul_with<T: Scalar>(a: &Tensor2<T>, b: &Tensor2<T>, exec: Exec) -> Result<Tensor2<T>> {
    if a.cols() != b.rows() {
        return Err(Error::shape(
            "matmul",
            format!("{:?} · {:?}", a.shape(), b.shape()),
        ));
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Tensor2::zeros(n, m);
    let bd = b.data();
    par::for_each_row(out.data_mut(), m, exec, n * k * m, |i, row| {
        for (kk, &aik) in a.row(i).iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            let brow = &bd[kk * m..(kk + 1) * m];
            for (o, &bkj) in row.iter_mut().zip(brow) {
                *o = *o + aik * bkj;
            }
        }
    });
    out.ensure_finite("matmul")?;
    Ok(out)
}

/// Gradients of `C = A·B`: `(dA, dB) = (dC·Bᵀ, Aᵀ·dC)`.
pub fn matmul_backward<T: Scalar>(
    a: &Tensor2<T>,
    b: &Tensor2<T>,
    dc: &Tensor2<T>,
) -> Result<(Tensor2<T>, Tensor2<T>)> {
    if dc.shape() != (a.rows(), b.cols()) {
        return Err(Error::shape(
            "matmul_backward",
            format!("upstream {:?} for {:?}·{:?}", dc.shape(), a.shape(), b.shape()),
        ));
    }
    let da = matmul(dc, &b.transpose())?;
    let db = matmul(&a.transpose(), dc)?;
    Ok((da, db))
}

pub fn sparse_dense_matmul<T: Scalar>(s: &SparseMatrix, d: &Tensor2<T>) -> Result<Tensor2<T>> {
    sparse_dense_matmul_with(s, d, Exec::Auto)
}

pub fn sparse_dense_matmul_with<T: Scalar>(
    s: &SparseMatrix,
    d: &Tensor2<T>,
    exec: Exec,
) -> Result<Tensor2<T>> {
    if s.cols() != d.rows() {
        return Err(Error::shape(
            "sparse_dense_matmul",
            format!("{}x{} · {:?}", s.rows(), s.cols(), d.shape()),
        ));
    }
    let m = d.cols();
    let mut out = Tensor2::zeros(s.rows(), m);
    let dd = d.data();
    par::for_each_row(out.data_mut(), m, exec, s.nnz() * m, |i, row| {
        for (c, v) in s.row(i) {
            let v = T::of(v);
            for (o, &x) in row.iter_mut().zip(&dd[c * m..(c + 1) * m]) {
                *o = *o + v * x;
            }
        }
    });
    out.ensure_finite("sparse_dense_matmul")?;
    Ok(out)
}

/// Gradient of `Y = S·D` with respect to `D`: `Sᵀ·dY`.
pub fn sparse_dense_matmul_backward<T: Scalar>(
    s: &SparseMatrix,
    dy: &Tensor2<T>,
) -> Result<Tensor2<T>> {
    sparse_dense_matmul(&s.transpose(), dy)
}

pub fn leaky_relu<T: Scalar>(x: &Tensor2<T>, slope: f64) -> Tensor2<T> {
    let slope = T::of(slope);
    x.map(|v| if v >= T::zero() { v } else { slope * v })
}

/// The subgradient at 0 takes the identity branch.
pub fn leaky_relu_backward<T: Scalar>(
    x: &Tensor2<T>,
    slope: f64,
    dy: &Tensor2<T>,
) -> Result<Tensor2<T>> {
    if x.shape() != dy.shape() {
        return Err(Error::shape("leaky_relu_backward", "input/upstream shapes differ"));
    }
    let slope = T::of(slope);
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v >= T::zero() { g } else { slope * g })
        .collect();
    Tensor2::from_vec(x.rows(), x.cols(), data)
}

/// Per-element survivor scale from a dropout draw; `None` means identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T>(Option<Vec<T>>);

impl<T: Scalar> DropoutMask<T> {
    pub fn identity() -> Self {
        DropoutMask(None)
    }

    pub fn scales(&self) -> Option<&[T]> {
        self.0.as_deref()
    }
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
/// Inference mode, or `rate == 0`, is the identity and draws nothing.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor2<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor2<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), DropoutMask::identity()));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((
        Tensor2::from_vec(x.rows(), x.cols(), data)?,
        DropoutMask(Some(mask)),
    ))
}

pub fn dropout_backward<T: Scalar>(mask: &DropoutMask<T>, dy: &Tensor2<T>) -> Result<Tensor2<T>> {
    match mask.scales() {
        None => Ok(dy.clone()),
        Some(m) if m.len() == dy.len() => {
            let data = dy.data().iter().zip(m).map(|(&g, &s)| g * s).collect();
            Tensor2::from_vec(dy.rows(), dy.cols(), data)
        }
        Some(m) => Err(Error::LengthMismatch(m.len(), dy.len())),
    }
}

fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    let c = T::of(SIGMOID_CLAMP);
    let x = x.max(-c).min(c);
    T::one() / (T::one() + (-x).exp())
}

pub fn sigmoid<T: Scalar>(x: &Tensor2<T>) -> Tensor2<T> {
    x.map(sigmoid_scalar)
}

/// Zero gradient where the clamp is active.
pub fn sigmoid_backward<T: Scalar>(x: &Tensor2<T>, dy: &Tensor2<T>) -> Result<Tensor2<T>> {
    if x.shape() != dy.shape() {
        return Err(Error::shape("sigmoid_backward", "input/upstream shapes differ"));
    }
    let c = T::of(SIGMOID_CLAMP);
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| {
            if v.abs() > c {
                T::zero()
            } else {
                let s = sigmoid_scalar(v);
                g * s * (T::one() - s)
            }
        })
        .collect();
    Tensor2::from_vec(x.rows(), x.cols(), data)
}

/// `x·W + b` with `W: d_in × d_out` and `b: 1 × d_out` broadcast over rows.
pub fn linear<T: Scalar>(x: &Tensor2<T>, w: &Tensor2<T>, b: &Tensor2<T>) -> Result<Tensor2<T>> {
    if b.shape() != (1, w.cols()) {
        return Err(Error::shape(
            "linear",
            format!("bias {:?} for weight {:?}", b.shape(), w.shape()),
        ));
    }
    let mut y = matmul(x, w)?;
    let m = y.cols();
    for row in y.data_mut().chunks_mut(m.max(1)) {
        row.iter_mut().zip(b.data()).for_each(|(v, &bb)| *v = *v + bb);
    }
    y.ensure_finite("linear")?;
    Ok(y)
}

/// Returns `(dx, dW, db)`.
pub fn linear_backward<T: Scalar>(
    x: &Tensor2<T>,
    w: &Tensor2<T>,
    dy: &Tensor2<T>,
) -> Result<(Tensor2<T>, Tensor2<T>, Tensor2<T>)> {
    let (dx, dw) = matmul_backward(x, w, dy)?;
    let mut db = Tensor2::zeros(1, dy.cols());
    for r in 0..dy.rows() {
        db.data_mut()
            .iter_mut()
            .zip(dy.row(r))
            .for_each(|(a, &g)| *a = *a + g);
    }
    Ok((dx, dw, db))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::gradcheck;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor2<f64> {
        Tensor2::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn naive(a: &Tensor2<f64>, b: &Tensor2<f64>) -> Tensor2<f64> {
        Tensor2::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    /// Σ G ⊙ Y for a fixed random G: a scalar whose gradient w.r.t. Y is G.
    fn probe(y: &Tensor2<f64>, g: &Tensor2<f64>) -> f64 {
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn matmul_identity_and_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random(3, 3, &mut rng);
        assert_eq!(matmul(&Tensor2::identity(3), &m).unwrap(), m);
        let a = random(2, 3, &mut rng);
        let b = random(3, 2, &mut rng);
        assert!(matmul(&a, &b).unwrap().max_abs_diff(&naive(&a, &b)) < 1e-14);
        assert!(matches!(
            matmul(&a, &a),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn matmul_policies_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(70, 40, &mut rng);
        let b = random(40, 30, &mut rng);
        let s = matmul_with(&a, &b, Exec::Sequential).unwrap();
        let p = matmul_with(&a, &b, Exec::Parallel).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn matmul_backward_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(4, 4, &mut rng);
        let b = random(4, 4, &mut rng);
        let g = random(4, 4, &mut rng);
        let (da, db) = matmul_backward(&a, &b, &g).unwrap();
        let report = gradcheck(
            vec![a, b],
            |p| {
                let (da, db) = matmul_backward(&p[0], &p[1], &g)?;
                Ok((probe(&matmul(&p[0], &p[1])?, &g), vec![da, db]))
            },
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
        assert_eq!(da.shape(), (4, 4));
        assert_eq!(db.shape(), (4, 4));
    }

    fn random_sparse(n: usize, density: f64, rng: &mut ChaCha8Rng) -> SparseMatrix {
        let mut t = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if rng.random::<f64>() < density {
                    t.push((r, c, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn sparse_matmul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_sparse(10, 0.2, &mut rng);
        let d = random(10, 5, &mut rng);
        let dense = Tensor2::<f64>::from_rows(&s.to_dense()).unwrap();
        let got = sparse_dense_matmul(&s, &d).unwrap();
        assert!(got.max_abs_diff(&naive(&dense, &d)) < 1e-10);
        let par = sparse_dense_matmul_with(&s, &d, Exec::Parallel).unwrap();
        assert_eq!(got, par);
    }

    #[test]
    fn sparse_matmul_empty_is_zero() {
        let s = SparseMatrix::zeros(3, 4);
        let d = Tensor2::<f64>::from_fn(4, 2, |r, c| (r + c) as f64);
        assert_eq!(sparse_dense_matmul(&s, &d).unwrap(), Tensor2::zeros(3, 2));
        assert!(sparse_dense_matmul(&s, &Tensor2::<f64>::zeros(3, 2)).is_err());
    }

    #[test]
    fn sparse_matmul_backward_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_sparse(6, 0.4, &mut rng);
        let d = random(6, 3, &mut rng);
        let g = random(6, 3, &mut rng);
        let report = gradcheck(
            vec![d],
            |p| {
                let y = sparse_dense_matmul(&s, &p[0])?;
                Ok((probe(&y, &g), vec![sparse_dense_matmul_backward(&s, &g)?]))
            },
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn leaky_relu_values_and_kink() {
        let x = Tensor2::<f64>::from_vec(1, 3, vec![1.0, -1.0, 0.0]).unwrap();
        let y = leaky_relu(&x, 0.01);
        assert_eq!(y.data(), &[1.0, -0.01, 0.0]);
        let g = leaky_relu_backward(&x, 0.01, &Tensor2::from_vec(1, 3, vec![1.0; 3]).unwrap())
            .unwrap();
        assert_eq!(g.data(), &[1.0, 0.01, 1.0]);
    }

    #[test]
    fn leaky_relu_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Keep entries away from the kink.
        let x = random(5, 5, &mut rng).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
        let g = random(5, 5, &mut rng);
        let report = gradcheck(
            vec![x],
            |p| {
                let y = leaky_relu(&p[0], 0.01);
                Ok((probe(&y, &g), vec![leaky_relu_backward(&p[0], 0.01, &g)?]))
            },
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn sigmoid_and_linear_gradcheck() {
        assert_eq!(sigmoid(&Tensor2::<f64>::zeros(1, 1)).get(0, 0), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(3, 4, &mut rng).map(|v| v * 3.0);
        let g = random(3, 4, &mut rng);
        let report = gradcheck(
            vec![x],
            |p| Ok((probe(&sigmoid(&p[0]), &g), vec![sigmoid_backward(&p[0], &g)?])),
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");

        let x = random(3, 4, &mut rng);
        let w = random(4, 2, &mut rng);
        let b = random(1, 2, &mut rng);
        let g = random(3, 2, &mut rng);
        let report = gradcheck(
            vec![x, w, b],
            |p| {
                let y = linear(&p[0], &p[1], &p[2])?;
                let (dx, dw, db) = linear_backward(&p[0], &p[1], &g)?;
                Ok((probe(&y, &g), vec![dx, dw, db]))
            },
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn sigmoid_clamps_extremes() {
        let x = Tensor2::<f64>::from_vec(1, 2, vec![1e4, -1e4]).unwrap();
        let y = sigmoid(&x);
        assert!(y.is_finite());
        assert!(y.get(0, 0) > 0.999 && y.get(0, 1) < 1e-12);
        let g = sigmoid_backward(&x, &Tensor2::from_vec(1, 2, vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0]);
    }

    #[test]
    fn linear_identity() {
        let x = Tensor2::<f64>::from_fn(2, 3, |r, c| (r * 3 + c) as f64 - 2.0);
        let y = linear(&x, &Tensor2::identity(3), &Tensor2::zeros(1, 3)).unwrap();
        assert_eq!(y, x);
        assert!(linear(&x, &Tensor2::identity(3), &Tensor2::zeros(1, 2)).is_err());
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random(4, 4, &mut rng);
        for training in [false, true] {
            let (y, _) = dropout(&x, 0.0, training, &mut rng).unwrap();
            assert_eq!(y, x);
        }
        let (y, _) = dropout(&x, 0.5, false, &mut rng).unwrap();
        assert_eq!(y, x);
        let (a, ma) = dropout(&x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (b, mb) = dropout(&x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        assert!(dropout(&x, 1.0, true, &mut rng).is_err());

        let g = Tensor2::from_vec(4, 4, vec![1.0; 16]).unwrap();
        let dg = dropout_backward(&ma, &g).unwrap();
        for (o, (i, d)) in a.data().iter().zip(x.data().iter().zip(dg.data())) {
            assert!((o - i * d).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Tensor2::<f64>::from_vec(1, 4, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let draws = 100_000;
        let mut sum = vec![0.0; 4];
        for _ in 0..draws {
            let (y, _) = dropout(&x, 0.5, true, &mut rng).unwrap();
            sum.iter_mut().zip(y.data()).for_each(|(s, v)| *s += v);
        }
        for (s, &v) in sum.iter().zip(x.data()) {
            let mean = s / draws as f64;
            assert!((mean - v).abs() <= 0.02 * v.abs(), "mean {mean} vs {v}");
        }
    }
}
