use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Range;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type. `f64` is used for gradient checking, `f32`
/// for training.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Row-major `rows × cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor2<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Tensor2::from_vec",
                format!("{} values for {rows}x{cols}", data.len()),
            ));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor2 { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("Tensor2::from_rows", "ragged rows"));
        }
        Ok(Tensor2 {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().map(|&x| T::of(x)).collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Copy of rows `range`.
    pub fn slice_rows(&self, range: Range<usize>) -> Self {
        Tensor2 {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    /// Overwrite rows starting at `start` with `src`.
    pub fn set_rows(&mut self, start: usize, src: &Tensor2<T>) -> Result<()> {
        if src.cols != self.cols || start + src.rows > self.rows {
            return Err(Error::shape(
                "Tensor2::set_rows",
                format!(
                    "{}x{} at row {start} into {}x{}",
                    src.rows, src.cols, self.rows, self.cols
                ),
            ));
        }
        self.data[start * self.cols..(start + src.rows) * self.cols].copy_from_slice(&src.data);
        Ok(())
    }

    /// Vertical concatenation.
    pub fn vstack(parts: &[Tensor2<T>]) -> Result<Self> {
        let cols = parts.first().map_or(0, |p| p.cols);
        if parts.iter().any(|p| p.cols != cols && p.rows > 0) {
            return Err(Error::shape("Tensor2::vstack", "column counts differ"));
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn add_assign(&mut self, other: &Tensor2<T>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "Tensor2::add_assign",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, &b)| *a = *a + b);
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor2<U> {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|x| U::from_f64(x.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Error with `NonFinite(op)` if any element is NaN or infinite.
    pub fn ensure_finite(&self, op: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op.to_string()))
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor2<T>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs().to_f64().unwrap())
            .fold(0.0, f64::max)
    }
}

/// A trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Tensor2<T>,
    pub grad: Tensor2<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor2<T>) -> Self {
        let grad = Tensor2::zeros(value.rows(), value.cols());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn accumulate(&mut self, g: &Tensor2<T>) -> Result<()> {
        self.grad.add_assign(g)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slicing_and_stacking() {
        let t = Tensor2::<f64>::from_fn(4, 2, |r, c| (r * 2 + c) as f64);
        let a = t.slice_rows(0..1);
        let b = t.slice_rows(1..4);
        assert_eq!(Tensor2::vstack(&[a, b]).unwrap(), t);
        let mut z = Tensor2::<f64>::zeros(4, 2);
        z.set_rows(1, &t.slice_rows(1..3)).unwrap();
        assert_eq!(z.get(2, 1), 5.0);
        assert!(z.set_rows(3, &t.slice_rows(0..2)).is_err());
    }

    #[test]
    fn finiteness_scan() {
        let mut t = Tensor2::<f32>::zeros(2, 2);
        assert!(t.ensure_finite("x").is_ok());
        t.set(1, 1, f32::NAN);
        assert!(matches!(t.ensure_finite("x"), Err(Error::NonFinite(_))));
    }

    #[test]
    fn param_grad_shape_tracks_value() {
        let mut p = Param::new(Tensor2::<f64>::identity(3));
        assert_eq!(p.grad.shape(), p.value.shape());
        p.accumulate(&Tensor2::identity(3)).unwrap();
        p.zero_grad();
        assert!(p.grad.data().iter().all(|&g| g == 0.0));
        assert!(p.accumulate(&Tensor2::zeros(2, 3)).is_err());
    }
}
