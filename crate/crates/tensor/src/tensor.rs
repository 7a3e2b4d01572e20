use std::fmt;

use crate::error::{Result, TensorError};

/// Batch, channel, height and width extents of an NCHW tensor.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            batch,
            channels,
            height,
            width,
        }
    }

    pub const fn scalar() -> Self {
        Self::new(1, 1, 1, 1)
    }

    pub fn volume(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    /// Elements in one spatial plane.
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Elements belonging to one batch item.
    pub fn item(&self) -> usize {
        self.channels * self.plane()
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }

    pub fn with_channels(self, channels: usize) -> Self {
        Self { channels, ..self }
    }

    pub fn with_spatial(self, height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            ..self
        }
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

impl From<[usize; 4]> for Shape {
    fn from(d: [usize; 4]) -> Self {
        Self::new(d[0], d[1], d[2], d[3])
    }
}

/// Dense row-major NCHW array of `f64`.
///
/// Values are immutable once constructed; every op returns a new tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting a length mismatch or any NaN/Inf value.
    pub fn new(shape: impl Into<Shape>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if data.len() != shape.volume() {
            return Err(TensorError::DataLength {
                expected: shape.volume(),
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: "new", index });
        }
        Ok(Self { shape, data })
    }

    /// Kernel-internal constructor. Finiteness is only checked in debug builds.
    pub(crate) fn from_op(op: &'static str, shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.volume());
        if cfg!(debug_assertions) {
            if let Some(index) = data.iter().position(|v| !v.is_finite()) {
                panic!("{}", TensorError::NonFinite { op, index });
            }
        }
        Self { shape, data }
    }

    pub fn zeros(shape: impl Into<Shape>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: impl Into<Shape>) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: impl Into<Shape>, value: f64) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        let shape = shape.into();
        Self {
            shape,
            data: vec![value; shape.volume()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::full(Shape::scalar(), value)
    }

    /// Fills from a function of `(n, c, y, x)`.
    pub fn from_fn(
        shape: impl Into<Shape>,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let shape = shape.into();
        let mut data = Vec::with_capacity(shape.volume());
        for n in 0..shape.batch {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let s = self.shape;
        ((n * s.channels + c) * s.height + y) * s.width + x
    }

    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(n, c, y, x)]
    }

    /// The single value of a 1x1x1x1 tensor.
    pub fn item(&self) -> Option<f64> {
        (self.shape == Shape::scalar()).then(|| self.data[0])
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Copy of batch item `n` as a 1xCxHxW tensor.
    pub fn batch_item(&self, n: usize) -> Tensor {
        let s = self.shape;
        let k = s.item();
        Tensor {
            shape: Shape::new(1, s.channels, s.height, s.width),
            data: self.data[n * k..(n + 1) * k].to_vec(),
        }
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack_batch(items: &[Tensor]) -> Result<Tensor> {
        let first = items.first().ok_or(TensorError::InvalidArgument {
            op: "stack_batch",
            msg: "no tensors".into(),
        })?;
        let s = first.shape;
        let mut data = Vec::with_capacity(s.volume() * items.len());
        let mut batch = 0;
        for t in items {
            let ts = t.shape;
            if ts.channels != s.channels || ts.height != s.height || ts.width != s.width {
                return Err(TensorError::ShapeMismatch {
                    op: "stack_batch",
                    dim: "item shape",
                    expected: s.item(),
                    got: ts.item(),
                });
            }
            batch += ts.batch;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor {
            shape: Shape { batch, ..s },
            data,
        })
    }

    pub(crate) fn map(&self, op: &'static str, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_op(op, self.shape, self.data.iter().map(|&v| f(v)).collect())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<_> = self.data.iter().take(8).collect();
        write!(f, "Tensor({:?}, {:?}", self.shape, preview)?;
        if self.data.len() > 8 {
            write!(f, " ...")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = Tensor::new([1, 1, 1, 2], vec![0.0, f64::NAN]).unwrap_err();
        assert_eq!(err, TensorError::NonFinite { op: "new", index: 1 });
        assert!(Tensor::new([1, 1, 1, 1], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = Tensor::new([1, 2, 2, 2], vec![0.0; 7]).unwrap_err();
        assert_eq!(
            err,
            TensorError::DataLength {
                expected: 8,
                got: 7
            }
        );
    }

    #[test]
    fn indexing_is_row_major() {
        let t = Tensor::from_fn([2, 3, 4, 5], |n, c, y, x| {
            (n * 1000 + c * 100 + y * 10 + x) as f64
        })
        .unwrap();
        assert_eq!(t.at(1, 2, 3, 4), 1234.0);
        assert_eq!(t.data()[t.index(1, 2, 3, 4)], 1234.0);
        assert_eq!(t.batch_item(1).at(0, 2, 3, 4), 1234.0);
    }
}
