//! Dense storage for the reference kernels.
//!
//! One layout everywhere: row-major with dimension order (batch, height,
//! width, channel). Benchmarks run on `f32`; gradient-check oracles
//! instantiate the same code with `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point element type accepted by the kernels.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Display + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A rank-4 tensor with dims (B, H, W, C), row-major in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    /// Wrap existing data. The length must equal the product of `dims` and
    /// every value must be finite.
    pub fn new(dims: [usize; 4], data: Vec<T>) -> Result<Self> {
        let len = dims.iter().product::<usize>();
        if data.len() != len {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                len
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("tensor contains non-finite values"));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        let len = dims.iter().product::<usize>();
        Self { dims, data: vec![T::zero(); len] }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
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

    /// Flat offset of element (b, y, x, c).
    #[inline]
    pub fn offset(&self, b: usize, y: usize, x: usize, c: usize) -> usize {
        ((b * self.dims[1] + y) * self.dims[2] + x) * self.dims[3] + c
    }

    #[inline]
    pub fn at(&self, b: usize, y: usize, x: usize, c: usize) -> T {
        self.data[self.offset(b, y, x, c)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, y: usize, x: usize, c: usize) -> &mut T {
        let i = self.offset(b, y, x, c);
        &mut self.data[i]
    }
}

/// A row-major matrix; rows index the batch for layer inputs/outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite values"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}
