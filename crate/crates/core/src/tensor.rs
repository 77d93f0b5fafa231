//! Dense row-major tensors.
//!
//! A [`Tensor`] is a shape plus a contiguous buffer; all the layout logic
//! the kernels rely on (row-major order, rank-2 indexing) lives here.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

/// Dense tensor with row-major storage.
///
/// Invariant: `dims.iter().product() == data.len()`, enforced at
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Builds a tensor from a shape and its row-major contents.
    ///
    /// Panics if the element count does not match the shape; that is a
    /// programming error, not an input error.
    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Self {
        let expected: usize = dims.iter().product();
        assert_eq!(
            expected,
            data.len(),
            "tensor shape {:?} expects {} elements, got {}",
            dims,
            expected,
            data.len()
        );
        Self {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn filled(dims: &[usize], value: T) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
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

    /// Number of rows when viewed as a matrix (rank 2 only).
    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.dims.len(), 2, "rows() needs a rank-2 tensor");
        self.dims[0]
    }

    /// Number of columns when viewed as a matrix (rank 2 only).
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.dims.len(), 2, "cols() needs a rank-2 tensor");
        self.dims[1]
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.data[row * self.dims[1] + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[row * self.dims[1] + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let width = self.dims[1];
        &self.data[row * width..(row + 1) * width]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        let width = self.dims[1];
        &mut self.data[row * width..(row + 1) * width]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise in-place add; shapes must agree.
    pub fn add_assign(&mut self, other: &Tensor<T>) {
        assert_eq!(self.dims, other.dims, "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
    }

    /// Scales every element in place.
    pub fn scale(&mut self, factor: T) {
        for x in self.data.iter_mut() {
            *x = *x * factor;
        }
    }

    /// True when every element is a finite number.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Copies a contiguous column block `[.., start..start+width)` out of a
    /// rank-2 tensor. Used to slice per-head views out of packed Q/K/V.
    pub fn col_block(&self, start: usize, width: usize) -> Tensor<T> {
        let rows = self.rows();
        let cols = self.cols();
        debug_assert!(start + width <= cols);
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            let row = &self.data[r * cols..r * cols + cols];
            out.extend_from_slice(&row[start..start + width]);
        }
        Tensor {
            dims: vec![rows, width],
            data: out,
        }
    }

    /// Writes `block` into columns `[start..start+block.cols())` of self.
    pub fn set_col_block(&mut self, start: usize, block: &Tensor<T>) {
        let rows = self.rows();
        let cols = self.cols();
        debug_assert_eq!(block.rows(), rows);
        debug_assert!(start + block.cols() <= cols);
        let width = block.cols();
        for r in 0..rows {
            let dst = &mut self.data[r * cols + start..r * cols + start + width];
            dst.copy_from_slice(block.row(r));
        }
    }

    /// Adds `block` into columns `[start..start+block.cols())` of self.
    pub fn add_col_block(&mut self, start: usize, block: &Tensor<T>) {
        let rows = self.rows();
        let cols = self.cols();
        debug_assert_eq!(block.rows(), rows);
        let width = block.cols();
        for r in 0..rows {
            for c in 0..width {
                self.data[r * cols + start + c] =
                    self.data[r * cols + start + c] + block.at(r, c);
            }
        }
    }

    /// Transpose of a rank-2 tensor.
    pub fn transposed(&self) -> Tensor<T> {
        let rows = self.rows();
        let cols = self.cols();
        let mut out = vec![T::zero(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = self.data[r * cols + c];
            }
        }
        Tensor {
            dims: vec![cols, rows],
            data: out,
        }
    }
}
