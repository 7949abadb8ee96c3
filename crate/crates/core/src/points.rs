//! Row-major storage for feature vectors and center sets.

use std::ops::Range;

use crate::error::{FcmError, Result};
use crate::scalar::Scalar;

/// Owned set of `len` vectors of dimension `dim`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Points<T> {
    data: Vec<T>,
    dim: usize,
}

/// A set of cluster centers. Same layout as any other point set.
pub type CenterSet<T> = Points<T>;

impl<T: Scalar> Points<T> {
    pub fn new(data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(FcmError::invalid("dimension must be at least 1"));
        }
        if data.len() % dim != 0 {
            return Err(FcmError::invalid(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(Points { data, dim })
    }

    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be at least 1");
        Points {
            data: Vec::new(),
            dim,
        }
    }

    pub fn zeros(len: usize, dim: usize) -> Self {
        assert!(dim > 0, "dimension must be at least 1");
        Points {
            data: vec![T::zero(); len * dim],
            dim,
        }
    }

    /// Builds a set from individual rows; all rows must share one dimension.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| FcmError::invalid("no rows given"))?
            .as_ref()
            .len();
        let mut out = Points::new(Vec::with_capacity(first * rows.len()), first)?;
        for row in rows {
            out.push(row.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, row: &[T]) -> Result<()> {
        if row.len() != self.dim {
            return Err(FcmError::DimensionMismatch {
                left: self.dim,
                right: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn view(&self) -> PointsRef<'_, T> {
        PointsRef {
            data: &self.data,
            dim: self.dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_inner(self) -> Vec<T> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }
}

/// Borrowed window over a [`Points`] buffer.
#[derive(Debug, Clone, Copy)]
pub struct PointsRef<'a, T> {
    data: &'a [T],
    dim: usize,
}

impl<'a, T: Scalar> PointsRef<'a, T> {
    pub fn new(data: &'a [T], dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(FcmError::invalid(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(PointsRef { data, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'a, T> {
        self.data.chunks_exact(self.dim)
    }

    /// Rows `range.start..range.end` as a new view.
    pub fn slice(&self, range: Range<usize>) -> PointsRef<'a, T> {
        PointsRef {
            data: &self.data[range.start * self.dim..range.end * self.dim],
            dim: self.dim,
        }
    }

    pub fn to_owned(&self) -> Points<T> {
        Points {
            data: self.data.to_vec(),
            dim: self.dim,
        }
    }

    /// Fails on the first NaN or infinite coordinate.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(pos) => Err(FcmError::invalid(format!(
                "non-finite coordinate in record {} (feature {})",
                pos / self.dim,
                pos % self.dim
            ))),
        }
    }

    /// Per-feature `(min, max)` over all rows.
    pub fn bounds(&self) -> Vec<(T, T)> {
        let mut out = vec![(T::infinity(), T::neg_infinity()); self.dim];
        for row in self.rows() {
            for (b, &v) in out.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        out
    }
}

impl<'a, T: Scalar> From<&'a Points<T>> for PointsRef<'a, T> {
    fn from(p: &'a Points<T>) -> Self {
        p.view()
    }
}
