//! Partitioned variables. Matrix-shaped blocks are stored column-major, so a
//! block of shape `rows x cols` occupies `rows * cols` consecutive entries.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector, DVectorView};
use std::fmt;
use std::ops::Range;

/// Shape of one block of a partitioned variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Vector(usize),
    Matrix { rows: usize, cols: usize },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape::Matrix { rows, cols }
    }

    /// `(rows, cols)` view of the shape; vectors are single columns.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Shape::Vector(n) => (n, 1),
            Shape::Matrix { rows, cols } => (rows, cols),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Vector(n) => write!(f, "{n}"),
            Shape::Matrix { rows, cols } => write!(f, "{rows}x{cols}"),
        }
    }
}

/// Ordered list of block shapes together with their offsets in the packed vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockLayout {
    shapes: Vec<Shape>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockLayout {
    pub fn new(shapes: Vec<Shape>) -> Self {
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut total = 0;
        for s in &shapes {
            offsets.push(total);
            total += s.len();
        }
        Self {
            shapes,
            offsets,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn num_blocks(&self) -> usize {
        self.shapes.len()
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn shape(&self, i: usize) -> Shape {
        self.shapes[i]
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.shapes[i].len()
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.shapes.len()).map(move |i| self.range(i))
    }
}

/// A packed vector together with the layout describing its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T: Real> {
    layout: BlockLayout,
    data: DVector<T>,
}

impl<T: Real> BlockVector<T> {
    pub fn new(layout: BlockLayout, data: DVector<T>) -> Result<Self> {
        if layout.len() != data.len() {
            return Err(Error::dims("block vector", layout.len(), data.len()));
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        let data = DVector::zeros(layout.len());
        Self { layout, data }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn data(&self) -> &DVector<T> {
        &self.data
    }

    pub fn into_data(self) -> DVector<T> {
        self.data
    }

    pub fn block(&self, i: usize) -> DVectorView<'_, T> {
        let r = self.layout.range(i);
        self.data.rows(r.start, r.len())
    }

    /// Copies block `i` into a matrix of its declared shape.
    pub fn block_matrix(&self, i: usize) -> DMatrix<T> {
        let (rows, cols) = self.layout.shape(i).dims();
        DMatrix::from_column_slice(rows, cols, self.block(i).as_slice())
    }

    pub fn set_block(&mut self, i: usize, v: &[T]) -> Result<()> {
        let r = self.layout.range(i);
        if v.len() != r.len() {
            return Err(Error::dims("block assignment", r.len(), v.len()));
        }
        self.data.as_mut_slice()[r].copy_from_slice(v);
        Ok(())
    }
}

/// Column-major flattening of a matrix.
pub fn vec_of<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec<T: Real>(v: &[T], rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(rows, cols, v)
}
