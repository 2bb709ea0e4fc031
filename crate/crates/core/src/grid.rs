//! Dense row-major rasters on the label grid.

use thiserror::Error;

/// Smallest distance a clamped score keeps from 0 and 1.
pub const SCORE_CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("buffer of length {len} does not fill a {rows}x{cols} grid")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("value {value} at ({row}, {col}) is outside {range}")]
    OutOfRange {
        row: usize,
        col: usize,
        value: f64,
        range: &'static str,
    },
}

/// Row-major 2D raster. Cell `(r, c)` lives at `data[r * cols + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T: Clone + Default> Grid<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::default())
    }
}

impl<T> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, GridError> {
        if data.len() != rows * cols {
            return Err(GridError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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

    pub fn get(&self, row: usize, col: usize) -> Option<&T> {
        (row < self.rows && col < self.cols).then(|| &self.data[row * self.cols + col])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// `(row, col, value)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &T)> + '_ {
        let cols = self.cols.max(1);
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / cols, i % cols, v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_shape<U>(&self, other: &Grid<U>) -> Result<(), GridError> {
        if self.shape() != other.shape() {
            return Err(GridError::ShapeMismatch(
                self.rows,
                self.cols,
                other.rows,
                other.cols,
            ));
        }
        Ok(())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Grid<T> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        assert!(r < self.rows && c < self.cols, "cell ({r}, {c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        assert!(r < self.rows && c < self.cols, "cell ({r}, {c}) out of bounds");
        &mut self.data[r * self.cols + c]
    }
}

/// Label-grid cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Binary labels or predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMap(Grid<bool>);

impl BinaryMap {
    pub fn new(grid: Grid<bool>) -> Self {
        Self(grid)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Grid::new(rows, cols))
    }

    /// Cells strictly above `threshold` become positive.
    pub fn from_threshold(values: &Grid<f64>, threshold: f64) -> Self {
        Self(values.map(|&v| v > threshold))
    }

    pub fn grid(&self) -> &Grid<bool> {
        &self.0
    }

    pub fn grid_mut(&mut self) -> &mut Grid<bool> {
        &mut self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn count_ones(&self) -> usize {
        self.0.as_slice().iter().filter(|&&b| b).count()
    }

    pub fn or(&self, other: &BinaryMap) -> Result<BinaryMap, GridError> {
        self.0.ensure_same_shape(&other.0)?;
        let data = self
            .0
            .as_slice()
            .iter()
            .zip(other.0.as_slice())
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(BinaryMap(Grid::from_vec(self.0.rows(), self.0.cols(), data)?))
    }

    /// As 0.0 / 1.0 values, e.g. for writing a mask image.
    pub fn to_f64(&self) -> Grid<f64> {
        self.0.map(|&b| if b { 1.0 } else { 0.0 })
    }
}

/// Dense prediction scores in `[0, 1]`.
///
/// Values are stored as given; loss kernels read them through [`ScoreMap::clamped`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap(Grid<f64>);

impl ScoreMap {
    pub fn new(grid: Grid<f64>) -> Result<Self, GridError> {
        for (row, col, &value) in grid.cells() {
            if !(0.0..=1.0).contains(&value) {
                return Err(GridError::OutOfRange {
                    row,
                    col,
                    value,
                    range: "[0, 1]",
                });
            }
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn clamped(&self, row: usize, col: usize) -> f64 {
        clamp_score(self.0[(row, col)])
    }
}

pub fn clamp_score(p: f64) -> f64 {
    p.clamp(SCORE_CLAMP_EPS, 1.0 - SCORE_CLAMP_EPS)
}
