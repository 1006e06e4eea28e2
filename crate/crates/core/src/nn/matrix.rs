use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T> Matrix<T> {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let cols = self.cols;
        &mut self.data[i * cols..(i + 1) * cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics; a zero-width matrix still has `rows` empty rows
        (0..self.rows).map(move |i| self.row(i))
    }

}

impl<T: Copy> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Columns `start..end` of every row.
    pub fn column_block(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols, "column block out of range");
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for row in self.iter_rows() {
            data.extend_from_slice(&row[start..end]);
        }
        Self {
            rows: self.rows,
            cols: end - start,
            data,
        }
    }

}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix<T>) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        T::gemm(
            self.rows,
            self.cols,
            rhs.cols,
            T::one(),
            &self.data,
            self.cols as isize,
            1,
            &rhs.data,
            rhs.cols as isize,
            1,
            T::zero(),
            &mut out.data,
            rhs.cols as isize,
            1,
        );
        Ok(out)
    }

    /// `self^T * rhs`, without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix<T>) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.cols, rhs.cols);
        T::gemm(
            self.cols,
            self.rows,
            rhs.cols,
            T::one(),
            &self.data,
            1,
            self.cols as isize,
            &rhs.data,
            rhs.cols as isize,
            1,
            T::zero(),
            &mut out.data,
            rhs.cols as isize,
            1,
        );
        Ok(out)
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &Matrix<T>) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by ({}x{})^T",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.rows);
        T::gemm(
            self.rows,
            self.cols,
            rhs.rows,
            T::one(),
            &self.data,
            self.cols as isize,
            1,
            &rhs.data,
            1,
            rhs.cols as isize,
            T::zero(),
            &mut out.data,
            rhs.rows as isize,
            1,
        );
        Ok(out)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}
