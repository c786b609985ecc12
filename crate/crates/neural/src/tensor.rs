use crate::kernels::{axpy, dot};
use crate::{NeuralError, Result, Scalar};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Tensor2<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NeuralError::shape(
                "Tensor2::new",
                format!("{} elements", rows * cols),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Contiguous block of rows `[start, start + count)`.
    #[inline]
    pub fn rows_slice(&self, start: usize, count: usize) -> &[F] {
        &self.data[start * self.cols..(start + count) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = F::zero());
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NeuralError::NumericFault { op })
        }
    }

    /// `self · weightᵀ`, where `weight` is `(out × in)` and `self` is `(n × in)`.
    pub fn matmul_transposed(&self, weight: &Tensor2<F>) -> Result<Tensor2<F>> {
        if self.cols != weight.cols {
            return Err(NeuralError::shape(
                "matmul_transposed",
                format!("inner dim {}", weight.cols),
                format!("inner dim {}", self.cols),
            ));
        }
        let mut out = Tensor2::zeros(self.rows, weight.rows);
        for r in 0..self.rows {
            let x = self.row(r);
            let y = out.row_mut(r);
            for (o, yo) in y.iter_mut().enumerate() {
                *yo = dot(x, weight.row(o));
            }
        }
        Ok(out)
    }

    /// `self · weight`, where `self` is `(n × out)` and `weight` is `(out × in)`.
    pub fn matmul(&self, weight: &Tensor2<F>) -> Result<Tensor2<F>> {
        if self.cols != weight.rows {
            return Err(NeuralError::shape(
                "matmul",
                format!("inner dim {}", weight.rows),
                format!("inner dim {}", self.cols),
            ));
        }
        let mut out = Tensor2::zeros(self.rows, weight.cols);
        for r in 0..self.rows {
            let dy = self.row(r);
            let dx = out.row_mut(r);
            for (o, &g) in dy.iter().enumerate() {
                axpy(g, weight.row(o), dx);
            }
        }
        Ok(out)
    }

    /// `self += aᵀ · b`, with `a` `(n × rows)` and `b` `(n × cols)`.
    pub fn add_transposed_product(&mut self, a: &Tensor2<F>, b: &Tensor2<F>) -> Result<()> {
        if a.rows != b.rows || a.cols != self.rows || b.cols != self.cols {
            return Err(NeuralError::shape(
                "add_transposed_product",
                format!("({} x {})", self.rows, self.cols),
                format!("a=({} x {}), b=({} x {})", a.rows, a.cols, b.rows, b.cols),
            ));
        }
        for n in 0..a.rows {
            let bn = b.row(n);
            for (r, &g) in a.row(n).iter().enumerate() {
                axpy(g, bn, self.row_mut(r));
            }
        }
        Ok(())
    }

    /// Concatenate along columns; both operands must have the same row count.
    pub fn concat_cols(&self, other: &Tensor2<F>) -> Result<Tensor2<F>> {
        if self.rows != other.rows {
            return Err(NeuralError::shape(
                "concat_cols",
                format!("{} rows", self.rows),
                format!("{} rows", other.rows),
            ));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Tensor2 {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Split columns at `at` into `[0, at)` and `[at, cols)`.
    pub fn split_cols(&self, at: usize) -> (Tensor2<F>, Tensor2<F>) {
        assert!(at <= self.cols, "split point {at} beyond {} columns", self.cols);
        let mut left = Vec::with_capacity(self.rows * at);
        let mut right = Vec::with_capacity(self.rows * (self.cols - at));
        for r in 0..self.rows {
            let row = self.row(r);
            left.extend_from_slice(&row[..at]);
            right.extend_from_slice(&row[at..]);
        }
        (
            Tensor2 {
                rows: self.rows,
                cols: at,
                data: left,
            },
            Tensor2 {
                rows: self.rows,
                cols: self.cols - at,
                data: right,
            },
        )
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Tensor2<F> {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<G: Scalar>(&self) -> Tensor2<G> {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| G::from_f64(v.as_f64())).collect(),
        }
    }
}
