use crate::error::{Error, Result};

/// Elementwise binary operations on matrices of equal shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElemOp {
    Add,
    Sub,
    Mul,
}

impl ElemOp {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ElemOp::Add => a + b,
            ElemOp::Sub => a - b,
            ElemOp::Mul => a * b,
        }
    }
}

/// A dense row-major matrix of `f64` values.
///
/// Every matrix has at least one row and one column; the constructors reject
/// (or panic on, for the infallible ones) degenerate shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn shape_str(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}

impl Matrix {
    /// A matrix filled with zeros.
    ///
    /// # Panics
    /// Panics if `rows` or `cols` is zero.
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix by evaluating `f(row, col)` at every position.
    ///
    /// # Panics
    /// Panics if `rows` or `cols` is zero.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// The `n`-by-`n` identity matrix.
    ///
    /// # Panics
    /// Panics if `n` is zero.
    pub fn identity(n: usize) -> Matrix {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Wraps a row-major buffer as a `rows`-by-`cols` matrix.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape {
                op: "from_vec",
                lhs: shape_str(rows, cols),
                rhs: "at least 1x1".to_string(),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                lhs: shape_str(rows, cols),
                rhs: format!("{} values", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Shape {
                op: "from_rows",
                lhs: shape_str(rows.len(), rows.first().map_or(0, Vec::len)),
                rhs: "at least 1x1".to_string(),
            });
        }
        let cols = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Shape {
                op: "from_rows",
                lhs: shape_str(1, bad.len()),
                rhs: shape_str(1, cols),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
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

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col] = value;
    }

    /// One row as a contiguous slice.
    pub fn row(&self, row: usize) -> &[f64] {
        assert!(row < self.rows, "row index out of bounds");
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// The whole buffer in row-major order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the row-major buffer.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// One column copied out as a vector.
    pub fn col_vec(&self, col: usize) -> Vec<f64> {
        assert!(col < self.cols, "column index out of bounds");
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    /// `true` if every entry is finite (no NaN, no infinities).
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix product `self * other`.
    ///
    /// Each output entry accumulates its products in ascending order of the
    /// shared index, so results are reproducible down to the last bit.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                lhs: shape_str(self.rows, self.cols),
                rhs: shape_str(other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            for (k, &lhs_ik) in lhs_row.iter().enumerate() {
                let rhs_row = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &rhs_kj) in out_row.iter_mut().zip(rhs_row) {
                    *o += lhs_ik * rhs_kj;
                }
            }
        }
        Ok(out)
    }

    /// Elementwise combination of two equal-shaped matrices.
    pub fn elementwise(&self, other: &Matrix, op: ElemOp) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op: "elementwise",
                lhs: shape_str(self.rows, self.cols),
                rhs: shape_str(other.rows, other.cols),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| op.apply(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// The transpose of this matrix.
    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Copies the given rows (in the given order) into a new matrix.
    ///
    /// # Panics
    /// Panics if `indices` is empty or any index is out of bounds.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        assert!(!indices.is_empty(), "select_rows requires at least one row");
        Matrix::from_fn(indices.len(), self.cols, |i, j| self.get(indices[i], j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference product with the classic i-j-k loop nest. The production
    /// routine orders its loops differently but accumulates each output entry
    /// over ascending k all the same, so the two must agree exactly.
    fn matmul_ijk(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn matmul_two_by_two() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn matmul_row_times_column() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![4.0], vec![5.0], vec![6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 32.0);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "message should name the shapes: {msg}");
        assert!(msg.contains("matmul"), "message should name the op: {msg}");
    }

    #[test]
    fn elementwise_ops() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![10.0, 20.0], vec![30.0, 40.0]]).unwrap();
        assert_eq!(
            a.elementwise(&b, ElemOp::Add).unwrap().data(),
            &[11.0, 22.0, 33.0, 44.0]
        );
        assert_eq!(
            b.elementwise(&a, ElemOp::Sub).unwrap().data(),
            &[9.0, 18.0, 27.0, 36.0]
        );
        assert_eq!(
            a.elementwise(&b, ElemOp::Mul).unwrap().data(),
            &[10.0, 40.0, 90.0, 160.0]
        );
    }

    #[test]
    fn elementwise_rejects_shape_mismatch() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        let err = a.elementwise(&b, ElemOp::Add).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x2") && msg.contains("2x3"), "got: {msg}");
    }

    #[test]
    fn map_applies_to_every_entry() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0]]).unwrap();
        let doubled = a.map(|v| 2.0 * v);
        assert_eq!(doubled.data(), &[2.0, -4.0, 1.0, 0.0]);
    }

    #[test]
    fn transpose_of_rectangular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let t = a.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.row(0), &[1.0, 4.0]);
        assert_eq!(t.row(1), &[2.0, 5.0]);
        assert_eq!(t.row(2), &[3.0, 6.0]);
    }

    #[test]
    fn from_vec_validates_length() {
        let err = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0]).unwrap_err();
        assert!(err.to_string().contains("2x2"));
        assert!(Matrix::from_vec(2, 2, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn from_vec_rejects_empty_shapes() {
        assert!(Matrix::from_vec(0, 3, vec![]).is_err());
        assert!(Matrix::from_vec(3, 0, vec![]).is_err());
    }

    #[test]
    fn from_rows_rejects_ragged_input() {
        let err = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn select_rows_copies_in_order() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let picked = a.select_rows(&[2, 0]);
        assert_eq!(picked.row(0), &[5.0, 6.0]);
        assert_eq!(picked.row(1), &[1.0, 2.0]);
    }

    #[test]
    fn identity_is_left_and_right_neutral() {
        let a = Matrix::from_rows(&[vec![1.5, -2.0, 3.0], vec![0.0, 4.0, -1.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&Matrix::identity(3)).unwrap(), a);
    }

    fn small_matrix(max_dim: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-1.0e3..1.0e3f64, r * c)
                .prop_map(move |data| Matrix::from_vec(r, c, data).unwrap())
        })
    }

    /// Pair of matrices with a shared inner dimension, for products.
    fn matmul_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
        (1..=8usize, 1..=8usize, 1..=8usize).prop_flat_map(|(m, k, n)| {
            let a = proptest::collection::vec(-1.0e3..1.0e3f64, m * k)
                .prop_map(move |d| Matrix::from_vec(m, k, d).unwrap());
            let b = proptest::collection::vec(-1.0e3..1.0e3f64, k * n)
                .prop_map(move |d| Matrix::from_vec(k, n, d).unwrap());
            (a, b)
        })
    }

    proptest! {
        #[test]
        fn matmul_matches_reference_exactly((a, b) in matmul_pair()) {
            let fast = a.matmul(&b).unwrap();
            let reference = matmul_ijk(&a, &b);
            prop_assert_eq!(fast.data(), reference.data());
        }

        #[test]
        fn transpose_is_involutive(a in small_matrix(8)) {
            prop_assert_eq!(a.transpose().transpose(), a);
        }

        #[test]
        fn add_commutes(a in small_matrix(6)) {
            let b = a.map(|v| v * 0.5 - 1.0);
            prop_assert_eq!(
                a.elementwise(&b, ElemOp::Add).unwrap(),
                b.elementwise(&a, ElemOp::Add).unwrap()
            );
        }

        #[test]
        fn sub_from_self_is_zero(a in small_matrix(6)) {
            let z = a.elementwise(&a, ElemOp::Sub).unwrap();
            prop_assert!(z.data().iter().all(|&v| v == 0.0));
        }

        #[test]
        fn transpose_swaps_matmul_order((a, b) in matmul_pair()) {
            let left = a.matmul(&b).unwrap().transpose();
            let right = b.transpose().matmul(&a.transpose()).unwrap();
            // Same multiset of products per entry, but accumulated in the same
            // ascending-k order on both sides, so equality is exact.
            prop_assert_eq!(left, right);
        }
    }
}
