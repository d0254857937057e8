use num_complex::Complex64;

/// Small column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.data[c * rows + r] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub(crate) fn get(&self, r: usize, c: usize) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }

    pub(crate) fn get_mut(&mut self, r: usize, c: usize) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }

    pub fn column(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (c, xc) in x.iter().enumerate() {
            for (yr, a) in y.iter_mut().zip(self.column(c)) {
                *yr += a * xc;
            }
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for c in 0..other.cols {
            let mut col = vec![Complex64::new(0.0, 0.0); self.rows];
            self.matvec(other.column(c), &mut col);
            out.column_mut(c).copy_from_slice(&col);
        }
        out
    }

    pub fn adjoint(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// Leading `rows × cols` block.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |r, c| *self.get(r0 + r, c0 + c))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest entry of `|A − Aᴴ|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.cols {
            for r in 0..self.rows {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}
