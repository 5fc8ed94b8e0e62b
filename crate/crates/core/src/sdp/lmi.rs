//! Matrices of affine expressions and linear matrix inequality blocks.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::expr::AffineExpr;

/// Dense matrix whose entries are affine in the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    rows: usize,
    cols: usize,
    data: Vec<AffineExpr>,
}

impl AffineMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> AffineExpr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        AffineMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| AffineExpr::zero())
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| AffineExpr::constant(m[(i, j)]))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(&DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &AffineExpr {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: AffineExpr) {
        self.data[i * self.cols + j] = e;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn add(&self, other: &AffineMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &AffineMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j).scale(s))
    }

    /// `C · self` for a constant `C`.
    pub fn left_mul(&self, c: &DMatrix<f64>) -> Self {
        assert_eq!(c.ncols(), self.rows);
        Self::from_fn(c.nrows(), self.cols, |i, j| {
            let mut e = AffineExpr::zero();
            for k in 0..self.rows {
                let ck = c[(i, k)];
                if ck != 0.0 {
                    e.axpy(ck, self.get(k, j));
                }
            }
            e
        })
    }

    /// `self · C` for a constant `C`.
    pub fn right_mul(&self, c: &DMatrix<f64>) -> Self {
        assert_eq!(self.cols, c.nrows());
        Self::from_fn(self.rows, c.ncols(), |i, j| {
            let mut e = AffineExpr::zero();
            for k in 0..self.cols {
                let ck = c[(k, j)];
                if ck != 0.0 {
                    e.axpy(ck, self.get(i, k));
                }
            }
            e
        })
    }

    /// Assembles a block matrix; `None` stands for a zero block. Block sizes
    /// are inferred per block-row and block-column.
    pub fn blocks(grid: &[Vec<Option<&AffineMatrix>>]) -> Self {
        let nbr = grid.len();
        let nbc = grid[0].len();
        let mut row_sizes = vec![None; nbr];
        let mut col_sizes = vec![None; nbc];
        for (bi, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), nbc, "ragged block grid");
            for (bj, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    assert!(row_sizes[bi].is_none_or(|r| r == m.rows), "block rows disagree");
                    assert!(col_sizes[bj].is_none_or(|c| c == m.cols), "block cols disagree");
                    row_sizes[bi] = Some(m.rows);
                    col_sizes[bj] = Some(m.cols);
                }
            }
        }
        let row_sizes: Vec<usize> = row_sizes.into_iter().map(|r| r.unwrap_or(0)).collect();
        let col_sizes: Vec<usize> = col_sizes.into_iter().map(|c| c.unwrap_or(0)).collect();
        let rows: usize = row_sizes.iter().sum();
        let cols: usize = col_sizes.iter().sum();
        let mut out = AffineMatrix::zeros(rows, cols);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    for i in 0..m.rows {
                        for j in 0..m.cols {
                            out.set(r0 + i, c0 + j, m.get(i, j).clone());
                        }
                    }
                }
                c0 += col_sizes[bj];
            }
            r0 += row_sizes[bi];
        }
        out
    }

    pub fn eval(&self, values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(values))
    }

    /// Builds an LMI `self ⪰ 0` (or `⪯ 0`). The matrix must be symmetric.
    pub fn into_lmi(self, name: &str, sense: Sense) -> LmiBlock {
        assert_eq!(self.rows, self.cols, "LMI block must be square");
        let n = self.rows;
        for i in 0..n {
            for j in i + 1..n {
                assert!(
                    nearly_equal(self.get(i, j), self.get(j, i)),
                    "LMI `{name}` is not symmetric at ({i},{j})"
                );
            }
        }
        // the upper triangle is authoritative; mirror it so blocks are exactly symmetric
        let mut constant = DMatrix::zeros(n, n);
        let mut coeffs: std::collections::BTreeMap<usize, DMatrix<f64>> = Default::default();
        for i in 0..n {
            for j in i..n {
                let e = self.get(i, j);
                constant[(i, j)] = e.constant;
                constant[(j, i)] = e.constant;
                for (k, v) in e.terms() {
                    let f = coeffs.entry(k).or_insert_with(|| DMatrix::zeros(n, n));
                    f[(i, j)] = v;
                    f[(j, i)] = v;
                }
            }
        }
        LmiBlock {
            name: name.to_string(),
            constant,
            coeffs: coeffs.into_iter().collect(),
            sense,
        }
    }
}

fn nearly_equal(a: &AffineExpr, b: &AffineExpr) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    let d = a - b;
    close(a.constant, b.constant)
        && d.terms().all(|(k, v)| {
            let av = a.terms().find(|t| t.0 == k).map_or(0.0, |t| t.1);
            close(av, av - v)
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `F(y) ⪰ 0`
    Psd,
    /// `F(y) ⪯ 0`
    Nsd,
}

/// `F(y) = F0 + Σ y_k F_k` constrained to the PSD or NSD cone.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub name: String,
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
    pub sense: Sense,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, values: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (k, f) in &self.coeffs {
            m += f * values[*k];
        }
        m
    }

    /// `F(y)` flipped so the constraint always reads `G ⪰ 0`.
    pub fn eval_oriented(&self, values: &[f64]) -> DMatrix<f64> {
        match self.sense {
            Sense::Psd => self.eval(values),
            Sense::Nsd => -self.eval(values),
        }
    }

    /// Smallest eigenvalue of the oriented matrix; `>= 0` means satisfied.
    pub fn margin(&self, values: &[f64]) -> f64 {
        min_eigenvalue(&self.eval_oriented(values))
    }

    /// Entry `(i, j)` as an affine expression of the oriented matrix.
    pub fn oriented_entry(&self, i: usize, j: usize) -> AffineExpr {
        let s = match self.sense {
            Sense::Psd => 1.0,
            Sense::Nsd => -1.0,
        };
        let mut e = AffineExpr::constant(s * self.constant[(i, j)]);
        for (k, f) in &self.coeffs {
            e.add_term(*k, s * f[(i, j)]);
        }
        e
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    -min_eigenvalue(&(-m))
}
