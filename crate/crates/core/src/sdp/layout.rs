//! Named decision variables mapped onto a flat index space.

use nalgebra::DMatrix;

use crate::expr::AffineExpr;
use crate::sdp::lmi::AffineMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    Scalar,
    /// Symmetric `n x n`; only the upper triangle is stored.
    Symmetric(usize),
    /// Dense `rows x cols`, row-major.
    Dense(usize, usize),
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Scalar => 1,
            VarShape::Symmetric(n) => n * (n + 1) / 2,
            VarShape::Dense(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarBlock {
    pub name: String,
    pub shape: VarShape,
    pub offset: usize,
}

/// Handle to a symmetric matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymVar {
    pub offset: usize,
    pub n: usize,
}

impl SymVar {
    /// Flat index of entry `(i, j)`; symmetric, so order does not matter.
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // upper triangle, row by row
        self.offset + i * self.n - i * (i + 1) / 2 + j
    }

    pub fn entry(&self, i: usize, j: usize) -> AffineExpr {
        AffineExpr::var(self.index(i, j))
    }

    pub fn matrix(&self) -> AffineMatrix {
        AffineMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j))
    }

    pub fn trace(&self) -> AffineExpr {
        let mut e = AffineExpr::zero();
        for i in 0..self.n {
            e.add_term(self.index(i, i), 1.0);
        }
        e
    }

    pub fn value(&self, values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| values[self.index(i, j)])
    }
}

/// Handle to a dense matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseVar {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl DenseVar {
    pub fn index(&self, i: usize, j: usize) -> usize {
        self.offset + i * self.cols + j
    }

    pub fn matrix(&self) -> AffineMatrix {
        AffineMatrix::from_fn(self.rows, self.cols, |i, j| AffineExpr::var(self.index(i, j)))
    }

    pub fn value(&self, values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| values[self.index(i, j)])
    }
}

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarVar(pub usize);

impl ScalarVar {
    pub fn expr(&self) -> AffineExpr {
        AffineExpr::var(self.0)
    }
}

/// Ordered registry of decision variables. Allocation order fixes the flat
/// layout, so identical build sequences give identical problems.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecisionLayout {
    blocks: Vec<VarBlock>,
    len: usize,
}

impl DecisionLayout {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, shape: VarShape) -> usize {
        assert!(
            self.find(name).is_none(),
            "decision variable `{name}` declared twice"
        );
        let offset = self.len;
        self.blocks.push(VarBlock {
            name: name.to_string(),
            shape,
            offset,
        });
        self.len += shape.len();
        offset
    }

    pub fn add_symmetric(&mut self, name: &str, n: usize) -> SymVar {
        let offset = self.push(name, VarShape::Symmetric(n));
        SymVar { offset, n }
    }

    pub fn add_dense(&mut self, name: &str, rows: usize, cols: usize) -> DenseVar {
        let offset = self.push(name, VarShape::Dense(rows, cols));
        DenseVar { offset, rows, cols }
    }

    pub fn add_scalar(&mut self, name: &str) -> ScalarVar {
        ScalarVar(self.push(name, VarShape::Scalar))
    }

    /// Number of scalar decision entries.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn find(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn symmetric(&self, name: &str) -> Option<SymVar> {
        match self.find(name)? {
            VarBlock {
                shape: VarShape::Symmetric(n),
                offset,
                ..
            } => Some(SymVar {
                offset: *offset,
                n: *n,
            }),
            _ => None,
        }
    }

    pub fn dense(&self, name: &str) -> Option<DenseVar> {
        match self.find(name)? {
            VarBlock {
                shape: VarShape::Dense(r, c),
                offset,
                ..
            } => Some(DenseVar {
                offset: *offset,
                rows: *r,
                cols: *c,
            }),
            _ => None,
        }
    }

    pub fn scalar(&self, name: &str) -> Option<ScalarVar> {
        match self.find(name)? {
            VarBlock {
                shape: VarShape::Scalar,
                offset,
                ..
            } => Some(ScalarVar(*offset)),
            _ => None,
        }
    }

    /// Name of the block owning flat index `k`, with the local offset.
    pub fn locate(&self, k: usize) -> Option<(&str, usize)> {
        self.blocks
            .iter()
            .find(|b| k >= b.offset && k < b.offset + b.shape.len())
            .map(|b| (b.name.as_str(), k - b.offset))
    }
}
