//! Compressed sparse row structure with a constant-pattern LU backend.
//!
//! KKT Jacobians here have a sparsity pattern that is fixed at synthesis
//! time, so the symbolic factorisation is computed once and only numeric
//! refactorisations happen inside Newton iterations. Factorisation is
//! delegated to `faer`'s sparse LU.

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, SymbolicSparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("pattern is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("factorization failed (matrix numerically singular)")]
    Singular,
    #[error("pattern construction failed: {0}")]
    Construction(String),
}

/// Row-major sparsity pattern with sorted, deduplicated column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from (row, col) sites; duplicates collapse.
    pub fn from_sites(nrows: usize, ncols: usize, sites: &[(usize, usize)]) -> Self {
        let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for &(r, c) in sites {
            debug_assert!(r < nrows && c < ncols, "site ({r},{c}) out of bounds");
            per_row[r].push(c);
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(sites.len());
        row_ptr.push(0);
        for cols in &mut per_row {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        SparsityPattern {
            nrows,
            ncols,
            row_ptr,
            col_idx,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of structural nonzeros.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Value-slot index of entry (row, col); panics if the site is not in
    /// the pattern (assembly must register every site it writes).
    pub fn slot(&self, row: usize, col: usize) -> usize {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        let k = self.col_idx[lo..hi]
            .binary_search(&col)
            .unwrap_or_else(|_| panic!("entry ({row},{col}) missing from pattern"));
        lo + k
    }

    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    /// Union with the identity diagonal (square patterns only).
    pub fn with_diagonal(&self) -> SparsityPattern {
        let mut sites: Vec<(usize, usize)> = Vec::with_capacity(self.nnz() + self.nrows);
        for r in 0..self.nrows {
            for &c in self.row_cols(r) {
                sites.push((r, c));
            }
            sites.push((r, r));
        }
        SparsityPattern::from_sites(self.nrows, self.ncols, &sites)
    }
}

/// Sparse matrix with values aligned to a fixed [`SparsityPattern`].
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: SparsityPattern,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: SparsityPattern) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.pattern.slot(row, col)]
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for r in 0..self.pattern.nrows {
            let lo = self.pattern.row_ptr[r];
            let hi = self.pattern.row_ptr[r + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.pattern.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// y = A^T x
    pub fn mul_vec_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for r in 0..self.pattern.nrows {
            let lo = self.pattern.row_ptr[r];
            let hi = self.pattern.row_ptr[r + 1];
            for k in lo..hi {
                y[self.pattern.col_idx[k]] += self.values[k] * x[r];
            }
        }
    }

    /// Dense copy, for small diagnostic problems only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.pattern.ncols]; self.pattern.nrows];
        for r in 0..self.pattern.nrows {
            let lo = self.pattern.row_ptr[r];
            let hi = self.pattern.row_ptr[r + 1];
            for k in lo..hi {
                dense[r][self.pattern.col_idx[k]] = self.values[k];
            }
        }
        dense
    }
}

/// LU solver that reuses one symbolic factorisation across numeric
/// refactorisations of matrices sharing a pattern.
pub struct LuSolver {
    n: usize,
    symbolic: faer::sparse::linalg::solvers::SymbolicLu<usize>,
    /// csc_target[k] = slot in the faer CSC value array fed by CSR slot k.
    csr_to_csc: Vec<usize>,
    csc_symbolic: SymbolicSparseColMat<usize>,
}

impl LuSolver {
    pub fn new(pattern: &SparsityPattern) -> Result<Self, SparseError> {
        if pattern.nrows != pattern.ncols {
            return Err(SparseError::NotSquare {
                rows: pattern.nrows,
                cols: pattern.ncols,
            });
        }
        let n = pattern.nrows;
        // Build the CSC twin and the CSR→CSC slot permutation via triplets
        // carrying their CSR slot id.
        let triplets: Vec<Triplet<usize, usize, f64>> = (0..n)
            .flat_map(|r| {
                let lo = pattern.row_ptr[r];
                let hi = pattern.row_ptr[r + 1];
                (lo..hi).map(move |k| Triplet::new(r, pattern.col_idx[k], k as f64))
            })
            .collect();
        let tagged = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| SparseError::Construction(format!("{e:?}")))?;
        let csr_to_csc: Vec<usize> = {
            let mut map = vec![0usize; pattern.nnz()];
            for (csc_slot, tag) in tagged.val().iter().enumerate() {
                map[*tag as usize] = csc_slot;
            }
            map
        };
        let csc_symbolic = tagged.symbolic().to_owned().unwrap();
        let symbolic =
            faer::sparse::linalg::solvers::SymbolicLu::try_new(tagged.symbolic())
                .map_err(|e| SparseError::Construction(format!("{e:?}")))?;
        Ok(LuSolver {
            n,
            symbolic,
            csr_to_csc,
            csc_symbolic,
        })
    }

    /// Factorises the CSR values and returns a factor object for solves.
    pub fn factor(&self, matrix: &SparseMatrix) -> Result<LuFactor, SparseError> {
        let mut csc_vals = vec![0.0f64; matrix.values().len()];
        for (csr_slot, &v) in matrix.values().iter().enumerate() {
            csc_vals[self.csr_to_csc[csr_slot]] = v;
        }
        if csc_vals.iter().any(|v| !v.is_finite()) {
            return Err(SparseError::Singular);
        }
        let mat = SparseColMat::<usize, f64>::new(self.csc_symbolic.clone(), csc_vals);
        let lu = faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(
            self.symbolic.clone(),
            mat.as_ref(),
        )
        .map_err(|_| SparseError::Singular)?;
        Ok(LuFactor { n: self.n, lu })
    }
}

pub struct LuFactor {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuFactor {
    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), SparseError> {
        assert_eq!(b.len(), self.n);
        let rhs = faer::MatMut::from_column_major_slice_mut(b, self.n, 1);
        self.lu.solve_in_place_with_conj(faer::Conj::No, rhs);
        if b.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SparseError::Singular)
        }
    }
}
