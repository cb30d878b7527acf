//! Compressed sparse row storage for the assembled operators.

use std::io::Write;

use crate::error::Result;

/// Square CSR matrix with sorted column indices and no duplicate entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// (row, col, value) contribution; duplicates are summed on compression.
pub type Triplet = (usize, usize, f64);

impl CsrMatrix {
    /// Compresses triplets, summing duplicates in input order so that
    /// mirrored contributions produce bit-identical symmetric entries.
    pub fn from_triplets(n: usize, triplets: &[Triplet]) -> CsrMatrix {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        // counting sort by row keeps the input order within a row
        let mut next = counts.clone();
        let mut by_row = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            by_row[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut by_row[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                col_idx.push(c);
                values.push(sum);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Zero matrix whose row `3 v + f` holds columns `3 w + g` for every
    /// node w adjacent to v (including v itself), f, g in 0..block.
    pub fn block_pattern(adjacency: &[Vec<usize>], block: usize) -> CsrMatrix {
        let n = adjacency.len() * block;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for nbrs in adjacency {
            for _ in 0..block {
                for &w in nbrs {
                    col_idx.extend((0..block).map(|g| block * w + g));
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Adds to an entry that must already be part of the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        let k = self.col_idx[range.clone()]
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("entry ({i}, {j}) outside the sparsity pattern"));
        self.values[range.start + k] += v;
    }

    /// (A + Aᵀ) / 2, bitwise symmetric.
    pub fn symmetrized(&self) -> CsrMatrix {
        let trips: Vec<Triplet> = self
            .triplets()
            .map(|(i, j, v)| (i, j, 0.5 * (v + self.get(j, i))))
            .collect();
        CsrMatrix::from_triplets(self.n, &trips)
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// All stored entries as triplets, row-major.
    pub fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// xᵀ A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// max |A_ij − A_ji| over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Entrywise difference A − B.
    pub fn sub(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let trips: Vec<Triplet> = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, -v)))
            .collect();
        CsrMatrix::from_triplets(self.n, &trips)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// P A Pᵀ for the permutation sending old index i to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> CsrMatrix {
        let trips: Vec<Triplet> = self.triplets().map(|(i, j, v)| (perm[i], perm[j], v)).collect();
        CsrMatrix::from_triplets(self.n, &trips)
    }

    /// Drops stored zeros.
    pub fn pruned(&self) -> CsrMatrix {
        let trips: Vec<Triplet> = self.triplets().filter(|t| t.2 != 0.0).collect();
        CsrMatrix::from_triplets(self.n, &trips)
    }


    /// MatrixMarket coordinate format, symmetric: lower triangle only.
    pub fn write_matrix_market(&self, mut out: impl Write) -> Result<()> {
        let lower: Vec<Triplet> = self.triplets().filter(|&(i, j, _)| j <= i).collect();
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "{} {} {}", self.n, self.n, lower.len())?;
        for (i, j, v) in lower {
            writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}
