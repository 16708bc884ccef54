//! Sparse matrices in canonical sorted-triplet form.

use crate::error::{Error, Result};

/// A sparse `rows × cols` matrix.
///
/// Entries are kept sorted by `(row, col)` with no duplicates, which makes the
/// triplet list double as CSR storage: `row_ptr[r]..row_ptr[r + 1]` indexes the
/// entries of row `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            entries: Vec::new(),
            row_ptr: vec![0; rows + 1],
        }
    }

    /// Build from arbitrary triplets. Duplicate coordinates are summed and
    /// explicit zeros are kept.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::shape(
                "SparseMatrix::from_triplets",
                format!("entry ({r}, {c}) outside {rows}x{cols}"),
            ));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        let mut row_ptr = vec![0; rows + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            entries,
            row_ptr,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries[self.row_ptr[r]..self.row_ptr[r + 1]]
            .iter()
            .map(|&(_, c, v)| (c, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.entries[self.row_ptr[r]..self.row_ptr[r + 1]];
        row.binary_search_by(|e| e.1.cmp(&c))
            .map(|i| row[i].2)
            .unwrap_or(0.0)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        SparseMatrix::from_triplets(self.cols, self.rows, t).expect("transpose stays in range")
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for &(r, c, v) in &self.entries {
            d[r][c] = v;
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, c, v) in &self.entries {
            s[c] += v;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_and_duplicate_merge() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (0, 0, 3.0)],
        )
        .unwrap();
        assert_eq!(m.entries(), &[(0, 0, 3.0), (0, 1, 2.0), (1, 2, 1.5)]);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.row(0).count(), 2);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn transpose_swaps() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 2, 1.0), (1, 0, 4.0)]).unwrap();
        let t = m.transpose();
        assert_eq!((t.rows(), t.cols()), (3, 2));
        assert_eq!(t.entries(), &[(0, 1, 4.0), (2, 0, 1.0)]);
    }
}
