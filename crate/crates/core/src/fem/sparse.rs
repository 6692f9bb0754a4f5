use crate::error::{Error, Result};

/// Compressed-row sparse matrix. Column indices are sorted within each row and
/// duplicates are summed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Position of `(r, c)` in the value array, if stored.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| span.start + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                for (c, v) in self.row(r) {
                    out[c] += v * yr;
                }
            }
        }
        out
    }

    /// `Σ coeffs[k] · mats[k]`, all of the same shape.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Self {
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        for (_, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols));
        }
        Self::from_triplets(
            nrows,
            ncols,
            terms
                .iter()
                .flat_map(|&(a, m)| m.triplets().map(move |(r, c, v)| (r, c, a * v))),
        )
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |K − Kᵀ|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    /// Symmetric Dirichlet elimination: rows and columns of `fixed` are
    /// zeroed and their diagonal set to one. Returns the modified matrix and
    /// the lifting `K[:, fixed] · g` that must be subtracted from the free
    /// entries of the right-hand side.
    pub fn eliminate_dirichlet(&self, fixed: &[bool], g: &[f64]) -> (SparseMatrix, Vec<f64>) {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut lift = vec![0.0; n];
        let mut out = self.clone();
        for r in 0..n {
            let span = out.indptr[r]..out.indptr[r + 1];
            for k in span {
                let c = out.indices[k];
                if fixed[r] {
                    out.values[k] = if c == r { 1.0 } else { 0.0 };
                } else if fixed[c] {
                    lift[r] += out.values[k] * g[c];
                    out.values[k] = 0.0;
                }
            }
        }
        (out, lift)
    }
}

/// Envelope (skyline) Cholesky factorization `A = L Lᵀ` of a symmetric
/// positive definite matrix. On the structured meshes used here the vertex
/// numbering gives a bandwidth of `n + 2`, so the envelope stays small.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// First stored column of each row of `L`.
    first: Vec<usize>,
    /// Offset of row `i` in `data`; row `i` holds columns `first[i]..=i`.
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl CholeskyFactor {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch {
                expected: a.nrows,
                got: a.ncols,
            });
        }
        let n = a.nrows;
        let mut first = Vec::with_capacity(n);
        for i in 0..n {
            let f = a
                .row(i)
                .filter(|&(_, v)| v != 0.0)
                .map(|(c, _)| c)
                .min()
                .unwrap_or(i)
                .min(i);
            first.push(f);
        }
        // the envelope must also cover the transposed pattern; A is symmetric
        // so the lower pattern suffices.
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        let mut data = vec![0.0; total];
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c >= first[i] && c <= i {
                    data[offset[i] + c - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = data[offset[i] + j - fi];
                let ri = &data[offset[i] + start - fi..offset[i] + j - fi];
                let rj = &data[offset[j] + start - fj..offset[j] + j - fj];
                for (x, y) in ri.iter().zip(rj) {
                    s -= x * y;
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    data[offset[i] + i - fi] = s.sqrt();
                } else {
                    data[offset[i] + j - fi] = s / data[offset[j] + j - fj];
                }
            }
        }
        Ok(CholeskyFactor {
            n,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[self.offset[i] + j - self.first[i]]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        self.solve_in_place(&mut y);
        y
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let mut s = x[i];
            for (k, lk) in row[..i - fi].iter().enumerate() {
                s -= lk * x[fi + k];
            }
            x[i] = s / self.l(i, i);
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            x[i] /= self.l(i, i);
            let xi = x[i];
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            for (k, lk) in row[..i - fi].iter().enumerate() {
                x[fi + k] -= lk * xi;
            }
        }
    }
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    Ok(CholeskyFactor::factor(a)?.solve(b))
}
