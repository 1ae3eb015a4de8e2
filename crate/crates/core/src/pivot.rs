use crate::error::{Error, Result};
use crate::matrix::MatMut;

/// Row interchanges recorded by partial pivoting.
///
/// Entry `k` says that row `k` was exchanged with row `ipiv[k]` (both local
/// to the factored window, `ipiv[k] >= k`). `offset` is the global row index
/// of local row 0, so the interchange in matrix coordinates is
/// `offset + k <-> offset + ipiv[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PivotVector {
    ipiv: Vec<usize>,
    offset: usize,
}

impl PivotVector {
    pub fn identity(n: usize) -> Self {
        PivotVector {
            ipiv: (0..n).collect(),
            offset: 0,
        }
    }

    pub fn from_indices(ipiv: Vec<usize>, offset: usize) -> Result<Self> {
        if let Some((k, &p)) = ipiv.iter().enumerate().find(|(k, &p)| p < *k) {
            return Err(Error::OutOfRange {
                op: "PivotVector::from_indices",
                index: p,
                limit: k,
            });
        }
        Ok(PivotVector { ipiv, offset })
    }

    pub(crate) fn from_raw(ipiv: Vec<usize>, offset: usize) -> Self {
        debug_assert!(ipiv.iter().enumerate().all(|(k, &p)| p >= k));
        PivotVector { ipiv, offset }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ipiv.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ipiv.is_empty()
    }

    #[inline]
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.ipiv
    }

    /// Pivot rows in matrix coordinates (`offset` added).
    pub fn global(&self) -> Vec<usize> {
        self.ipiv.iter().map(|&p| p + self.offset).collect()
    }

    /// Largest row index (matrix coordinates) touched by the interchanges.
    fn max_row(&self) -> Option<usize> {
        self.ipiv
            .iter()
            .enumerate()
            .map(|(k, &p)| k.max(p) + self.offset)
            .max()
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        match self.max_row() {
            Some(r) if r >= rows => Err(Error::OutOfRange {
                op: "laswp",
                index: r,
                limit: rows.saturating_sub(1),
            }),
            _ => Ok(()),
        }
    }

    /// Applies the interchanges in ascending order to every column of `a`.
    pub fn apply(&self, mut a: MatMut<'_>) -> Result<()> {
        self.check_rows(a.rows())?;
        for j in 0..a.cols() {
            self.apply_to_column(a.col_mut(j));
        }
        Ok(())
    }

    /// Undoes [`PivotVector::apply`] by applying the interchanges in descending order.
    pub fn apply_reverse(&self, mut a: MatMut<'_>) -> Result<()> {
        self.check_rows(a.rows())?;
        for j in 0..a.cols() {
            let col = a.col_mut(j);
            for (k, &p) in self.ipiv.iter().enumerate().rev() {
                col.swap(k + self.offset, p + self.offset);
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_to_column(&self, col: &mut [f64]) {
        for (k, &p) in self.ipiv.iter().enumerate() {
            if p != k {
                col.swap(k + self.offset, p + self.offset);
            }
        }
    }

    /// The permutation `perm` with `(P*A)[i] = A[perm[i]]` on `rows` rows.
    pub fn to_permutation(&self, rows: usize) -> Result<Vec<usize>> {
        self.check_rows(rows)?;
        let mut perm: Vec<usize> = (0..rows).collect();
        for (k, &p) in self.ipiv.iter().enumerate() {
            perm.swap(k + self.offset, p + self.offset);
        }
        Ok(perm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    #[test]
    fn rejects_pivot_above_diagonal() {
        assert!(PivotVector::from_indices(vec![1, 0], 0).is_err());
        assert!(PivotVector::from_indices(vec![2, 1, 2], 0).is_ok());
    }

    #[test]
    fn identity_is_noop() {
        let a = Matrix::random(5, 3, 2);
        let mut b = a.clone();
        PivotVector::identity(5).apply(b.as_mut()).unwrap();
        assert!(a.bitwise_eq(&b));
    }

    #[test]
    fn single_swap() {
        let mut a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        PivotVector::from_indices(vec![2], 0)
            .unwrap()
            .apply(a.as_mut())
            .unwrap();
        assert_eq!(a.to_rows(), vec![vec![5.0, 6.0], vec![3.0, 4.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn out_of_range_rows() {
        let mut a = Matrix::zeros(3, 2);
        let p = PivotVector::from_indices(vec![3], 0).unwrap();
        assert!(p.apply(a.as_mut()).is_err());
        let p = PivotVector::from_indices(vec![0, 1], 2).unwrap();
        assert!(p.apply(a.as_mut()).is_err());
    }

    #[test]
    fn permutation_matches_apply() {
        let p = PivotVector::from_indices(vec![2, 2, 3], 1).unwrap();
        let perm = p.to_permutation(5).unwrap();
        let a = Matrix::random(5, 1, 4);
        let mut b = a.clone();
        p.apply(b.as_mut()).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            assert_eq!(b.get(i, 0).to_bits(), a.get(src, 0).to_bits());
        }
    }

    proptest! {
        #[test]
        fn apply_then_reverse_restores(
            seed in any::<u64>(),
            raw in proptest::collection::vec(0usize..1000, 0..40),
        ) {
            let rows = 100;
            let ipiv: Vec<usize> = raw.iter().enumerate().map(|(k, r)| k + r % (rows - k)).collect();
            let p = PivotVector::from_indices(ipiv, 0).unwrap();
            let a = Matrix::random(rows, 40, seed);
            let mut b = a.clone();
            p.apply(b.as_mut()).unwrap();
            p.apply_reverse(b.as_mut()).unwrap();
            prop_assert!(a.bitwise_eq(&b));
        }
    }
}
