use crate::error::{check_len, Result};

/// Small row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            check_len("matrix column", rows, col.len())?;
            for (i, &v) in col.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("matrix-vector product", self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|i| super::dot(&self.data[i * self.cols..(i + 1) * self.cols], v))
            .collect())
    }
}

/// Unit-norm basis of the nullspace, by reduction to row echelon form with
/// partial pivoting. Pivots below `rel_tol * max|a_ij|` count as zero.
pub fn nullspace(a: &Matrix, rel_tol: f64) -> Vec<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    let mut r = a.data.clone();
    let scale = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let threshold = rel_tol * scale.max(f64::MIN_POSITIVE);

    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == m {
            break;
        }
        let (best, best_val) = (row..m)
            .map(|i| (i, r[i * n + col].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= threshold {
            continue;
        }
        if best != row {
            for j in 0..n {
                r.swap(row * n + j, best * n + j);
            }
        }
        let p = r[row * n + col];
        for j in 0..n {
            r[row * n + j] /= p;
        }
        for i in 0..m {
            if i == row {
                continue;
            }
            let f = r[i * n + col];
            if f != 0.0 {
                for j in 0..n {
                    r[i * n + j] -= f * r[row * n + j];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }

    let free: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![0.0; n];
            v[fc] = 1.0;
            for (pr, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -r[pr * n + fc];
            }
            let norm = super::norm(&v);
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_two() {
        // (a, b) x = 0 has nullvector proportional to (b, -a)
        let a = Matrix::new(1, 2, vec![0.5, 2.0]).unwrap();
        let ns = nullspace(&a, 1e-12);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert!((v[0] * 0.5 + v[1] * 2.0).abs() < 1e-15);
        assert!((super::super::norm(v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn full_rank_square_has_trivial_nullspace() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(nullspace(&a, 1e-12).is_empty());
    }

    #[test]
    fn rank_deficient_needs_pivoting() {
        // leading zero forces a row swap
        let a = Matrix::new(
            3,
            4,
            vec![0.0, 1.0, 2.0, 3.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 3.0, 3.0],
        )
        .unwrap();
        let ns = nullspace(&a, 1e-12);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            for r in a.mul_vec(v).unwrap() {
                assert!(r.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_matrix() {
        let a = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert_eq!(nullspace(&a, 1e-12).len(), 3);
    }
}
