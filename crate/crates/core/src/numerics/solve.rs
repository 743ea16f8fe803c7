use super::mat::Mat;
use crate::error::{check_len, Error, Result};

/// Smallest acceptable Cholesky pivot, relative to the largest diagonal entry.
const PIVOT_RTOL: f64 = 1e-14;

/// Cholesky factor `L` (lower triangular, row-major) of a symmetric
/// positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &Mat) -> Result<Self> {
        check_len("cholesky (square)", a.rows(), a.cols())?;
        let n = a.rows();
        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                if i == j {
                    if !(s > PIVOT_RTOL * scale) {
                        return Err(Error::Singular { pivot: s, row: i });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for p in 0..i {
                s -= self.l[i * n + p] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for p in (i + 1)..n {
                s -= self.l[p * n + i] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}
