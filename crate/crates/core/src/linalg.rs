//! Dense LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Row-major `PA = LU` factorization of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    /// Unit-lower `L` below the diagonal, `U` on and above it.
    lu: Vec<f64>,
    perm: Vec<usize>,
    swaps: usize,
    singular: bool,
}

impl Lu {
    pub fn factor(n: usize, mut a: Vec<f64>) -> Lu {
        assert_eq!(a.len(), n * n, "matrix must be n x n");
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = false;
        for k in 0..n {
            let (piv, max) =
                (k..n)
                    .map(|r| (r, a[r * n + k].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if max == 0.0 {
                singular = true;
                continue;
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
                swaps += 1;
            }
            let pivot = a[k * n + k];
            for r in (k + 1)..n {
                let f = a[r * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                a[r * n + k] = f;
                for c in (k + 1)..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
            }
        }
        Lu {
            n,
            lu: a,
            perm,
            swaps,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// `(sign, ln|det|)`; sign is 0 for an exactly singular matrix.
    pub fn log_det(&self) -> (f64, f64) {
        if self.singular {
            return (0.0, f64::NEG_INFINITY);
        }
        let mut sign = if self.swaps.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let mut log = 0.0;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k];
            if d < 0.0 {
                sign = -sign;
            }
            log += d.abs().ln();
        }
        (sign, log)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.singular {
            return Err(Error::Numerical("singular matrix".into()));
        }
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let row = &self.lu[r * n..r * n + r];
            let acc = compensated_sum(row.iter().zip(&y[..r]).map(|(l, y)| -l * y));
            y[r] += acc;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n + r + 1..(r + 1) * n];
            let acc = compensated_sum(row.iter().zip(&y[r + 1..]).map(|(u, x)| -u * x));
            y[r] = (y[r] + acc) / self.lu[r * n + r];
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[2, 1], [4, 3]] x = [3, 7] => x = [1, 1]
        let lu = Lu::factor(2, vec![2.0, 1.0, 4.0, 3.0]);
        let x = lu.solve(&[3.0, 7.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let (s, l) = lu.log_det();
        assert_eq!(s, 1.0);
        assert!((l.exp() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn determinant_sign_and_singularity() {
        let lu = Lu::factor(2, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(lu.log_det().0, -1.0);
        let lu = Lu::factor(2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(lu.is_singular() || lu.log_det().1 < -30.0);
        let lu = Lu::factor(2, vec![0.0, 0.0, 0.0, 1.0]);
        assert!(lu.is_singular());
        assert!(lu.solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
