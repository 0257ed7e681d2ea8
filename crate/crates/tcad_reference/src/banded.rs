//! Symmetric positive-definite banded Cholesky solver.
//!
//! The Poisson Jacobian (stiffness plus positive carrier diagonal) is SPD,
//! and structured device meshes give a small bandwidth in natural node
//! order, so a dense-band LL^T factorization is both exact and fast.

use crate::{Result, TcadError};

/// Lower-band storage: `band[d * n + j]` holds A[j+d][j] for d in 0..=bw.
pub struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; (bw + 1) * n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        // symmetric: store only the lower triangle
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(d <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.band[d * self.n + lo] += v;
    }

    /// In-place LL^T factorization. Fails on a non-positive pivot.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let bw = self.bw;
        for j in 0..n {
            let mut diag = self.band[j];
            for k in j.saturating_sub(bw)..j {
                let d = j - k;
                let l = self.band[d * n + k];
                diag -= l * l;
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(TcadError::InvalidArgument(format!(
                    "matrix is not positive definite at pivot {j} ({diag:e})"
                )));
            }
            let ljj = diag.sqrt();
            self.band[j] = ljj;
            let last = (j + bw).min(n - 1);
            for i in j + 1..=last {
                let mut v = self.band[(i - j) * n + j];
                let klo = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in klo..j {
                    v -= self.band[(i - k) * n + k] * self.band[(j - k) * n + k];
                }
                self.band[(i - j) * n + j] = v / ljj;
            }
        }
        Ok(())
    }

    /// Solve L L^T x = b after `factor`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let bw = self.bw;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let mut v = x[i];
            for k in i.saturating_sub(bw)..i {
                v -= self.band[(i - k) * n + k] * x[k];
            }
            x[i] = v / self.band[i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut v = x[i];
            let last = (i + bw).min(n - 1);
            for k in i + 1..=last {
                v -= self.band[(k - i) * n + i] * x[k];
            }
            x[i] = v / self.band[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_laplacian() {
        // -u'' = 1 on 5 interior nodes, h = 1: A = tridiag(-1, 2, -1)
        let n = 5;
        let mut a = BandedSpd::new(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i + 1 < n {
                a.add(i + 1, i, -1.0);
            }
        }
        a.factor().unwrap();
        let x = a.solve(&vec![1.0; n]);
        // exact: x_i = i(n+1-i)... for this system x = [2.5, 4, 4.5, 4, 2.5]
        let expect = [2.5, 4.0, 4.5, 4.0, 2.5];
        for (got, want) in x.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandedSpd::new(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        assert!(a.factor().is_err());
    }
}
