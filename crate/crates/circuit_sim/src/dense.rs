//! Small in-place dense LU solver with partial pivoting, with reusable
//! storage for the per-step Newton solves.

use crate::{Result, SimError};

#[derive(Debug, Clone, Default)]
pub struct DenseSolver {
    n: usize,
    a: Vec<f64>,
    pivots: Vec<usize>,
}

impl DenseSolver {
    pub fn resize(&mut self, n: usize) {
        self.n = n;
        self.a.resize(n * n, 0.0);
        self.pivots.resize(n, 0);
    }

    pub fn clear(&mut self) {
        self.a.fill(0.0);
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    /// Factor and solve A x = b in place; `b` becomes the solution.
    pub fn solve(&mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        assert_eq!(b.len(), n);
        for col in 0..n {
            let mut piv = col;
            let mut best = self.a[col * n + col].abs();
            for row in col + 1..n {
                let v = self.a[row * n + col].abs();
                if v > best {
                    best = v;
                    piv = row;
                }
            }
            if best < 1e-300 || !best.is_finite() {
                return Err(SimError::Netlist(format!(
                    "singular MNA matrix at pivot {col}"
                )));
            }
            self.pivots[col] = piv;
            if piv != col {
                for k in 0..n {
                    self.a.swap(col * n + k, piv * n + k);
                }
                b.swap(col, piv);
            }
            let inv = 1.0 / self.a[col * n + col];
            for row in col + 1..n {
                let f = self.a[row * n + col] * inv;
                if f == 0.0 {
                    continue;
                }
                self.a[row * n + col] = f;
                for k in col + 1..n {
                    self.a[row * n + k] -= f * self.a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in i + 1..n {
                acc -= self.a[i * n + k] * b[k];
            }
            b[i] = acc / self.a[i * n + i];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_3x3() {
        let mut s = DenseSolver::default();
        s.resize(3);
        s.clear();
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                s.add(i, j, a[i][j]);
            }
        }
        let x_true = [1.0, -2.0, 0.5];
        let mut b = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a[i][j] * x_true[j];
            }
        }
        s.solve(&mut b).unwrap();
        for (got, want) in b.iter().zip(x_true) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_singular() {
        let mut s = DenseSolver::default();
        s.resize(2);
        s.clear();
        s.add(0, 0, 1.0);
        s.add(0, 1, 1.0);
        s.add(1, 0, 1.0);
        s.add(1, 1, 1.0);
        let mut b = [1.0, 2.0];
        assert!(s.solve(&mut b).is_err());
    }
}
