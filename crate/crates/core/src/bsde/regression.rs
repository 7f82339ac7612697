use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares conditional expectations on a polynomial basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionSpec {
    /// Maximal total degree of the monomials in the standardized state `B_t / √t`.
    pub degree: usize,
    /// Estimate row `i` of `z` from component `i` alone and evaluate
    /// generators row by row when the generator allows it.
    pub use_row_structure: bool,
    /// Weight of the node-`t_j` generator value in each step
    /// (`1` implicit, `½` trapezoidal, `0` explicit).
    pub theta: f64,
    /// Stopping tolerance of the implicit fixed point, relative to `1 + |y|`.
    pub picard_tol: f64,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self { degree: 3, use_row_structure: true, theta: 0.5, picard_tol: 1e-10 }
    }
}

/// Exponent tuples of all monomials in `d` variables with total degree `≤ degree`,
/// graded by degree.
pub fn monomial_exponents(d: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut cur = vec![0; d];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, remaining: usize) {
    if pos == cur.len() - 1 {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        fill(out, cur, pos + 1, remaining - e);
    }
}

/// Projection onto the span of basis functions evaluated on an ensemble.
pub struct Projector {
    n: usize,
    m: usize,
    /// Path-major basis values `phi[p * m + c]`.
    phi: Vec<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Projector {
    /// Basis at node `step` for states `x` (path-major, `d` per path).
    /// `constant_only` selects the one-element basis used at `t = 0`.
    pub fn new(step: usize, x: &[f64], d: usize, scale: f64, degree: usize, constant_only: bool) -> Result<Self> {
        let n = x.len() / d;
        let exps = if constant_only { vec![vec![0; d]] } else { monomial_exponents(d, degree) };
        let m = exps.len();
        if n < m {
            return Err(Error::RegressionSingular { step, basis_len: m, n_paths: n });
        }
        let mut phi = vec![0.0; n * m];
        let inv = 1.0 / scale;
        for p in 0..n {
            let xp = &x[p * d..(p + 1) * d];
            for (c, e) in exps.iter().enumerate() {
                let mut v = 1.0;
                for (l, &k) in e.iter().enumerate() {
                    v *= (xp[l] * inv).powi(k as i32);
                }
                phi[p * m + c] = v;
            }
        }
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for p in 0..n {
            let row = &phi[p * m..(p + 1) * m];
            for a in 0..m {
                for b in 0..=a {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        gram /= n as f64;
        let singular = || Error::RegressionSingular { step, basis_len: m, n_paths: n };
        let chol = gram.cholesky().ok_or_else(singular)?;
        let diag = chol.l_dirty().diagonal();
        let (mn, mx) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v.abs()), b.max(v.abs())));
        if !(mn * mn > 1e-13 * mx * mx) {
            return Err(singular());
        }
        Ok(Self { n, m, phi, chol })
    }

    pub fn basis_len(&self) -> usize {
        self.m
    }

    /// Coefficients of the projection of `target` (one value per path).
    pub fn coefficients(&self, target: &[f64]) -> DVector<f64> {
        let mut rhs = DVector::<f64>::zeros(self.m);
        for p in 0..self.n {
            let row = &self.phi[p * self.m..(p + 1) * self.m];
            let y = target[p];
            for c in 0..self.m {
                rhs[c] += row[c] * y;
            }
        }
        rhs /= self.n as f64;
        self.chol.solve(&rhs)
    }

    /// Fitted values of the projection of `target`, written to `out`.
    pub fn project(&self, target: &[f64], out: &mut [f64]) {
        let beta = self.coefficients(target);
        for p in 0..self.n {
            let row = &self.phi[p * self.m..(p + 1) * self.m];
            out[p] = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(monomial_exponents(1, 3).len(), 4);
        assert_eq!(monomial_exponents(2, 3).len(), 10);
        assert_eq!(monomial_exponents(3, 2).len(), 10);
        assert_eq!(monomial_exponents(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn reproduces_polynomials_exactly() {
        let x: Vec<f64> = (0..200).map(|i| -2.0 + 4.0 * i as f64 / 199.0).collect();
        let pr = Projector::new(1, &x, 1, 1.0, 3, false).unwrap();
        let target: Vec<f64> = x.iter().map(|v| 1.0 - v + 0.5 * v * v * v).collect();
        let mut out = vec![0.0; x.len()];
        pr.project(&target, &mut out);
        for (a, b) in out.iter().zip(&target) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_basis_gives_mean() {
        let x = vec![0.0; 4];
        let pr = Projector::new(0, &x, 1, 1.0, 3, true).unwrap();
        let mut out = vec![0.0; 4];
        pr.project(&[1.0, 2.0, 3.0, 6.0], &mut out);
        assert!(out.iter().all(|&v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn too_few_paths_is_singular() {
        let e = Projector::new(3, &[0.1, 0.2], 1, 1.0, 3, false).err().unwrap();
        assert!(matches!(e, Error::RegressionSingular { step: 3, basis_len: 4, n_paths: 2 }));
        let e = Projector::new(3, &[0.5; 10], 1, 1.0, 3, false).err().unwrap();
        assert!(matches!(e, Error::RegressionSingular { .. }));
    }
}
