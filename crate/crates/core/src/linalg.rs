//! Small dense linear algebra used across the crate.
//!
//! Matrices here are tiny (block graphs of a few dozen states), so everything
//! is row-major `Vec<Vec<f64>>` with nalgebra reserved for singular values
//! and general eigenvalues.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = Vec<Vec<f64>>;

/// Residual target for eigenvector iterations.
pub const EIGEN_RESIDUAL: f64 = 1e-12;

const MAX_POWER_STEPS: usize = 1_000_000;
const SQUARINGS: usize = 48;

/// Perron data of a nonnegative irreducible matrix.
#[derive(Debug, Clone)]
pub struct Perron {
    pub rho: f64,
    /// Right eigenvector, normalized to unit sum.
    pub right: Vec<f64>,
    /// Left eigenvector, normalized to unit sum.
    pub left: Vec<f64>,
}

pub fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn vec_mat(v: &[f64], m: &Matrix) -> Vec<f64> {
    let n = m.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (vi, row) in v.iter().zip(m) {
        if *vi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += vi * a;
        }
    }
    out
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    a.iter().map(|row| vec_mat(row, b)).collect()
}

pub fn transpose(m: &Matrix) -> Matrix {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| (0..rows).map(|i| m[i][j]).collect())
        .collect()
}

fn normalize_sum(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Repeated squaring with rescaling: the rows and columns of `M^(2^k)` align
/// with the Perron vectors long before plain power iteration would.
fn squared_limit(m: &Matrix) -> Matrix {
    let mut s = m.clone();
    for _ in 0..SQUARINGS {
        let mut next = mat_mul(&s, &s);
        let scale = next
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        next.iter_mut()
            .flat_map(|r| r.iter_mut())
            .for_each(|x| *x /= scale);
        s = next;
    }
    s
}

fn polish_right(m: &Matrix, mut v: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    normalize_sum(&mut v);
    for _ in 0..MAX_POWER_STEPS {
        let mv = mat_vec(m, &v);
        let lambda: f64 = mv.iter().sum();
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidSpace("matrix has no positive Perron root".into()));
        }
        let next: Vec<f64> = mv.iter().map(|x| x / lambda).collect();
        let resid = next
            .iter()
            .zip(&v)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        v = next;
        if resid <= EIGEN_RESIDUAL * max_abs(&v) {
            return Ok((lambda, v));
        }
    }
    Err(Error::InvalidSpace("power iteration did not converge".into()))
}

/// Perron root and eigenvectors of a nonnegative irreducible matrix.
pub fn perron(m: &Matrix) -> Result<Perron> {
    let n = m.len();
    if n == 0 {
        return Err(Error::InvalidSpace("empty matrix".into()));
    }
    let s = squared_limit(m);
    let ones = vec![1.0; n];
    let mut r0 = mat_vec(&s, &ones);
    let mut l0 = vec_mat(&ones, &s);
    if r0.iter().all(|x| *x == 0.0) {
        r0 = ones.clone();
    }
    if l0.iter().all(|x| *x == 0.0) {
        l0 = ones;
    }
    let (_, right) = polish_right(m, r0)?;
    let (_, left) = polish_right(&transpose(m), l0)?;
    // Rayleigh-type quotient is accurate to second order in the vector error.
    let num: f64 = left.iter().zip(mat_vec(m, &right)).map(|(a, b)| a * b).sum();
    let den: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    Ok(Perron {
        rho: num / den,
        right,
        left,
    })
}

/// Stationary distribution of a row-stochastic matrix, computed on the lazy
/// chain `(P + I)/2` so periodic chains converge as well.
pub fn stationary(p: &Matrix) -> Result<Vec<f64>> {
    let n = p.len();
    let lazy: Matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| 0.5 * p[i][j] + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect();
    let s = squared_limit(&lazy);
    let ones = vec![1.0 / n as f64; n];
    let mut pi = vec_mat(&ones, &s);
    normalize_sum(&mut pi);
    for _ in 0..MAX_POWER_STEPS {
        let mut next = vec_mat(&pi, &lazy);
        normalize_sum(&mut next);
        let resid = next
            .iter()
            .zip(&pi)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        pi = next;
        if resid <= EIGEN_RESIDUAL {
            return Ok(pi);
        }
    }
    Err(Error::InvalidMeasure("stationary iteration did not converge".into()))
}

pub fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, cols, |i, j| m[i][j])
}

/// Operator 2-norm (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values().max()
}

/// Spectral radius of a general real square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Condition number in the 2-norm; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perron_of_golden_mean_matrix() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 0.0]];
        let p = perron(&m).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.rho - phi).abs() < 1e-13);
        // right eigenvector proportional to (phi, 1)
        assert!((p.right[0] / p.right[1] - phi).abs() < 1e-10);
    }

    #[test]
    fn stationary_of_periodic_chain() {
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let pi = stationary(&p).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_of_absorbing_chain() {
        let p = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let pi = stationary(&p).unwrap();
        assert!((pi[0] - 1.0).abs() < 1e-12);
        assert!(pi[1].abs() < 1e-12);
    }

    #[test]
    fn norms_of_diagonal() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert!((op_norm(&d) - 2.0).abs() < 1e-14);
        assert!((spectral_radius(&d) - 2.0).abs() < 1e-14);
        assert!((condition_number(&d) - 4.0).abs() < 1e-12);
    }
}
