//! Dense LU with partial pivoting and the Padé(13) matrix exponential.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum absolute row sum.
pub fn inf_norm<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|v| v.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn one_norm<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|v| v.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorisation `PA = LU` stored compactly.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
    /// Smallest pivot modulus encountered.
    pub min_pivot: f64,
}

impl<T: ComplexField<RealField = f64> + Copy> Lu<T> {
    /// Factorises `a`, failing with [`Error::SingularMatrix`] when a pivot
    /// modulus falls below `threshold`.
    pub fn factor(a: &DMatrix<T>, threshold: f64) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU requires a square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].modulus()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            min_pivot = min_pivot.min(pmax);
            if !(pmax > threshold) || pmax == 0.0 {
                return Err(Error::SingularMatrix { pivot: pmax, threshold });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
        Ok(Lu { lu, perm, min_pivot })
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.lu.nrows();
        // U^T z = b
        let mut z = b.clone();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s / self.lu[(i, i)];
        }
        // L^T w = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s;
        }
        let mut x = DVector::from_element(n, T::zero());
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let mut out = b.clone();
        for (j, col) in b.column_iter().enumerate() {
            let x = self.solve(&col.into_owned());
            out.set_column(j, &x);
        }
        out
    }
}

// Higham (2005) Padé(13) numerator coefficients.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with the degree-13 diagonal
/// Padé approximant.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return a.clone();
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].exp());
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scaled = a.scale(0.5f64.powi(squarings));
    let c = |k: usize| Complex64::new(PADE13[k], 0.0);

    let eye = DMatrix::<Complex64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * c(13) + &a4 * c(11) + &a2 * c(9);
    let u_outer = &a6 * &u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &eye * c(1);
    let u = &scaled * u_outer;
    let v_inner = &a6 * c(12) + &a4 * c(10) + &a2 * c(8);
    let v = &a6 * &v_inner + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &eye * c(0);

    let lu = Lu::factor(&(&v - &u), 0.0).expect("Padé denominator is nonsingular for scaled input");
    let mut r = lu.solve_matrix(&(&v + &u));
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lu_solves_complex_system() {
        let a = DMatrix::from_row_slice(3, 3, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, -1.0), c(1.0, 0.0), c(4.0, 0.0), c(0.0, 0.0), c(1.0, 2.0)]);
        let x = DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 2.0), c(0.5, 0.5)]);
        let b = &a * &x;
        let lu = Lu::factor(&a, 1e-14).unwrap();
        assert!((lu.solve(&b) - &x).norm() < 1e-13);
        let bt = a.transpose() * &x;
        assert!((lu.solve_transpose(&bt) - &x).norm() < 1e-13);
    }

    #[test]
    fn lu_flags_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(Lu::factor(&a, 1e-12), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp([[0, -t],[t, 0]]) = [[cos t, -sin t],[sin t, cos t]]
        let t = 7.3;
        let a = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-t, 0.0), c(t, 0.0), c(0.0, 0.0)]);
        let e = expm(&a);
        assert!((e[(0, 0)] - c(t.cos(), 0.0)).norm() < 1e-12);
        assert!((e[(1, 0)] - c(t.sin(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn expm_of_nilpotent() {
        // exp([[a, b],[0, a]]) = e^a [[1, b],[0, 1]]
        let a = DMatrix::from_row_slice(2, 2, &[c(0.3, 1.0), c(20.0, 0.0), c(0.0, 0.0), c(0.3, 1.0)]);
        let e = expm(&a);
        let ea = c(0.3, 1.0).exp();
        assert!((e[(0, 0)] - ea).norm() < 1e-12);
        assert!((e[(0, 1)] - ea * 20.0).norm() < 1e-11);
        assert!(e[(1, 0)].norm() < 1e-14);
    }
}
