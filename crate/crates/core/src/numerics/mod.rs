//! Small dense numerical kernels shared by the analysis modules: adaptive
//! quadrature, bracketed root finding, complex LU and the matrix exponential.

pub mod linalg;
pub mod quadrature;
pub mod roots;
