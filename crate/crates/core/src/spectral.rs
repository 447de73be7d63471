//! Spectral abscissa and Perron vectors of Metzler matrices, plus a small
//! dense complex eigensolver.
//!
//! For a Metzler matrix the spectral abscissa ζ(A) is itself an eigenvalue
//! with nonnegative left and right eigenvectors. It is computed by shifted
//! inverse iteration, which keeps iterates positive on irreducible blocks, so
//! the Collatz–Wielandt quotients bracket ζ at every step and give a
//! convergence certificate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::linalg::{inf_norm, Lu};

const MAX_ITER: usize = 10_000;
const GAP_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-9;
const SIMPLE_TOL: f64 = 1e-9;

/// Perron root and eigenvectors of a Metzler matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub zeta: f64,
    /// Right eigenvector, ‖x‖₁ = 1.
    pub right: DVector<f64>,
    /// Left eigenvector, scaled so that yᵀx = 1 when possible.
    pub left: DVector<f64>,
    pub right_residual: f64,
    pub left_residual: f64,
    pub simple: bool,
}

/// Strongly connected components of the directed graph with an edge i → j
/// whenever `edge(i, j)` holds (i ≠ j). Components come out in reverse
/// topological order.
pub fn strongly_connected_components<F: Fn(usize, usize) -> bool>(n: usize, edge: F) -> Vec<Vec<usize>> {
    struct State<'a, F> {
        edge: &'a F,
        n: usize,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    fn visit<F: Fn(usize, usize) -> bool>(st: &mut State<'_, F>, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for w in 0..st.n {
            if w == v || !(st.edge)(v, w) {
                continue;
            }
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("stack holds v");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.out.push(comp);
        }
    }

    let mut st = State {
        edge: &edge,
        n,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}

/// True iff the graph of nonzero off-diagonal entries is strongly connected.
pub fn is_irreducible(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    n > 0 && strongly_connected_components(n, |i, j| a[(i, j)] != 0.0).len() == 1
}

/// Collatz–Wielandt bounds min (Ax)ᵢ/xᵢ ≤ ζ(A) ≤ max (Ax)ᵢ/xᵢ for a positive
/// vector x and irreducible Metzler A.
pub fn collatz_wielandt(a: &DMatrix<f64>, x: &DVector<f64>) -> (f64, f64) {
    let ax = a * x;
    ax.iter().zip(x.iter()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (num, den)| {
        let q = num / den;
        (lo.min(q), hi.max(q))
    })
}

fn is_metzler(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= 0.0))
}

fn positive_floor(v: &mut DVector<f64>) {
    let floor = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) * 1e-300;
    for x in v.iter_mut() {
        *x = x.abs().max(floor).max(f64::MIN_POSITIVE);
    }
}

fn normalize_l1(v: &mut DVector<f64>) {
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    if s > 0.0 {
        *v /= s;
    }
}

// Perron root of an irreducible Metzler matrix together with its right and
// left eigenvectors.
fn irreducible_perron(a: &DMatrix<f64>, norm: f64) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    let n = a.nrows();
    if n == 1 {
        let one = DVector::from_element(1, 1.0);
        return Ok((a[(0, 0)], one.clone(), one));
    }
    let scale = 1.0 + norm;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut y = x.clone();
    let (mut lo, mut hi) = collatz_wielandt(a, &x);
    for _ in 0..MAX_ITER {
        let gap = hi - lo;
        let (ylo, yhi) = collatz_wielandt(&a.transpose(), &y);
        let ygap = yhi - ylo;
        if gap <= GAP_TOL * scale && ygap <= GAP_TOL * scale {
            break;
        }
        let shift = hi.min(yhi) + gap.max(ygap).max(1e-10 * scale);
        let m = &eye * shift - a;
        let lu = match Lu::factor(&m, 0.0) {
            Ok(lu) => lu,
            // the shift landed on ζ exactly; the current pair is already exact
            Err(_) => break,
        };
        x = lu.solve(&x);
        y = lu.solve_transpose(&y);
        positive_floor(&mut x);
        positive_floor(&mut y);
        normalize_l1(&mut x);
        normalize_l1(&mut y);
        let b = collatz_wielandt(a, &x);
        lo = b.0;
        hi = b.1;
    }
    let (lo, hi) = collatz_wielandt(a, &x);
    let (ylo, yhi) = collatz_wielandt(&a.transpose(), &y);
    if hi - lo > 1e3 * GAP_TOL * scale || yhi - ylo > 1e3 * GAP_TOL * scale {
        return Err(Error::Convergence { what: "Perron inverse iteration", iterations: MAX_ITER });
    }
    let zeta = (&y.transpose() * a * &x)[(0, 0)] / y.dot(&x);
    Ok((zeta, x, y))
}

// Dominant nonnegative eigenvectors for a reducible matrix with known ζ.
fn reducible_vectors(a: &DMatrix<f64>, zeta: f64, norm: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = a.nrows();
    let scale = 1.0 + norm;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut delta = 1e-8 * scale;
    let mut lu = None;
    for _ in 0..40 {
        if let Ok(f) = Lu::factor(&(&eye * (zeta + delta) - a), 0.0) {
            lu = Some(f);
            break;
        }
        delta *= 2.0;
    }
    let lu = lu.ok_or(Error::Convergence { what: "reducible eigenvector shift", iterations: 40 })?;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut y = x.clone();
    for it in 0..MAX_ITER {
        let mut nx = lu.solve(&x);
        let mut ny = lu.solve_transpose(&y);
        nx.iter_mut().for_each(|v| *v = v.max(0.0));
        ny.iter_mut().for_each(|v| *v = v.max(0.0));
        normalize_l1(&mut nx);
        normalize_l1(&mut ny);
        let change = (&nx - &x).amax().max((&ny - &y).amax());
        x = nx;
        y = ny;
        let rx = (a * &x - &x * zeta).amax();
        let ry = (a.transpose() * &y - &y * zeta).amax();
        if change < 1e-15 || (rx <= 1e-3 * RESIDUAL_TOL * scale && ry <= 1e-3 * RESIDUAL_TOL * scale) {
            return Ok((x, y));
        }
        if it + 1 == MAX_ITER {
            break;
        }
    }
    Err(Error::Convergence { what: "reducible eigenvector iteration", iterations: MAX_ITER })
}

/// ζ(A) with Perron vectors for a real Metzler matrix.
pub fn spectral_abscissa_metzler(a: &DMatrix<f64>) -> Result<SpectralResult> {
    let n = a.nrows();
    if n == 0 || n != a.ncols() {
        return Err(Error::InvalidArgument("spectral_abscissa_metzler needs a nonempty square matrix".into()));
    }
    if !is_metzler(a) || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix is not a finite Metzler matrix".into()));
    }
    let norm = inf_norm(a);
    let scale = 1.0 + norm;
    let blocks = strongly_connected_components(n, |i, j| a[(i, j)] != 0.0);

    let (zeta, mut x, mut y, irreducible) = if blocks.len() == 1 {
        let (z, x, y) = irreducible_perron(a, norm)?;
        (z, x, y, true)
    } else {
        let mut zeta = f64::NEG_INFINITY;
        for b in &blocks {
            let sub = DMatrix::from_fn(b.len(), b.len(), |i, j| a[(b[i], b[j])]);
            let (z, _, _) = irreducible_perron(&sub, inf_norm(&sub))?;
            zeta = zeta.max(z);
        }
        let (x, y) = reducible_vectors(a, zeta, norm)?;
        (zeta, x, y, false)
    };

    normalize_l1(&mut x);
    let yx = y.dot(&x);
    if yx > 0.0 {
        y /= yx;
    } else {
        normalize_l1(&mut y);
    }
    let right_residual = (a * &x - &x * zeta).amax();
    let left_residual = (a.transpose() * &y - &y * zeta).amax();
    if right_residual > RESIDUAL_TOL * scale * (1.0 + y.amax()) || left_residual > RESIDUAL_TOL * scale * (1.0 + y.amax()) {
        return Err(Error::Convergence { what: "Perron vectors", iterations: MAX_ITER });
    }
    let simple = irreducible || deflation_is_simple(a, zeta, &x, &y, scale)?;
    Ok(SpectralResult { zeta, right: x, left: y, right_residual, left_residual, simple })
}

// ζ is simple when yᵀx is bounded away from zero and removing the Perron pair
// pushes the rest of the spectrum strictly below ζ.
fn deflation_is_simple(a: &DMatrix<f64>, zeta: f64, x: &DVector<f64>, y: &DVector<f64>, scale: f64) -> Result<bool> {
    let yx = y.dot(x);
    if !(yx > 1e-12 * x.norm() * y.norm()) {
        return Ok(false);
    }
    let k = 2.0 * scale;
    let deflated = a - (x * y.transpose()) * (k / yx);
    let rest = spectral_abscissa_complex(&deflated.map(|v| Complex64::new(v, 0.0)))?;
    Ok(rest < zeta - SIMPLE_TOL * scale)
}

/// Eigenvalues of a dense complex matrix by Householder reduction to
/// Hessenberg form followed by Wilkinson-shifted QR.
pub fn eigenvalues_complex(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigenvalues need a square matrix");
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = hessenberg(a);
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let max_total = 30 * n * n;
    let mut total = 0;
    let mut since_deflation = 0;
    let mut hi = n - 1;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if sub <= f64::EPSILON * diag || sub < f64::MIN_POSITIVE {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_total {
            return Err(Error::Convergence { what: "complex QR eigensolver", iterations: max_total });
        }
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + h[(hi, hi - 1)].norm() * 0.75
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_step(&mut h, l, hi, mu);
    }
    eig[0] = h[(0, 0)];
    Ok(eig)
}

/// max Re λ over the eigenvalues of `a`.
pub fn spectral_abscissa_complex(a: &DMatrix<Complex64>) -> Result<f64> {
    Ok(eigenvalues_complex(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let m1 = half_tr + disc;
    let m2 = half_tr - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

fn qr_step(h: &mut DMatrix<Complex64>, l: usize, hi: usize, mu: Complex64) {
    for k in l..=hi {
        h[(k, k)] -= mu;
    }
    let mut rots = Vec::with_capacity(hi - l);
    for k in l..hi {
        let x = h[(k, k)];
        let y = h[(k + 1, k)];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 { (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)) } else { (x / r, y / r) };
        for j in k..=hi {
            let u = h[(k, j)];
            let v = h[(k + 1, j)];
            h[(k, j)] = c.conj() * u + s.conj() * v;
            h[(k + 1, j)] = -s * u + c * v;
        }
        rots.push((c, s));
    }
    for (idx, k) in (l..hi).enumerate() {
        let (c, s) = rots[idx];
        for i in l..=(k + 1).min(hi) {
            let u = h[(i, k)];
            let v = h[(i, k + 1)];
            h[(i, k)] = u * c + v * s;
            h[(i, k + 1)] = -u * s.conj() + v * c.conj();
        }
    }
    for k in l..=hi {
        h[(k, k)] += mu;
    }
}

fn hessenberg(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vn);
        // H ← (I − 2vvᴴ) H
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= *vi * dot * 2.0;
            }
        }
        // H ← H (I − 2vvᴴ)
        for i in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(j, vj)| h[(i, k + 1 + j)] * vj).sum();
            for (j, vj) in v.iter().enumerate() {
                h[(i, k + 1 + j)] -= dot * vj.conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
    h
}
