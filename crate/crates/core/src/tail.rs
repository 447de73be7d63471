//! Exponential tail rates of W_T and the bounds that follow from them.
//!
//! The upper rate α > 0 and lower rate β > 0 are the roots of
//! s ↦ ζ(A(s)) on either side of the origin. At such a root A(z)⁻¹ has a
//! simple pole whose residue feeds the Tauberian bounds on e^{αw}P(W_T > w).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::linalg::{expm, inf_norm, Lu};
use crate::numerics::roots::brent;
use crate::process::{
    assemble_a, assemble_a_real, derivative_a_real, validate, JumpMgf, LevyExponent, ModelSpec,
};
use crate::spectral::{eigenvalues_complex, is_irreducible, spectral_abscissa_metzler};

const INITIAL_STEP: f64 = 1e-3;
const SEARCH_CAP: f64 = 1e6;
const OPEN_ENDPOINT_GAP: f64 = 1e-12;
const ROOT_XTOL: f64 = 1e-12;
const ROOT_FTOL: f64 = 1e-10;
const RESIDUE_ROOT_TOL: f64 = 1e-8;
const SIMPLE_POLE_TOL: f64 = 1e-12;
const PIVOT_REL: f64 = 1e-14;
const LATTICE_DENOM_CAP: i64 = 1_000_000;
const LATTICE_REL_TOL: f64 = 1e-13;

/// Outcome of the search for a root on one side of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStatus {
    FoundInterior,
    NoRootInDomain,
    RootAtBoundary,
    DomainDegenerate,
}

/// Last point at which ζ(A(s)) was evaluated by a search that found no
/// interior root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointProbe {
    pub s: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRates {
    pub alpha: Option<f64>,
    /// The lower root is −β.
    pub beta: Option<f64>,
    pub alpha_status: RootStatus,
    pub beta_status: RootStatus,
    pub zeta_at_zero: f64,
    pub alpha_probe: Option<EndpointProbe>,
    pub beta_probe: Option<EndpointProbe>,
}

/// ζ(A(s)) for real s in the domain.
pub fn abscissa_at(spec: &ModelSpec, s: f64) -> Result<f64> {
    Ok(spectral_abscissa_metzler(&assemble_a_real(spec, s)?)?.zeta)
}

struct SideResult {
    root: Option<f64>,
    status: RootStatus,
    probe: Option<EndpointProbe>,
}

fn search_side(spec: &ModelSpec, sign: f64) -> Result<SideResult> {
    let domain = spec.domain();
    let (end, closed) = if sign > 0.0 { (domain.hi, domain.hi_closed) } else { (domain.lo, domain.lo_closed) };
    let end_abs = end.abs();
    let limit = if end.is_finite() {
        if closed {
            end_abs
        } else {
            end_abs - OPEN_ENDPOINT_GAP
        }
    } else {
        SEARCH_CAP
    }
    .min(SEARCH_CAP);
    let eval = |t: f64| -> Result<f64> {
        let z = abscissa_at(spec, sign * t)?;
        Ok(if z.is_nan() { f64::INFINITY } else { z })
    };

    let mut prev = 0.0;
    let mut fprev = eval(0.0)?;
    let mut step = INITIAL_STEP;
    loop {
        let at_limit = step >= limit;
        let t = if at_limit { limit } else { step };
        if t <= prev {
            // domain ends before the first step
            return Ok(SideResult {
                root: None,
                status: RootStatus::NoRootInDomain,
                probe: Some(EndpointProbe { s: sign * prev, zeta: fprev }),
            });
        }
        let ft = eval(t)?;
        let boundary = at_limit && closed && end.is_finite() && t == end_abs;
        if boundary && ft.abs() <= ROOT_FTOL {
            return Ok(SideResult {
                root: Some(t),
                status: RootStatus::RootAtBoundary,
                probe: Some(EndpointProbe { s: sign * t, zeta: ft }),
            });
        }
        if ft > 0.0 {
            let root = brent(|u| eval(u).unwrap_or(f64::INFINITY), prev, t, fprev, ft, ROOT_XTOL, 500)?;
            return Ok(SideResult { root: Some(root.x), status: RootStatus::FoundInterior, probe: None });
        }
        if at_limit {
            return Ok(SideResult {
                root: None,
                status: RootStatus::NoRootInDomain,
                probe: Some(EndpointProbe { s: sign * t, zeta: ft }),
            });
        }
        prev = t;
        fprev = ft;
        step *= 2.0;
    }
}

/// Locates α and −β by bracketing s ↦ ζ(A(s)) away from the origin.
pub fn find_decay_rates(spec: &ModelSpec) -> Result<DecayRates> {
    validate(spec).into_result()?;
    if spec.domain().is_singleton() {
        return Err(Error::DomainDegenerate);
    }
    let a0 = assemble_a_real(spec, 0.0)?;
    let zeta0 = spectral_abscissa_metzler(&a0)?.zeta;
    if zeta0 >= -1e-12 * (1.0 + inf_norm(&a0)) {
        return Ok(DecayRates {
            alpha: None,
            beta: None,
            alpha_status: RootStatus::DomainDegenerate,
            beta_status: RootStatus::DomainDegenerate,
            zeta_at_zero: zeta0,
            alpha_probe: None,
            beta_probe: None,
        });
    }
    let up = search_side(spec, 1.0)?;
    let down = search_side(spec, -1.0)?;
    Ok(DecayRates {
        alpha: up.root,
        beta: down.root,
        alpha_status: up.status,
        beta_status: down.status,
        zeta_at_zero: zeta0,
        alpha_probe: up.probe,
        beta_probe: down.probe,
    })
}

/// M_{W_T}(z) = ϖᵀA(z)⁻¹A(0)1 on the strip where ζ(A(Re z)) < 0.
pub fn mgf_stopped(spec: &ModelSpec, z: Complex64) -> Result<Complex64> {
    let zeta = abscissa_at(spec, z.re)?;
    if !(zeta < 0.0) {
        return Err(Error::OutsideStrip { s: z.re, zeta });
    }
    mgf_solve(spec, z)
}

fn mgf_solve(spec: &ModelSpec, z: Complex64) -> Result<Complex64> {
    let a = assemble_a(spec, z)?;
    let rhs = assemble_a_real(spec, 0.0)? * DVector::from_element(spec.n(), 1.0);
    let rhs = rhs.map(|v| Complex64::new(v, 0.0));
    let lu = Lu::factor(&a, PIVOT_REL * inf_norm(&a))?;
    let u = lu.solve(&rhs);
    Ok(spec.varpi().iter().zip(u.iter()).map(|(p, v)| v * *p).sum())
}

/// Matrix of conditional MGFs E[e^{zW_t}; J_t = n′ | J_0 = n], computed as
/// exp(t(Ψ(z) + Π⊙Υ(z))), or exp(tA(z)) when killing is included.
pub fn conditional_mgf_matrix(spec: &ModelSpec, t: f64, z: Complex64, with_killing: bool) -> Result<DMatrix<Complex64>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive and finite, got {t}")));
    }
    let mut a = assemble_a(spec, z)?;
    if !with_killing {
        for (i, phi) in spec.phi().iter().enumerate() {
            a[(i, i)] += *phi;
        }
    }
    Ok(expm(&(a * Complex64::new(t, 0.0))))
}

/// Residue data of A(z)⁻¹ and M_{W_T} at a simple real pole.
#[derive(Debug, Clone, Serialize)]
pub struct PoleData {
    pub location: f64,
    pub matrix_residue: DMatrix<f64>,
    pub c: f64,
    pub mgf_residue: f64,
    pub simple: bool,
}

/// Residue at a root s0 of ζ(A(s)) lying in the interior of the domain.
pub fn pole_residue(spec: &ModelSpec, s0: f64) -> Result<PoleData> {
    if !is_irreducible(spec.generator().matrix()) {
        return Err(Error::Reducible);
    }
    let domain = spec.domain();
    if !domain.contains_interior(s0) {
        return if domain.contains(s0) { Err(Error::BoundaryPole(s0)) } else { Err(Error::Domain { value: s0, domain }) };
    }
    let a = assemble_a_real(spec, s0)?;
    let sr = spectral_abscissa_metzler(&a)?;
    if sr.zeta.abs() > RESIDUE_ROOT_TOL {
        return Err(Error::NotARoot(s0, sr.zeta.abs()));
    }
    let da = derivative_a_real(spec, s0)?;
    let (x, y) = (&sr.right, &sr.left);
    let d = y.dot(&(&da * x));
    if d.abs() < SIMPLE_POLE_TOL {
        return Err(Error::NotSimple { value: d.abs() });
    }
    let c = 1.0 / d;
    let matrix_residue = (x * y.transpose()) * c;
    let varpi = DVector::from_column_slice(spec.varpi());
    let a0_one = assemble_a_real(spec, 0.0)? * DVector::from_element(spec.n(), 1.0);
    let mgf_residue = c * varpi.dot(x) * y.dot(&a0_one);
    Ok(PoleData { location: s0, matrix_residue, c, mgf_residue, simple: sr.simple })
}

/// Lattice classification of W_T.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeInfo {
    pub non_lattice: bool,
    pub span: Option<f64>,
    pub reason: String,
}

impl LatticeInfo {
    fn continuous(reason: String) -> Self {
        LatticeInfo { non_lattice: true, span: None, reason }
    }
}

// Continued-fraction approximation p/q of x with q ≤ cap and relative error
// below LATTICE_REL_TOL.
fn rational_approx(x: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > LATTICE_DENOM_CAP {
            return None;
        }
        let approx = h2 as f64 / k2 as f64;
        if (approx - x).abs() <= LATTICE_REL_TOL * x.abs().max(1.0) {
            return Some((h2, k2));
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = r - a as f64;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Largest h with a/h and b/h both integers, up to the rational tolerance.
fn real_gcd(a: f64, b: f64) -> Option<f64> {
    let (a, b) = (a.abs(), b.abs());
    let (_, q) = rational_approx(a / b)?;
    Some(b / q as f64)
}

fn common_span(values: &[f64]) -> Option<f64> {
    let mut it = values.iter().copied().filter(|v| *v != 0.0);
    let first = it.next()?.abs();
    it.try_fold(first, real_gcd)
}

/// Decides whether W_T can live on a lattice {a + hm} and, if so, the span h.
pub fn lattice_info(spec: &ModelSpec) -> Result<LatticeInfo> {
    let n = spec.n();
    let active = |i: usize, j: usize| i != j && spec.generator().rate(i, j) > 0.0;

    for (i, e) in spec.exponents().iter().enumerate() {
        match e {
            LevyExponent::BrownianDrift { sigma2, .. } if *sigma2 > 0.0 => {
                return Ok(LatticeInfo::continuous(format!("state {i} has a diffusion component")));
            }
            LevyExponent::TruncatedParetoExpJump { .. } => {
                return Ok(LatticeInfo::continuous(format!("state {i} has an absolutely continuous jump measure")));
            }
            LevyExponent::Cauchy { .. } => {
                return Ok(LatticeInfo::continuous(format!("state {i} has a continuous (Cauchy) law")));
            }
            _ => {}
        }
    }
    for i in 0..n {
        for j in 0..n {
            if let JumpMgf::Gaussian { variance, .. } = spec.jump(i, j) {
                if active(i, j) && *variance > 0.0 {
                    return Ok(LatticeInfo::continuous(format!("transition ({i}, {j}) has a Gaussian jump")));
                }
            }
        }
    }

    // every remaining component is a lattice law; gather the step sizes
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    let mut drift = false;
    for (i, e) in spec.exponents().iter().enumerate() {
        match e {
            LevyExponent::BrownianDrift { mu, .. } | LevyExponent::LinearDrift { mu } => drift |= *mu != 0.0,
            LevyExponent::PoissonJump { gamma, h } if *gamma > 0.0 => groups.push((format!("state {i}"), vec![*h])),
            LevyExponent::CompoundPoissonDiscrete { gamma, atoms } if *gamma > 0.0 => {
                groups.push((format!("state {i}"), atoms.iter().filter(|a| a.prob > 0.0).map(|a| a.value).collect()))
            }
            _ => {}
        }
    }
    for i in 0..n {
        for j in 0..n {
            if !active(i, j) {
                continue;
            }
            let values = match spec.jump(i, j) {
                JumpMgf::DegenerateZero => continue,
                JumpMgf::DegeneratePoint { a } => vec![*a],
                JumpMgf::DiscreteAtoms { atoms } => atoms.iter().filter(|a| a.prob > 0.0).map(|a| a.value).collect(),
                JumpMgf::Gaussian { mean, .. } => vec![*mean],
            };
            groups.push((format!("transition ({i}, {j})"), values));
        }
    }
    if drift {
        return Ok(LatticeInfo { non_lattice: false, span: None, reason: "degenerate drift components".into() });
    }

    let mut spans = Vec::new();
    for (name, values) in &groups {
        if values.iter().all(|v| *v == 0.0) {
            continue;
        }
        match common_span(values) {
            Some(h) => spans.push(h),
            None => {
                return Ok(LatticeInfo::continuous(format!(
                    "{name} has jump sizes that lie on no common arithmetic progression"
                )))
            }
        }
    }
    if spans.is_empty() {
        return Ok(LatticeInfo { non_lattice: false, span: None, reason: "W_T is degenerate at zero".into() });
    }
    match common_span(&spans) {
        Some(h) => Ok(LatticeInfo { non_lattice: false, span: Some(h), reason: format!("lattice with span {h}") }),
        None => Err(Error::IncommensurableSpans(format!("component spans {spans:?} have no common span"))),
    }
}

/// Tauberian bounds on e^{rate·w} P(±W_T > w) from a simple real pole.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NakagawaBounds {
    /// Decay rate: α for the upper tail, β for the lower tail.
    pub rate: f64,
    pub c: f64,
    /// Period B = 2π/h of the MGF along its axis; `None` stands for B = ∞.
    pub b: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub exact_limit: Option<f64>,
}

/// Bounds for the upper tail (pole at α > 0) or for the lower tail
/// P(W_T < −w) (pole at −β < 0).
pub fn nakagawa_bounds(pole: &PoleData, lattice: &LatticeInfo) -> Result<NakagawaBounds> {
    if !pole.simple {
        return Err(Error::NotSimple { value: pole.c.recip().abs() });
    }
    let (rate, c) = if pole.location > 0.0 {
        (pole.location, -pole.mgf_residue)
    } else if pole.location < 0.0 {
        (-pole.location, pole.mgf_residue)
    } else {
        return Err(Error::InvalidArgument("pole at the origin".into()));
    };
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("residue has the wrong sign for a tail pole (C = {c})")));
    }
    if lattice.non_lattice {
        let limit = c / rate;
        return Ok(NakagawaBounds { rate, c, b: None, lower: limit, upper: limit, exact_limit: Some(limit) });
    }
    let h = lattice.span.ok_or_else(|| Error::BUnknown(lattice.reason.clone()))?;
    let b = 2.0 * PI / h;
    let k = 2.0 * PI * c / b;
    let x = 2.0 * PI * rate / b;
    Ok(NakagawaBounds { rate, c, b: Some(b), lower: k / x.exp_m1(), upper: k / -(-x).exp_m1(), exact_limit: None })
}

/// Two-state models with closed-form characteristic polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TwoStateParams {
    Brownian { mu: [f64; 2], sigma2: [f64; 2], pi: [f64; 2], phi: [f64; 2] },
    Linear { mu: [f64; 2], pi: [f64; 2], phi: [f64; 2] },
}

impl TwoStateParams {
    fn pi(&self) -> [f64; 2] {
        match self {
            TwoStateParams::Brownian { pi, .. } | TwoStateParams::Linear { pi, .. } => *pi,
        }
    }

    fn phi(&self) -> [f64; 2] {
        match self {
            TwoStateParams::Brownian { phi, .. } | TwoStateParams::Linear { phi, .. } => *phi,
        }
    }

    /// Quadratic coefficients (a, b, c) of the diagonal entries
    /// gₙ(s) = a s² + b s + c of A(s).
    fn diagonal(&self, n: usize) -> [f64; 3] {
        let (pi, phi) = (self.pi(), self.phi());
        match self {
            TwoStateParams::Brownian { mu, sigma2, .. } => [0.5 * sigma2[n], mu[n], -phi[n] - pi[n]],
            TwoStateParams::Linear { mu, .. } => [0.0, mu[n], -phi[n] - pi[n]],
        }
    }

    /// Equivalent [`ModelSpec`] with ϖ = (½, ½).
    pub fn to_spec(&self) -> ModelSpec {
        let (pi, phi) = (self.pi(), self.phi());
        let exponents = match self {
            TwoStateParams::Brownian { mu, sigma2, .. } => [0, 1].map(|n| LevyExponent::BrownianDrift { mu: mu[n], sigma2: sigma2[n] }),
            TwoStateParams::Linear { mu, .. } => [0, 1].map(|n| LevyExponent::LinearDrift { mu: mu[n] }),
        };
        ModelSpec::new(
            vec![0.5, 0.5],
            crate::process::GeneratorMatrix::two_state(pi[0], pi[1]),
            exponents.to_vec(),
            phi.to_vec(),
        )
        .expect("two-state dimensions agree")
    }
}

/// A real root of the characteristic polynomial det A(s) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormRoot {
    pub s: f64,
    /// True when 0 is the larger eigenvalue of A(s), i.e. tr A(s) ≤ 0.
    pub admissible: bool,
}

fn poly_eval(coeffs: &[f64], x: f64) -> (f64, f64) {
    // coefficients from highest degree; returns value and derivative
    coeffs.iter().fold((0.0, 0.0), |(p, dp), c| (p * x + c, dp * x + p))
}

fn real_poly_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    let lead = coeffs.iter().position(|c| *c != 0.0);
    let coeffs = match lead {
        Some(k) => &coeffs[k..],
        None => return Err(Error::Degenerate("characteristic polynomial vanishes identically".into())),
    };
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let mut companion = DMatrix::from_element(deg, deg, Complex64::new(0.0, 0.0));
    for j in 0..deg {
        companion[(0, j)] = Complex64::new(-coeffs[j + 1] / coeffs[0], 0.0);
    }
    for i in 1..deg {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    let scale: f64 = coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
    let mut roots: Vec<f64> = eigenvalues_complex(&companion)?
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-7 * (1.0 + z.re.abs()))
        .map(|z| {
            let mut x = z.re;
            for _ in 0..50 {
                let (p, dp) = poly_eval(coeffs, x);
                if dp == 0.0 {
                    break;
                }
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 * (1.0 + x.abs()) {
                    break;
                }
            }
            x
        })
        .filter(|x| poly_eval(coeffs, *x).0.abs() <= 1e-8 * scale * (1.0 + x.abs()).powi(deg as i32))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    Ok(roots)
}

/// Real roots of det A(s) = g₁(s)g₂(s) − π₁π₂ in increasing order, each
/// flagged by the trace condition that singles out roots of ζ(A(s)).
pub fn two_state_closed_form(params: &TwoStateParams) -> Result<Vec<ClosedFormRoot>> {
    let (pi, phi) = (params.pi(), params.phi());
    if phi[0] == 0.0 && phi[1] == 0.0 {
        return Err(Error::Degenerate("both killing intensities are zero".into()));
    }
    if !(pi[0] > 0.0 && pi[1] > 0.0) {
        return Err(Error::InvalidArgument("two-state closed forms need positive switching rates".into()));
    }
    let [a1, b1, c1] = params.diagonal(0);
    let [a2, b2, c2] = params.diagonal(1);
    let coeffs = [
        a1 * a2,
        a1 * b2 + a2 * b1,
        a1 * c2 + b1 * b2 + a2 * c1,
        b1 * c2 + b2 * c1,
        c1 * c2 - pi[0] * pi[1],
    ];
    let roots = real_poly_roots(&coeffs)?;
    Ok(roots
        .into_iter()
        .map(|s| {
            let trace = (a1 + a2) * s * s + (b1 + b2) * s + c1 + c2;
            ClosedFormRoot { s, admissible: trace <= 1e-10 * (1.0 + (c1 + c2).abs()) }
        })
        .collect())
}
