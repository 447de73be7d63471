//! Markov-modulated Lévy processes with state-dependent killing.
//!
//! A [`ModelSpec`] bundles the initial distribution of the modulating chain,
//! its generator, one Lévy exponent per state, the jump MGFs attached to
//! state transitions and the killing intensities. The central object built
//! from it is the matrix function
//!
//! ```text
//! A(z) = Ψ(z) + Π ⊙ Υ(z) − Φ
//! ```
//!
//! whose spectral abscissa on the real axis determines the exponential tail
//! rates of the process stopped at the killing time.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::quadrature;

/// Γ(0, 1) = E₁(1), the upper incomplete gamma function at (0, 1).
pub const GAMMA_0_1: f64 = 0.219_383_934_395_520_27;

const ROW_SUM_TOL: f64 = 1e-12;
const PROB_SUM_TOL: f64 = 1e-12;
const PARETO_ABS_TOL: f64 = 1e-14;
const PARETO_REL_TOL: f64 = 1e-13;
const PARETO_MAX_INTERVALS: usize = 2000;

/// Real interval with open/closed endpoint flags. Infinite endpoints are
/// always reported as open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl DomainInterval {
    pub const REAL_LINE: DomainInterval = DomainInterval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub const ORIGIN: DomainInterval = DomainInterval { lo: 0.0, hi: 0.0, lo_closed: true, hi_closed: true };

    pub fn contains(&self, s: f64) -> bool {
        (s > self.lo || (s == self.lo && self.lo_closed)) && (s < self.hi || (s == self.hi && self.hi_closed))
    }

    pub fn contains_interior(&self, s: f64) -> bool {
        s > self.lo && s < self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn intersect(&self, other: &DomainInterval) -> DomainInterval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        DomainInterval { lo, hi, lo_closed, hi_closed }
    }

    fn check(&self, z: Complex64) -> Result<()> {
        if self.contains(z.re) {
            Ok(())
        } else {
            Err(Error::Domain { value: z.re, domain: *self })
        }
    }

    fn check_interior(&self, z: Complex64) -> Result<()> {
        if self.contains_interior(z.re) {
            Ok(())
        } else {
            Err(Error::Domain { value: z.re, domain: *self })
        }
    }
}

impl fmt::Display for DomainInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// A point mass of a discrete distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

impl Atom {
    pub fn new(value: f64, prob: f64) -> Self {
        Atom { value, prob }
    }
}

fn atoms_mgf(atoms: &[Atom], z: Complex64) -> Complex64 {
    atoms.iter().map(|a| (z * a.value).exp() * a.prob).sum()
}

fn atoms_mgf_derivative(atoms: &[Atom], z: Complex64) -> Complex64 {
    atoms.iter().map(|a| (z * a.value).exp() * (a.prob * a.value)).sum()
}

fn check_atoms(atoms: &[Atom], what: &str, out: &mut Vec<String>) {
    if atoms.is_empty() {
        out.push(format!("{what}: atom list is empty"));
        return;
    }
    if atoms.iter().any(|a| !a.value.is_finite() || !a.prob.is_finite() || a.prob < 0.0) {
        out.push(format!("{what}: atoms need finite values and nonnegative probabilities"));
    }
    let total: f64 = atoms.iter().map(|a| a.prob).sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        out.push(format!("{what}: atom probabilities sum to {total}"));
    }
}

/// Lévy exponent ψ(z) = log E e^{z W₁} of the process while the modulator
/// sits in one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LevyExponent {
    /// ψ(z) = μz + ½σ²z².
    BrownianDrift { mu: f64, sigma2: f64 },
    /// ψ(z) = μz. Kept apart from a zero-variance Brownian motion because it
    /// is a degenerate (lattice) law.
    LinearDrift { mu: f64 },
    /// ψ(z) = γ(e^{hz} − 1).
    PoissonJump { gamma: f64, h: f64 },
    /// ψ(z) = γ(Σ pᵢ e^{z xᵢ} − 1).
    CompoundPoissonDiscrete { gamma: f64, atoms: Vec<Atom> },
    /// Pure-jump exponent with Lévy measure c·x⁻²e⁻ˣ dx on [1, ∞):
    /// ψ(s) = c∫₁^∞ (e^{(s−1)x} − e^{−x}) x⁻² dx, finite for Re s ≤ 1.
    TruncatedParetoExpJump { c: f64 },
    /// ψ(it) = −scale·|t|. Its MGF exists only on the imaginary axis, so
    /// every tail analysis rejects it.
    Cauchy { scale: f64 },
}

impl LevyExponent {
    pub fn domain(&self) -> DomainInterval {
        match self {
            LevyExponent::TruncatedParetoExpJump { .. } => DomainInterval {
                lo: f64::NEG_INFINITY,
                hi: 1.0,
                lo_closed: false,
                hi_closed: true,
            },
            LevyExponent::Cauchy { .. } => DomainInterval::ORIGIN,
            _ => DomainInterval::REAL_LINE,
        }
    }

    /// Parameter problems, empty when the exponent is well formed.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = |x: f64| x.is_finite();
        match self {
            LevyExponent::BrownianDrift { mu, sigma2 } => {
                if !finite(*mu) || !finite(*sigma2) || *sigma2 < 0.0 {
                    out.push(format!("brownian_drift needs finite mu and sigma2 >= 0 (got {mu}, {sigma2})"));
                }
            }
            LevyExponent::LinearDrift { mu } => {
                if !finite(*mu) {
                    out.push(format!("linear_drift needs a finite mu (got {mu})"));
                }
            }
            LevyExponent::PoissonJump { gamma, h } => {
                if !finite(*gamma) || *gamma < 0.0 || !finite(*h) || *h <= 0.0 {
                    out.push(format!("poisson_jump needs gamma >= 0 and h > 0 (got {gamma}, {h})"));
                }
            }
            LevyExponent::CompoundPoissonDiscrete { gamma, atoms } => {
                if !finite(*gamma) || *gamma < 0.0 {
                    out.push(format!("compound_poisson_discrete needs gamma >= 0 (got {gamma})"));
                }
                check_atoms(atoms, "compound_poisson_discrete", &mut out);
            }
            LevyExponent::TruncatedParetoExpJump { c } => {
                if !finite(*c) || *c <= 0.0 {
                    out.push(format!("truncated_pareto_exp_jump needs c > 0 (got {c})"));
                }
            }
            LevyExponent::Cauchy { scale } => {
                if !finite(*scale) || *scale <= 0.0 {
                    out.push(format!("cauchy needs scale > 0 (got {scale})"));
                }
            }
        }
        out
    }

    /// ψ(z).
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        self.domain().check(z)?;
        Ok(match self {
            LevyExponent::BrownianDrift { mu, sigma2 } => z * *mu + z * z * (0.5 * sigma2),
            LevyExponent::LinearDrift { mu } => z * *mu,
            LevyExponent::PoissonJump { gamma, h } => ((z * *h).exp() - 1.0) * *gamma,
            LevyExponent::CompoundPoissonDiscrete { gamma, atoms } => (atoms_mgf(atoms, z) - 1.0) * *gamma,
            LevyExponent::TruncatedParetoExpJump { c } => pareto_exponent(*c, z),
            LevyExponent::Cauchy { scale } => Complex64::new(-scale * z.im.abs(), 0.0),
        })
    }

    pub fn evaluate_real(&self, s: f64) -> Result<f64> {
        Ok(self.evaluate(Complex64::new(s, 0.0))?.re)
    }

    /// ψ′(z), defined on the interior of the domain.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        self.domain().check_interior(z)?;
        Ok(match self {
            LevyExponent::BrownianDrift { mu, sigma2 } => z * *sigma2 + *mu,
            LevyExponent::LinearDrift { mu } => Complex64::new(*mu, 0.0),
            LevyExponent::PoissonJump { gamma, h } => (z * *h).exp() * (gamma * h),
            LevyExponent::CompoundPoissonDiscrete { gamma, atoms } => atoms_mgf_derivative(atoms, z) * *gamma,
            LevyExponent::TruncatedParetoExpJump { c } => pareto_derivative(*c, z),
            LevyExponent::Cauchy { .. } => unreachable!("Cauchy domain has empty interior"),
        })
    }

    /// Variance parameter of a Brownian component, zero otherwise.
    pub fn diffusion(&self) -> f64 {
        match self {
            LevyExponent::BrownianDrift { sigma2, .. } => *sigma2,
            _ => 0.0,
        }
    }
}

// Substituting u = 1/x maps ∫₁^∞ g(x) x⁻² dx onto ∫₀¹ g(1/u) du, a finite
// interval with a bounded integrand whenever Re z ≤ 1.
fn pareto_exponent(c: f64, z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re == 1.0 {
        return Complex64::new(c * (1.0 - (-1.0f64).exp() + GAMMA_0_1), 0.0);
    }
    pareto_exponent_quadrature(c, z)
}

/// ψ(z) for [`LevyExponent::TruncatedParetoExpJump`] by adaptive quadrature,
/// including at the closed endpoint z = 1.
pub fn pareto_exponent_quadrature(c: f64, z: Complex64) -> Complex64 {
    let zm1 = z - 1.0;
    let q = quadrature::integrate(
        |u| {
            if u <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            (zm1 / u).exp() - (-1.0 / u).exp()
        },
        0.0,
        1.0,
        PARETO_ABS_TOL,
        PARETO_REL_TOL,
        PARETO_MAX_INTERVALS,
    );
    q.value * c
}

// ψ′(z) = c∫₁^∞ e^{(z−1)x} x⁻¹ dx = c∫₀¹ e^{(z−1)/u} u⁻¹ du.
fn pareto_derivative(c: f64, z: Complex64) -> Complex64 {
    let zm1 = z - 1.0;
    let q = quadrature::integrate(
        |u| {
            if u <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            (zm1 / u).exp() / u
        },
        0.0,
        1.0,
        PARETO_ABS_TOL,
        PARETO_REL_TOL,
        PARETO_MAX_INTERVALS,
    );
    q.value * c
}

/// MGF of the jump added to W when the modulator switches state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpMgf {
    /// No jump: υ(z) = 1.
    #[default]
    DegenerateZero,
    /// Deterministic jump a: υ(z) = e^{az}.
    DegeneratePoint { a: f64 },
    DiscreteAtoms { atoms: Vec<Atom> },
    /// υ(z) = e^{mz + ½vz²}.
    Gaussian { mean: f64, variance: f64 },
}

impl JumpMgf {
    pub fn is_zero(&self) -> bool {
        matches!(self, JumpMgf::DegenerateZero)
    }

    pub fn domain(&self) -> DomainInterval {
        DomainInterval::REAL_LINE
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            JumpMgf::DegenerateZero => {}
            JumpMgf::DegeneratePoint { a } => {
                if !a.is_finite() {
                    out.push(format!("degenerate_point needs a finite a (got {a})"));
                }
            }
            JumpMgf::DiscreteAtoms { atoms } => check_atoms(atoms, "discrete_atoms", &mut out),
            JumpMgf::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance < 0.0 {
                    out.push(format!("gaussian needs finite mean and variance >= 0 (got {mean}, {variance})"));
                }
            }
        }
        out
    }

    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        match self {
            JumpMgf::DegenerateZero => Complex64::new(1.0, 0.0),
            JumpMgf::DegeneratePoint { a } => (z * *a).exp(),
            JumpMgf::DiscreteAtoms { atoms } => atoms_mgf(atoms, z),
            JumpMgf::Gaussian { mean, variance } => (z * *mean + z * z * (0.5 * variance)).exp(),
        }
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match self {
            JumpMgf::DegenerateZero => Complex64::new(0.0, 0.0),
            JumpMgf::DegeneratePoint { a } => (z * *a).exp() * *a,
            JumpMgf::DiscreteAtoms { atoms } => atoms_mgf_derivative(atoms, z),
            JumpMgf::Gaussian { mean, variance } => {
                (z * *mean + z * z * (0.5 * variance)).exp() * (z * *variance + *mean)
            }
        }
    }
}

/// Infinitesimal generator of the finite-state modulating chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix(DMatrix<f64>);

impl GeneratorMatrix {
    /// Wraps a square matrix. Structural checks (Metzler, zero row sums) are
    /// reported by [`GeneratorMatrix::problems`], not enforced here.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "generator must be a nonempty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("generator entries must be finite".into()));
        }
        Ok(GeneratorMatrix(matrix))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("generator rows must all have length N".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Two-state generator [[−π₁, π₁], [π₂, −π₂]].
    pub fn two_state(pi1: f64, pi2: f64) -> Self {
        GeneratorMatrix(DMatrix::from_row_slice(2, 2, &[-pi1, pi1, pi2, -pi2]))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.0[(from, to)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.0[(i, j)] < 0.0 {
                    out.push(format!("generator entry ({i}, {j}) = {} is negative", self.0[(i, j)]));
                }
            }
            let row: f64 = self.0.row(i).sum();
            let scale = 1.0 + self.0.row(i).iter().map(|v| v.abs()).fold(0.0, f64::max);
            if row.abs() > ROW_SUM_TOL * scale {
                out.push(format!("generator row {i} sums to {row}"));
            }
        }
        out
    }

    pub fn is_irreducible(&self) -> bool {
        crate::spectral::is_irreducible(&self.0)
    }
}

/// Full parametrisation of a Markov-modulated Lévy process with
/// state-dependent killing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::ModelSpecWire", into = "wire::ModelSpecWire")]
pub struct ModelSpec {
    varpi: Vec<f64>,
    generator: GeneratorMatrix,
    exponents: Vec<LevyExponent>,
    jumps: Vec<Vec<JumpMgf>>,
    phi: Vec<f64>,
}

impl ModelSpec {
    /// Builds a spec without transition jumps. Only dimensions are checked;
    /// use [`validate`] for the structural conditions.
    pub fn new(
        varpi: Vec<f64>,
        generator: GeneratorMatrix,
        exponents: Vec<LevyExponent>,
        phi: Vec<f64>,
    ) -> Result<Self> {
        let n = generator.n();
        if varpi.len() != n || exponents.len() != n || phi.len() != n {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: generator is {n}x{n}, varpi {}, states {}, phi {}",
                varpi.len(),
                exponents.len(),
                phi.len()
            )));
        }
        let jumps = vec![vec![JumpMgf::DegenerateZero; n]; n];
        Ok(ModelSpec { varpi, generator, exponents, jumps, phi })
    }

    /// Single-state spec: a plain Lévy process killed at rate φ.
    pub fn single(exponent: LevyExponent, phi: f64) -> Self {
        let generator = GeneratorMatrix(DMatrix::zeros(1, 1));
        ModelSpec::new(vec![1.0], generator, vec![exponent], vec![phi]).expect("dimensions agree")
    }

    /// Sets the MGF of the jump triggered by a `from → to` transition.
    pub fn with_jump(mut self, from: usize, to: usize, mgf: JumpMgf) -> Result<Self> {
        let n = self.n();
        if from >= n || to >= n {
            return Err(Error::InvalidArgument(format!("jump ({from}, {to}) out of range for N = {n}")));
        }
        self.jumps[from][to] = mgf;
        Ok(self)
    }

    pub fn with_varpi(mut self, varpi: Vec<f64>) -> Result<Self> {
        if varpi.len() != self.n() {
            return Err(Error::InvalidArgument("varpi length must equal N".into()));
        }
        self.varpi = varpi;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.generator.n()
    }

    pub fn varpi(&self) -> &[f64] {
        &self.varpi
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn exponents(&self) -> &[LevyExponent] {
        &self.exponents
    }

    pub fn jump(&self, from: usize, to: usize) -> &JumpMgf {
        &self.jumps[from][to]
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Intersection of the domains of every exponent and every active jump
    /// MGF.
    pub fn domain(&self) -> DomainInterval {
        let mut d = DomainInterval::REAL_LINE;
        for e in &self.exponents {
            d = d.intersect(&e.domain());
        }
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.generator.rate(i, j) > 0.0 {
                    d = d.intersect(&self.jumps[i][j].domain());
                }
            }
        }
        d
    }

    /// Short content hash used for provenance in reports.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }
}

/// One violated structural condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

/// Outcome of [`validate`]; empty iff the spec is well formed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, code: &'static str, message: String) {
        self.violations.push(Violation { code, message });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Lists every violated structural condition of `spec`.
pub fn validate(spec: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spec.n();

    if spec.varpi.iter().any(|p| !p.is_finite() || *p < 0.0) {
        report.push("varpi_negative", "varpi has negative or non-finite entries".into());
    }
    let total: f64 = spec.varpi.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        report.push("varpi_sum", format!("varpi sums to {total}"));
    }
    for msg in spec.generator.problems() {
        report.push("generator", msg);
    }
    for (i, e) in spec.exponents.iter().enumerate() {
        for msg in e.problems() {
            report.push("exponent", format!("state {i}: {msg}"));
        }
    }
    for (i, p) in spec.phi.iter().enumerate() {
        if !p.is_finite() || *p < 0.0 {
            report.push("phi_negative", format!("phi[{i}] = {p} must be finite and nonnegative"));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mgf = &spec.jumps[i][j];
            if i == j && !mgf.is_zero() {
                report.push("jump_diagonal", format!("jump ({i}, {i}) must be degenerate at zero"));
            } else if i != j && spec.generator.rate(i, j) == 0.0 && !mgf.is_zero() {
                report.push(
                    "jump_without_rate",
                    format!("jump ({i}, {j}) is not degenerate at zero but the transition rate is zero"),
                );
            }
            for msg in mgf.problems() {
                report.push("jump", format!("jump ({i}, {j}): {msg}"));
            }
        }
    }
    let domain = spec.domain();
    if !domain.contains(0.0) {
        report.push("domain", format!("domain {domain} does not contain zero"));
    }
    for state in unreachable_states(spec) {
        report.push("unreachable", format!("state {state} is never reached"));
    }
    report
}

fn unreachable_states(spec: &ModelSpec) -> Vec<usize> {
    let n = spec.n();
    let mut seen: Vec<bool> = spec.varpi.iter().map(|p| *p > 0.0).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if i != j && !seen[j] && spec.generator.rate(i, j) > 0.0 {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

/// ψ(z) for a single exponent.
pub fn evaluate_exponent(e: &LevyExponent, z: Complex64) -> Result<Complex64> {
    e.evaluate(z)
}

/// Real part of the domain, I.
pub fn domain_interval(spec: &ModelSpec) -> DomainInterval {
    spec.domain()
}

/// A(z) = Ψ(z) + Π ⊙ Υ(z) − Φ.
pub fn assemble_a(spec: &ModelSpec, z: Complex64) -> Result<DMatrix<Complex64>> {
    let domain = spec.domain();
    domain.check(z)?;
    let n = spec.n();
    let mut a = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let rate = spec.generator.rate(i, j);
            a[(i, j)] = if i == j {
                spec.exponents[i].evaluate(z)? + (rate - spec.phi[i])
            } else if rate != 0.0 {
                spec.jumps[i][j].evaluate(z) * rate
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    Ok(a)
}

/// A(s) on the real axis, a Metzler matrix.
pub fn assemble_a_real(spec: &ModelSpec, s: f64) -> Result<DMatrix<f64>> {
    Ok(assemble_a(spec, Complex64::new(s, 0.0))?.map(|v| v.re))
}

/// Entrywise derivative A′(z).
pub fn derivative_a(spec: &ModelSpec, z: Complex64) -> Result<DMatrix<Complex64>> {
    let domain = spec.domain();
    domain.check_interior(z)?;
    let n = spec.n();
    let mut a = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let rate = spec.generator.rate(i, j);
            a[(i, j)] = if i == j {
                spec.exponents[i].derivative(z)?
            } else if rate != 0.0 {
                spec.jumps[i][j].derivative(z) * rate
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    Ok(a)
}

pub fn derivative_a_real(spec: &ModelSpec, s: f64) -> Result<DMatrix<f64>> {
    Ok(derivative_a(spec, Complex64::new(s, 0.0))?.map(|v| v.re))
}

pub(crate) mod wire {
    use super::*;

    /// Generator as nested rows or as a flat row-major array.
    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub enum GeneratorWire {
        Nested(Vec<Vec<f64>>),
        Flat(Vec<f64>),
    }

    impl GeneratorWire {
        pub fn into_generator(self, n: usize) -> Result<GeneratorMatrix> {
            match self {
                GeneratorWire::Nested(rows) => GeneratorMatrix::from_rows(&rows),
                GeneratorWire::Flat(flat) => {
                    if flat.len() != n * n {
                        return Err(Error::InvalidArgument(format!(
                            "flat generator has {} entries, expected {}",
                            flat.len(),
                            n * n
                        )));
                    }
                    GeneratorMatrix::new(DMatrix::from_row_slice(n, n, &flat))
                }
            }
        }
    }

    #[derive(Serialize, Deserialize)]
    pub struct JumpEntry {
        pub from: usize,
        pub to: usize,
        pub mgf: JumpMgf,
    }

    #[derive(Serialize, Deserialize)]
    pub struct ModelSpecWire {
        pub states: Vec<LevyExponent>,
        pub generator: GeneratorWire,
        pub phi: Vec<f64>,
        pub varpi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        pub jumps: Vec<JumpEntry>,
    }

    impl TryFrom<ModelSpecWire> for ModelSpec {
        type Error = Error;

        fn try_from(w: ModelSpecWire) -> Result<Self> {
            let n = w.states.len();
            let generator = w.generator.into_generator(n)?;
            let mut spec = ModelSpec::new(w.varpi, generator, w.states, w.phi)?;
            for j in w.jumps {
                spec = spec.with_jump(j.from, j.to, j.mgf)?;
            }
            Ok(spec)
        }
    }

    impl From<ModelSpec> for ModelSpecWire {
        fn from(spec: ModelSpec) -> Self {
            let n = spec.n();
            let mut jumps = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if !spec.jumps[i][j].is_zero() {
                        jumps.push(JumpEntry { from: i, to: j, mgf: spec.jumps[i][j].clone() });
                    }
                }
            }
            ModelSpecWire {
                states: spec.exponents,
                generator: GeneratorWire::Nested(spec.generator.rows()),
                phi: spec.phi,
                varpi: spec.varpi,
                jumps,
            }
        }
    }
}
