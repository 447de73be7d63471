//! CARA consumption-saving economy with Markov income and perpetual-youth
//! mortality.
//!
//! Optimal consumption is rW + b_n in income state n, where b solves
//!
//! ```text
//! b_n = y_n − 1/γ + ρ/(γr) − (1/(γr)) Σ_{n′} π_{nn′} e^{γ(b_n − b_{n′})}.
//! ```
//!
//! Wealth then drifts at slope y_n − b_n, so the stationary wealth
//! distribution is W_T for a piecewise-linear Markov-modulated process killed
//! at the mortality rate. Equilibrium picks r so aggregate saving is zero.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::Lu;
use crate::numerics::roots::brent;
use crate::process::wire::GeneratorWire;
use crate::process::{GeneratorMatrix, LevyExponent, ModelSpec};
use crate::spectral::{is_irreducible, spectral_abscissa_metzler};
use crate::tail::{find_decay_rates, DecayRates, RootStatus};

const ETA: f64 = 1.0;
const STEP_TOL: f64 = 1e-14;
const MAX_ITER: usize = 100_000;
const RESIDUAL_TOL: f64 = 1e-12;
const NEWTON_STEPS: usize = 50;
const G_TOL: f64 = 1e-10;
const R_FLOOR: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-12;

/// Parameters of the economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WealthModelWire", into = "WealthModelWire")]
pub struct WealthModel {
    y: Vec<f64>,
    generator: GeneratorMatrix,
    gamma: f64,
    rho_tilde: f64,
    phi: f64,
    varpi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WealthModelWire {
    y: Vec<f64>,
    generator: GeneratorWire,
    gamma: f64,
    rho_tilde: f64,
    phi: f64,
    /// Effective discount rate ρ̃ + φ; written for reference, ignored on input.
    #[serde(default, skip_deserializing)]
    rho: f64,
}

impl TryFrom<WealthModelWire> for WealthModel {
    type Error = Error;

    fn try_from(w: WealthModelWire) -> Result<Self> {
        let generator = w.generator.into_generator(w.y.len())?;
        WealthModel::new(w.y, generator, w.gamma, w.rho_tilde, w.phi)
    }
}

impl From<WealthModel> for WealthModelWire {
    fn from(m: WealthModel) -> Self {
        WealthModelWire {
            rho: m.rho(),
            generator: GeneratorWire::Nested(m.generator.rows()),
            y: m.y,
            gamma: m.gamma,
            rho_tilde: m.rho_tilde,
            phi: m.phi,
        }
    }
}

impl WealthModel {
    pub fn new(y: Vec<f64>, generator: GeneratorMatrix, gamma: f64, rho_tilde: f64, phi: f64) -> Result<Self> {
        if y.len() != generator.n() {
            return Err(Error::InvalidArgument(format!("{} incomes for {} states", y.len(), generator.n())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("incomes must be finite".into()));
        }
        for (name, v) in [("gamma", gamma), ("rho_tilde", rho_tilde), ("phi", phi)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let problems = generator.problems();
        if !problems.is_empty() {
            return Err(Error::InvalidArgument(problems.join("; ")));
        }
        let varpi = stationary_distribution(&generator)?;
        Ok(WealthModel { y, generator, gamma, rho_tilde, phi, varpi })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Short content hash used for provenance in reports.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("model serialises");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn rho_tilde(&self) -> f64 {
        self.rho_tilde
    }

    /// Effective discount rate ρ = ρ̃ + φ.
    pub fn rho(&self) -> f64 {
        self.rho_tilde + self.phi
    }

    pub fn varpi(&self) -> &[f64] {
        &self.varpi
    }

    fn incomes_equal(&self) -> bool {
        self.y.iter().all(|v| *v == self.y[0])
    }

    /// y_n − 1/γ + ρ/(γr), the part of the right-hand side that does not
    /// depend on b.
    fn offset(&self, n: usize, r: f64) -> f64 {
        self.y[n] - 1.0 / self.gamma + self.rho() / (self.gamma * r)
    }

    // (1/(γr)) Σ_{n′} π_{nn′} (e^{γ(b_n − b_{n′})} − 1), using zero row sums.
    fn coupling(&self, b: &[f64], n: usize, r: f64) -> f64 {
        let pi = self.generator.matrix();
        let s: f64 = (0..self.n()).filter(|&m| m != n).map(|m| pi[(n, m)] * (self.gamma * (b[n] - b[m])).exp_m1()).sum();
        s / (self.gamma * r)
    }

    /// Defect b_n − (right-hand side)_n of the b-system.
    pub fn residual(&self, b: &[f64], r: f64) -> Vec<f64> {
        (0..self.n()).map(|n| b[n] - self.offset(n, r) + self.coupling(b, n, r)).collect()
    }
}

/// ϖ with ϖᵀΠ = 0 and Σϖ = 1.
pub fn stationary_distribution(generator: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = generator.n();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let pi = generator.matrix();
    if !is_irreducible(pi) {
        return Err(Error::Reducible);
    }
    // Πᵀϖ = 0 with the last equation replaced by the normalisation
    let mut m = pi.transpose();
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = Lu::factor(&m, 0.0)?;
    let mut x = lu.solve(&rhs);
    // one step of iterative refinement
    let corr = lu.solve(&(&rhs - &m * &x));
    x += corr;
    let varpi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = varpi.iter().sum();
    let varpi: Vec<f64> = varpi.iter().map(|v| v / total).collect();
    let resid = (DVector::from_column_slice(&varpi).transpose() * pi).amax();
    if resid > STATIONARY_TOL * (1.0 + crate::numerics::linalg::inf_norm(pi)) {
        return Err(Error::Convergence { what: "stationary distribution", iterations: 1 });
    }
    Ok(varpi)
}

/// The damped monotone map whose fixed point is b(r), together with the
/// order interval [u, v] it maps into itself.
#[derive(Debug, Clone)]
pub struct FixedPointMap<'a> {
    model: &'a WealthModel,
    r: f64,
    pub lower: f64,
    pub upper: f64,
    pub damping: f64,
}

impl<'a> FixedPointMap<'a> {
    pub fn new(model: &'a WealthModel, r: f64) -> Self {
        let base = -1.0 / model.gamma + model.rho() / (model.gamma * r);
        let ymin = model.y.iter().copied().fold(f64::INFINITY, f64::min);
        let ymax = model.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lower = ymin + base - ETA;
        let upper = ymax + base + ETA;
        let pi = model.generator.matrix();
        let spread = (model.gamma * (upper - lower)).exp();
        let max_row = (0..model.n())
            .map(|i| (0..model.n()).filter(|&j| j != i).map(|j| pi[(i, j)]).sum::<f64>())
            .fold(0.0, f64::max);
        let damping = 1.0 + max_row * spread / r;
        FixedPointMap { model, r, lower, upper, damping }
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let k = self.damping;
        (0..b.len())
            .map(|n| (k * b[n] + self.model.offset(n, self.r) - self.model.coupling(b, n, self.r)) / (k + 1.0))
            .collect()
    }
}

/// Solution of the b-system at a given interest rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BSolution {
    pub r: f64,
    pub b: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub k: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// Newton's method on the residual, accepting a step only if it shrinks the
// defect.
fn newton_polish(model: &WealthModel, r: f64, b: &mut Vec<f64>) {
    let n = model.n();
    let pi = model.generator.matrix();
    let mut res = model.residual(b, r);
    for _ in 0..NEWTON_STEPS {
        let norm = sup(&res);
        if norm == 0.0 {
            return;
        }
        let jac = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + (0..n).filter(|&m| m != i).map(|m| pi[(i, m)] * (model.gamma * (b[i] - b[m])).exp()).sum::<f64>() / r
            } else {
                -pi[(i, j)] * (model.gamma * (b[i] - b[j])).exp() / r
            }
        });
        let Ok(lu) = Lu::factor(&jac, 0.0) else { return };
        let step = lu.solve(&DVector::from_column_slice(&res));
        let trial: Vec<f64> = b.iter().zip(step.iter()).map(|(x, d)| x - d).collect();
        let trial_res = model.residual(&trial, r);
        if sup(&trial_res) >= norm {
            return;
        }
        *b = trial;
        res = trial_res;
    }
}

/// Solves the b-system at rate r by damped fixed-point iteration from the
/// centre of the order interval, then polishes with Newton.
pub fn solve_b(model: &WealthModel, r: f64) -> Result<BSolution> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("interest rate must be positive, got {r}")));
    }
    let map = FixedPointMap::new(model, r);
    let mid = 0.5 * (map.lower + map.upper);
    let mut b = vec![mid; model.n()];
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let next = map.apply(&b);
        iterations += 1;
        let step = b.iter().zip(&next).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        b = next;
        if step < STEP_TOL {
            break;
        }
    }
    newton_polish(model, r, &mut b);
    let residual = sup(&model.residual(&b, r));
    if !(residual <= RESIDUAL_TOL * (1.0 + sup(&b))) {
        return Err(Error::NoConvergence { residual, iterations });
    }
    Ok(BSolution { r, b, residual, iterations, k: map.damping })
}

/// g(r) = ϖᵀ(y − b(r)), aggregate net saving.
pub fn excess_supply(model: &WealthModel, r: f64) -> Result<f64> {
    let sol = solve_b(model, r)?;
    Ok(model.varpi.iter().zip(&model.y).zip(&sol.b).map(|((p, y), b)| p * (y - b)).sum())
}

/// ζ(−ρI − γr·diag(y − b) + Π) + r, zero for an exact solution.
pub fn budget_spectral_check(model: &WealthModel, b: &BSolution) -> Result<f64> {
    let n = model.n();
    let mut a = model.generator.matrix().clone();
    for i in 0..n {
        a[(i, i)] += -model.rho() - model.gamma * b.r * (model.y[i] - b.b[i]);
    }
    Ok(spectral_abscissa_metzler(&a)?.zeta + b.r)
}

/// Markov-modulated process followed by an agent's wealth: drift y_n − b_n
/// in state n, killed at the mortality rate, started from ϖ.
pub fn induced_spec(model: &WealthModel, b: &BSolution) -> ModelSpec {
    let exponents = (0..model.n()).map(|n| LevyExponent::LinearDrift { mu: model.y[n] - b.b[n] }).collect();
    ModelSpec::new(model.varpi.clone(), model.generator.clone(), exponents, vec![model.phi; model.n()])
        .expect("dimensions agree")
}

/// Tail rates of the stationary wealth distribution at a given rate r.
pub fn wealth_tail_rates(model: &WealthModel, r: f64) -> Result<DecayRates> {
    let sol = solve_b(model, r)?;
    find_decay_rates(&induced_spec(model, &sol))
}

/// General equilibrium of the economy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub r_star: f64,
    pub b: BSolution,
    /// Wealth drifts y − b.
    pub slopes: Vec<f64>,
    pub rates: DecayRates,
    pub g_residual: f64,
    /// Points (r, g(r)) evaluated while bracketing, in order.
    pub bracket_log: Vec<(f64, f64)>,
}

impl Equilibrium {
    pub fn alpha(&self) -> Option<f64> {
        self.rates.alpha
    }

    pub fn beta(&self) -> Option<f64> {
        self.rates.beta
    }
}

/// Solves g(r) = 0 on (0, ρ]. The bracket is [r_lo, 2r_lo] where r_lo is the
/// first point of the halving sequence ρ/2, ρ/4, … with g(r_lo) < 0; other
/// roots closer to ρ, if any, are not searched for (see [`sweep_excess_supply`]).
pub fn solve_equilibrium(model: &WealthModel) -> Result<Equilibrium> {
    let rho = model.rho();
    if model.incomes_equal() {
        let b = solve_b(model, rho)?;
        let zeta0 = -model.phi;
        return Ok(Equilibrium {
            r_star: rho,
            slopes: vec![0.0; model.n()],
            b,
            rates: DecayRates {
                alpha: None,
                beta: None,
                alpha_status: RootStatus::DomainDegenerate,
                beta_status: RootStatus::DomainDegenerate,
                zeta_at_zero: zeta0,
                alpha_probe: None,
                beta_probe: None,
            },
            g_residual: 0.0,
            bracket_log: Vec::new(),
        });
    }
    let mut log = Vec::new();
    let g_rho = excess_supply(model, rho)?;
    log.push((rho, g_rho));
    let (mut hi, mut g_hi) = (rho, g_rho);
    let mut lo = rho / 2.0;
    let g_lo = loop {
        let g = excess_supply(model, lo)?;
        log.push((lo, g));
        if g < 0.0 {
            break g;
        }
        hi = lo;
        g_hi = g;
        lo /= 2.0;
        if lo < R_FLOOR {
            return Err(Error::BracketFailure { r_lo: lo });
        }
    };
    let r_star = if g_hi.abs() <= G_TOL {
        hi
    } else {
        brent(|r| excess_supply(model, r).unwrap_or(f64::NAN), lo, hi, g_lo, g_hi, 1e-15 * rho, 300)?.x
    };
    let b = solve_b(model, r_star)?;
    let g = model.varpi.iter().zip(&model.y).zip(&b.b).map(|((p, y), bn)| p * (y - bn)).sum::<f64>();
    let slopes: Vec<f64> = model.y.iter().zip(&b.b).map(|(y, bn)| y - bn).collect();
    let rates = find_decay_rates(&induced_spec(model, &b))?;
    Ok(Equilibrium { r_star, b, slopes, rates, g_residual: g.abs(), bracket_log: log })
}

/// One point of an excess-supply sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub r: f64,
    pub g: f64,
    pub b: Vec<f64>,
    pub budget_check: f64,
}

/// g(r) on an evenly spaced grid of `points` rates in [from, to].
pub fn sweep_excess_supply(model: &WealthModel, from: f64, to: f64, points: usize) -> Result<Vec<SweepPoint>> {
    if !(from > 0.0 && to >= from) || points == 0 {
        return Err(Error::InvalidArgument(format!("bad sweep range [{from}, {to}] with {points} points")));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| if points == 1 { from } else { from + (to - from) * i as f64 / (points - 1) as f64 })
        .collect();
    grid.par_iter()
        .map(|&r| {
            let sol = solve_b(model, r)?;
            let g = model.varpi.iter().zip(&model.y).zip(&sol.b).map(|((p, y), bn)| p * (y - bn)).sum();
            let budget_check = budget_spectral_check(model, &sol)?;
            Ok(SweepPoint { r, g, b: sol.b, budget_check })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(y: f64) -> WealthModel {
        WealthModel::new(vec![y], GeneratorMatrix::new(DMatrix::zeros(1, 1)).unwrap(), 2.0, 0.03, 0.02).unwrap()
    }

    fn two_state() -> WealthModel {
        WealthModel::new(vec![1.0, -1.0], GeneratorMatrix::two_state(1.0, 1.0), 1.0, 0.04, 0.02).unwrap()
    }

    #[test]
    fn stationary_examples() {
        assert_eq!(stationary_distribution(&GeneratorMatrix::two_state(1.0, 1.0)).unwrap(), vec![0.5, 0.5]);
        let v = stationary_distribution(&GeneratorMatrix::two_state(2.0, 1.0)).unwrap();
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15 && (v[1] - 2.0 / 3.0).abs() < 1e-15);
        let g = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(stationary_distribution(&g), Err(Error::Reducible)));
    }

    #[test]
    fn single_state_closed_form() {
        let m = single(1.5);
        let r = 0.04;
        let b = solve_b(&m, r).unwrap();
        let expect = 1.5 - 0.5 + m.rho() / (2.0 * r);
        assert!((b.b[0] - expect).abs() < 1e-12);
        let g = excess_supply(&m, r).unwrap();
        assert!((g - (0.5 - m.rho() / (2.0 * r))).abs() < 1e-12);
        assert!(excess_supply(&m, m.rho()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_state_solution() {
        let m = WealthModel::new(vec![1.0, -1.0], GeneratorMatrix::two_state(1.0, 1.0), 1.0, 0.05, 0.05).unwrap();
        let sol = solve_b(&m, 0.1).unwrap();
        assert!(sol.residual <= 1e-12 * (1.0 + sup(&sol.b)));
        let map = FixedPointMap::new(&m, 0.1);
        assert!(sol.b.iter().all(|b| *b > map.lower + ETA - 1e-12 && *b < map.upper - ETA + 1e-12));
        assert!(budget_spectral_check(&m, &sol).unwrap().abs() < 1e-8);
    }

    #[test]
    fn equilibrium_single_state() {
        let e = solve_equilibrium(&single(0.7)).unwrap();
        assert_eq!(e.r_star, single(0.7).rho());
        assert!((e.b.b[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_two_state() {
        let m = two_state();
        let e = solve_equilibrium(&m).unwrap();
        assert!(e.r_star > 0.0 && e.r_star <= m.rho());
        assert!(e.g_residual <= 1e-10);
        assert!(e.slopes[0] > 0.0 && e.slopes[1] < 0.0);
        assert!(e.alpha().is_some() && e.beta().is_some());
    }

    #[test]
    fn wealth_rates_match_linear_example() {
        // drifts (−1, 1) with π = (1, 1) and φ = 0.5 give α = β = √1.25
        let model = WealthModel::new(vec![0.0, 0.0], GeneratorMatrix::two_state(1.0, 1.0), 1.0, 0.1, 0.5).unwrap();
        let sol = BSolution { r: 0.1, b: vec![1.0, -1.0], residual: 0.0, iterations: 0, k: 0.0 };
        let r = find_decay_rates(&induced_spec(&model, &sol)).unwrap();
        assert!((r.alpha.unwrap() - 1.25f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"y": [1.0, -1.0], "generator": [[-1, 1], [1, -1]], "gamma": 1.0, "rho_tilde": 0.04, "phi": 0.02}"#;
        let m = WealthModel::from_json(text).unwrap();
        assert!((m.rho() - 0.06).abs() < 1e-15);
        let out = serde_json::to_value(&m).unwrap();
        assert!((out["rho"].as_f64().unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(WealthModel::from_json(&out.to_string()).unwrap(), m);
    }
}
