//! Monte Carlo simulation of a Markov-modulated Lévy process up to its
//! killing time.
//!
//! Every path draws from its own ChaCha stream selected by the path index,
//! so a sample set depends only on (spec, config) and not on how rayon
//! schedules the work. Increments over each holding segment are drawn from
//! their exact law; nothing is discretised in time.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Cauchy, Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{validate, GeneratorMatrix, JumpMgf, LevyExponent, ModelSpec, GAMMA_0_1};
use crate::spectral::spectral_abscissa_metzler;

const MIN_TAIL_POINTS: usize = 50;
const ABSORPTION_TOL: f64 = 1e-12;
const ABSORPTION_MAX_SWEEPS: usize = 10_000_000;

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Paths still alive at this time are censored. `None` picks
    /// [`default_horizon`].
    pub horizon_cap: Option<f64>,
    /// Pair paths (2k, 2k+1) so that the second reuses the first's random
    /// stream with every Gaussian draw negated.
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        SimConfig { n_paths, seed, horizon_cap: None, antithetic: false }
    }
}

/// 50 divided by the smallest positive killing intensity, or infinity when
/// no state is ever killed.
pub fn default_horizon(spec: &ModelSpec) -> f64 {
    let min_phi = spec.phi().iter().copied().filter(|p| *p > 0.0).fold(f64::INFINITY, f64::min);
    if min_phi.is_finite() {
        50.0 / min_phi
    } else {
        f64::INFINITY
    }
}

/// End state of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    /// W at the killing time, or at the horizon for censored paths.
    pub w: f64,
    pub censored: bool,
    pub state: usize,
}

/// Simulated draws of W_T.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    /// Uncensored W_T values in path order.
    pub values: Vec<f64>,
    pub censored: usize,
    pub seed: u64,
    pub spec_hash: String,
    pub horizon_cap: f64,
    pub outcomes: Vec<PathOutcome>,
}

impl SampleSet {
    /// Builds a sample set from raw draws, e.g. for fitting external data.
    pub fn from_values(values: Vec<f64>) -> Self {
        let outcomes = values.iter().map(|&w| PathOutcome { w, censored: false, state: 0 }).collect();
        SampleSet { values, censored: 0, seed: 0, spec_hash: String::new(), horizon_cap: f64::INFINITY, outcomes }
    }

    pub fn n_paths(&self) -> usize {
        self.outcomes.len()
    }

    /// CSV with columns `path_index,w_T,censored`, preceded by `#` comment
    /// lines carrying the seed and spec hash. Values keep 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# spec_hash={}", self.spec_hash)?;
        writeln!(out, "path_index,w_T,censored")?;
        for (i, o) in self.outcomes.iter().enumerate() {
            writeln!(out, "{},{:.16e},{}", i, o.w, u8::from(o.censored))?;
        }
        Ok(())
    }
}

// Per-state sampling data precomputed from the spec.
struct StateSampler {
    exit_rate: f64,
    phi: f64,
    targets: Vec<(usize, f64)>,
    exponent: LevyExponent,
}

struct Engine<'a> {
    spec: &'a ModelSpec,
    states: Vec<StateSampler>,
    varpi_cum: Vec<f64>,
}

struct PathOptions {
    start: Option<usize>,
    kill: bool,
    horizon: f64,
    negate: bool,
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("nonempty distribution");
    let target = u * total;
    cum.iter().position(|&c| target < c).unwrap_or(cum.len() - 1)
}

fn normal<R: Rng>(rng: &mut R, negate: bool) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    if negate {
        -z
    } else {
        z
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

// Jump of the Lévy measure x⁻²e⁻ˣ dx on [1, ∞), normalised: propose from the
// Pareto density x⁻² and accept with probability e^{−(x−1)}.
fn pareto_exp_jump<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let x = 1.0 / u;
        if rng.random::<f64>() < (1.0 - x).exp() {
            return x;
        }
    }
}

/// Total mass c∫₁^∞ x⁻²e⁻ˣ dx = c(e⁻¹ − Γ(0,1)) of the Pareto-exp Lévy
/// measure.
pub fn pareto_exp_intensity(c: f64) -> f64 {
    c * ((-1.0f64).exp() - GAMMA_0_1)
}

fn sample_atoms<R: Rng>(rng: &mut R, atoms: &[crate::process::Atom]) -> f64 {
    let cum = cumulative(atoms.iter().map(|a| a.prob));
    atoms[pick(&cum, rng.random())].value
}

fn levy_increment<R: Rng>(rng: &mut R, e: &LevyExponent, dt: f64, negate: bool) -> f64 {
    match e {
        LevyExponent::BrownianDrift { mu, sigma2 } => {
            let mut w = mu * dt;
            if *sigma2 > 0.0 {
                w += (sigma2 * dt).sqrt() * normal(rng, negate);
            }
            w
        }
        LevyExponent::LinearDrift { mu } => mu * dt,
        LevyExponent::PoissonJump { gamma, h } => poisson_count(rng, gamma * dt) as f64 * h,
        LevyExponent::CompoundPoissonDiscrete { gamma, atoms } => {
            // split the Poisson count over atoms by sequential binomials
            let mut remaining = poisson_count(rng, gamma * dt);
            let mut mass_left = 1.0;
            let mut w = 0.0;
            for a in atoms {
                if remaining == 0 {
                    break;
                }
                let p = if mass_left > 0.0 { (a.prob / mass_left).clamp(0.0, 1.0) } else { 1.0 };
                let k = Binomial::new(remaining, p).expect("valid binomial").sample(rng);
                w += k as f64 * a.value;
                remaining -= k;
                mass_left -= a.prob;
            }
            w
        }
        LevyExponent::TruncatedParetoExpJump { c } => {
            let count = poisson_count(rng, pareto_exp_intensity(*c) * dt);
            (0..count).map(|_| pareto_exp_jump(rng)).sum()
        }
        LevyExponent::Cauchy { scale } => {
            let x: f64 = Cauchy::new(0.0, 1.0).expect("unit Cauchy").sample(rng);
            scale * dt * x
        }
    }
}

fn transition_jump<R: Rng>(rng: &mut R, j: &JumpMgf, negate: bool) -> f64 {
    match j {
        JumpMgf::DegenerateZero => 0.0,
        JumpMgf::DegeneratePoint { a } => *a,
        JumpMgf::DiscreteAtoms { atoms } => sample_atoms(rng, atoms),
        JumpMgf::Gaussian { mean, variance } => mean + variance.sqrt() * normal(rng, negate),
    }
}

fn exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    if rate > 0.0 {
        let e: f64 = rng.sample(Exp1);
        e / rate
    } else {
        f64::INFINITY
    }
}

impl<'a> Engine<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        let n = spec.n();
        let states = (0..n)
            .map(|i| {
                let targets: Vec<(usize, f64)> =
                    (0..n).filter(|&j| j != i && spec.generator().rate(i, j) > 0.0).map(|j| (j, spec.generator().rate(i, j))).collect();
                StateSampler {
                    exit_rate: targets.iter().map(|t| t.1).sum(),
                    phi: spec.phi()[i],
                    targets,
                    exponent: spec.exponents()[i].clone(),
                }
            })
            .collect();
        Engine { spec, states, varpi_cum: cumulative(spec.varpi().iter().copied()) }
    }

    fn run<R: Rng>(&self, rng: &mut R, opts: &PathOptions) -> PathOutcome {
        let mut state = match opts.start {
            Some(s) => s,
            None => pick(&self.varpi_cum, rng.random()),
        };
        let mut w = 0.0;
        let mut t = 0.0;
        loop {
            let st = &self.states[state];
            let hold = exponential(rng, st.exit_rate);
            let kill = if opts.kill { exponential(rng, st.phi) } else { f64::INFINITY };
            let event = hold.min(kill);
            let remaining = opts.horizon - t;
            if remaining < event {
                w += levy_increment(rng, &st.exponent, remaining, opts.negate);
                return PathOutcome { w, censored: true, state };
            }
            if event.is_infinite() {
                // never left and never killed, with no horizon
                return PathOutcome { w, censored: true, state };
            }
            w += levy_increment(rng, &st.exponent, event, opts.negate);
            t += event;
            if kill <= hold {
                return PathOutcome { w, censored: false, state };
            }
            let cum = cumulative(st.targets.iter().map(|x| x.1));
            let next = st.targets[pick(&cum, rng.random())].0;
            w += transition_jump(rng, self.spec.jump(state, next), opts.negate);
            state = next;
        }
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_paths(engine: &Engine<'_>, cfg: &SimConfig, start: Option<usize>, kill: bool, horizon: f64) -> Vec<PathOutcome> {
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let (stream, negate) = if cfg.antithetic { ((i / 2) as u64, i % 2 == 1) } else { (i as u64, false) };
            let mut rng = path_rng(cfg.seed, stream);
            engine.run(&mut rng, &PathOptions { start, kill, horizon, negate })
        })
        .collect()
}

/// Simulates W_T for `cfg.n_paths` independent paths.
pub fn simulate_stopped(spec: &ModelSpec, cfg: &SimConfig) -> Result<SampleSet> {
    validate(spec).into_result()?;
    if cfg.n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
    }
    let horizon = cfg.horizon_cap.unwrap_or_else(|| default_horizon(spec));
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon_cap must be positive, got {horizon}")));
    }
    let engine = Engine::new(spec);
    let outcomes = run_paths(&engine, cfg, None, true, horizon);
    let values: Vec<f64> = outcomes.iter().filter(|o| !o.censored).map(|o| o.w).collect();
    Ok(SampleSet {
        censored: outcomes.len() - values.len(),
        values,
        seed: cfg.seed,
        spec_hash: spec.content_hash(),
        horizon_cap: horizon,
        outcomes,
    })
}

/// Simulates (W_t, J_t) at a fixed time t from J₀ = `start`, ignoring
/// killing. Used to check conditional MGF matrices.
pub fn simulate_fixed_horizon(spec: &ModelSpec, start: usize, t: f64, n_paths: usize, seed: u64) -> Result<Vec<(f64, usize)>> {
    validate(spec).into_result()?;
    if start >= spec.n() || !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("bad start state {start} or horizon {t}")));
    }
    let engine = Engine::new(spec);
    let cfg = SimConfig::new(n_paths, seed);
    Ok(run_paths(&engine, &cfg, Some(start), false, t).into_iter().map(|o| (o.w, o.state)).collect())
}

/// Upper tail (P(W > w)) or lower tail (P(W < −w)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    Upper,
    Lower,
}

/// Log-linear fit of an empirical tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub side: TailSide,
    /// Estimate of −α (upper) or −β (lower).
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of `slope` from independent batches of paths (see
    /// [`fit_tail`]). Falls back to `ols_stderr` when `batches` is 0.
    pub stderr: f64,
    /// Textbook OLS standard error. It treats the log-survival residuals as
    /// independent, which they are not, and understates the sampling error
    /// badly when the window holds many distinct values.
    pub ols_stderr: f64,
    pub batches: usize,
    pub window: (f64, f64),
    pub n_window: usize,
}

pub const DEFAULT_TAIL_WINDOW: (f64, f64) = (0.95, 0.9995);

/// Preferred number of batches for the slope standard error.
pub const TAIL_BATCHES: usize = 20;
const MIN_TAIL_BATCHES: usize = 5;

/// OLS of log P̂ on w over one sample; returns (slope, intercept, ols
/// stderr, n_window).
fn fit_sorted(xs: &[f64], window: (f64, f64)) -> Result<(f64, f64, f64, usize)> {
    let (q_lo, q_hi) = window;
    let n = xs.len();
    let lo = (q_lo * n as f64).ceil() as usize;
    let hi = ((q_hi * n as f64).floor() as usize).min(n);
    let n_window = hi.saturating_sub(lo);
    if n_window < MIN_TAIL_POINTS {
        return Err(Error::InsufficientTail { n_window, required: MIN_TAIL_POINTS });
    }
    // one point per distinct value: (x, log of the fraction of samples ≥ x)
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut i = lo;
    while i < hi {
        let x = xs[i];
        let first = xs.partition_point(|v| *v < x);
        pts.push((x, ((n - first) as f64 / n as f64).ln()));
        i = xs.partition_point(|v| *v <= x).max(i + 1);
    }
    let (slope, intercept, stderr) = ols(&pts)?;
    Ok((slope, intercept, stderr, n_window))
}

/// Least-squares slope of log P̂(±W ≥ w) against w over the sample points
/// between the `window` quantiles of the chosen tail.
///
/// Tied sample values contribute one regression point each, so lattice data
/// produce one point per lattice site.
///
/// The reported `stderr` comes from batch means: the paths are split into
/// up to [`TAIL_BATCHES`] consecutive batches, each batch is fitted with the
/// same window, and the spread of the batch slopes divided by √K estimates
/// the sampling error of the full-sample slope.
pub fn fit_tail(samples: &SampleSet, side: TailSide, window: (f64, f64)) -> Result<TailFit> {
    let (q_lo, q_hi) = window;
    if !(0.0 <= q_lo && q_lo < q_hi && q_hi <= 1.0) {
        return Err(Error::InvalidArgument(format!("tail window ({q_lo}, {q_hi}) must satisfy 0 <= q_lo < q_hi <= 1")));
    }
    let signed: Vec<f64> = match side {
        TailSide::Upper => samples.values.clone(),
        TailSide::Lower => samples.values.iter().map(|v| -v).collect(),
    };
    let mut xs = signed.clone();
    xs.sort_by(f64::total_cmp);
    let (slope, intercept, ols_stderr, n_window) = fit_sorted(&xs, window)?;

    let n = signed.len();
    let fits_in = |k: usize| ((q_hi - q_lo) * (n / k) as f64) as usize > MIN_TAIL_POINTS;
    let k = (MIN_TAIL_BATCHES..=TAIL_BATCHES).rev().find(|&k| fits_in(k));
    let batch_slopes: Option<Vec<f64>> = k.and_then(|k| {
        let size = n / k;
        signed
            .chunks(size)
            .take(k)
            .map(|chunk| {
                let mut b = chunk.to_vec();
                b.sort_by(f64::total_cmp);
                fit_sorted(&b, window).ok().map(|f| f.0)
            })
            .collect()
    });
    let (stderr, batches) = match batch_slopes {
        Some(bs) => {
            let k = bs.len() as f64;
            let mean = bs.iter().sum::<f64>() / k;
            let var = bs.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0);
            ((var / k).sqrt(), bs.len())
        }
        None => (ols_stderr, 0),
    };
    Ok(TailFit { side, slope, intercept, stderr, ols_stderr, batches, window, n_window })
}

fn ols(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let m = pts.len();
    if m < 3 {
        return Err(Error::InsufficientTail { n_window: m, required: 3 });
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("tail window has no spread in w".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (mf - 2.0) / sxx).sqrt();
    Ok((slope, intercept, stderr))
}

/// Sample mean of e^{sW_T} with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalMgf {
    pub mean: f64,
    pub stderr: f64,
    /// Set when s lies within 5% of an end of the supplied strip, where the
    /// variance of e^{sW_T} may be infinite.
    pub near_boundary: bool,
}

/// Empirical MGF at s. `strip` is the interval (−β, α) on which the MGF is
/// finite, when known.
pub fn empirical_mgf(samples: &SampleSet, s: f64, strip: Option<(f64, f64)>) -> EmpiricalMgf {
    let n = samples.values.len();
    let near_boundary = strip.is_some_and(|(lo, hi)| {
        let width = hi - lo;
        let close = |e: f64| e.is_finite() && (s - e).abs() <= 0.05 * if width.is_finite() { width } else { e.abs() };
        s <= lo || s >= hi || close(lo) || close(hi)
    });
    if n == 0 {
        return EmpiricalMgf { mean: f64::NAN, stderr: f64::NAN, near_boundary };
    }
    if s == 0.0 {
        return EmpiricalMgf { mean: 1.0, stderr: 0.0, near_boundary };
    }
    let vals: Vec<f64> = samples.values.iter().map(|w| (s * w).exp()).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    EmpiricalMgf { mean, stderr: (var / n as f64).sqrt(), near_boundary }
}

/// Probability of eventual killing from each starting state: the minimal
/// nonnegative solution of (Π − Φ)x = (Π − Φ)1.
pub fn absorption_probability(generator: &GeneratorMatrix, phi: &[f64]) -> Result<Vec<f64>> {
    let n = generator.n();
    if phi.len() != n {
        return Err(Error::InvalidArgument("phi length must equal N".into()));
    }
    let mut a = generator.matrix().clone();
    for i in 0..n {
        a[(i, i)] -= phi[i];
    }
    let zeta = spectral_abscissa_metzler(&a)?.zeta;
    if zeta < -1e-10 {
        return Ok(vec![1.0; n]);
    }
    minimal_absorption(generator.matrix(), phi)
}

// Gauss–Seidel value iteration of x_n = (φ_n + Σ π_{nn'} x_{n'}) / (q_n + φ_n)
// from x = 0. States from which no killing state is reachable stay at zero,
// so the iteration only has to resolve the transient part.
fn minimal_absorption(pi: &DMatrix<f64>, phi: &[f64]) -> Result<Vec<f64>> {
    let n = phi.len();
    let mut x = vec![0.0; n];
    for _ in 0..ABSORPTION_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let exit: f64 = (0..n).filter(|&j| j != i).map(|j| pi[(i, j)]).sum();
            let denom = exit + phi[i];
            if denom == 0.0 {
                continue;
            }
            let inflow: f64 = (0..n).filter(|&j| j != i).map(|j| pi[(i, j)] * x[j]).sum();
            let new = (phi[i] + inflow) / denom;
            change = change.max((new - x[i]).abs());
            x[i] = new;
        }
        if change < ABSORPTION_TOL {
            return Ok(x);
        }
    }
    Err(Error::Convergence { what: "absorption value iteration", iterations: ABSORPTION_MAX_SWEEPS })
}

/// Fraction of simulated paths from `start` that are eventually killed. The
/// embedded jump chain is followed until a kill, or until it enters a set of
/// states from which killing is unreachable.
pub fn simulate_absorption(generator: &GeneratorMatrix, phi: &[f64], start: usize, n_paths: usize, seed: u64) -> Result<f64> {
    let n = generator.n();
    if phi.len() != n || start >= n || n_paths == 0 {
        return Err(Error::InvalidArgument("bad absorption simulation arguments".into()));
    }
    let pi = generator.matrix();
    // states that can reach a killing state
    let mut live: Vec<bool> = phi.iter().map(|p| *p > 0.0).collect();
    loop {
        let mut grew = false;
        for i in 0..n {
            if !live[i] && (0..n).any(|j| j != i && live[j] && pi[(i, j)] > 0.0) {
                live[i] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|i| {
            let w: Vec<f64> = (0..n).map(|j| if j == i { 0.0 } else { pi[(i, j)] }).chain(std::iter::once(phi[i])).collect();
            let total = w.iter().sum();
            (cumulative(w.into_iter()), total)
        })
        .collect();
    let killed: usize = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut s = start;
            loop {
                if !live[s] || rows[s].1 == 0.0 {
                    return 0;
                }
                let k = pick(&rows[s].0, rng.random());
                if k == n {
                    return 1;
                }
                s = k;
            }
        })
        .sum();
    Ok(killed as f64 / n_paths as f64)
}
