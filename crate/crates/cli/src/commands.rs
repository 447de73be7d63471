//! Subcommand implementations.

use std::fmt;
use std::path::Path;

use levytail::simulate::{EmpiricalMgf, DEFAULT_TAIL_WINDOW};
use levytail::tail::abscissa_at;
use levytail::wealth::{induced_spec, sweep_excess_supply};
use levytail::{
    budget_spectral_check, empirical_mgf, excess_supply, find_decay_rates, fit_tail, lattice_info, mgf_stopped,
    nakagawa_bounds, pole_residue, simulate_stopped, solve_b, solve_equilibrium, DecayRates, LatticeInfo, ModelSpec,
    RootStatus, SampleSet, SimConfig, TailSide, WealthModel,
};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::report::{emit_json, is_csv, write_atomic, write_csv, Report};
use crate::{AnalyzeArgs, SimulateArgs, SweepArgs, SweepVar, VerifyArgs, WealthArgs};

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Core(levytail::Error),
    Read(String, std::io::Error),
    Write(String, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) | CliError::Read(..) => 2,
            CliError::Write(..) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Read(p, e) => write!(f, "cannot read {p}: {e}"),
            CliError::Write(p, e) => write!(f, "cannot write {p}: {e}"),
        }
    }
}

impl From<levytail::Error> for CliError {
    fn from(e: levytail::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Read(path.display().to_string(), e))
}

fn load_spec(path: &Path) -> CliResult<ModelSpec> {
    Ok(ModelSpec::from_json(&read(path)?)?)
}

fn load_wealth(path: &Path) -> CliResult<WealthModel> {
    Ok(WealthModel::from_json(&read(path)?)?)
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Write(path.display().to_string(), e)
}

fn emit(report: &Report, out: Option<&Path>) -> CliResult {
    emit_json(report, out).map_err(write_err(out.unwrap_or(Path::new("<stdout>"))))
}

/// Residue and bounds for one tail, or the reason they are unavailable.
fn tail_block(spec: &ModelSpec, location: Option<f64>, lattice: &Result<LatticeInfo, String>) -> Value {
    let Some(s0) = location else {
        return Value::Null;
    };
    let pole = match pole_residue(spec, s0) {
        Ok(p) => p,
        Err(e) => return json!({ "pole": s0, "error": e.to_string() }),
    };
    let bounds = match lattice {
        Ok(l) => match nakagawa_bounds(&pole, l) {
            Ok(b) => json!(b),
            Err(e) => json!({ "error": e.to_string() }),
        },
        Err(e) => json!({ "error": e }),
    };
    json!({
        "pole": s0,
        "c": pole.c,
        "mgf_residue": pole.mgf_residue,
        "simple": pole.simple,
        "bounds": bounds,
    })
}

fn found(rate: Option<f64>, status: RootStatus) -> Option<f64> {
    rate.filter(|_| status == RootStatus::FoundInterior)
}

fn analysis(spec: &ModelSpec) -> CliResult<(DecayRates, Result<LatticeInfo, String>, Value)> {
    let rates = find_decay_rates(spec)?;
    let lattice = lattice_info(spec).map_err(|e| e.to_string());
    let upper = tail_block(spec, found(rates.alpha, rates.alpha_status), &lattice);
    let lower = tail_block(spec, found(rates.beta, rates.beta_status).map(|b| -b), &lattice);
    let value = json!({
        "domain": spec.domain().to_string(),
        "rates": rates,
        "lattice": match &lattice { Ok(l) => json!(l), Err(e) => json!({ "error": e }) },
        "upper_tail": upper,
        "lower_tail": lower,
    });
    Ok((rates, lattice, value))
}

fn root_tolerances() -> Value {
    json!({
        "root_xtol": 1e-12,
        "root_ftol": 1e-10,
        "residue_root_tol": 1e-8,
        "simple_pole_tol": 1e-12,
        "lattice_rel_tol": 1e-13,
    })
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult {
    let spec = load_spec(&args.spec)?;
    let (_, _, result) = analysis(&spec)?;
    let report = Report::new("analyze", Some(spec.content_hash()), None, root_tolerances(), result);
    emit(&report, args.out.as_deref())
}

fn summary(samples: &SampleSet) -> Value {
    let mut v = samples.values.clone();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let q = |p: f64| if n == 0 { f64::NAN } else { v[((p * (n - 1) as f64).round() as usize).min(n - 1)] };
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    json!({
        "n_paths": n,
        "censored": samples.censored,
        "horizon_cap": samples.horizon_cap,
        "mean": mean,
        "mean_stderr": (var / n as f64).sqrt(),
        "quantiles": {
            "0.001": q(0.001), "0.01": q(0.01), "0.5": q(0.5), "0.99": q(0.99), "0.999": q(0.999),
        },
    })
}

fn sim_config(paths: usize, seed: u64, horizon: Option<f64>, antithetic: bool) -> CliResult<SimConfig> {
    if paths == 0 {
        return Err(levytail::Error::InvalidArgument("--paths must be positive".into()).into());
    }
    if let Some(h) = horizon {
        if !(h > 0.0) {
            return Err(levytail::Error::InvalidArgument(format!("--horizon must be positive, got {h}")).into());
        }
    }
    let mut cfg = SimConfig::new(paths, seed);
    cfg.horizon_cap = horizon;
    cfg.antithetic = antithetic;
    Ok(cfg)
}

pub fn simulate(args: &SimulateArgs) -> CliResult {
    let spec = load_spec(&args.spec)?;
    let cfg = sim_config(args.paths, args.seed, args.horizon, args.antithetic)?;
    let samples = simulate_stopped(&spec, &cfg)?;
    let tol = json!({ "horizon_cap": samples.horizon_cap, "antithetic": args.antithetic });
    let report = Report::new("simulate", Some(spec.content_hash()), Some(args.seed), tol, summary(&samples));
    match args.out.as_deref() {
        Some(path) if is_csv(path) => {
            write_atomic(path, |w| samples.write_csv(w)).map_err(write_err(path))?;
            emit(&report, None)
        }
        out => emit(&report, out),
    }
}

/// Survival probability P(±W > w) over `total` paths, censored ones
/// included, with its binomial standard error.
fn survival(sorted: &[f64], total: usize, w: f64) -> (f64, f64) {
    let n = total as f64;
    let above = sorted.len() - sorted.partition_point(|v| *v <= w);
    let p = above as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

fn band_checks(values: &[f64], total: usize, rate: f64, lower: f64, upper: f64) -> Vec<Value> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut out = Vec::new();
    for q in [0.9, 0.99, 0.999] {
        let x = sorted[((q * n as f64) as usize).min(n - 1)];
        // the point itself and just below it, so lattice data show both the
        // bottom and the top of the oscillation
        for w in [x, x - 1e-6] {
            let (p, se) = survival(&sorted, total, w);
            let scale = (rate * w).exp();
            let (v, v_se) = (scale * p, scale * se);
            let pass = v >= lower - 3.0 * v_se && v <= upper + 3.0 * v_se;
            out.push(json!({ "w": w, "scaled_survival": v, "stderr": v_se, "pass": pass }));
        }
    }
    out
}

fn mgf_check(spec: &ModelSpec, samples: &SampleSet, s: f64, strip: (f64, f64)) -> Value {
    let emp: EmpiricalMgf = empirical_mgf(samples, s, Some(strip));
    match mgf_stopped(spec, Complex64::new(s, 0.0)) {
        Ok(m) => {
            let z = (emp.mean - m.re) / emp.stderr;
            json!({
                "s": s, "analytic": m.re, "empirical": emp.mean, "stderr": emp.stderr,
                "z_score": z, "near_boundary": emp.near_boundary, "pass": z.abs() <= 4.0,
            })
        }
        Err(e) => json!({ "s": s, "error": e.to_string() }),
    }
}

/// Probe point for the MGF comparison: a quarter of the way to the strip
/// edge, which keeps the variance of e^{sW} finite.
fn probe(edge: Option<f64>, domain_edge: f64) -> f64 {
    let e = edge.unwrap_or(if domain_edge.is_finite() { domain_edge.abs() } else { 2.0 });
    0.25 * e.min(4.0)
}

pub fn verify(args: &VerifyArgs) -> CliResult {
    let spec = load_spec(&args.spec)?;
    let window = args.window.unwrap_or(DEFAULT_TAIL_WINDOW);
    let (rates, lattice, analytic) = analysis(&spec)?;
    let cfg = sim_config(args.paths, args.seed, args.horizon, false)?;
    let samples = simulate_stopped(&spec, &cfg)?;

    let mut checks = serde_json::Map::new();
    let mut all_pass = true;
    let sides = [
        ("upper", TailSide::Upper, found(rates.alpha, rates.alpha_status), 1.0),
        ("lower", TailSide::Lower, found(rates.beta, rates.beta_status), -1.0),
    ];
    for (name, side, rate, sign) in sides {
        let Some(rate) = rate else { continue };
        let fit = match fit_tail(&samples, side, window) {
            Ok(f) => f,
            Err(e) => {
                checks.insert(format!("{name}_slope"), json!({ "error": e.to_string() }));
                continue;
            }
        };
        let diff = -fit.slope - rate;
        let pass = diff.abs() <= 3.0 * fit.stderr;
        all_pass &= pass;
        checks.insert(
            format!("{name}_slope"),
            json!({ "rate": rate, "fit": fit, "difference": diff, "threshold": 3.0 * fit.stderr, "pass": pass }),
        );
        let pole = pole_residue(&spec, sign * rate).ok();
        let bounds = match (&lattice, pole) {
            (Ok(l), Some(p)) => nakagawa_bounds(&p, l).ok(),
            _ => None,
        };
        if let Some(b) = bounds {
            let vals: Vec<f64> = samples.values.iter().map(|v| sign * v).collect();
            let pts = band_checks(&vals, samples.n_paths(), rate, b.lower, b.upper);
            let pass = pts.iter().all(|p| p["pass"] == json!(true));
            all_pass &= pass;
            checks.insert(
                format!("{name}_band"),
                json!({ "lower": b.lower, "upper": b.upper, "points": pts, "pass": pass }),
            );
        }
    }

    let domain = spec.domain();
    let strip = (
        rates.beta.map_or(domain.lo, |b| -b),
        rates.alpha.map_or(domain.hi, |a| a),
    );
    let mut mgf = Vec::new();
    if rates.zeta_at_zero < 0.0 {
        for s in [probe(found(rates.alpha, rates.alpha_status), domain.hi), -probe(found(rates.beta, rates.beta_status), domain.lo)] {
            if domain.contains_interior(s) {
                let c = mgf_check(&spec, &samples, s, strip);
                all_pass &= c["pass"] != json!(false);
                mgf.push(c);
            }
        }
    }
    checks.insert("mgf".into(), Value::Array(mgf));

    let tol = json!({
        "tail_window": window,
        "slope_threshold": "3 fit stderr",
        "band_threshold": "3 binomial stderr outside [lower, upper]; bounds are asymptotic in w",
        "mgf_threshold": "4 sample stderr",
        "roots": root_tolerances(),
    });
    let result = json!({
        "analytic": analytic,
        "simulation": summary(&samples),
        "checks": checks,
        "all_pass": all_pass,
    });
    let report = Report::new("verify", Some(spec.content_hash()), Some(args.seed), tol, result);
    emit(&report, args.out.as_deref())
}

fn wealth_tail_fit(model: &WealthModel, sol: &levytail::BSolution, paths: usize, seed: u64, window: (f64, f64), alpha: Option<f64>) -> CliResult<Value> {
    let spec = induced_spec(model, sol);
    let samples = simulate_stopped(&spec, &sim_config(paths, seed, None, false)?)?;
    let fit = fit_tail(&samples, TailSide::Upper, window)?;
    let mut v = json!({ "fit": fit });
    if let Some(a) = alpha {
        let diff = -fit.slope - a;
        v["difference"] = json!(diff);
        v["threshold"] = json!(3.0 * fit.stderr);
        v["pass"] = json!(diff.abs() <= 3.0 * fit.stderr);
    }
    Ok(v)
}

pub fn wealth(args: &WealthArgs) -> CliResult {
    let model = load_wealth(&args.spec)?;
    let window = args.window.unwrap_or(DEFAULT_TAIL_WINDOW);
    let tol = json!({
        "b_residual": "1e-12 (1 + |b|)",
        "g_root_xtol": 1e-15 * model.rho(),
        "roots": root_tolerances(),
        "tail_window": window,
    });
    let mut result = match args.rate {
        Some(r) => {
            if !(r > 0.0) {
                return Err(levytail::Error::InvalidArgument(format!("--rate must be positive, got {r}")).into());
            }
            let sol = solve_b(&model, r)?;
            let rates = find_decay_rates(&induced_spec(&model, &sol))?;
            json!({
                "rate": r,
                "rho": model.rho(),
                "varpi": model.varpi(),
                "b": sol,
                "excess_supply": excess_supply(&model, r)?,
                "budget_check": budget_spectral_check(&model, &sol)?,
                "rates": rates,
            })
        }
        None => {
            let eq = solve_equilibrium(&model)?;
            json!({
                "rho": model.rho(),
                "varpi": model.varpi(),
                "equilibrium": eq,
                "budget_check": budget_spectral_check(&model, &eq.b)?,
            })
        }
    };
    if let Some(paths) = args.paths {
        let (sol, alpha) = match args.rate {
            Some(r) => {
                let sol = solve_b(&model, r)?;
                let a = find_decay_rates(&induced_spec(&model, &sol))?;
                (sol, found(a.alpha, a.alpha_status))
            }
            None => {
                let eq = solve_equilibrium(&model)?;
                let a = found(eq.rates.alpha, eq.rates.alpha_status);
                (eq.b, a)
            }
        };
        result["simulated_tail"] = wealth_tail_fit(&model, &sol, paths, args.seed, window, alpha)?;
    }
    let seed = args.paths.map(|_| args.seed);
    let report = Report::new("wealth", Some(model.content_hash()), seed, tol, result);
    emit(&report, args.out.as_deref())
}

fn grid(from: f64, to: f64, points: usize) -> CliResult<Vec<f64>> {
    if points < 2 || !(from < to) || !from.is_finite() || !to.is_finite() {
        return Err(levytail::Error::InvalidArgument(format!(
            "need finite --from < --to and --points >= 2, got {from}, {to}, {points}"
        ))
        .into());
    }
    let step = (to - from) / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { to } else { from + step * i as f64 }).collect())
}

pub fn sweep(args: &SweepArgs) -> CliResult {
    let xs = grid(args.from, args.to, args.points)?;
    let (hash, header, rows): (String, Vec<String>, Vec<Vec<f64>>) = match args.var {
        SweepVar::S => {
            let spec = load_spec(&args.spec)?;
            let domain = spec.domain();
            let mut rows = Vec::new();
            // points outside the domain of A are left out
            for s in xs.into_iter().filter(|s| domain.contains(*s)) {
                rows.push(vec![s, abscissa_at(&spec, s)?]);
            }
            (spec.content_hash(), vec!["s".into(), "zeta".into()], rows)
        }
        SweepVar::R => {
            let model = load_wealth(&args.spec)?;
            if !(args.from > 0.0) {
                return Err(levytail::Error::InvalidArgument("--from must be positive for --var r".into()).into());
            }
            let pts = sweep_excess_supply(&model, args.from, args.to, args.points)?;
            let mut header = vec!["r".to_string(), "g".into(), "budget_check".into()];
            header.extend((0..model.n()).map(|n| format!("b_{n}")));
            let rows = pts
                .iter()
                .map(|p| {
                    let mut row = vec![p.r, p.g, p.budget_check];
                    row.extend(&p.b);
                    row
                })
                .collect();
            (model.content_hash(), header, rows)
        }
    };
    let seed = None;
    match args.out.as_deref() {
        Some(path) if is_csv(path) => {
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(path, &[format!("spec_hash={hash}")], &refs, &rows).map_err(write_err(path))
        }
        out => {
            let columns: serde_json::Map<String, Value> =
                header.iter().enumerate().map(|(j, h)| (h.clone(), json!(rows.iter().map(|r| r[j]).collect::<Vec<_>>()))).collect();
            let tol = json!({ "abscissa_gap": "1e-12 (1 + |A|)", "b_residual": "1e-12 (1 + |b|)" });
            let report = Report::new("sweep", Some(hash), seed, tol, Value::Object(columns));
            emit(&report, out)
        }
    }
}
