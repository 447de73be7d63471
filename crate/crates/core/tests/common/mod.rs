//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use levytail::{Atom, GeneratorMatrix, JumpMgf, LevyExponent, ModelSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which exponent families a random spec may draw from.
#[derive(Clone, Copy)]
pub struct Families {
    pub pareto: bool,
    pub jumps: bool,
}

pub const ALL: Families = Families { pareto: true, jumps: true };
/// Families whose simulation is cheap and whose tails are light enough for
/// moment checks.
pub const SIMPLE: Families = Families { pareto: false, jumps: true };

pub fn random_exponent<R: Rng>(rng: &mut R, fam: Families) -> LevyExponent {
    let kinds = if fam.pareto { 5 } else { 4 };
    match rng.random_range(0..kinds) {
        0 => LevyExponent::BrownianDrift { mu: rng.random_range(-1.0..1.0), sigma2: rng.random_range(0.1..2.0) },
        1 => LevyExponent::LinearDrift { mu: rng.random_range(-1.0..1.0) },
        2 => LevyExponent::PoissonJump { gamma: rng.random_range(0.2..2.0), h: rng.random_range(0.2..1.5) },
        3 => {
            let p = rng.random_range(0.1..0.9);
            LevyExponent::CompoundPoissonDiscrete {
                gamma: rng.random_range(0.2..2.0),
                atoms: vec![Atom::new(rng.random_range(0.1..1.5), p), Atom::new(-rng.random_range(0.1..1.5), 1.0 - p)],
            }
        }
        _ => LevyExponent::TruncatedParetoExpJump { c: rng.random_range(0.1..1.0) },
    }
}

/// Irreducible generator: a directed cycle plus random extra edges.
pub fn random_generator<R: Rng>(rng: &mut R, n: usize) -> GeneratorMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && (j == (i + 1) % n || rng.random_bool(0.5)) {
                m[(i, j)] = rng.random_range(0.1..2.0);
            }
        }
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -s;
    }
    GeneratorMatrix::new(m).expect("valid generator")
}

pub fn random_varpi<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Irreducible spec with 1..=`max_n` states and positive killing rates.
pub fn random_spec<R: Rng>(rng: &mut R, max_n: usize, fam: Families) -> ModelSpec {
    let n = rng.random_range(1..=max_n);
    let generator = random_generator(rng, n);
    let exponents = (0..n).map(|_| random_exponent(rng, fam)).collect();
    let phi = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let varpi = random_varpi(rng, n);
    let mut spec = ModelSpec::new(varpi, generator.clone(), exponents, phi).unwrap();
    if fam.jumps {
        for i in 0..n {
            for j in 0..n {
                if i != j && generator.rate(i, j) > 0.0 && rng.random_bool(0.3) {
                    let mgf = if rng.random_bool(0.5) {
                        JumpMgf::Gaussian { mean: rng.random_range(-0.5..0.5), variance: rng.random_range(0.0..0.3) }
                    } else {
                        JumpMgf::DegeneratePoint { a: rng.random_range(-0.5..0.5) }
                    };
                    spec = spec.with_jump(i, j, mgf).unwrap();
                }
            }
        }
    }
    spec
}

/// Points spread over the interior of the domain of A, within [−3, 3].
pub fn interior_points<R: Rng>(rng: &mut R, spec: &ModelSpec, k: usize) -> Vec<f64> {
    let d = spec.domain();
    let lo = d.lo.max(-3.0);
    let hi = (d.hi - 1e-3).min(3.0);
    (0..k).map(|_| rng.random_range(lo..hi)).collect()
}
