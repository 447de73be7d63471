//! Tail analysis of Markov-modulated Lévy processes stopped at a
//! state-dependent killing time, with a Monte Carlo simulator and an
//! incomplete-markets wealth model built on top.

pub mod error;
pub mod numerics;
pub mod process;
pub mod simulate;
pub mod spectral;
pub mod tail;
pub mod wealth;

pub use error::{Error, Result};
pub use process::{
    assemble_a, assemble_a_real, derivative_a, derivative_a_real, validate, Atom, DomainInterval, GeneratorMatrix,
    JumpMgf, LevyExponent, ModelSpec, ValidationReport,
};
pub use spectral::{is_irreducible, spectral_abscissa_complex, spectral_abscissa_metzler, SpectralResult};
pub use tail::{
    conditional_mgf_matrix, find_decay_rates, lattice_info, mgf_stopped, nakagawa_bounds, pole_residue,
    two_state_closed_form, DecayRates, LatticeInfo, NakagawaBounds, PoleData, RootStatus, TwoStateParams,
};
pub use simulate::{
    absorption_probability, empirical_mgf, fit_tail, simulate_stopped, SampleSet, SimConfig, TailFit, TailSide,
};
pub use wealth::{
    budget_spectral_check, excess_supply, solve_b, solve_equilibrium, stationary_distribution, wealth_tail_rates,
    BSolution, Equilibrium, WealthModel,
};
