//! Subdifferential probes and estimates, nonsmooth calculus checks,
//! smooth bumps and variational searches on graphs.

mod bump;
mod calculus;
mod convexity;
mod estimate;
mod probe;
mod variational;

pub use estimate::{default_fan, differentiability_probe, estimate_subdifferential, CovectorGrid, Mode, Polytope, SubdifferentialEstimate};
pub use probe::{
    default_directions, dini_inf_quotient, generalized_directional, test_subgradient, test_supergradient, unit_directions, Probe, ProbeSchedule, Status,
    SubgradientVerdict,
};
pub use bump::{bump, smooth_step, theta, theta_derivative, BumpField, PROFILE_LIPSCHITZ};
pub use variational::{dgz_perturb, ekeland_search, rolle_search, verify_ekeland, DgzOutcome, EkelandCheck, EkelandOutcome, RolleCase, RolleOutcome, RolleParams};
pub use convexity::{
    convexity_check, density_probe, deville_lipschitz_check, godefroy_check, local_schedule, ConvexityReport, ConvexityWitness, DensityReport, DevilleOutcome,
    DevilleReport, GodefroyReport, GodefroyStatus, CONVEXITY_TOL, HYPOTHESIS_TOL, LIPSCHITZ_TOL,
};
pub use calculus::{calculus_suite, fuzzy_sum_search, CalculusReport, ChainSpec, FuzzyOutcome, RuleCheck};
