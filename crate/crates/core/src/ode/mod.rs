pub mod fit;
pub mod integrator;
pub mod systems;

pub use fit::{decaying_solution, decaying_solution_with, fit_decay_rate, DecayOptions, RateFit};
pub use integrator::{fmt17, integrate_rhs, IntegrateOptions, OdeRhs, Tolerances, Trajectory};
pub use systems::{
    build_dirac_mode_system, build_scalar_mode_system, integrate, integrate_sampled,
    LinearOdeSystem,
};
