//! Recipes for the numerical examples: steady states, perturbations,
//! reference runs, error norms and Runge rates.

mod examples;
mod norms;
mod setup;

pub use examples::*;
pub use norms::{
    error_norms, l1_distance, restrict_by_two, runge_row, runge_table, sample_linear,
    ComponentNorms, Restriction, RungeRow,
};
pub use setup::{
    build_steady_state, check_alignment, nozzle_steady_state, perturb_nozzle_density,
    perturb_upper_depth, Perturbation,
};
