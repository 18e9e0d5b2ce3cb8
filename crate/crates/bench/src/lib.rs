//! Fixtures shared by the benchmarks.

use wbweno::experiments::{example4_problem, example4_steady, ExampleOptions, EXAMPLE4_GRAVITY};
use wbweno::{Order, Result, Scheme, State, TwoLayer};

/// The Example 4 scheme on `n_cells` cells with its steady state, ghosts
/// included.
pub fn two_layer_fixture(
    order: Order,
    n_cells: usize,
) -> Result<(Scheme<TwoLayer, 4>, Vec<State<4>>)> {
    let problem = example4_problem(EXAMPLE4_GRAVITY)?;
    let dx = (problem.x_max - problem.x_min) / n_cells as f64;
    let scheme = problem.scheme(dx, order, &ExampleOptions::default())?;
    let u = example4_steady(&scheme)?;
    Ok((scheme, u))
}
