//! Shared by the integration tests: random constant-equilibrium states and
//! the scaled size of the right-hand side they produce.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wbweno::experiments::build_steady_state;
use wbweno::{
    BoundarySpec, Grid, MinmodParams, Nozzle, Order, Profile, Scheme, State, SystemModel, TwoLayer,
};

/// Every node solved for the given equilibrium constants, marching from the
/// left, with roots polished so that the nodal values reproduce them.
pub fn steady_state<M: SystemModel<N>, const N: usize>(
    scheme: &Scheme<M, N>,
    eq: State<N>,
    seed: State<N>,
) -> Option<Vec<State<N>>> {
    build_steady_state(scheme, eq, 0, seed).ok()
}

/// Largest `|dU/dt|` per component relative to the size of the terms that
/// enter the flux difference, `(|F| + a_max |U|) / dx`.
pub fn max_rhs_over_scale<M: SystemModel<N>, const N: usize>(
    scheme: &mut Scheme<M, N>,
    mut u: Vec<State<N>>,
) -> [f64; N] {
    let mut out = vec![[0.0; N]; u.len()];
    let speed = scheme.rhs(&mut u, &mut out).unwrap();
    let dx = scheme.grid().dx();
    let geometry = scheme.geometry().to_vec();
    let mut ratio = [0.0; N];
    for c in 0..N {
        let scale = u
            .iter()
            .zip(&geometry)
            .map(|(s, &g)| scheme.model().flux(s, g).unwrap()[c].abs() + speed * s[c].abs())
            .fold(1.0, f64::max)
            / dx;
        let worst = out.iter().map(|s| s[c].abs()).fold(0.0, f64::max);
        ratio[c] = worst / scale;
    }
    ratio
}

pub fn nozzle_profiles() -> Vec<Profile> {
    vec![
        Profile::Tanh {
            base: 0.976,
            amplitude: -0.748,
            slope: 0.8,
            shift: -4.0,
        },
        Profile::piecewise(vec![3.0, 7.0], vec![2.0, 1.0, 2.0]).unwrap(),
        Profile::SinSquared {
            amplitude: 0.5,
            frequency: 0.1,
            offset: 1.0,
        },
    ]
}

/// Largest scaled RHS over admissible random samples and their count.
pub fn nozzle_wb_chain(trials: usize) -> (f64, usize) {
    let mut rng = StdRng::seed_from_u64(0x9E37_79B9_7F4A_7C15);
    let mut worst = 0.0f64;
    let mut tested = 0;
    for trial in 0..trials {
        let profile = nozzle_profiles()[trial % 3].clone();
        let model = Nozzle::new(1.0, rng.gen_range(1.1..1.6), profile).unwrap();
        let order = if trial % 2 == 0 {
            Order::Second
        } else {
            Order::Fifth
        };
        let grid = Grid::new(0.0, 10.0, 40, order.ghost_width()).unwrap();
        let mut scheme = Scheme::new(
            model,
            grid,
            BoundarySpec::free(),
            order,
            MinmodParams::default(),
        )
        .unwrap();
        // reference state at the narrowest section, on either branch
        let sigma_min = scheme
            .geometry()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let rho = rng.gen_range(0.3..3.0);
        let c = scheme.model().sound_speed(rho);
        let mach = if trial % 4 < 2 {
            rng.gen_range(0.05..0.8)
        } else {
            rng.gen_range(1.3..3.0)
        };
        let sign = if rng.gen::<f64>() < 0.5 { -1.0 } else { 1.0 };
        let seed = [sigma_min * rho, sign * sigma_min * rho * mach * c];
        let eq = scheme.model().equilibrium(&seed, sigma_min).unwrap();
        let Some(u) = steady_state(&scheme, eq, seed) else {
            continue;
        };
        let ratio = max_rhs_over_scale(&mut scheme, u);
        worst = ratio.iter().copied().fold(worst, f64::max);
        tested += 1;
    }
    (worst, tested)
}

/// Largest scaled RHS over admissible random samples and their count.
pub fn two_layer_wb_chain(trials: usize) -> (f64, usize) {
    let mut rng = StdRng::seed_from_u64(0xD1B5_4A32_D192_ED03);
    let mut worst = 0.0f64;
    let bottoms = [
        Profile::piecewise(vec![0.0], vec![-2.0, -1.0]).unwrap(),
        Profile::SinSquared {
            amplitude: 0.3,
            frequency: 1.0,
            offset: -3.0,
        },
        Profile::piecewise(vec![-0.5, 0.5], vec![-2.0, -1.8, -2.0]).unwrap(),
    ];
    let mut tested = 0;
    for trial in 0..trials {
        let g = if trial % 3 == 0 { 1.0 } else { 10.0 };
        // the inverse degrades like 1/(1 - r), which puts near-rest states
        // with r above about 0.987 over the 1e-13 bound
        let model =
            TwoLayer::new(g, rng.gen_range(0.5..0.985), bottoms[trial % 3].clone()).unwrap();
        let order = if trial % 2 == 0 {
            Order::Second
        } else {
            Order::Fifth
        };
        let grid = Grid::new(-1.0, 1.0, 50, order.ghost_width()).unwrap();
        let mut scheme = Scheme::new(
            model,
            grid,
            BoundarySpec::free(),
            order,
            MinmodParams::default(),
        )
        .unwrap();
        let z0 = scheme.geometry()[0];
        let (h1, h2) = (rng.gen_range(0.8..2.0), rng.gen_range(1.5..3.0));
        let speed = (g * (h1 + h2)).sqrt();
        let (u1, u2) = if trial % 4 < 2 {
            (
                rng.gen_range(-0.05..0.05) * speed,
                rng.gen_range(-0.05..0.05) * speed,
            )
        } else {
            // fast, nearly co-moving layers
            let u = rng.gen_range(1.5..2.5) * speed;
            (u, u * rng.gen_range(0.95..1.0))
        };
        let seed = [h1, h1 * u1, h2, h2 * u2];
        let eq = scheme.model().equilibrium(&seed, z0).unwrap();
        let Some(u) = steady_state(&scheme, eq, seed) else {
            continue;
        };
        let ratio = max_rhs_over_scale(&mut scheme, u);
        worst = ratio.iter().copied().fold(worst, f64::max);
        tested += 1;
    }
    (worst, tested)
}
