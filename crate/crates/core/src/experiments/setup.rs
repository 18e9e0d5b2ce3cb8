use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::model::{Nozzle, NozzleBranch, Profile, State, SystemModel};
use crate::scheme::Scheme;

/// Solves every storage node (ghosts included) for the constant equilibrium
/// values `eq`, marching outward from storage node `anchor` with each
/// neighbour's solution as the next guess.
pub fn build_steady_state<M, const N: usize>(
    scheme: &Scheme<M, N>,
    eq: State<N>,
    anchor: usize,
    guess: State<N>,
) -> Result<Vec<State<N>>>
where
    M: SystemModel<N>,
{
    let geom = scheme.geometry();
    if anchor >= geom.len() {
        return Err(Error::Usage(format!("anchor {anchor} outside the grid")));
    }
    let solve = |i: usize, guess: &State<N>| {
        scheme
            .model()
            .state_from_equilibrium(&eq, geom[i], guess)
            .map(|s| nearest_representable_root(scheme.model(), &eq, geom[i], s, POLISH_RADIUS))
            .map_err(|e| Error::AtNode {
                index: scheme.grid().node_index(i),
                source: Box::new(e),
            })
    };
    let mut out = vec![[0.0; N]; geom.len()];
    out[anchor] = solve(anchor, &guess)?;
    for i in anchor + 1..geom.len() {
        out[i] = solve(i, &out[i - 1])?;
    }
    for i in (0..anchor).rev() {
        out[i] = solve(i, &out[i + 1])?;
    }
    Ok(out)
}

/// Ulp search radius of [`nearest_representable_root`].
pub const POLISH_RADIUS: i32 = 8;

/// Among the floats within `radius` ulps of `state` in each non-source
/// (mass) component, returns the one whose computed equilibrium values are
/// closest to `eq`, in ulps of `eq`. Nodal values that reproduce `eq`
/// bitwise make the data an exact floating-point steady state.
pub fn nearest_representable_root<M, const N: usize>(
    model: &M,
    eq: &State<N>,
    geom: f64,
    state: State<N>,
    radius: i32,
) -> State<N>
where
    M: SystemModel<N>,
{
    let free: Vec<usize> = (0..N).filter(|&k| !model.source_components()[k]).collect();
    let mismatch = |s: &State<N>| -> Option<f64> {
        let e = model.equilibrium(s, geom).ok()?;
        Some(
            e.iter()
                .zip(eq)
                .map(|(a, b)| (a - b).abs() / ulp(*b))
                .fold(0.0, f64::max),
        )
    };
    let Some(mut best_err) = mismatch(&state) else {
        return state;
    };
    let mut best = state;
    let width = (2 * radius + 1) as usize;
    let total = width.pow(free.len() as u32);
    for code in 0..total {
        if best_err == 0.0 {
            break;
        }
        let mut s = state;
        let mut c = code;
        for &k in &free {
            s[k] = step_ulps(state[k], (c % width) as i32 - radius);
            c /= width;
        }
        if let Some(err) = mismatch(&s) {
            if err < best_err {
                best_err = err;
                best = s;
            }
        }
    }
    best
}

fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        f64::MIN_POSITIVE
    } else {
        a.next_up() - a
    }
}

fn step_ulps(x: f64, n: i32) -> f64 {
    let mut y = x;
    for _ in 0..n.unsigned_abs() {
        y = if n > 0 { y.next_up() } else { y.next_down() };
    }
    y
}

/// Nozzle steady state with `q` and `E` constant, every node on `branch`.
pub fn nozzle_steady_state(
    scheme: &Scheme<Nozzle, 2>,
    q: f64,
    energy: f64,
    branch: NozzleBranch,
) -> Result<Vec<State<2>>> {
    scheme
        .geometry()
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            scheme
                .model()
                .solve_mass(q, energy, sigma, branch, None)
                .map(|m| {
                    nearest_representable_root(
                        scheme.model(),
                        &[q, energy],
                        sigma,
                        [m, q],
                        POLISH_RADIUS,
                    )
                })
                .map_err(|e| Error::AtNode {
                    index: scheme.grid().node_index(i),
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Bump added to one primitive variable on the nodes whose centres lie in
/// `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Perturbation {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.lo <= self.hi) || self.lo < grid.x_min() || self.hi > grid.x_max() {
            return Err(Error::Parameter(format!(
                "perturbation support [{}, {}] outside [{}, {}]",
                self.lo,
                self.hi,
                grid.x_min(),
                grid.x_max()
            )));
        }
        Ok(())
    }

    pub fn covers(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Nozzle recipe: `rho += amplitude`, then `q = sigma * rho * u_eq`.
pub fn perturb_nozzle_density(
    scheme: &Scheme<Nozzle, 2>,
    eq_state: &[State<2>],
    p: &Perturbation,
) -> Result<Vec<State<2>>> {
    p.validate(scheme.grid())?;
    let grid = scheme.grid();
    Ok(eq_state
        .iter()
        .zip(scheme.geometry())
        .enumerate()
        .map(|(i, (s, &sigma))| {
            if !grid.interior().contains(&i) || !p.covers(grid.storage_center(i)) {
                return *s;
            }
            let velocity = s[1] / s[0];
            let m = sigma * (s[0] / sigma + p.amplitude);
            [m, m * velocity]
        })
        .collect())
}

/// Two-layer recipe: `h1 += amplitude`, discharges and `h2` unchanged.
pub fn perturb_upper_depth(
    grid: &Grid,
    eq_state: &[State<4>],
    p: &Perturbation,
) -> Result<Vec<State<4>>> {
    p.validate(grid)?;
    Ok(eq_state
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = *s;
            if grid.interior().contains(&i) && p.covers(grid.storage_center(i)) {
                s[0] += p.amplitude;
            }
            s
        })
        .collect())
}

/// Every jump of a piecewise profile must sit on a cell interface.
pub fn check_alignment(profile: &Profile, grid: &Grid) -> Result<()> {
    if let Profile::Piecewise { breaks, .. } = profile {
        for &b in breaks {
            if b <= grid.x_min() || b >= grid.x_max() {
                continue;
            }
            let s = (b - grid.x_min()) / grid.dx();
            if (s - s.round()).abs() > 1e-9 * s.abs().max(1.0) {
                return Err(Error::Grid(format!(
                    "geometry jump at x = {b} does not fall on an interface for dx = {}",
                    grid.dx()
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::MinmodParams;
    use crate::mesh::BoundarySpec;
    use crate::model::TwoLayer;
    use crate::scheme::Order;

    fn nozzle_scheme(n: usize) -> Scheme<Nozzle, 2> {
        let sigma = Profile::Tanh {
            base: 0.976,
            amplitude: -0.748,
            slope: 0.8,
            shift: -4.0,
        };
        let model = Nozzle::new(1.0, 1.4, sigma).unwrap();
        let grid = Grid::new(0.0, 10.0, n, 2).unwrap();
        Scheme::new(
            model,
            grid,
            BoundarySpec::free(),
            Order::Second,
            MinmodParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_amplitude_leaves_state_unchanged() {
        let scheme = nozzle_scheme(40);
        let u =
            nozzle_steady_state(&scheme, 8.0, 58.3367745090349, NozzleBranch::Subsonic).unwrap();
        let p = Perturbation {
            amplitude: 0.0,
            lo: 2.9,
            hi: 3.1,
        };
        assert_eq!(perturb_nozzle_density(&scheme, &u, &p).unwrap(), u);
    }

    #[test]
    fn density_bump_keeps_equilibrium_velocity() {
        let scheme = nozzle_scheme(200);
        let u =
            nozzle_steady_state(&scheme, 8.0, 58.3367745090349, NozzleBranch::Subsonic).unwrap();
        let p = Perturbation {
            amplitude: 1e-2,
            lo: 2.9,
            hi: 3.1,
        };
        let v = perturb_nozzle_density(&scheme, &u, &p).unwrap();
        let mut touched = 0;
        for (i, ((a, b), &sigma)) in u.iter().zip(&v).zip(scheme.geometry()).enumerate() {
            let x = scheme.grid().storage_center(i);
            if (2.9..=3.1).contains(&x) {
                touched += 1;
                assert!((b[0] / sigma - a[0] / sigma - 1e-2).abs() < 1e-14);
                assert!((b[1] / b[0] - a[1] / a[0]).abs() < 1e-13);
            } else {
                assert_eq!(a, b);
            }
        }
        assert_eq!(touched, 4);
    }

    #[test]
    fn marching_reports_the_failing_node() {
        let model = TwoLayer::new(
            1.0,
            0.98,
            Profile::piecewise(vec![0.0], vec![-2.0, 100.0]).unwrap(),
        )
        .unwrap();
        let grid = Grid::new(-1.0, 1.0, 20, 2).unwrap();
        let scheme = Scheme::new(
            model,
            grid,
            BoundarySpec::free(),
            Order::Second,
            MinmodParams::default(),
        )
        .unwrap();
        let left = [1.2, 12.0, 0.97, 10.0];
        let eq = scheme.model().equilibrium(&left, -2.0).unwrap();
        let err = build_steady_state(&scheme, eq, 2, left).unwrap_err();
        assert!(matches!(err, Error::AtNode { index: 11, .. }), "{err}");
    }

    #[test]
    fn polished_roots_reproduce_equilibrium_bitwise() {
        let scheme = nozzle_scheme(200);
        let (q, e) = (8.0, 58.3367745090349);
        let u = nozzle_steady_state(&scheme, q, e, NozzleBranch::Subsonic).unwrap();
        let eq = scheme.equilibrium_field(&u).unwrap();
        let exact = eq.iter().filter(|v| **v == [q, e]).count();
        assert!(exact * 10 >= 9 * eq.len(), "{exact} of {}", eq.len());
        // polishing never moves the root by more than the search radius
        for (s, &sigma) in u.iter().zip(scheme.geometry()) {
            let raw = scheme
                .model()
                .solve_mass(q, e, sigma, NozzleBranch::Subsonic, None)
                .unwrap();
            assert!((s[0] - raw).abs() <= 9.0 * ulp(raw));
        }
    }

    #[test]
    fn misaligned_jump_is_rejected() {
        let z = Profile::piecewise(vec![0.01], vec![-2.0, -1.0]).unwrap();
        let grid = Grid::new(-1.0, 1.0, 100, 2).unwrap();
        assert!(check_alignment(&z, &grid).is_err());
        let z = Profile::piecewise(vec![0.0], vec![-2.0, -1.0]).unwrap();
        assert!(check_alignment(&z, &grid).is_ok());
    }
}
