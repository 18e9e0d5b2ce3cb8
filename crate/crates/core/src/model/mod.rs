//! Balance-law models `U_t + F(U)_x = B(U) U_x` whose steady states satisfy
//! `M(U) E(U)_x = 0` for a vector of equilibrium variables `E`.
//!
//! The static geometry (nozzle cross-section or bottom topography) is not an
//! evolved component; it travels alongside each state as a plain `f64`.

mod nozzle;
mod profile;
mod two_layer;

pub use nozzle::{Nozzle, NozzleBranch};
pub use profile::Profile;
pub use two_layer::TwoLayer;

use crate::error::Result;

/// Conserved (or equilibrium) variables of an `N`-component system.
pub type State<const N: usize> = [f64; N];

/// Extreme characteristic speeds of a single state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeeds {
    pub min: f64,
    pub max: f64,
    /// Set when the exact eigenvalues were unavailable (complex roots) and
    /// an outer bound was used instead.
    pub bounded: bool,
}

pub trait SystemModel<const N: usize>: Send + Sync {
    fn name(&self) -> &'static str;

    fn component_names(&self) -> [&'static str; N];

    fn equilibrium_names(&self) -> [&'static str; N];

    /// Name of the static geometry field.
    fn geometry_name(&self) -> &'static str;

    /// Geometry function `sigma(x)` or `Z(x)`.
    fn geometry(&self, x: f64) -> f64;

    /// Components whose global flux carries the accumulated
    /// nonconservative term `R`. The others are plain conservation laws.
    fn source_components(&self) -> [bool; N];

    fn flux(&self, u: &State<N>, geom: f64) -> Result<State<N>>;

    fn equilibrium(&self, u: &State<N>, geom: f64) -> Result<State<N>>;

    /// Inverts [`SystemModel::equilibrium`] at fixed geometry, selecting the
    /// root on the same branch as `guess`.
    fn state_from_equilibrium(
        &self,
        eq: &State<N>,
        geom: f64,
        guess: &State<N>,
    ) -> Result<State<N>>;

    /// The matrix `M(U)` of `F(U)_x - B(U) U_x = M(U) E(U)_x`.
    fn balance_matrix(&self, u: &State<N>, geom: f64) -> Result<[[f64; N]; N]>;

    fn wave_speeds(&self, u: &State<N>, geom: f64) -> Result<WaveSpeeds>;
}

/// Hat state at an interface: the equilibrium inverse evaluated with the
/// interface-averaged geometry, so equal one-sided equilibrium data give
/// identical states.
pub fn hat_state_from_equilibrium<M, const N: usize>(
    model: &M,
    eq: &State<N>,
    averaged_geometry: f64,
    guess: &State<N>,
) -> Result<State<N>>
where
    M: SystemModel<N> + ?Sized,
{
    model.state_from_equilibrium(eq, averaged_geometry, guess)
}

/// One-sided local speeds `(a-, a+)` at an interface, with `a- <= 0 <= a+`.
pub fn local_speeds<M, const N: usize>(
    model: &M,
    minus: (&State<N>, f64),
    plus: (&State<N>, f64),
) -> Result<(f64, f64, bool)>
where
    M: SystemModel<N> + ?Sized,
{
    let l = model.wave_speeds(minus.0, minus.1)?;
    let r = model.wave_speeds(plus.0, plus.1)?;
    let a_minus = l.min.min(r.min).min(0.0);
    let a_plus = l.max.max(r.max).max(0.0);
    Ok((a_minus, a_plus, l.bounded || r.bounded))
}

/// `M * v` for a dense `N x N` matrix.
#[inline]
pub(crate) fn mat_vec<const N: usize>(m: &[[f64; N]; N], v: &State<N>) -> State<N> {
    std::array::from_fn(|k| (0..N).map(|l| m[k][l] * v[l]).sum())
}

/// Safeguarded Newton iteration for a scalar root bracketed by `[lo, hi]`
/// (`f(lo)` and `f(hi)` of opposite sign), started at `start`.
pub(crate) fn bracketed_newton(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
) -> Result<f64> {
    use crate::error::Error;
    const NEWTON_CAP: usize = 50;
    const BISECTION_CAP: usize = 200;

    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoRoot {
            detail: format!("bracket [{lo}, {hi}] does not enclose a root"),
            residual: flo.abs().min(fhi.abs()),
        });
    }
    let rising = fhi > 0.0;
    let mut x = if start > lo && start < hi {
        start
    } else {
        0.5 * (lo + hi)
    };
    let mut newton_steps = 0;
    let mut bisections = 0;
    loop {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        if fx.abs() <= tol {
            // one polishing step brings the residual to round-off level
            let polished = x - fx / dfx;
            if polished.is_finite() && polished >= lo && polished <= hi {
                let (fp, _) = f(polished);
                if fp.abs() < fx.abs() {
                    return Ok(polished);
                }
            }
            return Ok(x);
        }
        if hi - lo <= 2.0 * f64::EPSILON * x.abs() {
            return Err(Error::NotConverged {
                iterations: newton_steps + bisections,
                residual: fx.abs(),
            });
        }
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton > lo && newton < hi && newton_steps < NEWTON_CAP {
            newton_steps += 1;
            newton
        } else {
            bisections += 1;
            if bisections > BISECTION_CAP {
                return Err(Error::NotConverged {
                    iterations: newton_steps + bisections,
                    residual: fx.abs(),
                });
            }
            0.5 * (lo + hi)
        };
    }
}
