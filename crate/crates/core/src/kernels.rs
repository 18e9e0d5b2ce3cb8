//! Interpolation, finite-difference and quadrature kernels.
//!
//! Every kernel is a pure scalar function; vector fields are handled
//! componentwise by the callers. The kernels are written in difference form
//! around a center value so that locally constant data reproduce the
//! constant (or zero) bit for bit, which the well-balanced property relies on.

use crate::error::{Error, Result};

/// Five consecutive nodal values `f_{j-2} .. f_{j+2}`.
pub type Stencil5 = [f64; 5];

/// Generalized minmod limiter parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinmodParams {
    theta: f64,
}

impl MinmodParams {
    /// Production default for the second-order scheme.
    pub const DEFAULT_THETA: f64 = 1.3;

    pub fn new(theta: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&theta) {
            return Err(Error::Parameter(format!(
                "minmod theta must lie in [1, 2], got {theta}"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl Default for MinmodParams {
    fn default() -> Self {
        Self {
            theta: Self::DEFAULT_THETA,
        }
    }
}

pub fn minmod(values: &[f64]) -> Result<f64> {
    let (first, rest) = values
        .split_first()
        .ok_or_else(|| Error::Usage("minmod of an empty list".into()))?;
    if values.iter().all(|&v| v > 0.0) {
        Ok(rest.iter().copied().fold(*first, f64::min))
    } else if values.iter().all(|&v| v < 0.0) {
        Ok(rest.iter().copied().fold(*first, f64::max))
    } else {
        Ok(0.0)
    }
}

#[inline]
pub fn minmod3(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// Limited piecewise-linear reconstruction in node `j` from `(E_{j-1}, E_j, E_{j+1})`.
///
/// Returns `(slope, E at x_{j+1/2}, E at x_{j-1/2})`.
#[inline]
pub fn plr_interface_values(nodes: [f64; 3], theta: f64, dx: f64) -> (f64, f64, f64) {
    let [em, e0, ep] = nodes;
    let slope = minmod3(
        theta * (ep - e0) / dx,
        (ep - em) / (2.0 * dx),
        theta * (e0 - em) / dx,
    );
    let half = 0.5 * dx * slope;
    (slope, e0 + half, e0 - half)
}

const IDEAL_WEIGHTS: [f64; 3] = [1.0 / 16.0, 10.0 / 16.0, 5.0 / 16.0];
const WENO_EPS: f64 = 1e-12;

/// Fifth-order affine-invariant WENO-Z interpolation of the value at the
/// right edge `x_{j+1/2}` of the stencil's center node.
#[inline]
pub fn aiwenoz_left(s: &Stencil5) -> f64 {
    let f = s[2];
    let dm2 = s[0] - f;
    let dm1 = s[1] - f;
    let dp1 = s[3] - f;
    let dp2 = s[4] - f;

    // quadratic candidates, shifted by the center value
    let p = [
        (3.0 * dm2 - 10.0 * dm1) / 8.0,
        (3.0 * dp1 - dm1) / 8.0,
        (6.0 * dp1 - dp2) / 8.0,
    ];

    let sq = |v: f64| v * v;
    let beta = [
        13.0 / 12.0 * sq(dm2 - 2.0 * dm1) + 0.25 * sq(dm2 - 4.0 * dm1),
        13.0 / 12.0 * sq(dm1 + dp1) + 0.25 * sq(dm1 - dp1),
        13.0 / 12.0 * sq(dp2 - 2.0 * dp1) + 0.25 * sq(dp2 - 4.0 * dp1),
    ];
    let tau = (beta[0] - beta[2]).abs();
    // common scale keeps the weights invariant under f -> a f + b
    let scale = (beta[0] + beta[1] + beta[2]) / 3.0 + f64::MIN_POSITIVE;
    let eps = WENO_EPS * scale;

    let mut alpha = [0.0; 3];
    for k in 0..3 {
        alpha[k] = IDEAL_WEIGHTS[k] * (1.0 + sq(tau / (beta[k] + eps)));
    }
    let total = alpha[0] + alpha[1] + alpha[2];
    f + (alpha[0] * p[0] + alpha[1] * p[1] + alpha[2] * p[2]) / total
}

/// Mirror of [`aiwenoz_left`]: the value at the left edge `x_{j-1/2}`.
#[inline]
pub fn aiwenoz_right(s: &Stencil5) -> f64 {
    aiwenoz_left(&[s[4], s[3], s[2], s[1], s[0]])
}

/// Fourth-order second derivative at the center of five consecutive
/// interface values `K_{j-3/2} .. K_{j+5/2}`.
#[inline]
pub fn fd_kxx(k: &[f64; 5], dx: f64) -> f64 {
    second_difference_sum(k) / (12.0 * dx * dx)
}

/// Fourth derivative at the center of five consecutive interface values.
#[inline]
pub fn fd_kxxxx(k: &[f64; 5], dx: f64) -> f64 {
    fourth_difference_sum(k) / (dx * dx * dx * dx)
}

#[inline]
fn second_difference_sum(k: &[f64; 5]) -> f64 {
    let c = k[2];
    -(k[0] - c) + 16.0 * (k[1] - c) + 16.0 * (k[3] - c) - (k[4] - c)
}

#[inline]
fn fourth_difference_sum(k: &[f64; 5]) -> f64 {
    let c = k[2];
    (k[0] - c) - 4.0 * (k[1] - c) - 4.0 * (k[3] - c) + (k[4] - c)
}

/// Fifth-order A-WENO flux from the five finite-volume fluxes centered at
/// the target interface:
/// `K - dx^2/24 K_xx + 7 dx^4/5760 K_xxxx`.
///
/// The powers of `dx` cancel against the difference stencils, so the
/// correction is evaluated without them.
#[inline]
pub fn aweno_flux(fv: &[f64; 5]) -> f64 {
    fv[2] - second_difference_sum(fv) / 288.0 + 7.0 * fourth_difference_sum(fv) / 5760.0
}

/// Quadrature points of the cell integral, in units of `dx` from `x_j`.
const QUAD_POINTS: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];
/// Boole's rule weights on [x_{j-1/2}, x_{j+1/2}], divided by `dx`.
const BOOLE_WEIGHTS: [f64; 5] = [
    7.0 / 90.0,
    32.0 / 90.0,
    12.0 / 90.0,
    32.0 / 90.0,
    7.0 / 90.0,
];
const NODES: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Value and derivative weights at `s` of the quartic through `points`.
const fn lagrange5(points: [f64; 5], s: f64) -> ([f64; 5], [f64; 5]) {
    let mut value = [0.0; 5];
    let mut slope = [0.0; 5];
    let mut i = 0;
    while i < 5 {
        let mut denom = 1.0;
        let mut prod = 1.0;
        let mut m = 0;
        while m < 5 {
            if m != i {
                denom *= points[i] - points[m];
                prod *= s - points[m];
            }
            m += 1;
        }
        value[i] = prod / denom;
        let mut dsum = 0.0;
        let mut l = 0;
        while l < 5 {
            if l != i {
                let mut term = 1.0;
                let mut m = 0;
                while m < 5 {
                    if m != i && m != l {
                        term *= s - points[m];
                    }
                    m += 1;
                }
                dsum += term;
            }
            l += 1;
        }
        slope[i] = dsum / denom;
        i += 1;
    }
    (value, slope)
}

const fn quad_slopes() -> [[f64; 5]; 5] {
    let mut out = [[0.0; 5]; 5];
    let mut q = 0;
    while q < 5 {
        out[q] = lagrange5(QUAD_POINTS, QUAD_POINTS[q]).1;
        q += 1;
    }
    out
}

/// Derivative weights (times dx) of the quartic through the quadrature
/// points, evaluated at each of them.
static QUAD_SLOPE: [[f64; 5]; 5] = quad_slopes();
static QUARTER_LEFT: [f64; 5] = lagrange5(NODES, -0.25).0;
static QUARTER_RIGHT: [f64; 5] = lagrange5(NODES, 0.25).0;

/// Values at `x_j - dx/4` and `x_j + dx/4` of the quartic through the
/// nodes `j-2 .. j+2`. Written relative to the centre value, so constant
/// data is reproduced bitwise.
#[inline]
pub fn quarter_values(f: &Stencil5) -> (f64, f64) {
    let c = f[2];
    let mut left = 0.0;
    let mut right = 0.0;
    for i in 0..5 {
        left += QUARTER_LEFT[i] * (f[i] - c);
        right += QUARTER_RIGHT[i] * (f[i] - c);
    }
    (c + left, c + right)
}

/// Fifth-order approximation of `\int_{C_j} a(x) b_x(x) dx` from values
/// of `a` and `b` at `x_j + s dx`, `s = -1/2, -1/4, 0, 1/4, 1/2`.
///
/// Boole's rule with `b_x` taken from the quartic through the five `b`
/// values, so for constant `a` the result is exactly `a (b[4] - b[0])` up to
/// rounding: the cell integral telescopes with the end values. Only
/// differences of `b` enter, so constant `b` gives exactly zero.
pub fn cell_integral_fifth(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    let db: [f64; 5] = std::array::from_fn(|i| b[i] - b[2]);
    let mut total = 0.0;
    for q in 0..5 {
        let slope: f64 = (0..5).map(|i| QUAD_SLOPE[q][i] * db[i]).sum();
        if slope != 0.0 {
            total += BOOLE_WEIGHTS[q] * a[q] * slope;
        }
    }
    total
}
