//! Interface-level pieces of the flux-globalization scheme: path and cell
//! brackets, the recursive global flux, and the central-upwind flux.

use crate::kernels::cell_integral_fifth;
use crate::model::{mat_vec, State};

/// Everything the numerical flux needs at one interface `x_{j+1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceData<const N: usize> {
    pub u_minus: State<N>,
    pub u_plus: State<N>,
    pub e_minus: State<N>,
    pub e_plus: State<N>,
    pub geom_minus: f64,
    pub geom_plus: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub f_minus: State<N>,
    pub f_plus: State<N>,
    pub k_minus: State<N>,
    pub k_plus: State<N>,
    pub hat_minus: State<N>,
    pub hat_plus: State<N>,
    pub m_minus: [[f64; N]; N],
    pub m_plus: [[f64; N]; N],
}

impl<const N: usize> InterfaceData<N> {
    pub fn zeroed() -> Self {
        Self {
            u_minus: [0.0; N],
            u_plus: [0.0; N],
            e_minus: [0.0; N],
            e_plus: [0.0; N],
            geom_minus: 0.0,
            geom_plus: 0.0,
            a_minus: 0.0,
            a_plus: 0.0,
            f_minus: [0.0; N],
            f_plus: [0.0; N],
            k_minus: [0.0; N],
            k_plus: [0.0; N],
            hat_minus: [0.0; N],
            hat_plus: [0.0; N],
            m_minus: [[0.0; N]; N],
            m_plus: [[0.0; N]; N],
        }
    }
}

/// Relative threshold below which `a+ - a-` counts as zero.
pub const DEGENERATE_SPEED: f64 = 1e-12;

/// Central-upwind flux with the hat-state numerical diffusion.
#[inline]
pub fn pccu_flux<const N: usize>(d: &InterfaceData<N>) -> State<N> {
    let (am, ap) = (d.a_minus, d.a_plus);
    let width = ap - am;
    if width < DEGENERATE_SPEED * 1f64.max(ap.abs()).max(am.abs()) {
        return std::array::from_fn(|k| 0.5 * (d.k_minus[k] + d.k_plus[k]));
    }
    let diff = ap * am / width;
    let skew = 0.5 * (ap + am) / width;
    // written around the mean so that equal K values pass through exactly
    std::array::from_fn(|k| {
        0.5 * (d.k_minus[k] + d.k_plus[k])
            + skew * (d.k_minus[k] - d.k_plus[k])
            + diff * (d.hat_plus[k] - d.hat_minus[k])
    })
}

/// `(M+ + M-)/2 (E+ - E-)`: the integral of `M dE` along the straight
/// segment in equilibrium space, restricted to the source components.
#[inline]
pub fn path_integral<const N: usize>(d: &InterfaceData<N>, source: &[bool; N]) -> State<N> {
    let de: State<N> = std::array::from_fn(|l| d.e_plus[l] - d.e_minus[l]);
    let mp = mat_vec(&d.m_plus, &de);
    let mm = mat_vec(&d.m_minus, &de);
    std::array::from_fn(|k| {
        if source[k] {
            0.5 * (mp[k] + mm[k])
        } else {
            0.0
        }
    })
}

/// `B_Psi = F+ - F- - (M+ + M-)/2 (E+ - E-)`, restricted to the source
/// components.
#[inline]
pub fn path_bracket<const N: usize>(d: &InterfaceData<N>, source: &[bool; N]) -> State<N> {
    let i = path_integral(d, source);
    std::array::from_fn(|k| {
        if source[k] {
            d.f_plus[k] - d.f_minus[k] - i[k]
        } else {
            0.0
        }
    })
}

/// Trapezoidal integral of `M E_x` over the cell between the right state
/// of `left` (interface `j-1/2`) and the left state of `right` (`j+1/2`).
#[inline]
pub fn cell_integral_second<const N: usize>(
    left: &InterfaceData<N>,
    right: &InterfaceData<N>,
    source: &[bool; N],
) -> State<N> {
    let de: State<N> = std::array::from_fn(|l| right.e_minus[l] - left.e_plus[l]);
    let mr = mat_vec(&right.m_minus, &de);
    let ml = mat_vec(&left.m_plus, &de);
    std::array::from_fn(|k| {
        if source[k] {
            0.5 * (mr[k] + ml[k])
        } else {
            0.0
        }
    })
}

/// `M` and `E` at the quadrature points `x_j + s dx`,
/// `s = -1/2, -1/4, 0, 1/4, 1/2`, of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPoints<const N: usize> {
    pub m: [[[f64; N]; N]; 5],
    pub e: [State<N>; 5],
}

impl<const N: usize> CellPoints<N> {
    /// End values from the one-sided interface states inside the cell,
    /// the rest supplied by the caller.
    pub fn new(
        left: &InterfaceData<N>,
        right: &InterfaceData<N>,
        inner_m: [[[f64; N]; N]; 3],
        inner_e: [State<N>; 3],
    ) -> Self {
        Self {
            m: [
                left.m_plus,
                inner_m[0],
                inner_m[1],
                inner_m[2],
                right.m_minus,
            ],
            e: [
                left.e_plus,
                inner_e[0],
                inner_e[1],
                inner_e[2],
                right.e_minus,
            ],
        }
    }
}

/// Fifth-order quadrature of `M E_x` over a cell. The `E` end values are
/// the interface values, so the integral telescopes with them.
pub fn cell_integral_fifth_points<const N: usize>(
    p: &CellPoints<N>,
    source: &[bool; N],
) -> State<N> {
    std::array::from_fn(|k| {
        if !source[k] {
            return 0.0;
        }
        let mut integral = 0.0;
        for l in 0..N {
            if p.m.iter().all(|m| m[k][l] == 0.0) {
                continue;
            }
            let a: [f64; 5] = std::array::from_fn(|q| p.m[q][k][l]);
            let b: [f64; 5] = std::array::from_fn(|q| p.e[q][l]);
            integral += cell_integral_fifth(&a, &b);
        }
        integral
    })
}

fn bracket_from<const N: usize>(
    left: &InterfaceData<N>,
    right: &InterfaceData<N>,
    integral: State<N>,
    source: &[bool; N],
) -> State<N> {
    std::array::from_fn(|k| {
        if source[k] {
            right.f_minus[k] - left.f_plus[k] - integral[k]
        } else {
            0.0
        }
    })
}

/// Second-order cell bracket `F(U-_{j+1/2}) - F(U+_{j-1/2})` minus the
/// trapezoidal `M E_x` integral.
pub fn cell_bracket_second<const N: usize>(
    left: &InterfaceData<N>,
    right: &InterfaceData<N>,
    source: &[bool; N],
) -> State<N> {
    bracket_from(
        left,
        right,
        cell_integral_second(left, right, source),
        source,
    )
}

/// Fifth-order cell bracket: flux difference minus [`cell_integral_fifth_points`].
pub fn cell_bracket_fifth<const N: usize>(
    left: &InterfaceData<N>,
    right: &InterfaceData<N>,
    points: &CellPoints<N>,
    source: &[bool; N],
) -> State<N> {
    bracket_from(
        left,
        right,
        cell_integral_fifth_points(points, source),
        source,
    )
}

/// Sweeps left to right setting `K± = F± - R±` with `R- = 0` at the first
/// interface. `path[k]` is the [`path_integral`] of interface `k` and
/// `cells[k]` the `M E_x` integral over the cell between interfaces `k`
/// and `k + 1`.
///
/// Since `R` jumps by `F+ - F- - path` and `F` jumps by the same flux
/// difference, `K` on the source components is carried forward by the
/// integrals alone. Constant equilibrium data then gives bitwise constant
/// `K` however large `F` is.
pub fn accumulate_global_flux<const N: usize>(
    ifaces: &mut [InterfaceData<N>],
    path: &[State<N>],
    cells: &[State<N>],
    source: &[bool; N],
) {
    assert_eq!(path.len(), ifaces.len());
    assert_eq!(cells.len() + 1, ifaces.len());
    let mut k_run = match ifaces.first() {
        Some(d) => d.f_minus,
        None => return,
    };
    for (k, d) in ifaces.iter_mut().enumerate() {
        for c in 0..N {
            if !source[c] {
                d.k_minus[c] = d.f_minus[c];
                d.k_plus[c] = d.f_plus[c];
                continue;
            }
            if k > 0 {
                k_run[c] += cells[k - 1][c];
            }
            d.k_minus[c] = k_run[c];
            k_run[c] += path[k][c];
            d.k_plus[c] = k_run[c];
        }
    }
}
