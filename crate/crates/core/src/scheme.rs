//! Semi-discrete right-hand side of the second-order central-upwind scheme
//! and its fifth-order A-WENO extension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{
    accumulate_global_flux, cell_integral_fifth_points, cell_integral_second, path_integral,
    pccu_flux, CellPoints, InterfaceData,
};
use crate::kernels::{aiwenoz_left, aiwenoz_right, aweno_flux, quarter_values, MinmodParams};
use crate::mesh::{apply_boundary, BoundarySpec, Grid, GHOST_WIDTH_FIFTH, GHOST_WIDTH_SECOND};
use crate::model::{local_speeds, State, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Order {
    Second,
    Fifth,
}

impl Order {
    pub fn ghost_width(self) -> usize {
        match self {
            Order::Second => GHOST_WIDTH_SECOND,
            Order::Fifth => GHOST_WIDTH_FIFTH,
        }
    }

    pub fn as_u32(self) -> u32 {
        match self {
            Order::Second => 2,
            Order::Fifth => 5,
        }
    }
}

impl TryFrom<u32> for Order {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            2 => Ok(Order::Second),
            5 => Ok(Order::Fifth),
            other => Err(Error::config(
                "order",
                format!("must be 2 or 5, got {other}"),
            )),
        }
    }
}

impl From<Order> for u32 {
    fn from(o: Order) -> u32 {
        o.as_u32()
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u32())
    }
}

/// What to do when an interface value has no equilibrium preimage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversePolicy {
    /// Propagate the error.
    #[default]
    Strict,
    /// Use the adjacent nodal state (first-order values) at that interface.
    NodalFallback,
}

/// Counters collected while evaluating right-hand sides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhs_evaluations: u64,
    pub inverse_fallbacks: u64,
    pub hat_fallbacks: u64,
    pub bounded_speeds: u64,
}

/// A fully configured spatial discretisation with its scratch buffers.
#[derive(Debug, Clone)]
pub struct Scheme<M, const N: usize> {
    model: M,
    grid: Grid,
    bc: BoundarySpec<State<N>>,
    order: Order,
    theta: f64,
    policy: InversePolicy,
    source: [bool; N],
    geometry: Vec<f64>,
    /// Storage index of the first interface assembled each stage.
    first_iface: usize,
    geom_minus: Vec<f64>,
    geom_plus: Vec<f64>,
    eq: Vec<State<N>>,
    m_nodes: Vec<[[f64; N]; N]>,
    ifaces: Vec<InterfaceData<N>>,
    path: Vec<State<N>>,
    cells: Vec<State<N>>,
    fv: Vec<State<N>>,
    diagnostics: Diagnostics,
}

impl<M: SystemModel<N>, const N: usize> Scheme<M, N> {
    /// The grid must carry at least the ghost width the order needs.
    pub fn new(
        model: M,
        grid: Grid,
        bc: BoundarySpec<State<N>>,
        order: Order,
        minmod: MinmodParams,
    ) -> Result<Self> {
        let g = grid.ghost_width();
        if g < order.ghost_width() {
            return Err(Error::Grid(format!(
                "order {order} needs ghost width {}, grid has {g}",
                order.ghost_width()
            )));
        }
        let n = grid.n_cells();
        if matches!(bc.left(), crate::BoundaryKind::Periodic) && n < order.ghost_width() {
            return Err(Error::Grid(format!(
                "periodic order-{order} runs need at least {} cells",
                order.ghost_width()
            )));
        }
        let mut geometry: Vec<f64> = (0..grid.len_with_ghosts())
            .map(|i| model.geometry(grid.storage_center(i)))
            .collect();
        apply_boundary(&mut geometry, &bc.for_geometry(), &grid)?;

        // interfaces g-1 .. g+n-1 carry the final fluxes; the A-WENO
        // correction reaches two further FV fluxes on each side
        let (first, last) = match order {
            Order::Second => (g - 1, g + n - 1),
            Order::Fifth => (g - 3, g + n + 1),
        };
        let count = last - first + 1;
        let mut geom_minus = vec![0.0; count];
        let mut geom_plus = vec![0.0; count];
        for k in 0..count {
            let i = first + k;
            let (gm, gp) = match order {
                Order::Second => {
                    let theta = minmod.theta();
                    let dx = grid.dx();
                    let (_, right, _) = crate::kernels::plr_interface_values(
                        [geometry[i - 1], geometry[i], geometry[i + 1]],
                        theta,
                        dx,
                    );
                    let (_, _, left) = crate::kernels::plr_interface_values(
                        [geometry[i], geometry[i + 1], geometry[i + 2]],
                        theta,
                        dx,
                    );
                    (right, left)
                }
                Order::Fifth => (
                    aiwenoz_left(&[
                        geometry[i - 2],
                        geometry[i - 1],
                        geometry[i],
                        geometry[i + 1],
                        geometry[i + 2],
                    ]),
                    aiwenoz_right(&[
                        geometry[i - 1],
                        geometry[i],
                        geometry[i + 1],
                        geometry[i + 2],
                        geometry[i + 3],
                    ]),
                ),
            };
            geom_minus[k] = gm;
            geom_plus[k] = gp;
        }

        let len = grid.len_with_ghosts();
        let source = model.source_components();
        Ok(Self {
            model,
            grid,
            bc,
            order,
            theta: minmod.theta(),
            policy: InversePolicy::Strict,
            source,
            geometry,
            first_iface: first,
            geom_minus,
            geom_plus,
            eq: vec![[0.0; N]; len],
            m_nodes: vec![[[0.0; N]; N]; if order == Order::Fifth { len } else { 0 }],
            ifaces: vec![InterfaceData::zeroed(); count],
            path: vec![[0.0; N]; count],
            cells: vec![[0.0; N]; count - 1],
            fv: vec![[0.0; N]; count],
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn with_policy(mut self, policy: InversePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn policy(&self) -> InversePolicy {
        self.policy
    }

    pub fn set_policy(&mut self, policy: InversePolicy) {
        self.policy = policy;
    }

    pub fn set_boundary(&mut self, bc: BoundarySpec<State<N>>) -> Result<()> {
        if matches!(bc.left(), crate::BoundaryKind::Periodic)
            != matches!(self.bc.left(), crate::BoundaryKind::Periodic)
        {
            return Err(Error::Boundary(
                "cannot switch periodicity of an assembled scheme".into(),
            ));
        }
        self.bc = bc;
        Ok(())
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn boundary(&self) -> &BoundarySpec<State<N>> {
        &self.bc
    }

    /// Nodal geometry including ghosts.
    pub fn geometry(&self) -> &[f64] {
        &self.geometry
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// Interface data of the last evaluation; entry `k` is interface
    /// `first + k + 1/2` in storage numbering.
    pub fn interfaces(&self) -> (usize, &[InterfaceData<N>]) {
        (self.first_iface, &self.ifaces)
    }

    /// Samples `f(x, geometry)` at every storage node.
    pub fn sample(&self, mut f: impl FnMut(f64, f64) -> State<N>) -> Vec<State<N>> {
        (0..self.grid.len_with_ghosts())
            .map(|i| f(self.grid.storage_center(i), self.geometry[i]))
            .collect()
    }

    /// Nodal equilibrium variables at every storage node.
    pub fn equilibrium_field(&self, u: &[State<N>]) -> Result<Vec<State<N>>> {
        u.iter()
            .zip(&self.geometry)
            .enumerate()
            .map(|(i, (s, &g))| {
                self.model
                    .equilibrium(s, g)
                    .map_err(|e| node_error(&self.grid, i, e))
            })
            .collect()
    }

    /// Fills the ghosts of `u` and writes `dU/dt` into `out` (ghost entries
    /// zeroed). Returns the largest one-sided speed over all interfaces.
    pub fn rhs(&mut self, u: &mut [State<N>], out: &mut [State<N>]) -> Result<f64> {
        let len = self.grid.len_with_ghosts();
        if u.len() != len || out.len() != len {
            return Err(Error::Usage(format!(
                "state has {} entries, output {}, grid expects {len}",
                u.len(),
                out.len()
            )));
        }
        self.diagnostics.rhs_evaluations += 1;
        apply_boundary(u, &self.bc, &self.grid)?;

        for i in 0..len {
            self.eq[i] = self
                .model
                .equilibrium(&u[i], self.geometry[i])
                .map_err(|e| node_error(&self.grid, i, e))?;
        }
        if self.order == Order::Fifth {
            for i in 0..len {
                self.m_nodes[i] = self.model.balance_matrix(&u[i], self.geometry[i])?;
            }
        }

        let mut max_speed = 0.0f64;
        for k in 0..self.ifaces.len() {
            let i = self.first_iface + k;
            let (e_minus, e_plus) = self.interpolate(i);
            let d = self
                .assemble_interface(k, i, u, e_minus, e_plus)
                .map_err(|e| Error::AtInterface {
                    index: self.grid.node_index(i),
                    source: Box::new(e),
                })?;
            max_speed = max_speed.max(d.a_plus).max(-d.a_minus);
            self.path[k] = path_integral(&d, &self.source);
            self.ifaces[k] = d;
        }

        for k in 0..self.cells.len() {
            let (left, right) = (&self.ifaces[k], &self.ifaces[k + 1]);
            self.cells[k] = match self.order {
                Order::Second => cell_integral_second(left, right, &self.source),
                Order::Fifth => {
                    let points = self.cell_points(self.first_iface + k + 1, left, right);
                    cell_integral_fifth_points(&points, &self.source)
                }
            };
        }
        accumulate_global_flux(&mut self.ifaces, &self.path, &self.cells, &self.source);
        for (f, d) in self.fv.iter_mut().zip(&self.ifaces) {
            *f = pccu_flux(d);
        }

        let g = self.grid.ghost_width();
        let n = self.grid.n_cells();
        let inv_dx = 1.0 / self.grid.dx();
        // offset of interface g-1+1/2 inside the assembled range
        let base = g - 1 - self.first_iface;
        let flux_at = |fv: &[State<N>], k: usize| -> State<N> {
            match self.order {
                Order::Second => fv[k],
                Order::Fifth => std::array::from_fn(|c| {
                    aweno_flux(&[
                        fv[k - 2][c],
                        fv[k - 1][c],
                        fv[k][c],
                        fv[k + 1][c],
                        fv[k + 2][c],
                    ])
                }),
            }
        };
        for s in out.iter_mut() {
            *s = [0.0; N];
        }
        let mut left = flux_at(&self.fv, base);
        for j in 0..n {
            let right = flux_at(&self.fv, base + j + 1);
            out[g + j] = std::array::from_fn(|c| -(right[c] - left[c]) * inv_dx);
            left = right;
        }
        Ok(max_speed)
    }

    /// Quadrature values of cell `c`: interface states at the ends, nodal
    /// values at the centre, quartic interpolants at the quarter points.
    fn cell_points(
        &self,
        c: usize,
        left: &InterfaceData<N>,
        right: &InterfaceData<N>,
    ) -> CellPoints<N> {
        let mut m = [[[0.0; N]; N]; 2];
        let mut e = [[0.0; N]; 2];
        for k in 0..N {
            for l in 0..N {
                let (a, b) =
                    quarter_values(&std::array::from_fn(|i| self.m_nodes[c - 2 + i][k][l]));
                m[0][k][l] = a;
                m[1][k][l] = b;
            }
            let (a, b) = quarter_values(&std::array::from_fn(|i| self.eq[c - 2 + i][k]));
            e[0][k] = a;
            e[1][k] = b;
        }
        CellPoints::new(
            left,
            right,
            [m[0], self.m_nodes[c], m[1]],
            [e[0], self.eq[c], e[1]],
        )
    }

    fn interpolate(&self, i: usize) -> (State<N>, State<N>) {
        let eq = &self.eq;
        match self.order {
            Order::Second => {
                let dx = self.grid.dx();
                let em = std::array::from_fn(|c| {
                    crate::kernels::plr_interface_values(
                        [eq[i - 1][c], eq[i][c], eq[i + 1][c]],
                        self.theta,
                        dx,
                    )
                    .1
                });
                let ep = std::array::from_fn(|c| {
                    crate::kernels::plr_interface_values(
                        [eq[i][c], eq[i + 1][c], eq[i + 2][c]],
                        self.theta,
                        dx,
                    )
                    .2
                });
                (em, ep)
            }
            Order::Fifth => {
                let em = std::array::from_fn(|c| {
                    aiwenoz_left(&[
                        eq[i - 2][c],
                        eq[i - 1][c],
                        eq[i][c],
                        eq[i + 1][c],
                        eq[i + 2][c],
                    ])
                });
                let ep = std::array::from_fn(|c| {
                    aiwenoz_right(&[
                        eq[i - 1][c],
                        eq[i][c],
                        eq[i + 1][c],
                        eq[i + 2][c],
                        eq[i + 3][c],
                    ])
                });
                (em, ep)
            }
        }
    }

    fn one_sided(
        &mut self,
        e: State<N>,
        geom: f64,
        node: usize,
        u: &[State<N>],
    ) -> Result<(State<N>, State<N>)> {
        match self.model.state_from_equilibrium(&e, geom, &u[node]) {
            Ok(s) => Ok((s, e)),
            Err(err) => match self.policy {
                InversePolicy::Strict => Err(err),
                InversePolicy::NodalFallback => {
                    self.diagnostics.inverse_fallbacks += 1;
                    log::debug!("nodal fallback at storage node {node}: {err}");
                    let s = u[node];
                    Ok((s, self.model.equilibrium(&s, geom)?))
                }
            },
        }
    }

    fn assemble_interface(
        &mut self,
        k: usize,
        i: usize,
        u: &[State<N>],
        e_minus: State<N>,
        e_plus: State<N>,
    ) -> Result<InterfaceData<N>> {
        let gm = self.geom_minus[k];
        let gp = self.geom_plus[k];
        let (u_minus, e_minus) = self.one_sided(e_minus, gm, i, u)?;
        let (u_plus, e_plus) = self.one_sided(e_plus, gp, i + 1, u)?;

        let (a_minus, a_plus, bounded) = local_speeds(&self.model, (&u_minus, gm), (&u_plus, gp))?;
        if bounded {
            self.diagnostics.bounded_speeds += 1;
        }

        let same_e = e_minus == e_plus;
        let (hat_minus, hat_plus) = if gm == gp {
            (u_minus, if same_e { u_minus } else { u_plus })
        } else {
            let gh = 0.5 * (gm + gp);
            let solve =
                |e: &State<N>, guess: &State<N>| self.model.state_from_equilibrium(e, gh, guess);
            let hm = solve(&e_minus, &u_minus);
            let hp = if same_e {
                None
            } else if round_off_apart(&e_minus, &e_plus) {
                // several roots may exist at the averaged geometry; keep the
                // two hat states on one branch
                Some(
                    hm.as_ref()
                        .map_or_else(|_| solve(&e_plus, &u_plus), |a| solve(&e_plus, a)),
                )
            } else {
                Some(solve(&e_plus, &u_plus))
            };
            match (hm, hp) {
                (Ok(a), None) => (a, a),
                (Ok(a), Some(Ok(b))) => (a, b),
                (hm, hp) => {
                    let err = hm
                        .err()
                        .or_else(|| hp.and_then(|r| r.err()))
                        .expect("one solve failed");
                    match self.policy {
                        InversePolicy::Strict => return Err(err),
                        InversePolicy::NodalFallback => {
                            self.diagnostics.hat_fallbacks += 1;
                            (u_minus, u_plus)
                        }
                    }
                }
            }
        };

        Ok(InterfaceData {
            u_minus,
            u_plus,
            e_minus,
            e_plus,
            geom_minus: gm,
            geom_plus: gp,
            a_minus,
            a_plus,
            f_minus: self.model.flux(&u_minus, gm)?,
            f_plus: self.model.flux(&u_plus, gp)?,
            k_minus: [0.0; N],
            k_plus: [0.0; N],
            hat_minus,
            hat_plus,
            m_minus: self.model.balance_matrix(&u_minus, gm)?,
            m_plus: self.model.balance_matrix(&u_plus, gp)?,
        })
    }
}

/// Equilibrium data that differ only by accumulated rounding.
fn round_off_apart<const N: usize>(a: &State<N>, b: &State<N>) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-10 * scale)
}

fn node_error(grid: &Grid, storage: usize, e: Error) -> Error {
    Error::AtNode {
        index: grid.node_index(storage),
        source: Box::new(e),
    }
}
