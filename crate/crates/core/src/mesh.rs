//! Uniform 1-D grids with ghost layers and boundary filling.
//!
//! Storage convention: a field on a [`Grid`] is a slice of length
//! `n_cells + 2 * ghost_width`. Interior node `j` (1-based, as in `x_j`)
//! lives at storage index `j - 1 + ghost_width`. The interface between
//! storage nodes `i` and `i + 1` is called interface `i + 1/2`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum ghost width for the second-order scheme.
pub const GHOST_WIDTH_SECOND: usize = 2;
/// Minimum ghost width for the fifth-order scheme.
pub const GHOST_WIDTH_FIFTH: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
    dx: f64,
    ghost_width: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, ghost_width: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::Grid("n_cells must be positive".into()));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::Grid(format!(
                "degenerate interval [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
            ghost_width,
        })
    }

    /// Builds the grid whose spacing is `dx`; the interval length must be an
    /// integer multiple of `dx`.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64, ghost_width: usize) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::Grid(format!("dx must be positive, got {dx}")));
        }
        let cells = (x_max - x_min) / dx;
        let n = cells.round();
        if n < 1.0 || (cells - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::Grid(format!(
                "interval [{x_min}, {x_max}] is not a multiple of dx = {dx}"
            )));
        }
        Self::new(x_min, x_max, n as usize, ghost_width)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn ghost_width(&self) -> usize {
        self.ghost_width
    }

    /// Total storage length including both ghost layers.
    pub fn len_with_ghosts(&self) -> usize {
        self.n_cells + 2 * self.ghost_width
    }

    /// Storage indices of the interior nodes.
    pub fn interior(&self) -> Range<usize> {
        self.ghost_width..self.ghost_width + self.n_cells
    }

    /// Cell center `x_j` for a 1-based node index (ghosts allowed).
    pub fn center(&self, j: isize) -> f64 {
        self.x_min + (j as f64 - 0.5) * self.dx
    }

    /// Interface coordinate `x_{j+1/2}`.
    pub fn interface(&self, j: isize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    /// 1-based node index of a storage slot.
    pub fn node_index(&self, storage: usize) -> isize {
        storage as isize - self.ghost_width as isize + 1
    }

    pub fn storage_center(&self, storage: usize) -> f64 {
        self.center(self.node_index(storage))
    }

    /// Centers of every storage slot, ghosts included.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.len_with_ghosts())
            .map(|i| self.storage_center(i))
            .collect()
    }

    pub fn interior_centers(&self) -> Vec<f64> {
        self.interior().map(|i| self.storage_center(i)).collect()
    }
}

/// Boundary behavior on one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryKind<T> {
    /// Zeroth-order extrapolation of the nearest interior value.
    Free,
    Periodic,
    Dirichlet(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec<T> {
    left: BoundaryKind<T>,
    right: BoundaryKind<T>,
}

impl<T: Copy> BoundarySpec<T> {
    pub fn new(left: BoundaryKind<T>, right: BoundaryKind<T>) -> Result<Self> {
        let lp = matches!(left, BoundaryKind::Periodic);
        let rp = matches!(right, BoundaryKind::Periodic);
        if lp != rp {
            return Err(Error::Boundary(
                "periodic boundaries must be set on both sides".into(),
            ));
        }
        Ok(Self { left, right })
    }

    pub fn free() -> Self {
        Self {
            left: BoundaryKind::Free,
            right: BoundaryKind::Free,
        }
    }

    pub fn periodic() -> Self {
        Self {
            left: BoundaryKind::Periodic,
            right: BoundaryKind::Periodic,
        }
    }

    pub fn left(&self) -> BoundaryKind<T> {
        self.left
    }

    pub fn right(&self) -> BoundaryKind<T> {
        self.right
    }

    /// The spec applied to the static geometry field: periodic wraps, every
    /// other kind extends the boundary node.
    pub fn for_geometry(&self) -> BoundarySpec<f64> {
        let map = |k: BoundaryKind<T>| match k {
            BoundaryKind::Periodic => BoundaryKind::Periodic,
            _ => BoundaryKind::Free,
        };
        BoundarySpec {
            left: map(self.left),
            right: map(self.right),
        }
    }
}

/// Fills the ghost entries of `field` in place. Interior entries are never
/// touched.
pub fn apply_boundary<T: Copy>(field: &mut [T], spec: &BoundarySpec<T>, grid: &Grid) -> Result<()> {
    let g = grid.ghost_width();
    let n = grid.n_cells();
    if field.len() != grid.len_with_ghosts() {
        return Err(Error::Usage(format!(
            "field has {} entries, grid expects {}",
            field.len(),
            grid.len_with_ghosts()
        )));
    }
    let wrap = |i: usize| -> usize {
        let phys = i as isize - g as isize;
        g + phys.rem_euclid(n as isize) as usize
    };
    for i in 0..g {
        field[i] = match spec.left {
            BoundaryKind::Free => field[g],
            BoundaryKind::Periodic => field[wrap(i)],
            BoundaryKind::Dirichlet(v) => v,
        };
    }
    for i in g + n..n + 2 * g {
        field[i] = match spec.right {
            BoundaryKind::Free => field[g + n - 1],
            BoundaryKind::Periodic => field[wrap(i)],
            BoundaryKind::Dirichlet(v) => v,
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_coordinates() {
        let g = Grid::new(0.0, 10.0, 200, 5).unwrap();
        assert_eq!(g.dx(), 0.05);
        assert!((g.center(1) - 0.025).abs() < 1e-15);

        let g = Grid::new(0.0, 1.0, 40, 5).unwrap();
        assert_eq!(g.interface(0), 0.0);
        assert_eq!(g.interface(40), 1.0);

        let g = Grid::new(-1.0, 1.0, 100, 2).unwrap();
        assert!((g.dx() - 1.0 / 50.0).abs() < 1e-16);
        assert!((g.center(50) + 0.01).abs() < 1e-15);
        assert!((g.center(51) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(0.0, 1.0, 0, 2).is_err());
        assert!(Grid::new(1.0, 1.0, 10, 2).is_err());
        assert!(Grid::new(2.0, 1.0, 10, 2).is_err());
        assert!(Grid::with_spacing(0.0, 1.0, 0.3, 2).is_err());
        assert_eq!(
            Grid::with_spacing(0.0, 10.0, 0.05, 2).unwrap().n_cells(),
            200
        );
    }

    #[test]
    fn coordinates_do_not_drift() {
        let g = Grid::new(0.0, 25.0, 125, 5).unwrap();
        for k in 0..=125isize {
            assert_eq!(g.interface(k), k as f64 * g.dx());
        }
        assert_eq!(g.interior().len(), 125);
    }

    #[test]
    fn free_boundary_copies_nearest() {
        let grid = Grid::new(0.0, 3.0, 3, 2).unwrap();
        let mut f = [0.0, 0.0, 1.0, 2.0, 3.0, 0.0, 0.0];
        apply_boundary(&mut f, &BoundarySpec::free(), &grid).unwrap();
        assert_eq!(f, [1.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn periodic_boundary_wraps() {
        let grid = Grid::new(0.0, 3.0, 3, 1).unwrap();
        let mut f = [0.0, 1.0, 2.0, 3.0, 0.0];
        apply_boundary(&mut f, &BoundarySpec::periodic(), &grid).unwrap();
        assert_eq!(f, [3.0, 1.0, 2.0, 3.0, 1.0]);

        // ghost layer wider than the interior still wraps consistently
        let grid = Grid::new(0.0, 2.0, 2, 3).unwrap();
        let mut f = [0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0];
        apply_boundary(&mut f, &BoundarySpec::periodic(), &grid).unwrap();
        assert_eq!(f, [2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn dirichlet_fills_whole_ghost_layer() {
        let grid = Grid::new(0.0, 25.0, 125, 5).unwrap();
        let inflow = [8.0, 119.0, 4.0, 60.0];
        let spec = BoundarySpec::new(BoundaryKind::Dirichlet(inflow), BoundaryKind::Free).unwrap();
        let mut f = vec![[1.0, 0.0, 1.0, 0.0]; grid.len_with_ghosts()];
        apply_boundary(&mut f, &spec, &grid).unwrap();
        assert!(f[..5].iter().all(|v| *v == inflow));
        assert!(f[130..].iter().all(|v| *v == [1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn one_sided_periodic_is_rejected() {
        let r = BoundarySpec::<f64>::new(BoundaryKind::Periodic, BoundaryKind::Free);
        assert!(matches!(r, Err(Error::Boundary(_))));
    }

    #[test]
    fn boundary_application_is_idempotent() {
        let grid = Grid::new(0.0, 1.0, 4, 2).unwrap();
        for spec in [
            BoundarySpec::free(),
            BoundarySpec::periodic(),
            BoundarySpec::new(BoundaryKind::Dirichlet(9.0), BoundaryKind::Free).unwrap(),
        ] {
            let mut f = vec![0.0, 0.0, 1.0, 5.0, -2.0, 4.0, 0.0, 0.0];
            apply_boundary(&mut f, &spec, &grid).unwrap();
            let once = f.clone();
            apply_boundary(&mut f, &spec, &grid).unwrap();
            assert_eq!(f, once);
        }
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let grid = Grid::new(0.0, 1.0, 4, 2).unwrap();
        let mut f = vec![0.0; 5];
        assert!(apply_boundary(&mut f, &BoundarySpec::free(), &grid).is_err());
    }
}
