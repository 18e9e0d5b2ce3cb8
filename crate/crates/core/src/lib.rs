//! Well-balanced flux-globalization central-upwind schemes (second order)
//! and their fifth-order A-WENO extension for 1-D nonconservative balance
//! laws, with nozzle-flow and two-layer shallow water models.

pub mod config;
pub mod error;
pub mod experiments;
pub mod flux;
pub mod io;
pub mod kernels;
pub mod mesh;
pub mod model;
pub mod scheme;
pub mod time;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use flux::InterfaceData;
pub use kernels::MinmodParams;
pub use mesh::{apply_boundary, BoundaryKind, BoundarySpec, Grid};
pub use model::{Nozzle, NozzleBranch, Profile, State, SystemModel, TwoLayer, WaveSpeeds};
pub use scheme::{Diagnostics, InversePolicy, Order, Scheme};
pub use time::{
    compute_dt, integrate, integrate_until, ssp_rk3_step, DtRule, RunStats, TimeControls,
};
