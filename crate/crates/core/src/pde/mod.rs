//! Forward equation for `P·Z` on a truncated uniform (S, r) grid.

mod adi;
mod coefficients;
mod evolve;
mod field;
mod grid;
mod init;
mod tridiag;

pub use adi::adi_step;
pub use coefficients::{build_coefficients, point_coefficients, AdiCoefficients};
pub use evolve::{evolve, evolve_from, evolve_segment, EvolveOptions, Evolution, Segment, StepDiagnostics};
pub use field::{Field2D, NegativityReport};
pub use grid::{auto_bounds, Grid2D, GridSpec};
pub use init::{
    default_kernel_concentration, init_dirac, init_short_time, initial_field, short_time_moments,
    short_time_start_step, InitialCondition, ShortTimeMoments,
};
pub use tridiag::{solve_into, TridiagonalSystem};
