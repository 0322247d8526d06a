//! Hermite functions, multi-indices and quadrature grids.

mod functions;
mod index;
mod quadrature;

pub use functions::{hermite_eval, hermite_log_square, HermiteTable};
pub use index::{enumerate_band, Band, MultiIndex};
pub(crate) use quadrature::gauss_legendre;
pub use quadrature::{
    default_points_per_axis, gauss_hermite_quadrature, tensor_grid, tensor_grid_with_cap, AxisKind, AxisRule,
    QuadratureGrid, DEFAULT_NODE_CAP,
};
