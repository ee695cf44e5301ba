//! Pure numerical primitives shared by the solver.

mod lambert;
mod metric;
mod shape;

pub use lambert::{lambert_w0, BRANCH_POINT};
pub use metric::WeakStarMetricConfig;
pub use shape::{kernel_density, KernelFamily, ShapeKernel};
