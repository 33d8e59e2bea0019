//! Implicit wave propagation on embedded boundary meshes.
//!
//! The crate advances the wave equation with a two level implicit scheme
//! whose update requires only modified Helmholtz solves. Those solves are
//! carried out in O(N) per line by recursive convolution against the
//! exponential kernel, so no linear systems are assembled. One dimension
//! covers bounded, periodic and outflow problems; two dimensions are
//! handled by alternating direction sweeps over the x and y mesh lines of
//! an embedded boundary Cartesian grid.

pub mod adi;
pub mod bc;
pub mod config;
pub mod conv;
pub mod decomp;
pub mod error;
pub mod geom;
pub mod harness;
pub mod kernel;
pub mod mesh;
pub mod reference;
pub mod stepper;

pub use adi::{invert_helmholtz_line, Domain2D, LineSource, LineSpec, Wave2D};
pub use config::RunConfig;
pub use bc::{BcSpec, EndBc, OutflowState, TimeFn};
pub use conv::{assemble, fast_convolve, local_integrals, ConvPlan, ConvResult};
pub use decomp::DdSolver;
pub use error::{Error, Result};
pub use geom::{EndTag, Geometry, Span};
pub use kernel::{ConvWeights, OutflowWeights, SchemeParams};
pub use mesh::{ChebKind, D2Stencil, Grid1D};
pub use stepper::{amplification_check, FieldFn, PointSource, SourceSpec, Stepper1D, WaveState1D};
