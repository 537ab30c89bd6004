//! Simulator for the planar vortex-wave system: a bounded vorticity field carried
//! by Lagrangian markers, coupled to point vortices that advect it and are advected
//! by it.
//!
//! * [`kernels`]: Biot-Savart kernel and its smoothed variants.
//! * [`field`]: marker clouds, induced velocity, grid quadrature.
//! * [`dynamics`]: right-hand sides, RK4 stepping, scenario set-up and the run driver.
//! * [`diagnostics`]: checkers for the radius laws, norm conservation, twin-run
//!   divergence, weak residuals, collision margins and the fixed-vortex hole.
//! * [`harness`]: configuration files, commands and serialization.

pub mod diagnostics;
pub mod dynamics;
pub mod field;
pub mod harness;
pub mod kernels;

pub use dynamics::{Mode, PointVortex, SimState};
pub use field::{Grid, Marker, MarkerCloud};
pub use kernels::PlanePoint;
