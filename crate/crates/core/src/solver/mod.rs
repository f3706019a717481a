//! Time integration of the free-boundary system on a front-fixed grid.

pub mod integral;
pub mod run;
pub mod state;
pub mod stepper;
pub mod transform;

pub use integral::{reconstruct_a_integral, ProbeHistory};
pub use run::{front_speed_bound, Control, Monitor, NoMonitor, Simulation, Snapshot, Trajectory};
pub use state::{DtPolicy, InitialData, InitialShape, SimulationState, SolverConfig, StencilOrder};
pub use stepper::{step, FrontRates};
pub use transform::{transform_to_fixed, FixedFrame};
