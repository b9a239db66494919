//! Finite-horizon MDP for switching between learning and obfuscation.
//!
//! States are `(o, b)`: oracle state and remaining successful steps. Actions
//! are `(a, i)` pairs ordered obfuscate-first, low-incentive-first.

mod model;
mod solve;
mod structure;

pub use model::{Action, MdpModel, ModelSpec, ReferenceSchedule, ScheduleEntry};
pub use solve::{backward_induction, solve_dp, DpSolution, PolicyTable, ValueTable};
pub use structure::{
    check_structural_assumptions, check_value_shape, queue_kernel, verify_threshold_structure,
    AssumptionCheck, ShapeViolation, StructureReport, ThresholdReport, ThresholdViolation,
};
