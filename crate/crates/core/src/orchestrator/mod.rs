//! Session life cycle: instruction in, reviewed plan out, then ticked
//! execution with preemption.

mod compose;
mod driver;
mod session;

pub use compose::{compose_problem, ComposeError};
pub use driver::{drive_realtime, drive_virtual};
pub use session::{
    Artifacts, ClockMode, Event, EventKind, Failure, Listener, Metrics, Mode, Phase, PlanCheck, Revision, Session,
    SessionConfig, SessionError, SessionRecord, StopTime,
};

#[cfg(test)]
mod tests;
