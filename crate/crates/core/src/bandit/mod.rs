//! Online partition selection.
//!
//! The learner keeps a ridge-regression estimate of the edge-delay
//! coefficients and picks, every frame, the partition with the lowest
//! optimistic end-to-end delay. Key frames shrink the optimism bonus, and a
//! forced-sampling schedule keeps the learner from going silent when it
//! settles on on-device processing (which yields no edge feedback).

mod learner;
mod schedule;

pub use learner::{
    is_forced, select_partition, theoretical_alpha, ucb_score, Decision, Horizon, Learner, LearnerConfig, LearnerMode,
    LearnerState,
};
pub use schedule::{forced_schedule, phase_position, ForcedSchedule, PhasePosition};
