//! Online selection of DNN partition points for collaborative edge
//! inference.
//!
//! A mobile device runs the first `p` units of a network and ships the
//! intermediate tensor to an edge server, which finishes the job. The
//! on-device part is known in advance; the edge part depends on network and
//! server conditions that drift over time. [`bandit::Learner`] learns a
//! linear model of the edge delay from the frames it offloads and picks a
//! partition for every frame.
//!
//! ```
//! use partition_bandit::bandit::{Learner, LearnerConfig};
//! use partition_bandit::model::{context_table, frontend_profile, parse_descriptor, DeviceProfile};
//!
//! let desc = parse_descriptor(r#"{
//!     "name": "tiny", "input_size_mb": 0.5,
//!     "units": [
//!         { "name": "conv", "kind": "conv", "gmacs": 2.0, "output_mb": 1.0 },
//!         { "name": "fc", "kind": "fc", "gmacs": 0.5, "output_mb": 0.01 }
//!     ]
//! }"#).unwrap();
//! let device = DeviceProfile { ms_per_gmac_conv: 10.0, ms_per_gmac_fc: 20.0, ms_per_gmac_act: 5.0, fixed_overhead_ms: 1.0 };
//! let (contexts, _) = context_table(&desc).unwrap().normalized();
//! let mut learner = Learner::new(LearnerConfig::default(), contexts, frontend_profile(&desc, &device)).unwrap();
//!
//! let decision = learner.decide(1, 0.9).unwrap();
//! let observed = (decision.partition != desc.on_device()).then_some(40.0);
//! learner.update(decision.partition, observed).unwrap();
//! ```

pub mod bandit;
pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod keyframe;
pub mod model;

pub use error::{Error, Result};
