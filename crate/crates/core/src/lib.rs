//! Budget-limited action attacks on cooperative multi-agent learners.

pub mod env;
pub mod oracle;
pub mod lpa;
pub mod ego;
pub mod attacker;
pub mod rollout;
pub mod evolution;
pub mod metrics;
pub mod trainers;
