//! Queue-aware online switch-controller association.
//!
//! Each slot, every switch either handles its own flow requests or uploads
//! them to one accessible controller. Unknown per-request costs are learned
//! with combinatorial bandit estimates; queue backlogs are kept stable with a
//! drift-plus-penalty rule weighted by `V`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod environment;
pub mod harness;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod scheduler;
