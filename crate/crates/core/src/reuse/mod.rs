//! Lifetime policy reuse: a fixed library of policies, selected per episode
//! by lifetime average reward and trained online for the whole lifetime.

mod lifetime;
mod runlog;
mod selector;

pub use lifetime::{
    acting_rng, library_spread, policy_init_rng, run_episode, run_lifetime, run_single_learner,
    Library, LifetimeConfig, LifetimeSummary,
};
pub use runlog::{EpisodeRecord, RunLog, RunLogWriter, RUNLOG_COLUMNS};
pub use selector::{
    select_policy, unadaptive_assignment, PolicyRecord, PolicyStats, Selection, SelectorConfig,
    SelectorMode, TaskStats, TimeUnit,
};
