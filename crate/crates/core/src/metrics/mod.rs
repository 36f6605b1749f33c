//! Post-hoc analysis of run logs: forgetting and transfer ratios, policy
//! spread, empirical and integrated task capacity, and the cart-pole task
//! cluster analysis.

mod capacity;
mod cluster;
mod ratios;
mod spread;
pub mod theory;

pub use capacity::{
    empirical_task_capacity, integrated_task_capacity, CapacityEntry, CapacityTable,
};
pub use cluster::{
    cluster_points, cluster_tasks, Cluster, ClusterPoint, Clustering, DEFAULT_LINKAGE_THRESHOLD,
};
pub use ratios::{
    bin_forgetting, block_areas, forgetting_ratio, forgetting_samples, mean_area_by_task, mean_stderr,
    transfer_ratio, transfer_samples, BinSummary, BlockArea, ForgettingSample, InterferenceBin,
    TransferSample,
};
pub use spread::{epsilon_greedy_distribution, policy_spread, total_variation};
