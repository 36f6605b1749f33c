use serde::{Deserialize, Serialize};

use crate::envs::{random_policy_rollout, TaskSpec};
use crate::error::{Error, Result};
use crate::rng::child_rng;

/// Linkage distance on log-scaled, min-max normalised coordinates.
pub const DEFAULT_LINKAGE_THRESHOLD: f64 = 0.15;

/// Pre-termination statistics of one task under a random policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPoint {
    pub task_index: usize,
    /// Smallest |angular velocity| preceding a pole-angle failure (rad/s).
    pub theta_dot: f64,
    /// Mean length of episodes ending in a pole-angle failure (steps).
    pub episode_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub mean_theta_dot: f64,
    pub mean_episode_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    /// Tasks per cluster.
    pub fn capacity(&self, n_tau: usize) -> f64 {
        n_tau as f64 / self.clusters.len() as f64
    }
}

/// Log-transforms both coordinates and scales each to `[0, 1]`.
fn normalise(points: &[ClusterPoint]) -> Vec<[f64; 2]> {
    let logged: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [p.theta_dot.ln(), p.episode_length.ln()])
        .collect();
    let mut out = logged.clone();
    for axis in 0..2 {
        let lo = logged.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = logged.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        for (o, l) in out.iter_mut().zip(&logged) {
            o[axis] = if range > 0.0 { (l[axis] - lo) / range } else { 0.0 };
        }
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage grouping: points closer than `threshold` after
/// normalisation share a cluster. Clusters are ordered by first member.
pub fn cluster_tasks(points: &[ClusterPoint], threshold: f64) -> Result<Clustering> {
    if points.is_empty() {
        return Err(Error::Analysis("no points to cluster".into()));
    }
    if points
        .iter()
        .any(|p| !(p.theta_dot > 0.0 && p.episode_length > 0.0))
    {
        return Err(Error::Analysis("cluster coordinates must be positive".into()));
    }
    let xy = normalise(points);
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = ((xy[i][0] - xy[j][0]).powi(2) + (xy[i][1] - xy[j][1]).powi(2)).sqrt();
            if d <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..points.len() {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(i),
            None => groups.push((root, vec![i])),
        }
    }
    let clusters = groups
        .into_iter()
        .map(|(_, idx)| {
            let n = idx.len() as f64;
            Cluster {
                mean_theta_dot: idx.iter().map(|&i| points[i].theta_dot).sum::<f64>() / n,
                mean_episode_length: idx.iter().map(|&i| points[i].episode_length).sum::<f64>() / n,
                members: idx.iter().map(|&i| points[i].task_index).collect(),
            }
        })
        .collect();
    Ok(Clustering { clusters })
}

/// Runs a uniform-random policy for `steps` on each cart-pole task.
pub fn cluster_points(tasks: &[TaskSpec], steps: u64, seed: u64) -> Result<Vec<ClusterPoint>> {
    tasks
        .iter()
        .map(|t| {
            let stats = random_policy_rollout(t, steps, &mut child_rng(seed, t.index as u64))?;
            match (stats.min_angle_theta_dot(), stats.mean_angle_episode_length()) {
                (Some(theta_dot), Some(episode_length)) => Ok(ClusterPoint {
                    task_index: t.index,
                    theta_dot,
                    episode_length,
                }),
                _ => Err(Error::Analysis(format!(
                    "task {} had no pole-angle failures in {steps} steps",
                    t.index
                ))),
            }
        })
        .collect()
}
