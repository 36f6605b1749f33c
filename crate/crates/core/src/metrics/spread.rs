/// Half the L1 distance between two distributions over the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Epsilon-greedy distribution with `1 - eps + eps / n` on `best`.
pub fn epsilon_greedy_distribution(best: usize, n_actions: usize, eps: f64) -> Vec<f64> {
    (0..n_actions)
        .map(|a| eps / n_actions as f64 + if a == best { 1.0 - eps } else { 0.0 })
        .collect()
}

/// Mean total-variation distance over all unordered policy pairs and all
/// observations. `dists[o][i]` is policy `i`'s action distribution for
/// observation `o`. Zero when fewer than two policies are given.
pub fn policy_spread(dists: &[Vec<Vec<f64>>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for per_policy in dists {
        for i in 0..per_policy.len() {
            for j in i + 1..per_policy.len() {
                total += total_variation(&per_policy[i], &per_policy[j]);
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}
