use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;

/// Ordered task indices, one per task-block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSequence {
    pub id: usize,
    pub seed: u64,
    pub tasks: Vec<usize>,
}

/// Sequence 0 draws each block's task uniformly; sequence `n` shifts it to
/// `(task + n) mod n_tau`, so every block index sees each task once across
/// `n_tau` sequences.
pub fn make_task_sequences(
    n_tau: usize,
    n_sequences: usize,
    n_blocks: usize,
    seed: u64,
) -> Vec<TaskSequence> {
    assert!(n_tau > 0, "need at least one task");
    let mut rng = rng_from_seed(seed);
    let base: Vec<usize> = (0..n_blocks).map(|_| rng.random_range(0..n_tau)).collect();
    (0..n_sequences)
        .map(|n| TaskSequence {
            id: n,
            seed,
            tasks: base.iter().map(|&i| (i + n) % n_tau).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shift_and_slice() {
        let seqs = make_task_sequences(18, 18, 40, 5);
        assert_eq!(seqs[1].tasks[0], (seqs[0].tasks[0] + 1) % 18);
        for b in 0..40 {
            let mut slice: Vec<_> = seqs.iter().map(|s| s.tasks[b]).collect();
            slice.sort_unstable();
            assert_eq!(slice, (0..18).collect::<Vec<_>>());
        }
        assert_eq!(seqs, make_task_sequences(18, 18, 40, 5));
    }

    proptest! {
        #[test]
        fn every_sequence_is_a_shift(n_tau in 1usize..40, blocks in 0usize..50, seed in any::<u64>()) {
            let seqs = make_task_sequences(n_tau, n_tau, blocks, seed);
            for s in &seqs {
                for b in 0..blocks {
                    prop_assert_eq!(s.tasks[b], (seqs[0].tasks[b] + s.id) % n_tau);
                }
            }
        }
    }
}
