use std::collections::HashMap;

use polylife::envs::{make_cartpole_domain, make_task_sequences};
use polylife::learners::LearnerConfig;
use polylife::reuse::{
    run_lifetime, Library, LifetimeConfig, RunLog, RunLogWriter, SelectorConfig, TimeUnit,
};

#[test]
fn csv_log_reproduces_in_memory_lifetime_averages() {
    let tasks = make_cartpole_domain(27).unwrap();
    let seq = &make_task_sequences(27, 1, 12, 3)[0];
    let mut lib = Library::new(4, &LearnerConfig::UniformRandom, 4, 2, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seq.csv");
    let mut writer = RunLogWriter::new(std::fs::File::create(&path).unwrap()).unwrap();
    let (log, _) = run_lifetime(
        &tasks,
        seq,
        &mut lib,
        &SelectorConfig::adaptive(0.1),
        &LifetimeConfig::new(3_000, TimeUnit::Steps),
        3,
        &mut |r| writer.append(r),
    )
    .unwrap();
    writer.flush().unwrap();

    let reloaded = RunLog::load(&path).unwrap();
    assert_eq!(reloaded, log);

    let mut sums: HashMap<(usize, usize), (f64, u64)> = HashMap::new();
    for r in &reloaded.records {
        let e = sums.entry((r.policy_id, r.task_idx)).or_default();
        e.0 += r.episode_return;
        e.1 += r.steps;
    }
    for ((policy, task), (ret, steps)) in sums {
        let engine = lib.policies[policy].stats.lifetime_average(task).unwrap();
        assert!((engine - ret / steps as f64).abs() < 1e-9);
    }
}
