//! Fixtures shared by the benchmarks.

use dagsched_core::gen::{random_dag, RandomDagParams};
use dagsched_core::{ClusterSpec, JobDag};

/// A random DAG with exactly `stages` stages of up to `max_tasks` tasks each.
pub fn fixed_size_dag(stages: usize, max_tasks: usize, seed: u64) -> JobDag {
    let params = RandomDagParams {
        min_stages: stages,
        max_stages: stages,
        min_tasks: 1,
        max_tasks,
        ..RandomDagParams::default()
    };
    random_dag(&params, seed)
}

pub fn bench_cluster() -> ClusterSpec {
    ClusterSpec::new(10, 4)
}
