//! Instance generators: small worked examples, adversarial families and
//! seeded random DAGs and workloads.

use crate::dag::{DagBuilder, EdgePattern, JobDag, StageId, TaskDraft};
use crate::resource::ResourceVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("parameter {name} = {value} out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
}

fn check(ok: bool, name: &'static str, value: f64, expected: &'static str) -> Result<(), GenError> {
    if ok {
        Ok(())
    } else {
        Err(GenError::OutOfRange {
            name,
            value,
            expected,
        })
    }
}

/// Five tasks on two resources where critical-path order and dot-product
/// packing both serialize the three long tasks, while running the two short
/// tasks first lets all long tasks overlap.
///
/// Long tasks t0, t2, t4 together fill both resources exactly; each short
/// task (t1, t3) conflicts with t0 and with the other short task, and with
/// the long child of the other chain.
pub fn two_chain_example(eps: f64) -> JobDag {
    let e = eps / 2.0;
    let mut b = DagBuilder::new("two-chain");
    b.uniform_stage("t0", 1, 1.0, [0.4, 0.5]);
    let t1 = b.uniform_stage("t1", 1, e, [0.85, 0.0]);
    let t2 = b.uniform_stage("t2", 1, 1.0 - 4.0 * e, [0.4, 0.5]);
    let t3 = b.uniform_stage("t3", 1, e, [0.2, 0.6]);
    let t4 = b.uniform_stage("t4", 1, 1.0 - 2.0 * e, [0.2, 0.0]);
    b.a2a(t1, t2);
    b.a2a(t3, t4);
    b.build()
}

/// Eight-stage job on two resources whose partition bound exceeds both the
/// critical path and the total work. `eps` sizes the tiny demands.
pub fn bound_example(eps: f64) -> JobDag {
    let mut b = DagBuilder::new("bound-example");
    let small = [0.0, eps];
    let s1 = b.uniform_stage("S1", 1, 1.0, small);
    let s2 = b.uniform_stage("S2", 1, 1.0, small);
    let s3 = b.uniform_stage("S3", 1, 2.0, small);
    let s4 = b.uniform_stage("S4", 5, 1.0, [0.6, 0.0]);
    let s5 = b.uniform_stage("S5", 1, 1.0, small);
    let s6 = b.uniform_stage("S6", 1, 1.0, small);
    let s7 = b.uniform_stage("S7", 3, 1.0, [0.6, 0.0]);
    let s8 = b.uniform_stage("S8", 1, 1.0, small);
    b.edge(s1, s3, EdgePattern::OneToOne);
    b.a2a(s2, s3);
    for s in [s4, s5] {
        b.a2a(s1, s);
        b.a2a(s2, s);
    }
    for s in [s3, s4, s5] {
        b.a2a(s, s6);
    }
    b.a2a(s6, s7);
    b.a2a(s6, s8);
    b.build()
}

/// `n` unit-length tasks of demand `1/n` that could all run together, each
/// but the first gated by a short wide task that conflicts with every long
/// task. Zero-demand padding chains below the long tasks order critical
/// paths so that long and wide tasks alternate under strict critical-path
/// priority.
pub fn cp_adversarial(n: usize, eps: f64) -> Result<JobDag, GenError> {
    check(n >= 2, "n", n as f64, "n >= 2")?;
    check(
        eps > 0.0 && eps < 1.0 / n as f64,
        "eps",
        eps,
        "0 < eps < 1/n",
    )?;
    let mut b = DagBuilder::new(format!("cp-adversarial-{n}"));
    let longs: Vec<StageId> = (0..n)
        .map(|i| b.uniform_stage(format!("long{i}"), 1, 1.0, [1.0 / n as f64]))
        .collect();
    for (i, &long) in longs.iter().enumerate().skip(1) {
        let w = b.uniform_stage(format!("wide{i}"), 1, eps, [1.0 - eps]);
        b.a2a(w, long);
    }
    for (i, &l) in longs.iter().enumerate() {
        let mut prev = l;
        for j in 0..2 * (n - 1 - i) {
            let p = b.uniform_stage(format!("pad{i}.{j}"), 1, eps, [0.0]);
            b.a2a(prev, p);
            prev = p;
        }
    }
    Ok(b.build())
}

/// Long tasks of every group fit together, yet a dot-product packer runs
/// them in `2d - 2` rounds: each later long task hides behind a chain of
/// wide tasks, one per earlier round, that cannot overlap that round's
/// long tasks. A zero-demand gate keeps the first wide tasks from
/// preempting the first round.
pub fn packer_adversarial(d: usize, eps: f64) -> Result<JobDag, GenError> {
    check(d >= 2, "d", d as f64, "d >= 2")?;
    check(eps > 0.0 && eps < 0.05, "eps", eps, "0 < eps < 0.05")?;
    let side = eps / (2.0 * (d - 1) as f64);
    let long_demand = |g: usize| {
        let mut v = vec![side; d];
        v[g] = 0.5 - eps / 2.0;
        ResourceVector::new(v)
    };
    let mut rounds: Vec<Vec<(char, usize)>> =
        vec![vec![('A', 0), ('B', 0)], vec![('A', 1), ('B', 1)]];
    if d == 3 {
        rounds.push(vec![('A', 2), ('B', 2)]);
    } else if d > 3 {
        rounds.extend((2..d).map(|g| vec![('A', g)]));
        rounds.extend((2..d).map(|g| vec![('B', g)]));
    }
    let group_of_round: Vec<usize> = rounds.iter().map(|r| r[0].1).collect();
    let mut b = DagBuilder::new(format!("packer-adversarial-{d}"));
    let gate = b.uniform_stage("gate", 1, eps, ResourceVector::zeros(d));
    for (k, round) in rounds.iter().enumerate() {
        for &(name, g) in round {
            let long = b.uniform_stage(format!("{name}{g}"), 1, 1.0, long_demand(g));
            if k == 0 {
                continue;
            }
            let mut prev = gate;
            for (j, &res) in group_of_round.iter().take(k).enumerate() {
                let w = b.uniform_stage(
                    format!("wide{name}{g}.{}", j + 1),
                    1,
                    eps,
                    ResourceVector::unit(d, res, 0.5 + eps),
                );
                b.a2a(prev, w);
                prev = w;
            }
            b.a2a(prev, long);
        }
    }
    Ok(b.build())
}

/// `d` groups of `k` unit tasks, group `i` needing all of resource `i`. Only
/// the last task of each group unlocks the next group.
pub fn structure_blind(d: usize, k: usize) -> Result<JobDag, GenError> {
    check(d >= 2, "d", d as f64, "d >= 2")?;
    check(k >= 2, "k", k as f64, "k >= 2")?;
    let mut b = DagBuilder::new(format!("structure-blind-{d}x{k}"));
    let mut prev_red: Option<StageId> = None;
    for g in 0..d {
        let demand = ResourceVector::unit(d, g, 1.0);
        let plain = b.uniform_stage(format!("g{g}"), k - 1, 1.0, demand.clone());
        let red = b.uniform_stage(format!("g{g}.red"), 1, 1.0, demand);
        if let Some(r) = prev_red {
            b.a2a(r, plain);
            b.a2a(r, red);
        }
        prev_red = Some(red);
    }
    Ok(b.build())
}

/// Shape and distribution knobs for [`random_dag`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomDagParams {
    pub min_stages: usize,
    pub max_stages: usize,
    pub min_tasks: usize,
    pub max_tasks: usize,
    pub max_fan_in: usize,
    pub max_fan_out: usize,
    pub duration_mean: f64,
    pub duration_cov: f64,
    pub demand_mean: f64,
    pub demand_cov: f64,
    /// Relative per-task spread around the stage's duration.
    pub jitter: f64,
    /// Chance that a single-parent stage copies its parent's width and
    /// joins it one-to-one.
    pub one_to_one: f64,
    pub locality: f64,
    pub dims: usize,
}

impl Default for RandomDagParams {
    fn default() -> Self {
        Self {
            min_stages: 3,
            max_stages: 8,
            min_tasks: 1,
            max_tasks: 6,
            max_fan_in: 2,
            max_fan_out: 2,
            duration_mean: 10.0,
            duration_cov: 0.5,
            demand_mean: 0.2,
            demand_cov: 0.6,
            jitter: 0.1,
            one_to_one: 0.2,
            locality: 0.0,
            dims: crate::resource::DEFAULT_DIMS,
        }
    }
}

fn lognormal(mean: f64, cov: f64) -> LogNormal<f64> {
    let sigma2 = (1.0 + cov * cov).ln();
    LogNormal::new(mean.ln() - sigma2 / 2.0, sigma2.sqrt()).expect("finite lognormal parameters")
}

/// A seeded random job; identical parameters and seed give identical output.
pub fn random_dag(params: &RandomDagParams, seed: u64) -> JobDag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_dag_with(params, &mut rng, format!("random-{seed}"))
}

fn random_dag_with(p: &RandomDagParams, rng: &mut impl Rng, id: String) -> JobDag {
    let durations = lognormal(p.duration_mean, p.duration_cov);
    let demands = lognormal(p.demand_mean, p.demand_cov);
    let stage_count = rng.random_range(p.min_stages..=p.max_stages.max(p.min_stages));
    let mut b = DagBuilder::new(id);
    let mut widths: Vec<usize> = Vec::with_capacity(stage_count);
    let mut fan_out: Vec<usize> = Vec::with_capacity(stage_count);
    for s in 0..stage_count {
        let open: Vec<usize> = (0..s).filter(|&i| fan_out[i] < p.max_fan_out).collect();
        let mut chosen: Vec<usize> = Vec::new();
        if !open.is_empty() && p.max_fan_in > 0 {
            let k = rng.random_range(1..=p.max_fan_in.min(open.len()));
            chosen = sample(rng, open.len(), k)
                .into_iter()
                .map(|i| open[i])
                .collect();
            chosen.sort_unstable();
        }
        let copy_parent = chosen.len() == 1 && rng.random_bool(p.one_to_one.clamp(0.0, 1.0));
        let width = if copy_parent {
            widths[chosen[0]]
        } else {
            rng.random_range(p.min_tasks..=p.max_tasks.max(p.min_tasks))
        };
        let base: f64 = durations.sample(rng);
        let demand: Vec<f64> = (0..p.dims).map(|_| demands.sample(rng).min(1.0)).collect();
        let local = rng.random_bool(p.locality.clamp(0.0, 1.0));
        let drafts = (0..width)
            .map(|_| {
                let spread = if p.jitter > 0.0 {
                    1.0 + p.jitter * rng.random_range(-1.0..=1.0)
                } else {
                    1.0
                };
                TaskDraft::new((base * spread).max(1e-3), demand.clone()).local(local)
            })
            .collect();
        let id = b.stage(format!("s{s}"), drafts);
        for &parent in &chosen {
            let pattern = if copy_parent {
                EdgePattern::OneToOne
            } else {
                EdgePattern::AllToAll
            };
            b.edge(StageId(parent), id, pattern);
            fan_out[parent] += 1;
        }
        widths.push(width);
        fan_out.push(0);
    }
    b.build()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub jobs: usize,
    /// Mean of the exponential inter-arrival time.
    pub arrival_mean: f64,
    pub groups: u32,
    pub dag: RandomDagParams,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            jobs: 20,
            arrival_mean: 25.0,
            groups: 2,
            dag: RandomDagParams::default(),
        }
    }
}

/// Jobs with Poisson arrivals, assigned to groups round-robin.
pub fn random_workload(params: &WorkloadParams, seed: u64) -> Vec<JobDag> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = Exp::new(1.0 / params.arrival_mean.max(1e-9)).expect("positive rate");
    let mut now = 0.0;
    (0..params.jobs)
        .map(|i| {
            let dag = random_dag_with(&params.dag, &mut rng, format!("job{i}"));
            let arrival = now;
            now += gaps.sample(&mut rng);
            dag.with_arrival(arrival)
                .with_group(i as u32 % params.groups.max(1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ClusterSpec;
    use crate::dag::validate;

    #[test]
    fn random_is_deterministic() {
        let p = RandomDagParams {
            min_stages: 5,
            max_stages: 5,
            ..Default::default()
        };
        assert_eq!(random_dag(&p, 1), random_dag(&p, 1));
        assert_ne!(random_dag(&p, 1), random_dag(&p, 2));
    }

    #[test]
    fn unit_fan_gives_chain() {
        let p = RandomDagParams {
            min_stages: 6,
            max_stages: 6,
            max_fan_in: 1,
            max_fan_out: 1,
            ..Default::default()
        };
        let dag = random_dag(&p, 3);
        for s in dag.stage_ids().skip(1) {
            assert_eq!(dag.stage_parents(s), &[StageId(s.0 - 1)]);
        }
    }

    #[test]
    fn generators_validate() {
        let c = |d| ClusterSpec::new(1, d);
        assert!(validate(&two_chain_example(0.01), &c(2)).is_ok());
        assert!(validate(&bound_example(0.01), &c(2)).is_ok());
        assert!(validate(&cp_adversarial(4, 0.01).unwrap(), &c(1)).is_ok());
        for d in 2..6 {
            assert!(validate(&packer_adversarial(d, 0.01).unwrap(), &c(d)).is_ok());
        }
        assert!(validate(&structure_blind(3, 4).unwrap(), &c(3)).is_ok());
        for seed in 0..20 {
            assert!(validate(&random_dag(&RandomDagParams::default(), seed), &c(4)).is_ok());
        }
    }

    #[test]
    fn parameter_checks() {
        assert!(cp_adversarial(1, 0.01).is_err());
        assert!(cp_adversarial(4, 0.5).is_err());
        assert!(packer_adversarial(1, 0.01).is_err());
        assert!(structure_blind(3, 1).is_err());
    }

    #[test]
    fn packer_round_count() {
        // Gate, 8 long tasks and 0+0+1+1+2+2+3+3+4+4... wide tasks.
        let dag = packer_adversarial(4, 0.01).unwrap();
        let longs = dag.tasks().iter().filter(|t| t.duration == 1.0).count();
        assert_eq!(longs, 8);
        let wides = dag.task_count() - 1 - longs;
        // Rounds 2..=6 hold 2,1,1,1,1 longs with 1,2,3,4,5 wides each.
        assert_eq!(wides, 2 + 2 + 3 + 4 + 5);
    }

    #[test]
    fn workload_arrivals_increase() {
        let jobs = random_workload(&WorkloadParams::default(), 4);
        assert_eq!(jobs.len(), 20);
        assert!(jobs.windows(2).all(|w| w[0].arrival <= w[1].arrival));
        assert_eq!(jobs[3].group, 1);
    }
}
