//! On-disk JSON form of a [`JobDag`].
//!
//! ```json
//! {"version": 1,
//!  "job": {"id": "j1", "arrival": 0.0, "group": 0},
//!  "stages": [{"id": 0, "name": "map", "tasks": [{"dur": 2.0, "demand": [0.5, 0.1, 0, 0], "local": false}],
//!              "edges": [{"to": 1, "pattern": "a2a"}]}],
//!  "runtime": 12.5}
//! ```
//!
//! `name`, `local`, `edges`, `arrival`, `group` and `runtime` are optional.

use crate::dag::{EdgePattern, JobDag, StageEdge, StageId, StageSpec, TaskId, TaskSpec};
use crate::resource::ResourceVector;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DAG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("field `{field}`: {message} (line {line}, column {column})")]
    Parse {
        field: String,
        message: String,
        line: usize,
        column: usize,
    },
    #[error("schema version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DagFile {
    version: u32,
    job: JobHeader,
    stages: Vec<StageEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    runtime: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobHeader {
    id: String,
    #[serde(default)]
    arrival: f64,
    #[serde(default)]
    group: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageEntry {
    id: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    name: String,
    tasks: Vec<TaskEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    edges: Vec<EdgeEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskEntry {
    dur: f64,
    demand: Vec<f64>,
    #[serde(default)]
    local: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    to: u64,
    pattern: EdgePattern,
}

/// A DAG together with an optional recorded runtime.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedDag {
    pub dag: JobDag,
    pub runtime: Option<f64>,
}

pub fn from_json_str(text: &str) -> Result<LoadedDag, JsonError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: DagFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        JsonError::Parse {
            field,
            message: inner.to_string(),
            line: inner.line(),
            column: inner.column(),
        }
    })?;
    if file.version != DAG_SCHEMA_VERSION {
        return Err(JsonError::Version {
            found: file.version,
            expected: DAG_SCHEMA_VERSION,
        });
    }
    let position = |raw: u64| {
        file.stages
            .iter()
            .position(|s| s.id == raw)
            .unwrap_or(file.stages.len() + raw as usize)
    };
    let mut stages = Vec::with_capacity(file.stages.len());
    let mut tasks = Vec::new();
    for (i, entry) in file.stages.iter().enumerate() {
        let mut ids = Vec::with_capacity(entry.tasks.len());
        for t in &entry.tasks {
            let id = TaskId(tasks.len());
            ids.push(id);
            tasks.push(TaskSpec {
                id,
                stage: StageId(i),
                duration: t.dur,
                demand: ResourceVector::new(t.demand.clone()),
                locality_sensitive: t.local,
            });
        }
        stages.push(StageSpec {
            id: StageId(i),
            name: entry.name.clone(),
            tasks: ids,
            out_edges: entry
                .edges
                .iter()
                .map(|e| StageEdge {
                    to: StageId(position(e.to)),
                    pattern: e.pattern,
                })
                .collect(),
        });
    }
    let dag = JobDag::from_parts(file.job.id, file.job.arrival, file.job.group, stages, tasks);
    Ok(LoadedDag {
        dag,
        runtime: file.runtime,
    })
}

pub fn to_json_string(dag: &JobDag, runtime: Option<f64>) -> String {
    let file = DagFile {
        version: DAG_SCHEMA_VERSION,
        job: JobHeader {
            id: dag.id.clone(),
            arrival: dag.arrival,
            group: dag.group,
        },
        stages: dag
            .stages()
            .iter()
            .map(|s| StageEntry {
                id: s.id.0 as u64,
                name: s.name.clone(),
                tasks: s
                    .tasks
                    .iter()
                    .map(|&t| {
                        let t = dag.task(t);
                        TaskEntry {
                            dur: t.duration,
                            demand: t.demand.as_slice().to_vec(),
                            local: t.locality_sensitive,
                        }
                    })
                    .collect(),
                edges: s
                    .out_edges
                    .iter()
                    .map(|e| EdgeEntry {
                        to: e.to.0 as u64,
                        pattern: e.pattern,
                    })
                    .collect(),
            })
            .collect(),
        runtime,
    };
    serde_json::to_string_pretty(&file).expect("dag serializes")
}

pub fn load_json(path: impl AsRef<Path>) -> Result<LoadedDag, JsonError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| JsonError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json_str(&text)
}

pub fn save_json(dag: &JobDag, path: impl AsRef<Path>) -> Result<(), JsonError> {
    let path = path.as_ref();
    std::fs::write(path, to_json_string(dag, None)).map_err(|source| JsonError::Io {
        path: path.to_path_buf(),
        source,
    })
}
