//! Scenario simulation, random-maze benchmarks and figure output.

mod bench;
mod maze;
mod render;
mod scenario;

use thiserror::Error;

pub use bench::{
    accuracy_experiment, accuracy_experiment_with, accuracy_on_maps, label_detections, AccuracyReport, DetectionLabel, LabelCounts,
    LabelKind, MapResult, BENCH_MAZE_CELLS,
};
pub use maze::{generate_maze, generate_maze_at, MAZE_RESOLUTION};
pub use render::render_svg;
pub use scenario::{
    builtin_map, builtin_scenario, run_scenario, run_scenario_on, CycleRow, Features, HumanScript, Jitter,
    PlannerKind, RunRecord, Scenario, BUILTIN_MAPS, RECORD_HEADER,
};

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Map(#[from] crate::gridmap::MapError),
    #[error("unknown built-in map '{0}'")]
    UnknownMap(String),
    #[error(transparent)]
    Scan(#[from] crate::scan::ScanError),
    #[error(transparent)]
    Plan(#[from] crate::plan::PlanError),
    #[error("{0}")]
    Invalid(String),
}
