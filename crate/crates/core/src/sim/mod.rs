//! Tandem-queue pipeline simulator.

pub mod config;
pub mod engine;
pub mod percentile;
pub mod state;
pub mod workload;

pub use config::{
    ResourceConfig, SimSettings, StageKind, StageSpec, WorkloadKind, WorkloadPattern, CPU_MIN_MILLICORES,
    MEMORY_MIN_MB, N_MAX, N_MIN,
};
pub use engine::{Simulator, StageTotals};
pub use percentile::sample_latency_percentile;
pub use state::{PipelineState, StageState, STAGE_FEATURES};
