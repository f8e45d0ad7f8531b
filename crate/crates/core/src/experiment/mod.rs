//! Configuration-driven experiment runner: stages, artifacts and the run manifest.

mod config;
mod manifest;
mod report;
mod run;

pub use config::{
    ClassicalSection, ExperimentConfig, Family, FitSection, HjSection, LatticeSection, ModifierKind,
    ModifierSection, OutputSection, PacketSection, PotentialSection, ScheduleSection, Tolerances,
    WindowSection,
};
pub use manifest::{Certificate, Observation, RunManifest, SlopeRow, StageRecord, MANIFEST_FILE};
pub use report::{build_report, report_path, write_report, RunReport};
pub use run::{exit_code_for, render_summary, run, RunOutcome, Stage};
