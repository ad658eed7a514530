//! Experiment orchestration: config, seeded run loop, regret and cliff
//! accounting, CSV output.

mod analysis;
mod config;
mod run;

use std::path::Path;

pub use analysis::{
    arm_proportions, cliff_exposure, linear_trend, percent_reduction, regret_curves, summarize,
    task_regret, write_csv, AgentSummary, ArmProportion, CurvePoint, Moments, Summary, TaskRegret,
    Trend, Z_95,
};
pub use config::{
    BanditConfig, CoverSpec, EnvSpec, ExperimentConfig, GoalRule, TaskSpec, DEFAULT_TASK_COUNT,
};
pub use run::{
    choose_goals, prepare, read_records, repeat_cover, run, run_prepared, run_with, write_records,
    ExperimentRecord, Prepared, BANDIT_PREFIX,
};

use crate::error::{Error, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const TASK_REGRET_FILE: &str = "task_regret.csv";
pub const ARM_PROPS_FILE: &str = "arm_props.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

/// Writes records, derived tables, a summary and the resolved config into `dir`.
pub fn write_outputs(
    dir: impl AsRef<Path>,
    cfg: &ExperimentConfig,
    records: &[ExperimentRecord],
) -> Result<Summary> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(dir.join(RECORDS_FILE), records)?;
    write_csv(dir.join(CURVES_FILE), &regret_curves(records))?;
    write_csv(dir.join(TASK_REGRET_FILE), &task_regret(records))?;
    let props = arm_proportions(records);
    if !props.is_empty() {
        write_csv(dir.join(ARM_PROPS_FILE), &props)?;
    }
    let summary = summarize(records);
    let p = dir.join(SUMMARY_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&p, e))?;
    let p = dir.join(CONFIG_FILE);
    std::fs::write(&p, cfg.to_json()?).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}
