//! Experiment orchestration: configuration, seeded run matrices and the
//! CSV / JSON artefacts they produce.

mod baselines;
mod campaign;
mod config;
mod report;

pub use baselines::{
    bandwidth_hz, baselines_csv, freqresp_csv, run_baselines, trace_csv, write_baselines, BaselineRow, FREQRESP_HI_HZ,
    FREQRESP_LO_HZ, FREQRESP_POINTS,
};
pub use campaign::{
    canonical_set_point, cell_seed, plant_cases, run_campaign, simulator, CampaignResult, Cell, PlantCase, SpreadRow,
    SummaryRow,
};
pub use config::{BaselineConfig, ExperimentConfig, PlantSelection};
pub use report::{
    emit_learning_curves, emit_summary_table, learning_curve_csv, summary_csv, summary_text, write_campaign,
    SUMMARY_CSV_HEADER,
};
