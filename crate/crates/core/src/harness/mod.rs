//! Experiment driver: configs, named scenarios, Monte Carlo campaigns and CSV
//! output.

mod campaign;
mod config;
mod csv;
mod presets;

pub use campaign::{
    effective_rate, environment_codebook, offline_codebook, point_setup, run_campaign, run_campaign_with, run_trials,
    theory_inputs, training_overhead, CampaignOptions, CampaignOutput, EffectiveRate, McStatistics, PointSetup,
    PointStats,
};
pub use config::{
    dbm_to_watts, default_users, load_config, parse_config, ris_shape, CsiMode, ExperimentConfig, Scheme, Sweep,
    SweepVar,
};
pub use csv::{campaign_csv, emit_csv, parse_csv, theory_csv, CsvRecord, CAMPAIGN_HEADER, THEORY_HEADER};
pub use presets::{paper_scale, scenario_presets, SCENARIOS};
