//! Experiment plumbing: seeded RNG, flat key-value configs, presets for the
//! two experiments, the ε-sweep and the chaos study, CSV and SVG output, and
//! the oracle suite behind `muon-flow check`.

pub mod checks;
pub mod config;
pub mod output;
pub mod presets;
pub mod rng;

pub use config::{parse_config, parse_kv, resolve, ExperimentConfig, Preset, RuleKind};
pub use output::{read_csv, write_csv, write_plot, Series};
pub use presets::{build_problem, exp1_problem, exp2_problem, run_preset, run_setting, RunReport, SettingReport};
pub use rng::{gaussian_matrix, RngStream};
