//! Synthetic datasets and observation files.

mod io;
mod synthetic;

pub use io::{
    export_ground_truth, export_observations, export_poisoned, format_value, item_label, load_dataset,
    load_ground_truth, load_observations, read_aggregate, read_dataset, read_emotion, read_generic, read_weather,
    write_aggregate, write_malicious_values, write_observations, write_reliability, write_removed_workers, Dataset, DatasetSummary, Schema, EMOTION_REFERENCE,
    WEATHER_REFERENCE,
};
pub use synthetic::{generate_synthetic, GroundTruth, SyntheticConfig};
