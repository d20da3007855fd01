//! Datasets, seeded synthetic generators, and stratified splitting.

mod csv_io;
mod dataset;
mod split;
mod synth;

pub use csv_io::{load_csv, read_csv, write_csv, CsvSchema};
pub use dataset::Dataset;
pub use split::{split, stratified_subset, SplitSpec, Splits};
pub use synth::{
    orthonormal_columns, planted_subspace_task, sample_noise_matrix, sample_spiked, PlantedTask,
    PlantedTaskSpec, Spike,
};
