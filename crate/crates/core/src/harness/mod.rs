//! Synthetic streams, stream files, experiment driver and result files.

mod config;
mod experiment;
mod generators;
mod output;
mod stream_file;

pub use config::{ExperimentConfig, Generator, Method};
pub use experiment::{
    drive, query_times, reference, relative_error, rescale_to_unit_floor, run_experiment,
    sort_rows, CellFailure, Experiment, MetricRow, QueryPoint, RunOptions, Sketcher,
};
pub use generators::{gen_random_noisy, gen_uniform_random, generate, random_rotation, signal_weights};
pub use output::{
    emit_results, read_results, rows_to_csv, summarize, summary_path, summary_to_csv,
    write_summary, SummaryRow, ROW_HEADER, SUMMARY_HEADER,
};
pub use stream_file::{decode_stream, encode_stream, read_stream, write_stream, StreamHeader};

/// One column pair of a stream; timestamps start at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub t: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// The stream a config describes: read from `stream` when given, generated otherwise.
///
/// A file must match the configured dimensions and hold at least `n` records;
/// only the first `n` are used.
pub fn load_stream(cfg: &ExperimentConfig, stream: Option<&std::path::Path>) -> crate::Result<Vec<StreamRecord>> {
    use crate::Error;
    let Some(path) = stream else {
        return generate(cfg);
    };
    let (header, mut records) = read_stream(path)?;
    if (header.d_x, header.d_y) != (cfg.d_x, cfg.d_y) {
        return Err(Error::Config(format!(
            "{} holds ({}, {}) columns, config says ({}, {})",
            path.display(),
            header.d_x,
            header.d_y,
            cfg.d_x,
            cfg.d_y
        )));
    }
    if header.n < cfg.n {
        return Err(Error::Config(format!(
            "{} holds {} records, config needs {}",
            path.display(),
            header.n,
            cfg.n
        )));
    }
    records.truncate(cfg.n);
    Ok(records)
}
