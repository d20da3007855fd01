use std::io::Write;

use super::ablation::AblationRow;
use super::engine::IterationRecord;
use crate::error::{Error, Result};

const HISTORY_HEADER: [&str; 10] = [
    "iteration",
    "layer_id",
    "d",
    "k",
    "sigma2",
    "lambda_plus",
    "acc_before",
    "acc_after",
    "params_before",
    "params_after",
];

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidState(format!("csv write failed: {e}"))
}

/// One row per record; a header-only file when `history` is empty.
pub fn write_history_csv<W: Write>(history: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HISTORY_HEADER).map_err(csv_err)?;
    for r in history {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidState(e.to_string()))
}

/// `quantile,final_accuracy,reduction_fraction`.
pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["quantile", "final_accuracy", "reduction_fraction"])
        .map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidState(e.to_string()))
}
