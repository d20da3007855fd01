use std::io::Write;

use serde::Serialize;

use super::eigen::Spectrum;
use super::fit::HistogramFit;
use super::laws::MpModel;
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidState(format!("csv write failed: {e}"))
}

/// `index,eigenvalue`, one row per eigenvalue in descending order.
pub fn write_spectrum_csv<W: Write>(spectrum: &Spectrum, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "eigenvalue"]).map_err(csv_err)?;
    for (i, v) in spectrum.eigenvalues().iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidState(e.to_string()))
}

/// `bin_left,bin_right,empirical,model`, one row per bin.
pub fn write_histogram_csv<W: Write>(fit: &HistogramFit, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "empirical", "model"])
        .map_err(csv_err)?;
    for (i, edges) in fit.bin_edges.windows(2).enumerate() {
        w.write_record([
            edges[0].to_string(),
            edges[1].to_string(),
            fit.empirical_density[i].to_string(),
            fit.model_density[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidState(e.to_string()))
}

#[derive(Serialize)]
struct MpJson<'a> {
    #[serde(flatten)]
    model: &'a MpModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
}

/// JSON object with `sigma2`, `q`, `lambda_minus`, `lambda_plus` and, when
/// given, the spike count `k`.
pub fn write_mp_model_json<W: Write>(model: &MpModel, k: Option<usize>, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &MpJson { model, k })
        .map_err(|e| Error::InvalidState(format!("json write failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_csv_layout() {
        let s = Spectrum::new(vec![1.0, 2.5], 4).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,eigenvalue\n0,2.5\n1,1\n");
    }

    #[test]
    fn mp_json_keys() {
        let m = MpModel::new(1.0, 0.25).unwrap();
        let mut buf = Vec::new();
        write_mp_model_json(&m, Some(3), &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["sigma2"], 1.0);
        assert_eq!(v["q"], 0.25);
        assert_eq!(v["lambda_minus"], 0.25);
        assert_eq!(v["lambda_plus"], 2.25);
        assert_eq!(v["k"], 3);
    }
}
