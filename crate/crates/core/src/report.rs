//! Report bundle persistence.
//!
//! Every command writes its outputs into one directory: CSV files with
//! self-describing headers plus `run.json`, a flat string-to-string map
//! with enough configuration to reproduce the run (grid, thresholds,
//! statistic conventions, software version). Floats are serialized in
//! Rust's shortest round-trip form, so re-reading a bundle recovers the
//! exact values. Nothing time- or host-dependent is written: a rerun with
//! the same configuration must produce byte-identical files.

use std::fs;
use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::{IlluminantEstimate, ParameterTuple};
use crate::image::to_chromaticity;
use crate::metrics::{DifferencePair, ErrorSummary};
use crate::tuning::{EvaluatedGrid, FoldChoice, MethodPairs, TuningResult};

pub struct ReportWriter {
    dir: PathBuf,
}

fn io_error(path: &Path, e: impl ToString) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

impl ReportWriter {
    /// Creates the output directory (and parents) if needed.
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn writer(&self, name: &str) -> Result<(PathBuf, csv::Writer<File>)> {
        let path = self.dir.join(name);
        let w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        Ok((path, w))
    }

    /// `estimates.csv`: one row per image with the raw estimate and its
    /// chromaticity. Cells stay empty where pooling found zero signal.
    pub fn write_estimates(
        &self,
        image_ids: &[String],
        estimates: &[Option<IlluminantEstimate>],
    ) -> Result<PathBuf> {
        let (path, mut w) = self.writer("estimates.csv")?;
        let mut rows = || -> csv::Result<()> {
            w.write_record(["image_id", "e_R", "e_G", "e_B", "r", "g", "b"])?;
            for (id, cell) in image_ids.iter().zip(estimates) {
                match cell {
                    Some(e) => {
                        let c = to_chromaticity(e);
                        w.write_record([
                            id.clone(),
                            e.red().to_string(),
                            e.green().to_string(),
                            e.blue().to_string(),
                            c.r.to_string(),
                            c.g.to_string(),
                            c.b.to_string(),
                        ])?;
                    }
                    None => {
                        w.write_record([id.as_str(), "", "", "", "", "", ""])?;
                    }
                }
            }
            w.flush()?;
            Ok(())
        };
        rows().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `errors.csv`: the full image-by-tuple error matrix in long form
    /// (`image_id,n,p,sigma,error_deg`), tuple-major. Zero-signal cells
    /// have an empty error field.
    pub fn write_errors(&self, eval: &EvaluatedGrid) -> Result<PathBuf> {
        let (path, mut w) = self.writer("errors.csv")?;
        let mut rows = || -> csv::Result<()> {
            w.write_record(["image_id", "n", "p", "sigma", "error_deg"])?;
            for (ti, tuple) in eval.grid().tuples().iter().enumerate() {
                for (id, error) in eval.image_ids().iter().zip(eval.tuple_row(ti)) {
                    w.write_record([
                        id.clone(),
                        tuple.n().to_string(),
                        float_cell(tuple.p()),
                        float_cell(tuple.sigma()),
                        error.map_or(String::new(), |e| e.to_string()),
                    ])?;
                }
            }
            w.flush()?;
            Ok(())
        };
        rows().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `summary.csv`: labeled five-statistic rows.
    pub fn write_summary(&self, rows: &[(String, ErrorSummary)]) -> Result<PathBuf> {
        let (path, mut w) = self.writer("summary.csv")?;
        let mut body = || -> csv::Result<()> {
            let mut header = vec!["label"];
            header.extend(ErrorSummary::COLUMNS);
            w.write_record(&header)?;
            for (label, s) in rows {
                let mut record = vec![label.clone()];
                record.extend(s.as_array().map(|v| v.to_string()));
                w.write_record(&record)?;
            }
            w.flush()?;
            Ok(())
        };
        body().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `tuning.csv`: the criterion value of every tuple (empty where the
    /// tuple was skipped) and a marker column for the chosen one.
    pub fn write_tuning(&self, result: &TuningResult) -> Result<PathBuf> {
        let (path, mut w) = self.writer("tuning.csv")?;
        let mut body = || -> csv::Result<()> {
            w.write_record(["n", "p", "sigma", "criterion", "chosen"])?;
            for (i, (tuple, value)) in result.per_tuple_log.iter().enumerate() {
                w.write_record([
                    tuple.n().to_string(),
                    float_cell(tuple.p()),
                    float_cell(tuple.sigma()),
                    value.map_or(String::new(), |v| v.to_string()),
                    if i == result.chosen_index { "1" } else { "0" }.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        };
        body().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `fold_choices.csv`: the tuple each cross-validation fold selected.
    pub fn write_fold_choices(&self, choices: &[FoldChoice]) -> Result<PathBuf> {
        let (path, mut w) = self.writer("fold_choices.csv")?;
        let mut body = || -> csv::Result<()> {
            w.write_record(["fold", "n", "p", "sigma", "training_median_deg"])?;
            for c in choices {
                w.write_record([
                    c.fold.to_string(),
                    c.tuple.n().to_string(),
                    float_cell(c.tuple.p()),
                    float_cell(c.tuple.sigma()),
                    c.criterion_value.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        };
        body().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `pairs.csv`: the pooled difference pairs, plot-ready.
    pub fn write_pairs(&self, pairs: &[DifferencePair]) -> Result<PathBuf> {
        let (path, mut w) = self.writer("pairs.csv")?;
        let mut body = || -> csv::Result<()> {
            w.write_record(["delta_sigma", "delta_m"])?;
            for p in pairs {
                w.write_record([p.delta_sigma.to_string(), p.delta_m.to_string()])?;
            }
            w.flush()?;
            Ok(())
        };
        body().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `method_stats.csv`: per method and tuple, the green-chromaticity
    /// std and the median angular error that feed the difference pairs.
    pub fn write_method_stats(&self, methods: &[MethodPairs]) -> Result<PathBuf> {
        let (path, mut w) = self.writer("method_stats.csv")?;
        let mut body = || -> csv::Result<()> {
            w.write_record(["method", "n", "p", "sigma", "green_std", "median_deg"])?;
            for m in methods {
                for (tuple, sigma, median) in &m.tuple_stats {
                    w.write_record([
                        m.method.clone(),
                        tuple.n().to_string(),
                        float_cell(tuple.p()),
                        float_cell(tuple.sigma()),
                        sigma.to_string(),
                        median.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            Ok(())
        };
        body().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// A chromaticity scatter (`image_id,r,g,b`), e.g. of ground truths or
    /// of one tuple's estimates. `name` picks the file, without extension.
    pub fn write_chromaticities(
        &self,
        name: &str,
        image_ids: &[String],
        estimates: &[Option<IlluminantEstimate>],
    ) -> Result<PathBuf> {
        let (path, mut w) = self.writer(&format!("{name}.csv"))?;
        let mut body = || -> csv::Result<()> {
            w.write_record(["image_id", "r", "g", "b"])?;
            for (id, cell) in image_ids.iter().zip(estimates) {
                match cell {
                    Some(e) => {
                        let c = to_chromaticity(e);
                        w.write_record([
                            id.clone(),
                            c.r.to_string(),
                            c.g.to_string(),
                            c.b.to_string(),
                        ])?;
                    }
                    None => w.write_record([id.as_str(), "", "", ""])?,
                }
            }
            w.flush()?;
            Ok(())
        };
        body().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `run.json`: a flat, sorted string map. Keys are serialized in
    /// lexicographic order so reruns are byte-identical.
    pub fn write_metadata(&self, entries: &[(String, String)]) -> Result<PathBuf> {
        let path = self.dir.join("run.json");
        let mut map = serde_json::Map::new();
        for (k, v) in entries {
            map.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(map))
            .expect("string map always serializes");
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn float_cell(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

/// Standard metadata shared by every command; callers append their own
/// command-specific entries.
pub fn base_metadata(command: &str) -> Vec<(String, String)> {
    [
        ("command", command),
        ("software_version", env!("CARGO_PKG_VERSION")),
        (
            "quantile_convention",
            "linear interpolation; midpoint median",
        ),
        (
            "quartile_share",
            "best25/worst25 average ceil(N/4) elements",
        ),
        ("combined_score", "geometric mean of the five statistics"),
        ("frame_policy", "full frames, no subsampling"),
    ]
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .to_vec()
}

/// Formats a tuple for metadata values.
pub fn tuple_cell(t: &ParameterTuple) -> String {
    t.to_string()
}
