//! Univariate labelled datasets and their CSV/JSON on-disk form.
//!
//! CSV layout: a header `label,v0,v1,...,v{N-1}` followed by one row per
//! sample. All rows share the same length.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthgen::{DatasetId, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_rate: Option<f64>,
    /// The `values.len()` points that follow `values` in time, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            sampling_rate: None,
            neighbor: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<DatasetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SynthConfig>,
    pub num_classes: usize,
}

impl DatasetMetadata {
    pub fn named(name: impl Into<String>, num_classes: usize) -> Self {
        Self {
            name: name.into(),
            dataset_id: None,
            seed: None,
            config: None,
            num_classes,
        }
    }
}

/// Equal-length univariate samples with class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<TimeSeries>,
    pub labels: Vec<usize>,
    pub metadata: DatasetMetadata,
}

impl LabeledDataset {
    pub fn new(samples: Vec<TimeSeries>, labels: Vec<usize>, metadata: DatasetMetadata) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if let Some(first) = samples.first() {
            let n = first.len();
            if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != n) {
                return Err(Error::Shape(format!(
                    "sample {i} has length {} but sample 0 has length {n}",
                    s.len()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= metadata.num_classes) {
            return Err(Error::Shape(format!(
                "label {bad} outside 0..{}",
                metadata.num_classes
            )));
        }
        Ok(Self {
            samples,
            labels,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.samples.first().map_or(0, TimeSeries::len)
    }

    pub fn num_classes(&self) -> usize {
        self.metadata.num_classes
    }

    pub fn values(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.values.as_slice())
    }

    /// Sub-dataset with the given sample indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.sample_len();
        let mut header = Vec::with_capacity(n + 1);
        header.push("label".to_string());
        header.extend((0..n).map(|i| format!("v{i}")));
        out.write_record(&header).map_err(csv_io)?;
        let mut row = Vec::with_capacity(n + 1);
        for (s, &label) in self.samples.iter().zip(&self.labels) {
            row.clear();
            row.push(label.to_string());
            // `{:?}` prints the shortest string that round-trips exactly.
            row.extend(s.values.iter().map(|v| format!("{v:?}")));
            out.write_record(&row).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses the CSV layout above. Rows, columns and labels are reported
    /// 1-based in errors, counting the header as row 1.
    pub fn read_csv<R: Read>(r: R, name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header = rdr
            .headers()
            .map_err(|e| Error::Csv {
                row: 1,
                column: 1,
                message: e.to_string(),
            })?
            .clone();
        check_header(&header)?;
        let n = header.len() - 1;

        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Csv {
                row,
                column: 1,
                message: e.to_string(),
            })?;
            if rec.len() != n + 1 {
                return Err(Error::Csv {
                    row,
                    column: rec.len().min(n + 1) + 1,
                    message: format!("expected {} fields, found {}", n + 1, rec.len()),
                });
            }
            let label: usize = rec[0].parse().map_err(|_| Error::Csv {
                row,
                column: 1,
                message: format!("label {:?} is not a non-negative integer", &rec[0]),
            })?;
            let mut values = Vec::with_capacity(n);
            for (j, field) in rec.iter().enumerate().skip(1) {
                let v: f64 = field.parse().map_err(|_| Error::Csv {
                    row,
                    column: j + 1,
                    message: format!("{field:?} is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row,
                        column: j + 1,
                        message: format!("{field:?} is not finite"),
                    });
                }
                values.push(v);
            }
            samples.push(TimeSeries::new(values));
            labels.push(label);
        }
        if samples.is_empty() {
            return Err(Error::Csv {
                row: 2,
                column: 1,
                message: "no data rows".into(),
            });
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        LabeledDataset::new(samples, labels, DatasetMetadata::named(name, num_classes))
    }

    /// Writes `path` and its sidecar (`path` with extension `json`).
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(File::create(path)?))?;
        let mut side = File::create(sidecar_path(path))?;
        serde_json::to_writer_pretty(&mut side, &self.metadata)?;
        side.write_all(b"\n")?;
        Ok(())
    }

    /// Reads `path`, taking metadata from the sidecar when present.
    pub fn load(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut ds = Self::read_csv(std::io::BufReader::new(File::open(path)?), &name)?;
        let side = sidecar_path(path);
        if side.exists() {
            let meta: DatasetMetadata = serde_json::from_reader(File::open(side)?)?;
            if let Some(&bad) = ds.labels.iter().find(|&&l| l >= meta.num_classes) {
                return Err(Error::Shape(format!(
                    "label {bad} outside the {} classes declared in the sidecar",
                    meta.num_classes
                )));
            }
            ds.metadata = meta;
        }
        Ok(ds)
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn check_header(header: &csv::StringRecord) -> Result<()> {
    if header.get(0) != Some("label") {
        return Err(Error::Csv {
            row: 1,
            column: 1,
            message: format!("first column must be `label`, found {:?}", header.get(0).unwrap_or("")),
        });
    }
    if header.len() < 2 {
        return Err(Error::Csv {
            row: 1,
            column: 2,
            message: "no value columns".into(),
        });
    }
    for (j, name) in header.iter().enumerate().skip(1) {
        if name == format!("v{}", j - 1) {
            continue;
        }
        if looks_multichannel(name) {
            return Err(Error::Csv {
                row: 1,
                column: j + 1,
                message: format!(
                    "column {name:?} looks like a multichannel layout; only univariate series \
                     are supported, export one channel as label,v0,...,v{{N-1}}"
                ),
            });
        }
        return Err(Error::Csv {
            row: 1,
            column: j + 1,
            message: format!("expected column `v{}`, found {name:?}", j - 1),
        });
    }
    Ok(())
}

/// Headers such as `c0_v3`, `ch1_v0`, `channel`, `x_v0`/`y_v0`.
fn looks_multichannel(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.starts_with("ch") || lower.contains("channel") || lower.contains('_') || lower.contains(':')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        LabeledDataset::new(
            vec![
                TimeSeries::new(vec![0.1, -2.5, 1e-17]),
                TimeSeries::new(vec![3.0, 0.0, 1.0 / 3.0]),
            ],
            vec![1, 0],
            DatasetMetadata::named("toy", 2),
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = toy();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,v0,v1,v2\n"));
        let back = LabeledDataset::read_csv(buf.as_slice(), "toy").unwrap();
        assert_eq!(back.samples, ds.samples);
        assert_eq!(back.labels, ds.labels);
    }

    #[test]
    fn bad_number_reports_row_and_column() {
        let text = "label,v0,v1\n0,1.0,2.0\n1,3.0,abc\n";
        match LabeledDataset::read_csv(text.as_bytes(), "x") {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_rejected() {
        let text = "label,v0,v1\n0,1.0\n";
        assert!(matches!(
            LabeledDataset::read_csv(text.as_bytes(), "x"),
            Err(Error::Csv { row: 2, .. })
        ));
    }

    #[test]
    fn multichannel_header_is_rejected_with_guidance() {
        let text = "label,c0_v0,c1_v0\n0,1,2\n";
        match LabeledDataset::read_csv(text.as_bytes(), "x") {
            Err(Error::Csv { row: 1, column: 2, message }) => {
                assert!(message.contains("univariate"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_label_column_is_rejected() {
        let text = "v0,v1\n1,2\n";
        assert!(matches!(
            LabeledDataset::read_csv(text.as_bytes(), "x"),
            Err(Error::Csv { row: 1, column: 1, .. })
        ));
    }

    #[test]
    fn unequal_lengths_are_rejected() {
        let r = LabeledDataset::new(
            vec![TimeSeries::new(vec![1.0]), TimeSeries::new(vec![1.0, 2.0])],
            vec![0, 0],
            DatasetMetadata::named("x", 1),
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }
}
