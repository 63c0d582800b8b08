//! The 34-column feature table: 16 shape, 14 surface and 4 SBR features.

use crate::io::{Group, SbrRecord};
use crate::scalar::Real;
use crate::shape::asymmetry_index;
use std::io::{Read, Write};
use thiserror::Error;

pub const SHAPE_FEATURES: usize = 16;
pub const SURFACE_FEATURES: usize = 14;
pub const IMAGE_FEATURES: usize = SHAPE_FEATURES + SURFACE_FEATURES;
pub const SBR_FEATURES: usize = 4;
pub const ALL_FEATURES: usize = IMAGE_FEATURES + SBR_FEATURES;

/// Column identifiers in their fixed order; position + 1 is the feature number.
pub const FEATURE_NAMES: [&str; ALL_FEATURES] = [
    "area",
    "major_axis_length",
    "minor_axis_length",
    "aspect_ratio",
    "eccentricity",
    "equivalent_diameter",
    "orientation",
    "roundness",
    "area_ai",
    "major_axis_length_ai",
    "minor_axis_length_ai",
    "aspect_ratio_ai",
    "eccentricity_ai",
    "equivalent_diameter_ai",
    "orientation_ai",
    "roundness_ai",
    "p00",
    "p10",
    "p01",
    "p20",
    "p11",
    "p02",
    "p30",
    "p21",
    "p12",
    "p03",
    "se",
    "r2",
    "r2_adj",
    "rmse",
    "caudate_sbr",
    "putamen_sbr",
    "caudate_sbr_ai",
    "putamen_sbr_ai",
];

/// Version tag of the column layout.
pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Shape,
    Surface,
    Sbr,
}

pub fn feature_kind(index: usize) -> FeatureKind {
    if index < SHAPE_FEATURES {
        FeatureKind::Shape
    } else if index < IMAGE_FEATURES {
        FeatureKind::Surface
    } else {
        FeatureKind::Sbr
    }
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// Caudate SBR, putamen SBR (left/right means) and their asymmetry indices.
pub fn sbr_features(rec: &SbrRecord) -> Result<[f64; SBR_FEATURES], crate::shape::ShapeError> {
    Ok([
        (rec.caudate_left + rec.caudate_right) / 2.0,
        (rec.putamen_left + rec.putamen_right) / 2.0,
        asymmetry_index(rec.caudate_left, rec.caudate_right)?,
        asymmetry_index(rec.putamen_left, rec.putamen_right)?,
    ])
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow<T> {
    pub subject_id: String,
    pub label: Group,
    pub values: Vec<T>,
}

/// Rows keyed by subject with either the 30 image features or all 34.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<T> {
    pub columns: Vec<String>,
    pub rows: Vec<FeatureRow<T>>,
}

impl<T: Real> FeatureTable<T> {
    pub fn new(with_sbr: bool) -> Self {
        let n = if with_sbr { ALL_FEATURES } else { IMAGE_FEATURES };
        Self {
            columns: FEATURE_NAMES[..n].iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn has_sbr(&self) -> bool {
        self.columns.len() == ALL_FEATURES
    }

    pub fn push(&mut self, subject_id: String, label: Group, values: Vec<T>) {
        assert_eq!(values.len(), self.columns.len(), "row width");
        self.rows.push(FeatureRow {
            subject_id,
            label,
            values,
        });
    }

    pub fn labels(&self) -> Vec<Group> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn matrix(&self) -> Vec<Vec<T>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    /// Writes `subject_id,label,<features>` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TableError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["subject_id".to_string(), "label".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.subject_id.clone(), r.label.to_string()];
            rec.extend(r.values.iter().map(|v| format!("{:.16e}", v.as_f64())));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf8 csv")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, TableError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "subject_id" || header[1] != "label" {
            return Err(TableError::Header(header.join(",")));
        }
        let columns = header[2..].to_vec();
        let known = columns.len() == IMAGE_FEATURES || columns.len() == ALL_FEATURES;
        if !known || columns.iter().zip(FEATURE_NAMES).any(|(c, n)| c != n) {
            return Err(TableError::Header(header.join(",")));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(TableError::Row {
                    row,
                    reason: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            let label: Group = rec[1].parse().map_err(|reason| TableError::Row { row, reason })?;
            let mut values = Vec::with_capacity(columns.len());
            for (k, s) in rec.iter().skip(2).enumerate() {
                let v: f64 = s.parse().map_err(|_| TableError::Row {
                    row,
                    reason: format!("{}: {s:?} is not a number", columns[k]),
                })?;
                if !v.is_finite() {
                    return Err(TableError::Row {
                        row,
                        reason: format!("{} is not finite", columns[k]),
                    });
                }
                values.push(T::lit(v));
            }
            rows.push(FeatureRow {
                subject_id: rec[0].to_string(),
                label,
                values,
            });
        }
        Ok(Self { columns, rows })
    }
}
