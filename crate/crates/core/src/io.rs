//! CSV sample ingestion and the JSON documents written by the CLI.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EntropyEstimate;
use crate::geometry::{BoundingBox, Rotation, SampleSet};
use crate::partition::{bin_count, Partition, SplitPlane};

/// Parses comma-separated floats, one sample per row. Blank lines are
/// skipped; every row must have the same number of columns.
pub fn parse_samples_csv<R: Read>(reader: R, has_header: bool) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut data = Vec::new();
    let mut dims = None;
    let mut record = csv::StringRecord::new();
    let mut rows = 0usize;
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                return Err(Error::Parse {
                    line,
                    message: e.to_string(),
                });
            }
        }
        let line = record.position().map_or(line, |p| p.line());
        let expected = *dims.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} columns, found {}", record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: cannot parse {field:?} as a number", col + 1),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: non-finite value {field:?}", col + 1),
                });
            }
            data.push(x);
        }
        rows += 1;
    }

    let dims = match dims {
        Some(d) if d > 0 => d,
        _ => {
            return Err(Error::Parse {
                line: 0,
                message: "no samples".into(),
            })
        }
    };
    if rows < 2 {
        return Err(Error::TooFewSamples(rows));
    }
    SampleSet::new(data, dims)
}

/// Writes samples as CSV with shortest round-trip float formatting.
pub fn write_samples_csv(samples: &SampleSet) -> String {
    let mut out = String::new();
    for p in samples.points() {
        let row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Output of the `estimate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDocument {
    pub method: String,
    pub entropy_bits: f64,
    pub depth: usize,
    pub bin_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rotation_angle_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rotation_mrp: Option<[f64; 3]>,
    pub degenerate_bins: usize,
    pub n: usize,
    pub d: usize,
}

impl EstimateDocument {
    pub fn new(estimate: &EntropyEstimate, samples: &SampleSet) -> Self {
        Self {
            method: estimate.method.to_string(),
            entropy_bits: estimate.value,
            depth: estimate.depth,
            bin_count: estimate.bin_count,
            rotation_angle_rad: estimate.rotation.map(|r| rotation_angle(&r)),
            rotation_mrp: estimate.rotation.map(|r| r.mrp()),
            degenerate_bins: estimate.degenerate_bins,
            n: samples.len(),
            d: samples.dims(),
        }
    }
}

/// Signed angle for planar rotations, unsigned otherwise.
pub fn rotation_angle(r: &Rotation) -> f64 {
    r.planar_angle().unwrap_or_else(|_| r.angle())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDocument {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub count: usize,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationDocument {
    pub angle_rad: f64,
    pub mrp: [f64; 3],
    /// Centre of rotation; rotated points are `M (x - barycentre)`.
    pub barycentre: Vec<f64>,
}

/// Output of the `dump-partition` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub support: BoundingBox,
    pub depth: usize,
    pub dims: usize,
    pub cycle_order: Vec<usize>,
    pub n: usize,
    pub bins: Vec<BinDocument>,
    pub splits: Vec<SplitPlane>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rotation: Option<RotationDocument>,
}

impl PartitionDocument {
    pub fn new(p: &Partition, rotation: Option<RotationDocument>) -> Self {
        Self {
            support: p.support().clone(),
            depth: p.depth(),
            dims: p.dims(),
            cycle_order: p.cycle_order().to_vec(),
            n: p.sample_count(),
            bins: p
                .bins()
                .iter()
                .map(|b| BinDocument {
                    lower: b.bounds.lower.clone(),
                    upper: b.bounds.upper.clone(),
                    count: b.count,
                    volume: b.volume,
                })
                .collect(),
            splits: p.splits().to_vec(),
            rotation,
        }
    }

    /// Structural checks on a decoded document.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let d = self.dims;
        if d == 0 || self.support.lower.len() != d || self.support.upper.len() != d {
            return bad(format!("support does not have {d} dimensions"));
        }
        BoundingBox::new(self.support.lower.clone(), self.support.upper.clone())?;
        let mut seen = vec![false; d];
        if self.cycle_order.len() != d
            || !self.cycle_order.iter().all(|&k| k < d && !std::mem::replace(&mut seen[k], true))
        {
            return Err(Error::InvalidCycleOrder {
                order: self.cycle_order.clone(),
                dims: d,
            });
        }
        let b = bin_count(self.depth, d)?;
        if self.bins.len() != b {
            return bad(format!("expected {b} bins, found {}", self.bins.len()));
        }
        if self.splits.len() != b - 1 {
            return bad(format!("expected {} splits, found {}", b - 1, self.splits.len()));
        }
        if self.splits.iter().any(|s| s.dim >= d || !s.coordinate.is_finite()) {
            return bad("split plane out of range".into());
        }
        let mut total = 0usize;
        for bin in &self.bins {
            if bin.lower.len() != d || bin.upper.len() != d {
                return bad("bin bounds have the wrong dimension".into());
            }
            if bin.lower.iter().zip(&bin.upper).any(|(l, u)| !(l <= u)) || !(bin.volume >= 0.0) {
                return bad("bin bounds are inverted or volume is negative".into());
            }
            total = total
                .checked_add(bin.count)
                .ok_or_else(|| Error::InvalidParameter("bin counts overflow".into()))?;
        }
        if total != self.n {
            return Err(Error::CountMismatch { sum: total, n: self.n });
        }
        if let Some(r) = &self.rotation {
            if r.barycentre.len() != d {
                return bad("rotation barycentre has the wrong dimension".into());
            }
            Rotation::from_mrp(r.mrp)?;
        }
        Ok(())
    }

    /// Leaf index of `point` by descending the split planes.
    pub fn locate(&self, point: &[f64]) -> usize {
        let mut node = 0;
        while node < self.splits.len() {
            let s = self.splits[node];
            node = if point[s.dim] < s.coordinate {
                2 * node + 1
            } else {
                2 * node + 2
            };
        }
        node - self.splits.len()
    }
}

/// Decodes and validates a partition document.
pub fn parse_partition_json(text: &str) -> Result<PartitionDocument> {
    let doc: PartitionDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    doc.validate()?;
    Ok(doc)
}
