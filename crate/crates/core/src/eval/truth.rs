use std::io::Read;
use std::path::Path;

use crate::{Error, Result};

/// Sparse frame correspondences between a query and a reference traverse,
/// linearly interpolated in between.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    anchors: Vec<(f64, f64)>,
    /// Mean distance between consecutive query frames, meters.
    pub query_spacing: f64,
    /// Mean distance between consecutive reference frames, meters.
    pub reference_spacing: f64,
}

impl GroundTruth {
    /// Anchors are `(query_frame, reference_frame)` pairs, strictly
    /// increasing in both coordinates, at least two of them.
    pub fn new(
        anchors: Vec<(f64, f64)>,
        query_spacing: f64,
        reference_spacing: f64,
    ) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::invalid("ground truth needs at least two anchors"));
        }
        if anchors
            .iter()
            .any(|(q, r)| !q.is_finite() || !r.is_finite())
        {
            return Err(Error::invalid("ground truth anchors must be finite"));
        }
        if let Some(w) = anchors
            .windows(2)
            .find(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1)
        {
            return Err(Error::invalid(format!(
                "anchors {:?} and {:?} are not strictly increasing",
                w[0], w[1]
            )));
        }
        Ok(Self {
            anchors,
            query_spacing,
            reference_spacing,
        })
    }

    /// Reads `query_frame,reference_frame` rows under that header.
    pub fn read_csv<R: Read>(
        reader: R,
        query_spacing: f64,
        reference_spacing: f64,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("ground truth csv lacks a `{name}` column")))
        };
        let (qc, rc) = (col("query_frame")?, col("reference_frame")?);
        let mut anchors = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::invalid(format!("bad ground truth row {:?}", rec)))
            };
            anchors.push((parse(qc)?, parse(rc)?));
        }
        Self::new(anchors, query_spacing, reference_spacing)
    }

    pub fn load(
        path: impl AsRef<Path>,
        query_spacing: f64,
        reference_spacing: f64,
    ) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, query_spacing, reference_spacing)
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn first_query(&self) -> f64 {
        self.anchors[0].0
    }

    pub fn last_query(&self) -> f64 {
        self.anchors[self.anchors.len() - 1].0
    }

    pub fn covers(&self, query_frame: f64) -> bool {
        (self.first_query()..=self.last_query()).contains(&query_frame)
    }

    /// Reference frame position corresponding to `query_frame`.
    pub fn interpolate(&self, query_frame: f64) -> Result<f64> {
        if !self.covers(query_frame) {
            return Err(Error::OutOfRange {
                query: query_frame,
                first: self.first_query(),
                last: self.last_query(),
            });
        }
        // first anchor whose query coordinate is >= query_frame
        let hi = self.anchors.partition_point(|a| a.0 < query_frame);
        let (q1, r1) = self.anchors[hi];
        if q1 == query_frame || hi == 0 {
            return Ok(r1);
        }
        let (q0, r0) = self.anchors[hi - 1];
        Ok(r0 + (query_frame - q0) * (r1 - r0) / (q1 - q0))
    }
}
