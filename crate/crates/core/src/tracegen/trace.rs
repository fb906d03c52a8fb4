//! Request traces and their CSV representation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};
use crate::model::NodeId;

pub const TRACE_HEADER: [&str; 4] = ["time_days", "content_id", "ingress_id", "pre_horizon"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(rename = "time_days")]
    pub time: f64,
    pub content_id: u64,
    pub ingress_id: NodeId,
    /// Warm-up request: updates cache state but is not measured.
    #[serde(with = "bool_as_int")]
    pub pre_horizon: bool,
}

mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        let text = String::deserialize(d)?;
        match text.trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(serde::de::Error::custom(format!("expected 0/1, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub burn_in: Option<f64>,
}

/// Time-ordered requests. Construction checks the ordering, so every
/// `RequestTrace` in circulation has non-decreasing timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequestTrace {
    requests: Vec<Request>,
    pub metadata: TraceMetadata,
}

impl RequestTrace {
    pub fn new(requests: Vec<Request>, metadata: TraceMetadata) -> Result<Self> {
        if let Some(i) = requests.windows(2).position(|w| !(w[1].time >= w[0].time)) {
            return Err(SnmError::TraceFormat {
                line: i + 2,
                reason: format!("time {} precedes {}", requests[i + 1].time, requests[i].time),
            });
        }
        Ok(RequestTrace { requests, metadata })
    }

    /// Sorts by time, keeping the given order for ties.
    pub fn from_unsorted(mut requests: Vec<Request>, metadata: TraceMetadata) -> Self {
        requests.sort_by(|a, b| a.time.total_cmp(&b.time));
        RequestTrace { requests, metadata }
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn into_requests(self) -> Vec<Request> {
        self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Request> {
        self.requests.iter()
    }

    pub fn measured_len(&self) -> usize {
        self.requests.iter().filter(|r| !r.pre_horizon).count()
    }

    /// Time span `[first, last]` of the measured requests.
    pub fn measured_span(&self) -> Option<(f64, f64)> {
        let mut it = self.requests.iter().filter(|r| !r.pre_horizon);
        let first = it.next()?.time;
        let last = it.next_back().map_or(first, |r| r.time);
        Some((first, last))
    }

    /// Number of requests per content, warm-up included when `all`.
    pub fn request_counts(&self, all: bool) -> FxHashMap<u64, u64> {
        let mut counts = FxHashMap::default();
        for r in self.requests.iter().filter(|r| all || !r.pre_horizon) {
            *counts.entry(r.content_id).or_insert(0) += 1;
        }
        counts
    }

    /// Same requests with warm-up flags cleared and dropped: only the
    /// measured window survives.
    pub fn measured_only(&self) -> RequestTrace {
        RequestTrace {
            requests: self.requests.iter().copied().filter(|r| !r.pre_horizon).collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Merge several traces (e.g. per-ingress captures) into one time-ordered
    /// trace.
    pub fn merge(traces: &[RequestTrace]) -> RequestTrace {
        let all = traces.iter().flat_map(|t| t.requests.iter().copied()).collect();
        RequestTrace::from_unsorted(all, TraceMetadata::default())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACE_HEADER).map_err(csv_error)?;
        for r in &self.requests {
            // `{}` on f64 prints the shortest string that parses back to the
            // same value, so the file is lossless.
            w.write_record([
                format_time(r.time),
                r.content_id.to_string(),
                r.ingress_id.to_string(),
                u8::from(r.pre_horizon).to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
            return Err(SnmError::TraceFormat { line: 1, reason: format!("unexpected header {headers:?}") });
        }
        let mut requests = Vec::new();
        for (i, row) in rdr.deserialize::<Request>().enumerate() {
            let r = row.map_err(|e| SnmError::TraceFormat { line: i + 2, reason: e.to_string() })?;
            if !r.time.is_finite() {
                return Err(SnmError::TraceFormat { line: i + 2, reason: "time is not finite".into() });
            }
            requests.push(r);
        }
        RequestTrace::new(requests, TraceMetadata::default())
    }

    /// Writes CSV, gzip-compressed when the path ends in `.gz`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = BufWriter::new(File::create(path)?);
        if is_gzip(path) {
            let mut enc = GzEncoder::new(file, Compression::default());
            self.write_csv(&mut enc)?;
            enc.finish()?.flush()?;
        } else {
            self.write_csv(file)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = BufReader::new(File::open(path)?);
        if is_gzip(path) {
            Self::read_csv(GzDecoder::new(file))
        } else {
            Self::read_csv(file)
        }
    }
}

fn format_time(t: f64) -> String {
    // Integers print without a fractional part; keep a decimal point so the
    // column reads as real-valued.
    let s = format!("{t}");
    if s.contains(['.', 'e', 'E']) || !t.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn csv_error(e: csv::Error) -> SnmError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    SnmError::TraceFormat { line, reason: e.to_string() }
}

impl<'a> IntoIterator for &'a RequestTrace {
    type Item = &'a Request;
    type IntoIter = std::slice::Iter<'a, Request>;

    fn into_iter(self) -> Self::IntoIter {
        self.requests.iter()
    }
}
