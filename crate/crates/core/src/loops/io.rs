//! Loop serialization. Both formats round-trip bit-exactly: CSV values carry
//! 17 significant digits and JSON uses shortest round-trip formatting.

use super::DiscreteLoop;
use crate::error::{Error, Result};
use crate::Vec3;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const LOOP_SCHEMA_VERSION: u32 = 1;

/// CSV with header `t,x,y,z`, one row per sample, LF line endings.
pub fn to_csv(lp: &DiscreteLoop) -> String {
    let n = lp.len();
    let mut out = String::with_capacity(80 * (n + 1));
    out.push_str("t,x,y,z\n");
    for (j, p) in lp.points().iter().enumerate() {
        let t = j as f64 / n as f64;
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", t, p.x, p.y, p.z).expect("writing to a String");
    }
    out
}

pub fn from_csv(text: &str) -> Result<DiscreteLoop> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t,x,y,z" => {}
        _ => return Err(Error::Parse("missing header `t,x,y,z`".into())),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        if vals.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 columns, found {}", i + 1, vals.len())));
        }
        points.push(Vec3::new(vals[1], vals[2], vals[3]));
    }
    DiscreteLoop::new(points)
}

/// JSON loop document with metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopFile {
    pub schema_version: u32,
    pub n: usize,
    /// Checksum of the field pair the loop was computed for, if any.
    pub field_checksum: Option<String>,
    pub points: Vec<[f64; 3]>,
}

impl LoopFile {
    pub fn new(lp: &DiscreteLoop, field_checksum: Option<String>) -> Self {
        LoopFile {
            schema_version: LOOP_SCHEMA_VERSION,
            n: lp.len(),
            field_checksum,
            points: lp.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }

    pub fn to_loop(&self) -> Result<DiscreteLoop> {
        if self.schema_version != LOOP_SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.n != self.points.len() {
            return Err(Error::Parse(format!("n = {} but {} points given", self.n, self.points.len())));
        }
        DiscreteLoop::new(self.points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }
}

pub fn to_json(lp: &DiscreteLoop, field_checksum: Option<String>) -> String {
    let mut s = serde_json::to_string_pretty(&LoopFile::new(lp, field_checksum)).expect("loop serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<(DiscreteLoop, Option<String>)> {
    let file: LoopFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((file.to_loop()?, file.field_checksum))
}
