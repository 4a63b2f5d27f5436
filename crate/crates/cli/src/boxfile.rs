// SPDX-License-Identifier: Apache-2.0

//! Box files: a JSON array of `{w, h, cx, cy, score}` objects, or CSV with
//! the header `w,h,cx,cy,score`. The format is picked from the first
//! non-blank character (`[` means JSON).

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use boxhash::{BBox, Detections};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Record {
    pub w: f64,
    pub h: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub score: Option<f64>,
}

/// A parsed record and the line it came from (records index for JSON).
#[derive(Debug, Clone, Copy)]
pub struct Located {
    pub record: Record,
    pub line: Option<u64>,
    pub index: usize,
}

impl Located {
    fn context(&self) -> String {
        match self.line {
            Some(line) => format!("row {} (line {line})", self.index),
            None => format!("row {}", self.index),
        }
    }

    pub fn to_box(self) -> Result<BBox> {
        let r = self.record;
        BBox::new(r.w, r.h, r.cx, r.cy).map_err(|e| anyhow!("{}: {e}", self.context()))
    }
}

pub fn parse(text: &str) -> Result<Vec<Located>> {
    let trimmed = text.trim_start_matches('\u{feff}').trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        let records: Vec<Record> = serde_json::from_str(trimmed).map_err(|e| {
            anyhow!(
                "invalid JSON box file at line {}, column {}: {e}",
                e.line(),
                e.column()
            )
        })?;
        return Ok(records
            .into_iter()
            .enumerate()
            .map(|(index, record)| Located {
                record,
                line: None,
                index,
            })
            .collect());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(trimmed.as_bytes());
    let headers = reader.headers().context("reading CSV header")?.clone();
    for required in ["w", "h", "cx", "cy"] {
        if !headers.iter().any(|h| h == required) {
            bail!("CSV header must be `w,h,cx,cy,score`, missing `{required}`");
        }
    }
    let mut out = Vec::new();
    for (index, row) in reader.deserialize::<Record>().enumerate() {
        match row {
            Ok(record) => out.push(Located {
                record,
                line: Some(index as u64 + 2),
                index,
            }),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(index as u64 + 2);
                bail!("malformed row {index} (line {line}): {e}");
            }
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<Located>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn to_boxes(records: &[Located]) -> Result<Vec<BBox>> {
    records.iter().map(|r| r.to_box()).collect()
}

pub fn to_detections(records: &[Located]) -> Result<Detections> {
    let boxes = to_boxes(records)?;
    let scores = records
        .iter()
        .map(|r| {
            let s = r
                .record
                .score
                .ok_or_else(|| anyhow!("{}: missing score", r.context()))?;
            if !(0.0..=1.0).contains(&s) {
                bail!("{}: score {s} outside [0, 1]", r.context());
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Detections::new(boxes, scores)?)
}
