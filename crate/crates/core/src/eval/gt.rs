use std::path::Path;

use super::EvalError;
use crate::msg::BoundingBox;

/// Single-target ground truth, strictly increasing frame indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthSet {
    pub records: Vec<(u64, BoundingBox)>,
}

impl GroundTruthSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends, enforcing strict ordering.
    pub fn push(&mut self, frame: u64, bbox: BoundingBox) -> Result<(), EvalError> {
        if let Some(&(prev, _)) = self.records.last() {
            if frame <= prev {
                return Err(EvalError::OrderViolation {
                    line: None,
                    prev,
                    found: frame,
                });
            }
        }
        self.records.push((frame, bbox));
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,x,y,w,h\n");
        for (f, b) in &self.records {
            out.push_str(&format!("{f},{},{},{},{}\n", b.x, b.y, b.w, b.h));
        }
        out
    }
}

/// Parses `frame_index,x,y,w,h` lines. A first line whose first field is
/// not a number is a header. Blank lines are skipped.
pub fn parse_ground_truth(text: &str) -> Result<GroundTruthSet, EvalError> {
    let mut set = GroundTruthSet::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if line == 1 && fields[0].parse::<u64>().is_err() {
            continue;
        }
        let err = |reason: String| EvalError::ParseError { line, reason };
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let frame: u64 = fields[0]
            .parse()
            .map_err(|_| err(format!("bad frame index {:?}", fields[0])))?;
        let mut v = [0u32; 4];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| err(format!("bad box value {f:?}")))?;
        }
        let bbox = BoundingBox::new(v[0], v[1], v[2], v[3]);
        set.push(frame, bbox).map_err(|e| match e {
            EvalError::OrderViolation { prev, found, .. } => EvalError::OrderViolation {
                line: Some(line),
                prev,
                found,
            },
            e => e,
        })?;
    }
    Ok(set)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruthSet, EvalError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| EvalError::Io {
        path: path.as_ref().to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_ground_truth(&text)
}
