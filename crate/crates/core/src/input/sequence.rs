use std::path::{Path, PathBuf};

use super::{pnm::decode_pnm, InputError};
use crate::msg::{Header, ImageMsg};

/// Plays the files of a directory that match a glob pattern, in
/// lexicographic order. Stamps derive from the frame index, not the clock.
#[derive(Debug)]
pub struct SequenceSource {
    files: Vec<PathBuf>,
    fps: f64,
    looping: bool,
    cursor: usize,
    emitted: u64,
    dims: Option<(u32, u32)>,
}

pub fn decode_image_file(path: &Path) -> Result<ImageMsg, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    if bytes.starts_with(b"\x89PNG") {
        crate::gateway::png::decode_png(&bytes)
    } else {
        decode_pnm(&bytes)
    }
}

impl SequenceSource {
    pub fn open(dir: impl AsRef<Path>, pattern: &str, fps: f64, looping: bool) -> Result<Self, InputError> {
        let dir = dir.as_ref();
        if !(fps.is_finite() && fps > 0.0) {
            return Err(InputError::BadParam(format!("fps {fps} must be > 0")));
        }
        let pat = glob::Pattern::new(pattern).map_err(|e| InputError::BadParam(format!("pattern {pattern:?}: {e}")))?;
        let entries = std::fs::read_dir(dir).map_err(|e| InputError::UnreadableFile {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| pat.matches(n)))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(InputError::NoFramesFound(dir.to_path_buf()));
        }
        Ok(SequenceSource {
            files,
            fps,
            looping,
            cursor: 0,
            emitted: 0,
            dims: None,
        })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn set_looping(&mut self, looping: bool) {
        self.looping = looping;
    }

    pub fn set_fps(&mut self, fps: f64) {
        if fps.is_finite() && fps > 0.0 {
            self.fps = fps;
        }
    }

    pub fn frame_period_ns(&self) -> f64 {
        1e9 / self.fps
    }

    /// Stamp the next emitted frame will carry.
    pub fn next_stamp(&self) -> u64 {
        (self.emitted as f64 * self.frame_period_ns()).round() as u64
    }

    /// `Ok(None)` is end of stream. A file that cannot be used yields an
    /// error and is skipped on the following call.
    pub fn next_frame(&mut self) -> Result<Option<ImageMsg>, InputError> {
        if self.cursor >= self.files.len() {
            if !self.looping {
                return Ok(None);
            }
            self.cursor = 0;
        }
        let idx = self.cursor;
        self.cursor += 1;
        let path = &self.files[idx];
        let mut img = decode_image_file(path).map_err(|reason| InputError::UnreadableFile {
            path: path.clone(),
            reason,
        })?;
        match self.dims {
            Some(d) if d != (img.width, img.height) => {
                return Err(InputError::SizeMismatch {
                    path: path.clone(),
                    expected: d,
                    found: (img.width, img.height),
                })
            }
            _ => self.dims = Some((img.width, img.height)),
        }
        img.header = Header {
            seq: idx as u32,
            stamp_ns: self.next_stamp(),
            frame_id: path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string(),
        };
        self.emitted += 1;
        Ok(Some(img))
    }
}
