use super::{ncc_match, TaskError};
use crate::msg::{BoundingBox, Header, ImageMsg, TrackState, TrackStatus};
use crate::plane::Plane;

pub fn gray_plane(img: &ImageMsg) -> Plane {
    Plane::from_vec(img.width as usize, img.height as usize, img.to_gray_f32())
}

fn crop(p: &Plane, b: &BoundingBox) -> Plane {
    let (x, y, w, h) = (b.x as usize, b.y as usize, b.w as usize, b.h as usize);
    let mut data = Vec::with_capacity(w * h);
    for j in 0..h {
        data.extend_from_slice(&p.data[(y + j) * p.width + x..][..w]);
    }
    Plane::from_vec(w, h, data)
}

/// Single-target NCC tracker, initialized from one box in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerCore {
    pub template: Plane,
    pub bbox: BoundingBox,
    /// Raw NCC score of the last match, in [-1, 1].
    pub confidence: f64,
    /// Search margin as a fraction of max(w, h).
    pub margin: f64,
    pub update_rate: f64,
}

impl TrackerCore {
    pub fn init(
        frame: &ImageMsg,
        bbox: BoundingBox,
        margin: f64,
        update_rate: f64,
    ) -> Result<(TrackerCore, TrackState), TaskError> {
        if !bbox.is_valid() || !bbox.fits_in(frame.width, frame.height) {
            return Err(TaskError::BadBox {
                bbox,
                width: frame.width,
                height: frame.height,
            });
        }
        let t = TrackerCore {
            template: crop(&gray_plane(frame), &bbox),
            bbox,
            confidence: 1.0,
            margin: margin.max(0.0),
            update_rate: update_rate.clamp(0.0, 1.0),
        };
        let state = t.state(frame.header.clone());
        Ok((t, state))
    }

    pub fn margin_px(&self) -> u32 {
        (self.margin * self.bbox.w.max(self.bbox.h) as f64).round() as u32
    }

    pub fn state(&self, header: Header) -> TrackState {
        TrackState {
            header,
            state: TrackStatus::Tracking,
            bbox: self.bbox,
            confidence: self.confidence.clamp(0.0, 1.0) as f32,
        }
    }

    pub fn step(&mut self, frame: &ImageMsg) -> TrackState {
        let g = gray_plane(frame);
        let window = self.bbox.inflate(self.margin_px(), frame.width, frame.height);
        match ncc_match(&g, &self.template, window) {
            Ok(((x, y), score)) => {
                self.bbox = BoundingBox::new(x, y, self.bbox.w, self.bbox.h);
                self.confidence = score;
                if self.update_rate > 0.0 {
                    let patch = crop(&g, &self.bbox);
                    let u = self.update_rate as f32;
                    self.template = self.template.zip_map(&patch, |t, p| (1.0 - u) * t + u * p);
                }
            }
            // the frame shrank below the template
            Err(_) => self.confidence = 0.0,
        }
        self.state(frame.header.clone())
    }
}
