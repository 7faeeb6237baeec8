//! Bottom-up saliency, focus-of-attention selection and feedback.

pub mod channels;
pub mod fft;
pub mod itti;
pub mod normalize;
pub mod pyramid;
pub mod select;
pub mod spectral;

pub use channels::FeatureChannels;
pub use fft::ComplexMap;
pub use fft::{fft2d, Complex};
pub use itti::{itti_saliency, IttiConfig};
pub use normalize::normalize_map;
pub use pyramid::{center_surround, Pyramid};
pub use select::{extract_region, select_foa, SelectConfig};
pub use spectral::{spectral_residual, spectral_saliency};

use thiserror::Error;

use crate::msg::{BoundingBox, InhibitRegion, TopDownGain};
use crate::plane::Plane;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("bad scales: need c < s <= {levels}, got c={c}, s={s}")]
    BadScales { c: usize, s: usize, levels: usize },
    #[error("image {width}x{height} is too small (short side must be >= {min})")]
    TooSmall { width: u32, height: u32, min: u32 },
    #[error("dimensions {width}x{height} are not powers of two")]
    NonPowerOfTwo { width: usize, height: usize },
}

/// Channel order used by gain vectors.
pub const CHANNEL_NAMES: [&str; 4] = ["intensity", "color", "orientation", "motion"];

#[derive(Debug, Clone, PartialEq)]
struct ActiveInhibit {
    bbox: BoundingBox,
    total: u32,
    left: u32,
    used: bool,
}

/// Per-node mutable attention state. The inhibition map lives at source
/// resolution; its dimensions follow the most recent frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    pub prev_intensity: Option<Plane>,
    ior: Plane,
    regions: Vec<ActiveInhibit>,
    pub gains: [f32; 4],
}

impl Default for AttentionState {
    fn default() -> Self {
        AttentionState {
            prev_intensity: None,
            ior: Plane::new(0, 0),
            regions: Vec::new(),
            gains: [1.0; 4],
        }
    }
}

impl AttentionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resizes the inhibition map to a new source size, clearing it when
    /// the size changes.
    pub fn ensure_source_dims(&mut self, width: usize, height: usize) {
        if self.ior.dims() != (width, height) {
            self.ior = Plane::new(width, height);
        }
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.ior.dims()
    }

    /// Start-of-frame bookkeeping: IoR decays by `gamma` and region
    /// inhibitions step down their linear ramp.
    pub fn advance_frame(&mut self, gamma: f32) {
        self.ior.scale(gamma);
        for r in &mut self.regions {
            if r.used {
                r.left -= 1;
            }
            r.used = true;
        }
        self.regions.retain(|r| r.left > 0);
    }

    /// Effective inhibition at source resolution, values in [0,1].
    pub fn inhibition(&self) -> Plane {
        let mut out = self.ior.clone();
        let (w, h) = out.dims();
        for r in &self.regions {
            let v = r.left as f32 / r.total as f32;
            let x1 = (r.bbox.right() as usize).min(w);
            let y1 = (r.bbox.bottom() as usize).min(h);
            for y in (r.bbox.y as usize).min(h)..y1 {
                for x in (r.bbox.x as usize).min(w)..x1 {
                    let p = &mut out.data[y * w + x];
                    *p = p.max(v);
                }
            }
        }
        out
    }

    /// Inhibition area-averaged onto a `w x h` grid.
    pub fn inhibition_at(&self, w: usize, h: usize) -> Plane {
        if self.ior.data.is_empty() {
            return Plane::new(w, h);
        }
        self.inhibition().downsample_area(w, h)
    }

    /// Adds a Gaussian disk of amplitude 1 at source `(cx, cy)`.
    pub fn add_ior_disk(&mut self, cx: u32, cy: u32, sigma: f64) {
        let (w, h) = self.ior.dims();
        if sigma <= 0.0 || w == 0 {
            return;
        }
        let r = (3.0 * sigma).ceil() as i64;
        let (cx, cy) = (cx as i64, cy as i64);
        for y in (cy - r).max(0)..(cy + r + 1).min(h as i64) {
            for x in (cx - r).max(0)..(cx + r + 1).min(w as i64) {
                let d2 = ((x - cx).pow(2) + (y - cy).pow(2)) as f64;
                let g = (-d2 / (2.0 * sigma * sigma)).exp() as f32;
                let p = &mut self.ior.data[y as usize * w + x as usize];
                *p = (*p + g).min(1.0);
            }
        }
    }

    pub fn clear_inhibition(&mut self) {
        self.ior.data.iter_mut().for_each(|v| *v = 0.0);
        self.regions.clear();
    }
}

/// Feedback accepted by [`apply_feedback`].
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    Gain(&'a TopDownGain),
    Inhibit(&'a InhibitRegion),
}

pub fn apply_feedback(state: &mut AttentionState, msg: Feedback<'_>) {
    match msg {
        Feedback::Gain(g) => state.gains = g.gains,
        Feedback::Inhibit(r) => {
            let total = r.decay_frames.max(1);
            state.regions.push(ActiveInhibit {
                bbox: r.bbox,
                total,
                left: total,
                used: false,
            });
        }
    }
}
