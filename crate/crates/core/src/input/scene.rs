use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::InputError;
use crate::msg::{BoundingBox, Header, ImageMsg, ObjectFoa};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Distractor {
    pub x: u32,
    pub y: u32,
    pub side: u32,
    pub level: u8,
}

/// Parameters of the moving-square generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    pub background: u8,
    pub side: u32,
    pub pos: (u32, u32),
    pub vel: (i32, i32),
    pub level: u8,
    /// Frames `[start, end)` during which the target is not drawn.
    pub hidden: Option<(u64, u64)>,
    pub distractors: Vec<Distractor>,
    /// Uniform additive noise in `[-noise, noise]`.
    pub noise: u8,
    pub seed: u64,
    pub fps: f64,
    /// Frame budget; 0 means unbounded.
    pub frames: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 256,
            height: 256,
            background: 128,
            side: 20,
            pos: (10, 10),
            vel: (0, 0),
            level: 255,
            hidden: None,
            distractors: Vec::new(),
            noise: 0,
            seed: 0,
            fps: 30.0,
            frames: 150,
        }
    }
}

pub fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), InputError> {
    let bad = || InputError::BadParam(format!("expected \"a,b\", got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

/// `"x,y,side,level;x,y,side,level"`; empty string means none.
pub fn parse_distractors(s: &str) -> Result<Vec<Distractor>, InputError> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let f: Vec<&str> = p.split(',').map(str::trim).collect();
            let bad = || InputError::BadParam(format!("distractor {p:?} must be x,y,side,level"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(Distractor {
                x: f[0].parse().map_err(|_| bad())?,
                y: f[1].parse().map_err(|_| bad())?,
                side: f[2].parse().map_err(|_| bad())?,
                level: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Deterministic scene generator that emits its own ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    cfg: SceneConfig,
    x: i64,
    y: i64,
    vx: i64,
    vy: i64,
    frame: u64,
    rng: ChaCha8Rng,
}

fn reflect(p: i64, v: i64, max: i64) -> (i64, i64) {
    if max <= 0 {
        return (0, v);
    }
    let (mut p, mut v) = (p + v, v);
    loop {
        if p < 0 {
            p = -p;
            v = -v;
        } else if p > max {
            p = 2 * max - p;
            v = -v;
        } else {
            return (p, v);
        }
    }
}

impl SyntheticScene {
    pub fn new(cfg: SceneConfig) -> Result<Self, InputError> {
        if cfg.width == 0 || cfg.height == 0 {
            return Err(InputError::BadParam("scene dimensions must be positive".into()));
        }
        if cfg.side == 0 || cfg.side > cfg.width || cfg.side > cfg.height {
            return Err(InputError::BadParam(format!("target side {} does not fit", cfg.side)));
        }
        if !(cfg.fps.is_finite() && cfg.fps > 0.0) {
            return Err(InputError::BadParam(format!("fps {} must be > 0", cfg.fps)));
        }
        let max_x = (cfg.width - cfg.side) as i64;
        let max_y = (cfg.height - cfg.side) as i64;
        Ok(SyntheticScene {
            x: (cfg.pos.0 as i64).min(max_x),
            y: (cfg.pos.1 as i64).min(max_y),
            vx: cfg.vel.0 as i64,
            vy: cfg.vel.1 as i64,
            frame: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    pub fn frame_index(&self) -> u64 {
        self.frame
    }

    pub fn stamp_of(&self, frame: u64) -> u64 {
        (frame as f64 * 1e9 / self.cfg.fps).round() as u64
    }

    pub fn target_box(&self) -> BoundingBox {
        BoundingBox::new(self.x as u32, self.y as u32, self.cfg.side, self.cfg.side)
    }

    pub fn target_visible(&self) -> bool {
        !self.cfg.hidden.is_some_and(|(a, b)| (a..b).contains(&self.frame))
    }

    pub fn finished(&self) -> bool {
        self.cfg.frames != 0 && self.frame >= self.cfg.frames
    }

    /// Renders the current frame and advances the target. Returns `None`
    /// once the frame budget is spent. Ground truth is absent while the
    /// target is hidden.
    pub fn step(&mut self) -> Option<(ImageMsg, Option<ObjectFoa>)> {
        if self.finished() {
            return None;
        }
        let (w, h) = (self.cfg.width, self.cfg.height);
        let mut px = vec![self.cfg.background; w as usize * h as usize];
        let mut paint = |b: BoundingBox, level: u8| {
            let x1 = (b.right() as u32).min(w);
            let y1 = (b.bottom() as u32).min(h);
            for y in b.y.min(h)..y1 {
                px[(y * w + b.x.min(w)) as usize..(y * w + x1) as usize].fill(level);
            }
        };
        for d in &self.cfg.distractors {
            paint(BoundingBox::new(d.x, d.y, d.side, d.side), d.level);
        }
        let target = self.target_box();
        let visible = self.target_visible();
        if visible {
            paint(target, self.cfg.level);
        }
        if self.cfg.noise > 0 {
            let a = self.cfg.noise as i16;
            for p in px.iter_mut() {
                let n: i16 = self.rng.gen_range(-a..=a);
                *p = (*p as i16 + n).clamp(0, 255) as u8;
            }
        }
        let header = Header {
            seq: self.frame as u32,
            stamp_ns: self.stamp_of(self.frame),
            frame_id: "synthetic".into(),
        };
        let gt = visible.then(|| ObjectFoa {
            header: header.clone(),
            bbox: target,
            score: 1.0,
        });
        let img = ImageMsg::new(header, w, h, 1, px);

        (self.x, self.vx) = reflect(self.x, self.vx, (w - self.cfg.side) as i64);
        (self.y, self.vy) = reflect(self.y, self.vy, (h - self.cfg.side) as i64);
        self.frame += 1;
        Some((img, gt))
    }
}
