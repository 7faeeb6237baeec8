use super::AttentionState;
use crate::msg::{bbox_scale, BoundingBox, ObjectFoa, PointFoa, RegionFoa, SaliencyMap};
use crate::plane::Plane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectConfig {
    /// Inhibition-of-return radius in source pixels; 0 disables IoR.
    pub ior_radius: f64,
    pub ior_decay: f32,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            ior_radius: 16.0,
            ior_decay: 0.9,
        }
    }
}

fn to_map(v: u32, src: u32, map: u32) -> u32 {
    (((v as f64 + 0.5) * map as f64 / src as f64).floor() as u32).min(map - 1)
}

fn to_src(v: u32, map: u32, src: u32) -> u32 {
    (((v as f64 + 0.5) * src as f64 / map as f64).floor() as u32).min(src - 1)
}

fn plane_of(s: &SaliencyMap) -> Plane {
    Plane::from_vec(s.width as usize, s.height as usize, s.values.clone())
}

/// Winner-take-all with inhibition of return. The state decays, masks the
/// map, and receives a Gaussian disk at the winner. The returned point is
/// in source coordinates.
pub fn select_foa(s: &SaliencyMap, state: &mut AttentionState, cfg: &SelectConfig, src: (u32, u32)) -> PointFoa {
    state.ensure_source_dims(src.0 as usize, src.1 as usize);
    state.advance_frame(cfg.ior_decay);
    let (mw, mh) = (s.width as usize, s.height as usize);
    let inh = state.inhibition_at(mw, mh);
    let eff = plane_of(s).zip_map(&inh, |v, i| v * (1.0 - i));
    let (x, y) = eff.argmax();
    let (sx, sy) = (to_src(x as u32, s.width, src.0), to_src(y as u32, s.height, src.1));
    if cfg.ior_radius > 0.0 {
        state.add_ior_disk(sx, sy, cfg.ior_radius / 2.0);
    }
    PointFoa {
        header: s.header.clone(),
        x: sx,
        y: sy,
        score: eff.at(x, y),
    }
}

/// Thresholds at `threshold * s(foa)` and keeps the 4-connected component
/// containing the FOA. RegionFoa is in map coordinates, ObjectFoa in
/// source coordinates.
pub fn extract_region(s: &SaliencyMap, foa: &PointFoa, threshold: f32, src: (u32, u32)) -> (RegionFoa, ObjectFoa) {
    let (mw, mh) = (s.width as usize, s.height as usize);
    let seed = (
        to_map(foa.x.min(src.0 - 1), src.0, s.width) as usize,
        to_map(foa.y.min(src.1 - 1), src.1, s.height) as usize,
    );
    let cut = threshold * s.values[seed.1 * mw + seed.0];
    let mut inside = vec![false; mw * mh];
    let mut stack = vec![seed];
    inside[seed.1 * mw + seed.0] = true;
    let (mut x0, mut y0, mut x1, mut y1) = (seed.0, seed.1, seed.0, seed.1);
    let (mut sum, mut count) = (0f64, 0usize);
    while let Some((x, y)) = stack.pop() {
        sum += s.values[y * mw + x] as f64;
        count += 1;
        (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
        let mut visit = |nx: usize, ny: usize| {
            let i = ny * mw + nx;
            if !inside[i] && s.values[i] >= cut {
                inside[i] = true;
                stack.push((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < mw {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < mh {
            visit(x, y + 1);
        }
    }
    let bbox = BoundingBox::new(x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
    let row = RegionFoa::row_bytes(bbox.w);
    let mut mask = vec![0u8; RegionFoa::mask_len(&bbox)];
    for y in y0..=y1 {
        for x in x0..=x1 {
            if inside[y * mw + x] {
                let (rx, ry) = (x - x0, y - y0);
                mask[ry * row + (rx >> 3)] |= 0x80 >> (rx & 7);
            }
        }
    }
    debug_assert!(count > 0);
    let score = (sum / count as f64) as f32;
    let region = RegionFoa {
        header: s.header.clone(),
        bbox,
        mask,
        score,
    };
    let object = ObjectFoa {
        header: s.header.clone(),
        bbox: bbox_scale(&bbox, (s.width, s.height), src),
        score,
    };
    (region, object)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{apply_feedback, Feedback};
    use crate::msg::{Header, InhibitRegion};
    use proptest::prelude::*;

    fn map(w: u32, h: u32, f: impl Fn(u32, u32) -> f32) -> SaliencyMap {
        let v = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        SaliencyMap::new(Header::new(9, 900), w, h, v)
    }

    fn blob(cx: f32, cy: f32) -> impl Fn(u32, u32) -> f32 {
        move |x, y| (-((x as f32 - cx).powi(2) + (y as f32 - cy).powi(2)) / 8.0).exp()
    }

    #[test]
    fn unique_max_and_tie_break() {
        let s = map(10, 10, |x, y| if (x, y) == (5, 7) { 1.0 } else { 0.1 });
        let f = select_foa(&s, &mut AttentionState::new(), &SelectConfig::default(), (10, 10));
        assert_eq!((f.x, f.y, f.score), (5, 7, 1.0));
        assert_eq!(f.header, s.header);
        let t = map(4, 4, |x, y| if x == y && (x == 1 || x == 2) { 1.0 } else { 0.0 });
        let f = select_foa(&t, &mut AttentionState::new(), &SelectConfig::default(), (4, 4));
        assert_eq!((f.x, f.y), (1, 1));
    }

    #[test]
    fn all_zero_picks_origin() {
        let s = map(8, 8, |_, _| 0.0);
        let f = select_foa(&s, &mut AttentionState::new(), &SelectConfig::default(), (8, 8));
        assert_eq!((f.x, f.y), (0, 0));
    }

    #[test]
    fn ior_moves_to_second_blob() {
        let a = blob(8.0, 8.0);
        let b = blob(40.0, 30.0);
        let s = map(48, 40, |x, y| a(x, y).max(b(x, y)));
        let cfg = SelectConfig {
            ior_radius: 10.0,
            ior_decay: 0.9,
        };
        let mut st = AttentionState::new();
        let first = select_foa(&s, &mut st, &cfg, (48, 40));
        assert_eq!((first.x, first.y), (8, 8));
        let second = select_foa(&s, &mut st, &cfg, (48, 40));
        assert_eq!((second.x, second.y), (40, 30));
        let d = ((40.0f64 - 8.0).powi(2) + (30.0f64 - 8.0).powi(2)).sqrt();
        assert!(d > cfg.ior_radius);
    }

    #[test]
    fn map_to_source_rescale() {
        let s = map(16, 16, |x, y| if (x, y) == (3, 12) { 1.0 } else { 0.0 });
        let f = select_foa(&s, &mut AttentionState::new(), &SelectConfig::default(), (64, 64));
        assert_eq!((f.x, f.y), (14, 50));
    }

    #[test]
    fn inhibit_region_pushes_foa_out() {
        let a = blob(10.0, 10.0);
        let s = map(40, 40, |x, y| a(x, y) + 0.3 * blob(30.0, 30.0)(x, y));
        let mut st = AttentionState::new();
        let cfg = SelectConfig {
            ior_radius: 0.0,
            ior_decay: 0.9,
        };
        let f = select_foa(&s, &mut st, &cfg, (40, 40));
        assert_eq!((f.x, f.y), (10, 10));
        let bbox = BoundingBox::new(4, 4, 13, 13);
        apply_feedback(
            &mut st,
            Feedback::Inhibit(&InhibitRegion {
                header: Header::default(),
                bbox,
                decay_frames: 5,
            }),
        );
        let g = select_foa(&s, &mut st, &cfg, (40, 40));
        assert!(!bbox.contains(g.x, g.y), "({}, {})", g.x, g.y);
    }

    #[test]
    fn plateau_extent() {
        let s = map(20, 12, |x, y| {
            if (3..9).contains(&x) && (2..7).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let foa = PointFoa {
            header: Header::default(),
            x: 5,
            y: 4,
            score: 1.0,
        };
        let (r, o) = extract_region(&s, &foa, 0.7, (20, 12));
        assert_eq!(r.bbox, BoundingBox::new(3, 2, 6, 5));
        assert_eq!(r.set_bits(), 30);
        assert_eq!(o.bbox, r.bbox);
        assert_eq!(o.score, 1.0);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn full_threshold_keeps_equal_connected() {
        let s = map(6, 1, |x, _| [0.5, 0.9, 0.9, 0.3, 0.9, 0.1][x as usize]);
        let foa = PointFoa {
            header: Header::default(),
            x: 1,
            y: 0,
            score: 0.9,
        };
        let (r, _) = extract_region(&s, &foa, 1.0, (6, 1));
        assert_eq!(r.bbox, BoundingBox::new(1, 0, 2, 1));
    }

    #[test]
    fn second_plateau_excluded() {
        // touching plateaus at 1.0 and 0.6: 0.6 < 0.7 so the fill stops
        let s = map(20, 10, |x, y| match (x, y) {
            (2..=7, 2..=7) => 1.0,
            (8..=14, 2..=7) => 0.6,
            _ => 0.0,
        });
        let foa = PointFoa {
            header: Header::default(),
            x: 4,
            y: 4,
            score: 1.0,
        };
        let (r, _) = extract_region(&s, &foa, 0.7, (20, 10));
        assert_eq!(r.bbox, BoundingBox::new(2, 2, 6, 6));
    }

    /// Textbook flood fill over a boolean grid for comparison.
    fn oracle_component(mask: &[bool], w: usize, h: usize, seed: (usize, usize)) -> Vec<bool> {
        let mut out = vec![false; w * h];
        out[seed.1 * w + seed.0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if out[i] || !mask[i] {
                        continue;
                    }
                    let n = (x > 0 && out[i - 1])
                        || (x + 1 < w && out[i + 1])
                        || (y > 0 && out[i - w])
                        || (y + 1 < h && out[i + w]);
                    if n {
                        out[i] = true;
                        changed = true;
                    }
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn region_matches_oracle_and_contains_foa(
            vals in proptest::collection::vec(0.0f32..=1.0, 96),
            fx in 0u32..12, fy in 0u32..8, t in 0.1f32..=1.0,
            sw in 12u32..40, sh in 8u32..30,
        ) {
            let s = SaliencyMap::new(Header::default(), 12, 8, vals.clone());
            let foa = PointFoa { header: Header::default(), x: fx * sw / 12, y: fy * sh / 8, score: 0.0 };
            let (r, o) = extract_region(&s, &foa, t, (sw, sh));
            prop_assert!(r.validate().is_ok());
            let seed = (to_map(foa.x, sw, 12) as usize, to_map(foa.y, sh, 8) as usize);
            let cut = t * vals[seed.1 * 12 + seed.0];
            let m: Vec<bool> = vals.iter().map(|&v| v >= cut).collect();
            let want = oracle_component(&m, 12, 8, seed);
            for y in 0..8u32 {
                for x in 0..12u32 {
                    let got = r.bbox.contains(x, y) && r.bit(x - r.bbox.x, y - r.bbox.y);
                    prop_assert_eq!(got, want[(y * 12 + x) as usize]);
                }
            }
            prop_assert!(r.bit(seed.0 as u32 - r.bbox.x, seed.1 as u32 - r.bbox.y));
            prop_assert!(o.bbox.contains(foa.x, foa.y));
        }

        #[test]
        fn ior_visits_every_blob(n in 2usize..5, seed in any::<u64>()) {
            // blobs on a coarse grid, separated by more than the radius
            let mut cells: Vec<(f32, f32)> = (0..9).map(|k| (8.0 + 16.0 * (k % 3) as f32, 8.0 + 16.0 * (k / 3) as f32)).collect();
            let mut s2 = seed;
            for i in (1..cells.len()).rev() {
                s2 = s2.wrapping_mul(6364136223846793005).wrapping_add(1);
                cells.swap(i, (s2 >> 33) as usize % (i + 1));
            }
            let blobs: Vec<(f32, f32)> = cells[..n].to_vec();
            let s = map(48, 48, |x, y| blobs.iter().map(|&(cx, cy)| blob(cx, cy)(x, y)).fold(0.0, f32::max));
            let cfg = SelectConfig { ior_radius: 8.0, ior_decay: 0.9 };
            let mut st = AttentionState::new();
            let mut seen = std::collections::HashSet::new();
            for _ in 0..n {
                let f = select_foa(&s, &mut st, &cfg, (48, 48));
                let k = blobs.iter().position(|&(cx, cy)| (f.x as f32 - cx).abs() < 4.0 && (f.y as f32 - cy).abs() < 4.0);
                prop_assert!(k.is_some());
                seen.insert(k.unwrap());
            }
            prop_assert_eq!(seen.len(), n);
        }

        #[test]
        fn empty_inhibition_is_pure_argmax(vals in proptest::collection::vec(0.0f32..=1.0, 64)) {
            let s = SaliencyMap::new(Header::default(), 8, 8, vals.clone());
            let f = select_foa(&s, &mut AttentionState::new(), &SelectConfig::default(), (8, 8));
            let (x, y) = Plane::from_vec(8, 8, vals).argmax();
            prop_assert_eq!((f.x as usize, f.y as usize), (x, y));
        }
    }
}
