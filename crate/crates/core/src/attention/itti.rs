use super::channels::{gabor_energy, gabor_pair, FeatureChannels, ORIENTATIONS_DEG};
use super::normalize::normalize_map;
use super::pyramid::{cs_planes, effective_scales, max_level, Pyramid};
use super::{AttentionError, AttentionState};
use crate::msg::{ImageMsg, SaliencyMap};
use crate::plane::Plane;

pub const MIN_SIDE: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct IttiConfig {
    pub centers: Vec<usize>,
    pub deltas: Vec<usize>,
    pub depth: usize,
    pub out_level: usize,
    /// Enabled channels in gain order: intensity, color, orientation, motion.
    pub channels: [bool; 4],
}

impl Default for IttiConfig {
    fn default() -> Self {
        IttiConfig {
            centers: vec![2, 3, 4],
            deltas: vec![3, 4],
            depth: 8,
            out_level: 2,
            channels: [true; 4],
        }
    }
}

impl IttiConfig {
    /// Parses a channel set such as `"icom"` or `"intensity,color"`.
    pub fn parse_channels(s: &str) -> Result<[bool; 4], String> {
        let mut on = [false; 4];
        let tokens: Vec<&str> = if s.contains(',') {
            s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
        } else {
            s.trim().split("").filter(|t| !t.is_empty()).collect()
        };
        for t in tokens {
            let i = match t {
                "i" | "intensity" => 0,
                "c" | "color" | "colour" => 1,
                "o" | "orientation" => 2,
                "m" | "motion" => 3,
                _ => return Err(format!("unknown channel {t:?}")),
            };
            on[i] = true;
        }
        Ok(on)
    }

    pub fn channels_string(&self) -> String {
        "icom"
            .chars()
            .zip(self.channels)
            .filter(|(_, on)| *on)
            .map(|(c, _)| c)
            .collect()
    }
}

/// Sum over all scale pairs of N(center-surround), each resized to `out`.
fn across_scale(levels: &[Option<Plane>], pairs: &[(usize, usize)], out: (usize, usize)) -> Plane {
    let mut acc = Plane::new(out.0, out.1);
    for &(c, s) in pairs {
        let (Some(pc), Some(ps)) = (&levels[c], &levels[s]) else {
            continue;
        };
        acc.add_assign(&normalize_map(&cs_planes(pc, ps)).resize_bilinear(out.0, out.1));
    }
    acc
}

fn all_levels(p: Pyramid) -> Vec<Option<Plane>> {
    p.levels.into_iter().map(Some).collect()
}

/// Multi-scale centre-surround saliency. Ages the state's inhibition by
/// one frame, records this frame for motion, and masks the result with
/// the current inhibition.
pub fn itti_saliency(
    img: &ImageMsg,
    state: &mut AttentionState,
    cfg: &IttiConfig,
) -> Result<SaliencyMap, AttentionError> {
    if img.width.min(img.height) < MIN_SIDE {
        return Err(AttentionError::TooSmall {
            width: img.width,
            height: img.height,
            min: MIN_SIDE,
        });
    }
    let (w, h) = (img.width as usize, img.height as usize);
    state.ensure_source_dims(w, h);
    state.advance_frame(1.0);

    let l = max_level(w, h, cfg.depth);
    let pairs = effective_scales(&cfg.centers, &cfg.deltas, l);
    let fc = FeatureChannels::from_image(img);
    let prev = state.prev_intensity.replace(fc.intensity.clone());
    let ip = Pyramid::build(fc.intensity, l);
    let out = ip.level(cfg.out_level.min(l)).dims();

    let gains: Vec<f32> = (0..4)
        .map(|i| if cfg.channels[i] { state.gains[i].max(0.0) } else { 0.0 })
        .collect();
    let mut s = Plane::new(out.0, out.1);
    let mut total = 0f32;
    for (ch, &g) in gains.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        total += g;
        let conspicuity = match ch {
            0 => across_scale(&all_levels(ip.clone()), &pairs, out),
            1 => {
                let mut c = across_scale(&all_levels(Pyramid::build(fc.rg.clone(), l)), &pairs, out);
                c.add_assign(&across_scale(
                    &all_levels(Pyramid::build(fc.by.clone(), l)),
                    &pairs,
                    out,
                ));
                c
            }
            2 => {
                let mut used = vec![false; l + 1];
                for &(c, s) in &pairs {
                    used[c] = true;
                    used[s] = true;
                }
                let mut acc = Plane::new(out.0, out.1);
                for theta in ORIENTATIONS_DEG {
                    let k = gabor_pair(theta);
                    let levels: Vec<Option<Plane>> = ip
                        .levels
                        .iter()
                        .zip(&used)
                        .map(|(p, &u)| u.then(|| gabor_energy(p, &k)))
                        .collect();
                    acc.add_assign(&across_scale(&levels, &pairs, out));
                }
                acc
            }
            _ => match &prev {
                Some(p) if p.dims() == (w, h) => {
                    let diff = ip.levels[0].zip_map(p, |a, b| (a - b).abs());
                    across_scale(&all_levels(Pyramid::build(diff, l)), &pairs, out)
                }
                _ => Plane::new(out.0, out.1),
            },
        };
        let mut n = normalize_map(&conspicuity);
        n.scale(g);
        s.add_assign(&n);
    }
    if total > 0.0 {
        s.scale(1.0 / total);
    }
    let mut s = s.rescaled_unit();
    let inh = state.inhibition_at(out.0, out.1);
    s = s.zip_map(&inh, |v, i| (v * (1.0 - i)).clamp(0.0, 1.0));
    Ok(SaliencyMap::new(img.header.clone(), out.0 as u32, out.1 as u32, s.data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{apply_feedback, Feedback};
    use crate::msg::{BoundingBox, Header, InhibitRegion, TopDownGain};

    fn canvas(w: u32, h: u32, bg: [u8; 3]) -> ImageMsg {
        let px = (0..w * h).flat_map(|_| bg).collect();
        ImageMsg::new(Header::new(3, 42), w, h, 3, px)
    }

    fn disk(img: &mut ImageMsg, cx: i64, cy: i64, r: i64, col: [u8; 3]) {
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    let i = (y as usize * img.width as usize + x as usize) * 3;
                    img.pixels[i..i + 3].copy_from_slice(&col);
                }
            }
        }
    }

    fn argmax_src(m: &SaliencyMap, img: &ImageMsg) -> (f64, f64) {
        let p = Plane::from_vec(m.width as usize, m.height as usize, m.values.clone());
        let (x, y) = p.argmax();
        let k = img.width as f64 / m.width as f64;
        ((x as f64 + 0.5) * k, (y as f64 + 0.5) * k)
    }

    #[test]
    fn constant_gray_is_zero_and_stamped() {
        let img = canvas(64, 64, [128; 3]);
        let s = itti_saliency(&img, &mut AttentionState::new(), &IttiConfig::default()).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert_eq!(s.header, img.header);
        assert_eq!((s.width, s.height), (16, 16));
    }

    #[test]
    fn too_small() {
        let img = canvas(15, 64, [0; 3]);
        assert!(matches!(
            itti_saliency(&img, &mut AttentionState::new(), &IttiConfig::default()),
            Err(AttentionError::TooSmall { .. })
        ));
        assert!(itti_saliency(
            &canvas(16, 16, [0; 3]),
            &mut AttentionState::new(),
            &IttiConfig::default()
        )
        .is_ok());
    }

    #[test]
    fn red_among_green_pops_out() {
        // every position of the odd disk on a 3x3 grid
        for odd in 0..9 {
            let mut img = canvas(128, 128, [128; 3]);
            let mut red = (0, 0);
            for k in 0..9 {
                let (cx, cy) = (24 + (k % 3) * 40, 24 + (k / 3) * 40);
                let col = if k == odd { [255, 0, 0] } else { [0, 255, 0] };
                if k == odd {
                    red = (cx, cy);
                }
                disk(&mut img, cx, cy, 8, col);
            }
            let s = itti_saliency(&img, &mut AttentionState::new(), &IttiConfig::default()).unwrap();
            let (x, y) = argmax_src(&s, &img);
            let d2 = (x - red.0 as f64).powi(2) + (y - red.1 as f64).powi(2);
            assert!(d2 <= 64.0, "odd={odd} argmax=({x},{y}) red={red:?}");
        }
    }

    #[test]
    fn unit_gains_identical_and_zero_gains_degenerate() {
        let mut img = canvas(64, 64, [30; 3]);
        disk(&mut img, 20, 40, 6, [250, 250, 250]);
        let cfg = IttiConfig::default();
        let plain = itti_saliency(&img, &mut AttentionState::new(), &cfg).unwrap();
        let mut st = AttentionState::new();
        let g = TopDownGain {
            header: Header::default(),
            gains: [1.0; 4],
        };
        apply_feedback(&mut st, Feedback::Gain(&g));
        assert_eq!(itti_saliency(&img, &mut st, &cfg).unwrap(), plain);
        let g0 = TopDownGain {
            header: Header::default(),
            gains: [0.0; 4],
        };
        apply_feedback(&mut st, Feedback::Gain(&g0));
        let z = itti_saliency(&img, &mut st, &cfg).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inhibition_masks_region() {
        let mut img = canvas(64, 64, [30; 3]);
        disk(&mut img, 20, 40, 6, [250, 250, 250]);
        let mut st = AttentionState::new();
        let r = InhibitRegion {
            header: Header::default(),
            bbox: BoundingBox::new(0, 0, 64, 64),
            decay_frames: 3,
        };
        apply_feedback(&mut st, Feedback::Inhibit(&r));
        let s = itti_saliency(&img, &mut st, &IttiConfig::default()).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn motion_only_sees_the_mover() {
        let cfg = IttiConfig {
            channels: IttiConfig::parse_channels("m").unwrap(),
            ..IttiConfig::default()
        };
        let mut st = AttentionState::new();
        let mut a = canvas(64, 64, [60; 3]);
        disk(&mut a, 16, 16, 5, [200; 3]);
        let first = itti_saliency(&a, &mut st, &cfg).unwrap();
        assert!(first.values.iter().all(|&v| v == 0.0));
        // the static disk stays put, a second one appears
        let mut b = a.clone();
        disk(&mut b, 44, 44, 5, [200; 3]);
        let s = itti_saliency(&b, &mut st, &cfg).unwrap();
        let (x, y) = argmax_src(&s, &b);
        assert!((x - 44.0).abs() <= 8.0 && (y - 44.0).abs() <= 8.0, "({x},{y})");
    }

    fn bar(img: &mut ImageMsg, cx: i64, cy: i64, vertical: bool, col: [u8; 3]) {
        let (hw, hh) = if vertical { (2, 8) } else { (8, 2) };
        for y in cy - hh..cy + hh {
            for x in cx - hw..cx + hw {
                let i = (y as usize * img.width as usize + x as usize) * 3;
                img.pixels[i..i + 3].copy_from_slice(&col);
            }
        }
    }

    fn grid_center(k: i64) -> (i64, i64) {
        (24 + (k % 3) * 40, 24 + (k / 3) * 40)
    }

    fn near(a: (f64, f64), b: (i64, i64), r: f64) -> bool {
        (a.0 - b.0 as f64).powi(2) + (a.1 - b.1 as f64).powi(2) <= r * r
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(9))]
        #[test]
        fn intensity_odd_one_out(odd in 0i64..9) {
            let mut img = canvas(128, 128, [60; 3]);
            for k in 0..9 {
                let (cx, cy) = grid_center(k);
                disk(&mut img, cx, cy, 8, if k == odd { [250; 3] } else { [120; 3] });
            }
            let s = itti_saliency(&img, &mut AttentionState::new(), &IttiConfig::default()).unwrap();
            let a = argmax_src(&s, &img);
            proptest::prop_assert!(near(a, grid_center(odd), 10.0), "{:?} vs {:?}", a, grid_center(odd));
        }

        #[test]
        fn orientation_odd_one_out(odd in 0i64..9) {
            let mut img = canvas(128, 128, [60; 3]);
            for k in 0..9 {
                let (cx, cy) = grid_center(k);
                bar(&mut img, cx, cy, k == odd, [200; 3]);
            }
            let s = itti_saliency(&img, &mut AttentionState::new(), &IttiConfig::default()).unwrap();
            let a = argmax_src(&s, &img);
            proptest::prop_assert!(near(a, grid_center(odd), 10.0), "{:?} vs {:?}", a, grid_center(odd));
        }
    }

    #[test]
    fn orientation_gain_moves_argmax() {
        // odd vertical bar, a little dimmer than the horizontal ones
        let mut img = canvas(128, 128, [60; 3]);
        for k in 0..9 {
            let (cx, cy) = grid_center(k);
            bar(&mut img, cx, cy, k == 4, if k == 4 { [180; 3] } else { [200; 3] });
        }
        let on = itti_saliency(&img, &mut AttentionState::new(), &IttiConfig::default()).unwrap();
        assert!(near(argmax_src(&on, &img), grid_center(4), 10.0));
        let mut st = AttentionState::new();
        st.gains = [1.0, 1.0, 0.0, 1.0];
        let off = itti_saliency(&img, &mut st, &IttiConfig::default()).unwrap();
        let a = argmax_src(&off, &img);
        assert!(!near(a, grid_center(4), 10.0), "still on the bar at {a:?}");
    }

    #[test]
    fn channel_parsing() {
        assert_eq!(IttiConfig::parse_channels("io").unwrap(), [true, false, true, false]);
        assert_eq!(
            IttiConfig::parse_channels("color,motion").unwrap(),
            [false, true, false, true]
        );
        assert!(IttiConfig::parse_channels("x").is_err());
        assert_eq!(IttiConfig::default().channels_string(), "icom");
    }
}
