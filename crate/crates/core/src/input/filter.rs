use super::InputError;
use crate::msg::ImageMsg;
use crate::plane::Plane;

fn split_channels(img: &ImageMsg) -> Vec<Plane> {
    let (w, h, c) = (img.width as usize, img.height as usize, img.channels as usize);
    (0..c)
        .map(|ch| Plane::from_vec(w, h, img.pixels.iter().skip(ch).step_by(c).map(|&p| p as f32).collect()))
        .collect()
}

fn merge_channels(template: &ImageMsg, planes: &[Plane]) -> ImageMsg {
    let (w, h) = planes[0].dims();
    let c = planes.len();
    let mut pixels = vec![0u8; w * h * c];
    for (ch, p) in planes.iter().enumerate() {
        for (i, v) in p.data.iter().enumerate() {
            pixels[i * c + ch] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    ImageMsg::new(template.header.clone(), w as u32, h as u32, c as u8, pixels)
}

/// Separable Gaussian smoothing per channel, edge-replicated borders.
pub fn gaussian_blur(img: &ImageMsg, sigma: f64) -> Result<ImageMsg, InputError> {
    let limit = img.width.min(img.height) as f64 / 4.0;
    if !(sigma.is_finite() && sigma > 0.0 && sigma <= limit) {
        return Err(InputError::BadSigma { sigma, limit });
    }
    let planes: Vec<Plane> = split_channels(img).iter().map(|p| p.gaussian_blur(sigma)).collect();
    Ok(merge_channels(img, &planes))
}

/// Bilinear resize with half-pixel centres; sizes of 0 are raised to 1.
pub fn resize_bilinear(img: &ImageMsg, to: (u32, u32)) -> ImageMsg {
    let (tw, th) = (to.0.max(1) as usize, to.1.max(1) as usize);
    if (tw, th) == (img.width as usize, img.height as usize) {
        return img.clone();
    }
    let planes: Vec<Plane> = split_channels(img).iter().map(|p| p.resize_bilinear(tw, th)).collect();
    merge_channels(img, &planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msg::Header;
    use proptest::prelude::*;

    fn gray(w: u32, h: u32, f: impl Fn(u32, u32) -> u8) -> ImageMsg {
        let px = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        ImageMsg::new(Header::default(), w, h, 1, px)
    }

    /// Straight-from-the-definition weights, no shared code with the filter.
    fn oracle_weights(sigma: f64) -> Vec<f64> {
        let r = (3.0 * sigma).ceil() as i32;
        let raw: Vec<f64> = (-r..=r)
            .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    fn oracle_blur(img: &ImageMsg, sigma: f64) -> Vec<f64> {
        let k = oracle_weights(sigma);
        let r = (k.len() / 2) as i64;
        let (w, h) = (img.width as i64, img.height as i64);
        let px = |x: i64, y: i64| img.pixels[(y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize] as f64;
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    for (i, ki) in k.iter().enumerate() {
                        acc += kj * ki * px(x + i as i64 - r, y + j as i64 - r);
                    }
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        out
    }

    #[test]
    fn constant_image_unchanged() {
        let img = gray(32, 24, |_, _| 77);
        assert_eq!(gaussian_blur(&img, 2.0).unwrap(), img);
    }

    #[test]
    fn impulse_center_matches_kernel_weight() {
        let img = gray(21, 21, |x, y| if (x, y) == (10, 10) { 255 } else { 0 });
        let out = gaussian_blur(&img, 1.0).unwrap();
        let k = oracle_weights(1.0);
        let center = k[3] * k[3] * 255.0;
        assert_eq!(out.get(10, 10, 0), center.round() as u8);
        for d in 1..4u32 {
            let v = out.get(10 + d, 10, 0);
            assert_eq!(v, out.get(10 - d, 10, 0));
            assert_eq!(v, out.get(10, 10 + d, 0));
            assert_eq!(v, out.get(10, 10 - d, 0));
        }
    }

    #[test]
    fn interior_impulse_mass_preserved() {
        let img = gray(41, 41, |x, y| if (x, y) == (20, 20) { 255 } else { 0 });
        let sigma = 1.5;
        let oracle: f64 = oracle_blur(&img, sigma).iter().sum();
        assert!((oracle - 255.0).abs() < 1e-9);
        // measured before u8 rounding, which on its own drops the faint tails
        let plane = split_channels(&img).remove(0).gaussian_blur(sigma);
        let out: f64 = plane.data.iter().map(|&v| v as f64).sum();
        assert!((out - 255.0).abs() <= 255.0 * 0.005, "sum {out}");
    }

    #[test]
    fn matches_brute_force_convolution() {
        let img = gray(17, 13, |x, y| ((x * 37 + y * 91) % 256) as u8);
        let want = oracle_blur(&img, 1.2);
        let got = gaussian_blur(&img, 1.2).unwrap();
        for (g, w) in got.pixels.iter().zip(&want) {
            assert!((*g as f64 - w).abs() <= 0.5 + 1e-6);
        }
    }

    #[test]
    fn bad_sigma() {
        let img = gray(8, 8, |_, _| 0);
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, 2.5).is_err());
        assert!(gaussian_blur(&img, f64::NAN).is_err());
    }

    #[test]
    fn resize_identity_and_checkerboard() {
        let img = gray(5, 3, |x, y| (x * 40 + y) as u8);
        assert_eq!(resize_bilinear(&img, (5, 3)), img);
        let cb = gray(2, 2, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
        let one = resize_bilinear(&cb, (1, 1));
        assert!((one.pixels[0] as i32 - 128).abs() <= 1);
    }

    fn oracle_resize(img: &ImageMsg, tw: u32, th: u32) -> ImageMsg {
        let (w, h, c) = (img.width as f64, img.height as f64, img.channels as usize);
        let mut px = Vec::new();
        for oy in 0..th {
            for ox in 0..tw {
                let sx = ((ox as f64 + 0.5) * (w / tw as f64) - 0.5).max(0.0).min(w - 1.0);
                let sy = ((oy as f64 + 0.5) * (h / th as f64) - 0.5).max(0.0).min(h - 1.0);
                let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
                let (x1, y1) = ((x0 + 1).min(img.width - 1), (y0 + 1).min(img.height - 1));
                let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                for ch in 0..c as u8 {
                    let p = |x, y| img.get(x, y, ch) as f64;
                    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                    let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                    let v = (top * (1.0 - fy) + bot * fy) as f32;
                    px.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        ImageMsg::new(img.header.clone(), tw, th, c as u8, px)
    }

    proptest! {
        #[test]
        fn down_up_matches_naive_oracle(w in 2u32..24, h in 2u32..24, seed in any::<u64>(), rgb in any::<bool>()) {
            let c = if rgb { 3 } else { 1 };
            let mut s = seed;
            let px = (0..w * h * c).map(|_| { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 56) as u8 }).collect();
            let img = ImageMsg::new(Header::default(), w, h, c as u8, px);
            let (dw, dh) = (w.div_ceil(2), h.div_ceil(2));
            let down = resize_bilinear(&img, (dw, dh));
            prop_assert_eq!(&down, &oracle_resize(&img, dw, dh));
            let up = resize_bilinear(&down, (w, h));
            prop_assert_eq!(&up, &oracle_resize(&oracle_resize(&img, dw, dh), w, h));
        }

        #[test]
        fn blur_stays_in_range(w in 4u32..20, h in 4u32..20, v in any::<u8>(), sigma in 0.3f64..1.0) {
            let img = gray(w, h, |x, y| if (x + y) % 3 == 0 { v } else { 255 - v });
            let out = gaussian_blur(&img, sigma).unwrap();
            prop_assert_eq!((out.width, out.height, out.channels), (w, h, 1));
        }
    }
}
