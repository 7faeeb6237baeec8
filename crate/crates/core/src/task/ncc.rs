use super::TaskError;
use crate::msg::BoundingBox;
use crate::plane::Plane;

/// Zero-mean normalized cross-correlation of `template` at every placement
/// inside `window` (clipped to the frame). Returns the best top-left corner
/// in frame coordinates and its score in [-1, 1]. A flat template scores 0
/// at the window's top-left; a flat patch scores 0.
pub fn ncc_match(frame: &Plane, template: &Plane, window: BoundingBox) -> Result<((u32, u32), f64), TaskError> {
    let (fw, fh) = (frame.width as u64, frame.height as u64);
    let x0 = (window.x as u64).min(fw);
    let y0 = (window.y as u64).min(fh);
    let x1 = window.right().min(fw);
    let y1 = window.bottom().min(fh);
    let (tw, th) = (template.width as u64, template.height as u64);
    if tw == 0 || th == 0 || x1 < x0 + tw || y1 < y0 + th {
        return Err(TaskError::WindowTooSmall {
            template: (tw as u32, th as u32),
            window,
        });
    }
    let n = (tw * th) as f64;
    let tmean = template.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let tz: Vec<f64> = template.data.iter().map(|&v| v as f64 - tmean).collect();
    let tnorm = tz.iter().map(|v| v * v).sum::<f64>();
    if tnorm <= 0.0 {
        return Ok(((x0 as u32, y0 as u32), 0.0));
    }
    let (tw, th) = (tw as usize, th as usize);
    let mut best = ((x0 as u32, y0 as u32), f64::NEG_INFINITY);
    for py in y0 as usize..=(y1 as usize - th) {
        for px in x0 as usize..=(x1 as usize - tw) {
            let (mut s, mut s2, mut st) = (0f64, 0f64, 0f64);
            for ty in 0..th {
                let row = &frame.data[(py + ty) * frame.width + px..][..tw];
                for (v, t) in row.iter().zip(&tz[ty * tw..(ty + 1) * tw]) {
                    let v = *v as f64;
                    s += v;
                    s2 += v * v;
                    st += v * t;
                }
            }
            // sum (p - pm)(t - tm) = sum p t since t is zero-mean
            let pvar = s2 - s * s / n;
            let score = if pvar > 1e-9 * n {
                (st / (pvar * tnorm).sqrt()).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            if score > best.1 {
                best = ((px as u32, py as u32), score);
            }
        }
    }
    Ok(best)
}
