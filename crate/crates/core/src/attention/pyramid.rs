use super::AttentionError;
use crate::plane::Plane;

/// Gaussian pyramid: level k+1 is level k blurred with sigma 1 and
/// decimated by two.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<Plane>,
}

/// Deepest usable level for a `w x h` image given a configured depth.
pub fn max_level(w: usize, h: usize, depth: usize) -> usize {
    let short = w.min(h).max(1);
    let lg = (usize::BITS - 1 - short.leading_zeros()) as usize;
    depth.min(lg.saturating_sub(2))
}

impl Pyramid {
    /// Builds levels `0..=top`.
    pub fn build(base: Plane, top: usize) -> Pyramid {
        let mut levels = vec![base];
        for _ in 0..top {
            let next = levels.last().unwrap().gaussian_blur(1.0).decimate2();
            levels.push(next);
        }
        Pyramid { levels }
    }

    /// Highest level index.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &Plane {
        &self.levels[k]
    }
}

/// `|p[c] - upsample(p[s])|` at level c's size.
pub fn center_surround(p: &Pyramid, c: usize, s: usize) -> Result<Plane, AttentionError> {
    if c >= s || s > p.depth() {
        return Err(AttentionError::BadScales {
            c,
            s,
            levels: p.depth(),
        });
    }
    Ok(cs_planes(&p.levels[c], &p.levels[s]))
}

pub(crate) fn cs_planes(center: &Plane, surround: &Plane) -> Plane {
    let up = surround.resize_bilinear(center.width, center.height);
    center.zip_map(&up, |a, b| (a - b).abs())
}

/// Applies the auto-shrink rule to configured `(centres, deltas)` for a
/// pyramid of depth `l`. Returns sorted, de-duplicated `(c, s)` pairs.
pub fn effective_scales(centers: &[usize], deltas: &[usize], l: usize) -> Vec<(usize, usize)> {
    let need = centers.iter().max().copied().unwrap_or(0) + deltas.iter().max().copied().unwrap_or(0);
    let shift = need.saturating_sub(l);
    let mut pairs: Vec<(usize, usize)> = centers
        .iter()
        .flat_map(|&c| {
            let c = c.saturating_sub(shift);
            deltas.iter().map(move |&d| (c, (c + d).min(l)))
        })
        .filter(|&(c, s)| c < s)
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}
