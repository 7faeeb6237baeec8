/// Axis-aligned box in pixel coordinates, `x` = column, `y` = row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        self.w >= 1 && self.h >= 1
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.is_valid() && self.right() <= width as u64 && self.bottom() <= height as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && (x as u64) < self.right() && (y as u64) < self.bottom()
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let x0 = self.x.max(other.x) as u64;
        let y0 = self.y.max(other.y) as u64;
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// Grows the box by `margin` on every side, clamped to `width`×`height`.
    pub fn inflate(&self, margin: u32, width: u32, height: u32) -> BoundingBox {
        let x0 = self.x.saturating_sub(margin);
        let y0 = self.y.saturating_sub(margin);
        let x1 = (self.right() + margin as u64).min(width as u64) as u32;
        let y1 = (self.bottom() + margin as u64).min(height as u64) as u32;
        BoundingBox::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn bbox_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// Maps a box between two raster sizes.
///
/// The top-left corner is floor-rounded and the bottom-right corner
/// ceil-rounded, so the result covers every pixel the source box touches.
/// The result is clamped to `to` and keeps `w, h >= 1`.
pub fn bbox_scale(b: &BoundingBox, from: (u32, u32), to: (u32, u32)) -> BoundingBox {
    let (fw, fh) = (from.0.max(1) as u64, from.1.max(1) as u64);
    let (tw, th) = (to.0.max(1) as u64, to.1.max(1) as u64);
    let floor = |v: u64, t: u64, f: u64| v * t / f;
    let ceil = |v: u64, t: u64, f: u64| (v * t).div_ceil(f);

    let x0 = floor(b.x as u64, tw, fw).min(tw - 1);
    let y0 = floor(b.y as u64, th, fh).min(th - 1);
    let x1 = ceil(b.right(), tw, fw).clamp(x0 + 1, tw);
    let y1 = ceil(b.bottom(), th, fh).clamp(y0 + 1, th);
    BoundingBox::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
        let mut inter = 0u64;
        let mut union = 0u64;
        for y in 0..64 {
            for x in 0..64 {
                let (ia, ib) = (a.contains(x, y), b.contains(x, y));
                inter += (ia && ib) as u64;
                union += (ia || ib) as u64;
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_examples() {
        let a = BoundingBox::new(0, 0, 10, 10);
        assert_eq!(bbox_iou(&a, &a), 1.0);
        assert_eq!(bbox_iou(&a, &BoundingBox::new(20, 20, 5, 5)), 0.0);
        let b = BoundingBox::new(5, 0, 10, 10);
        assert!((bbox_iou(&a, &b) - 50.0 / 150.0).abs() < 1e-12);
        assert!((brute_iou(&a, &b) - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn scale_examples() {
        let b = BoundingBox::new(8, 8, 16, 16);
        assert_eq!(bbox_scale(&b, (64, 64), (256, 256)), BoundingBox::new(32, 32, 64, 64));
        let edge = bbox_scale(&BoundingBox::new(63, 63, 1, 1), (64, 64), (100, 100));
        // floor(63*100/64) = 98, ceil(64*100/64) = 100
        assert_eq!(edge, BoundingBox::new(98, 98, 2, 2));
        assert_eq!(edge.right(), 100);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (0u32..48, 0u32..48, 1u32..16, 1u32..16).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_bounded_matches_pixel_count(a in arb_box(), b in arb_box()) {
            let ab = bbox_iou(&a, &b);
            prop_assert_eq!(ab, bbox_iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, a == b);
            prop_assert!((ab - brute_iou(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn scale_identity_and_round_trip(b in arb_box(), w2 in 1u32..300, h2 in 1u32..300) {
            let d = (64u32, 64u32);
            prop_assert_eq!(bbox_scale(&b, d, d), b);
            let there = bbox_scale(&b, d, (w2, h2));
            prop_assert!(there.fits_in(w2, h2));
            let back = bbox_scale(&there, (w2, h2), d);
            let (cx, cy) = (b.x + b.w / 2, b.y + b.h / 2);
            prop_assert!(back.contains(cx, cy), "{:?} -> {:?} -> {:?}", b, there, back);
        }
    }
}
