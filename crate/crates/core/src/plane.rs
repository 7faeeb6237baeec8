//! Single-channel float rasters and the filters shared by the input and
//! attention layers. Borders are always handled by edge replication.

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

/// Normalized Gaussian taps for `radius = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer size");
        Plane { width, height, data }
    }

    pub fn filled(width: usize, height: usize, v: f32) -> Self {
        Plane {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Edge-replicated access.
    #[inline]
    pub fn clamped(&self, x: i64, y: i64) -> f32 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.at(x, y)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Plane {
        Plane::from_vec(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Plane, f: impl Fn(f32, f32) -> f32) -> Plane {
        assert_eq!(self.dims(), other.dims());
        Plane::from_vec(
            self.width,
            self.height,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Plane) {
        assert_eq!(self.dims(), other.dims());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, k: f32) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Min-max rescale to [0,1]; a constant plane becomes all zeros.
    pub fn rescaled_unit(&self) -> Plane {
        let (lo, hi) = self.min_max();
        // also catches NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(hi > lo) {
            return Plane::new(self.width, self.height);
        }
        let span = hi - lo;
        self.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
    }

    /// Index of the largest value; ties go to the smallest row-major index.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn mean(&self) -> f32 {
        (self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64) as f32
    }

    /// Separable convolution with a symmetric odd-length kernel.
    pub fn convolve_separable(&self, k: &[f64]) -> Plane {
        let r = (k.len() / 2) as i64;
        let (w, h) = (self.width, self.height);
        let mut tmp = vec![0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    acc += kv * self.clamped(x as i64 + j as i64 - r, y as i64) as f64;
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = Plane::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    let yy = (y as i64 + j as i64 - r).clamp(0, h as i64 - 1) as usize;
                    acc += kv * tmp[yy * w + x];
                }
                out.data[y * w + x] = acc as f32;
            }
        }
        out
    }

    pub fn gaussian_blur(&self, sigma: f64) -> Plane {
        self.convolve_separable(&gaussian_kernel(sigma))
    }

    /// 3x3 mean filter.
    pub fn box_filter3(&self) -> Plane {
        self.convolve_separable(&[1.0 / 3.0; 3])
    }

    /// Bilinear resampling with half-pixel centres.
    pub fn resize_bilinear(&self, to_w: usize, to_h: usize) -> Plane {
        let (xs, ys) = (bilinear_taps(self.width, to_w), bilinear_taps(self.height, to_h));
        let mut out = Plane::new(to_w, to_h);
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = self.at(x0, y0) as f64 * (1.0 - fx) + self.at(x1, y0) as f64 * fx;
                let bot = self.at(x0, y1) as f64 * (1.0 - fx) + self.at(x1, y1) as f64 * fx;
                out.data[oy * to_w + ox] = (top * (1.0 - fy) + bot * fy) as f32;
            }
        }
        out
    }

    /// Box-averaging downsample: each output cell averages the source pixels
    /// whose index range it covers.
    pub fn downsample_area(&self, to_w: usize, to_h: usize) -> Plane {
        if (to_w, to_h) == self.dims() {
            return self.clone();
        }
        let span = |i: usize, from: usize, to: usize| {
            let a = i * from / to;
            let b = ((i + 1) * from).div_ceil(to).max(a + 1).min(from);
            a..b
        };
        let mut out = Plane::new(to_w, to_h);
        for oy in 0..to_h {
            let yr = span(oy, self.height, to_h);
            for ox in 0..to_w {
                let xr = span(ox, self.width, to_w);
                let mut acc = 0f64;
                for y in yr.clone() {
                    for x in xr.clone() {
                        acc += self.at(x, y) as f64;
                    }
                }
                out.data[oy * to_w + ox] = (acc / (yr.len() * xr.len()) as f64) as f32;
            }
        }
        out
    }

    /// Halves each dimension (ceil(n/2)), sampling at the centre of every
    /// 2x2 block so coarse pixel `x` sits at fine `2x + 0.5`, the same
    /// convention `resize_bilinear` uses. The last row/column of an odd
    /// size is replicated.
    pub fn decimate2(&self) -> Plane {
        let (w, h) = (self.width.div_ceil(2), self.height.div_ceil(2));
        let (mx, my) = (self.width - 1, self.height - 1);
        let mut out = Plane::new(w, h);
        for y in 0..h {
            let (y0, y1) = (2 * y, (2 * y + 1).min(my));
            for x in 0..w {
                let (x0, x1) = (2 * x, (2 * x + 1).min(mx));
                let sum = self.at(x0, y0) + self.at(x1, y0) + self.at(x0, y1) + self.at(x1, y1);
                out.data[y * w + x] = sum * 0.25;
            }
        }
        out
    }
}

/// For each destination index: (lower source index, upper source index, weight of upper).
pub(crate) fn bilinear_taps(from: usize, to: usize) -> Vec<(usize, usize, f64)> {
    let scale = from as f64 / to as f64;
    (0..to)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (from - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(from - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}
