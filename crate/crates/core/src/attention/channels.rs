use crate::msg::ImageMsg;
use crate::plane::Plane;

pub const GABOR_SIZE: usize = 9;
pub const GABOR_WAVELENGTH: f64 = 7.0;
pub const ORIENTATIONS_DEG: [f64; 4] = [0.0, 45.0, 90.0, 135.0];

/// Per-pixel intensity and rectified colour opponents, all >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureChannels {
    pub intensity: Plane,
    pub rg: Plane,
    pub by: Plane,
}

impl FeatureChannels {
    pub fn from_image(img: &ImageMsg) -> FeatureChannels {
        let (w, h) = (img.width as usize, img.height as usize);
        let c = img.channels as usize;
        let mut i_p = Plane::new(w, h);
        let mut rg_p = Plane::new(w, h);
        let mut by_p = Plane::new(w, h);
        for (k, px) in img.pixels.chunks_exact(c).enumerate() {
            let (r, g, b) = if c >= 3 {
                (px[0] as f32, px[1] as f32, px[2] as f32)
            } else {
                let v = px[0] as f32;
                (v, v, v)
            };
            let rr = (r - (g + b) / 2.0).max(0.0);
            let gg = (g - (r + b) / 2.0).max(0.0);
            let bb = (b - (r + g) / 2.0).max(0.0);
            let yy = ((r + g) / 2.0 - (r - g).abs() / 2.0 - b).max(0.0);
            i_p.data[k] = (r + g + b) / 3.0;
            rg_p.data[k] = (rr - gg).max(0.0);
            by_p.data[k] = (bb - yy).max(0.0);
        }
        FeatureChannels {
            intensity: i_p,
            rg: rg_p,
            by: by_p,
        }
    }
}

/// Even (zero-mean cosine) and odd (sine) Gabor kernels, row-major.
pub fn gabor_pair(theta_deg: f64) -> (Vec<f64>, Vec<f64>) {
    let sigma = 0.56 * GABOR_WAVELENGTH;
    let r = (GABOR_SIZE / 2) as i64;
    let (s, c) = theta_deg.to_radians().sin_cos();
    let mut even = Vec::with_capacity(GABOR_SIZE * GABOR_SIZE);
    let mut odd = Vec::with_capacity(GABOR_SIZE * GABOR_SIZE);
    for y in -r..=r {
        for x in -r..=r {
            let (xf, yf) = (x as f64, y as f64);
            let xr = xf * c + yf * s;
            let env = (-(xf * xf + yf * yf) / (2.0 * sigma * sigma)).exp();
            let phase = 2.0 * std::f64::consts::PI * xr / GABOR_WAVELENGTH;
            even.push(env * phase.cos());
            odd.push(env * phase.sin());
        }
    }
    let mean = even.iter().sum::<f64>() / even.len() as f64;
    even.iter_mut().for_each(|v| *v -= mean);
    (even, odd)
}

/// Quadrature energy `sqrt(even^2 + odd^2)` with edge replication.
pub fn gabor_energy(p: &Plane, kernels: &(Vec<f64>, Vec<f64>)) -> Plane {
    let (w, h) = p.dims();
    let n = GABOR_SIZE;
    let r = n / 2;
    let mut out = Plane::new(w, h);
    let mut patch = vec![0f32; n * n];
    for y in 0..h {
        let inner_y = y >= r && y + r < h;
        for x in 0..w {
            let (mut e, mut o) = (0f64, 0f64);
            if inner_y && x >= r && x + r < w {
                for ky in 0..n {
                    let row = &p.data[(y + ky - r) * w + x - r..][..n];
                    let (ke, ko) = (&kernels.0[ky * n..][..n], &kernels.1[ky * n..][..n]);
                    for i in 0..n {
                        e += row[i] as f64 * ke[i];
                        o += row[i] as f64 * ko[i];
                    }
                }
            } else {
                let mut i = 0;
                for dy in -(r as i64)..=r as i64 {
                    for dx in -(r as i64)..=r as i64 {
                        patch[i] = p.clamped(x as i64 + dx, y as i64 + dy);
                        i += 1;
                    }
                }
                for ((&v, ke), ko) in patch.iter().zip(&kernels.0).zip(&kernels.1) {
                    e += v as f64 * ke;
                    o += v as f64 * ko;
                }
            }
            out.data[y * w + x] = (e * e + o * o).sqrt() as f32;
        }
    }
    out
}
