use rustfft::FftPlanner;

pub use rustfft::num_complex::Complex64 as Complex;

use super::AttentionError;

/// Row-major complex map.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex>,
}

impl ComplexMap {
    pub fn from_real(width: usize, height: usize, re: &[f64]) -> Self {
        ComplexMap {
            width,
            height,
            data: re.iter().map(|&v| Complex::new(v, 0.0)).collect(),
        }
    }
}

/// 2D DFT by rows then columns. The inverse is scaled by 1/(w*h).
pub fn fft2d(m: &ComplexMap, inverse: bool) -> Result<ComplexMap, AttentionError> {
    let (w, h) = (m.width, m.height);
    if !w.is_power_of_two() || !h.is_power_of_two() {
        return Err(AttentionError::NonPowerOfTwo { width: w, height: h });
    }
    let mut planner = FftPlanner::<f64>::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    let mut data = m.data.clone();
    row.process(&mut data);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
    if inverse {
        let k = 1.0 / (w * h) as f64;
        data.iter_mut().for_each(|v| *v *= k);
    }
    Ok(ComplexMap {
        width: w,
        height: h,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_dft(m: &ComplexMap) -> Vec<Complex> {
        let (w, h) = (m.width, m.height);
        let mut out = vec![Complex::new(0.0, 0.0); w * h];
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let a = -2.0 * std::f64::consts::PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                        acc += m.data[y * w + x] * Complex::new(a.cos(), a.sin());
                    }
                }
                out[v * w + u] = acc;
            }
        }
        out
    }

    #[test]
    fn ones_give_dc_only() {
        let f = fft2d(&ComplexMap::from_real(4, 4, &[1.0; 16]), false).unwrap();
        assert!((f.data[0] - Complex::new(16.0, 0.0)).norm() < 1e-9);
        assert!(f.data[1..].iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut re = vec![0.0; 16];
        re[0] = 1.0;
        let f = fft2d(&ComplexMap::from_real(8, 2, &re), false).unwrap();
        assert!(f.data.iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn non_power_of_two() {
        assert_eq!(
            fft2d(&ComplexMap::from_real(6, 4, &[0.0; 24]), false),
            Err(AttentionError::NonPowerOfTwo { width: 6, height: 4 })
        );
    }

    fn arb_map() -> impl Strategy<Value = ComplexMap> {
        (0u32..4, 0u32..4).prop_flat_map(|(a, b)| {
            let (w, h) = (1usize << a, 1usize << b);
            proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), w * h).prop_map(move |v| ComplexMap {
                width: w,
                height: h,
                data: v.into_iter().map(|(r, i)| Complex::new(r, i)).collect(),
            })
        })
    }

    proptest! {
        #[test]
        fn matches_naive_dft(m in arb_map()) {
            let f = fft2d(&m, false).unwrap();
            for (a, b) in f.data.iter().zip(naive_dft(&m)) {
                prop_assert!((a - b).norm() < 1e-9);
            }
        }

        #[test]
        fn random_8x8_vs_naive(v in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let m = ComplexMap::from_real(8, 8, &v);
            let f = fft2d(&m, false).unwrap();
            let max = f.data.iter().zip(naive_dft(&m)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(max < 1e-9);
        }

        #[test]
        fn round_trip_and_parseval(m in arb_map()) {
            let f = fft2d(&m, false).unwrap();
            let back = fft2d(&f, true).unwrap();
            let scale = m.data.iter().map(|v| v.norm()).fold(1e-12, f64::max);
            for (a, b) in back.data.iter().zip(&m.data) {
                prop_assert!((a - b).norm() <= 1e-6 * scale);
            }
            let e_time: f64 = m.data.iter().map(|v| v.norm_sqr()).sum();
            let e_freq: f64 = f.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / m.data.len() as f64;
            prop_assert!((e_time - e_freq).abs() <= 1e-6 * e_time.max(1e-12));
        }
    }
}
