use super::fft::{fft2d, Complex, ComplexMap};
use super::{AttentionError, AttentionState};
use crate::msg::{ImageMsg, SaliencyMap};
use crate::plane::Plane;

pub const SPECTRAL_SIZE: usize = 64;
pub const SPECTRAL_MIN_SIDE: u32 = 8;
pub const SPECTRAL_BLUR_SIGMA: f64 = 3.0;
/// Amplitudes at or below this fraction of the peak count as zero.
pub const ZERO_BIN_REL: f64 = 1e-9;

/// Spectral-residual saliency at a fixed 64x64 resolution.
pub fn spectral_residual(img: &ImageMsg) -> Result<SaliencyMap, AttentionError> {
    if img.width.min(img.height) < SPECTRAL_MIN_SIDE {
        return Err(AttentionError::TooSmall {
            width: img.width,
            height: img.height,
            min: SPECTRAL_MIN_SIDE,
        });
    }
    let n = SPECTRAL_SIZE;
    let gray = Plane::from_vec(img.width as usize, img.height as usize, img.to_gray_f32()).resize_bilinear(n, n);
    let re: Vec<f64> = gray.data.iter().map(|&v| v as f64).collect();
    let f = fft2d(&ComplexMap::from_real(n, n, &re), false)?;

    // Bins with numerically zero amplitude have no meaningful log or phase.
    // They are left out of the local average and carry no residual; with no
    // such bins this is exactly L - box3(L).
    let peak = f.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let live: Vec<bool> = f.data.iter().map(|c| c.norm() > ZERO_BIN_REL * peak).collect();
    let log_amp = Plane::from_vec(
        n,
        n,
        f.data
            .iter()
            .zip(&live)
            .map(|(c, &ok)| if ok { (c.norm() + 1e-8).ln() as f32 } else { 0.0 })
            .collect(),
    );
    let sum = log_amp.box_filter3();
    let weight = Plane::from_vec(n, n, live.iter().map(|&ok| ok as u8 as f32).collect()).box_filter3();
    let spec: Vec<Complex> = f
        .data
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if !live[i] {
                return Complex::new(0.0, 0.0);
            }
            let r = log_amp.data[i] as f64 - sum.data[i] as f64 / weight.data[i] as f64;
            Complex::from_polar(r.exp(), c.arg())
        })
        .collect();
    let back = fft2d(
        &ComplexMap {
            width: n,
            height: n,
            data: spec,
        },
        true,
    )?;
    let s0 = Plane::from_vec(n, n, back.data.iter().map(|c| c.norm_sqr() as f32).collect());
    let s = s0.gaussian_blur(SPECTRAL_BLUR_SIGMA).rescaled_unit();
    Ok(SaliencyMap::new(img.header.clone(), n as u32, n as u32, s.data))
}

/// [`spectral_residual`] followed by the state's inhibition mask, aging the
/// inhibition by one frame first.
pub fn spectral_saliency(img: &ImageMsg, state: &mut AttentionState) -> Result<SaliencyMap, AttentionError> {
    let mut s = spectral_residual(img)?;
    state.ensure_source_dims(img.width as usize, img.height as usize);
    state.advance_frame(1.0);
    let inh = state.inhibition_at(s.width as usize, s.height as usize);
    for (v, i) in s.values.iter_mut().zip(&inh.data) {
        *v *= 1.0 - i;
    }
    Ok(s)
}
