//! PNG encoding for saliency and image previews, and decoding for input files.

use crate::msg::{Header, ImageMsg, SaliencyMap};

pub fn encode_png(width: u32, height: u32, channels: u8, pixels: &[u8]) -> Result<Vec<u8>, String> {
    let color = match channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(format!("cannot encode {c} channels")),
    };
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| e.to_string())?;
    w.write_image_data(pixels).map_err(|e| e.to_string())?;
    w.finish().map_err(|e| e.to_string())?;
    Ok(out)
}

pub fn image_to_png(img: &ImageMsg) -> Result<Vec<u8>, String> {
    encode_png(img.width, img.height, img.channels, &img.pixels)
}

/// Grayscale PNG with `v * 255` rounded.
pub fn saliency_to_png(map: &SaliencyMap) -> Result<Vec<u8>, String> {
    let px: Vec<u8> = map
        .values
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    encode_png(map.width, map.height, 1, &px)
}

/// 8-bit grayscale or RGB (alpha dropped); other layouts are expanded.
pub fn decode_png(bytes: &[u8]) -> Result<ImageMsg, String> {
    let mut dec = png::Decoder::new(bytes);
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(|e| e.to_string())?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width, info.height);
    let (channels, pixels) = match info.color_type {
        png::ColorType::Grayscale => (1, buf),
        png::ColorType::GrayscaleAlpha => (1, buf.chunks_exact(2).map(|p| p[0]).collect()),
        png::ColorType::Rgb => (3, buf),
        png::ColorType::Rgba => (3, buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect()),
        other => return Err(format!("unsupported PNG colour type {other:?}")),
    };
    Ok(ImageMsg::new(Header::default(), w, h, channels, pixels))
}
